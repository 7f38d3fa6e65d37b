use heavywalk::asymptotics::{fit_powerlaw, fit_slowcorrection, fit_stretched, FitModel, Window};
use heavywalk::convolution::{geometric_steps, return_series_direct, return_series_fourier_desc, Engine, ReturnSeries};
use heavywalk::group::{Ball, GroupSpec};
use heavywalk::measure::MeasureDesc;
use wasm_bindgen::prelude::*;

/// Element budget for balls built in the page.
pub const DEMO_ELEMENT_CAP: usize = 2_000_000;
/// Largest step count for the direct engine in the page.
pub const DEMO_DIRECT_NMAX: u32 = 2_000;

fn text<E: ToString>(e: E) -> String {
    e.to_string()
}

/// Ball volumes `V(0..R)` as CSV `n,volume`.
#[wasm_bindgen]
pub fn group_volumes(group: &str, radius: u32) -> Result<String, String> {
    let g = GroupSpec::parse(group).map_err(text)?;
    let ball = Ball::build(&g, radius, DEMO_ELEMENT_CAP).map_err(text)?;
    let mut s = String::from("n,volume\n");
    for (n, v) in ball.volumes().iter().enumerate() {
        s.push_str(&format!("{n},{v}\n"));
    }
    Ok(s)
}

/// Return-probability series as CSV; the Fourier engine samples eight
/// points per octave of `n`.
#[wasm_bindgen]
pub fn return_series(group: &str, measure: &str, engine: &str, nmax: u32) -> Result<String, String> {
    let g = GroupSpec::parse(group).map_err(text)?;
    let desc: MeasureDesc = measure.parse().map_err(text)?;
    let series = match engine.parse::<Engine>().map_err(text)? {
        Engine::Direct => {
            if nmax > DEMO_DIRECT_NMAX {
                return Err(format!("direct engine limited to n ≤ {DEMO_DIRECT_NMAX} here"));
            }
            let mu = desc.build(&g).map_err(text)?;
            return_series_direct(&mu, nmax as u64, u32::MAX).map_err(text)?
        }
        Engine::Fourier => return_series_fourier_desc(&desc, &g, &geometric_steps(2, nmax as u64, 8)).map_err(text)?,
    };
    Ok(series.to_csv())
}

/// Fit of a series CSV; `window` is `a:b` or empty for all points.
#[wasm_bindgen]
pub fn fit_series(csv: &str, model: &str, window: &str) -> Result<String, String> {
    let series = ReturnSeries::from_csv(csv).map_err(text)?;
    let window = if window.trim().is_empty() { Window::all() } else { window.parse().map_err(text)? };
    let result = match model.parse::<FitModel>().map_err(text)? {
        FitModel::PowerLaw => fit_powerlaw(&series, window),
        FitModel::Stretched => fit_stretched(&series, window),
        FitModel::SlowCorrection { k, delta } => fit_slowcorrection(&series, window, k, delta),
    }
    .map_err(text)?;
    Ok(result.to_csv())
}
