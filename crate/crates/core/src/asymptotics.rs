//! Decay-law fits for return series, the Griffin–Jain–Pruitt scale, and
//! verdicts against predicted regimes.

use std::fmt;

use crate::convolution::ReturnSeries;
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::numeric::{fit_line, NeumaierSum};
use crate::slowvary::{fmt_num, iterated_log, Prediction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitModel {
    PowerLaw,
    Stretched,
    SlowCorrection { k: u32, delta: f64 },
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitModel::PowerLaw => write!(f, "powerlaw"),
            FitModel::Stretched => write!(f, "stretched"),
            FitModel::SlowCorrection { k, delta } => write!(f, "slowcorr:{k}:{}", fmt_num(*delta)),
        }
    }
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "powerlaw" => return Ok(FitModel::PowerLaw),
            "stretched" => return Ok(FitModel::Stretched),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0] == "slowcorr" {
            let k = parts[1].parse().map_err(|_| Error::Parse(format!("bad depth in `{s}`")))?;
            let delta = parts[2].parse().map_err(|_| Error::Parse(format!("bad exponent in `{s}`")))?;
            if k < 2 {
                return Err(Error::Parse(format!("`{s}`: slow-correction depth starts at 2")));
            }
            return Ok(FitModel::SlowCorrection { k, delta });
        }
        Err(Error::Parse(format!("unknown fit model `{s}`")))
    }
}

/// Fit window on the half-step index `m` of `p(2m)`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Domain(format!("empty fit window [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }

    pub fn all() -> Self {
        Window { lo: 1.0, hi: f64::INFINITY }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(':').ok_or_else(|| Error::Parse(format!("window `{s}` is not `a:b`")))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad window bound `{t}`")));
        Window::new(num(a)?, num(b)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    /// slope for the power-law and stretched models, max/min of `q` for
    /// the slow-correction model
    pub exponent: f64,
    pub window: (u64, u64),
    pub points: usize,
    /// RMS in log coordinates
    pub residual: f64,
    pub predicted: Option<f64>,
    pub pass: Option<bool>,
    /// signed distance to the acceptance boundary; positive means pass
    pub margin: Option<f64>,
    pub warning: Option<String>,
}

impl FitResult {
    /// CSV with columns `model,exponent,predicted,residual,pass`.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "model,exponent,predicted,residual,pass\n{},{:e},{},{:e},{}\n",
            self.model,
            self.exponent,
            opt(self.predicted),
            self.residual,
            self.pass.map(|p| p.to_string()).unwrap_or_default()
        )
    }
}

/// Minimum number of entries in a fit window.
pub const MIN_POINTS: usize = 8;
/// Maximum tolerated `log_p_upper − log_p_lower`.
pub const MAX_GAP: f64 = 0.1;

/// `(m, log p(2m))` over the window, midpoint of the certified bounds.
fn windowed(series: &ReturnSeries, window: Window) -> Result<Vec<(f64, f64)>> {
    let mut pts = Vec::new();
    for e in series.entries.iter().filter(|e| e.n % 2 == 0) {
        let m = (e.n / 2) as f64;
        if m < window.lo || m > window.hi {
            continue;
        }
        let gap = e.log_p_upper - e.log_p_lower;
        if gap >= MAX_GAP {
            return Err(Error::BoundsTooWide(gap));
        }
        pts.push((m, 0.5 * (e.log_p_lower + e.log_p_upper)));
    }
    if pts.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!("{} entries in window, need {MIN_POINTS}", pts.len())));
    }
    Ok(pts)
}

fn span(pts: &[(f64, f64)]) -> (u64, u64) {
    (pts[0].0 as u64, pts[pts.len() - 1].0 as u64)
}

fn result(model: FitModel, exponent: f64, pts: &[(f64, f64)], residual: f64, warning: Option<String>) -> FitResult {
    FitResult {
        model,
        exponent,
        window: span(pts),
        points: pts.len(),
        residual,
        predicted: None,
        pass: None,
        margin: None,
        warning,
    }
}

/// Slope of `log p(2m)` against `log m`.
pub fn fit_powerlaw(series: &ReturnSeries, window: Window) -> Result<FitResult> {
    let pts = windowed(series, window)?;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let f = fit_line(&xs, &ys);
    Ok(result(FitModel::PowerLaw, f.slope, &pts, f.rms, None))
}

/// Slope of `log(−log p(2m))` against `log m`.
pub fn fit_stretched(series: &ReturnSeries, window: Window) -> Result<FitResult> {
    let pts = windowed(series, window)?;
    if let Some(p) = pts.iter().find(|p| p.1 >= 0.0) {
        return Err(Error::Domain(format!("log p(2m) = {} ≥ 0 at m = {}", p.1, p.0)));
    }
    let warning = pts
        .iter()
        .find(|p| -p.1 <= 10.0)
        .map(|p| format!("pre-asymptotic: −log p = {:.3} at m = {}", -p.1, p.0));
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| (-p.1).ln()).collect();
    let f = fit_line(&xs, &ys);
    Ok(result(FitModel::Stretched, f.slope, &pts, f.rms, warning))
}

/// `q(m) = −log p(2m) · (log_{[k−1]} m)^δ / m` over the window; reports
/// `max q / min q`.
pub fn fit_slowcorrection(series: &ReturnSeries, window: Window, k: u32, delta: f64) -> Result<FitResult> {
    if k < 2 {
        return Err(Error::RegimeMismatch(format!("slow correction needs depth ≥ 2, got {k}")));
    }
    let pts = windowed(series, window)?;
    let warning = pts
        .iter()
        .find(|p| -p.1 <= 10.0)
        .map(|p| format!("pre-asymptotic: −log p = {:.3} at m = {}", -p.1, p.0));
    let qs = slowcorrection_q(&pts, k, delta);
    let hi = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = qs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = qs.iter().map(|q| q.ln()).sum::<f64>() / qs.len() as f64;
    let rms = (qs.iter().map(|q| (q.ln() - mean).powi(2)).sum::<f64>() / qs.len() as f64).sqrt();
    Ok(result(FitModel::SlowCorrection { k, delta }, hi / lo, &pts, rms, warning))
}

fn slowcorrection_q(pts: &[(f64, f64)], k: u32, delta: f64) -> Vec<f64> {
    pts.iter().map(|&(m, lp)| -lp * iterated_log(k - 1, m).powf(delta) / m).collect()
}

/// `q(m)` for every even entry, for plotting.
pub fn slowcorrection_profile(series: &ReturnSeries, k: u32, delta: f64) -> Vec<(f64, f64)> {
    let pts: Vec<(f64, f64)> = series
        .entries
        .iter()
        .filter(|e| e.n % 2 == 0)
        .map(|e| ((e.n / 2) as f64, 0.5 * (e.log_p_lower + e.log_p_upper)))
        .collect();
    pts.iter().map(|p| p.0).zip(slowcorrection_q(&pts, k, delta)).collect()
}

/// Acceptance thresholds of [`verdict`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// absolute tolerance on exponents
    pub exponent: f64,
    /// bound on max/min for boundedness checks
    pub ratio: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { exponent: 0.1, ratio: 4.0 }
    }
}

/// Fits the model matching `prediction` and compares.
pub fn verdict(series: &ReturnSeries, prediction: &Prediction, window: Window, tol: Tolerance) -> Result<FitResult> {
    let (mut fit, predicted) = match *prediction {
        Prediction::Polynomial { exponent } => {
            if exponent >= 0.0 {
                return Err(Error::RegimeMismatch(format!("polynomial exponent {exponent} is not negative")));
            }
            (fit_powerlaw(series, window)?, exponent)
        }
        Prediction::Stretched { exponent, .. } => {
            if !(0.0 < exponent && exponent < 1.0) {
                return Err(Error::RegimeMismatch(format!("stretched exponent {exponent} outside (0, 1)")));
            }
            (fit_stretched(series, window)?, exponent)
        }
        Prediction::SlowCorrection { k, delta } => {
            let fit = fit_slowcorrection(series, window, k, delta)?;
            let margin = tol.ratio - fit.exponent;
            return Ok(FitResult { predicted: Some(1.0), pass: Some(margin >= 0.0), margin: Some(margin), ..fit });
        }
    };
    let margin = tol.exponent - (fit.exponent - predicted).abs();
    fit.predicted = Some(predicted);
    fit.pass = Some(margin >= 0.0);
    fit.margin = Some(margin);
    Ok(fit)
}

/// Truncated moments of a symmetric law on ℤ.
#[derive(Debug, Clone, PartialEq)]
pub struct GjpScale {
    /// `tail[x] = Σ_{|y|>x} μ(y)`, deficit included
    tail: Vec<f64>,
    /// `second[x] = Σ_{|y|≤x} y² μ(y)`
    second: Vec<f64>,
}

impl GjpScale {
    /// `G(x) = Σ_{|y|>x} μ(y)` on integers; the deficit counts as mass
    /// beyond the represented range.
    pub fn g(&self, x: u64) -> f64 {
        self.tail.get(x as usize).copied().unwrap_or(*self.tail.last().unwrap())
    }

    /// `K(x) = x⁻² Σ_{|y|≤x} y² μ(y)`, `x ≥ 1`.
    pub fn k(&self, x: u64) -> f64 {
        let s = self.second.get(x as usize).copied().unwrap_or(*self.second.last().unwrap());
        s / (x as f64 * x as f64)
    }

    pub fn q(&self, x: u64) -> f64 {
        self.g(x) + self.k(x)
    }

    /// Largest integer at which `Q` is exact.
    pub fn range(&self) -> u64 {
        (self.tail.len() - 1) as u64
    }

    /// `Q` at real `x ≥ 1`, linear in `log x` between integers.
    pub fn q_interp(&self, x: f64) -> f64 {
        let r = self.range();
        let x0 = (x.floor() as u64).clamp(1, r.max(2) - 1);
        let (a, b) = (self.q(x0), self.q(x0 + 1));
        let span = ((x0 + 1) as f64).ln() - (x0 as f64).ln();
        let s = (x.ln() - (x0 as f64).ln()) / span;
        (a.ln() + s * (b.ln() - a.ln())).exp()
    }

    /// `a_n` with `Q(a_n) = 1/n`; `log Q` is interpolated linearly in `log x`.
    pub fn a_n(&self, n: f64) -> Result<f64> {
        let target = (1.0 / n).ln();
        let r = self.range();
        if r < 2 {
            return Err(Error::InsufficientData("law supported on fewer than two radii".into()));
        }
        // first integer x with ln Q(x) ≤ target
        let lq = |x: u64| self.q(x).ln();
        if lq(r) > target {
            // beyond the support Q(x) = G(r) + S/x² exactly
            let rest = 1.0 / n - self.g(r);
            if rest <= 0.0 {
                return Err(Error::OutOfRange { value: n, lo: 1.0, hi: 1.0 / self.g(r) });
            }
            return Ok((self.second.last().unwrap() / rest).sqrt());
        }
        let (mut lo, mut hi) = (1u64, r);
        if lq(1) <= target {
            hi = 2;
        } else {
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if lq(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let x0 = hi - 1;
        let (a, b) = (lq(x0), lq(hi));
        let (la, lb) = ((x0 as f64).ln(), (hi as f64).ln());
        Ok((la + (target - a) / (b - a) * (lb - la)).exp())
    }
}

/// Griffin–Jain–Pruitt quantities of a symmetric measure on ℤ.
pub fn gjp_scale(mu: &Measure) -> Result<GjpScale> {
    if mu.group().lattice_dim() != Some(1) {
        return Err(Error::WrongGroup(mu.group().name()));
    }
    if !mu.is_symmetric() {
        return Err(Error::Domain("the scale needs a symmetric law".into()));
    }
    let r = mu.support().keys().map(|g| g.0[0].unsigned_abs()).max().unwrap_or(0) as usize;
    let mut shell = vec![0.0; r + 2];
    for (g, a) in mu.support() {
        shell[g.0[0].unsigned_abs() as usize] += a.mass;
    }
    let mut tail = vec![0.0; r + 2];
    let mut acc = NeumaierSum::default();
    acc.add(mu.deficit());
    for x in (0..r + 2).rev() {
        tail[x] = acc.total();
        acc.add(shell[x]);
    }
    let mut second = vec![0.0; r + 2];
    let mut acc = NeumaierSum::default();
    for x in 0..r + 2 {
        acc.add(shell[x] * (x as f64) * (x as f64));
        second[x] = acc.total();
    }
    Ok(GjpScale { tail, second })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::{Engine, ReturnEntry};
    use crate::group::GroupSpec;
    use crate::measure::{generator_power, lazy_uniform, stable_like};
    use crate::slowvary::SlowVaryFn;

    fn synthetic(f: impl Fn(f64) -> f64, ms: &[f64]) -> ReturnSeries {
        let entries = ms
            .iter()
            .map(|&m| {
                let l = f(m);
                ReturnEntry { n: 2 * m as u64, log_p_lower: l, log_p_upper: l, deficit: 0.0 }
            })
            .collect();
        ReturnSeries { entries, engine: Engine::Fourier, descriptor: "synthetic".into(), omitted: vec![] }
    }

    fn grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
        (0..k).map(|i| (lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).round()).collect()
    }

    #[test]
    fn exact_synthetic_fits() {
        let ms = grid(10.0, 1e6, 30);
        let s = synthetic(|m| -0.5 * m.ln(), &ms);
        let f = fit_powerlaw(&s, Window::all()).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-12 && f.residual < 1e-12);
        let s = synthetic(|m| -m.sqrt(), &ms);
        let f = fit_stretched(&s, Window::all()).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12 && f.residual < 1e-12);
        let s = synthetic(|m| -m / m.ln_1p(), &ms);
        let f = fit_slowcorrection(&s, Window::all(), 2, 1.0).unwrap();
        assert!((f.exponent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fits_ignore_constant_factors() {
        let ms = grid(100.0, 1e6, 25);
        // the stretched slope moves by O(ln c / −log p), so its window sits
        // where −log p is in the hundreds
        let far = grid(1e5, 1e7, 25);
        for c in [0.5f64, 2.0] {
            let base = fit_powerlaw(&synthetic(|m| -0.7 * m.ln(), &ms), Window::all()).unwrap();
            let shifted = fit_powerlaw(&synthetic(|m| -0.7 * m.ln() + c.ln(), &ms), Window::all()).unwrap();
            assert!((base.exponent - shifted.exponent).abs() < 1e-3);
            let base = fit_stretched(&synthetic(|m| -m.sqrt(), &far), Window::all()).unwrap();
            let shifted = fit_stretched(&synthetic(|m| -m.sqrt() + c.ln(), &far), Window::all()).unwrap();
            assert!((base.exponent - shifted.exponent).abs() < 1e-3);
        }
    }

    #[test]
    fn slow_correction_detects_wrong_regime() {
        let ms = grid(100.0, 1e6, 25);
        let f = fit_slowcorrection(&synthetic(|m| -m.sqrt(), &ms), Window::all(), 2, 1.0).unwrap();
        assert!(f.exponent > 10.0);
    }

    #[test]
    fn fit_preconditions() {
        let s = synthetic(|m| -m.ln(), &[1.0, 2.0, 3.0]);
        assert!(matches!(fit_powerlaw(&s, Window::all()), Err(Error::InsufficientData(_))));
        let mut s = synthetic(|m| -m.ln(), &grid(10.0, 1e4, 10));
        s.entries[3].log_p_upper += 0.5;
        assert!(matches!(fit_powerlaw(&s, Window::all()), Err(Error::BoundsTooWide(_))));
        let s = synthetic(|m| -m.ln(), &grid(2.0, 100.0, 10));
        assert!(fit_stretched(&s, Window::all()).unwrap().warning.is_some());
    }

    #[test]
    fn verdicts() {
        let ms = grid(1e3, 1e6, 20);
        let srw = synthetic(|m| -0.5 * m.ln() - 0.57, &ms);
        let v = verdict(&srw, &Prediction::Polynomial { exponent: -0.5 }, Window::all(), Tolerance::default()).unwrap();
        assert_eq!(v.pass, Some(true));
        let stretched = synthetic(|m| -1.4 * m.sqrt(), &ms);
        let p = Prediction::Stretched { exponent: 0.5, gamma: 1.0, trivial_kappa: true };
        assert_eq!(verdict(&stretched, &p, Window::all(), Tolerance::default()).unwrap().pass, Some(true));
        let v = verdict(&stretched, &Prediction::Polynomial { exponent: -1.0 }, Window::all(), Tolerance::default()).unwrap();
        assert_eq!(v.pass, Some(false));
        assert!(v.margin.unwrap() < 0.0);
        let bad = Prediction::Stretched { exponent: 1.5, gamma: 1.0, trivial_kappa: true };
        assert!(matches!(verdict(&stretched, &bad, Window::all(), Tolerance::default()), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn gjp_lazy_walk_closed_form() {
        let s = gjp_scale(&lazy_uniform(&GroupSpec::lattice(1).unwrap())).unwrap();
        assert_eq!(s.g(0), 0.5);
        assert_eq!(s.g(1), 0.0);
        assert_eq!(s.k(1), 0.5);
        assert_eq!(s.k(3), 0.5 / 9.0);
        for n in [2.0, 10.0, 100.0, 1e4] {
            let a = s.a_n(n).unwrap();
            assert!((a / (n / 2.0).sqrt() - 1.0).abs() < 1e-9, "n={n} a={a}");
        }
    }

    #[test]
    fn gjp_regimes() {
        let z = GroupSpec::lattice(1).unwrap();
        let stable = gjp_scale(&stable_like(&z, 1.0, 100_000).unwrap()).unwrap();
        for x in [10u64, 100, 1000] {
            let r = stable.g(x) / stable.k(x);
            assert!((1.0 / 8.0..=8.0).contains(&r), "x={x} r={r}");
        }
        let slow = gjp_scale(&generator_power(&z, SlowVaryFn::log_power(1.0).unwrap(), 1_000_000).unwrap()).unwrap();
        assert!(slow.g(10_000) / slow.k(10_000) > 5.0);
    }

    #[test]
    fn gjp_monotonicity() {
        let z = GroupSpec::lattice(1).unwrap();
        let s = gjp_scale(&stable_like(&z, 0.5, 2000).unwrap()).unwrap();
        for x in 1..s.range() {
            assert!(s.q(x + 1) <= s.q(x));
        }
        let mut prev = 0.0;
        for n in [1.5, 2.0, 5.0, 10.0, 20.0, 40.0] {
            let a = s.a_n(n).unwrap();
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn model_tokens_round_trip() {
        for m in [FitModel::PowerLaw, FitModel::Stretched, FitModel::SlowCorrection { k: 2, delta: 1.0 }] {
            assert_eq!(m.to_string().parse::<FitModel>().unwrap(), m);
        }
        assert!("slowcorr:1:1".parse::<FitModel>().is_err());
        let w: Window = "1e4:1e6".parse().unwrap();
        assert_eq!((w.lo, w.hi), (1e4, 1e6));
    }
}
