use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heavywalk::asymptotics::{fit_powerlaw, fit_slowcorrection, fit_stretched, verdict, FitModel, FitResult, Tolerance, Window};
use heavywalk::convolution::{geometric_steps, return_series_direct, return_series_fourier_desc, Engine, ReturnSeries};
use heavywalk::dirichlet::{pseudo_poincare_report, ElementFactor, PoincareMode, SuiteSpec};
use heavywalk::experiment::{cache_dir, clear_cache, export_report_plotdata, run_experiment, write_atomic, ExperimentConfig};
use heavywalk::group::{growth_degree, GroupSpec};
use heavywalk::measure::{moment, weak_moment, Extent, MeasureDesc};
use heavywalk::slowvary::{MomentFn, Prediction, ThetaFn};
use heavywalk::Error;

#[derive(Parser)]
#[command(name = "heavywalk", version, about = "Heavy-tailed random walks on groups of polynomial growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group catalog queries
    Group {
        #[command(subcommand)]
        action: GroupAction,
    },
    /// Measure construction
    Measure {
        #[command(subcommand)]
        action: MeasureAction,
    },
    /// Return-probability series of a measure
    Convolve {
        #[arg(long, default_value = "zd:1")]
        group: String,
        #[arg(long)]
        measure: String,
        #[arg(long, default_value = "direct")]
        engine: String,
        #[arg(long)]
        nmax: u64,
        /// ball-radius cap for the direct engine
        #[arg(long, default_value_t = u32::MAX)]
        cap: u32,
        /// Fourier sample points per octave of n
        #[arg(long, default_value_t = 8)]
        per_octave: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model or check a prediction on a series CSV
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "powerlaw")]
        model: String,
        #[arg(long)]
        window: Option<String>,
        /// prediction token; the exit code reflects the verdict
        #[arg(long)]
        predict: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        tol_exponent: f64,
        #[arg(long, default_value_t = 4.0)]
        tol_ratio: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pseudo-Poincaré report over the standard test-function suite
    Poincare {
        #[arg(long)]
        group: String,
        #[arg(long)]
        phi: String,
        #[arg(long, value_enum, default_value_t = Mode::Power)]
        mode: Mode,
        /// largest power (power mode) or generator power (element mode)
        #[arg(long)]
        nmax: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// two-column ratio-vs-length plot data
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Strong and weak moments of a measure
    Moment {
        #[arg(long)]
        group: String,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        rho: String,
    },
    /// Config-driven experiments
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Series cache maintenance
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum GroupAction {
    /// Ball volumes V(0..R) as CSV
    Info {
        #[arg(long)]
        name: String,
        #[arg(long)]
        radius: u32,
    },
}

#[derive(Subcommand)]
enum MeasureAction {
    /// Represented masses as CSV
    Build {
        #[arg(long)]
        group: String,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    Clear,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Power,
    Element,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_VERDICT: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::UnsupportedGroup(_) | Error::UnsupportedFamily(_) | Error::RegimeMismatch(_) => EXIT_CONFIG,
        Error::BudgetExceeded { .. } | Error::InsufficientRadius { .. } => EXIT_BUDGET,
        _ => EXIT_FAILURE,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => write_atomic(p, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn group_info(name: &str, radius: u32) -> Result<u8, Error> {
    let g = GroupSpec::parse(name)?;
    let ball = g.ball(radius)?;
    let mut s = String::from("n,volume\n");
    for (n, v) in ball.volumes().iter().enumerate() {
        s.push_str(&format!("{n},{v}\n"));
    }
    emit(None, &s)?;
    if let Ok(est) = growth_degree(&ball) {
        eprintln!("growth degree {} (fitted {:.3})", g.growth_degree(), est.degree);
    }
    Ok(0)
}

fn measure_build(group: &str, measure: &str, out: Option<&Path>) -> Result<u8, Error> {
    let g = GroupSpec::parse(group)?;
    let desc: MeasureDesc = measure.parse()?;
    let mu = desc.build(&g)?;
    let mut s = String::from("x,y,z,wordlen,mass\n");
    for (e, a) in mu.support() {
        let [x, y, z] = e.coords();
        s.push_str(&format!("{x},{y},{z},{},{:e}\n", a.len, a.mass));
    }
    emit(out, &s)?;
    eprintln!("atoms {} total {:.15} deficit {:e} symmetric {}", mu.support().len(), mu.total(), mu.deficit(), mu.is_symmetric());
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn convolve(group: &str, measure: &str, engine: &str, nmax: u64, cap: u32, per_octave: u32, out: Option<&Path>) -> Result<u8, Error> {
    let g = GroupSpec::parse(group)?;
    let desc: MeasureDesc = measure.parse()?;
    let engine: Engine = engine.parse()?;
    let series: ReturnSeries = match engine {
        Engine::Direct => return_series_direct(&desc.build(&g)?, nmax, cap)?,
        Engine::Fourier => return_series_fourier_desc(&desc, &g, &geometric_steps(2, nmax, per_octave))?,
    };
    emit(out, &series.to_csv())?;
    if !series.omitted.is_empty() {
        eprintln!("omitted {} steps below the underflow floor", series.omitted.len());
    }
    Ok(0)
}

fn fit(input: &Path, model: &str, window: Option<&str>, predict: Option<&str>, tol: Tolerance, out: Option<&Path>) -> Result<u8, Error> {
    let series = ReturnSeries::from_csv(&read(input)?)?;
    let window = window.map(str::parse).transpose()?.unwrap_or_else(Window::all);
    let result: FitResult = match predict {
        Some(p) => {
            let p: Prediction = p.parse()?;
            verdict(&series, &p, window, tol)?
        }
        None => match model.parse::<FitModel>()? {
            FitModel::PowerLaw => fit_powerlaw(&series, window)?,
            FitModel::Stretched => fit_stretched(&series, window)?,
            FitModel::SlowCorrection { k, delta } => fit_slowcorrection(&series, window, k, delta)?,
        },
    };
    emit(out, &result.to_csv())?;
    if let Some(w) = &result.warning {
        eprintln!("warning: {w}");
    }
    Ok(if result.pass != Some(false) { 0 } else { EXIT_VERDICT })
}

fn finite(desc: &MeasureDesc) -> bool {
    !desc.is_ideal()
}

#[allow(clippy::too_many_arguments)]
fn poincare(group: &str, phi: &str, mode: Mode, nmax: Option<u64>, seed: u64, out: Option<&Path>, plot: Option<&Path>) -> Result<u8, Error> {
    let g = GroupSpec::parse(group)?;
    let desc: MeasureDesc = phi.parse()?;
    if !finite(&desc) {
        return Err(Error::Parse(format!("`{desc}` has no finite representation")));
    }
    let suite = SuiteSpec::standard(seed).build(&g)?;
    let line = GroupSpec::lattice(1)?;
    let (mode, phi) = match mode {
        Mode::Power => (PoincareMode::Power { generator: 0, n_max: nmax.unwrap_or(50) }, desc.build(&line)?),
        Mode::Element => {
            let s = g.generators()[0];
            let elements = (1..=nmax.unwrap_or(8) as i64).map(|n| g.power(s, n)).collect();
            let factor = match &desc {
                MeasureDesc::Radial { ell, .. } => ElementFactor::Theta(ThetaFn::new(*ell)),
                MeasureDesc::GenPow { ell, r: Extent::Finite(r) } => ElementFactor::Truncated(MeasureDesc::GenPow { ell: *ell, r: Extent::Finite(*r) }.build(&line)?),
                MeasureDesc::Stable { alpha, r: Extent::Finite(r) } => ElementFactor::Truncated(MeasureDesc::Stable { alpha: *alpha, r: Extent::Finite(*r) }.build(&line)?),
                other => return Err(Error::Parse(format!("element mode needs a radial, genpow or stable law, got `{other}`"))),
            };
            (PoincareMode::Element { elements, factor }, desc.build(&g)?)
        }
    };
    let report = pseudo_poincare_report(&g, &mode, &phi, &suite)?;
    emit(out, &report.to_csv())?;
    if let Some(p) = plot {
        export_report_plotdata(&report, p)?;
    }
    match report.c_mono {
        Some(c) => eprintln!("max ratio {:.6} C_mono {c:.6} violations {}", report.max_ratio, report.violations),
        None => eprintln!("max ratio {:.6}", report.max_ratio),
    }
    Ok(if report.violations == 0 { 0 } else { EXIT_VERDICT })
}

fn moments(group: &str, measure: &str, rho: &str) -> Result<u8, Error> {
    let g = GroupSpec::parse(group)?;
    let desc: MeasureDesc = measure.parse()?;
    let rho: MomentFn = rho.parse()?;
    let mu = desc.build(&g)?;
    let strong = moment(&mu, &rho);
    let weak = weak_moment(&mu, &rho);
    let bound = |b: bool| if b { "lower_bound" } else { "exact" };
    let s = format!(
        "kind,value,status\nmoment,{:e},{}\nweak_moment,{:e},{}\n",
        strong.value,
        bound(strong.lower_bound),
        weak.value,
        bound(weak.lower_bound)
    );
    emit(None, &s)?;
    Ok(0)
}

fn experiment(config: &Path) -> Result<u8, Error> {
    let cfg = ExperimentConfig::parse(&read(config)?)?;
    let cache = cache_dir();
    let outcome = run_experiment(&cfg, &cache)?;
    println!("experiment {} cache {} entries {}", cfg.name, if outcome.cache_hit { "hit" } else { "miss" }, outcome.series.entries.len());
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    match &outcome.fit {
        Some(f) => {
            print!("{}", f.to_csv());
            Ok(if f.pass != Some(false) { 0 } else { EXIT_VERDICT })
        }
        None => Ok(0),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Group { action: GroupAction::Info { name, radius } } => group_info(&name, radius),
        Command::Measure { action: MeasureAction::Build { group, measure, out } } => measure_build(&group, &measure, out.as_deref()),
        Command::Convolve { group, measure, engine, nmax, cap, per_octave, out } => {
            convolve(&group, &measure, &engine, nmax, cap, per_octave, out.as_deref())
        }
        Command::Fit { input, model, window, predict, tol_exponent, tol_ratio, out } => fit(
            &input,
            &model,
            window.as_deref(),
            predict.as_deref(),
            Tolerance { exponent: tol_exponent, ratio: tol_ratio },
            out.as_deref(),
        ),
        Command::Poincare { group, phi, mode, nmax, seed, out, plot } => poincare(&group, &phi, mode, nmax, seed, out.as_deref(), plot.as_deref()),
        Command::Moment { group, measure, rho } => moments(&group, &measure, &rho),
        Command::Experiment { action: ExperimentAction::Run { config } } => experiment(&config),
        Command::Cache { action: CacheAction::Clear } => {
            let dir = cache_dir();
            let n = clear_cache(&dir)?;
            println!("removed {n} files from {}", dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
