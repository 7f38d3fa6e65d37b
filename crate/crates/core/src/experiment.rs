//! Config-driven experiments with a content-addressed series cache and
//! plot-data export.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::asymptotics::{
    fit_powerlaw, fit_slowcorrection, fit_stretched, slowcorrection_profile, verdict, FitModel, FitResult, Tolerance,
    Window,
};
use crate::convolution::{geometric_steps, return_series_direct, return_series_fourier_desc, Engine, ReturnSeries};
use crate::dirichlet::PoincareReport;
use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::measure::MeasureDesc;
use crate::slowvary::Prediction;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "HEAVYWALK_CACHE";
/// Cache directory used when the variable is unset.
pub const DEFAULT_CACHE_DIR: &str = ".heavywalk-cache";

const SCHEMA: &[(&str, &[&str])] = &[
    ("experiment", &["name", "seed"]),
    ("measure", &["group", "desc"]),
    ("series", &["engine", "n", "cap"]),
    ("fit", &["model", "window", "predict", "tol_exponent", "tol_ratio"]),
    ("output", &["dir"]),
];

/// Steps at which a series is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Steps {
    /// every `n` in `[a, b]`
    Range(u64, u64),
    /// even `n` spaced geometrically, `k` per doubling
    Geometric(u64, u64, u32),
    List(Vec<u64>),
}

impl Steps {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Steps::Range(a, b) => (*a..=*b).collect(),
            Steps::Geometric(a, b, k) => geometric_steps(*a, *b, *k),
            Steps::List(v) => v.clone(),
        }
    }
}

impl std::fmt::Display for Steps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Steps::Range(a, b) => write!(f, "range:{a}:{b}"),
            Steps::Geometric(a, b, k) => write!(f, "geom:{a}:{b}:{k}"),
            Steps::List(v) => write!(f, "{}", v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
        }
    }
}

fn parse_count(t: &str) -> Result<u64> {
    let t = t.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    match t.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(Error::Parse(format!("bad step count `{t}`"))),
    }
}

impl std::str::FromStr for Steps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let steps = match parts.as_slice() {
            ["range", a, b] => Steps::Range(parse_count(a)?.max(1), parse_count(b)?),
            ["geom", a, b, k] => Steps::Geometric(
                parse_count(a)?,
                parse_count(b)?,
                k.parse().map_err(|_| Error::Parse(format!("bad density `{k}`")))?,
            ),
            [list] => Steps::List(list.split(',').map(parse_count).collect::<Result<_>>()?),
            _ => return Err(Error::Parse(format!("unknown step spec `{s}`"))),
        };
        if steps.values().is_empty() {
            return Err(Error::Parse(format!("step spec `{s}` selects no steps")));
        }
        Ok(steps)
    }
}

/// Parsed experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub group: GroupSpec,
    pub desc: MeasureDesc,
    pub engine: Engine,
    pub steps: Steps,
    pub cap: u32,
    pub model: Option<FitModel>,
    pub window: Option<Window>,
    pub prediction: Option<Prediction>,
    pub tolerance: Tolerance,
    pub out_dir: PathBuf,
}

fn sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(Error::Parse(format!("line {}: unknown section [{name}]", i + 1)));
            }
            out.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", i + 1)))?;
        let section = current.as_ref().ok_or_else(|| Error::Parse(format!("line {}: key outside a section", i + 1)))?;
        let key = k.trim().to_string();
        let allowed = SCHEMA.iter().find(|(s, _)| s == section).unwrap().1;
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Parse(format!("line {}: unknown key `{key}` in [{section}]", i + 1)));
        }
        if out.get_mut(section).unwrap().insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let s = sections(text)?;
        let get = |sec: &str, key: &str| s.get(sec).and_then(|m| m.get(key)).map(String::as_str);
        let need = |sec: &str, key: &str| get(sec, key).ok_or_else(|| Error::Parse(format!("missing [{sec}] {key}")));
        let num = |sec: &str, key: &str, default: f64| -> Result<f64> {
            get(sec, key).map_or(Ok(default), |v| v.parse().map_err(|_| Error::Parse(format!("bad number for {key}: `{v}`"))))
        };
        let group = GroupSpec::parse(need("measure", "group")?)?;
        let desc: MeasureDesc = need("measure", "desc")?.parse()?;
        let engine: Engine = get("series", "engine").unwrap_or("fourier").parse()?;
        let cap = get("series", "cap").map_or(Ok(u32::MAX), |v| v.parse().map_err(|_| Error::Parse(format!("bad cap `{v}`"))))?;
        Ok(ExperimentConfig {
            name: get("experiment", "name").unwrap_or("experiment").to_string(),
            seed: get("experiment", "seed").map_or(Ok(0), |v| v.parse().map_err(|_| Error::Parse(format!("bad seed `{v}`"))))?,
            group,
            desc,
            engine,
            steps: need("series", "n")?.parse()?,
            cap,
            model: get("fit", "model").map(str::parse).transpose()?,
            window: get("fit", "window").map(str::parse).transpose()?,
            prediction: get("fit", "predict").map(str::parse).transpose()?,
            tolerance: Tolerance { exponent: num("fit", "tol_exponent", 0.1)?, ratio: num("fit", "tol_ratio", 4.0)? },
            out_dir: PathBuf::from(get("output", "dir").unwrap_or("out")),
        })
    }

    /// Canonical text: fixed section and key order, normalized tokens.
    pub fn normalized(&self) -> String {
        let d = Tolerance::default();
        let mut s = format!("[experiment]\nname = {}\nseed = {}\n\n", self.name, self.seed);
        s.push_str(&self.series_key_text());
        let mut fit = String::new();
        if let Some(m) = &self.model {
            fit.push_str(&format!("model = {m}\n"));
        }
        if let Some(w) = &self.window {
            fit.push_str(&format!("window = {}:{}\n", w.lo, w.hi));
        }
        if let Some(p) = &self.prediction {
            fit.push_str(&format!("predict = {p}\n"));
        }
        if self.tolerance.exponent != d.exponent {
            fit.push_str(&format!("tol_exponent = {}\n", self.tolerance.exponent));
        }
        if self.tolerance.ratio != d.ratio {
            fit.push_str(&format!("tol_ratio = {}\n", self.tolerance.ratio));
        }
        if !fit.is_empty() {
            s.push_str(&format!("\n[fit]\n{fit}"));
        }
        s.push_str(&format!("\n[output]\ndir = {}\n", self.out_dir.display()));
        s
    }

    /// The `[measure]` and `[series]` sections, which determine the series.
    fn series_key_text(&self) -> String {
        let cap = if self.cap == u32::MAX { String::new() } else { format!("cap = {}\n", self.cap) };
        format!(
            "[measure]\ngroup = {}\ndesc = {}\n\n[series]\nengine = {}\nn = {}\n{cap}",
            self.group.name(),
            self.desc,
            self.engine,
            self.steps
        )
    }

    /// Hex SHA-256 of the series-determining sections.
    pub fn cache_key(&self) -> String {
        hex::encode(Sha256::digest(self.series_key_text().as_bytes()))
    }
}

/// Cache directory from the environment.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

/// Writes through a temporary sibling, then renames into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Removes cached series; returns the number of files deleted.
pub fn clear_cache(dir: &Path) -> Result<usize> {
    if !dir.exists() {
        return Ok(0);
    }
    let mut n = 0;
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "meta")) {
            fs::remove_file(&p)?;
            n += 1;
        }
    }
    Ok(n)
}

/// Computes the series for a configuration, with no caching.
pub fn compute_series(cfg: &ExperimentConfig) -> Result<ReturnSeries> {
    let ns = cfg.steps.values();
    match cfg.engine {
        Engine::Fourier => return_series_fourier_desc(&cfg.desc, &cfg.group, &ns),
        Engine::Direct => {
            let mu = cfg.desc.build(&cfg.group)?;
            let nmax = *ns.iter().max().unwrap();
            let mut s = return_series_direct(&mu, nmax, cfg.cap)?;
            s.entries.retain(|e| ns.contains(&e.n));
            s.omitted.retain(|n| ns.contains(n));
            Ok(s)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub series: ReturnSeries,
    pub fit: Option<FitResult>,
    pub cache_hit: bool,
    pub files: Vec<PathBuf>,
}

/// Runs a configuration: series (cached), optional fit or verdict, CSV
/// and plot-data outputs.
pub fn run_experiment(cfg: &ExperimentConfig, cache: &Path) -> Result<ExperimentOutcome> {
    let key = cfg.cache_key();
    let cached = cache.join(format!("{key}.csv"));
    let (series, cache_hit) = match fs::read_to_string(&cached) {
        Ok(text) => {
            let mut s = ReturnSeries::from_csv(&text)?;
            s.descriptor = cfg.desc.to_string();
            (s, true)
        }
        Err(_) => {
            let s = compute_series(cfg)?;
            write_atomic(&cache.join(format!("{key}.meta")), &cfg.series_key_text())?;
            write_atomic(&cached, &s.to_csv())?;
            (s, false)
        }
    };
    let window = cfg.window.unwrap_or_else(Window::all);
    let fit = match (&cfg.prediction, &cfg.model) {
        (Some(p), _) => Some(verdict(&series, p, window, cfg.tolerance)?),
        (None, Some(FitModel::PowerLaw)) => Some(fit_powerlaw(&series, window)?),
        (None, Some(FitModel::Stretched)) => Some(fit_stretched(&series, window)?),
        (None, Some(FitModel::SlowCorrection { k, delta })) => Some(fit_slowcorrection(&series, window, *k, *delta)?),
        (None, None) => None,
    };
    let mut files = Vec::new();
    let series_path = cfg.out_dir.join(format!("{}.series.csv", cfg.name));
    write_atomic(&series_path, &series.to_csv())?;
    files.push(series_path);
    if let Some(f) = &fit {
        let p = cfg.out_dir.join(format!("{}.fit.csv", cfg.name));
        write_atomic(&p, &f.to_csv())?;
        files.push(p);
    }
    let slow = match (&cfg.model, &cfg.prediction) {
        (Some(FitModel::SlowCorrection { k, delta }), _) | (_, Some(Prediction::SlowCorrection { k, delta })) => Some((*k, *delta)),
        _ => None,
    };
    files.extend(export_plotdata(&series, &cfg.out_dir, &cfg.name, slow)?);
    Ok(ExperimentOutcome { series, fit, cache_hit, files })
}

fn columns(rows: &[(f64, f64)]) -> String {
    rows.iter().map(|(x, y)| format!("{x:e} {y:e}\n")).collect()
}

/// Two-column views of a series: `log n` vs `log p`, `log n` vs
/// `log(−log p)`, and `n` vs `q(n)` when a slow correction is given.
pub fn export_plotdata(series: &ReturnSeries, dir: &Path, stem: &str, slow: Option<(u32, f64)>) -> Result<Vec<PathBuf>> {
    if series.entries.is_empty() {
        return Err(Error::EmptyInput("return series".into()));
    }
    let mid = |e: &crate::convolution::ReturnEntry| 0.5 * (e.log_p_lower + e.log_p_upper);
    let loglog: Vec<(f64, f64)> = series.entries.iter().map(|e| ((e.n as f64).ln(), mid(e))).collect();
    let stretched: Vec<(f64, f64)> =
        series.entries.iter().filter(|e| mid(e) < 0.0).map(|e| ((e.n as f64).ln(), (-mid(e)).ln())).collect();
    let mut out = Vec::new();
    for (suffix, rows) in [("loglog", loglog), ("stretched", stretched)] {
        let p = dir.join(format!("{stem}.{suffix}.txt"));
        write_atomic(&p, &columns(&rows))?;
        out.push(p);
    }
    if let Some((k, delta)) = slow {
        let p = dir.join(format!("{stem}.q.txt"));
        write_atomic(&p, &columns(&slowcorrection_profile(series, k, delta)))?;
        out.push(p);
    }
    Ok(out)
}

/// Ratio against word length (or step) for a pseudo-Poincaré report.
pub fn export_report_plotdata(report: &PoincareReport, path: &Path) -> Result<()> {
    if report.records.is_empty() {
        return Err(Error::EmptyInput("report".into()));
    }
    let rows: Vec<(f64, f64)> = report.records.iter().map(|r| (r.n_or_wordlen as f64, r.ratio)).collect();
    write_atomic(path, &columns(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::ReturnEntry;

    const CFG: &str = "# lazy walk on the line\n[measure]\ndesc =  lazy \ngroup = zd:1\n\n[series]\nengine = direct\nn = range:1:64\ncap = 100\n\n[fit]\nmodel = powerlaw\nwindow = 8:32\npredict = poly:-0.5\n\n[experiment]\nname = srw\nseed = 3\n\n[output]\ndir = OUT\n";

    fn cfg(dir: &Path) -> ExperimentConfig {
        ExperimentConfig::parse(&CFG.replace("OUT", &dir.join("out").display().to_string())).unwrap()
    }

    #[test]
    fn config_round_trips() {
        let c = ExperimentConfig::parse(CFG).unwrap();
        let text = c.normalized();
        let again = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.normalized(), text);
        assert!(text.starts_with("[experiment]\nname = srw\nseed = 3\n"));
    }

    #[test]
    fn config_errors() {
        assert!(matches!(ExperimentConfig::parse("[measure]\ngroup = zd:5\ndesc = lazy\n[series]\nn = 1"), Err(Error::UnsupportedGroup(_))));
        assert!(matches!(ExperimentConfig::parse("[bogus]\n"), Err(Error::Parse(_))));
        assert!(matches!(ExperimentConfig::parse("[measure]\ngroup = zd:1\ngroup = zd:2\n"), Err(Error::Parse(_))));
        assert!(matches!(ExperimentConfig::parse("group = zd:1\n"), Err(Error::Parse(_))));
        assert!(matches!(ExperimentConfig::parse("[measure]\ngroup = zd:1\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn cache_hit_reproduces_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache");
        let c = cfg(dir.path());
        let first = run_experiment(&c, &cache).unwrap();
        assert!(!first.cache_hit);
        assert_eq!(first.fit.as_ref().unwrap().pass, Some(true));
        let bytes: Vec<Vec<u8>> = first.files.iter().map(|p| fs::read(p).unwrap()).collect();
        let second = run_experiment(&c, &cache).unwrap();
        assert!(second.cache_hit);
        assert_eq!(second.series.entries, first.series.entries);
        for (p, b) in second.files.iter().zip(&bytes) {
            assert_eq!(&fs::read(p).unwrap(), b);
        }
        assert_eq!(clear_cache(&cache).unwrap(), 2);
        assert!(!run_experiment(&c, &cache).unwrap().cache_hit);
    }

    #[test]
    fn cache_key_ignores_fit_and_output() {
        let a = ExperimentConfig::parse(CFG).unwrap();
        let b = ExperimentConfig::parse(&CFG.replace("window = 8:32", "window = 4:32").replace("OUT", "elsewhere")).unwrap();
        assert_eq!(a.cache_key(), b.cache_key());
        let c = ExperimentConfig::parse(&CFG.replace("cap = 100", "cap = 99")).unwrap();
        assert_ne!(a.cache_key(), c.cache_key());
        assert_eq!(a.cache_key().len(), 64);
    }

    fn series(ns: &[u64], f: impl Fn(f64) -> f64) -> ReturnSeries {
        ReturnSeries {
            entries: ns.iter().map(|&n| ReturnEntry { n, log_p_lower: f(n as f64), log_p_upper: f(n as f64), deficit: 0.0 }).collect(),
            engine: Engine::Fourier,
            descriptor: "t".into(),
            omitted: vec![],
        }
    }

    #[test]
    fn plot_views() {
        let dir = tempfile::tempdir().unwrap();
        let s = series(&[4, 16, 64], |n| -n.sqrt());
        let files = export_plotdata(&s, dir.path(), "x", Some((2, 1.0))).unwrap();
        assert_eq!(files.len(), 3);
        let loglog = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(loglog.lines().count(), 3);
        let pts: Vec<(f64, f64)> = fs::read_to_string(&files[1])
            .unwrap()
            .lines()
            .map(|l| {
                let mut it = l.split(' ').map(|v| v.parse::<f64>().unwrap());
                (it.next().unwrap(), it.next().unwrap())
            })
            .collect();
        for w in pts.windows(2) {
            assert!(((w[1].1 - w[0].1) / (w[1].0 - w[0].0) - 0.5).abs() < 1e-12);
        }
        let empty = series(&[], |n| n);
        assert!(matches!(export_plotdata(&empty, dir.path(), "e", None), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn steps_tokens() {
        assert_eq!("range:1:5".parse::<Steps>().unwrap().values(), vec![1, 2, 3, 4, 5]);
        assert_eq!("2,4,8".parse::<Steps>().unwrap().values(), vec![2, 4, 8]);
        let g: Steps = "geom:1e4:1e6:4".parse().unwrap();
        assert_eq!(g.to_string(), "geom:10000:1000000:4");
        assert!("geom:1:2".parse::<Steps>().is_err());
    }
}
