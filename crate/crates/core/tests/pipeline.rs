use std::fs;

use heavywalk::asymptotics::{fit_powerlaw, Window};
use heavywalk::convolution::{return_series_direct, return_series_fourier, Engine};
use heavywalk::dirichlet::{pseudo_poincare_report, PoincareMode, SuiteSpec};
use heavywalk::experiment::{export_report_plotdata, run_experiment, ExperimentConfig};
use heavywalk::group::GroupSpec;
use heavywalk::measure::{moment, MeasureDesc};
use heavywalk::slowvary::MomentFn;
use heavywalk::Error;

fn config(out: &std::path::Path, seed: u64) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "[experiment]\nname = stable\nseed = {seed}\n[measure]\ngroup = zd:1\ndesc = lazy(stable(1,inf))\n[series]\nengine = fourier\nn = geom:1000:200000:4\n[fit]\npredict = poly:-1\nwindow = 1000:100000\ntol_exponent = 0.15\n[output]\ndir = {}\n",
        out.display()
    ))
    .unwrap()
}

#[test]
fn experiment_outputs_are_deterministic_and_cached() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let first = run_experiment(&config(&a, 3), &cache).unwrap();
    assert!(!first.cache_hit);
    assert_eq!(first.fit.as_ref().unwrap().pass, Some(true));
    let second = run_experiment(&config(&b, 3), &cache).unwrap();
    assert!(second.cache_hit);
    assert_eq!(first.series, second.series);
    for f in &first.files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn unsupported_group_in_config() {
    let text = "[measure]\ngroup = zd:5\ndesc = lazy\n[series]\nn = range:1:4\n";
    assert!(matches!(ExperimentConfig::parse(text), Err(Error::UnsupportedGroup(_))));
}

#[test]
fn built_measure_feeds_both_engines() {
    let z2 = GroupSpec::lattice(2).unwrap();
    let mu = MeasureDesc::Lazified(Box::new("radialV(logpow:1,3)".parse().unwrap())).build(&z2).unwrap();
    let direct = return_series_direct(&mu, 40, u32::MAX).unwrap();
    let ns = [10, 20, 30, 40];
    let fourier = return_series_fourier(&mu, &ns).unwrap();
    assert_eq!(fourier.engine, Engine::Fourier);
    for f in &fourier.entries {
        let d = direct.get(f.n).unwrap();
        assert!((d.log_p_lower - f.log_p_lower).abs() < 1e-4, "n = {}", f.n);
    }
    let err = fit_powerlaw(&direct, Window::new(5.0, 20.0).unwrap()).unwrap_err();
    assert!(matches!(err, Error::BoundsTooWide(_)));
}

#[test]
fn fourier_engine_rejects_heisenberg() {
    let h = GroupSpec::heisenberg();
    let mu = MeasureDesc::Lazy.build(&h).unwrap();
    assert!(matches!(return_series_fourier(&mu, &[2, 4]), Err(Error::WrongGroup(_))));
}

#[test]
fn poincare_report_to_plot_data() {
    let z = GroupSpec::lattice(1).unwrap();
    let phi = MeasureDesc::Stable { alpha: 1.0, r: heavywalk::measure::Extent::Finite(500) }.build(&z).unwrap();
    let spec = SuiteSpec { indicator_radii: vec![2, 4], tent_widths: vec![4], random_count: 2, random_radius: 4, seed: 9 };
    let suite = spec.build(&z).unwrap();
    let report = pseudo_poincare_report(&z, &PoincareMode::Power { generator: 0, n_max: 10 }, &phi, &suite).unwrap();
    assert_eq!(report.records.len(), 5 * 10);
    assert_eq!(report.violations, 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratio.txt");
    export_report_plotdata(&report, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), report.records.len());
    assert!(text.lines().all(|l| l.split_whitespace().count() == 2));
}

#[test]
fn moments_of_heavy_and_light_laws() {
    let z = GroupSpec::lattice(1).unwrap();
    let rho = MomentFn::Power(0.5);
    let light = moment(&MeasureDesc::Lazy.build(&z).unwrap(), &rho);
    assert!(!light.lower_bound);
    assert!((light.value - (0.5 + 0.5 * 2f64.sqrt())).abs() < 1e-15);
    let heavy = moment(&"stable(1,1000)".parse::<MeasureDesc>().unwrap().build(&z).unwrap(), &rho);
    assert!(heavy.lower_bound);
    assert!(heavy.value > light.value);
}
