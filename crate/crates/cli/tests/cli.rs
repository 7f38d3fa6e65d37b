use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heavywalk(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heavywalk"))
        .args(args)
        .env("HEAVYWALK_CACHE", cache)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn group_info_prints_volumes() {
    let dir = tempfile::tempdir().unwrap();
    let o = heavywalk(&["group", "info", "--name", "zd:2", "--radius", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "n,volume\n0,1\n1,5\n2,13\n3,25\n");
    let o = heavywalk(&["group", "info", "--name", "heis3", "--radius", "2"], dir.path());
    assert_eq!(stdout(&o), "n,volume\n0,1\n1,5\n2,17\n");
}

#[test]
fn unsupported_group_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = heavywalk(&["group", "info", "--name", "zd:5", "--radius", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = heavywalk(&["measure", "build", "--group", "zd:1", "--measure", "nonsense(1)"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_error_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = heavywalk(&["group", "info", "--name", "heis3", "--radius", "100000"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn measure_build_masses_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = heavywalk(&["measure", "build", "--group", "zd:1", "--measure", "stable(1,200)"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,z,wordlen,mass"));
    let total: f64 = lines.map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    let summary = String::from_utf8(o.stderr).unwrap();
    let deficit: f64 = summary.split_whitespace().skip_while(|w| *w != "deficit").nth(1).unwrap().parse().unwrap();
    assert!(deficit > 0.0);
    assert!((total + deficit - 1.0).abs() < 1e-12, "{total} {deficit}");
}

#[test]
fn convolve_then_fit_with_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let csv_s = csv.to_str().unwrap();
    let o = heavywalk(&["convolve", "--measure", "lazy", "--engine", "fourier", "--nmax", "65536", "--out", csv_s], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let head = fs::read_to_string(&csv).unwrap();
    assert!(head.starts_with("n,log_p_lower,log_p_upper,engine,deficit\n"));

    let o = heavywalk(&["fit", "--in", csv_s, "--predict", "poly:-0.5", "--window", "256:65536"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("model,exponent,predicted,residual,pass\n"));
    assert!(text.trim_end().ends_with(",true"));

    let o = heavywalk(&["fit", "--in", csv_s, "--predict", "poly:-1", "--window", "256:65536"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn direct_convolve_matches_binomial() {
    let dir = tempfile::tempdir().unwrap();
    let o = heavywalk(&["convolve", "--measure", "lazy", "--engine", "direct", "--nmax", "4"], dir.path());
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("2,")).unwrap();
    let lo: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    // lazy SRW on ℤ: p(2) = 3/8
    assert!((lo - (3.0f64 / 8.0).ln()).abs() < 1e-12);
}

#[test]
fn poincare_power_mode_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = heavywalk(&["poincare", "--group", "zd:1", "--phi", "stable(1,1000)", "--mode", "power", "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("case_id,n_or_wordlen,lhs,branch_H,branch_G,dirichlet,ratio\n"));
    assert_eq!(text.lines().count(), 1 + 57 * 50);
}

#[test]
fn moment_reports_both_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let o = heavywalk(&["moment", "--group", "zd:1", "--measure", "lazy", "--rho", "pow:1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    // E(1+|X|) = 1.5 and sup_s s·P(1+|X| > s) = 2·0.5 for the lazy walk
    assert!(text.contains("moment,1.5e0,exact"), "{text}");
    assert!(text.contains("weak_moment,1e0,exact"), "{text}");
}

#[test]
fn experiment_run_caches_and_clears() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = dir.path().join("out");
    let cfg = dir.path().join("e.cfg");
    fs::write(
        &cfg,
        format!(
            "[experiment]\nname = srw\nseed = 1\n\n[measure]\ngroup = zd:1\ndesc = lazy\n\n[series]\nengine = direct\nn = range:1:64\n\n[fit]\npredict = poly:-0.5\nwindow = 8:64\ntol_exponent = 0.1\n\n[output]\ndir = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let first = heavywalk(&["experiment", "run", "--config", cfg_s], &cache);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("cache miss"));
    let series = fs::read(out.join("srw.series.csv")).unwrap();

    let second = heavywalk(&["experiment", "run", "--config", cfg_s], &cache);
    assert!(stdout(&second).contains("cache hit"));
    assert_eq!(fs::read(out.join("srw.series.csv")).unwrap(), series);

    let cleared = heavywalk(&["cache", "clear"], &cache);
    assert!(stdout(&cleared).starts_with("removed 2 files"));
    let third = heavywalk(&["experiment", "run", "--config", cfg_s], &cache);
    assert!(stdout(&third).contains("cache miss"));
    assert_eq!(fs::read(out.join("srw.series.csv")).unwrap(), series);
}

#[test]
fn experiment_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[measure]\ngroup = zd:5\ndesc = lazy\n[series]\nn = range:1:4\n").unwrap();
    let o = heavywalk(&["experiment", "run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(&cfg, "[bogus]\nx = 1\n").unwrap();
    let o = heavywalk(&["experiment", "run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
