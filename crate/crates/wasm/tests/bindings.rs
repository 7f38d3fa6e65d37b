use heavywalk_wasm::{fit_series, group_volumes, return_series};

#[test]
fn volumes_match_lattice_counts() {
    assert_eq!(group_volumes("zd:1", 3).unwrap(), "n,volume\n0,1\n1,3\n2,5\n3,7\n");
    assert!(group_volumes("zd:7", 3).unwrap_err().contains("unsupported group"));
    assert!(group_volumes("heis3", 5000).unwrap_err().contains("element cap"));
}

#[test]
fn series_then_fit_recovers_diffusive_slope() {
    let csv = return_series("zd:1", "lazy", "fourier", 65536).unwrap();
    let fit = fit_series(&csv, "powerlaw", "256:65536").unwrap();
    let row = fit.lines().nth(1).unwrap();
    let slope: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((slope + 0.5).abs() < 0.05, "{slope}");
}

#[test]
fn direct_series_is_bounded() {
    let csv = return_series("heis3", "lazy", "direct", 12).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(return_series("zd:1", "lazy", "direct", 1_000_000).is_err());
}

#[test]
fn bad_tokens_are_reported() {
    assert!(return_series("zd:1", "lazy", "quantum", 10).is_err());
    assert!(fit_series("n\n", "powerlaw", "").is_err());
    let csv = return_series("zd:1", "lazy", "direct", 64).unwrap();
    assert!(fit_series(&csv, "cubic", "").is_err());
}
