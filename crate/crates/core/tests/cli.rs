use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_rabi-blockade");

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn freqscan_writes_exact_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let out = run(&[
        "freqscan", "--g", "0.3", "--wd-min", "0.9", "--wd-max", "1.1", "--wd-steps", "2", "--n-fock", "10",
        "--n-levels", "6", "--t-relax", "500", "--periods", "5", "--samples-per-period", "32", "--threads", "1",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "g,omega_d,i_out,g2,converged,n_fock,n_levels,refinements,wall_ms");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 9);
    assert_eq!(first[0], "0.3");
    assert_eq!(first[1], "0.9");
    assert_eq!(first[5], "10");
    assert_eq!(lines.count(), 1);
}

#[test]
fn json_format_has_metadata() {
    let out = run(&["anharm", "--g-min", "0.5", "--g-max", "1.0", "--g-steps", "3", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["metadata"]["spec"]["mode"]["mode"], "anharmonicity_vs_g");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn debug_tables_have_expected_columns() {
    let spectrum = run(&["spectrum", "--g", "0.2"]);
    let text = String::from_utf8(spectrum.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "g,rank,energy,parity,j");
    let rates = run(&["rates", "--g", "0.2", "--n-levels", "4"]);
    let text = String::from_utf8(rates.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "g,j_to,p_to,k_from,p_from,delta,gamma_rate,kappa_rate,chi"
    );
}

#[test]
fn gc_prints_crossing() {
    let out = run(&["gc"]);
    assert!(out.status.success());
    let gc: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((0.3..0.6).contains(&gc));
}

#[test]
fn invalid_axes_fail_cleanly() {
    let out = run(&["cut", "--g-min", "1.0", "--g-max", "0.5", "--g-steps", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
    let out = run(&["gc", "--g-min", "0.01", "--g-max", "0.1"]);
    assert!(!out.status.success());
}
