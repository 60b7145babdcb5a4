use std::path::Path;
use std::process::{Command, Output};

fn hpv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn sample_is_deterministic_and_shaped() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = hpv(&["sample", "--hurst", "0.7", "--n", "8,300", "--batch", "2", "--seed", "4", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let fa = read_dir_sorted(a.path());
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, read_dir_sorted(b.path()));

    let o = hpv(&["sample", "--hurst", "0.7", "--n", "8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 9);
    assert_eq!(text.lines().next(), Some("xi"));
}

#[test]
fn invalid_hurst_names_the_constraint() {
    let o = hpv(&["sample", "--hurst", "1.2", "--n", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("0 < H < 1"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(hpv(&["frobnicate"]).status.code(), Some(2));
    let o = hpv(&["discrepancy", "--hurst", "0.9", "--n", ""]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(hpv(&["discrepancy", "--hurst", "0.9", "--n", "128,64"]).status.code(), Some(2));
    assert_eq!(hpv(&["discrepancy", "--hurst", "0.9"]).status.code(), Some(2));
    assert_eq!(hpv(&["rate", "--q", "1", "--hurst", "0.9", "--n", "8"]).status.code(), Some(2));
    assert!(hpv(&["--help"]).status.success());
}

#[test]
fn discrepancy_sweep_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = hpv(&["discrepancy", "--q", "2", "--hurst", "0.9", "--n", "2^8..16", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("n,delta,l2_error,normalized\n"));
    assert_eq!(text.lines().count(), 10);
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.csv.fit.json")).unwrap()).unwrap();
    let slope = fit["delta"]["slope"].as_f64().unwrap();
    assert!((slope + 0.6).abs() <= 0.05, "slope {slope}");
    for key in ["intercept", "r2", "stderr_slope"] {
        assert!(fit["delta"][key].is_number());
    }
}

#[test]
fn discrepancy_rejects_threshold_case() {
    let o = hpv(&["discrepancy", "--q", "2", "--hurst", "0.75", "--n", "64,128"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("supercritical"));
    let o = hpv(&["discrepancy", "--hurst", "critical", "--n", "64"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn berry_sweep_trend_and_determinism() {
    let args = ["berry", "--q", "2", "--n", "2^6..12", "--batch", "2000", "--seed", "3"];
    let first = hpv(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let second = hpv(&args);
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    assert!(text.starts_with("n,seed,stream,batch,mean_sq,se,tv_bound\n"));
    let tv = csv_column(&text, "tv_bound");
    assert_eq!(tv.len(), 7);
    assert!(tv[6] < tv[0]);
    let seeds = csv_column(&text, "seed");
    assert!(seeds.iter().all(|&s| s == 3.0));
}

#[test]
fn berry_rejects_small_batch_and_other_regimes() {
    let o = hpv(&["berry", "--n", "64", "--batch", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 100"));
    let o = hpv(&["berry", "--hurst", "0.9", "--n", "64", "--batch", "200"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("critical"));
}

#[test]
fn rate_supercritical_columns() {
    let o = hpv(&["rate", "--hurst", "0.9", "--n", "8,16,32", "--batch", "300", "--big-n", "256", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["regime"], "supercritical");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (row, n) in rows.iter().zip([8.0f64, 16.0, 32.0]) {
        let tv = row["tv_rate"].as_f64().unwrap();
        assert!((tv - n.powf(-0.15)).abs() < 1e-12);
        assert!(row["ks"].is_number() && row["coupled_mean"].is_number());
    }
    assert!(v["fits"]["ks"].is_object() || v["fits"]["ks"].is_null());
}

#[test]
fn rate_subcritical_ks_decreases() {
    let o = hpv(&["rate", "--q", "2", "--hurst", "0.6", "--n", "4,64,1024", "--batch", "20000", "--seed", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ks = csv_column(&stdout(&o), "ks");
    assert!(ks[2] < ks[0], "{ks:?}");
    assert!(stderr(&o).contains("\"ks\""));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# bracket terms\nq = 2\nhurst = 0.9\nmax_lag = 10\nformat = json\n").unwrap();
    let o = hpv(&["bracket-table", "--config", cfg.to_str().unwrap(), "--max-lag", "4", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("r,t1,t2,t3,bracket\n"));
    assert_eq!(text.lines().count(), 6);

    let o = hpv(&["bracket-table", "--config", cfg.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 11);

    std::fs::write(&cfg, "hurst = 0.9\ncolour = blue\n").unwrap();
    let o = hpv(&["bracket-table", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
}
