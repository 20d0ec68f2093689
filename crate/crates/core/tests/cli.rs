use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_v2g-ca");

fn v2g_ca(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("V2G_CA_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = v2g_ca(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {line}"))
        .parse()
        .unwrap()
}

fn summary_row(dir: &Path, mode: &str) -> Vec<String> {
    let text = fs::read_to_string(dir.join("compare_summary.csv")).unwrap();
    text.lines()
        .find(|l| l.starts_with(mode))
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect()
}

fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let x = fs::read(a.join(&name)).unwrap();
        let y = fs::read(b.join(&name)).unwrap_or_else(|_| panic!("{name:?} missing"));
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn run_on_empty_population_reports_no_actions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = ok(&["run", "--n", "3", "--density", "0", "--t", "5", "--target-fraction", "0", "--out-dir", out]);
    assert_eq!(field(&stdout, "shifts"), 0.0);
    assert_eq!(field(&stdout, "discharges"), 0.0);
    let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    v2g_ca_core::import_bundle_json(dir.path().join("bundle.json")).unwrap();
}

#[test]
fn reference_run_with_v2g_keeps_discharges_rare() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = ok(&["run", "--n", "5000", "--density", "0.167", "--fraction", "0.35", "--v2g", "--out-dir", out]);
    let ratio = field(&stdout, "ratio");
    assert!(ratio <= 0.1 && ratio > 0.0, "ratio {ratio}");
}

#[test]
fn same_seed_gives_identical_bundles() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["run", "--n", "300", "--t", "40", "--seed", "11", "--v2g", "--out-dir", d.path().to_str().unwrap()]);
    }
    same_files(a.path(), b.path());
}

#[test]
fn compare_on_empty_population_has_no_loops() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["compare", "--n", "50", "--density", "0", "--t", "20", "--out-dir", dir.path().to_str().unwrap()]);
    for mode in ["v1g", "v2g"] {
        let row = summary_row(dir.path(), mode);
        assert_eq!(row[7], "0", "{mode} loop area");
    }
    for fig in ["fig2.svg", "fig3.svg", "fig4.svg"] {
        assert!(dir.path().join(fig).exists());
    }
}

#[test]
fn compare_reference_scenario_shows_hysteresis_gap() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["compare", "--out-dir", dir.path().to_str().unwrap()]);
    let v1g = summary_row(dir.path(), "v1g");
    let v2g = summary_row(dir.path(), "v2g");
    let area = |r: &[String]| r[7].parse::<f64>().unwrap();
    let calls = |r: &[String]| r[9].parse::<f64>().unwrap();
    assert!(area(&v1g) > area(&v2g));
    assert!(calls(&v1g) > calls(&v2g));
    let fig4 = fs::read_to_string(dir.path().join("fig4.svg")).unwrap();
    assert_eq!(fig4.matches("<polyline").count(), 2);
}

#[test]
fn sweep_of_one_seed_equals_compare() {
    let sweep = tempfile::tempdir().unwrap();
    let single = tempfile::tempdir().unwrap();
    let common = ["--n", "400", "--t", "50", "--seed", "7"];
    let mut args = vec!["sweep", "--seeds", "1", "--out-dir", sweep.path().to_str().unwrap()];
    args.extend(common);
    ok(&args);
    let mut args = vec!["compare", "--out-dir", single.path().to_str().unwrap()];
    args.extend(common);
    ok(&args);
    same_files(single.path(), &sweep.path().join("seed_7"));
}

#[test]
fn sweep_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["sweep", "--seeds", "20", "--n", "200", "--t", "30", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(stdout.contains("seeds=20"));
    let rows = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 21);
    assert!(rows.starts_with("seed,"));
    let stats = fs::read_to_string(dir.path().join("sweep_stats.csv")).unwrap();
    assert!(stats.lines().any(|l| l.starts_with("discharge_ratio,")));
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("scenario.conf");
    fs::write(&conf, "n = 30\ndensity = 0\nt = 6\n").unwrap();
    let env_out = dir.path().join("from_env");
    let out = Command::new(BIN)
        .args(["run", "--config", conf.to_str().unwrap()])
        .env("V2G_CA_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = fs::read_to_string(env_out.join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn invalid_input_exits_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let out = v2g_ca(&["run", "--density", "1.5", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("density"));
    assert!(!out_dir.join("bundle.json").exists());

    let out = v2g_ca(&["run", "--mode", "auction"]);
    assert!(!out.status.success());
    let out = v2g_ca(&["run", "--dip-start", "90", "--dip-end", "10", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
