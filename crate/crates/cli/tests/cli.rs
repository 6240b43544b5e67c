use std::fs;
use std::path::Path;

use facetflow_cli::run;
use serde_json::Value;
use tempfile::TempDir;

fn facetflow(args: &[&str]) -> i32 {
    let mut argv = vec!["facetflow"];
    argv.extend_from_slice(args);
    run(argv)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn snapshot_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("snapshot_"))
        .collect();
    names.sort();
    names
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL_EVOLVE: &str = r#"
[grid]
n_cells = 64
[time]
tau = 0.01
t_final = 0.2
[force]
base = [{ start = 0.0, end = 1.0, amplitude = -4.0 }]
[initial]
kind = "tent"
peak = 0.3
height = 0.2
"#;

#[test]
fn help_exits_zero() {
    assert_eq!(facetflow(&["--help"]), 0);
    assert_eq!(facetflow(&["experiment", "--help"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(facetflow(&[]), 1);
    assert_eq!(facetflow(&["steady", "--alpha", "16"]), 1, "missing --out");
    assert_eq!(facetflow(&["evolve", "--out", out.to_str().unwrap()]), 1, "missing --config");
    assert_eq!(facetflow(&["frobnicate"]), 1);
    let missing = tmp.path().join("nope.toml");
    assert_eq!(
        facetflow(&["evolve", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        1
    );
}

#[test]
fn malformed_force_interval_exits_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL_EVOLVE.replace("start = 0.0, end = 1.0", "start = 0.9, end = 0.3"),
    );
    let out = tmp.path().join("o");
    assert_eq!(facetflow(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]), 1);
    assert!(!out.join("report.json").exists());
}

#[test]
fn unknown_config_key_exits_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL_EVOLVE}\n[solver]\nmethod = \"newton\"\n"));
    let out = tmp.path().join("o");
    assert_eq!(facetflow(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn steady_alpha_16_writes_closed_form() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    assert_eq!(facetflow(&["steady", "--alpha", "16", "--out", out.to_str().unwrap()]), 0);
    for f in ["report.json", "config.toml", "steady.txt", "steady_numeric.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let r = report(&out);
    assert_eq!(r["passed"], true);
    let facets = r["parameters"]["facets"].as_array().unwrap();
    assert_eq!(facets.len(), 3);
    assert!((facets[0]["right"].as_f64().unwrap() - 0.35).abs() < 1e-15);
    let u = facetflow::io::read_profile(&out.join("steady.txt")).unwrap();
    assert_eq!(u.n_cells(), 1024);
}

#[test]
fn steady_below_threshold_is_refused() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    assert_eq!(facetflow(&["steady", "--alpha", "8", "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn breaking_alpha_8_shows_no_breaking() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("b");
    assert_eq!(facetflow(&["experiment", "breaking", "--alpha", "8", "--out", out.to_str().unwrap()]), 0);
    let r = report(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["parameters"]["max_facet_count"], 1);
    assert_eq!(r["parameters"]["breaking_expected"], false);
}

#[test]
fn failed_check_exits_two_and_keeps_report() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("b");
    // the frozen-force decay window lies below double precision
    let code = facetflow(&[
        "experiment", "breaking", "--alpha", "16", "--n-cells", "128", "--tau", "0.01",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    let r = report(&out);
    assert_eq!(r["passed"], false);
    assert!(r["checks"].as_array().unwrap().iter().any(|c| c["pass"] == false));
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_EVOLVE);
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(facetflow(&["evolve", "--config", &cfg, "--out", o]), 0);
    let read_all = || -> Vec<(String, Vec<u8>)> {
        let mut v: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let first = read_all();
    assert_eq!(facetflow(&["evolve", "--config", &cfg, "--out", o]), 0);
    assert_eq!(read_all(), first);
}

#[test]
fn config_echo_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["experiment", "creation", "--n-cells", "128", "--tau", "0.005", "--t-final", "0.05"];
    let mut first = args.to_vec();
    first.extend(["--out", a.to_str().unwrap()]);
    assert_eq!(facetflow(&first), 0);
    let echo = a.join("config.toml");
    assert_eq!(
        facetflow(&["experiment", "creation", "--config", echo.to_str().unwrap(), "--out", b.to_str().unwrap()]),
        0
    );
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert_eq!(fs::read(a.join("config.toml")).unwrap(), fs::read(b.join("config.toml")).unwrap());
}

#[test]
fn one_step_run_gives_one_snapshot() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_EVOLVE.replace("t_final = 0.2", "t_final = 0.01"));
    let out = tmp.path().join("o");
    assert_eq!(facetflow(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    assert_eq!(snapshot_names(&out), vec!["snapshot_0000_t0.010000.txt"]);
    assert!(out.join("report.json").exists());
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().next().unwrap(), "step,time,ut_sup,tv_slope,l2_to_target,n_facets");
}

#[test]
fn five_snapshot_times_give_five_sorted_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL_EVOLVE.replace("t_final = 0.2", "t_final = 0.2\nsnapshots = [0.2, 0.05, 0.1, 0.15, 0.01]"),
    );
    let out = tmp.path().join("o");
    assert_eq!(facetflow(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let names = snapshot_names(&out);
    assert_eq!(names.len(), 5);
    let times: Vec<f64> = names
        .iter()
        .map(|n| n.trim_end_matches(".txt").split("_t").nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(times, vec![0.01, 0.05, 0.1, 0.15, 0.2]);
}

#[test]
fn analyze_reports_the_facet_of_a_written_profile() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    assert_eq!(facetflow(&["steady", "--constant", "4", "--n-cells", "256", "--out", s.to_str().unwrap()]), 0);
    let a = tmp.path().join("a");
    let profile = s.join("steady.txt");
    assert_eq!(
        facetflow(&["analyze", "--profile", profile.to_str().unwrap(), "--out", a.to_str().unwrap()]),
        0
    );
    let facets = report(&a)["parameters"]["facets"].clone();
    let facets = facets.as_array().unwrap();
    assert_eq!(facets.len(), 1);
    assert_eq!(facets[0]["kind"], "MIN");
    assert!((facets[0]["level"].as_f64().unwrap() + 0.125).abs() < 1e-12);
}

#[test]
fn sweep_writes_one_directory_per_run() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sw");
    let code = facetflow(&[
        "experiment", "sweep", "--n-cells", "128", "--tau", "0.01", "--alphas", "8,16", "--settle", "5",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.join("alpha_8").join("report.json").exists());
    assert!(out.join("alpha_16").join("report.json").exists());
    let r = report(&out);
    let t = r["threshold"].as_f64().unwrap();
    assert!((t - 12.0).abs() <= 0.5, "{t}");
}
