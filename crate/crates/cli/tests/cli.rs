use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_snowcast");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run snowcast")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// Three winters of simulated Oslo data.
fn simulated(dir: &Path) -> String {
    let data = path(dir, "data.csv");
    ok(&["simulate", "--preset", "oslo", "--days", "1100", "--seed", "1", "-o", &data]);
    data
}

#[test]
fn fit_short_term_writes_eleven_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path());
    let params = path(dir.path(), "p.json");
    let stdout = ok(&["fit", &data, "--family", "short_term", "-o", &params]);
    assert!(stdout.contains("log_likelihood:"));
    assert!(stdout.contains("aic:"));
    assert!(stdout.contains("converged:"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&params).unwrap()).unwrap();
    assert_eq!(v["model"], "short_term");
    for key in [
        "mu", "beta0", "beta1", "beta2", "beta3", "beta4", "beta5", "beta6", "beta7", "sigma1_sq", "sigma2_sq",
    ] {
        assert!(v[key].is_f64(), "{key}");
    }
    assert!(PathBuf::from(format!("{params}.manifest.json")).exists());
}

#[test]
fn fit_with_selection_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path());
    let params = path(dir.path(), "t.json");
    let stdout = ok(&["fit", &data, "--family", "temperature", "--select", "--max-orders", "2,2", "-o", &params]);
    assert!(stdout.lines().any(|l| l.starts_with("orders: ")), "{stdout}");
    assert!(stdout.contains("null_aic:"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&params).unwrap()).unwrap();
    assert_eq!(v["model"], "temperature");
}

#[test]
fn empty_csv_is_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "empty.csv");
    std::fs::write(&data, "date,temp_c,precip_mm,snow_cm\n").unwrap();
    let out = run(&["fit", &data, "--family", "short_term", "-o", &path(dir.path(), "p.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no usable transitions"));
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "bad.csv");
    std::fs::write(&data, "date,temp_c,precip_mm,snow_cm\n2001-01-01,1,0,0\n2001-01-02,x,0,0\n").unwrap();
    let out = run(&["fit", &data, "--family", "short_term", "-o", &path(dir.path(), "p.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn forecast_summary_shape_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path());
    let short = path(dir.path(), "s.json");
    let direct = path(dir.path(), "d.json");
    ok(&["fit", &data, "--family", "short_term", "-o", &short]);
    ok(&["fit", &data, "--family", "direct", "--orders", "1,1,1", "-o", &direct]);
    let (ens, summary) = (path(dir.path(), "e.csv"), path(dir.path(), "s.csv"));
    let common = [
        "--issue-date", "2002-01-10", "--horizon", "21", "--paths", "50", "--seed", "3", "-o", &ens, "--summary",
        &summary,
    ];
    let mut args = vec!["forecast", &data, "--params", &short, "--params", &direct, "--delta", "5"];
    args.extend(common);
    ok(&args);
    let text = std::fs::read_to_string(&summary).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "day,date,mean,q05,q50,q95");
    assert_eq!(rows.len(), 22);
    let ens_rows = std::fs::read_to_string(&ens).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(ens_rows, 1 + 50 * 21);

    let mut args = vec!["forecast", &data, "--params", &short, "--params", &direct, "--delta", "22"];
    args.extend(common);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot exceed"));

    // model2 with delta > 0 needs the short-term parameters
    let mut args = vec!["forecast", &data, "--params", &direct, "--delta", "5"];
    args.extend(common);
    let out = run(&args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("short_term"));
}

#[test]
fn forecast_with_weather_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path());
    let short = path(dir.path(), "s.json");
    ok(&["fit", &data, "--family", "short_term", "-o", &short]);
    let weather = path(dir.path(), "w.csv");
    std::fs::write(&weather, "date,temp_c,precip_mm\n2002-01-11,-5,3\n2002-01-12,-4,0\n2002-01-13,-2,0\n").unwrap();
    let (ens, summary) = (path(dir.path(), "e.csv"), path(dir.path(), "s.csv"));
    let stdout = ok(&[
        "forecast", &data, "--params", &short, "--issue-date", "2002-01-10", "--weather-forecast", &weather,
        "--horizon", "3", "--paths", "20", "--seed", "1", "-o", &ens, "--summary", &summary,
    ]);
    assert!(stdout.contains("delta: 3"));
}

#[test]
fn gof_outputs_and_ks_format() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path());
    let short = path(dir.path(), "s.json");
    ok(&["fit", &data, "--family", "short_term", "-o", &short]);
    let (pit, hist) = (path(dir.path(), "pit.csv"), path(dir.path(), "h.csv"));
    let stdout = ok(&["gof", &data, "--params", &short, "--seed", "1", "-o", &pit, "--histogram", &hist]);
    let ks = stdout.lines().find(|l| l.starts_with("ks_statistic: ")).unwrap();
    let digits = ks.trim_start_matches("ks_statistic: ").split('.').nth(1).unwrap();
    assert_eq!(digits.len(), 6);
    let values: Vec<f64> = std::fs::read_to_string(&pit)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    assert!(!values.is_empty());
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{pit}.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["months"], serde_json::json!([12, 1, 2]));

    let temp = path(dir.path(), "t.json");
    ok(&["fit", &data, "--family", "temperature", "--orders", "1,1", "-o", &temp]);
    ok(&["gof", &data, "--params", &temp, "--seed", "1", "-o", &pit, "--histogram", &hist]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{pit}.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["months"].as_array().unwrap().len(), 12);
}

#[test]
fn evaluate_writes_one_csv_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path());
    let out = dir.path().join("eval");
    ok(&[
        "evaluate", &data, "--deltas", "0,2", "--horizon", "3", "--direct-orders", "1,1,1", "--paths", "10", "--seed",
        "2", "--out-dir", out.to_str().unwrap(),
    ]);
    for f in ["model2_delta0.csv", "model2_delta2.csv", "baseline.csv", "evaluation.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("evaluation.json")).unwrap()).unwrap();
    let mean_depth = report["mean_depth"].as_f64().unwrap();
    for line in std::fs::read_to_string(out.join("baseline.csv")).unwrap().lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[2] - cols[1] / mean_depth).abs() < 1e-12);
    }
}

#[test]
fn simulate_round_trip_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    ok(&["simulate", "--preset", "geilo", "--days", "366", "--seed", "5", "-o", &a]);
    ok(&["simulate", "--preset", "geilo", "--days", "366", "--seed", "5", "-o", &b]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let data = snowcast::load_csv(&a).unwrap();
    assert_eq!(data.len(), 366);
    let mut buf = Vec::new();
    data.to_writer(&mut buf).unwrap();
    assert_eq!(buf, std::fs::read(&a).unwrap());
    for r in data.records() {
        assert!(r.precipitation.unwrap() >= 0.0 && r.snow_depth.unwrap() >= 0.0);
    }
}

#[test]
fn simulate_from_parameter_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path());
    let p = |n: &str| path(dir.path(), n);
    ok(&["fit", &data, "--family", "short_term", "-o", &p("s.json")]);
    ok(&["fit", &data, "--family", "temperature", "--orders", "1,1", "-o", &p("t.json")]);
    ok(&["fit", &data, "--family", "precipitation", "--orders", "1,1,0,1,1,0", "-o", &p("r.json")]);
    ok(&[
        "simulate", "--params", &p("s.json"), "--params", &p("t.json"), "--params", &p("r.json"), "--days", "400",
        "--seed", "3", "-o", &p("sim.csv"),
    ]);
    assert_eq!(snowcast::load_csv(p("sim.csv")).unwrap().len(), 400);
    let out = run(&["simulate", "--params", &p("s.json"), "--days", "10", "--seed", "3", "-o", &p("x.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing temperature parameters"));
}

#[test]
fn entropy_seed_is_recorded_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    ok(&["simulate", "--preset", "oslo", "--days", "50", "-o", &a]);
    let manifest_path = format!("{a}.manifest.json");
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["seed_source"], "entropy");
    assert!(manifest["seed"].is_u64());
    let first = std::fs::read(&a).unwrap();
    std::fs::remove_file(&a).unwrap();
    ok(&["replay", &manifest_path]);
    assert_eq!(std::fs::read(&a).unwrap(), first);
}
