use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relchange_cli::ingest::read_table;
use relchange_cli::scenario_file::load_scenario;
use relchange_core::relevance::mean_test;
use relchange_core::sim::{gen_chi2_standardized, gen_iid_gaussian, seeded_rng};
use relchange_core::{cusum_process, estimate_changepoint, integrated_squared_cusum, mhat_squared};
use relchange_core::{RelevanceConfig, RelevanceReport};
use tempfile::TempDir;

fn relchange(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relchange"))
        .args(args)
        .env_remove("RELCHANGE_THREADS")
        .output()
        .expect("binary runs")
}

fn relchange_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relchange"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn column_file(dir: &TempDir, name: &str, header: &str, values: &[f64]) -> PathBuf {
    let mut text = format!("{header}\n");
    for v in values {
        text.push_str(&format!("{v:?}\n"));
    }
    write(dir, name, &text)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn noisy_step(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (i as f64 * 1.3).sin() * 0.5 + if i >= n / 2 { 3.0 } else { 0.0 })
        .collect()
}

#[test]
fn ingest_step_series_and_regression_pair() {
    let dir = TempDir::new().unwrap();
    let step = column_file(&dir, "step.csv", "z", &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let table = read_table(&step).unwrap();
    let sample = table.sample().unwrap();
    assert_eq!((sample.n(), sample.d()), (6, 1));
    let p = cusum_process(&sample);
    let cp = estimate_changepoint(&p);
    let m2 = mhat_squared(integrated_squared_cusum(&p), &cp, None);
    assert!((m2 - 19.0 / 18.0).abs() < 1e-12);

    let pair = write(&dir, "xy.csv", "x,y\n1,2\n2,4.5\n3,5.9\n");
    let table = read_table(&pair).unwrap();
    let (x, y) = table.regression_pair().unwrap();
    assert_eq!(x, [1.0, 2.0, 3.0]);
    assert_eq!(y, [2.0, 4.5, 5.9]);
}

#[test]
fn short_series_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let step = column_file(&dir, "step.csv", "z", &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let out = relchange(&["test", "--input", s(&step), "--delta", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn na_cell_names_line_and_column() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "na.csv", "a,b\n1,2\n3,NA\n5,6\n");
    let out = relchange(&["test", "--input", s(&path), "--delta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("line 3") && err.contains("'b'") && err.contains("NA"),
        "{err}"
    );
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let data = column_file(&dir, "z.csv", "z", &noisy_step(40));
    assert_eq!(
        relchange(&["test", "--input", "/nonexistent/file.csv", "--delta", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        relchange(&["test", "--input", s(&data), "--delta", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        relchange(&[
            "test",
            "--input",
            s(&data),
            "--delta",
            "1",
            "--alpha",
            "1.5"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        relchange(&["test", "--input", s(&data), "--delta", "1", "--bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        relchange(&["test", "--input", s(&data)]).status.code(),
        Some(1)
    );
    assert_eq!(relchange(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(relchange(&["--help"]).status.code(), Some(0));
    assert_eq!(
        relchange(&["test", "--input", s(&data), "--delta", "1"])
            .status
            .code(),
        Some(0)
    );
    let out = relchange_env(
        &[
            "simulate",
            "--config",
            s(&scenario("mean_shift.toml")),
            "--reps",
            "2",
        ],
        "RELCHANGE_THREADS",
        "zero",
    );
    assert_eq!(out.status.code(), Some(1));
    let mixed = write(&dir, "two.csv", "a,b\n1,2\n");
    assert_eq!(
        relchange(&[
            "test",
            "--input",
            s(&mixed),
            "--test",
            "distribution",
            "--delta",
            "1"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn json_report_round_trips() {
    let dir = TempDir::new().unwrap();
    let values = noisy_step(60);
    let data = column_file(&dir, "z.csv", "z", &values);
    let out = relchange(&["test", "--input", s(&data), "--delta", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: RelevanceReport = serde_json::from_str(&stdout(&out)).unwrap();
    let direct = mean_test(
        &relchange_core::Sample::from_slice(&values).unwrap(),
        &RelevanceConfig::new(2.0, 0.05).unwrap(),
    )
    .unwrap();
    assert_eq!(parsed, direct);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in [
        "test",
        "n",
        "delta",
        "alpha",
        "m_hat_squared",
        "tau_hat_squared",
        "t_hat",
        "break_index",
        "p_value",
        "reject",
        "critical_value",
        "degenerate",
        "segment_estimates",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn step_series_mean_test_does_not_reject_large_threshold() {
    let dir = TempDir::new().unwrap();
    let mut values = vec![0.0; 10];
    values.extend([1.0; 10]);
    let data = column_file(&dir, "step.csv", "z", &values);
    let out = relchange(&["test", "--input", s(&data), "--delta", "2"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["reject"], false);
    assert_eq!(json["break_index"], 10);
}

#[test]
fn p_value_nondecreasing_in_threshold() {
    let dir = TempDir::new().unwrap();
    let data = column_file(&dir, "z.csv", "z", &noisy_step(80));
    let mut last = -1.0;
    for delta in ["0.5", "1", "2", "2.9", "3", "3.1", "4", "6"] {
        let out = relchange(&["test", "--input", s(&data), "--delta", delta]);
        let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        let p = json["p_value"].as_f64().unwrap();
        assert!(p >= last, "delta {delta}: {p} < {last}");
        last = p;
    }
}

#[test]
fn csv_output_and_date_labels() {
    let dir = TempDir::new().unwrap();
    let values = noisy_step(20);
    let mut text = String::from("date,rate\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{}:{},{v}\n", 1970 + i / 4, i % 4 + 1));
    }
    let data = write(&dir, "dated.csv", &text);
    let out_path = dir.path().join("report.csv");
    let out = relchange(&[
        "test",
        "--input",
        s(&data),
        "--delta",
        "1",
        "--format",
        "csv",
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = report.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("test,n,delta,alpha,m_hat_squared"));
    assert!(header.ends_with("before_1,after_1,break_label"));
    // break after observation 10 = 1972:2
    assert!(lines.next().unwrap().ends_with(",1972:2"));

    let json = relchange(&["test", "--input", s(&data), "--delta", "1"]);
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(parsed["break_label"], "1972:2");
}

#[test]
fn regression_and_correlation_subcommands() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("x,y\n");
    for i in 0..40 {
        let x = ((i * 7) % 11) as f64 - 5.0;
        let beta = if i < 20 { 0.5 } else { 2.5 };
        text.push_str(&format!(
            "{x},{}\n",
            beta * x + ((i as f64) * 0.9).sin() * 0.1
        ));
    }
    let path = write(&dir, "xy.csv", &text);
    let out = relchange(&[
        "test",
        "--input",
        s(&path),
        "--test",
        "regression",
        "--delta",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["test"], "regression");

    let out = relchange(&[
        "test",
        "--input",
        s(&path),
        "--test",
        "correlation-stat",
        "--delta",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["calibrated"], false);

    let single = column_file(&dir, "z.csv", "z", &noisy_step(30));
    let out = relchange(&[
        "test",
        "--input",
        s(&single),
        "--test",
        "regression",
        "--delta",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrate_delta_distances() {
    let dir = TempDir::new().unwrap();
    let a = column_file(&dir, "a.csv", "z", &[0.1, 0.5, -0.3, 2.0]);
    let b = column_file(&dir, "b.csv", "z", &[1.0, 0.2, 0.7]);
    let same = relchange(&["calibrate-delta", "--input", s(&a), "--input2", s(&a)]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&same)).unwrap();
    assert_eq!(json["distance"].as_f64().unwrap(), 0.0);
    let ab = relchange(&[
        "calibrate-delta",
        "--input",
        s(&a),
        "--input2",
        s(&b),
        "--format",
        "csv",
    ]);
    let ba = relchange(&[
        "calibrate-delta",
        "--input",
        s(&b),
        "--input2",
        s(&a),
        "--format",
        "csv",
    ]);
    assert_eq!(ab.status.code(), Some(0));
    assert_eq!(ab.stdout, ba.stdout);
    assert!(stdout(&ab).starts_with("distance\n"));
}

#[test]
fn calibrate_delta_normal_vs_chi2() {
    let dir = TempDir::new().unwrap();
    let normal = gen_iid_gaussian(100_000, 1.0, 0.0, 0.0, 1.0, 1.0, &mut seeded_rng(51)).unwrap();
    let chi2 = gen_chi2_standardized(100_000, 0.0, 1.0, &mut seeded_rng(52)).unwrap();
    let a = column_file(&dir, "normal.csv", "z", &normal.column(0));
    let b = column_file(&dir, "chi2.csv", "z", &chi2.column(0));
    let out = relchange(&["calibrate-delta", "--input", s(&a), "--input2", s(&b)]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let d = json["distance"].as_f64().unwrap();
    assert!((d - 0.2254).abs() < 0.01, "{d}");
}

#[test]
fn simulate_smoke_and_determinism() {
    let cfg = scenario("mean_shift.toml");
    let out = relchange(&["simulate", "--config", s(&cfg), "--reps", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert!(row[0] == "0" || row[0] == "1");

    let args = [
        "simulate",
        "--config",
        s(&cfg),
        "--reps",
        "300",
        "--seed",
        "5",
    ];
    let one = relchange_env(&args, "RELCHANGE_THREADS", "1");
    let three = relchange_env(&args, "RELCHANGE_THREADS", "3");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, three.stdout);
    assert_eq!(one.stdout, relchange(&args).stdout);
}

#[test]
fn invalid_scenarios_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let base = std::fs::read_to_string(scenario("mean_shift.toml")).unwrap();
    let zero_reps = write(&dir, "zero.toml", &base.replace("reps = 5000", "reps = 0"));
    assert_eq!(
        relchange(&["simulate", "--config", s(&zero_reps)])
            .status
            .code(),
        Some(1)
    );
    let bad_kind = write(&dir, "kind.toml", &base.replace("iid_gaussian", "garch"));
    assert_eq!(
        relchange(&["simulate", "--config", s(&bad_kind)])
            .status
            .code(),
        Some(1)
    );
    let mismatch = write(
        &dir,
        "test.toml",
        &base.replace("test = \"mean\"", "test = \"regression\""),
    );
    assert_eq!(
        relchange(&["simulate", "--config", s(&mismatch)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        relchange(&["simulate", "--config", "/nonexistent.toml"])
            .status
            .code(),
        Some(1)
    );
    let no_sweep: String = base.split("[sweep]").next().unwrap().to_string();
    let no_sweep = write(&dir, "nosweep.toml", &no_sweep);
    assert_eq!(
        relchange(&["power", "--config", s(&no_sweep), "--reps", "2"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn bundled_scenarios_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let file = load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        file.scenario.validate().unwrap();
        let sweep = file.sweep.expect("every bundled scenario has a sweep");
        for v in &sweep.values {
            sweep.parameter.apply(&file.scenario, *v).unwrap();
        }
        count += 1;
    }
    assert!(count >= 8);
}

#[test]
fn power_table_shape_and_u_shape() {
    let out = relchange(&[
        "power",
        "--config",
        s(&scenario("table1_distribution.toml")),
        "--reps",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "n,grid_value,rejection_rate,mc_se,predicted_power"
    );
    assert_eq!(lines.len(), 22);

    let out = relchange(&[
        "power",
        "--config",
        s(&scenario("mean_shift.toml")),
        "--reps",
        "400",
    ]);
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(3).map(|c| c.parse().unwrap()).collect())
        .collect();
    for n in [200.0, 500.0, 1000.0] {
        let curve: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r[0] == n)
            .map(|r| (r[1], r[2]))
            .collect();
        assert_eq!(curve.len(), 9);
        let at_zero = curve.iter().find(|c| c.0 == 0.0).unwrap().1;
        assert!(curve.iter().all(|c| c.1 >= at_zero));
        let at_two = curve.iter().find(|c| c.0 == 2.0).unwrap().1;
        let at_minus_two = curve.iter().find(|c| c.0 == -2.0).unwrap().1;
        assert!(at_two > 0.9 && at_minus_two > 0.9);
    }

    let first = relchange(&[
        "power",
        "--config",
        s(&scenario("mean_threshold.toml")),
        "--reps",
        "50",
        "--format",
        "json",
    ]);
    let again = relchange(&[
        "power",
        "--config",
        s(&scenario("mean_threshold.toml")),
        "--reps",
        "50",
        "--format",
        "json",
    ]);
    assert_eq!(first.stdout, again.stdout);
    let parsed: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 33);
}
