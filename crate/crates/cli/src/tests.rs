use std::fs;
use std::path::Path;

use serde_json::Value;

use super::*;

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["intermittent", "--out", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn renewal_first_row_is_measure_of_y() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(dir.path(), &["renewal", "--alpha", "2", "--N", "10000", "--M", "32768", "--seed", "7"]);
    assert_eq!(code, 0);
    let rows = csv_rows(&dir.path().join("renewal.csv"));
    assert_eq!(rows[0], ["n", "u_operator", "u_mc", "stderr"]);
    assert_eq!(rows[1][0], "0");
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 0.5);
    assert_eq!(rows.len(), 10_002);
    let summary = json(&dir.path().join("renewal_summary.json"));
    assert_eq!(summary["verdicts"].as_array().unwrap().len(), 5);
    assert_eq!(summary["target_slope"], -0.5);
    let manifest = json(&dir.path().join("renewal_manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["M"], 32768);
    assert_eq!(manifest["config"]["gamma"], 3.0);
}

#[test]
fn sweep_has_one_row_per_cell_with_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(
        dir.path(),
        &["sweep", "--alphas", "1.2,1.7", "--ds", "2,3", "--N", "1e4", "--samples", "100", "--seed", "1"],
    );
    assert_eq!(code, 0);
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 5);
    let col = |name: &str| rows[0].iter().position(|c| c == name).unwrap();
    let (a, d, p) = (col("alpha"), col("d"), col("prediction"));
    let cells: Vec<(&str, &str, &str)> = rows[1..].iter().map(|r| (&r[a][..], &r[d][..], &r[p][..])).collect();
    assert_eq!(
        cells,
        [("1.2", "2", "ly_full"), ("1.2", "3", "ly_full"), ("1.7", "2", "ly_full"), ("1.7", "3", "ly_full")]
    );
    for r in &rows[1..] {
        let ly: f64 = r[col("frac_ly")].parse().unwrap();
        let prox: f64 = r[col("frac_proximal")].parse().unwrap();
        let sep: f64 = r[col("frac_separated")].parse().unwrap();
        assert!(ly <= prox.min(sep));
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["renewal", "--bogus", "1"]), 1);
    assert_eq!(run_in(dir.path(), &["frobnicate"]), 1);
    assert_eq!(run_in(dir.path(), &["induce", "--N", "ten"]), 1);
    assert_eq!(run_in(dir.path(), &["induce", "--map", "tent"]), 1);
    assert_eq!(run_in(dir.path(), &["accept", "--suite", "secondary"]), 1);
    assert_eq!(run(["intermittent", "--help"]), 0);
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none(), "failed runs must not write outputs");
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["density", "--alpha", "0.5", "--M", "256", "--max-iter", "1"]), 2);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "alpha = 2.0\nN = 200\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(run_in(&out, &["--config", cfg.to_str().unwrap(), "induce", "--alpha", "3"]), 0);
    let manifest = json(&out.join("induce_manifest.json"));
    assert_eq!(manifest["config"]["alpha"], 3.0);
    assert_eq!(manifest["config"]["N"], 200);
    assert_eq!(manifest["config"]["window_hi"], 20);
}

#[test]
fn empty_config_file_gives_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let a: tuples::TuplesConfig = resolve(read_table(Some(&cfg)).unwrap(), &tuples::TuplesArgs::default()).unwrap();
    let b = tuples::TuplesConfig::default();
    assert_eq!(serde_json::to_value(a).unwrap(), serde_json::to_value(b).unwrap());
}

#[test]
fn misspelt_key_is_rejected_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "alfa = 2.0\n").unwrap();
    let err = resolve::<renewal::RenewalConfig, _>(read_table(Some(&cfg)).unwrap(), &renewal::RenewalArgs::default())
        .unwrap_err();
    assert!(err.to_string().contains("did you mean `alpha`"), "{err}");
    assert_eq!(err.exit_code(), 1);
    assert_eq!(run_in(&dir.path().join("o"), &["--config", cfg.to_str().unwrap(), "renewal"]), 1);
}

#[test]
fn type_mismatch_names_key_and_type() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "samples = \"many\"\n").unwrap();
    let err = resolve::<tuples::TuplesConfig, _>(read_table(Some(&cfg)).unwrap(), &tuples::TuplesArgs::default())
        .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("`samples`") && msg.contains("not a count"), "{msg}");
}

#[test]
fn manifest_replays_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let args = ["tuples", "--alpha", "2.5", "--N", "5000", "--samples", "100", "--checkpoints", "500,1000", "--seed", "9"];
    assert_eq!(run_in(&first, &args), 0);
    let manifest = first.join("tuples_manifest.json");
    let second = dir.path().join("b");
    assert_eq!(run_in(&second, &["--config", manifest.to_str().unwrap(), "tuples"]), 0);
    let a = fs::read(first.join("tuples.csv")).unwrap();
    assert_eq!(a, fs::read(second.join("tuples.csv")).unwrap());
    assert_eq!(csv_rows(&first.join("tuples.csv")).len(), 4);
    let m = json(&manifest);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["tuples.csv", "tuples_summary.json"]);
    assert_eq!(m["config"]["delta"], 1.0 / 3.0);
    assert_eq!(m["counters"]["censored"], 0);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(w);
        let args = ["--workers", w, "renewal", "--N", "500", "--M", "1024", "--samples", "5000", "--mc-horizon", "100"];
        assert_eq!(run_in(&out, &args), 0);
        csvs.push((fs::read(out.join("renewal.csv")).unwrap(), fs::read(out.join("renewal_summary.json")).unwrap()));
        assert_eq!(json(&out.join("renewal_manifest.json"))["workers"], w.parse::<u64>().unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn every_subcommand_writes_header_and_one_manifest() {
    let cases: [&[&str]; 4] = [
        &["induce", "--N", "100"],
        &["density", "--M", "512", "--alpha", "1.5"],
        &["density", "--map", "doubling", "--M", "64"],
        &["tuples", "--map", "doubling", "--d", "3", "--N", "1000", "--samples", "100", "--expansivity-trials", "0"],
    ];
    for args in cases {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &[&["--svg"], args].concat()), 0, "{args:?}");
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names.iter().filter(|n| n.ends_with("_manifest.json")).count(), 1, "{names:?}");
        let csv = names.iter().find(|n| n.ends_with(".csv")).unwrap();
        let header = fs::read_to_string(dir.path().join(csv)).unwrap();
        assert!(header.lines().next().unwrap().chars().next().unwrap().is_ascii_alphabetic());
    }
}

#[test]
fn density_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["density", "--map", "doubling", "--M", "64"]), 0);
    let rows = csv_rows(&dir.path().join("density.csv"));
    assert_eq!(rows[0], density::COLUMNS);
    assert_eq!(rows.len(), 65);
    for r in &rows[1..] {
        assert!((r[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn induce_columns_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["induce", "--alpha", "1", "--N", "100"]), 0);
    let rows = csv_rows(&dir.path().join("induce.csv"));
    assert_eq!(rows[0], induce::COLUMNS);
    let f = |r: usize, c: usize| rows[r][c].parse::<f64>().unwrap();
    // y_1 solves y (1 + 2y) = 1/2 at alpha = 1.
    assert!((f(2, 1) - (5f64.sqrt() - 1.0) / 4.0).abs() < 1e-15);
    for n in 2..=100 {
        assert_eq!(f(n + 1, 3), 0.5 * f(n - 1, 1));
    }
}

#[test]
fn output_directory_precedence() {
    assert_eq!(out_dir(Some(Path::new("x"))), PathBuf::from("x"));
    std::env::set_var(OUT_ENV, "from-env");
    assert_eq!(out_dir(None), PathBuf::from("from-env"));
    assert_eq!(out_dir(Some(Path::new("x"))), PathBuf::from("x"));
    std::env::remove_var(OUT_ENV);
    assert_eq!(out_dir(None), PathBuf::from("out"));
}

#[test]
fn quick_acceptance_run_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(dir.path(), &["accept", "--suite", "primary", "--scale", "quick", "--only", "1,10"]);
    let summary = json(&dir.path().join("accept_summary.json"));
    let criteria = summary["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 2);
    assert_eq!(criteria[0]["id"], 1);
    assert!(criteria[0]["checks"].as_array().unwrap().len() == 3);
    let all = summary["all_passed"].as_bool().unwrap();
    assert_eq!(code, if all { 0 } else { 2 });
}
