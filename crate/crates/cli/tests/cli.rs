use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn catdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const HOBBIES: &str = "Sports\nCars\nTelevision\nComputer games\nReading\n";

fn hobby_fixture(dir: &Path, spec: &str) -> (String, String) {
    write(dir, "hobbies.txt", HOBBIES);
    let spec = write(dir, "mech.spec", spec);
    let data = write(
        dir,
        "data.csv",
        "hobby,id\nSports,1\nCars,2\nTelevision,3\nComputer games,4\nReading,5\nSports,6\n",
    );
    (spec, data)
}

#[test]
fn verify_l1_example_reports_counts() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "l1.spec", "type = exponential\nutility = l1\nm = 2\nn = 2\n");
    for (eps, delta) in [("0.5", "0"), ("2", "0.1")] {
        let out = catdp(&["verify", "--spec", &spec, "--epsilon", eps, "--delta", delta]);
        let report = json(&out);
        assert_eq!(report["checks_naive"], "18360");
        assert_eq!(report["checks_performed"], "924");
        assert_eq!(report["method"], "sufficient-set");
        let private = report["private"].as_bool().unwrap();
        assert_eq!(out.status.code(), Some(if private { 0 } else { 1 }));
        assert!(report["binding_pair"].is_object());
    }
}

#[test]
fn verify_hamming_at_epsilon_exits_zero() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        dir.path(),
        "h.spec",
        "type = exponential\nutility = hamming\nk = 0.7\nm = 2\nn = 2\n",
    );
    let out = catdp(&["verify", "--spec", &spec, "--epsilon", "0.7", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["checks_performed"], "36");
    let out = catdp(&["verify", "--spec", &spec, "--epsilon", "0.6", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_identity_matrix_is_not_private() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "id.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let spec = write(dir.path(), "id.spec", "type = product\nmatrix = id.csv\nm = 2\nn = 1\n");
    let out = catdp(&["verify", "--spec", &spec, "--epsilon", "1", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["verdict"], "not-private");
    let out = catdp(&["verify", "--spec", &spec, "--epsilon", "1", "--delta", "0", "--bruteforce"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["method"], "brute-force");
}

#[test]
fn verify_exact_boundary() {
    let dir = TempDir::new().unwrap();
    // e^k = (e^ε + mδ)/(1-δ) with e^ε = 2, δ = 1/4, m = 2.
    let spec = write(
        dir.path(),
        "h.spec",
        "type = exponential\nutility = hamming\nexp_k = 10/3\nm = 2\nn = 2\n",
    );
    let out = catdp(&["verify", "--spec", &spec, "--exp-epsilon", "2", "--delta", "1/4"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["margin"], "0");
    assert_eq!(report["exact"], true);
    let out = catdp(&["verify", "--spec", &spec, "--exp-epsilon", "2", "--delta", "1/5"]);
    assert_eq!(out.status.code(), Some(1));
    // --exact without a rational e^ε is an input error.
    let out = catdp(&["verify", "--spec", &spec, "--epsilon", "1", "--delta", "0", "--exact"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_table_format() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "p.spec", "type = product\np = 0.1\nm = 2\nn = 2\n");
    let out = catdp(&[
        "verify", "--spec", &spec, "--epsilon", "2.1", "--delta", "0", "--format", "table",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("verdict           private\n"), "{text}");
    assert!(text.contains("checks naive      18360"));
}

#[test]
fn budget_exceeded_exits_three() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "l1.spec", "type = exponential\nutility = l1\nm = 2\nn = 2\n");
    let out = catdp(&[
        "verify", "--spec", &spec, "--epsilon", "1", "--delta", "0", "--budget-enum", "8",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = catdp(&[
        "verify", "--spec", &spec, "--epsilon", "1", "--delta", "0", "--bruteforce",
        "--budget-subsets", "8",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "bad.spec", "type = exponential\nutility = nope\nm = 2\nn = 2\n");
    let out = catdp(&["verify", "--spec", &spec, "--epsilon", "1", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let missing = dir.path().join("missing.spec");
    let out = catdp(&["verify", "--spec", missing.to_str().unwrap(), "--epsilon", "1", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = catdp(&["verify", "--spec", &spec, "--delta", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sanitize_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (spec, data) = hobby_fixture(
        dir.path(),
        "type = product\np = 0.1\ncategories = hobbies.txt\nn = 1\n",
    );
    let run = |seed: &str| catdp(&["sanitize", "--spec", &spec, "--data", &data, "--seed", seed]);
    let a = run("7");
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run("7");
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "hobby,id");
    for (i, line) in lines[1..].iter().enumerate() {
        let (label, id) = line.rsplit_once(',').unwrap();
        assert!(HOBBIES.lines().any(|h| h == label), "{line}");
        assert_eq!(id, (i + 1).to_string());
    }
    // Some seed among a handful changes at least one row.
    assert!(["1", "2", "3", "4", "5"].iter().any(|s| run(s).stdout != b.stdout));
}

#[test]
fn sanitize_identity_returns_input() {
    let dir = TempDir::new().unwrap();
    let (spec, data) = hobby_fixture(
        dir.path(),
        "type = exponential\nutility = hamming\nk = no-noise\ncategories = hobbies.txt\nn = 1\n",
    );
    let out_path = dir.path().join("out.csv");
    let out = catdp(&[
        "sanitize", "--spec", &spec, "--data", &data, "--seed", "1", "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out_path).unwrap(), fs::read_to_string(&data).unwrap());
}

#[test]
fn sanitize_named_column() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "hobbies.txt", HOBBIES);
    let spec = write(dir.path(), "p.spec", "type = product\np = 0\ncategories = hobbies.txt\nn = 1\n");
    let data = write(dir.path(), "d.csv", "id,hobby\n1,Cars\n2,Reading\n");
    let out = catdp(&["sanitize", "--spec", &spec, "--data", &data, "--column", "hobby", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "id,hobby\n1,Cars\n2,Reading\n");
}

#[test]
fn sanitize_unknown_label_names_row() {
    let dir = TempDir::new().unwrap();
    let (spec, _) = hobby_fixture(
        dir.path(),
        "type = product\np = 0.1\ncategories = hobbies.txt\nn = 1\n",
    );
    let data = write(dir.path(), "bad.csv", "hobby\nCars\nKnitting\n");
    let out = catdp(&["sanitize", "--spec", &spec, "--data", &data, "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("Knitting") && err.contains("row"), "{err}");
}

#[test]
fn sanitize_flip_rate() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cats.txt", "a\nb\nc\nd\n");
    let spec = write(dir.path(), "p.spec", "type = product\np = 0.05\ncategories = cats.txt\nn = 1\n");
    let rows = 100_000;
    let mut text = String::from("x\n");
    for i in 0..rows {
        text.push_str(["a", "b", "c", "d"][i % 4]);
        text.push('\n');
    }
    let data = write(dir.path(), "d.csv", &text);
    let out = catdp(&["sanitize", "--spec", &spec, "--data", &data, "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let output = String::from_utf8(out.stdout).unwrap();
    let flips = text
        .lines()
        .zip(output.lines())
        .skip(1)
        .filter(|(a, b)| a != b)
        .count();
    let (p, m) = (0.05, 3.0);
    let rate = flips as f64 / rows as f64;
    let sigma = (p * m * (1.0 - p * m) / rows as f64).sqrt();
    assert!((rate - p * m).abs() <= 3.0 * sigma, "flip rate {rate}");
}

#[test]
fn convert_round_trip() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        dir.path(),
        "h.spec",
        "type = exponential\nutility = hamming\nexp_k = 10/3\nm = 2\nn = 3\n",
    );
    let out = catdp(&["convert", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("type = product") && text.contains("p = 3/16"), "{text}");
    let product = write(dir.path(), "p.spec", &text);
    let back = String::from_utf8(catdp(&["convert", "--spec", &product]).stdout).unwrap();
    assert!(back.contains("exp_k = 10/3") && back.contains("utility = hamming"), "{back}");
}

#[test]
fn optimal_matrix_json_and_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("opt.csv");
    let out = catdp(&[
        "optimal", "--epsilon", "1", "--delta", "0.1", "--m", "2", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let p = 0.9 / (1f64.exp() + 2.0);
    assert!((report["p"].as_f64().unwrap() - p).abs() < 1e-15);
    assert_eq!(report["degenerate"], false);
    let rows: Vec<Vec<f64>> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (j, &x) in row.iter().enumerate() {
            if i != j {
                assert!((x - p).abs() < 1e-15);
            }
        }
    }
    // The optimum is itself private.
    write(dir.path(), "o.spec", "type = product\nmatrix = opt.csv\nm = 2\nn = 1\n");
    let spec = dir.path().join("o.spec");
    let out = catdp(&["verify", "--spec", spec.to_str().unwrap(), "--epsilon", "1", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn analyze_hamming_attains_lower_bound() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        dir.path(),
        "h.spec",
        "type = exponential\nutility = hamming\nk = 1\nm = 3\nn = 4\n",
    );
    let out = catdp(&["analyze", "--spec", &spec, "--epsilon", "1", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let lower = r["bounds"]["lower"].as_f64().unwrap();
    assert!((r["expected_error"].as_f64().unwrap() - lower).abs() < 1e-12);
    assert!((r["bounds"]["upper"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

fn bench_rows(args: &[&str]) -> Vec<Value> {
    let mut full = vec!["bench", "--seed", "5"];
    full.extend_from_slice(args);
    let out = catdp(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn bench_rows_match_hand_counts() {
    let rows = bench_rows(&["--utility", "hamming", "--grid", "1:1,2:2", "--delta", "0"]);
    assert_eq!(rows[0]["checks_reduced"], "2");
    assert_eq!(rows[0]["checks_naive"], "4");
    assert_eq!(rows[0]["checks_brute"], "4");
    assert_eq!(rows[1]["checks_reduced"], "36");
    assert_eq!(rows[1]["checks_naive"], "18360");
    for r in &rows {
        assert_eq!(r["status"], "ok");
        assert_eq!(r["agree"], true);
        assert!(r["speedup"].as_f64().unwrap() > 0.0);
    }
    let rows = bench_rows(&["--utility", "l1", "--grid", "2:2"]);
    assert_eq!(rows[0]["checks_reduced"], "924");
    assert_eq!(rows[0]["checks_naive"], "18360");
}

#[test]
fn bench_marks_over_budget_rows_skipped() {
    let rows = bench_rows(&["--utility", "table", "--grid", "1:2,3:3", "--budget-enum", "16"]);
    assert_eq!(rows[0]["status"], "ok");
    assert_eq!(rows[0]["agree"], true);
    assert_eq!(rows[1]["status"], "skipped");
    assert!(rows[1]["reason"].as_str().unwrap().contains("budget"));
}

/// Recompute the sanitised column from the sampling contract: ChaCha20 seeded
/// from the u64 seed, one uniform per row in order, inverse CDF over the row
/// of the symmetric matrix.
#[test]
fn sanitize_matches_independent_sampler() {
    use rand::{Rng, SeedableRng};
    let dir = TempDir::new().unwrap();
    let (spec, data) = hobby_fixture(
        dir.path(),
        "type = product\np = 0.1\ncategories = hobbies.txt\nn = 1\n",
    );
    let out = catdp(&["sanitize", "--spec", &spec, "--data", &data, "--seed", "2024"]);
    let labels: Vec<&str> = HOBBIES.lines().collect();
    let input = [0usize, 1, 2, 3, 4, 0];
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2024);
    let mut want = String::from("hobby,id\n");
    for (i, &row) in input.iter().enumerate() {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = labels.len() - 1;
        for j in 0..labels.len() {
            acc += if j == row { 0.6 } else { 0.1 };
            if u < acc {
                pick = j;
                break;
            }
        }
        want.push_str(&format!("{},{}\n", labels[pick], i + 1));
    }
    assert_eq!(String::from_utf8(out.stdout).unwrap(), want);
}
