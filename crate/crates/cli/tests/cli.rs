use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fastgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastgate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn optimize_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["optimize", "--out", path(dir)];
    args.extend_from_slice(extra);
    fastgate(&args)
}

#[test]
fn evaluate_rejects_malformed_schemes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        ("decreasing.json", r#"{"groups":[{"z":1,"t":0.5},{"z":-1,"t":0.2}]}"#, 2),
        ("empty.json", r#"{"groups":[]}"#, 2),
        ("zero.json", r#"{"groups":[{"z":0,"t":0.5}]}"#, 2),
        ("truncated.json", "{\n  \"groups\": [\n", 1),
        ("ok.json", r#"{"groups":[{"z":1,"t":0.0},{"z":-1,"t":0.5}]}"#, 0),
    ];
    for (name, body, expected) in cases {
        let file = tmp.path().join(name);
        fs::write(&file, body).unwrap();
        let res = fastgate(&["evaluate", path(&file), "--out", path(&out)]);
        assert_eq!(code(&res), expected, "{name}: {}", String::from_utf8_lossy(&res.stderr));
    }
}

#[test]
fn parse_errors_carry_line_and_column() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("bad.json");
    fs::write(&file, "{\n  \"groups\": [ {\"z\": 1, \"t\": } ]\n}\n").unwrap();
    let res = fastgate(&["evaluate", path(&file), "--out", path(tmp.path())]);
    assert_eq!(code(&res), 1);
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("bad.json:2:"), "{err}");
}

#[test]
fn unknown_flag_is_a_parse_error() {
    assert_eq!(code(&fastgate(&["evaluate", "--no-such-flag"])), 1);
    assert_eq!(code(&fastgate(&["--help"])), 0);
}

#[test]
fn gzc_optimum_is_a_solution_and_reevaluates() {
    let tmp = TempDir::new().unwrap();
    let res = optimize_into(tmp.path(), &["--family", "gzc", "--n", "1", "--seed", "7"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let result = json(&tmp.path().join("result.json"));
    assert!(result["report"]["error"].as_f64().unwrap() <= 1e-4);
    assert_eq!(result["feasible"], Value::Bool(true));

    let eval_dir = tmp.path().join("eval");
    let res = fastgate(&["evaluate", path(&tmp.path().join("solution.json")), "--out", path(&eval_dir)]);
    assert_eq!(code(&res), 0);
    let report = json(&eval_dir.join("report.json"));
    let a = report["gate_time"].as_f64().unwrap();
    let b = result["report"]["gate_time"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn symmetric_n32_gate_time() {
    let tmp = TempDir::new().unwrap();
    let res = optimize_into(tmp.path(), &["--family", "symmetric", "--abc", "1,2,2", "--n", "32"]);
    assert_eq!(code(&res), 0);
    let result = json(&tmp.path().join("result.json"));
    let t = result["report"]["gate_time"].as_f64().unwrap();
    assert!((t - 0.12).abs() <= 0.1 * 0.12, "T_G = {t}");
    assert_eq!(result["report"]["n_pairs"], 320);
}

#[test]
fn repeated_runs_produce_identical_artifacts() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let res = optimize_into(dir, &["--family", "symmetric", "--n", "2", "--seed", "11", "--starts", "8"]);
        assert_eq!(code(&res), 0);
    }
    for name in ["solution.json", "scheme.json", "result.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let manifest = json(&a.join("manifest.json"));
    let result = json(&a.join("result.json"));
    assert_eq!(manifest["hash"], result["manifest_hash"]);
    assert_eq!(manifest["seed"], 11);
    assert!(manifest["duration_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn different_seed_changes_manifest_hash() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    optimize_into(&a, &["--family", "gzc", "--seed", "1", "--starts", "4"]);
    optimize_into(&b, &["--family", "gzc", "--seed", "2", "--starts", "4"]);
    assert_ne!(json(&a.join("manifest.json"))["hash"], json(&b.join("manifest.json"))["hash"]);
}

#[test]
fn family_file_matches_flag() {
    let tmp = TempDir::new().unwrap();
    let fam = tmp.path().join("family.json");
    fs::write(&fam, r#"{"kind":"symmetric_abc","params":{"abc":[1,2,2],"n":1}}"#).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let common = ["--n", "2", "--seed", "3", "--starts", "8"];
    let mut args = vec!["--family-file", path(&fam)];
    args.extend_from_slice(&common);
    assert_eq!(code(&optimize_into(&a, &args)), 0);
    let mut args = vec!["--family", "symmetric"];
    args.extend_from_slice(&common);
    assert_eq!(code(&optimize_into(&b, &args)), 0);
    assert_eq!(fs::read(a.join("scheme.json")).unwrap().len(), fs::read(b.join("scheme.json")).unwrap().len());
    assert_eq!(json(&a.join("result.json"))["delays"], json(&b.join("result.json"))["delays"]);
}

#[test]
fn insufficient_laser_area_is_infeasible() {
    let tmp = TempDir::new().unwrap();
    let res = optimize_into(tmp.path(), &["--family", "symmetric", "--n", "32", "--max-area-pi", "4"]);
    assert_eq!(code(&res), 3);
}

#[test]
fn scaling_writes_table_and_fit() {
    let tmp = TempDir::new().unwrap();
    let res = fastgate(&[
        "scaling", "--family", "symmetric", "--abc", "1,2,2", "--n", "2,4,8,16,32", "--out", path(tmp.path()),
    ]);
    assert_eq!(code(&res), 0);
    let csv = fs::read_to_string(tmp.path().join("scaling.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# manifest_hash="));
    assert!(lines[1].starts_with("n,n_pairs,gate_time"));
    assert_eq!(lines.len(), 7);
    let fit = json(&tmp.path().join("fit.json"));
    let k = fit["fit"]["fixed_slope_prefactor"].as_f64().unwrap();
    assert!((k - 5.37).abs() <= 0.15 * 5.37, "k = {k}");
}

#[test]
fn gzc_trajectory_is_closed() {
    let tmp = TempDir::new().unwrap();
    let res = fastgate(&["trajectory", "--family", "gzc", "--n", "4", "--out", path(tmp.path())]);
    assert_eq!(code(&res), 0);
    let text = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    for mode in ["00", "01"] {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r[0] == mode)
            .map(|r| (r[3].parse().unwrap(), r[4].parse().unwrap()))
            .collect();
        assert!(pts.len() > 10);
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        assert!((first.0 - last.0).hypot(first.1 - last.1) < 1e-3, "{mode}: {first:?} vs {last:?}");
        let spread = pts.iter().map(|p| p.0.hypot(p.1)).fold(0.0, f64::max);
        assert!(spread > 0.1);
    }
}

#[test]
fn designed_network_compiles_to_twenty_pairs() {
    let tmp = TempDir::new().unwrap();
    let sol = tmp.path().join("sol");
    assert_eq!(code(&optimize_into(&sol, &["--family", "symmetric", "--n", "2", "--starts", "16"])), 0);
    let net = tmp.path().join("net");
    let res = fastgate(&["optics", "design", path(&sol.join("solution.json")), "--out", path(&net)]);
    assert_eq!(code(&res), 0);
    let train = tmp.path().join("train");
    let res = fastgate(&["optics", "compile", "--network", path(&net.join("network.json")), "--out", path(&train)]);
    assert_eq!(code(&res), 0);
    let summary = json(&train.join("train.json"));
    assert_eq!(summary["n_pairs"], 20);
    assert!((summary["total_energy"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let csv = fs::read_to_string(train.join("train.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap() == "time_s,direction,area_over_pi,source_pulse");

    let check = tmp.path().join("check");
    let res = fastgate(&[
        "optics",
        "check",
        "--network",
        path(&net.join("network.json")),
        "--scheme",
        path(&sol.join("solution.json")),
        "--out",
        path(&check),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(json(&check.join("realizability.json"))["realizable"], Value::Bool(true));
}

#[test]
fn explicit_scheme_cannot_be_designed() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("s.json");
    fs::write(&file, r#"{"groups":[{"z":1,"t":0.0},{"z":-1,"t":0.5}]}"#).unwrap();
    assert_eq!(code(&fastgate(&["optics", "design", path(&file), "--out", path(tmp.path())])), 2);
}

#[test]
fn landscape_grid_and_angle_sweep() {
    let tmp = TempDir::new().unwrap();
    let land = tmp.path().join("land");
    let res = fastgate(&[
        "landscape", "--family", "gzc", "--at", "1,1,1.8", "--axis", "0:0.2:4:5", "--axis", "1:0.2:4:4", "--out",
        path(&land), "--format", "csv",
    ]);
    assert_eq!(code(&res), 0);
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1 + 20);

    let sol = tmp.path().join("sol");
    optimize_into(&sol, &["--family", "symmetric", "--n", "2", "--starts", "16"]);
    let sweep = tmp.path().join("sweep");
    let res = fastgate(&[
        "robustness",
        "angle",
        "--scheme",
        path(&sol.join("solution.json")),
        "--out",
        path(&sweep),
    ]);
    assert_eq!(code(&res), 0);
    let summary = json(&sweep.join("summary.json"));
    let mrad = summary["threshold"].as_f64().unwrap();
    assert!((2.0..=15.0).contains(&mrad), "{mrad}");
    assert_eq!(summary["model"], "transverse_accumulation");
    let bad = fastgate(&[
        "robustness",
        "angle",
        "--model",
        "sideways",
        "--scheme",
        path(&sol.join("solution.json")),
        "--out",
        path(&sweep),
    ]);
    assert_eq!(code(&bad), 2);
}
