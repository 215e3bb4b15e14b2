use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn workspace_file(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blocktail"))
        .args(args)
        .env_remove("BLOCKTAIL_WORKERS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

// a(3, 1, p) = 5/6 + ln p = -2
fn worked_p() -> String {
    format!("{:?}", (-17.0f64 / 6.0).exp())
}

#[test]
fn estimate_worked_example() {
    let p = worked_p();
    let v = json(&run(&["estimate", "--input", &fixture("worked.csv"), "--p", &p]));
    assert_eq!(v["gamma_hat"], 0.75);
    assert!((v["a_coeff"].as_f64().unwrap() + 2.0).abs() < 1e-12);
    assert!((v["log_xp_hat"].as_f64().unwrap() - 3.25).abs() < 1e-12);
    assert!((v["xp_hat"].as_f64().unwrap() - 3.25f64.exp()).abs() < 1e-9);
    assert_eq!(v["total_ranks"], 2);
    assert_eq!(v["heterogeneous"], false);
    let se = 2.0 * 0.75 / 2f64.sqrt();
    assert!((v["se_log_xp"].as_f64().unwrap() - se).abs() < 1e-12);
}

#[test]
fn estimate_heterogeneous_uses_rank_weighting() {
    let v = json(&run(&[
        "estimate",
        "--input",
        &fixture("heterogeneous.csv"),
        "--p",
        "1e-4",
    ]));
    assert_eq!(v["heterogeneous"], true);
    assert_eq!(v["total_ranks"], 6);
    // thresholds weighted by r_i: (4.0 + 2*4.4 + 4.9 + 2*5.0) / 6
    let excess = (6.1 - 4.0) + (7.3 - 4.4) + (5.2 - 4.4) + (5.5 - 4.9) + (8.0 - 5.0) + (6.6 - 5.0);
    let gamma = excess / 6.0;
    let h = |m: usize, r: usize| ((r + 1)..=m).map(|j| 1.0 / j as f64).sum::<f64>() + 1e-4f64.ln();
    let a = (2.0 * h(100, 1) + 4.0 * h(200, 2)) / 6.0;
    let centre = (4.0 + 2.0 * 4.4 + 4.9 + 2.0 * 5.0) / 6.0;
    assert!((v["gamma_hat"].as_f64().unwrap() - gamma).abs() < 1e-12);
    assert!((v["a_coeff"].as_f64().unwrap() - a).abs() < 1e-12);
    assert!((v["log_xp_hat"].as_f64().unwrap() - (centre - a * gamma)).abs() < 1e-12);
}

#[test]
fn malformed_rank_names_the_row() {
    let out = run(&["estimate", "--input", &fixture("malformed_rank.csv"), "--p", "1e-3"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "input");
    assert!(err["error"]["message"].as_str().unwrap().contains("line 3"));
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_file_is_input_error() {
    let out = run(&["estimate", "--input", "/nonexistent/blocks.csv", "--p", "1e-3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_escalates_non_negative_a() {
    let args = ["estimate", "--input", &fixture("worked.csv"), "--p", "0.5"];
    let out = run(&args);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(run(&strict).status.code(), Some(3));
}

#[test]
fn bad_p_is_domain_error() {
    let out = run(&["estimate", "--input", &fixture("worked.csv"), "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn normal_ci_matches_formula() {
    let p = worked_p();
    let v = json(&run(&[
        "ci",
        "--input",
        &fixture("worked.csv"),
        "--p",
        &p,
        "--method",
        "normal",
    ]));
    let iv = &v["intervals"][0];
    let se = v["estimate"]["se_log_xp"].as_f64().unwrap();
    let point = v["estimate"]["log_xp_hat"].as_f64().unwrap();
    assert!((iv["lower"].as_f64().unwrap() - (point - 1.959964 * se)).abs() < 1e-5 * se.max(1.0));
    assert!((iv["upper"].as_f64().unwrap() - (point + 1.959964 * se)).abs() < 1e-5 * se.max(1.0));
    let half = (iv["upper"].as_f64().unwrap() - iv["lower"].as_f64().unwrap()) / 2.0;
    assert!((half - 2.0789).abs() < 1e-4);
}

#[test]
fn ael_contains_el_on_raw_sample() {
    let v = json(&run(&[
        "ci",
        "--input",
        &fixture("frechet_raw.txt"),
        "--blocks",
        "20",
        "--ranks",
        "2",
        "--p",
        "1e-3",
    ]));
    let find = |name: &str| {
        v["intervals"]
            .as_array()
            .unwrap()
            .iter()
            .find(|i| i["method"] == name)
            .cloned()
            .unwrap()
    };
    let (el, ael) = (find("el"), find("ael"));
    let b = |v: &Value, k: &str| v[k].as_f64().unwrap();
    assert!(b(&ael, "lower") <= b(&el, "lower") + 1e-6);
    assert!(b(&ael, "upper") >= b(&el, "upper") - 1e-6);
    assert!(b(&ael, "lower").is_finite() && b(&ael, "upper").is_finite());
}

#[test]
fn estimate_and_ci_share_the_point() {
    let args = [
        "--input",
        &fixture("frechet_raw.txt"),
        "--blocks",
        "40",
        "--ranks",
        "1",
        "--p",
        "1e-3",
    ];
    let e = json(&run(&[&["estimate"][..], &args].concat()));
    let c = json(&run(&[&["ci"][..], &args].concat()));
    for iv in c["intervals"].as_array().unwrap() {
        assert_eq!(iv["point"], e["log_xp_hat"]);
    }
}

#[test]
fn ci_text_and_csv_modes() {
    let args = [
        "--input",
        &fixture("frechet_raw.txt"),
        "--blocks",
        "20",
        "--ranks",
        "1",
        "--p",
        "1e-3",
    ];
    let out = run(&[&["ci"][..], &args, &["--format", "text"]].concat());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text
        .lines()
        .any(|l| l.starts_with("AELM") && l.contains('(') && l.contains(", ")));
    let out = run(&[&["ci"][..], &args, &["--format", "csv"]].concat());
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("method,level,lower,upper"));
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 11));
}

#[test]
fn alpha_zero_is_domain_error() {
    let out = run(&["ci", "--input", &fixture("worked.csv"), "--p", "1e-3", "--alpha", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_worker_invariant() {
    let cfg = workspace_file("configs/smoke.cfg");
    let mut outputs = Vec::new();
    for w in ["1", "4", "8"] {
        let out = run(&["simulate", "--config", &cfg, "--workers", w, "--format", "csv"]);
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("k = 20 done"));
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("k,m,p,method,coverage,mean_length,mc_se,hull_failures\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--scheme",
        "scheme2",
        "--model",
        "burr:a=1,b=0.5",
        "--replicates",
        "20",
        "--seed",
        "9",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stem = "scheme2_burr_a_1_b_0.5";
    let csv = std::fs::read_to_string(dir.path().join(format!("{stem}.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 1 + 19 * 2);
    let txt = std::fs::read_to_string(dir.path().join(format!("{stem}.txt"))).unwrap();
    assert!(txt.contains("Coverage probability") && txt.contains("AELM"));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), txt);
}

#[test]
fn simulate_rejects_unknown_model() {
    let out = run(&["simulate", "--scheme", "scheme1", "--model", "weibull:a=1"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "scheme = scheme1\nmodel = frechet:a=1\nreplicates = many\n").unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn bundled_configs_parse() {
    for t in 1..=4 {
        let text = std::fs::read_to_string(workspace_file(&format!("configs/table{t}.cfg"))).unwrap();
        let cfgs = blocktail::montecarlo::parse_study_config(&text).unwrap();
        assert_eq!(cfgs.len(), 3);
        assert!(cfgs.iter().all(|c| c.replicates == 5000 && c.k_grid.len() == 19));
        assert_eq!(cfgs[0].lengths, t % 2 == 0);
    }
}

#[test]
fn tables_compares_against_published_values() {
    let out = run(&["tables", "--replicates", "40", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 4 * 19 * 6);
    let row = rows
        .iter()
        .find(|r| r["table"] == 3 && r["model"] == "Frechet(1)" && r["k"] == 10 && r["method"] == "AELM")
        .unwrap();
    assert_eq!(row["published"], 0.9648);
    for r in &rows {
        let diff = r["reproduced"].as_f64().unwrap() - r["published"].as_f64().unwrap();
        assert!((r["diff"].as_f64().unwrap() - diff).abs() < 1e-12);
    }
    let flagged = |r: &Value| {
        let d = r["diff"].as_f64().unwrap().abs();
        if r["quantity"] == "coverage" {
            d > 0.015
        } else {
            d > 0.03 * r["published"].as_f64().unwrap()
        }
    };
    assert!(rows.iter().all(|r| r["flagged"] == flagged(r)));
}
