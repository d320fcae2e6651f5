mod common;

use common::*;
use tempfile::tempdir;

#[test]
fn fit_intercept_only_returns_median() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("y.csv");
    std::fs::write(&p, "y\n3\n1\n2\n").unwrap();
    let o = run(&["fit", "--input", p.to_str().unwrap(), "--tau", "0.5", "--penalty", "none"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["result"]["coefficients"][0]["name"], "Intercept");
    assert_eq!(v["result"]["coefficients"][0]["estimate"], 2.0);
    assert_eq!(v["metadata"]["tool"], "wildqr");
    assert_eq!(v["metadata"]["config"]["model"]["tau"], 0.5);
}

#[test]
fn lambda_and_tune_are_exclusive() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("y.csv");
    std::fs::write(&p, "y,a\n1,2\n").unwrap();
    let o = run(&["fit", "--input", p.to_str().unwrap(), "--lambda", "1", "--tune", "bic"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["ci", "--input", p.to_str().unwrap(), "--seed", "1", "--a-n", "0.1", "--a-n-rule", "n13"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_is_required_for_ci_and_simulate() {
    let o = run(&["ci", "--input", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["simulate", "--output", "out"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_csv_is_a_data_error() {
    let dir = tempdir().unwrap();
    let cases = [
        ("missing.csv", "y,a\n1,2\n3,\n", "missing value at line 3, column 'a'"),
        ("text.csv", "y,a\n1,2\n3,abc\n", "non-numeric value 'abc' at line 3"),
        ("ragged.csv", "y,a\n1,2\n3\n", "line 3"),
        ("empty.csv", "y,a\n", "no data rows"),
    ];
    for (name, body, msg) in cases {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        let o = run(&["fit", "--input", p.to_str().unwrap(), "--penalty", "none"]);
        assert_eq!(o.status.code(), Some(3), "{name}");
        assert!(stderr(&o).contains(msg), "{name}: {}", stderr(&o));
    }
    let o = run(&["fit", "--input", dir.path().join("absent.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn collinear_design_is_a_numerical_failure() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("c.csv");
    let mut s = String::from("y,a,b\n");
    for i in 0..12 {
        let a = i as f64 * 0.5;
        s.push_str(&format!("{},{a},{a}\n", (i * 7 % 5) as f64));
    }
    std::fs::write(&p, s).unwrap();
    let o = run(&["fit", "--input", p.to_str().unwrap(), "--penalty", "none"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn alasso_and_lasso_emit_ordered_intervals() {
    let dir = tempdir().unwrap();
    let p = design_csv(dir.path(), 100, 0.5, 11);
    for method in ["alasso", "lasso", "none"] {
        let o = run(&["ci", "--input", p.to_str().unwrap(), "--method", method, "--seed", "5", "--boot", "100"]);
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        let v = json(&o);
        let iv = v["result"]["intervals"].as_array().unwrap();
        assert_eq!(iv.len(), 11);
        for i in iv {
            assert!(i["lower"].as_f64().unwrap() <= i["upper"].as_f64().unwrap());
            assert_eq!(i["level"], 0.95);
        }
        assert_eq!(v["result"]["boot"], 100);
        assert_eq!(v["result"]["failures"], 0);
    }
}

#[test]
fn ci_is_byte_identical_for_a_fixed_seed() {
    let dir = tempdir().unwrap();
    let p = design_csv(dir.path(), 100, 0.5, 12);
    let out = dir.path().join("ci.csv");
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let o = run(&[
            "ci", "--input", p.to_str().unwrap(), "--seed", "9", "--boot", "150", "--format", "csv",
            "--threads", threads, "--output", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        runs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    let text = String::from_utf8(runs.remove(0)).unwrap();
    assert!(text.starts_with("# metadata: "));
    assert!(text.contains("coefficient,estimate,lower,upper,level"));
}

#[test]
fn threads_env_var_is_a_fallback() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("y.csv");
    std::fs::write(&p, "y\n3\n1\n2\n").unwrap();
    let o = bin()
        .env("WILDQR_THREADS", "0")
        .args(["fit", "--input", p.to_str().unwrap(), "--penalty", "none"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .env("WILDQR_THREADS", "2")
        .args(["fit", "--input", p.to_str().unwrap(), "--penalty", "none"])
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn verify_weights_examples() {
    let o = run(&["verify-weights", "--law", "two-point", "--tau", "0.7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["result"]["all_pass"], true);

    let o = run(&["verify-weights", "--law", "feng", "--tau", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1/8 < tau < 7/8"), "{}", stderr(&o));

    let o = run(&["verify-weights", "--law", "g1", "--tau", "0.3", "--law-params", "v1=0.3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("v1"), "{}", stderr(&o));

    let o = run(&["verify-weights", "--law", "g2", "--tau", "0.4", "--law-params", "a=0.1,b=0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["verify-weights", "--law", "g2", "--tau", "0.4", "--law-params", "bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn adaptive_bic_drops_most_zero_slopes() {
    // Four or more of X2, X4, X6, X8, X10 excluded on at least 90% of seeds.
    let dir = tempdir().unwrap();
    let seeds = 20;
    let mut good = 0;
    for seed in 0..seeds {
        let p = design_csv(dir.path(), 100, 0.5, 100 + seed);
        let o = run(&["fit", "--input", p.to_str().unwrap(), "--penalty", "alasso", "--gamma", "1", "--tune", "bic"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let v = json(&o);
        assert_eq!(v["result"]["lambda_rule"], "bic");
        let active: Vec<String> = v["result"]["active_set"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s.as_str().unwrap().to_string())
            .collect();
        let excluded = ["X2", "X4", "X6", "X8", "X10"]
            .iter()
            .filter(|z| !active.iter().any(|a| a == *z))
            .count();
        if excluded >= 4 {
            good += 1;
        }
    }
    assert!(good * 10 >= seeds * 9, "{good}/{seeds}");
}

#[test]
fn simulate_smoke_writes_three_artifacts() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = run(&[
        "simulate", "--reps", "50", "--boot", "100", "--n", "60", "--methods", "new-al,full,oracle", "--seed", "4",
        "--output", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.csv", "report.json", "summary.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for m in report["result"]["methods"].as_array().unwrap() {
        for c in m["coefficients"].as_array().unwrap() {
            if let Some(p) = c["coverage"].as_f64() {
                assert!((0.0..=1.0).contains(&p));
            }
        }
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("Zeros") && summary.contains("Oracle WB"));
    assert_eq!(stdout(&o), summary);
}

#[test]
fn csv_output_for_fit_has_metadata() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("y.csv");
    std::fs::write(&p, "y,a\n1,0\n2,1\n4,2\n3,3\n5,4\n").unwrap();
    let o = run(&["fit", "--input", p.to_str().unwrap(), "--penalty", "lasso", "--lambda", "0.5", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("# metadata: "));
    assert!(s.contains("# lambda_rule: \"fixed\""));
    assert!(s.contains("coefficient,estimate,active"));
}
