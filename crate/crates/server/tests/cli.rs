use std::process::{Command, Output};

use serde_json::Value;

fn fairslice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairslice"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Leading JSON document of the output.
fn json_head(o: &Output) -> Value {
    let text = stdout(o);
    let mut de = serde_json::Deserializer::from_str(&text).into_iter::<Value>();
    de.next().unwrap().unwrap()
}

#[test]
fn best_response_on_acc_fixture_is_120() {
    let o = fairslice(&["best-response", "--profile", "2acc"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_head(&o);
    assert_eq!(v["payoff"], 120);
    assert_eq!(v["truthful_payoff"], 60);
}

#[test]
fn best_response_from_a_profile_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(
        &path,
        r#"{"cake_pixels": 600, "agents": [{"weights": [[0, 600, 1]]}, {"weights": [[0, 600, 1]]}]}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let o = fairslice(&["best-response", "--profile", p, "--procedure", "2ACC"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_head(&o)["payoff"], 300);

    let o = fairslice(&["best-response", "--profile", p]);
    assert_eq!(o.status.code(), Some(2));
    let o = fairslice(&["best-response", "--profile", p, "--procedure", "3SC"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        fairslice(&["best-response", "--profile", "nope.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fairslice(&["best-response", "--profile", "2acc", "--procedure", "5XY"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(fairslice(&["verify-lemma", "7"]).status.code(), Some(2));
    assert_eq!(fairslice(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        fairslice(&["audit", "--traces", "/no/such/dir"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fairslice(&["simulate", "--alpha", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        fairslice(&["plan", "--s", "10", "--t", "5"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_lemma_4_passes_with_envious_report() {
    let o = fairslice(&["verify-lemma", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = json_head(&o);
    assert_eq!(v["pass"], true);
    assert_eq!(v["check"]["truthful_payoff"], 4000);
    assert!(v["check"]["envious_deviation"]["payoff"].as_u64().unwrap() > 4000);
    assert!(stdout(&o).contains("lemma 4: pass"));
}

#[test]
fn verify_lemma_3_reports_each_procedure() {
    let o = fairslice(&["verify-lemma", "3"]);
    let v = json_head(&o);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 8);
    let all_pass = checks.iter().all(|c| c["pass"] == true);
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 1 }));
    for c in checks {
        let line = format!("{}: gap", c["procedure"].as_str().unwrap());
        assert!(stdout(&o).contains(&line));
    }
}

fn envy_rates(csv: &str, tolerance: &str) -> Vec<(String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[1] == "all" && f[2] == "envy_rate" && f[3] == tolerance)
        .map(|f| (f[0].to_string(), f[4].parse().unwrap()))
        .collect()
}

#[test]
fn simulate_then_audit_with_growing_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let t = traces.to_str().unwrap();
    let args = [
        "simulate",
        "--alpha",
        "0.25",
        "--repetitions",
        "12",
        "--rounds",
        "2",
        "--seed",
        "3",
        "--procedures",
        "2ACC,3SC,3LD",
    ];
    let o = fairslice(&[&args[..], &["--traces", t]].concat());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let simulated = stdout(&o);
    assert!(simulated.starts_with("procedure,round,metric,tolerance,value\n"));
    assert_eq!(stdout(&fairslice(&args)), simulated);

    let audited = fairslice(&["audit", "--traces", t]);
    assert_eq!(audited.status.code(), Some(0));
    assert_eq!(stdout(&audited), simulated);

    let five = stdout(&fairslice(&["audit", "--traces", t, "--tolerance", "5"]));
    let ten = stdout(&fairslice(&["audit", "--traces", t, "--tolerance", "10"]));
    let (five, ten) = (envy_rates(&five, "5"), envy_rates(&ten, "10"));
    assert_eq!(five.len(), 3);
    for ((p5, e5), (p10, e10)) in five.iter().zip(&ten) {
        assert_eq!(p5, p10);
        assert!(e10 <= e5, "{p5}: {e10} > {e5}");
    }
}

#[test]
fn plan_prints_a_cut_and_exact_value() {
    let o = fairslice(&[
        "plan",
        "--profile",
        "2acc",
        "--rounds",
        "1",
        "--s",
        "430",
        "--t",
        "600",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_head(&o);
    let cut = v["cut"].as_u64().unwrap();
    assert!((430..=600).contains(&cut));
    let frac = v["expected_total"].as_str().unwrap();
    let (n, d) = frac.split_once('/').unwrap();
    let value = n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap();
    assert!((value - v["expected_total_value"].as_f64().unwrap()).abs() < 1e-9);
}
