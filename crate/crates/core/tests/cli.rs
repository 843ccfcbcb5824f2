use std::fs;
use std::process::{Command, Output};

fn offdecay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offdecay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn without_runtime(mut v: serde_json::Value) -> serde_json::Value {
    v.as_object_mut().unwrap().remove("runtime_ms");
    v
}

#[test]
fn m_epsilon_at_ln2() {
    let out = offdecay(&["m-epsilon", "--eps", "0.6931471805599453"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let m = v["values"][0]["m_epsilon"].as_f64().unwrap();
    assert!((m - 3.0).abs() < 1e-10);
}

#[test]
fn m_epsilon_csv() {
    let out = offdecay(&["m-epsilon", "--format", "csv", "--dim", "2", "--eps", "1,2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epsilon,m_epsilon");
    assert_eq!(lines.len(), 3);
}

#[test]
fn shift_example_passes() {
    let out = offdecay(&["shift-example", "--k", "1", "--radius", "32", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["entrywise_pass"], true);
    assert_eq!(v["generator"]["kind"], "shift_example");
    let rate = v["fit"]["rate"].as_f64().unwrap();
    assert!((rate - 1.0).abs() < 1e-6);
}

#[test]
fn verify_thm44_power_one() {
    let out = offdecay(&["verify-thm44", "--phi", "power:1", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["bound"]["kind"], "thm44");
}

#[test]
fn verify_jaffard_is_deterministic() {
    let a = json(&offdecay(&["verify-jaffard", "--seed", "7"]));
    let b = json(&offdecay(&["verify-jaffard", "--seed", "7"]));
    assert_eq!(without_runtime(a.clone()), without_runtime(b));
    let c = json(&offdecay(&["verify-jaffard", "--seed", "8"]));
    assert_ne!(without_runtime(a), without_runtime(c));
}

#[test]
fn csv_rows_per_entry() {
    let out = offdecay(&["demko", "--radius", "4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,t,distance,abs_inverse_entry,bound_value"));
    assert_eq!(lines.count(), 81);
}

#[test]
fn writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = offdecay(&["subexp", "--radius", "8", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["sub_exponential_decay"], true);
}

#[test]
fn config_file_generator_and_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "[experiment]\njaffard_grid = 8\n\n[generator]\nradius = 6\nkind = \"random_exponential\"\ngamma = 2.0\nseed = 1\ndominance = 3.0\n",
    )
    .unwrap();
    let out = offdecay(&["verify-jaffard", "--config", path.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["generator"]["seed"], 5);
    assert_eq!(v["generator"]["gamma"], 2.0);
    assert_eq!(v["generator"]["radius"], 6);

    let clash = offdecay(&["verify-jaffard", "--config", path.to_str().unwrap(), "--gamma", "1"]);
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn violation_exits_with_two() {
    // a negative slack demands the inverse sit strictly below the bound by more than it can
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("strict.toml");
    fs::write(&path, "[experiment]\nslack = -100.0\n").unwrap();
    let out = offdecay(&["shift-example", "--radius", "4", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["entrywise_pass"], false);
}

#[test]
fn truncation_report() {
    let out = offdecay(&["truncation", "--radii", "4,8,16"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["truncation"].as_array().unwrap().len(), 2);
    let bad = offdecay(&["truncation", "--radii", "8"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn malformed_input_exits_with_one() {
    for args in [
        &["verify-jaffard", "--radius", "x"][..],
        &["no-such-command"][..],
        &["verify-thm44", "--phi", "cubic"][..],
        &["shift-example", "--k", "-1"][..],
        &["verify-jaffard", "--config", "/nonexistent/run.toml"][..],
    ] {
        let out = offdecay(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(offdecay(&["--help"]).status.code(), Some(0));
}
