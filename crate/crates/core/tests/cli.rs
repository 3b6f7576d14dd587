use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gcsim(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gcsim"));
    cmd.args(args).env_remove("GCSIM_OUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("gcsim runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_every_artifact_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(
        tmp.path(),
        "s.json",
        r#"{"name": "split7", "n": 7, "t": 2, "f": 2, "protocol": "consensus",
            "inputs": {"pattern": "split"}, "adversary": "lie-rationing"}"#,
    );
    let out = tmp.path().join("out");
    let o = gcsim(&["run", &scenario, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = out.join("split7");
    for f in ["trace.json", "trace.csv", "report.json", "report.txt"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["passed"], Value::Bool(true));
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["pass"] == Value::Bool(true)));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("result     pass"), "{stdout}");
}

#[test]
fn approx_and_multi_runs_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let approx = write(
        tmp.path(),
        "a.json",
        r#"{"name": "ap", "n": 7, "t": 2, "protocol": "approx",
            "inputs": {"pattern": "spread"}, "epsilon": "auto", "adversary": "random", "seed": 3}"#,
    );
    let multi = write(
        tmp.path(),
        "m.json",
        r#"{"name": "mu", "n": 4, "t": 1, "protocol": "multi", "ell": 3, "delta": 1,
            "offsets": "max-spread", "multi_inputs": "chained"}"#,
    );
    for s in [&approx, &multi] {
        let o = gcsim(&["run", s, "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    }
    let iters = fs::read_to_string(out.join("ap/iterations.csv")).unwrap();
    assert!(iters.lines().count() >= 2);
    let inst = fs::read_to_string(out.join("mu/instances.csv")).unwrap();
    assert_eq!(inst.lines().count(), 1 + 3 * 4, "one row per instance per node:\n{inst}");
}

#[test]
fn malformed_config_exits_two_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for (i, body) in [
        "{ not json",
        r#"{"n": 3, "t": 1, "protocol": "consensus"}"#,
        r#"{"n": 4, "t": 1, "protocol": "consensus", "colour": "red"}"#,
        r#"{"n": 4, "t": 1, "f": 2, "protocol": "consensus"}"#,
    ]
    .iter()
    .enumerate()
    {
        let s = write(tmp.path(), &format!("bad{i}.json"), body);
        let o = gcsim(&["run", &s, "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(2), "case {i}");
    }
    let o = gcsim(&["run", "/nonexistent/x.json", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn exhausted_tick_budget_is_a_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write(
        tmp.path(),
        "s.json",
        r#"{"name": "short", "n": 4, "t": 1, "protocol": "consensus", "max_ticks": 3}"#,
    );
    let out = tmp.path().join("out");
    let o = gcsim(&["run", &s, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.join("short/report.json").is_file());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let s = write(tmp.path(), "s.json", r#"{"name": "env", "n": 4, "t": 1, "protocol": "consensus"}"#);
    let env_out = tmp.path().join("from-env");
    let o = gcsim(&["run", &s], &[("GCSIM_OUT_DIR", &env_out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(env_out.join("env/report.txt").is_file());

    let flag_out = tmp.path().join("from-flag");
    let o = gcsim(&["run", &s, "--out", flag_out.to_str().unwrap()], &[("GCSIM_OUT_DIR", &env_out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_out.join("env/report.txt").is_file());
}

#[test]
fn sweep_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let template = write(
        tmp.path(),
        "t.json",
        r#"{"t": 1, "protocol": "consensus", "inputs": {"pattern": "split"}, "adversary": "random"}"#,
    );
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("out{k}"));
        let o = gcsim(
            &["sweep", &template, "--axis", "n=4,5", "--axis", "seed=1,2,3", "--out", out.to_str().unwrap()],
            &[],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(text.lines().next().unwrap().starts_with("index,axis_n,axis_seed,status"));
}

#[test]
fn sweep_with_no_valid_row_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let template = write(tmp.path(), "t.json", r#"{"t": 1, "protocol": "consensus"}"#);
    let out = tmp.path().join("out");
    let o = gcsim(&["sweep", &template, "--axis", "n=2,3", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = gcsim(&["sweep", &template, "--axis", "n", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_on_a_unary_domain() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = gcsim(
        &["oracle", "--n", "4", "--t", "1", "--domain", "1", "--gradecast", "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(v["consensus"][0]["violations"].as_array().map(Vec::len), Some(0));
    assert_eq!(v["gradecast"]["violations"], Value::from(0));
}

#[test]
fn oracle_rejects_bad_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = gcsim(&["oracle", "--n", "3", "--t", "1", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
}
