use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn abplab(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_abplab"));
    c.args(args);
    match threads {
        Some(t) => c.env("ABPLAB_THREADS", t),
        None => c.env_remove("ABPLAB_THREADS"),
    };
    c.output().unwrap()
}

fn error_of(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn summary_of(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

/// All files except the config echo, which records its own output directory.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "config.toml")
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn abp_on_the_unit_ball_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("abp");
    let o = abplab(
        &[
            "abp",
            "--domain",
            "ball",
            "--h",
            "0.02",
            "--p",
            "inf",
            "--f",
            "const:1",
            "--g",
            "const:0",
            "--out",
            s(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(out.join("reports.json")).unwrap()).unwrap();
    assert!(!reports.is_empty());
    for r in &reports {
        assert_eq!(r["pass"], true);
        for key in ["variant", "lhs", "rhs", "constants", "slack", "caveats"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }
    for f in ["config.toml", "field.csv", "solve.json", "envelope.csv", "reports.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(!out.join(".abplab.lock").exists());
    let csv = fs::read_to_string(out.join("field.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains(','));
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = |out: &Path| {
        vec![
            "abp".to_string(),
            "--domain".into(),
            "annulus".into(),
            "--h".into(),
            "0.0625".into(),
            "--p".into(),
            "3".into(),
            "--f".into(),
            "bump:1,0.8".into(),
            "--g".into(),
            "cone".into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let run = |out: &Path, t: &str| {
        let v = args(out);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        abplab(&refs, Some(t))
    };
    assert_eq!(run(&a, "1").status.code(), Some(0));
    assert_eq!(run(&b, "4").status.code(), Some(0));
    assert_eq!(outputs(&a), outputs(&b));
}

#[test]
fn echoed_config_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = abplab(
        &[
            "holder",
            "--h",
            "0.0625",
            "--p",
            "5",
            "--f",
            "const:0.5",
            "--g",
            "quadratic:1,0,-1,0,0,0",
            "--x",
            "0.2,0.1",
            "--out",
            s(&a),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = a.join("config.toml");
    let o = abplab(&["holder", "--config", s(&echo), "--out", s(&b)], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(outputs(&a), outputs(&b));
    let ea = fs::read_to_string(&echo).unwrap();
    let eb = fs::read_to_string(b.join("config.toml")).unwrap();
    let strip = |t: &str| {
        t.lines()
            .filter(|l| !l.starts_with("out "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&ea), strip(&eb));
    // The echo names its command, so it cannot drive a different one.
    let o = abplab(
        &["solve", "--config", s(&echo), "--out", s(&tmp.path().join("c"))],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["error"], "config");
}

#[test]
fn errors_are_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let o = abplab(&["solve", "--no-such-flag", "1"], None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["error"], "usage");

    let o = abplab(&["launch"], None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["error"], "usage");

    let o = abplab(&["solve", "--h", "0.1x", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    let e = error_of(&o);
    assert_eq!(e["error"], "config");
    assert!(e["message"].as_str().unwrap().contains("h"));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "h = = 0.1\n").unwrap();
    let o = abplab(&["solve", "--config", s(&bad), "--out", s(&out)], None);
    assert_eq!(error_of(&o)["error"], "config");

    fs::write(&bad, "colour = \"blue\"\n").unwrap();
    let o = abplab(&["solve", "--config", s(&bad), "--out", s(&out)], None);
    assert_eq!(error_of(&o)["error"], "config");

    let o = abplab(&["solve", "--p", "1.5", "--out", s(&out)], None);
    assert_eq!(error_of(&o)["error"], "invalid_exponent");

    let o = abplab(&["solve", "--h", "0.1", "--max_iters", "2", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["error"], "not_converged");
    assert!(out.join("solve.json").exists());

    let o = abplab(&["selftest", "--out", s(&out)], Some("zero"));
    assert_eq!(error_of(&o)["error"], "config");
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("busy");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".abplab.lock"), "1\n").unwrap();
    let o = abplab(&["selftest", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_of(&o)["message"].as_str().unwrap().contains("in use"));
    assert!(out.join(".abplab.lock").exists());
}

#[test]
fn selftest_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = abplab(&["selftest", "--out", s(&tmp.path().join("st"))], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(summary_of(&o)["pass"], true);
}

#[test]
fn counterexample_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ce");
    let o = abplab(&["counterexample", "--eps", "0.4,0.2,0.1,0.05", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(0));
    let sum = summary_of(&o);
    let slope = sum["details"]["slope"].as_f64().unwrap();
    assert!(slope < -0.5 && slope > -0.7, "{slope}");
    let failure = fs::read_to_string(out.join("failure.csv")).unwrap();
    assert_eq!(failure.lines().count(), 5);
    let sharp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sharpness.json")).unwrap()).unwrap();
    assert_eq!(sharp["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn sweep_writes_one_row_per_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sw");
    let o = abplab(&["sweep", "--h", "0.125", "--ps", "inf,3,5", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("3,"));
    assert!(rows[2].starts_with("inf,"));
    let o = abplab(&["sweep", "--h", "0.125", "--ps", "3,5", "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manufactured_cusp_solve_via_descriptors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cusp");
    let o = abplab(
        &[
            "solve",
            "--domain",
            "annulus",
            "--h",
            "0.0625",
            "--p",
            "3",
            "--f",
            "op:cusp:2.5,1",
            "--g",
            "cusp:2.5,1",
            "--out",
            s(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let solve: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert_eq!(solve["converged"], true);
}
