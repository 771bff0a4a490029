use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tvspec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvspec"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn tvspec_threads(dir: &Path, threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvspec"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env("TVSPEC_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Simulated series and its raw plane in `dir`.
fn prepare(dir: &Path, model: &str, len: &str) {
    ok(tvspec(dir, &["simulate", "--model", model, "--T", len, "--seed", "3", "--out", "s.csv", "--truth", "truth.csv", "--dt", "2"]));
    ok(tvspec(dir, &["preperiodogram", "--in", "s.csv", "--out", "raw.bin"]));
}

#[test]
fn version_and_help() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(tvspec(dir.path(), &["--version"]));
    assert!(String::from_utf8_lossy(&v.stdout).contains("TVSPEC01"));
    let h = String::from_utf8_lossy(&ok(tvspec(dir.path(), &["--help"])).stdout).to_string();
    for cmd in ["simulate", "preperiodogram", "baseline", "estimate", "evaluate", "kernel", "render", "demo", "TVSPEC_THREADS"] {
        assert!(h.contains(cmd), "{cmd} missing from help");
    }
    let h = String::from_utf8_lossy(&ok(tvspec(dir.path(), &["estimate", "--help"])).stdout).to_string();
    for flag in ["--raw", "--config", "--out", "--history", "--strict"] {
        assert!(h.contains(flag), "{flag} missing from estimate help");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tvspec(dir.path(), &["simulate", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(o.stdout.is_empty());
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d, "tvma2", "64");

    fs::write(d.join("bad.csv"), "value\n1.0\nabc\n").unwrap();
    assert_eq!(tvspec(d, &["preperiodogram", "--in", "bad.csv", "--out", "x.bin"]).status.code(), Some(3));
    assert_eq!(tvspec(d, &["estimate", "--raw", "s.csv", "--out", "r"]).status.code(), Some(3));
    assert_eq!(tvspec(d, &["baseline", "--raw", "raw.bin", "--bt", "2", "--bf", "1", "--out", "b.csv"]).status.code(), Some(2));

    fs::write(d.join("unknown.toml"), "bogus = 1\n").unwrap();
    assert_eq!(tvspec(d, &["estimate", "--raw", "raw.bin", "--config", "unknown.toml", "--out", "r"]).status.code(), Some(2));

    fs::write(d.join("small.toml"), "b_t0 = 0.05\nb_f0 = 0.5\nk_hard = 1\n").unwrap();
    let strict = tvspec(d, &["--strict", "estimate", "--raw", "raw.bin", "--config", "small.toml", "--out", "r"]);
    assert_eq!(strict.status.code(), Some(4));
    assert!(!d.join("r").exists());
    ok(tvspec(d, &["estimate", "--raw", "raw.bin", "--config", "small.toml", "--out", "r"]));

    assert_eq!(tvspec_threads(d, "zero", &["--version"]).status.code(), Some(0));
    assert_eq!(
        tvspec_threads(d, "0", &["baseline", "--raw", "raw.bin", "--bt", "0.2", "--bf", "1", "--out", "b.csv"]).status.code(),
        Some(2)
    );
}

#[test]
fn pipeline_writes_manifests_and_consistent_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d, "tvma2-break", "64");
    ok(tvspec(d, &["preperiodogram", "--in", "s.csv", "--out", "raw.csv", "--format", "csv"]));
    let raw_csv = fs::read_to_string(d.join("raw.csv")).unwrap();
    assert_eq!(raw_csv.lines().next(), Some("tau,j,value"));
    assert_eq!(raw_csv.lines().count(), 1 + 127 * 65);

    ok(tvspec(d, &["baseline", "--raw", "raw.bin", "--bt", "0.2", "--bf", "1.2", "--out", "base.csv", "--dt", "2"]));
    fs::write(d.join("c.toml"), "d_t = 2\nk_hard = 4\n").unwrap();
    ok(tvspec(d, &["estimate", "--raw", "raw.bin", "--config", "c.toml", "--out", "res", "--history"]));
    for f in ["estimate.csv", "diagnostics.jsonl", "config.toml", "history.bin", "manifest.json"] {
        assert!(d.join("res").join(f).exists(), "{f}");
    }
    let diag = fs::read_to_string(d.join("res/diagnostics.jsonl")).unwrap();
    assert!(diag.lines().count() >= 1 && diag.lines().count() <= 4);
    let first: serde_json::Value = serde_json::from_str(diag.lines().next().unwrap()).unwrap();
    assert_eq!(first["k"], 0);

    let man = json(&d.join("res/manifest.json"));
    assert_eq!(man["command"], "estimate");
    assert_eq!(man["config"]["k_hard"], 4);
    assert_eq!(man["inputs"][0]["role"], "raw");
    assert_eq!(man["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(man["iteration_timings"].as_array().unwrap().len(), diag.lines().count());

    ok(tvspec(d, &["kernel", "--result", "res", "--u", "0.5", "--lambda", "1.0", "--out", "k.csv"]));
    let k = fs::read_to_string(d.join("k.csv")).unwrap();
    assert_eq!(k.lines().next(), Some("u,lambda,weight,penalty"));
    assert!(k.lines().count() > 10);

    ok(tvspec(d, &["evaluate", "--est", "res/estimate.csv", "--truth-model", "tvma2-break:t0=26", "--report", "rep.json"]));
    ok(tvspec(d, &["evaluate", "--est", "res/estimate.csv", "--truth", "truth.csv", "--report", "rep2.json"]));
    let (a, b) = (json(&d.join("rep.json")), json(&d.join("rep2.json")));
    assert_eq!(a["mse"], b["mse"]);
    assert_eq!(a["n_points"], 64 * 65);
    assert_eq!(
        tvspec(d, &["evaluate", "--est", "res/estimate.csv", "--truth", "truth.csv", "--truth-model", "tvma2", "--report", "x.json"])
            .status
            .code(),
        Some(2)
    );

    ok(tvspec(d, &["render", "--plane", "res/estimate.csv", "--out", "e.ppm"]));
    let img = fs::read(d.join("e.ppm")).unwrap();
    let header = b"P6\n64 65\n255\n";
    assert_eq!(&img[..header.len()], header);
    assert_eq!(img.len(), header.len() + 64 * 65 * 3);
    let side = json(&d.join("e.ppm.json"));
    assert!(side["min"].as_f64().unwrap() <= side["max"].as_f64().unwrap());

    for f in ["s.csv", "raw.bin", "raw.csv", "base.csv", "k.csv", "rep.json", "e.ppm"] {
        assert!(d.join(format!("{f}.manifest.json")).exists(), "{f}");
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d, "wn-break", "64");
    fs::write(d.join("c.toml"), "d_t = 2\n").unwrap();
    for (threads, out) in [("1", "r1"), ("3", "r3")] {
        ok(tvspec_threads(d, threads, &["estimate", "--raw", "raw.bin", "--config", "c.toml", "--out", out]));
    }
    for f in ["estimate.csv", "diagnostics.jsonl", "config.toml"] {
        assert!(fs::read(d.join("r1").join(f)).unwrap() == fs::read(d.join("r3").join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn manifest_config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d, "tvma2", "64");
    fs::write(d.join("c.toml"), "d_t = 4\nd_f = 2\neta = 0.2\n").unwrap();
    ok(tvspec(d, &["estimate", "--raw", "raw.bin", "--config", "c.toml", "--out", "a"]));
    let man = json(&d.join("a/manifest.json"));
    let echo: toml::Table = serde_json::from_value(man["config"].clone()).unwrap();
    fs::write(d.join("echo.toml"), toml::to_string(&echo).unwrap()).unwrap();
    ok(tvspec(d, &["estimate", "--raw", "raw.bin", "--config", "echo.toml", "--out", "b"]));
    for f in ["estimate.csv", "diagnostics.jsonl", "config.toml"] {
        assert!(fs::read(d.join("a").join(f)).unwrap() == fs::read(d.join("b").join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn demo_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(tvspec(d, &["demo", "--example", "wn-break", "--T", "256", "--seed", "7", "--out", "demo", "--dt", "8", "--df", "4"]));
    let s = json(&d.join("demo/summary.json"));
    for key in ["mse_adaptive", "mse_na_same_window", "mse_na_opt", "break_location"] {
        assert!(s.get(key).is_some(), "{key}");
    }
    assert!(s["mse_adaptive"].as_f64().unwrap() > 0.0);
    assert_eq!(s["break_location"]["true_u"], 0.5625);
    let man = json(&d.join("demo/manifest.json"));
    assert_eq!(man["seed"], 7);
    assert!(man["outputs"].as_array().unwrap().len() >= 10);
}
