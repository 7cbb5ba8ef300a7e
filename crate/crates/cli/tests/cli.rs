use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn graphnls(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphnls"))
        .args(args)
        .current_dir(dir)
        .env("GRAPHNLS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("interval.txt"), "name interval\nedge e a b 1.0\n").unwrap();
    fs::write(dir.path().join("loop.txt"), "name loop\n# unit circle\nedge e v v 1.0\n").unwrap();
    fs::write(
        dir.path().join("dumbbell.json"),
        r#"{"name": "dumbbell", "edges": [
            {"id": "l1", "a": "x", "b": "x", "length": 1.0},
            {"id": "br", "a": "x", "b": "y", "length": 2.0},
            {"id": "l2", "a": "y", "b": "y", "length": 1.0}]}"#,
    )
    .unwrap();
    dir
}

#[test]
fn analyze_interval_and_loop() {
    let ws = workspace();
    let out = graphnls(&["analyze", "--graph", "interval.txt", "--out", "a"], ws.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&ws.path().join("a"));
    assert_eq!(r["result"]["cycle_covering"], false);
    let mu1 = r["result"]["mu1"].as_f64().unwrap();
    assert!((mu1 / std::f64::consts::FRAC_PI_2 - 1.0).abs() < 5e-3);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(r["mesh"]["nodes"].as_u64().unwrap() > 0);
    assert!(ws.path().join("a/eigenvalues.csv").exists());
    assert!(ws.path().join("a/eigenvector_1.csv").exists());

    let out = graphnls(&["analyze", "--graph", "loop.txt", "--out", "b"], ws.path());
    assert!(out.status.success());
    let r = report(&ws.path().join("b"));
    assert_eq!(r["result"]["cycle_covering"], true);
    let mu1 = r["result"]["mu1"].as_f64().unwrap();
    assert!((mu1 / std::f64::consts::PI - 1.0).abs() < 5e-3);
    let crit = r["result"]["critical_mass"].as_f64().unwrap();
    assert!((crit - std::f64::consts::PI * 3f64.sqrt() / 2.0).abs() < 1e-9);
}

#[test]
fn json_graph_is_accepted() {
    let ws = workspace();
    let out = graphnls(&["analyze", "--graph", "dumbbell.json", "--out", "d"], ws.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&ws.path().join("d"))["result"]["bridges"][0], "br");
}

#[test]
fn malformed_line_is_named() {
    let ws = workspace();
    fs::write(ws.path().join("bad.txt"), "name bad\nedge e1 a b 1.0\nedge e2 b c oops\n").unwrap();
    let out = graphnls(&["analyze", "--graph", "bad.txt", "--out", "x"], ws.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn supercritical_mass_is_refused() {
    let ws = workspace();
    let out = graphnls(&["groundstate", "--graph", "loop.txt", "--p", "6", "--mass", "3.0", "--out", "g"], ws.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("critical mass"));
    let out = graphnls(
        &["evolve", "--graph", "loop.txt", "--p", "6", "--mass", "3.0", "--t-end", "0.1", "--out", "e"],
        ws.path(),
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn small_mass_ground_state_is_constant() {
    let ws = workspace();
    let out = graphnls(&["groundstate", "--graph", "dumbbell.json", "--p", "4", "--mass", "0.01", "--out", "g"], ws.path());
    assert!(out.status.success());
    assert_eq!(report(&ws.path().join("g"))["result"]["is_constant"], true);
    assert!(ws.path().join("g/ground_state.csv").exists());
}

#[test]
fn stability_annotates_beyond_critical() {
    let ws = workspace();
    let out = graphnls(&["stability", "--graph", "loop.txt", "--p", "6", "--mass", "2.8", "--out", "s"], ws.path());
    assert!(out.status.success());
    let r = report(&ws.path().join("s"));
    assert_eq!(r["result"]["verdict"], "stable");
    assert_eq!(r["result"]["stable_beyond_ground_states"], true);
}

#[test]
fn outputs_are_deterministic() {
    let ws = workspace();
    let run = |out: &str, threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_graphnls"))
            .args(["sweep", "--graph", "dumbbell.json", "--p", "4", "--mass-grid", "0.5:6:4", "--seed", "7", "--out", out])
            .current_dir(ws.path())
            .env("GRAPHNLS_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(ws.path().join(out).join("sweep.csv")).unwrap()
    };
    let a = run("r1", "1");
    let b = run("r2", "4");
    assert_eq!(a, b);
    assert_eq!(report(&ws.path().join("r1"))["config_hash"], report(&ws.path().join("r2"))["config_hash"]);

    let evolve = |out: &str| {
        let o = graphnls(
            &["evolve", "--graph", "interval.txt", "--p", "4", "--mass", "2", "--t-end", "1", "--seed", "3", "--out", out],
            ws.path(),
        );
        assert!(o.status.success());
        (fs::read(ws.path().join(out).join("trace.csv")).unwrap(), fs::read(ws.path().join(out).join("final_state.csv")).unwrap())
    };
    assert_eq!(evolve("e1"), evolve("e2"));
}

#[test]
fn bridge_length_sweep() {
    let ws = workspace();
    let out = graphnls(&["sweep", "--graph", "loop.txt", "--ell-grid", "0.01,1,100", "--out", "w"], ws.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(ws.path().join("w/study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(report(&ws.path().join("w"))["result"]["monotone"], true);
}

#[test]
fn bad_grid_is_an_input_error() {
    let ws = workspace();
    let out = graphnls(&["sweep", "--graph", "loop.txt", "--mass-grid", "1:2", "--out", "w"], ws.path());
    assert_eq!(out.status.code(), Some(3));
}
