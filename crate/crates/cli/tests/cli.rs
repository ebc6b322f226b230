use std::path::Path;
use std::process::{Command, Output};

fn coalsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coalsim"))
        .args(args)
        .env_remove("COALSIM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn rates_row_of_the_uniform_model() {
    let out = coalsim(&["rates", "--a", "1", "--b", "1", "--n-max", "4", "--row", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m,k,log_lambda,lambda");
    let lambdas: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    // (k-2)!(m-k)!/(m-1)!
    let expected = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0];
    for (got, want) in lambdas.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn limit_curve_starts_at_one() {
    let out = coalsim(&["limits", "--a", "0.5", "--b", "0.5", "--curve", "c", "--t-grid", "0:1:3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().nth(1), Some("0.0,1.0"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn exit_codes() {
    // missing model
    assert_eq!(coalsim(&["rates", "--n-max", "4"]).status.code(), Some(2));
    // clap usage error
    assert_eq!(coalsim(&["rates", "--a", "1"]).status.code(), Some(2));
    assert_eq!(coalsim(&["rates", "--a", "-1", "--b", "1", "--n-max", "4"]).status.code(), Some(2));
    assert_eq!(coalsim(&["--threads", "0", "verify", "--quick"]).status.code(), Some(2));
    // c* is singular at 0
    let out = coalsim(&["limits", "--a", "0.5", "--b", "0.5", "--curve", "cstar", "--t-grid", "0:1:3"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("coalsim: "));
    // a = 2 is excluded from the generic formulas
    assert_eq!(coalsim(&["limits", "--a", "2", "--b", "1", "--curve", "c"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope").join("x.csv");
    let out = coalsim(&["--out", missing.to_str().unwrap(), "rates", "--kingman", "--n-max", "3"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn quick_verify_passes() {
    let out = coalsim(&["verify", "--quick"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn trajectory_lists_every_event() {
    let out = coalsim(&["simulate", "--kingman", "--n", "4", "--trajectory"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,count");
    // Kingman merges pairs: 4 -> 3 -> 2 -> 1
    let counts: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(counts, ["4", "3", "2", "1"]);
    // three recorded states, initial one included
    let out = coalsim(&["simulate", "--kingman", "--n", "3", "--trajectory"]);
    assert_eq!(stdout(&out).lines().count(), 4);
}

#[test]
fn empty_experiment_lists_are_usage_errors() {
    let out = coalsim(&["converge", "count", "--a", "0.5", "--b", "0.5", "--n-list", "", "--grid", "0:1:4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = coalsim(&["converge", "count", "--a", "0.5", "--b", "0.5", "--replicates", "0", "--n-list", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut mains = Vec::new();
    let mut sides = Vec::new();
    for threads in ["1", "8"] {
        let path = dir.path().join(format!("spec_{threads}.csv"));
        let out = coalsim(&[
            "--threads", threads, "--seed", "11", "--out", path.to_str().unwrap(),
            "spectrum", "--a", "0.5", "--b", "0.5", "--n", "500", "--replicates", "64", "--grid", "0:0.5:6",
        ]);
        assert_eq!(out.status.code(), Some(0));
        mains.push(read(&path));
        sides.push(read(&path.with_extension("json")));
        let path = dir.path().join(format!("conv_{threads}.json"));
        let out = coalsim(&[
            "--threads", threads, "--out", path.to_str().unwrap(),
            "converge", "count", "--a", "0.5", "--b", "0.5", "--n-list", "50,200", "--replicates", "32", "--grid", "0:2:9",
        ]);
        assert_eq!(out.status.code(), Some(0));
        mains.push(read(&path));
        sides.push(read(&path.with_extension("csv")));
    }
    assert_eq!(mains[0], mains[2]);
    assert_eq!(mains[1], mains[3]);
    assert_eq!(sides[0], sides[2]);
    assert_eq!(sides[1], sides[3]);
}

#[test]
fn env_threads_and_flag_precedence() {
    let run = |env: &str, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_coalsim"));
        if let Some(f) = flag {
            cmd.args(["--threads", f]);
        }
        cmd.args(["simulate", "--a", "0.5", "--b", "0.5", "--n", "300", "--replicates", "40"])
            .env("COALSIM_THREADS", env)
            .output()
            .unwrap()
    };
    let zero = run("0", None);
    assert_eq!(zero.status.code(), Some(2));
    let flagged = run("0", Some("3"));
    assert_eq!(flagged.status.code(), Some(0));
    assert_eq!(stdout(&run("2", None)), stdout(&flagged));
}

#[test]
fn config_dump_and_run_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let args = ["--seed", "5", "simulate", "--a", "0.3", "--b", "2", "--n", "200", "--replicates", "16"];
    let mut dump = vec!["--dump-config", "--out", cfg.to_str().unwrap()];
    dump.extend(args);
    assert_eq!(coalsim(&dump).status.code(), Some(0));
    let text = read(&cfg);
    let direct = stdout(&coalsim(&args));
    let replay = coalsim(&["run", cfg.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0));
    assert_eq!(stdout(&replay), direct);
    let again = dir.path().join("again.json");
    coalsim(&["--dump-config", "--out", again.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(read(&again), text);
}

#[test]
fn run_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"seed":1,"tau_const":1.0,"format":"csv","threads":2,"run":{"command":"verify","quick":true,"statistical":false}}"#).unwrap();
    assert_eq!(coalsim(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
}
