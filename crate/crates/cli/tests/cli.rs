use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_alphaduplex"));
    cmd.env_remove("ALPHADUPLEX_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

const SMALL: &str = "n_cells = 2\nratio_grid = 0.005, 0.05\nn_drops = 2\nn_starts = 2\n";

#[test]
fn factors_table_changes_sign_near_alpha_min() {
    let out = run(&["factors"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,c_u,c_b,c_u_sq,c_b_sq"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() >= 30);
    let at = |a: f64| {
        rows.iter()
            .min_by(|x, y| (x[0] - a).abs().total_cmp(&(y[0] - a).abs()))
            .unwrap()
            .clone()
    };
    // C_u is slightly negative at α_min and positive a grid step above it.
    assert!(at(0.275)[1] < 0.0);
    assert!(at(0.3)[1] > 0.0);
    assert!(rows.iter().all(|r| r[2] > 0.0 || r[0] < 0.275));
}

#[test]
fn missing_config_exits_2_and_names_path() {
    let out = run(&["sweep", "--config", "/definitely/not/here.conf"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/definitely/not/here.conf"), "{err}");
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(run(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn bad_config_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(&path, "n_cells = 0\n").unwrap();
    let out = run(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_prints_one_row_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.conf");
    fs::write(&cfg, SMALL).unwrap();
    let alloc = dir.path().join("alloc.csv");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--utility",
        "sum_rate",
        "--out",
        alloc.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(
        fs::read_to_string(&alloc).unwrap().lines().count(),
        1 + 4 * 2
    );
}

#[test]
fn sweep_output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.conf");
    fs::write(&cfg, SMALL).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("out{threads}"));
        let status = bin()
            .env("ALPHADUPLEX_THREADS", threads)
            .args(["sweep", "--config", cfg.to_str().unwrap(), "--seed", "11"])
            .arg("--out")
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((
            fs::read(out_dir.join("sweep.csv")).unwrap(),
            fs::read(out_dir.join("drops.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 4);
}

#[test]
fn hist_writes_normalized_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.conf");
    fs::write(&cfg, SMALL).unwrap();
    let out = run(&[
        "hist",
        "--config",
        cfg.to_str().unwrap(),
        "--utility",
        "sum_log_rate",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut sums = std::collections::BTreeMap::<String, f64>::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        *sums.entry(cols[0].to_string()).or_default() += cols[4].parse::<f64>().unwrap();
    }
    assert_eq!(sums.len(), 2);
    assert!(sums.values().all(|s| (s - 1.0).abs() < 1e-12));
}

#[test]
fn bad_thread_env_is_a_config_error() {
    let out = bin()
        .env("ALPHADUPLEX_THREADS", "zero")
        .args(["factors"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
