//! End-to-end checks of the command-line interface.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neumann-pinn"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const TINY_RUN: &str = r#"
[problem]
name = "low_frequency"

[constraint]
strategy = "new_hc"

[embedding]
kind = "hc_cosine"
frequencies = [1.0]

[network]
hidden_layers = [10, 10]

[training]
learning_rate = 1e-3
iterations = 60
n_pde = 96
n_ic = 24
n_bc = 24

[seeds]
weights = 1
collocation = 2
frequencies = 3

[eval]
grid_nx = 32
grid_nt = 9
series_terms = 40
"#;

#[test]
fn run_writes_all_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", TINY_RUN);
    let out = dir.path().join("out");
    let status = bin()
        .args(["run"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for file in ["metrics.csv", "loss_history.csv", "config_echo.toml", "checkpoint.npc"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("problem,strategy,embedding_kind,n_freq,sigma"));
    assert!(metrics.contains("low_frequency,new_hc,hc_cosine,1,"));

    // The checkpoint loads back.
    neumann_pinn::NetworkParams::load(&out.join("checkpoint.npc")).unwrap();

    // The config echo parses back to a valid config.
    let echo = std::fs::read_to_string(out.join("config_echo.toml")).unwrap();
    neumann_pinn::RunConfig::from_toml(&echo).unwrap();
}

#[test]
fn seed_override_changes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", TINY_RUN);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(bin().arg("run").arg(&config).arg("--out").arg(&out_a).status().unwrap().success());
    assert!(bin()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out_b)
        .args(["--seed-override", "weights=99"])
        .status()
        .unwrap()
        .success());
    let a = std::fs::read_to_string(out_a.join("metrics.csv")).unwrap();
    let b = std::fs::read_to_string(out_b.join("metrics.csv")).unwrap();
    assert_ne!(a, b);
    assert!(b.contains(",99,"));
}

#[test]
fn diverged_run_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let body = TINY_RUN.replace("learning_rate = 1e-3", "learning_rate = 1e200");
    let config = write_config(dir.path(), "diverge.toml", &body);
    let status = bin()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = TINY_RUN.replace("iterations = 60", "");
    let config = write_config(dir.path(), "bad.toml", &body);
    let status = bin().arg("run").arg(&config).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn oracle_dumps_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle.csv");
    let status = bin()
        .args(["oracle", "low_frequency", "--nx", "9", "--nt", "4", "--series-terms", "20"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,t,u");
    assert_eq!(lines.len(), 1 + 9 * 4);
    // u(0, 0) = cos(0) = 1.
    assert_eq!(lines[1], "0,0,1");
}

#[test]
fn probe_reports_positive_ms() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "probe.toml", TINY_RUN);
    let output = bin()
        .arg("probe")
        .arg(&config)
        .args(["--warmup", "2", "--iters", "10"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("ms/iteration"), "{text}");
}

#[test]
fn suite_emits_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs");
    std::fs::create_dir(&configs).unwrap();
    write_config(&configs, "a_soft.toml", &TINY_RUN.replace(
        "strategy = \"new_hc\"",
        "strategy = \"soft\"",
    ).replace("kind = \"hc_cosine\"\nfrequencies = [1.0]", "kind = \"identity\""));
    write_config(&configs, "b_new.toml", TINY_RUN);
    let out = dir.path().join("suite");
    let status = bin()
        .arg("suite")
        .arg(&configs)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    // The soft run is the reference: improvement exactly 0.
    assert!(lines[1].ends_with(",0"), "{}", lines[1]);
    assert!(out.join("a_soft/metrics.csv").exists());
    assert!(out.join("b_new/metrics.csv").exists());
}
