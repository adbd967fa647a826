//! End-to-end runs of the `spikemei` binary: flags, exit codes, outputs.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_spikemei");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL: &str = r#"
[train]
epochs = 2
snapshot_every = 1
train_set = { samples = 40 }
test_set = { samples = 20 }
[targets]
neurons = [[0, 0], [2, 3]]
"#;

#[test]
fn train_sweep_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();

    let o = run(&["--config", &cfg, "--out", out, "--seed", "4", "train"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(out).join("checkpoints/epoch_2.net").is_file());

    let o = run(&["--config", &cfg, "--out", out, "--seed", "4", "--budget", "50", "--workers", "2", "sweep"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("18 cells: 18 computed"), "{stdout}");

    // Same flags again: nothing left to do.
    let o = run(&["--config", &cfg, "--out", out, "--seed", "4", "--budget", "50", "sweep"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 computed, 18 reused"));

    let o = run(&["--config", &cfg, "--out", out, "report"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for t in ["verdicts.csv", "selectivity.csv", "entropy.csv", "distances.csv", "complexity.csv"] {
        assert!(Path::new(out).join("report").join(t).is_file(), "{t}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(out).join("manifest_sweep.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 4);
    assert_eq!(manifest["config"]["budget"], 50);
    assert_eq!(manifest["status"], "complete");
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["train", "--seed", "minus-one"])), 1);
    // No output directory anywhere.
    assert_eq!(code(&run(&["train"])), 1);
    // Sweep before train: no checkpoints.
    assert_eq!(code(&run(&["--out", out, "sweep"])), 1);
    // Report before sweep.
    assert_eq!(code(&run(&["--out", out, "report"])), 1);
    assert_eq!(code(&run(&["--out", out, "--budget", "0", "sweep"])), 1);
    assert_eq!(code(&run(&["--out", out, "--budget", "20", "sweep"])), 1, "budget below the protes_b batch");
    let bad = write_config(dir.path(), "[train]\nepochs = \"many\"\n");
    assert_eq!(code(&run(&["--config", &bad, "--out", out, "train"])), 1);
    let unknown = write_config(dir.path(), "colour = 3\n");
    assert_eq!(code(&run(&["--config", &unknown, "--out", out, "train"])), 1);
    assert_eq!(code(&run(&["--config", "/no/such/config.toml", "train"])), 1);
    assert_eq!(code(&run(&["gen-test"])), 1);
    assert_eq!(code(&run(&["gen-test", "--", "/no/such/generator"])), 1);
}

#[test]
fn help_and_version_exit_zero() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["train", "sweep", "report", "bench", "gen-test"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn broken_generator_is_a_runtime_failure() {
    // Exits before the handshake.
    let o = run(&["gen-test", "--requests", "3", "--", "true"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_cells_give_partial_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(code(&run(&["--config", &cfg, "--out", out, "train"])), 0);
    // Answers the handshake, then dies on the first decode request.
    let broken = write_config(
        dir.path(),
        &format!(
            "{SMALL}\n[generator]\nkind = \"external\"\ncommand = [\"sh\", \"-c\", 'read l; echo {{\\\"ok\\\":true}}; read l; exit 3']\ntimeout_secs = 5\n"
        ),
    );
    let o = run(&["--config", &broken, "--out", out, "--budget", "50", "sweep"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("18 failed"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(out).join("manifest_sweep.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "partial");

    // Spawn succeeds but the handshake fails: nothing can run at all.
    let dead = write_config(dir.path(), &format!("{SMALL}\n[generator]\nkind = \"external\"\ncommand = [\"true\"]\n"));
    assert_eq!(code(&run(&["--config", &dead, "--out", out, "--budget", "50", "sweep"])), 2);
}

#[test]
fn bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--out", out, "--budget", "100", "bench", "--repeats", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("bench/summary.csv")).unwrap();
    // Ten problems times three presets plus random search.
    assert_eq!(summary.lines().count(), 1 + 10 * 4);
    let runs = std::fs::read_to_string(dir.path().join("bench/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 10 * 4 * 2);
    assert!(runs.lines().skip(1).all(|l| l.ends_with(",100")));
    assert!(dir.path().join("manifest_bench.json").is_file());
}
