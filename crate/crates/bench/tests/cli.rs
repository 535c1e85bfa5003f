//! End-to-end runs of the command-line binary.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdca-admm-bench"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small linearly-separable-ish LIBSVM file: feature 1 tracks the label,
/// features 2 and 3 track each other.
fn write_svm(path: &PathBuf, n: usize) {
    let mut text = String::new();
    for i in 0..n {
        let y = if i % 2 == 0 { 1 } else { -1 };
        let noise = ((i * 37 + 11) % 19) as f64 / 19.0 - 0.5;
        let a = y as f64 + 0.3 * noise;
        let b = 0.7 * noise + 0.1;
        text.push_str(&format!("{} 1:{} 2:{} 3:{}\n", y, a, b, b * 2.0));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn graph_subcommand_with_edge_file() {
    let dir = workdir("cli_graph_file");
    let train = dir.join("train.svm");
    let test = dir.join("test.svm");
    write_svm(&train, 60);
    write_svm(&test, 30);
    fs::write(dir.join("edges.txt"), "# fused pairs\n1 2\n0 1\n").unwrap();
    let out = dir.join("trace.csv");

    let output = bin()
        .args(["graph", "--epochs", "10", "--repeats", "2", "--no-timing"])
        .arg("--train")
        .arg(&train)
        .arg("--test")
        .arg(&test)
        .arg("--edges")
        .arg(dir.join("edges.txt"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "repeat,epoch,wall_seconds,primal_objective,excess_risk,dual_objective,feasibility,test_loss,test_error"
    );
    // 2 repeats x (initial + 10 checkpoints)
    assert_eq!(lines.count(), 22);
    // test columns are populated
    let last = text.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert!(!fields[7].is_empty() && !fields[8].is_empty());
    assert!(fs::read_to_string(dir.join("trace_agg.csv")).is_ok());
}

#[test]
fn graph_subcommand_with_correlation_edges() {
    let dir = workdir("cli_graph_corr");
    let train = dir.join("train.svm");
    write_svm(&train, 80);
    let out = dir.join("trace.csv");

    let output = bin()
        .args([
            "graph",
            "--epochs",
            "5",
            "--repeats",
            "1",
            "--no-timing",
            "--edges",
            "corr:0.8",
        ])
        .arg("--train")
        .arg(&train)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(output.status.success(), "stderr: {}", stderr);
    // features 2 and 3 are exactly proportional, so the correlation graph
    // must pick up that edge
    assert!(stderr.contains("|E|=1"), "stderr: {}", stderr);
    // no test set: the optional columns stay empty
    let text = fs::read_to_string(&out).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.ends_with(",,"), "row: {}", last);
}

#[test]
fn missing_input_fails_with_nonzero_exit() {
    let dir = workdir("cli_missing");
    let output = bin()
        .args(["graph", "--edges", "corr:0.5"])
        .arg("--train")
        .arg(dir.join("does_not_exist.svm"))
        .arg("--out")
        .arg(dir.join("trace.csv"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error"), "stderr: {}", stderr);
}

#[test]
fn bad_correlation_threshold_is_rejected() {
    let dir = workdir("cli_bad_thr");
    let train = dir.join("train.svm");
    write_svm(&train, 10);
    let output = bin()
        .args(["graph", "--edges", "corr:1.5"])
        .arg("--train")
        .arg(&train)
        .arg("--out")
        .arg(dir.join("trace.csv"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("threshold"));
}
