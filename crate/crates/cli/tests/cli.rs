//! End-to-end tests of the binary: artifact layout, config precedence,
//! exports, benching and error paths.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_colony-nas"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn csv_rows(path: &Path) -> (String, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().map(str::to_string);
    let header = lines.next().unwrap();
    (header, lines.collect())
}

#[test]
fn run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let stdout = run_ok(&[
        "run", "--seed", "7", "--agents", "4", "--iterations", "6", "--out",
        out.to_str().unwrap(),
    ]);
    let text = String::from_utf8(stdout.stdout).unwrap();
    assert!(text.contains("best_mse="), "stdout: {text}");
    for file in [
        "resolved_config.txt",
        "run_log.csv",
        "run_times.csv",
        "run_log_full.csv",
        "behavior_log.csv",
        "best_genome.json",
        "best_genome.dot",
        "summary.json",
    ] {
        assert!(out.join(file).exists(), "missing artifact {file}");
    }
    let (header, rows) = csv_rows(&out.join("run_log.csv"));
    assert_eq!(
        header,
        "iteration,candidate_hash,fitness,epochs_used,inserted,population_best,space_points"
    );
    assert_eq!(rows.len(), 6);
    let (bheader, brows) = csv_rows(&out.join("behavior_log.csv"));
    assert_eq!(bheader, "iteration,cant_id,explore_rate,sense_radius,r1,r2,event");
    // one row per cant per iteration
    assert_eq!(brows.len(), 6 * 4);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"], 6);
    assert!(summary["best_mse"].as_f64().unwrap().is_finite());
}

#[test]
fn zero_iterations_is_an_error() {
    let out = bin().args(["run", "--iterations", "0"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("iterations"));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "# comment line\niterations=5\nseed=9\nagents=3\n").unwrap();
    let out = tmp.path().join("run");
    run_ok(&[
        "run", "--config", cfg.to_str().unwrap(), "--iterations", "3", "--out",
        out.to_str().unwrap(),
    ]);
    let (_, rows) = csv_rows(&out.join("run_log.csv"));
    assert_eq!(rows.len(), 3, "flag must win over the config file");
    let resolved = fs::read_to_string(out.join("resolved_config.txt")).unwrap();
    assert!(resolved.contains("iterations=3\n"));
    assert!(resolved.contains("seed=9\n"));
    assert!(resolved.contains("agents=3\n"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "iterafions=5\n").unwrap();
    let out = bin().args(["run", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("iterafions"));
}

#[test]
fn export_produces_plot_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    run_ok(&["run", "--seed", "2", "--agents", "3", "--iterations", "5", "--out", run_dir.to_str().unwrap()]);
    run_ok(&["export", "--run", run_dir.to_str().unwrap()]);
    let (cheader, crows) = csv_rows(&run_dir.join("cumulative_time.csv"));
    assert_eq!(cheader, "iteration,cum_gen_time,cum_eval_time");
    assert_eq!(crows.len(), 5);
    // cumulative columns must be nondecreasing
    let mut prev = (0.0f64, 0.0f64);
    for row in &crows {
        let cells: Vec<&str> = row.split(',').collect();
        let cur = (cells[1].parse::<f64>().unwrap(), cells[2].parse::<f64>().unwrap());
        assert!(cur.0 >= prev.0 && cur.1 >= prev.1);
        prev = cur;
    }
    let (fheader, frows) = csv_rows(&run_dir.join("fitness_curve.csv"));
    assert_eq!(fheader, "iteration,fitness,population_best");
    assert_eq!(frows.len(), 5);
}

#[test]
fn multi_worker_run_completes_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    run_ok(&[
        "run", "--seed", "5", "--agents", "3", "--iterations", "12", "--workers", "3",
        "--out", out.to_str().unwrap(),
    ]);
    let (_, rows) = csv_rows(&out.join("run_log.csv"));
    assert_eq!(rows.len(), 12);
}

#[test]
fn csv_dataset_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("series.csv");
    let mut text = String::from("a,b,target\n");
    for t in 0..120 {
        let x = t as f64 * 0.2;
        text.push_str(&format!("{},{},{}\n", x.sin(), x.cos(), (x + 0.2).sin()));
    }
    fs::write(&data, text).unwrap();
    let out = tmp.path().join("run");
    run_ok(&[
        "run", "--data", data.to_str().unwrap(), "--input-cols", "a,b", "--target-col", "target",
        "--train-len", "60", "--test-len", "40", "--agents", "3", "--iterations", "4",
        "--out", out.to_str().unwrap(),
    ]);
    let (_, rows) = csv_rows(&out.join("run_log.csv"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn selftest_passes() {
    let out = run_ok(&["selftest"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn bench_emits_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    run_ok(&[
        "bench", "--agents-list", "2,3", "--iterations", "4", "--epochs", "2",
        "--out", out.to_str().unwrap(),
    ]);
    let (fheader, frows) = csv_rows(&out.join("bench_fitness.csv"));
    assert_eq!(fheader, "agents,mode,runs,avg_best_mse,min_best_mse,max_best_mse");
    assert_eq!(frows.len(), 4, "2 agent counts x 2 modes");
    let (theader, trows) = csv_rows(&out.join("bench_time.csv"));
    assert_eq!(theader, "agents,mode,avg_total_time_s,reduction_pct");
    for row in &trows {
        let cells: Vec<&str> = row.split(',').collect();
        // only bp-free rows carry the time-saved column
        assert_eq!(cells[1] == "bp-free", !cells[3].is_empty(), "row {row}");
    }
}
