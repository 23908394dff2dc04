//! End-to-end checks of the `svi` binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn svi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svi"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("svi_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Trace lines with the wall-clock column stripped.
fn math_columns(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn bench_writes_deterministic_traces() {
    let out_a = tmpdir("bench_a");
    let out_b = tmpdir("bench_b");
    for out in [&out_a, &out_b] {
        let status = svi()
            .args([
                "bench",
                "example1",
                "--n",
                "4",
                "--gamma",
                "0.1",
                "--schedule",
                "linear",
                "--n-factor",
                "2",
                "--cap",
                "12",
                "--seeds",
                "2",
                "--seed",
                "7",
                "--max-iters",
                "40",
                "--out",
            ])
            .arg(out)
            .env("SVI_THREADS", "2")
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in [
        "trace_example1_aseg_seed7.csv",
        "trace_example1_seg_seed7.csv",
        "trace_example1_aseg_seed8.csv",
        "trace_example1_seg_seed8.csv",
        "summary.csv",
    ] {
        assert!(out_a.join(name).exists(), "{name} missing");
    }
    for name in ["trace_example1_aseg_seed7.csv", "trace_example1_seg_seed8.csv"] {
        assert_eq!(
            math_columns(&out_a.join(name)),
            math_columns(&out_b.join(name)),
            "{name} not reproducible"
        );
    }
    let summary = std::fs::read_to_string(out_a.join("summary.csv")).unwrap();
    assert!(summary.starts_with(
        "seed,algo,iters,anderson_steps,backtracks_total,oracle_calls,cpu_seconds,final_empirical_residual,status"
    ));
    let _ = std::fs::remove_dir_all(&out_a);
    let _ = std::fs::remove_dir_all(&out_b);
}

#[test]
fn plot_data_merges_bench_traces() {
    let out = tmpdir("plot");
    let status = svi()
        .args([
            "bench", "example1", "--n", "3", "--cap", "8", "--seeds", "1", "--seed", "3",
            "--max-iters", "10", "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let traces = [
        out.join("trace_example1_aseg_seed3.csv"),
        out.join("trace_example1_seg_seed3.csv"),
    ];
    let plot = out.join("plot.csv");
    let status = svi()
        .arg("plot-data")
        .args(&traces)
        .arg("--out")
        .arg(&plot)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&plot).unwrap();
    assert!(text.starts_with("k,elapsed_seconds,residual,algo,seed\n"));
    assert!(text.lines().any(|l| l.ends_with(",seg,3")));
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn lcp_subcommand_solves_identity_instance() {
    let dir = tmpdir("lcp");
    let file = dir.join("problem.json");
    std::fs::write(&file, r#"{"m": [[1.0, 0.0], [0.0, 1.0]], "q": [-1.0, 2.0]}"#).unwrap();
    let output = svi()
        .args(["lcp", "--algo", "aseg", "--file"])
        .arg(&file)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("status: converged"), "{stdout}");
    assert!(dir.join("trace_lcp_aseg_seed42.csv").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn portfolio_subcommand_emits_metrics() {
    let dir = tmpdir("portfolio");
    let prices = dir.join("prices.csv");
    let mut csv = String::from("X,Y\n");
    let mut a: f64 = 100.0;
    let mut b: f64 = 40.0;
    for i in 0..30 {
        csv.push_str(&format!("{a},{b}\n"));
        a *= 1.0 + 0.01 * ((i % 5) as f64 - 2.0) / 5.0;
        b *= 1.0 + 0.012 * ((i % 7) as f64 - 3.0) / 7.0;
    }
    std::fs::write(&prices, csv).unwrap();
    let status = svi()
        .args(["portfolio", "--freq", "weekly", "--upper", "0.8", "--max-iters", "150", "--prices"])
        .arg(&prices)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["n"], 2);
    assert!(metrics["weights"].as_array().unwrap().len() == 2);
    assert!(dir.join("portfolio_trace.csv").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn bench_rejects_bad_gamma() {
    let out = tmpdir("badgamma");
    let output = svi()
        .args(["bench", "example1", "--gamma", "1.5", "--seeds", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("gamma"), "{stderr}");
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tmpdir("config");
    let cfg = dir.join("bench.json");
    std::fs::write(&cfg, r#"{"n": 3, "max_iters": 5, "seeds": 1, "seed": 11, "cap": 6}"#).unwrap();
    let status = svi()
        .args(["bench", "example1", "--config"])
        .arg(&cfg)
        .args(["--max-iters", "8", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let trace = std::fs::read_to_string(dir.join("trace_example1_aseg_seed11.csv")).unwrap();
    // max_iters flag (8) overrides the file's 5.
    let rows = trace.lines().skip(1).filter(|l| !l.is_empty()).count();
    assert!(rows > 5 && rows <= 8, "rows = {rows}");
    let _ = std::fs::remove_dir_all(&dir);
}
