use std::path::PathBuf;
use std::process::Command;

use evolvs_cli::{
    cmd_convergence, cmd_maxreg, cmd_pullback_check, cmd_run, convergence_with, maxreg_csv, CliError, RunConfig,
};
use evolvs_core::RunErrors;

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("evolvs-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn config(text: &str) -> RunConfig {
    RunConfig::parse(text).unwrap()
}

#[test]
fn zero_source_run_writes_zero_state() {
    let cfg =
        config("[problem]\nkind = linear\nexact = zero\nforcing = none\n[mesh]\nlevels = 1\n[time]\ntau0 = 0.25\n");
    let dir = temp_dir("zero");
    let s = cmd_run(&cfg, &dir, true).unwrap();
    assert_eq!(s.steps, 4);
    assert_eq!(s.final_error, 0.0);
    assert_eq!(s.files.len(), 6);
    let csv = std::fs::read_to_string(dir.join("final_state.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[4].parse::<f64>().unwrap(), 0.0);
    }
    assert!(dir.join("step_00004.vtk").exists());
}

#[test]
fn run_is_deterministic() {
    let cfg = config("[mesh]\nlevels = 2\n[time]\ntau0 = 0.1\norder = 3\n");
    let (a, b) = (temp_dir("det-a"), temp_dir("det-b"));
    cmd_run(&cfg, &a, false).unwrap();
    cmd_run(&cfg, &b, false).unwrap();
    let read = |d: &PathBuf| std::fs::read(d.join("final_state.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn sweeps_are_byte_identical_across_worker_counts() {
    let cfg = config("[mesh]\nlevels = 1, 2\n[time]\ntau0 = 0.25\nhalvings = 2\n");
    let one = cmd_convergence(&cfg, Some(1)).unwrap().report.to_csv();
    let four = cmd_convergence(&cfg, Some(4)).unwrap().report.to_csv();
    assert_eq!(one, four);
    let m1 = maxreg_csv(&cmd_maxreg(&cfg.clone().with_seed(7)).unwrap());
    let m2 = maxreg_csv(&cmd_maxreg(&cfg.with_seed(7)).unwrap());
    assert_eq!(m1, m2);
}

#[test]
fn single_step_size_has_no_eoc() {
    let cfg = config("[mesh]\nlevels = 1\n[time]\ntau0 = 0.25\nhalvings = 0\n");
    let report = cmd_convergence(&cfg, None).unwrap().report;
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].eoc_w1inf, None);
    assert!(report.to_csv().lines().nth(1).unwrap().ends_with(",,,"));
}

fn synthetic(tau: f64, k: i32) -> RunErrors {
    let e = 3.0 * tau.powi(k);
    RunErrors { max_nodal_final: e, max_nodal: e, w1inf: e, lplq: e, dq: e }
}

#[test]
fn synthetic_order_k_data_gives_eoc_k() {
    for k in 1..=6 {
        let cfg = config(&format!("[time]\norder = {k}\ntau0 = 0.2\nhalvings = 1\n[mesh]\nlevels = 2\n"));
        let report = convergence_with(&cfg, Some(2), |_, tau| Ok(synthetic(tau, k))).unwrap().report;
        let eoc = report.rows[1].eoc_w1inf.unwrap();
        assert!((eoc - k as f64).abs() < 1e-12, "{eoc}");
    }
}

#[test]
fn failed_cells_are_flagged_and_sweep_continues() {
    let cfg = config("[time]\ntau0 = 0.2\nhalvings = 3\n[mesh]\nlevels = 2\n");
    let outcome = convergence_with(&cfg, None, |_, tau| {
        if tau == 0.05 {
            Err(CliError::Usage("injected".into()))
        } else {
            Ok(synthetic(tau, 2))
        }
    })
    .unwrap();
    assert_eq!(outcome.failures.len(), 1);
    let csv = outcome.report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[3].contains("failed,failed,failed"));
    assert!(lines[4].ends_with(",,,"));
    assert!(outcome.report.rows[1].eoc_w1inf.is_some());
}

#[test]
fn pullback_check_on_stationary_flow() {
    let cfg = config("[surface]\nflow = sphere\n[mesh]\nlevels = 2\n[pullback]\ntimes = 4\nsamples = 20\n");
    for r in cmd_pullback_check(&cfg).unwrap() {
        assert!(r.mass < 1e-14 && r.stiffness < 1e-14 && r.gradient < 1e-14, "{r:?}");
    }
}

#[test]
fn maxreg_with_zero_forcing_is_vacuous() {
    let cfg = config("[maxreg]\namplitude = 0\n[mesh]\nlevels = 1\n[time]\ntau0 = 0.1\nhalvings = 1\n");
    assert_eq!(maxreg_csv(&cmd_maxreg(&cfg).unwrap()), "tau,R\n1.000000e-1,vacuous\n5.000000e-2,vacuous\n");
}

fn evolvs(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_evolvs")).args(args).output().unwrap()
}

#[test]
fn binary_reports_errors_with_exit_code() {
    let dir = temp_dir("bin");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("k7.ini");
    std::fs::write(&cfg, "[time]\norder = 7\n").unwrap();
    let out = evolvs(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("time.order") && err.contains("1..=6"), "{err}");

    let out = evolvs(&["mesh-info", "icosphere:2"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "162 nodes, 320 triangles, closed: yes");

    let open = dir.join("open.off");
    std::fs::write(&open, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
    let out = evolvs(&["mesh-info", open.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("3 nodes, 1 triangles, closed: no"));
}

#[test]
fn binary_output_is_deterministic() {
    let dir = temp_dir("bin-det");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("c.ini");
    std::fs::write(&cfg, "[mesh]\nlevels = 1\n[time]\ntau0 = 0.25\nhalvings = 1\n").unwrap();
    let run = |jobs: &str| evolvs(&["convergence", "--config", cfg.to_str().unwrap(), "--jobs", jobs]).stdout;
    let a = run("1");
    assert!(a.starts_with(b"tau,mesh_level,"));
    assert_eq!(a, run("3"));
    let out = Command::new(env!("CARGO_BIN_EXE_evolvs"))
        .args(["maxreg", "--config", cfg.to_str().unwrap()])
        .env("EVOLVS_JOBS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("tau,R\n"));
}
