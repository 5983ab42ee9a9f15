use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use evolvs_cli::{
    cmd_convergence, cmd_maxreg, cmd_mesh_info, cmd_pullback_check, cmd_run, maxreg_csv, pullback_csv, CliError,
    RunConfig,
};

#[derive(Parser)]
#[command(name = "evolvs", version, about = "BDF time stepping for parabolic problems on evolving surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (INI); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. CSV goes to stdout when omitted (except for `run`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write VTK files for every step of `run`.
    #[arg(long, global = true)]
    vtk: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "EVOLVS_JOBS")]
    jobs: Option<usize>,
    /// Seed for random forcing and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Single simulation on the first mesh level with step tau0.
    Run,
    /// Error table over all mesh levels and step sizes.
    Convergence,
    /// Compare pulled-back and moving-mesh matrices.
    PullbackCheck,
    /// Maximal regularity ratio over the step-size sweep.
    Maxreg,
    /// Node and triangle counts of `icosphere:N` or an OFF file.
    MeshInfo { mesh: String },
}

fn emit(out: Option<&Path>, name: &str, csv: &str) -> Result<(), CliError> {
    match out {
        None => print!("{csv}"),
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
            let path = dir.join(name);
            std::fs::write(&path, csv).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::MeshInfo { mesh } = &cli.command {
        println!("{}", cmd_mesh_info(mesh)?);
        return Ok(());
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if cli.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let out = cli.out.as_deref();
    let started = Instant::now();
    match cli.command {
        Command::Run => {
            let dir = out.unwrap_or(&cfg.output.dir);
            let s = cmd_run(&cfg, dir, cli.vtk || cfg.output.vtk)?;
            eprintln!(
                "icosphere({}) with {} nodes, tau = {}, {} steps in {:.2?}; final max nodal error {:.3e}",
                s.level,
                s.nodes,
                s.tau,
                s.steps,
                started.elapsed(),
                s.final_error
            );
            eprintln!("wrote {} files to {}", s.files.len(), dir.display());
        }
        Command::Convergence => {
            let outcome = cmd_convergence(&cfg, cli.jobs)?;
            for (level, tau, msg) in &outcome.failures {
                eprintln!("level {level}, tau = {tau}: failed: {msg}");
            }
            emit(out, "convergence.csv", &outcome.report.to_csv())?;
        }
        Command::PullbackCheck => emit(out, "pullback.csv", &pullback_csv(&cmd_pullback_check(&cfg)?))?,
        Command::Maxreg => emit(out, "maxreg.csv", &maxreg_csv(&cmd_maxreg(&cfg)?))?,
        Command::MeshInfo { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
