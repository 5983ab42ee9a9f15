use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use evolvs_core::bdf::{starting_values, Stepper};
use evolvs_core::maxreg::MaxRegSample;
use evolvs_core::norms::measure_errors;
use evolvs_core::pullback::{check_equivalence, PullbackDiscrepancy};
use evolvs_core::{
    maxreg_ratio, vtk, ErrorReport, MovingMesh, NodalField, RunErrors, SpatialDiscretization, SurfaceMesh, TimeGrid,
};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::CliError;

fn mesh(level: u32) -> Result<SurfaceMesh, CliError> {
    Ok(SurfaceMesh::icosphere(level)?)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, CliError> {
    fs::write(&path, text).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub level: u32,
    pub tau: f64,
    pub steps: usize,
    pub nodes: usize,
    /// `max_i |u_i^N - u(x_i, T)|`.
    pub final_error: f64,
    pub files: Vec<PathBuf>,
}

/// One simulation on the first mesh level with step `tau0`. Writes
/// `final_state.csv` and, if `vtk` is set, `step_NNNNN.vtk` files to `out`.
pub fn cmd_run(cfg: &RunConfig, out: &Path, vtk: bool) -> Result<RunSummary, CliError> {
    let level = cfg.mesh_levels[0];
    let mesh = mesh(level)?;
    let flow = cfg.flow;
    let disc = MovingMesh::new(&mesh, flow);
    let problem = cfg.problem.problem();
    let exact = cfg.problem.exact;
    let scheme = cfg.time.scheme();
    let grid = TimeGrid::new(cfg.time.tau0, cfg.time.horizon)?;
    create_dir(out)?;

    let mut files = Vec::new();
    let mut emit = |u: &NodalField| -> Result<(), CliError> {
        if !vtk || !u.step.is_multiple_of(cfg.output.vtk_every) && u.step != grid.steps {
            return Ok(());
        }
        let t = grid.time(u.step);
        let m = mesh.at_time(&flow, t);
        let ex = disc.interpolate(&exact, t);
        let err: Vec<f64> = u.values.iter().zip(&ex).map(|(a, b)| a - b).collect();
        let text = vtk::to_vtk(&m, &format!("t = {t:.6}"), &[("u", &u.values), ("exact", &ex), ("error", &err)])?;
        files.push(write(out.join(format!("step_{:05}.vtk", u.step)), &text)?);
        Ok(())
    };

    let start = starting_values(&problem, &scheme, &grid, &disc)?;
    for u in start.iter().take(grid.steps + 1) {
        emit(u)?;
    }
    let mut last = start[start.len().min(grid.steps + 1) - 1].clone();
    let mut stepper = Stepper::new(&disc, scheme, grid, cfg.solver, start)?;
    while !stepper.is_finished() {
        last = stepper.step_nonlinear(&problem.source)?;
        emit(&last)?;
    }

    let t = grid.time(last.step);
    let m = mesh.at_time(&flow, t);
    let mut csv = String::from("node,x,y,z,u,exact\n");
    let mut final_error: f64 = 0.0;
    for (i, (x, u)) in m.positions.iter().zip(&last.values).enumerate() {
        let e = exact.value(x, t);
        final_error = final_error.max((u - e).abs());
        writeln!(csv, "{i},{:.16e},{:.16e},{:.16e},{u:.16e},{e:.16e}", x[0], x[1], x[2]).unwrap();
    }
    files.push(write(out.join("final_state.csv"), &csv)?);
    Ok(RunSummary { level, tau: grid.tau, steps: grid.steps, nodes: mesh.node_count(), final_error, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutcome {
    pub report: ErrorReport,
    /// `(mesh level, tau, message)` of every failed cell.
    pub failures: Vec<(String, f64, String)>,
}

fn run_cell(cfg: &RunConfig, mesh: &SurfaceMesh, tau: f64) -> Result<RunErrors, CliError> {
    let disc = MovingMesh::new(mesh, cfg.flow);
    let grid = TimeGrid::new(tau, cfg.time.horizon)?;
    let problem = cfg.problem.problem();
    let traj = evolvs_core::solve(&problem, &cfg.time.scheme(), &grid, &disc, &cfg.solver)?;
    Ok(measure_errors(mesh, &cfg.flow, &traj, &cfg.problem.exact, &grid, cfg.norm_p, cfg.norm_q)?)
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Sweep over mesh levels and step sizes with a caller-supplied cell runner.
pub fn convergence_with<F>(cfg: &RunConfig, jobs: Option<usize>, runner: F) -> Result<ConvergenceOutcome, CliError>
where
    F: Fn(u32, f64) -> Result<RunErrors, CliError> + Sync,
{
    let cells: Vec<(u32, f64)> =
        cfg.mesh_levels.iter().flat_map(|&l| cfg.time.taus().into_iter().map(move |t| (l, t))).collect();
    let results: Vec<_> = pool(jobs)?.install(|| cells.par_iter().map(|&(l, tau)| runner(l, tau)).collect());
    let mut runs = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    for ((level, tau), result) in cells.into_iter().zip(results) {
        let label = level.to_string();
        match result {
            Ok(e) => runs.push((label, tau, Some(e))),
            Err(e) => {
                failures.push((label.clone(), tau, e.to_string()));
                runs.push((label, tau, None));
            }
        }
    }
    Ok(ConvergenceOutcome { report: ErrorReport::from_runs(runs), failures })
}

pub fn cmd_convergence(cfg: &RunConfig, jobs: Option<usize>) -> Result<ConvergenceOutcome, CliError> {
    let meshes: Vec<(u32, SurfaceMesh)> =
        cfg.mesh_levels.iter().map(|&l| Ok((l, mesh(l)?))).collect::<Result<_, CliError>>()?;
    convergence_with(cfg, jobs, |level, tau| {
        let (_, m) = meshes.iter().find(|(l, _)| *l == level).expect("mesh built for every level");
        run_cell(cfg, m, tau)
    })
}

/// Discrepancies at `times` evenly spaced points of `[0, T]` on the first mesh level.
pub fn cmd_pullback_check(cfg: &RunConfig) -> Result<Vec<PullbackDiscrepancy>, CliError> {
    let mesh = mesh(cfg.mesh_levels[0])?;
    let n = cfg.pullback.times.max(1);
    let times: Vec<f64> =
        (0..n).map(|i| if n == 1 { 0.0 } else { cfg.time.horizon * i as f64 / (n - 1) as f64 }).collect();
    Ok(check_equivalence(&mesh, &cfg.flow, &times, cfg.pullback.samples, cfg.seed)?)
}

pub fn pullback_csv(rows: &[PullbackDiscrepancy]) -> String {
    let mut s = String::from("t,mass_rel_diff,stiffness_rel_diff,gradient_rel_diff\n");
    for r in rows {
        writeln!(s, "{:.6e},{:.6e},{:.6e},{:.6e}", r.t, r.mass, r.stiffness, r.gradient).unwrap();
    }
    s
}

/// `R(tau)` over the configured step sizes on the first mesh level.
pub fn cmd_maxreg(cfg: &RunConfig) -> Result<Vec<MaxRegSample>, CliError> {
    let mesh = mesh(cfg.mesh_levels[0])?;
    Ok(maxreg_ratio(&cfg.maxreg, &mesh, &cfg.flow, &cfg.time.scheme(), &cfg.solver)?)
}

pub fn maxreg_csv(samples: &[MaxRegSample]) -> String {
    let mut s = String::from("tau,R\n");
    for r in samples {
        match r.ratio {
            Some(v) => writeln!(s, "{:.6e},{v:.6e}", r.tau),
            None => writeln!(s, "{:.6e},vacuous", r.tau),
        }
        .unwrap();
    }
    s
}

/// Counts and closedness of `icosphere:N` or of an OFF file.
pub fn cmd_mesh_info(spec: &str) -> Result<String, CliError> {
    let mesh = match spec.strip_prefix("icosphere:") {
        Some(level) => {
            let level = level.parse().map_err(|_| CliError::Usage(format!("bad icosphere level in {spec:?}")))?;
            mesh(level)?
        }
        None => {
            let path = Path::new(spec);
            let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
            SurfaceMesh::parse_off_unchecked(&text, path)?
        }
    };
    let closed = match mesh.check_topology() {
        Ok(()) => "yes".to_string(),
        Err(e) => format!("no ({e})"),
    };
    Ok(format!("{} nodes, {} triangles, closed: {closed}", mesh.node_count(), mesh.tri_count()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_info_counts() {
        assert_eq!(cmd_mesh_info("icosphere:2").unwrap(), "162 nodes, 320 triangles, closed: yes");
        assert!(cmd_mesh_info("icosphere:x").is_err());
        assert!(cmd_mesh_info("/nonexistent.off").is_err());
    }

    #[test]
    fn maxreg_csv_format() {
        let s = MaxRegSample { tau: 0.1, ratio: None, dq_norm: 0.0, elliptic_norm: 0.0, forcing_norm: 0.0 };
        assert_eq!(maxreg_csv(&[s]), "tau,R\n1.000000e-1,vacuous\n");
    }
}
