//! Preconditioned conjugate gradients for the symmetric positive definite
//! systems arising in each time step.

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Defaults to `10 n` when unset.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_floor: 1e-14, max_iter: None, preconditioner: Preconditioner::Diagonal }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_floor >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerances must be positive (rel_tol = {}, abs_floor = {})",
                self.rel_tol, self.abs_floor
            )));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidArgument("solver max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final true residual `|A x - b|`.
    pub residual: f64,
    pub rhs_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub report: SolveReport,
}

impl Solution {
    /// The iterate, or an error if the residual target was not met.
    pub fn into_converged(self) -> Result<Vec<f64>> {
        if self.report.converged {
            Ok(self.x)
        } else {
            Err(Error::NotConverged {
                iterations: self.report.iterations,
                residual: self.report.residual / self.report.rhs_norm.max(f64::MIN_POSITIVE),
            })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(mat: &SparseOperator, x: &[f64], rhs: &[f64], out: &mut [f64]) {
    mat.mul_vec_into(x, out);
    for (r, b) in out.iter_mut().zip(rhs) {
        *r = b - *r;
    }
}

pub fn solve_spd(mat: &SparseOperator, rhs: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    solve_spd_from(mat, rhs, &vec![0.0; rhs.len()], cfg)
}

/// CG from the initial guess `x0`. Stops once `|A x - b| <= rel_tol |b| + abs_floor`
/// holds for the true (recomputed) residual.
pub fn solve_spd_from(mat: &SparseOperator, rhs: &[f64], x0: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    let n = mat.dim();
    if rhs.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if rhs.len() != n { rhs.len() } else { x0.len() } });
    }
    cfg.validate()?;
    if rhs.iter().chain(x0).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("solver input"));
    }
    let max_iter = cfg.max_iter.unwrap_or(10 * n.max(1));
    let inv_diag: Vec<f64> = match cfg.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Diagonal => mat.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect(),
    };

    let rhs_norm = norm(rhs);
    let target = cfg.rel_tol * rhs_norm + cfg.abs_floor;
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    residual(mat, &x, rhs, &mut r);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm(&r);
    let mut best = (res, x.clone());
    let mut iterations = 0;

    while iterations < max_iter {
        if res <= target {
            // Confirm with the true residual; restart from it if recursion drifted.
            residual(mat, &x, rhs, &mut r);
            res = norm(&r);
            if res <= target {
                break;
            }
            z.iter_mut().zip(&r).zip(&inv_diag).for_each(|((z, r), d)| *z = r * d);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        mat.mul_vec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !pq.is_finite() || !rz.is_finite() {
            return Err(Error::NonFinite("conjugate gradient iteration"));
        }
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = norm(&r);
        iterations += 1;
        if res < best.0 {
            best = (res, x.clone());
        }
    }

    residual(mat, &x, rhs, &mut r);
    let mut true_res = norm(&r);
    let converged = true_res <= target;
    if !converged {
        let mut rb = vec![0.0; n];
        residual(mat, &best.1, rhs, &mut rb);
        let best_res = norm(&rb);
        if best_res < true_res {
            x = best.1;
            true_res = best_res;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("conjugate gradient solution"));
    }
    debug_assert!(!converged || true_res <= target);
    Ok(Solution { x, report: SolveReport { iterations, residual: true_res, rhs_norm, converged } })
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fem::Assembler;
    use crate::geometry::FlowMap;
    use crate::mesh::SurfaceMesh;

    #[test]
    fn identity() {
        let rhs = vec![1.0, -2.0, 3.5];
        let sol = solve_spd(&SparseOperator::identity(3), &rhs, &SolverConfig::default()).unwrap();
        assert_eq!(sol.x, rhs);
        assert!(sol.report.converged);
    }

    #[test]
    fn two_by_two() {
        let a = SparseOperator::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        for pre in [Preconditioner::None, Preconditioner::Diagonal] {
            let cfg = SolverConfig { preconditioner: pre, ..Default::default() };
            let x = solve_spd(&a, &[1.0, 1.0], &cfg).unwrap().into_converged().unwrap();
            assert!((x[0] - 1.0 / 3.0).abs() < 1e-14 && (x[1] - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    fn system() -> SparseOperator {
        let mesh = SurfaceMesh::icosphere(2).unwrap();
        let m = mesh.at_time(&FlowMap::standard_ellipsoid(), 0.2);
        let (mass, stiff) = Assembler::new(&mesh).assemble_mass_stiffness(&m).unwrap();
        mass.combine(1.5 / 0.05, &stiff, 1.0)
    }

    #[test]
    fn bdf_system_residual_and_uniqueness() {
        let a = system();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhs: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x0: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let cfg = SolverConfig::default();
        let s1 = solve_spd(&a, &rhs, &cfg).unwrap();
        let s2 = solve_spd_from(&a, &rhs, &x0, &cfg).unwrap();
        let rn = norm(&rhs);
        for s in [&s1, &s2] {
            assert!(s.report.converged);
            let mut r = vec![0.0; a.dim()];
            residual(&a, &s.x, &rhs, &mut r);
            assert!(norm(&r) <= cfg.rel_tol * rn + cfg.abs_floor);
        }
        // ||x1 - x2|| <= ||A^{-1}|| (||r1|| + ||r2||); lambda_min(A) is bounded below by
        // (delta0 / tau) lambda_min(M), comfortably above 1e-2 here.
        let diff = s1.x.iter().zip(&s2.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let xn = s1.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff <= 10.0 * cfg.rel_tol * xn.max(1.0), "{diff}");
    }

    #[test]
    fn non_convergence_is_flagged() {
        let a = system();
        let rhs = vec![1.0; a.dim()];
        let cfg = SolverConfig { max_iter: Some(1), preconditioner: Preconditioner::None, ..Default::default() };
        let sol = solve_spd(&a, &rhs, &cfg).unwrap();
        assert!(!sol.report.converged);
        assert!(matches!(sol.into_converged(), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn invalid_input() {
        let a = SparseOperator::identity(2);
        assert!(matches!(solve_spd(&a, &[f64::NAN, 1.0], &SolverConfig::default()), Err(Error::NonFinite(_))));
        assert!(matches!(solve_spd(&a, &[1.0], &SolverConfig::default()), Err(Error::DimensionMismatch { .. })));
        let bad = SolverConfig { rel_tol: 0.0, ..Default::default() };
        assert!(solve_spd(&a, &[1.0, 1.0], &bad).is_err());
    }

    #[test]
    fn zero_rhs() {
        let a = system();
        let sol = solve_spd(&a, &vec![0.0; a.dim()], &SolverConfig::default()).unwrap();
        assert_eq!(sol.report.iterations, 0);
        assert!(sol.x.iter().all(|&v| v == 0.0));
    }
}
