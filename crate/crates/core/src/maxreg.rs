//! Boundedness probe for the discrete maximal regularity estimate of the
//! linear scheme.
//!
//! For a forcing `F^n` and zero starting values the scheme is run with load
//! `M(t_n) F^n`, and
//!
//! ```text
//! R(tau) = (|(U^n - U^{n-1}) / tau|_{l^p(L^q)} + |M^{-1} A U^n|_{l^p(L^q)}) / |F^n|_{l^p(L^q)}
//! ```
//!
//! is recorded. The second term is the discrete elliptic norm standing in for
//! `W^{2,q}`, which P1 functions do not have.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bdf::{BdfScheme, Stepper, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::{MovingMesh, NodalField};
use crate::geometry::FlowMap;
use crate::linsolve::{solve_spd, SolverConfig};
use crate::mesh::SurfaceMesh;
use crate::norms::{lp_in_time, lq_norm};

/// Random forcing, piecewise constant on the intervals of the coarsest grid
/// so that every refinement sees the same function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxRegProbe {
    pub p: f64,
    pub q: f64,
    /// Step sizes, each an integer fraction of the first (coarsest) one.
    pub taus: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for MaxRegProbe {
    fn default() -> Self {
        Self { p: 2.0, q: 2.0, taus: vec![0.1, 0.05, 0.025, 0.0125], horizon: 1.0, seed: 0, amplitude: 1.0 }
    }
}

/// `R(tau)`, or `None` when the forcing vanishes and the ratio is 0/0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxRegSample {
    pub tau: f64,
    pub ratio: Option<f64>,
    pub dq_norm: f64,
    pub elliptic_norm: f64,
    pub forcing_norm: f64,
}

impl MaxRegSample {
    pub fn is_vacuous(&self) -> bool {
        self.ratio.is_none()
    }
}

impl MaxRegProbe {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.q >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "norm exponents must be >= 1 (p = {}, q = {})",
                self.p, self.q
            )));
        }
        if self.taus.is_empty() {
            return Err(Error::InvalidArgument("maxreg needs at least one step size".into()));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::NonFinite("forcing amplitude"));
        }
        let coarse = self.taus[0];
        for &tau in &self.taus {
            let ratio = coarse / tau;
            if !(tau > 0.0) || ratio < 1.0 - 1e-12 || (ratio - ratio.round()).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "step size {tau} does not divide the coarsest step {coarse}"
                )));
            }
        }
        Ok(())
    }

    /// Nodal forcing on each interval of the coarsest grid.
    pub fn forcing_pieces(&self, nodes: usize) -> Result<Vec<Vec<f64>>> {
        let grid = TimeGrid::new(self.taus[0], self.horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..grid.steps)
            .map(|_| (0..nodes).map(|_| self.amplitude * rng.random_range(-1.0..1.0)).collect())
            .collect())
    }

    /// Index of the coarse interval `(t_{j}, t_{j+1}]` containing fine step `n >= 1`.
    fn piece(&self, tau: f64, n: usize) -> usize {
        let refine = (self.taus[0] / tau).round() as usize;
        (n - 1) / refine
    }
}

fn sample(
    probe: &MaxRegProbe,
    pieces: &[Vec<f64>],
    mesh: &SurfaceMesh,
    flow: &FlowMap,
    scheme: &BdfScheme,
    solver: &SolverConfig,
    tau: f64,
) -> Result<MaxRegSample> {
    let disc = MovingMesh::new(mesh, *flow);
    let grid = TimeGrid::new(tau, probe.horizon)?;
    let n_nodes = mesh.node_count();
    let start: Vec<NodalField> = (0..scheme.k).map(|i| NodalField::zeros(n_nodes, i)).collect();
    let mut stepper = Stepper::new(&disc, scheme.clone(), grid, *solver, start)?;

    let mut forcing = Vec::with_capacity(grid.steps);
    let mut dq = Vec::with_capacity(grid.steps);
    let mut elliptic = Vec::with_capacity(grid.steps);
    // Starting values are zero, so their quotients and elliptic norms vanish;
    // only the forcing contributes for n < k.
    let mut prev = vec![0.0; n_nodes];
    for n in 1..=grid.steps {
        let t = grid.time(n);
        let f = &pieces[probe.piece(tau, n)];
        let at_t = mesh.at_time(flow, t);
        forcing.push(lq_norm(&at_t, f, probe.q)?);
        if n < scheme.k {
            dq.push(0.0);
            elliptic.push(0.0);
            continue;
        }
        let u = stepper.step_with(|ctx| Ok(ctx.mass.mul_vec(f)))?;
        let (mass, stiffness) = stepper.last_operators().expect("operators of the completed step");
        let quotient: Vec<f64> = u.values.iter().zip(&prev).map(|(a, b)| (a - b) / tau).collect();
        dq.push(lq_norm(&at_t, &quotient, probe.q)?);
        let laplacian = solve_spd(mass, &stiffness.mul_vec(&u.values), solver)?.into_converged()?;
        elliptic.push(lq_norm(&at_t, &laplacian, probe.q)?);
        prev = u.values;
    }

    let forcing_norm = lp_in_time(&forcing, tau, probe.p)?;
    let dq_norm = lp_in_time(&dq, tau, probe.p)?;
    let elliptic_norm = lp_in_time(&elliptic, tau, probe.p)?;
    let ratio = (forcing_norm > 0.0).then(|| (dq_norm + elliptic_norm) / forcing_norm);
    Ok(MaxRegSample { tau, ratio, dq_norm, elliptic_norm, forcing_norm })
}

/// `R(tau)` for every step size of the probe, in the probe's order.
pub fn maxreg_ratio(
    probe: &MaxRegProbe,
    mesh: &SurfaceMesh,
    flow: &FlowMap,
    scheme: &BdfScheme,
    solver: &SolverConfig,
) -> Result<Vec<MaxRegSample>> {
    probe.validate()?;
    let pieces = probe.forcing_pieces(mesh.node_count())?;
    probe.taus.par_iter().map(|&tau| sample(probe, &pieces, mesh, flow, scheme, solver, tau)).collect()
}

/// Largest over smallest ratio of a sweep; `None` if any sample is vacuous.
pub fn spread(samples: &[MaxRegSample]) -> Option<f64> {
    let ratios: Option<Vec<f64>> = samples.iter().map(|s| s.ratio).collect();
    let ratios = ratios?;
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    Some(max / min)
}
