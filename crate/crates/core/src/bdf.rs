//! Backward differentiation formulae and the linearly implicit time stepper.
//!
//! Step `n` solves
//!
//! ```text
//! ((delta_0 / tau) M(t_n) + A(t_n)) u^n = f^n - (1 / tau) sum_{j>=1} delta_j M(t_{n-j}) u^{n-j}
//! ```
//!
//! where the load `f^n` is evaluated at the extrapolation
//! `uhat^n = sum_j gamma_j u^{n-1-j}`. Exactly one linear solve per step.

use std::collections::VecDeque;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::fem::{max_abs, NodalField, NonlinearSource, SpatialDiscretization};
use crate::geometry::AmbientField;
use crate::linsolve::{solve_spd_from, SolveReport, SolverConfig};
use crate::sparse::SparseOperator;

pub const MAX_ORDER: usize = 6;

/// `|u^n|_inf > BLOW_UP_FACTOR (1 + |u^0|_inf)` aborts the run.
pub const BLOW_UP_FACTOR: f64 = 1e6;

fn check_order(k: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&k) {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(k))
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i as i64 + 1))
}

/// Coefficients of `sum_{l=1}^k (1/l) (1 - z)^l = sum_j delta_j z^j`.
pub fn bdf_coefficients_exact(k: usize) -> Result<Vec<Rational64>> {
    check_order(k)?;
    let mut delta = vec![Rational64::from_integer(0); k + 1];
    for l in 1..=k {
        for (j, d) in delta.iter_mut().enumerate().take(l + 1) {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            *d += Rational64::new(sign * binomial(l, j), l as i64);
        }
    }
    Ok(delta)
}

/// Coefficients of `(1 - (1 - z)^k) / z = sum_i gamma_i z^i`.
pub fn extrapolation_coefficients_exact(k: usize) -> Result<Vec<Rational64>> {
    check_order(k)?;
    Ok((1..=k)
        .map(|i| {
            let sign = if i % 2 == 1 { 1 } else { -1 };
            Rational64::from_integer(sign * binomial(k, i))
        })
        .collect())
}

fn to_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn bdf_coefficients(k: usize) -> Result<Vec<f64>> {
    Ok(bdf_coefficients_exact(k)?.iter().map(to_f64).collect())
}

pub fn extrapolation_coefficients(k: usize) -> Result<Vec<f64>> {
    Ok(extrapolation_coefficients_exact(k)?.iter().map(to_f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdfScheme {
    pub k: usize,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl BdfScheme {
    pub fn new(k: usize) -> Result<Self> {
        Ok(Self { k, delta: bdf_coefficients(k)?, gamma: extrapolation_coefficients(k)? })
    }
}

/// Uniform grid `t_n = n tau`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub tau: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Largest `N` with `N tau <= horizon` (up to round-off in `horizon / tau`).
    pub fn new(tau: f64, horizon: f64) -> Result<Self> {
        if !(tau > 0.0) || !(horizon >= 0.0) || !tau.is_finite() || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid time grid: tau = {tau}, T = {horizon}")));
        }
        let steps = (horizon / tau * (1.0 + 1e-12)).floor() as usize;
        Ok(Self { tau, steps })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }
}

/// Initial data for a run: an exact solution to interpolate, or (for `k = 1`)
/// the initial coefficients alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub source: NonlinearSource,
    pub exact: Option<AmbientField>,
    pub initial: Option<Vec<f64>>,
}

impl Problem {
    pub fn manufactured(source: NonlinearSource, exact: AmbientField) -> Self {
        Self { source, exact: Some(exact), initial: None }
    }
}

/// Nodal interpolants of the exact solution at `t_0, ..., t_{k-1}`.
pub fn starting_values(
    problem: &Problem,
    scheme: &BdfScheme,
    grid: &TimeGrid,
    disc: &impl SpatialDiscretization,
) -> Result<Vec<NodalField>> {
    match (&problem.exact, &problem.initial) {
        (Some(exact), _) => {
            Ok((0..scheme.k).map(|i| NodalField::new(disc.interpolate(exact, grid.time(i)), i)).collect())
        }
        (None, Some(u0)) if scheme.k == 1 => {
            crate::fem::check_len(disc.node_count(), u0.len())?;
            Ok(vec![NodalField::new(u0.clone(), 0)])
        }
        _ => Err(Error::MissingExactSolution(scheme.k)),
    }
}

/// Data available to a load callback at step `n`.
pub struct StepContext<'a> {
    pub n: usize,
    pub t: f64,
    pub mass: &'a SparseOperator,
    pub stiffness: &'a SparseOperator,
    pub uhat: &'a [f64],
}

struct HistoryEntry {
    field: NodalField,
    /// `M(t_i) u^i`; every entry enters `k` right-hand sides.
    mass_times_field: Vec<f64>,
}

/// Linearly implicit BDF time stepper over a spatial discretization.
pub struct Stepper<'d, D> {
    disc: &'d D,
    scheme: BdfScheme,
    grid: TimeGrid,
    solver: SolverConfig,
    /// Most recent first: `history[j]` holds `u^{n-1-j}`.
    history: VecDeque<HistoryEntry>,
    next: usize,
    guard: f64,
    last_operators: Option<(SparseOperator, SparseOperator)>,
    last_report: Option<SolveReport>,
}

impl<'d, D: SpatialDiscretization> Stepper<'d, D> {
    /// Stepper primed with the starting values `u^0, ..., u^{k-1}`.
    pub fn new(
        disc: &'d D,
        scheme: BdfScheme,
        grid: TimeGrid,
        solver: SolverConfig,
        start: Vec<NodalField>,
    ) -> Result<Self> {
        if start.len() != scheme.k {
            return Err(Error::DimensionMismatch { expected: scheme.k, got: start.len() });
        }
        solver.validate()?;
        let guard = BLOW_UP_FACTOR * (1.0 + start[0].max_abs());
        let mut history = VecDeque::with_capacity(scheme.k);
        for (i, field) in start.into_iter().enumerate() {
            crate::fem::check_len(disc.node_count(), field.len())?;
            let (mass, _) = disc.operators(grid.time(i))?;
            let mass_times_field = mass.mul_vec(&field.values);
            history.push_front(HistoryEntry { field, mass_times_field });
        }
        let next = scheme.k;
        Ok(Self { disc, scheme, grid, solver, history, next, guard, last_operators: None, last_report: None })
    }

    pub fn scheme(&self) -> &BdfScheme {
        &self.scheme
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Index of the step the next call computes.
    pub fn next_index(&self) -> usize {
        self.next
    }

    pub fn is_finished(&self) -> bool {
        self.next > self.grid.steps
    }

    /// Most recent solution.
    pub fn latest(&self) -> &NodalField {
        &self.history[0].field
    }

    /// Mass and stiffness matrices of the last completed step.
    pub fn last_operators(&self) -> Option<&(SparseOperator, SparseOperator)> {
        self.last_operators.as_ref()
    }

    pub fn last_report(&self) -> Option<&SolveReport> {
        self.last_report.as_ref()
    }

    /// `uhat^n = sum_j gamma_j u^{n-1-j}`; transport acts as the identity on coefficients.
    pub fn extrapolate(&self) -> Vec<f64> {
        let mut uhat = vec![0.0; self.disc.node_count()];
        for (g, entry) in self.scheme.gamma.iter().zip(&self.history) {
            for (u, v) in uhat.iter_mut().zip(&entry.field.values) {
                *u += g * v;
            }
        }
        uhat
    }

    /// Advances one step with a load supplied by the caller.
    pub fn step_with(&mut self, load: impl FnOnce(&StepContext) -> Result<Vec<f64>>) -> Result<NodalField> {
        let n = self.next;
        let t = self.grid.time(n);
        let tau = self.grid.tau;
        let (mass, stiffness) = self.disc.operators(t)?;
        let uhat = self.extrapolate();
        let mut rhs = load(&StepContext { n, t, mass: &mass, stiffness: &stiffness, uhat: &uhat })?;
        crate::fem::check_len(self.disc.node_count(), rhs.len())?;
        for (d, entry) in self.scheme.delta[1..].iter().zip(&self.history) {
            for (r, mu) in rhs.iter_mut().zip(&entry.mass_times_field) {
                *r -= d / tau * mu;
            }
        }
        let system = mass.combine(self.scheme.delta[0] / tau, &stiffness, 1.0);
        let solution = solve_spd_from(&system, &rhs, &uhat, &self.solver)?;
        self.last_report = Some(solution.report);
        let values = solution.into_converged()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time step solution"));
        }
        let max_abs = max_abs(&values);
        if max_abs > self.guard {
            return Err(Error::BlowUp { step: n, t, max_abs, limit: self.guard });
        }
        let field = NodalField::new(values, n);
        let mass_times_field = mass.mul_vec(&field.values);
        self.history.pop_back();
        self.history.push_front(HistoryEntry { field: field.clone(), mass_times_field });
        self.last_operators = Some((mass, stiffness));
        self.next += 1;
        Ok(field)
    }

    /// Step with a prescribed load vector at `t_n`.
    pub fn step_linear(&mut self, load: &[f64]) -> Result<NodalField> {
        self.step_with(|_| Ok(load.to_vec()))
    }

    /// Step with the load of `source` at the extrapolated solution.
    pub fn step_nonlinear(&mut self, source: &NonlinearSource) -> Result<NodalField> {
        let disc = self.disc;
        self.step_with(|ctx| disc.load(ctx.t, ctx.uhat, source))
    }
}

/// Runs the scheme to the end of the grid and returns `u^0, ..., u^N`.
pub fn solve(
    problem: &Problem,
    scheme: &BdfScheme,
    grid: &TimeGrid,
    disc: &impl SpatialDiscretization,
    solver: &SolverConfig,
) -> Result<Vec<NodalField>> {
    let start = starting_values(problem, scheme, grid, disc)?;
    let mut trajectory: Vec<NodalField> = start.iter().take(grid.steps + 1).cloned().collect();
    let mut stepper = Stepper::new(disc, scheme.clone(), *grid, *solver, start)?;
    while !stepper.is_finished() {
        trajectory.push(stepper.step_nonlinear(&problem.source)?);
    }
    Ok(trajectory)
}
