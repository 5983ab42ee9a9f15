//! Fixtures shared by the benchmarks.

use evolvs_core::bdf::starting_values;
use evolvs_core::{AmbientField, BdfScheme, FlowMap, NonlinearSource, Nonlinearity, Problem, SurfaceMesh, TimeGrid};

/// Icosphere of the given level together with the oscillating ellipsoid flow.
pub fn ellipsoid(level: u32) -> (SurfaceMesh, FlowMap) {
    (SurfaceMesh::icosphere(level).expect("valid level"), FlowMap::standard_ellipsoid())
}

/// Harmonic map flow with the standard manufactured solution.
pub fn harmonic_problem() -> Problem {
    let exact = AmbientField::standard();
    Problem::manufactured(NonlinearSource::manufactured(Nonlinearity::HarmonicMap, exact), exact)
}

/// Starting values for a BDF scheme of order `k` with step `tau` on `[0, 1]`.
pub fn start(
    disc: &evolvs_core::MovingMesh,
    k: usize,
    tau: f64,
) -> (BdfScheme, TimeGrid, Vec<evolvs_core::NodalField>) {
    let scheme = BdfScheme::new(k).expect("valid order");
    let grid = TimeGrid::new(tau, 1.0).expect("valid grid");
    let values = starting_values(&harmonic_problem(), &scheme, &grid, disc).expect("exact solution available");
    (scheme, grid, values)
}
