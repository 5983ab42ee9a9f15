//! Discrete error functionals and estimated orders of convergence.
//!
//! Errors are always taken against the nodal interpolant of the exact
//! solution, so the geometric part of the spatial error does not enter.

use std::fmt::Write as _;

use crate::bdf::TimeGrid;
use crate::error::{Error, Result};
use crate::fem::{check_len, ElementGeometry, NodalField};
use crate::geometry::{AmbientField, FlowMap};
use crate::mesh::{MeshAtTime, SurfaceMesh};
use crate::quadrature::TriangleRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Values,
    Gradient,
    DifferenceQuotient,
}

/// Exponents of a discrete `L^p(0, T; L^q)` norm; `f64::INFINITY` is allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub p: f64,
    pub q: f64,
    pub kind: NormKind,
}

impl NormSpec {
    pub fn new(p: f64, q: f64, kind: NormKind) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) {
            return Err(Error::InvalidArgument(format!("norm exponents must be >= 1 (p = {p}, q = {q})")));
        }
        Ok(Self { p, q, kind })
    }

    /// Whether `2/p + m/q < 1` holds for two-dimensional surfaces.
    pub fn in_embedding_regime(&self) -> bool {
        2.0 / self.p + 2.0 / self.q < 1.0
    }
}

/// `max_K (max_{vertices} |e| + |grad e|_K)` with `e = u_h - I_h u`.
pub fn broken_w1inf_error(m: &MeshAtTime, u_h: &[f64], exact: &AmbientField) -> Result<f64> {
    let e: Vec<f64> = u_h.iter().zip(&m.positions).map(|(u, x)| u - exact.value(x, m.t)).collect();
    broken_w1inf_norm(m, &e)
}

/// Broken `W^{1,inf}` norm of a P1 function.
pub fn broken_w1inf_norm(m: &MeshAtTime, e: &[f64]) -> Result<f64> {
    check_len(m.mesh.node_count(), e.len())?;
    let mut worst: f64 = 0.0;
    for (k, tri) in m.mesh.triangles.iter().enumerate() {
        let geo = ElementGeometry::new(&m.vertices(k), k)?;
        let local = tri.map(|i| e[i]);
        let value = local.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        worst = worst.max(value + geo.gradient(local).norm());
    }
    Ok(worst)
}

/// `L^q` norm of a P1 function on the mesh at time `m.t`. For `q = inf` the
/// maximum is attained at a vertex; otherwise the degree-4 rule is used.
pub fn lq_norm(m: &MeshAtTime, e: &[f64], q: f64) -> Result<f64> {
    check_len(m.mesh.node_count(), e.len())?;
    if q.is_infinite() {
        return Ok(e.iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    let rule = TriangleRule::degree4();
    let mut sum = 0.0;
    for (k, tri) in m.mesh.triangles.iter().enumerate() {
        let geo = ElementGeometry::new(&m.vertices(k), k)?;
        let local = tri.map(|i| e[i]);
        let integral: f64 = rule
            .points
            .iter()
            .map(|(l, w)| w * (l[0] * local[0] + l[1] * local[1] + l[2] * local[2]).abs().powf(q))
            .sum();
        sum += geo.area * integral;
    }
    Ok(sum.powf(1.0 / q))
}

/// `(tau sum_{n=1}^N a_n^p)^{1/p}` for per-step space norms `a_1, ..., a_N`;
/// `p = inf` gives the maximum.
pub fn lp_in_time(space_norms: &[f64], tau: f64, p: f64) -> Result<f64> {
    if space_norms.is_empty() {
        return Err(Error::InvalidArgument("empty error trajectory".into()));
    }
    if p.is_infinite() {
        return Ok(space_norms.iter().fold(0.0, |a, v| a.max(*v)));
    }
    Ok((tau * space_norms.iter().map(|a| a.powf(p)).sum::<f64>()).powf(1.0 / p))
}

/// `(e^n - e^{n-1}) / tau` for `n = 1..=N`. Transport is the identity on
/// coefficients, so this is a plain coefficient difference.
pub fn difference_quotients(errors: &[NodalField], grid: &TimeGrid) -> Vec<NodalField> {
    errors
        .windows(2)
        .map(|w| {
            let values = w[1].values.iter().zip(&w[0].values).map(|(a, b)| (a - b) / grid.tau).collect();
            NodalField::new(values, w[1].step)
        })
        .collect()
}

/// Discrete `L^p(L^q)` norm of an error trajectory `e^0, ..., e^N`, measured
/// on `Gamma_h(t_n)`. The sum runs over `n >= 1` (values) or over the
/// difference quotients (which start at `n = 1`).
pub fn discrete_lplq(
    mesh: &SurfaceMesh,
    flow: &FlowMap,
    errors: &[NodalField],
    grid: &TimeGrid,
    spec: &NormSpec,
) -> Result<f64> {
    if errors.len() < 2 {
        return Err(Error::InvalidArgument("error trajectory needs at least two time levels".into()));
    }
    let fields = match spec.kind {
        NormKind::DifferenceQuotient => difference_quotients(errors, grid),
        _ => errors[1..].to_vec(),
    };
    let norms: Vec<f64> = fields
        .iter()
        .map(|f| {
            let m = mesh.at_time(flow, grid.time(f.step));
            match spec.kind {
                NormKind::Gradient => broken_w1inf_norm(&m, &f.values),
                _ => lq_norm(&m, &f.values, spec.q),
            }
        })
        .collect::<Result<_>>()?;
    lp_in_time(&norms, grid.tau, spec.p)
}

/// `e^n = u_h^n - I_h u(t_n)` for every level of a trajectory.
pub fn error_trajectory(
    mesh: &SurfaceMesh,
    flow: &FlowMap,
    trajectory: &[NodalField],
    exact: &AmbientField,
    grid: &TimeGrid,
) -> Vec<NodalField> {
    trajectory
        .iter()
        .map(|u| {
            let t = grid.time(u.step);
            let m = mesh.at_time(flow, t);
            let values = u.values.iter().zip(&m.positions).map(|(v, x)| v - exact.value(x, t)).collect();
            NodalField::new(values, u.step)
        })
        .collect()
}

/// Error measures of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunErrors {
    /// `max_i |e_i^N|` at the final time.
    pub max_nodal_final: f64,
    /// `max_n max_i |e_i^n|`.
    pub max_nodal: f64,
    /// `max_n` of the broken `W^{1,inf}` error.
    pub w1inf: f64,
    /// Discrete `L^p(L^q)` norm of the values.
    pub lplq: f64,
    /// Discrete `L^p(L^q)` norm of the difference quotients.
    pub dq: f64,
}

pub fn measure_errors(
    mesh: &SurfaceMesh,
    flow: &FlowMap,
    trajectory: &[NodalField],
    exact: &AmbientField,
    grid: &TimeGrid,
    p: f64,
    q: f64,
) -> Result<RunErrors> {
    let errors = error_trajectory(mesh, flow, trajectory, exact, grid);
    let mut w1inf: f64 = 0.0;
    let mut max_nodal: f64 = 0.0;
    for e in &errors {
        let m = mesh.at_time(flow, grid.time(e.step));
        w1inf = w1inf.max(broken_w1inf_norm(&m, &e.values)?);
        max_nodal = max_nodal.max(e.max_abs());
    }
    let last = errors.last().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    Ok(RunErrors {
        max_nodal_final: last.max_abs(),
        max_nodal,
        w1inf,
        lplq: discrete_lplq(mesh, flow, &errors, grid, &NormSpec::new(p, q, NormKind::Values)?)?,
        dq: discrete_lplq(mesh, flow, &errors, grid, &NormSpec::new(p, q, NormKind::DifferenceQuotient)?)?,
    })
}

/// `log(e_i / e_{i+1}) / log(tau_i / tau_{i+1})`; `None` where an entry is
/// zero or not finite.
pub fn estimated_order_for_steps(errs: &[f64], taus: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(errs.len(), taus.len());
    errs.windows(2)
        .zip(taus.windows(2))
        .map(|(e, t)| {
            let ok = e.iter().all(|v| v.is_finite() && *v > 0.0);
            ok.then(|| (e[0] / e[1]).ln() / (t[0] / t[1]).ln())
        })
        .collect()
}

/// EOCs under step halving: `log2(e_i / e_{i+1})`.
pub fn estimated_order(errs: &[f64]) -> Vec<Option<f64>> {
    errs.windows(2).map(|e| e.iter().all(|v| v.is_finite() && *v > 0.0).then(|| (e[0] / e[1]).log2())).collect()
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub tau: f64,
    pub mesh_level: String,
    /// `None` marks a failed run.
    pub errors: Option<RunErrors>,
    pub eoc_w1inf: Option<f64>,
    pub eoc_lplq: Option<f64>,
    pub eoc_dq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

pub const CSV_HEADER: &str = "tau,mesh_level,err_w1inf,err_lplq,err_dq,eoc_w1inf,eoc_lplq,eoc_dq";

impl ErrorReport {
    /// Builds rows grouped by mesh level, in order of decreasing `tau`, and
    /// fills EOCs between consecutive successful rows of the same level.
    pub fn from_runs(mut runs: Vec<(String, f64, Option<RunErrors>)>) -> Self {
        // Stable sort keeps the caller's level order.
        runs.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut levels: Vec<String> = Vec::new();
        for (level, ..) in &runs {
            if !levels.contains(level) {
                levels.push(level.clone());
            }
        }
        let mut rows = Vec::new();
        for level in levels {
            let group: Vec<_> = runs.iter().filter(|r| r.0 == level).collect();
            for (i, (_, tau, errors)) in group.iter().enumerate() {
                let prev = i.checked_sub(1).map(|j| group[j]);
                let eoc = |f: fn(&RunErrors) -> f64| -> Option<f64> {
                    let (_, tau0, Some(e0)) = prev? else { return None };
                    let e1 = errors.as_ref()?;
                    estimated_order_for_steps(&[f(e0), f(e1)], &[*tau0, *tau])[0]
                };
                rows.push(ErrorRow {
                    tau: *tau,
                    mesh_level: level.clone(),
                    errors: *errors,
                    eoc_w1inf: eoc(|e| e.w1inf),
                    eoc_lplq: eoc(|e| e.lplq),
                    eoc_dq: eoc(|e| e.dq),
                });
            }
        }
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        let mut s = String::new();
        writeln!(s, "{CSV_HEADER}").unwrap();
        for r in &self.rows {
            let errs = match &r.errors {
                Some(e) => format!("{:.6e},{:.6e},{:.6e}", e.w1inf, e.lplq, e.dq),
                None => "failed,failed,failed".to_string(),
            };
            writeln!(
                s,
                "{:.6e},{},{},{},{},{}",
                r.tau,
                r.mesh_level,
                errs,
                fmt(r.eoc_w1inf),
                fmt(r.eoc_lplq),
                fmt(r.eoc_dq)
            )
            .unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SurfaceMesh, FlowMap) {
        (SurfaceMesh::icosphere(2).unwrap(), FlowMap::standard_ellipsoid())
    }

    #[test]
    fn broken_w1inf_examples() {
        let (mesh, flow) = setup();
        let u = AmbientField::standard();
        let m = mesh.at_time(&flow, 0.3);
        let interp = m.interpolate(|x| u.value(x, 0.3));
        assert_eq!(broken_w1inf_error(&m, &interp, &u).unwrap(), 0.0);
        let shifted: Vec<f64> = interp.iter().map(|v| v + 0.25).collect();
        assert!((broken_w1inf_error(&m, &shifted, &u).unwrap() - 0.25).abs() < 1e-14);

        let eps = 1e-3;
        let node = 17;
        let mut bumped = interp.clone();
        bumped[node] += eps;
        let err = broken_w1inf_error(&m, &bumped, &u).unwrap();
        // On a triangle containing the node, |grad phi_node| = 1 / (height over the opposite edge).
        let (k, tri) = mesh.triangles.iter().enumerate().find(|(_, t)| t.contains(&node)).unwrap();
        let a = tri.iter().position(|&i| i == node).unwrap();
        let [x0, x1, x2] = m.vertices(k);
        let v = [x0, x1, x2];
        let (p, q) = (v[(a + 1) % 3], v[(a + 2) % 3]);
        let height = 2.0 * ElementGeometry::new(&m.vertices(k), k).unwrap().area / (q - p).norm();
        assert!(err >= eps);
        assert!(err >= eps / height);
    }

    #[test]
    fn w1inf_vanishes_only_at_the_interpolant() {
        let (mesh, flow) = setup();
        let m = mesh.at_time(&flow, 0.0);
        let mut e = vec![0.0; mesh.node_count()];
        assert_eq!(broken_w1inf_norm(&m, &e).unwrap(), 0.0);
        e[5] = 1e-14;
        assert!(broken_w1inf_norm(&m, &e).unwrap() > 0.0);
    }

    #[test]
    fn lq_norms() {
        let (mesh, flow) = setup();
        let m = mesh.at_time(&flow, 0.5);
        let ones = vec![1.0; mesh.node_count()];
        let area = m.area();
        assert!((lq_norm(&m, &ones, 2.0).unwrap() - area.sqrt()).abs() < 1e-13);
        assert!((lq_norm(&m, &ones, 5.0).unwrap() - area.powf(0.2)).abs() < 1e-13);
        assert_eq!(lq_norm(&m, &ones, f64::INFINITY).unwrap(), 1.0);
        // The degree-4 rule is exact for squares of P1 functions.
        let u = m.interpolate(|x| x.x - 2.0 * x.z);
        let mass = crate::fem::Assembler::new(&mesh).assemble_mass(&m).unwrap();
        assert!((lq_norm(&m, &u, 2.0).unwrap().powi(2) - mass.bilinear(&u, &u)).abs() < 1e-12);
    }

    #[test]
    fn time_norms() {
        assert!(lp_in_time(&[], 0.1, 2.0).is_err());
        assert_eq!(lp_in_time(&[0.0; 5], 0.1, 2.0).unwrap(), 0.0);
        let c = 0.3;
        for p in [1.0, 2.0, 5.0] {
            let n = 8;
            let tau = 0.125;
            let v = lp_in_time(&vec![c; n], tau, p).unwrap();
            assert!((v - (n as f64 * tau).powf(1.0 / p) * c).abs() < 1e-15);
        }
        assert_eq!(lp_in_time(&[0.1, 0.7, 0.2], 0.5, f64::INFINITY).unwrap(), 0.7);
    }

    #[test]
    fn sup_dominates_scaled_lp() {
        let norms = [0.3, 0.1, 0.9, 0.4, 0.05];
        let tau = 0.2;
        let sup = lp_in_time(&norms, tau, f64::INFINITY).unwrap();
        for p in [1.0, 2.0, 3.0, 7.0] {
            let n = norms.len() as f64;
            assert!(sup >= (n * tau).powf(-1.0 / p) * lp_in_time(&norms, tau, p).unwrap());
        }
    }

    #[test]
    fn difference_quotient_examples() {
        let grid = TimeGrid::new(0.1, 0.5).unwrap();
        let w = vec![1.0, -2.0, 0.5];
        let constant: Vec<_> = (0..=5).map(|n| NodalField::new(w.clone(), n)).collect();
        assert!(difference_quotients(&constant, &grid).iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
        let linear: Vec<_> =
            (0..=5).map(|n| NodalField::new(w.iter().map(|v| grid.time(n) * v).collect(), n)).collect();
        for f in difference_quotients(&linear, &grid) {
            for (a, b) in f.values.iter().zip(&w) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn norms_are_homogeneous() {
        let (mesh, flow) = setup();
        let grid = TimeGrid::new(0.25, 1.0).unwrap();
        let base: Vec<NodalField> = (0..=grid.steps)
            .map(|n| {
                let m = mesh.at_time(&flow, grid.time(n));
                NodalField::new(m.interpolate(|x| (n as f64 + 1.0) * x.x * x.z + 0.1 * x.y), n)
            })
            .collect();
        for kind in [NormKind::Values, NormKind::DifferenceQuotient, NormKind::Gradient] {
            let spec = NormSpec::new(5.0, 5.0, kind).unwrap();
            let n0 = discrete_lplq(&mesh, &flow, &base, &grid, &spec).unwrap();
            for s in [2.0, 10.0] {
                let scaled: Vec<_> =
                    base.iter().map(|f| NodalField::new(f.values.iter().map(|v| -s * v).collect(), f.step)).collect();
                let ns = discrete_lplq(&mesh, &flow, &scaled, &grid, &spec).unwrap();
                assert!((ns - s * n0).abs() <= 1e-12 * ns);
            }
        }
    }

    #[test]
    fn eoc_examples() {
        assert_eq!(estimated_order(&[0.4, 0.1]), vec![Some(2.0)]);
        let cubic: Vec<f64> = (0..4).map(|i| 3.0 * (0.2 / 2f64.powi(i)).powi(3)).collect();
        for e in estimated_order(&cubic) {
            assert!((e.unwrap() - 3.0).abs() < 1e-12);
        }
        assert_eq!(estimated_order(&[0.5, 0.5]), vec![Some(0.0)]);
        assert_eq!(estimated_order(&[0.5, 0.0, f64::NAN]), vec![None, None]);
    }

    #[test]
    fn report_csv() {
        let e = |x: f64| RunErrors { max_nodal_final: x, max_nodal: x, w1inf: x, lplq: x, dq: x };
        let report = ErrorReport::from_runs(vec![
            ("3".into(), 0.1, Some(e(0.04))),
            ("3".into(), 0.2, Some(e(0.16))),
            ("3".into(), 0.05, None),
        ]);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "2.000000e-1,3,1.600000e-1,1.600000e-1,1.600000e-1,,,");
        assert_eq!(lines[2], "1.000000e-1,3,4.000000e-2,4.000000e-2,4.000000e-2,2.000000e0,2.000000e0,2.000000e0");
        assert_eq!(lines[3], "5.000000e-2,3,failed,failed,failed,,,");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn embedding_regime() {
        assert!(NormSpec::new(5.0, 5.0, NormKind::Values).unwrap().in_embedding_regime());
        assert!(!NormSpec::new(2.0, 2.0, NormKind::Values).unwrap().in_embedding_regime());
        assert!(NormSpec::new(0.5, 2.0, NormKind::Values).is_err());
    }
}
