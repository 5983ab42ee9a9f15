//! Pull-back of the evolving-surface problem to the fixed initial mesh.
//!
//! With the element edges of the initial triangle as chart derivatives, the
//! metric tensor at time `t` is `G(t) = E(t)^T E(t)` and the coefficient
//! fields become per-element matrices:
//!
//! * area factor `a_K = sqrt(det G(t) / det G(0))`,
//! * diffusion tensor `B_K = a_K E(0) G(t)^{-1} E(0)^T`,
//! * gradient transfer `K_K = E(t) G(t)^{-1} E(0)^T`.
//!
//! Integrals over the moved element then equal integrals over the initial one,
//! so pulled-back matrices reproduce moving-mesh matrices to round-off.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bdf::{BdfScheme, Problem, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::{
    p1_mass, Assembler, ElementGeometry, LoadParts, MovingMesh, NodalField, NonlinearSource, SpatialDiscretization,
};
use crate::geometry::{AmbientField, FlowMap};
use crate::linsolve::SolverConfig;
use crate::mesh::SurfaceMesh;
use crate::sparse::SparseOperator;

/// Initial elements with `det G(0)` below this are rejected.
pub const MIN_GRAM_DET: f64 = 1e-28;

#[derive(Debug, Clone, PartialEq)]
pub struct ElementFactors {
    pub area_ratio: f64,
    pub diffusion: Matrix3<f64>,
    pub transfer: Matrix3<f64>,
}

/// Initial-element data reused at every time.
#[derive(Debug, Clone, PartialEq)]
struct InitialElement {
    edges: Matrix3x2<f64>,
    gram_det: f64,
    area: f64,
    /// `E(0) G(0)^{-1}`, mapping nodal differences to initial tangent gradients.
    pinv: Matrix3x2<f64>,
}

impl InitialElement {
    fn new(mesh: &SurfaceMesh, tri: usize) -> Result<Self> {
        let [i, j, k] = mesh.triangles[tri];
        let y = &mesh.nodes0;
        let edges = Matrix3x2::from_columns(&[y[j] - y[i], y[k] - y[i]]);
        let gram = edges.transpose() * edges;
        let gram_det = gram.determinant();
        if !(gram_det >= MIN_GRAM_DET) {
            return Err(Error::DegenerateTriangle { tri, area: 0.5 * gram_det.max(0.0).sqrt() });
        }
        Ok(Self { edges, gram_det, area: 0.5 * gram_det.sqrt(), pinv: edges * inverse2(&gram, gram_det) })
    }

    /// Initial tangential gradients of the three hat functions.
    fn basis_gradients(&self) -> [Vector3<f64>; 3] {
        let g1 = self.pinv.column(0).into_owned();
        let g2 = self.pinv.column(1).into_owned();
        [-g1 - g2, g1, g2]
    }

    fn gradient(&self, u: [f64; 3]) -> Vector3<f64> {
        self.pinv * nalgebra::Vector2::new(u[1] - u[0], u[2] - u[0])
    }
}

fn inverse2(g: &Matrix2<f64>, det: f64) -> Matrix2<f64> {
    Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det
}

/// Per-element pull-back factors at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PullbackFactors {
    pub t: f64,
    pub elements: Vec<ElementFactors>,
    initial: Vec<InitialElement>,
}

fn initial_elements(mesh: &SurfaceMesh) -> Result<Vec<InitialElement>> {
    (0..mesh.tri_count()).into_par_iter().map(|k| InitialElement::new(mesh, k)).collect()
}

fn factors_with(mesh: &SurfaceMesh, flow: &FlowMap, t: f64, initial: Vec<InitialElement>) -> Result<PullbackFactors> {
    let elements = mesh
        .triangles
        .par_iter()
        .zip(&initial)
        .enumerate()
        .map(|(k, (&[i, j, l], init))| {
            let x = [i, j, l].map(|n| flow.position(&mesh.nodes0[n], t));
            let edges = Matrix3x2::from_columns(&[x[1] - x[0], x[2] - x[0]]);
            let gram = edges.transpose() * edges;
            let det = gram.determinant();
            if !(det > 0.0) {
                return Err(Error::DegenerateTriangle { tri: k, area: 0.5 * det.max(0.0).sqrt() });
            }
            let ginv = inverse2(&gram, det);
            let area_ratio = (det / init.gram_det).sqrt();
            let e0t = init.edges.transpose();
            Ok(ElementFactors {
                area_ratio,
                diffusion: area_ratio * init.edges * ginv * e0t,
                transfer: edges * ginv * e0t,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PullbackFactors { t, elements, initial })
}

pub fn compute_factors(mesh: &SurfaceMesh, flow: &FlowMap, t: f64) -> Result<PullbackFactors> {
    factors_with(mesh, flow, t, initial_elements(mesh)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Mass,
    Stiffness,
}

impl PullbackFactors {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element matrix on the initial triangle `tri`.
    pub fn element_matrix(&self, tri: usize, which: OperatorKind) -> [[f64; 3]; 3] {
        let f = &self.elements[tri];
        let init = &self.initial[tri];
        match which {
            OperatorKind::Mass => p1_mass(f.area_ratio * init.area),
            OperatorKind::Stiffness => {
                let g = init.basis_gradients();
                let mut k = [[0.0; 3]; 3];
                for (a, row) in k.iter_mut().enumerate() {
                    for (b, v) in row.iter_mut().enumerate() {
                        *v = init.area * g[a].dot(&(f.diffusion * g[b]));
                    }
                }
                k
            }
        }
    }

    /// `K_K grad0`: moved-element gradient of a field with initial gradient `grad0`.
    pub fn transfer_gradient(&self, tri: usize, grad0: &Vector3<f64>) -> Vector3<f64> {
        self.elements[tri].transfer * grad0
    }

    /// Eigenvalues of `B_K` restricted to the tangent plane of the initial element.
    pub fn tangential_diffusion_eigenvalues(&self, tri: usize) -> (f64, f64) {
        let init = &self.initial[tri];
        let e1 = init.edges.column(0).normalize();
        let n = init.edges.column(0).cross(&init.edges.column(1)).normalize();
        let e2 = n.cross(&e1);
        let b = &self.elements[tri].diffusion;
        let m = Matrix2::new(e1.dot(&(b * e1)), e1.dot(&(b * e2)), e2.dot(&(b * e1)), e2.dot(&(b * e2)));
        let eig = m.symmetric_eigenvalues();
        (eig.min(), eig.max())
    }
}

/// Mass or stiffness matrix assembled on the initial mesh from pull-back factors.
pub fn assemble_pulled_back(
    assembler: &Assembler,
    mesh: &SurfaceMesh,
    factors: &PullbackFactors,
    which: OperatorKind,
) -> Result<SparseOperator> {
    if factors.len() != mesh.tri_count() {
        return Err(Error::DimensionMismatch { expected: mesh.tri_count(), got: factors.len() });
    }
    let locals: Vec<_> = (0..mesh.tri_count()).map(|k| factors.element_matrix(k, which)).collect();
    Ok(assembler.assemble_from_elements(mesh, &locals))
}

/// Spatial discretization that never leaves the initial mesh.
#[derive(Debug, Clone)]
pub struct PulledBack<'a> {
    pub mesh: &'a SurfaceMesh,
    pub flow: FlowMap,
    assembler: Assembler,
    initial: Vec<InitialElement>,
}

impl<'a> PulledBack<'a> {
    pub fn new(mesh: &'a SurfaceMesh, flow: FlowMap) -> Result<Self> {
        Ok(Self { mesh, flow, assembler: Assembler::new(mesh), initial: initial_elements(mesh)? })
    }

    pub fn factors(&self, t: f64) -> Result<PullbackFactors> {
        factors_with(self.mesh, &self.flow, t, self.initial.clone())
    }
}

impl SpatialDiscretization for PulledBack<'_> {
    fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    fn operators(&self, t: f64) -> Result<(SparseOperator, SparseOperator)> {
        let f = self.factors(t)?;
        Ok((
            assemble_pulled_back(&self.assembler, self.mesh, &f, OperatorKind::Mass)?,
            assemble_pulled_back(&self.assembler, self.mesh, &f, OperatorKind::Stiffness)?,
        ))
    }

    /// `int_{Gamma^0} a(., t) f(uhat, K grad0 uhat) psi`.
    fn load(&self, t: f64, uhat: &[f64], source: &NonlinearSource) -> Result<Vec<f64>> {
        crate::fem::check_len(self.mesh.node_count(), uhat.len())?;
        let f = self.factors(t)?;
        let areas: Vec<f64> = f.elements.iter().zip(&self.initial).map(|(e, i)| e.area_ratio * i.area).collect();
        let grads: Vec<Vector3<f64>> = self
            .mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(k, tri)| f.transfer_gradient(k, &self.initial[k].gradient(tri.map(|i| uhat[i]))))
            .collect();
        let parts = LoadParts { mesh: self.mesh, t, areas: &areas, grads: &grads };
        self.assembler.load_from_parts(&parts, uhat, source, &self.flow)
    }

    fn interpolate(&self, field: &AmbientField, t: f64) -> Vec<f64> {
        self.mesh.nodes0.iter().map(|y| field.value(&self.flow.position(y, t), t)).collect()
    }
}

/// Runs a linear problem entirely on the initial mesh.
pub fn run_pulled_back_scheme(
    mesh: &SurfaceMesh,
    flow: &FlowMap,
    problem: &Problem,
    scheme: &BdfScheme,
    grid: &TimeGrid,
    solver: &SolverConfig,
) -> Result<Vec<NodalField>> {
    if !problem.source.is_linear() {
        return Err(Error::InvalidArgument("the pulled-back scheme supports linear problems only".into()));
    }
    let disc = PulledBack::new(mesh, *flow)?;
    crate::bdf::solve(problem, scheme, grid, &disc, solver)
}

/// Largest discrepancies between pulled-back and moving-mesh quantities at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackDiscrepancy {
    pub t: f64,
    pub mass: f64,
    pub stiffness: f64,
    /// `max |K_K E0 G0^{-1} d - E(t) G(t)^{-1} d|` over sampled elements.
    pub gradient: f64,
}

/// Entries smaller than this fraction of the largest entry are compared on
/// that absolute scale; exact zeros and cancelled sums carry no relative
/// information.
pub const RELATIVE_FLOOR: f64 = 1e-3;

pub fn check_equivalence(
    mesh: &SurfaceMesh,
    flow: &FlowMap,
    times: &[f64],
    gradient_samples: usize,
    seed: u64,
) -> Result<Vec<PullbackDiscrepancy>> {
    let moving = MovingMesh::new(mesh, *flow);
    let pulled = PulledBack::new(mesh, *flow)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let (m, a) = moving.operators(t)?;
        let (mp, ap) = pulled.operators(t)?;
        let factors = pulled.factors(t)?;
        let at_t = mesh.at_time(flow, t);
        let mut gradient: f64 = 0.0;
        for _ in 0..gradient_samples {
            let k = rng.random_range(0..mesh.tri_count());
            let u: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let g0 = pulled.initial[k].gradient(u);
            let gt = ElementGeometry::new(&at_t.vertices(k), k)?.gradient(u);
            let diff = (factors.transfer_gradient(k, &g0) - gt).norm() / gt.norm().max(1.0);
            gradient = gradient.max(diff);
        }
        out.push(PullbackDiscrepancy {
            t,
            mass: m.max_relative_difference(&mp, RELATIVE_FLOOR),
            stiffness: a.max_relative_difference(&ap, RELATIVE_FLOOR),
            gradient,
        });
    }
    Ok(out)
}
