//! Piecewise-linear surface finite elements on the moved mesh.
//!
//! Basis functions are attached to nodes that travel with the flow, so a
//! coefficient vector describes the same material field at every time level.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3x2, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{AmbientField, FlowMap, Nonlinearity, Point};
use crate::mesh::{MeshAtTime, SurfaceMesh};
use crate::quadrature::TriangleRule;
use crate::sparse::{Pattern, SparseOperator};

/// Triangles with a smaller area are rejected.
pub const MIN_AREA: f64 = 1e-14;

/// Coefficients of a finite element function at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
    pub step: usize,
}

impl NodalField {
    pub fn new(values: Vec<f64>, step: usize) -> Self {
        Self { values, step }
    }

    pub fn zeros(n: usize, step: usize) -> Self {
        Self { values: vec![0.0; n], step }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Affine element data: edge matrix `E = [x_j - x_i, x_k - x_i]`, Gram matrix
/// `G = E^T E`, area and the three hat-function gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub edges: Matrix3x2<f64>,
    pub gram: Matrix2<f64>,
    pub gram_inv: Matrix2<f64>,
    pub area: f64,
    pub grads: [Vector3<f64>; 3],
}

impl ElementGeometry {
    pub fn new(vertices: &[Point; 3], tri: usize) -> Result<Self> {
        let edges = Matrix3x2::from_columns(&[vertices[1] - vertices[0], vertices[2] - vertices[0]]);
        let gram = edges.transpose() * edges;
        let det = gram.determinant();
        let area = 0.5 * det.max(0.0).sqrt();
        if !(area >= MIN_AREA) {
            return Err(Error::DegenerateTriangle { tri, area });
        }
        let gram_inv = Matrix2::new(gram[(1, 1)], -gram[(0, 1)], -gram[(1, 0)], gram[(0, 0)]) / det;
        let pinv = edges * gram_inv;
        let g1 = pinv.column(0).into_owned();
        let g2 = pinv.column(1).into_owned();
        Ok(Self { edges, gram, gram_inv, area, grads: [-g1 - g2, g1, g2] })
    }

    /// Tangential gradient `E G^{-1} d` of the linear function with vertex
    /// values `u`, where `d = (u_j - u_i, u_k - u_i)`.
    pub fn gradient(&self, u: [f64; 3]) -> Vector3<f64> {
        self.edges * (self.gram_inv * Vector2::new(u[1] - u[0], u[2] - u[0]))
    }

    pub fn mass_matrix(&self) -> [[f64; 3]; 3] {
        p1_mass(self.area)
    }

    pub fn stiffness_matrix(&self) -> [[f64; 3]; 3] {
        let mut k = [[0.0; 3]; 3];
        for (a, row) in k.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = self.area * self.grads[a].dot(&self.grads[b]);
            }
        }
        k
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.edges.column(0).cross(&self.edges.column(1)).normalize()
    }
}

/// Exact P1 mass matrix of a triangle with the given area.
pub fn p1_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// Inhomogeneity added to the nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    None,
    Constant(f64),
    /// The source `rho` that makes the field an exact solution.
    Manufactured(AmbientField),
}

/// Right-hand side `f(u, grad u) = f_core(u, grad u) + forcing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSource {
    pub nonlinearity: Nonlinearity,
    pub forcing: Forcing,
}

impl NonlinearSource {
    pub const ZERO: Self = Self { nonlinearity: Nonlinearity::Zero, forcing: Forcing::None };

    pub fn manufactured(nonlinearity: Nonlinearity, exact: AmbientField) -> Self {
        Self { nonlinearity, forcing: Forcing::Manufactured(exact) }
    }

    pub fn is_zero(&self) -> bool {
        self.nonlinearity == Nonlinearity::Zero
            && matches!(
                self.forcing,
                Forcing::None | Forcing::Constant(0.0) | Forcing::Manufactured(AmbientField::Zero)
            )
    }

    /// Whether the source ignores the extrapolated solution.
    pub fn is_linear(&self) -> bool {
        self.nonlinearity == Nonlinearity::Zero
    }
}

/// Per-element inputs to the load quadrature.
pub(crate) struct LoadParts<'a> {
    pub mesh: &'a SurfaceMesh,
    pub t: f64,
    pub areas: &'a [f64],
    pub grads: &'a [Vector3<f64>],
}

/// Mass, stiffness and load assembly over a fixed connectivity.
#[derive(Debug, Clone)]
pub struct Assembler {
    pattern: Arc<Pattern>,
    rule: TriangleRule,
}

impl Assembler {
    /// Assembler using the degree-4 rule for loads.
    pub fn new(mesh: &SurfaceMesh) -> Self {
        Self { pattern: Arc::new(Pattern::from_mesh(mesh)), rule: TriangleRule::degree4() }
    }

    pub fn with_quadrature_order(mesh: &SurfaceMesh, order: usize) -> Result<Self> {
        Ok(Self { pattern: Arc::new(Pattern::from_mesh(mesh)), rule: TriangleRule::with_order(order)? })
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn rule(&self) -> &TriangleRule {
        &self.rule
    }

    pub fn geometries(&self, m: &MeshAtTime) -> Result<Vec<ElementGeometry>> {
        (0..m.mesh.tri_count()).into_par_iter().map(|k| ElementGeometry::new(&m.vertices(k), k)).collect()
    }

    pub fn assemble_from_elements(&self, mesh: &SurfaceMesh, locals: &[[[f64; 3]; 3]]) -> SparseOperator {
        let mut op = SparseOperator::zeros(self.pattern.clone());
        for (tri, local) in mesh.triangles.iter().zip(locals) {
            op.add_element(tri, local);
        }
        op
    }

    /// Consistent P1 mass matrix on the mesh at time `m.t`.
    pub fn assemble_mass(&self, m: &MeshAtTime) -> Result<SparseOperator> {
        let locals: Vec<_> = self.geometries(m)?.iter().map(ElementGeometry::mass_matrix).collect();
        Ok(self.assemble_from_elements(m.mesh, &locals))
    }

    pub fn assemble_stiffness(&self, m: &MeshAtTime) -> Result<SparseOperator> {
        let locals: Vec<_> = self.geometries(m)?.iter().map(ElementGeometry::stiffness_matrix).collect();
        Ok(self.assemble_from_elements(m.mesh, &locals))
    }

    /// Mass and stiffness matrices from one pass over the element geometry.
    pub fn assemble_mass_stiffness(&self, m: &MeshAtTime) -> Result<(SparseOperator, SparseOperator)> {
        let geo = self.geometries(m)?;
        let mass: Vec<_> = geo.iter().map(ElementGeometry::mass_matrix).collect();
        let stiff: Vec<_> = geo.iter().map(ElementGeometry::stiffness_matrix).collect();
        Ok((self.assemble_from_elements(m.mesh, &mass), self.assemble_from_elements(m.mesh, &stiff)))
    }

    /// `int f(uhat, grad uhat) phi_i` over the mesh at time `m.t`.
    pub fn assemble_nonlinear_load(
        &self,
        m: &MeshAtTime,
        uhat: &[f64],
        source: &NonlinearSource,
        flow: &FlowMap,
    ) -> Result<Vec<f64>> {
        check_len(m.mesh.node_count(), uhat.len())?;
        let geo = self.geometries(m)?;
        let areas: Vec<f64> = geo.iter().map(|g| g.area).collect();
        let grads: Vec<Vector3<f64>> = if source.is_linear() {
            vec![Vector3::zeros(); geo.len()]
        } else {
            geo.iter().zip(&m.mesh.triangles).map(|(g, t)| g.gradient(t.map(|i| uhat[i]))).collect()
        };
        let parts = LoadParts { mesh: m.mesh, t: m.t, areas: &areas, grads: &grads };
        self.load_from_parts(&parts, uhat, source, flow)
    }

    pub(crate) fn load_from_parts(
        &self,
        parts: &LoadParts,
        uhat: &[f64],
        source: &NonlinearSource,
        flow: &FlowMap,
    ) -> Result<Vec<f64>> {
        let mesh = parts.mesh;
        let mut load = vec![0.0; mesh.node_count()];
        if source.is_zero() {
            return Ok(load);
        }
        let locals: Vec<[f64; 3]> = mesh
            .triangles
            .par_iter()
            .enumerate()
            .map(|(k, tri)| {
                let y = tri.map(|i| mesh.nodes0[i]);
                let u = tri.map(|i| uhat[i]);
                let grad = parts.grads[k];
                let mut local = [0.0; 3];
                for (l, w) in &self.rule.points {
                    let uq = l[0] * u[0] + l[1] * u[1] + l[2] * u[2];
                    let mut f = source.nonlinearity.eval(uq, &grad);
                    f += match source.forcing {
                        Forcing::None => 0.0,
                        Forcing::Constant(c) => c,
                        Forcing::Manufactured(field) => {
                            // Lift through the initial surface: X(., t) maps the flat initial
                            // triangle onto the flat moved one, so this is the quadrature
                            // point pushed onto Gamma(t).
                            let y_q = l[0] * y[0] + l[1] * y[1] + l[2] * y[2];
                            let lifted = flow.position(&flow.project_initial(&y_q), parts.t);
                            flow.manufactured_rhs(&field, source.nonlinearity, &lifted, parts.t)?
                        }
                    };
                    for a in 0..3 {
                        local[a] += w * parts.areas[k] * f * l[a];
                    }
                }
                Ok(local)
            })
            .collect::<Result<_>>()?;
        for (tri, local) in mesh.triangles.iter().zip(&locals) {
            for a in 0..3 {
                load[tri[a]] += local[a];
            }
        }
        if load.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("load vector"));
        }
        Ok(load)
    }
}

/// Operators and loads of a spatial discretization at a given time.
///
/// All implementations share one node numbering, and coefficient vectors
/// carry over between time levels unchanged.
pub trait SpatialDiscretization {
    fn node_count(&self) -> usize;

    /// Mass and stiffness matrices at time `t`.
    fn operators(&self, t: f64) -> Result<(SparseOperator, SparseOperator)>;

    /// Load vector of `source` evaluated at the extrapolated coefficients `uhat`.
    fn load(&self, t: f64, uhat: &[f64], source: &NonlinearSource) -> Result<Vec<f64>>;

    /// Nodal interpolant of `field` at time `t`.
    fn interpolate(&self, field: &AmbientField, t: f64) -> Vec<f64>;
}

/// Moving-mesh discretization: assemble directly on `X(nodes0, t)`.
#[derive(Debug, Clone)]
pub struct MovingMesh<'a> {
    pub mesh: &'a SurfaceMesh,
    pub flow: FlowMap,
    pub assembler: Assembler,
}

impl<'a> MovingMesh<'a> {
    pub fn new(mesh: &'a SurfaceMesh, flow: FlowMap) -> Self {
        Self { mesh, flow, assembler: Assembler::new(mesh) }
    }
}

impl SpatialDiscretization for MovingMesh<'_> {
    fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    fn operators(&self, t: f64) -> Result<(SparseOperator, SparseOperator)> {
        self.assembler.assemble_mass_stiffness(&self.mesh.at_time(&self.flow, t))
    }

    fn load(&self, t: f64, uhat: &[f64], source: &NonlinearSource) -> Result<Vec<f64>> {
        self.assembler.assemble_nonlinear_load(&self.mesh.at_time(&self.flow, t), uhat, source, &self.flow)
    }

    fn interpolate(&self, field: &AmbientField, t: f64) -> Vec<f64> {
        self.mesh.at_time(&self.flow, t).interpolate(|x| field.value(x, t))
    }
}

/// Element-constant tangential gradient of `u` on triangle `tri`.
pub fn element_gradient(m: &MeshAtTime, u: &[f64], tri: usize) -> Result<Vector3<f64>> {
    check_len(m.mesh.node_count(), u.len())?;
    let geo = ElementGeometry::new(&m.vertices(tri), tri)?;
    Ok(geo.gradient(m.mesh.triangles[tri].map(|i| u[i])))
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
