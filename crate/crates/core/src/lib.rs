//! Evolving-surface finite elements with linearly implicit BDF time stepping.
//!
//! The crate covers analytic surface geometry, P1 assembly on moving meshes,
//! BDF schemes of orders 1 to 6, the pulled-back formulation on the initial
//! mesh, error norms and convergence reports, and a maximal-regularity probe.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bdf;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod linsolve;
pub mod maxreg;
pub mod mesh;
pub mod norms;
pub mod pullback;
pub mod quadrature;
pub mod sparse;
pub mod vtk;

pub use bdf::{solve, BdfScheme, Problem, Stepper, TimeGrid};
pub use error::{Error, Result};
pub use fem::{Assembler, Forcing, MovingMesh, NodalField, NonlinearSource, SpatialDiscretization};
pub use geometry::{AmbientField, FlowKind, FlowMap, Nonlinearity, Point};
pub use linsolve::{Preconditioner, SolverConfig};
pub use maxreg::{maxreg_ratio, MaxRegProbe, MaxRegSample};
pub use mesh::{MeshAtTime, SurfaceMesh};
pub use norms::{ErrorReport, NormSpec, RunErrors};
pub use pullback::{PullbackFactors, PulledBack};
pub use sparse::SparseOperator;
