//! Closed-form ambient calculus for the analytic surface family.
//!
//! Every surface here is the image of a sphere of radius `r` under an affine
//! flow map, so it is the zero set of a diagonal quadric
//! `phi(x, t) = sum_i c_i(t) (x_i - s_i(t))^2 - r^2`. Surface operators are
//! obtained from ambient derivatives through the usual level-set identities.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Points with `|phi| <= TUBE_TOL` count as lying on the surface.
pub const TUBE_TOL: f64 = 1e-8;
/// `|grad phi|` below this is treated as degenerate.
pub const MIN_GRADIENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowKind {
    StationarySphere,
    /// `X(y, t) = (sqrt(a(t)) y1, y2, y3)` with `a(t) = 1 + amplitude sin(2 pi frequency t)`.
    OscillatingEllipsoid {
        amplitude: f64,
        frequency: f64,
    },
    /// Rigid translation `X(y, t) = y + t velocity`.
    Translation {
        velocity: [f64; 3],
    },
}

/// Flow map `X(., t)` transporting the initial sphere of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMap {
    pub kind: FlowKind,
    pub radius: f64,
}

impl FlowMap {
    pub fn stationary_sphere() -> Self {
        Self { kind: FlowKind::StationarySphere, radius: 1.0 }
    }

    pub fn oscillating_ellipsoid(amplitude: f64, frequency: f64) -> Self {
        Self { kind: FlowKind::OscillatingEllipsoid { amplitude, frequency }, radius: 1.0 }
    }

    /// The ellipsoid with `a(t) = 1 + sin(2 pi t) / 4`.
    pub fn standard_ellipsoid() -> Self {
        Self::oscillating_ellipsoid(0.25, 1.0)
    }

    pub fn translation(velocity: [f64; 3]) -> Self {
        Self { kind: FlowKind::Translation { velocity }, radius: 1.0 }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn is_stationary(&self) -> bool {
        match self.kind {
            FlowKind::StationarySphere => true,
            FlowKind::OscillatingEllipsoid { amplitude, .. } => amplitude == 0.0,
            FlowKind::Translation { velocity } => velocity == [0.0; 3],
        }
    }

    /// `a(t)` and `a'(t)` of the ellipsoid family; `(1, 0)` for other kinds.
    fn stretch(&self, t: f64) -> (f64, f64) {
        match self.kind {
            FlowKind::OscillatingEllipsoid { amplitude, frequency } => {
                let w = 2.0 * PI * frequency;
                (1.0 + amplitude * (w * t).sin(), amplitude * w * (w * t).cos())
            }
            _ => (1.0, 0.0),
        }
    }

    fn shift(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        match self.kind {
            FlowKind::Translation { velocity } => {
                let w = Vector3::from(velocity);
                (w * t, w)
            }
            _ => (Vector3::zeros(), Vector3::zeros()),
        }
    }

    /// `X(y, t)`.
    pub fn position(&self, y: &Point, t: f64) -> Point {
        let (a, _) = self.stretch(t);
        let (s, _) = self.shift(t);
        Vector3::new(a.sqrt() * y.x, y.y, y.z) + s
    }

    /// `X(., t)^{-1}(x)`.
    pub fn inverse(&self, x: &Point, t: f64) -> Point {
        let (a, _) = self.stretch(t);
        let (s, _) = self.shift(t);
        let z = x - s;
        Vector3::new(z.x / a.sqrt(), z.y, z.z)
    }

    /// `dX/dt (y, t)`, the material velocity of the particle starting at `y`.
    pub fn particle_velocity(&self, y: &Point, t: f64) -> Vector3<f64> {
        let (a, da) = self.stretch(t);
        let (_, w) = self.shift(t);
        Vector3::new(0.5 * da / a.sqrt() * y.x, 0.0, 0.0) + w
    }

    /// Spatial Jacobian `DX(y, t)`.
    pub fn jacobian(&self, _y: &Point, t: f64) -> Matrix3<f64> {
        let (a, _) = self.stretch(t);
        Matrix3::from_diagonal(&Vector3::new(a.sqrt(), 1.0, 1.0))
    }

    /// Eulerian velocity `v(x, t)` extended to the ambient space.
    pub fn velocity(&self, x: &Point, t: f64) -> Vector3<f64> {
        let (a, da) = self.stretch(t);
        let (_, w) = self.shift(t);
        Vector3::new(0.5 * da / a * x.x, 0.0, 0.0) + w
    }

    /// Ambient Jacobian of [`FlowMap::velocity`].
    pub fn velocity_jacobian(&self, _x: &Point, t: f64) -> Matrix3<f64> {
        let (a, da) = self.stretch(t);
        Matrix3::from_diagonal(&Vector3::new(0.5 * da / a, 0.0, 0.0))
    }

    /// Closest point of the initial sphere along the ray through `y`.
    pub fn project_initial(&self, y: &Point) -> Point {
        y * (self.radius / y.norm())
    }

    pub fn level_set(&self) -> LevelSet {
        LevelSet { flow: *self }
    }

    fn surface_frame(&self, x: &Point, t: f64) -> Result<SurfaceFrame> {
        let ls = self.level_set();
        ls.check_on_surface(x, t)?;
        let grad = ls.gradient(x, t);
        let norm = grad.norm();
        if norm < MIN_GRADIENT {
            return Err(Error::DegenerateGradient { point: (*x).into(), norm });
        }
        let n = grad / norm;
        let proj = Matrix3::identity() - n * n.transpose();
        Ok(SurfaceFrame { n, proj, grad_norm: norm, hessian: ls.hessian(x, t) })
    }

    /// Unit outward normal `grad phi / |grad phi|`.
    pub fn normal(&self, x: &Point, t: f64) -> Result<Vector3<f64>> {
        Ok(self.surface_frame(x, t)?.n)
    }

    /// Sum of principal curvatures, `div_Gamma n`.
    pub fn mean_curvature(&self, x: &Point, t: f64) -> Result<f64> {
        Ok(self.surface_frame(x, t)?.mean_curvature())
    }

    pub fn tangential_gradient(&self, field: &AmbientField, x: &Point, t: f64) -> Result<Vector3<f64>> {
        let frame = self.surface_frame(x, t)?;
        Ok(frame.proj * field.gradient(x, t))
    }

    /// `Delta u - n^T (D^2 u) n - H du/dn`.
    pub fn laplace_beltrami(&self, field: &AmbientField, x: &Point, t: f64) -> Result<f64> {
        let frame = self.surface_frame(x, t)?;
        let hess = field.hessian(x, t);
        let grad = field.gradient(x, t);
        let n = frame.n;
        Ok(hess.trace() - n.dot(&(hess * n)) - frame.mean_curvature() * grad.dot(&n))
    }

    /// `du/dt + v . grad u`.
    pub fn material_derivative(&self, field: &AmbientField, x: &Point, t: f64) -> f64 {
        field.time_derivative(x, t) + self.velocity(x, t).dot(&field.gradient(x, t))
    }

    /// `tr((I - n n^T) Dv)`.
    pub fn tangential_divergence_velocity(&self, x: &Point, t: f64) -> Result<f64> {
        let frame = self.surface_frame(x, t)?;
        Ok((frame.proj * self.velocity_jacobian(x, t)).trace())
    }

    /// Source `rho` making `field` an exact solution of
    /// `mat_dot u + u div_Gamma v - Delta_Gamma u = f_core(u, grad_Gamma u) + rho`.
    pub fn manufactured_rhs(&self, field: &AmbientField, nonlinearity: Nonlinearity, x: &Point, t: f64) -> Result<f64> {
        let u = field.value(x, t);
        let grad = self.tangential_gradient(field, x, t)?;
        Ok(self.material_derivative(field, x, t) + u * self.tangential_divergence_velocity(x, t)?
            - self.laplace_beltrami(field, x, t)?
            - nonlinearity.eval(u, &grad))
    }
}

struct SurfaceFrame {
    n: Vector3<f64>,
    proj: Matrix3<f64>,
    grad_norm: f64,
    hessian: Matrix3<f64>,
}

impl SurfaceFrame {
    fn mean_curvature(&self) -> f64 {
        (self.proj * self.hessian * self.proj).trace() / self.grad_norm
    }
}

/// Level-set description `phi(x, t) = 0` of the surface transported by a [`FlowMap`].
#[derive(Debug, Clone, Copy)]
pub struct LevelSet {
    flow: FlowMap,
}

impl LevelSet {
    /// Coefficients `c(t)`, `c'(t)` and centre `s(t)`, `s'(t)` of the quadric.
    fn parts(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (a, da) = self.flow.stretch(t);
        let (s, ds) = self.flow.shift(t);
        (Vector3::new(1.0 / a, 1.0, 1.0), Vector3::new(-da / (a * a), 0.0, 0.0), s, ds)
    }

    pub fn value(&self, x: &Point, t: f64) -> f64 {
        let (c, _, s, _) = self.parts(t);
        let z = x - s;
        c.dot(&z.component_mul(&z)) - self.flow.radius * self.flow.radius
    }

    pub fn gradient(&self, x: &Point, t: f64) -> Vector3<f64> {
        let (c, _, s, _) = self.parts(t);
        2.0 * c.component_mul(&(x - s))
    }

    pub fn hessian(&self, _x: &Point, t: f64) -> Matrix3<f64> {
        let (c, ..) = self.parts(t);
        Matrix3::from_diagonal(&(2.0 * c))
    }

    pub fn time_derivative(&self, x: &Point, t: f64) -> f64 {
        let (c, dc, s, ds) = self.parts(t);
        let z = x - s;
        dc.dot(&z.component_mul(&z)) - 2.0 * c.component_mul(&z).dot(&ds)
    }

    pub fn check_on_surface(&self, x: &Point, t: f64) -> Result<()> {
        let residual = self.value(x, t).abs();
        if residual <= TUBE_TOL {
            Ok(())
        } else {
            Err(Error::OffSurface { point: (*x).into(), t, residual })
        }
    }
}

/// Smooth ambient scalar field with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmbientField {
    Zero,
    Constant(f64),
    /// `exp(-rate t) x1 x2`.
    ProductDecay {
        rate: f64,
    },
    /// `exp(-rate t) (coeffs . x)`.
    LinearDecay {
        coeffs: [f64; 3],
        rate: f64,
    },
}

impl AmbientField {
    /// The manufactured solution `exp(-t) x1 x2`.
    pub fn standard() -> Self {
        Self::ProductDecay { rate: 1.0 }
    }

    pub fn value(&self, x: &Point, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant(c) => c,
            Self::ProductDecay { rate } => (-rate * t).exp() * x.x * x.y,
            Self::LinearDecay { coeffs, rate } => (-rate * t).exp() * Vector3::from(coeffs).dot(x),
        }
    }

    pub fn time_derivative(&self, x: &Point, t: f64) -> f64 {
        match *self {
            Self::Zero | Self::Constant(_) => 0.0,
            Self::ProductDecay { rate } | Self::LinearDecay { rate, .. } => -rate * self.value(x, t),
        }
    }

    pub fn gradient(&self, x: &Point, t: f64) -> Vector3<f64> {
        match *self {
            Self::Zero | Self::Constant(_) => Vector3::zeros(),
            Self::ProductDecay { rate } => (-rate * t).exp() * Vector3::new(x.y, x.x, 0.0),
            Self::LinearDecay { coeffs, rate } => (-rate * t).exp() * Vector3::from(coeffs),
        }
    }

    pub fn hessian(&self, _x: &Point, t: f64) -> Matrix3<f64> {
        match *self {
            Self::ProductDecay { rate } => {
                let e = (-rate * t).exp();
                Matrix3::new(0.0, e, 0.0, e, 0.0, 0.0, 0.0, 0.0, 0.0)
            }
            _ => Matrix3::zeros(),
        }
    }
}

/// Nonlinear part `f_core(u, grad_Gamma u)` of the source term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nonlinearity {
    #[default]
    Zero,
    /// Harmonic map heat flow term `|grad u|^2 u`.
    HarmonicMap,
}

impl Nonlinearity {
    pub fn eval(&self, u: f64, grad: &Vector3<f64>) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::HarmonicMap => grad.norm_squared() * u,
        }
    }
}
