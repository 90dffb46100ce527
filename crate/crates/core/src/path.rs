//! Desired paths described as the intersection of `m - 1` zero-level sets in
//! `R^m`.
//!
//! Every path evaluates to a [`LevelSet`]: the stacked error `phi(p)`, its
//! Jacobian `J_phi(p)` and one Hessian per level function. All built-in
//! paths are evaluated analytically.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{require_positive, GuidanceError, Result};

/// Singular-value threshold below which a Jacobian counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Value, Jacobian and Hessian stack of a path's level functions at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    /// `phi(p)`, length `m - 1`.
    pub phi: DVector<f64>,
    /// `J_phi(p)`, shape `(m - 1) x m`.
    pub jacobian: DMatrix<f64>,
    /// `H_phi_i(p)`, `m - 1` symmetric `m x m` matrices.
    pub hessians: Vec<DMatrix<f64>>,
}

impl LevelSet {
    pub fn dimension(&self) -> usize {
        self.jacobian.ncols()
    }

    /// `||phi(p)||`, the distance-like error to the path.
    pub fn distance(&self) -> f64 {
        self.phi.norm()
    }

    /// Gradient of the `i`-th level function (row `i` of the Jacobian).
    pub fn gradient(&self, i: usize) -> DVector<f64> {
        self.jacobian.row(i).transpose()
    }
}

/// Implicit description of a path.
pub trait ImplicitPath {
    /// Ambient dimension `m`.
    fn dimension(&self) -> usize;

    /// Analytic evaluation; `p` is guaranteed to have length `m`.
    fn level_set(&self, p: &DVector<f64>) -> LevelSet;

    /// A point on the path for the curve parameter `s`, when one is known.
    fn point_on_path(&self, _s: f64) -> Option<DVector<f64>> {
        None
    }
}

/// Circle with the normalized equation `((x-x0)^2 + (y-y0)^2) / r^2 - 1`.
///
/// The `1/r^2` scaling makes `phi` dimensionless, so a given error gain has
/// the same meaning for every radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePath {
    pub radius: f64,
    pub center: [f64; 2],
}

impl CirclePath {
    pub fn new(radius: f64, center: [f64; 2]) -> Result<Self> {
        require_positive("radius", radius)?;
        Ok(Self { radius, center })
    }

    /// Signed radial distance `r sqrt(phi + 1) - r` corresponding to `phi`.
    pub fn radial_error(&self, phi: f64) -> f64 {
        radial_error(phi, self.radius)
    }
}

impl ImplicitPath for CirclePath {
    fn dimension(&self) -> usize {
        2
    }

    fn level_set(&self, p: &DVector<f64>) -> LevelSet {
        let r2 = self.radius * self.radius;
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        LevelSet {
            phi: DVector::from_element(1, (dx * dx + dy * dy) / r2 - 1.0),
            jacobian: DMatrix::from_row_slice(1, 2, &[2.0 * dx / r2, 2.0 * dy / r2]),
            hessians: vec![DMatrix::identity(2, 2) * (2.0 / r2)],
        }
    }

    fn point_on_path(&self, s: f64) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![self.center[0] + self.radius * s.cos(), self.center[1] + self.radius * s.sin()]))
    }
}

/// Axis-aligned ellipse `(x-x0)^2/a^2 + (y-y0)^2/b^2 - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsePath {
    pub semi_x: f64,
    pub semi_y: f64,
    pub center: [f64; 2],
}

impl EllipsePath {
    pub fn new(semi_x: f64, semi_y: f64, center: [f64; 2]) -> Result<Self> {
        require_positive("semi_x", semi_x)?;
        require_positive("semi_y", semi_y)?;
        Ok(Self { semi_x, semi_y, center })
    }
}

impl ImplicitPath for EllipsePath {
    fn dimension(&self) -> usize {
        2
    }

    fn level_set(&self, p: &DVector<f64>) -> LevelSet {
        let a2 = self.semi_x * self.semi_x;
        let b2 = self.semi_y * self.semi_y;
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        LevelSet {
            phi: DVector::from_element(1, dx * dx / a2 + dy * dy / b2 - 1.0),
            jacobian: DMatrix::from_row_slice(1, 2, &[2.0 * dx / a2, 2.0 * dy / b2]),
            hessians: vec![DMatrix::from_diagonal(&DVector::from_vec(vec![2.0 / a2, 2.0 / b2]))],
        }
    }

    fn point_on_path(&self, s: f64) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![self.center[0] + self.semi_x * s.cos(), self.center[1] + self.semi_y * s.sin()]))
    }
}

/// Straight line through `point` with heading `angle` (rad).
///
/// `phi` is the signed distance to the line, positive to the right of the
/// heading, so the positive tangent `E grad(phi)` points along `angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinePath {
    pub point: [f64; 2],
    pub angle: f64,
}

impl LinePath {
    pub fn new(point: [f64; 2], angle: f64) -> Self {
        Self { point, angle }
    }

    fn normal(&self) -> [f64; 2] {
        [self.angle.sin(), -self.angle.cos()]
    }
}

impl ImplicitPath for LinePath {
    fn dimension(&self) -> usize {
        2
    }

    fn level_set(&self, p: &DVector<f64>) -> LevelSet {
        let n = self.normal();
        let phi = n[0] * (p[0] - self.point[0]) + n[1] * (p[1] - self.point[1]);
        LevelSet {
            phi: DVector::from_element(1, phi),
            jacobian: DMatrix::from_row_slice(1, 2, &n),
            hessians: vec![DMatrix::zeros(2, 2)],
        }
    }

    fn point_on_path(&self, s: f64) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![self.point[0] + s * self.angle.cos(), self.point[1] + s * self.angle.sin()]))
    }
}

/// Circle of radius `r` around the z-axis lying in the plane `z = z0`:
/// `phi_1 = (x^2 + y^2)/r^2 - 1`, `phi_2 = z - z0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderPlanePath3D {
    pub radius: f64,
    pub z0: f64,
}

impl CylinderPlanePath3D {
    pub fn new(radius: f64, z0: f64) -> Result<Self> {
        require_positive("radius", radius)?;
        Ok(Self { radius, z0 })
    }
}

impl ImplicitPath for CylinderPlanePath3D {
    fn dimension(&self) -> usize {
        3
    }

    fn level_set(&self, p: &DVector<f64>) -> LevelSet {
        let r2 = self.radius * self.radius;
        let mut h1 = DMatrix::zeros(3, 3);
        h1[(0, 0)] = 2.0 / r2;
        h1[(1, 1)] = 2.0 / r2;
        LevelSet {
            phi: DVector::from_vec(vec![(p[0] * p[0] + p[1] * p[1]) / r2 - 1.0, p[2] - self.z0]),
            jacobian: DMatrix::from_row_slice(2, 3, &[2.0 * p[0] / r2, 2.0 * p[1] / r2, 0.0, 0.0, 0.0, 1.0]),
            hessians: vec![h1, DMatrix::zeros(3, 3)],
        }
    }

    fn point_on_path(&self, s: f64) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![self.radius * s.cos(), self.radius * s.sin(), self.z0]))
    }
}

type LevelSetFn = dyn Fn(&DVector<f64>) -> LevelSet + Send + Sync;

#[derive(Clone)]
enum PathKind {
    Circle(CirclePath),
    Ellipse(EllipsePath),
    Line(LinePath),
    CylinderPlane(CylinderPlanePath3D),
    Custom { dimension: usize, eval: Arc<LevelSetFn> },
}

/// A named, immutable path. Cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct PathGeometry {
    name: String,
    kind: PathKind,
}

impl fmt::Debug for PathGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathGeometry").field("name", &self.name).field("dimension", &self.dimension()).finish()
    }
}

impl PathGeometry {
    pub fn circle(radius: f64, center: [f64; 2]) -> Result<Self> {
        Ok(CirclePath::new(radius, center)?.into())
    }

    pub fn ellipse(semi_x: f64, semi_y: f64, center: [f64; 2]) -> Result<Self> {
        Ok(EllipsePath::new(semi_x, semi_y, center)?.into())
    }

    pub fn line(point: [f64; 2], angle: f64) -> Self {
        LinePath::new(point, angle).into()
    }

    pub fn cylinder_plane(radius: f64, z0: f64) -> Result<Self> {
        Ok(CylinderPlanePath3D::new(radius, z0)?.into())
    }

    /// A path backed by a user closure. The closure must return `m - 1`
    /// level functions with analytic Jacobian and Hessians; shapes are
    /// checked on every evaluation.
    pub fn custom<F>(name: impl Into<String>, dimension: usize, eval: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> LevelSet + Send + Sync + 'static,
    {
        if dimension < 2 {
            return Err(GuidanceError::InvalidParameter {
                name: "dimension",
                reason: format!("paths live in R^m with m >= 2, got {dimension}"),
            });
        }
        Ok(Self { name: name.into(), kind: PathKind::Custom { dimension, eval: Arc::new(eval) } })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ambient dimension `m`.
    pub fn dimension(&self) -> usize {
        match &self.kind {
            PathKind::Circle(c) => c.dimension(),
            PathKind::Ellipse(e) => e.dimension(),
            PathKind::Line(l) => l.dimension(),
            PathKind::CylinderPlane(c) => c.dimension(),
            PathKind::Custom { dimension, .. } => *dimension,
        }
    }

    /// Number of level functions, `m - 1`.
    pub fn codimension(&self) -> usize {
        self.dimension() - 1
    }

    pub fn as_circle(&self) -> Option<&CirclePath> {
        match &self.kind {
            PathKind::Circle(c) => Some(c),
            _ => None,
        }
    }

    pub fn evaluate(&self, p: &DVector<f64>) -> Result<LevelSet> {
        let m = self.dimension();
        if p.len() != m {
            return Err(GuidanceError::DimensionMismatch { expected: m, got: p.len() });
        }
        let ls = match &self.kind {
            PathKind::Circle(c) => c.level_set(p),
            PathKind::Ellipse(e) => e.level_set(p),
            PathKind::Line(l) => l.level_set(p),
            PathKind::CylinderPlane(c) => c.level_set(p),
            PathKind::Custom { eval, .. } => {
                let ls = eval(p);
                check_shapes(&ls, m)?;
                ls
            }
        };
        Ok(ls)
    }

    /// Convenience wrapper for slices.
    pub fn evaluate_at(&self, p: &[f64]) -> Result<LevelSet> {
        self.evaluate(&DVector::from_column_slice(p))
    }

    /// `d(p) = ||phi(p)||`.
    pub fn distance_to_path(&self, p: &DVector<f64>) -> Result<f64> {
        Ok(self.evaluate(p)?.distance())
    }

    /// A point on the path at curve parameter `s` (angle for closed curves,
    /// arc length for lines). `None` for custom paths.
    pub fn point_on_path(&self, s: f64) -> Option<DVector<f64>> {
        match &self.kind {
            PathKind::Circle(c) => c.point_on_path(s),
            PathKind::Ellipse(e) => e.point_on_path(s),
            PathKind::Line(l) => l.point_on_path(s),
            PathKind::CylinderPlane(c) => c.point_on_path(s),
            PathKind::Custom { .. } => None,
        }
    }
}

fn check_shapes(ls: &LevelSet, m: usize) -> Result<()> {
    let k = m - 1;
    let mismatch = |got| Err(GuidanceError::DimensionMismatch { expected: k, got });
    if ls.phi.len() != k {
        return mismatch(ls.phi.len());
    }
    if ls.jacobian.shape() != (k, m) {
        return mismatch(ls.jacobian.nrows());
    }
    if ls.hessians.len() != k {
        return mismatch(ls.hessians.len());
    }
    if let Some(h) = ls.hessians.iter().find(|h| h.shape() != (m, m)) {
        return Err(GuidanceError::DimensionMismatch { expected: m, got: h.nrows() });
    }
    Ok(())
}

macro_rules! impl_from_path {
    ($ty:ty, $variant:ident, $name:expr) => {
        impl From<$ty> for PathGeometry {
            fn from(path: $ty) -> Self {
                Self { name: $name.to_string(), kind: PathKind::$variant(path) }
            }
        }
    };
}

impl_from_path!(CirclePath, Circle, "circle");
impl_from_path!(EllipsePath, Ellipse, "ellipse");
impl_from_path!(LinePath, Line, "line");
impl_from_path!(CylinderPlanePath3D, CylinderPlane, "cylinder-plane");

/// Radial distance equivalent of a normalized circle error: `r sqrt(phi+1) - r`.
pub fn radial_error(phi: f64, radius: f64) -> f64 {
    radius * (phi + 1.0).sqrt() - radius
}

/// Rank diagnostics for a level-set Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankReport {
    pub full_rank: bool,
    pub sigma_min: f64,
}

/// Rank check with the default [`RANK_TOLERANCE`].
pub fn check_rank(jacobian: &DMatrix<f64>) -> RankReport {
    check_rank_with(jacobian, RANK_TOLERANCE)
}

pub fn check_rank_with(jacobian: &DMatrix<f64>, tolerance: f64) -> RankReport {
    let sigma_min = if jacobian.nrows() == 1 {
        jacobian.norm()
    } else {
        jacobian.clone().singular_values().iter().copied().fold(f64::INFINITY, f64::min)
    };
    RankReport { full_rank: sigma_min > tolerance, sigma_min }
}
