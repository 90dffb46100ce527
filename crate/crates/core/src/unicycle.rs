//! Inverse-kinematics guidance for a constant-speed planar unicycle
//! (fixed-wing model): `p_dot = v R(theta) [1, 0]^T`, `theta_dot = omega`.
//!
//! The field keeps `||f|| = v` by topping the converging term `vartheta`
//! up with a tangential component of magnitude `alpha = sqrt(v^2 -
//! ||vartheta||^2)`, or by scaling `vartheta` to speed `v` when it alone
//! exceeds the vehicle speed. The heading-rate law feeds forward the
//! field's rotation rate and feeds back the misalignment `f^T E p_dot`.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix2, Vector2};

use crate::behavior::{BehaviorSignal, BehaviorValue};
use crate::error::{require_positive, GuidanceError, Result};
use crate::field::{converging_from, tangent_from, Direction, ErrorLaw};
use crate::path::{LevelSet, PathGeometry};

/// Counter-clockwise quarter turn `E = [[0, -1], [1, 0]]`.
pub fn rot90() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Planar pose of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnicycleState {
    pub position: Vector2<f64>,
    /// Heading in `(-pi, pi]`.
    pub heading: f64,
}

impl UnicycleState {
    pub fn new(position: Vector2<f64>, heading: f64) -> Self {
        Self { position, heading: wrap_angle(heading) }
    }

    /// Air-relative velocity `v R(theta) p_0`.
    pub fn velocity(&self, speed: f64) -> Vector2<f64> {
        let (s, c) = self.heading.sin_cos();
        Vector2::new(speed * c, speed * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceGains {
    pub k_phi: f64,
    pub k_theta: f64,
    /// Behavior gain; `k_phi` is used when unset.
    pub k_b: Option<f64>,
    /// Vehicle airspeed (m/s).
    pub speed: f64,
    pub direction: Direction,
}

impl GuidanceGains {
    pub fn new(k_phi: f64, k_theta: f64, speed: f64) -> Result<Self> {
        require_positive("k_phi", k_phi)?;
        require_positive("k_theta", k_theta)?;
        require_positive("speed", speed)?;
        Ok(Self { k_phi, k_theta, k_b: None, speed, direction: Direction::Forward })
    }

    pub fn with_k_b(mut self, k_b: f64) -> Result<Self> {
        require_positive("k_b", k_b)?;
        self.k_b = Some(k_b);
        Ok(self)
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn error_law(&self, behavior: Option<BehaviorSignal>) -> ErrorLaw {
        let k_b = behavior.as_ref().map(|_| self.k_b.unwrap_or(self.k_phi));
        ErrorLaw { k_phi: self.k_phi, k_b, behavior }
    }
}

/// Speed-preserving field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleField {
    pub phi: f64,
    /// Effective designed error rate.
    pub u_phi: f64,
    pub behavior: Option<BehaviorValue>,
    /// Unnormalized tangent `E grad(phi)` (signed by direction).
    pub v_t: Vector2<f64>,
    /// `v_C + v_B`.
    pub vartheta: Vector2<f64>,
    pub f: Vector2<f64>,
    /// Tangential speed budget; `None` on the saturated branch.
    pub alpha: Option<f64>,
    pub saturated: bool,
    /// Speed the field was built for.
    pub speed: f64,
}

/// Heading-rate command and its feed-forward part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingCommand {
    pub omega: f64,
    pub theta_dot_c: f64,
}

/// Everything the controller needs at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleFieldSample {
    pub field: UnicycleField,
    pub f_dot: Vector2<f64>,
    pub theta_dot_c: f64,
    pub omega: f64,
    /// Ground velocity the sample was computed with.
    pub p_dot: Vector2<f64>,
}

/// Guidance law for one path, gain set and optional behavior.
#[derive(Debug, Clone)]
pub struct UnicycleGuidance {
    path: PathGeometry,
    gains: GuidanceGains,
    law: ErrorLaw,
}

fn to_dvec(p: &Vector2<f64>) -> DVector<f64> {
    DVector::from_column_slice(p.as_slice())
}

fn to_vec2(v: &DVector<f64>) -> Vector2<f64> {
    Vector2::new(v[0], v[1])
}

impl UnicycleGuidance {
    pub fn new(path: PathGeometry, gains: GuidanceGains, behavior: Option<BehaviorSignal>) -> Result<Self> {
        if path.dimension() != 2 {
            return Err(GuidanceError::DimensionMismatch { expected: 2, got: path.dimension() });
        }
        let law = gains.error_law(behavior);
        Ok(Self { path, gains, law })
    }

    pub fn path(&self) -> &PathGeometry {
        &self.path
    }

    pub fn gains(&self) -> &GuidanceGains {
        &self.gains
    }

    pub fn law(&self) -> &ErrorLaw {
        &self.law
    }

    /// Field with `||f|| = speed`.
    pub fn field(&self, p: &Vector2<f64>, t: f64, speed: f64) -> Result<UnicycleField> {
        let ls = self.path.evaluate(&to_dvec(p))?;
        self.field_from(&ls, t, speed)
    }

    fn field_from(&self, ls: &LevelSet, t: f64, speed: f64) -> Result<UnicycleField> {
        require_positive("speed", speed)?;
        let v_t = to_vec2(&tangent_from(ls, self.gains.direction)?);
        let terms = converging_from(ls, t, &self.law)?;
        let vartheta = to_vec2(&(terms.v_c + terms.v_b));
        let norm = vartheta.norm();
        let (f, alpha, saturated) = if norm > speed {
            (vartheta * (speed / norm), None, true)
        } else {
            let alpha = (speed * speed - norm * norm).max(0.0).sqrt();
            (v_t.normalize() * alpha + vartheta, Some(alpha), false)
        };
        Ok(UnicycleField {
            phi: ls.phi[0],
            u_phi: terms.u_phi[0],
            behavior: terms.behavior,
            v_t,
            vartheta,
            f,
            alpha,
            saturated,
            speed,
        })
    }

    /// Total time derivative of the field along the motion `p_dot`,
    /// holding the speed constant.
    pub fn field_time_derivative(
        &self,
        p: &Vector2<f64>,
        p_dot: &Vector2<f64>,
        t: f64,
        speed: f64,
    ) -> Result<Vector2<f64>> {
        let ls = self.path.evaluate(&to_dvec(p))?;
        let field = self.field_from(&ls, t, speed)?;
        Ok(self.derivative_from(&ls, &field, p_dot))
    }

    /// `vartheta_dot = beta_dot u + beta u_dot` with `beta = J^T (J J^T)^-1`.
    fn vartheta_dot(&self, ls: &LevelSet, field: &UnicycleField, p_dot: &Vector2<f64>) -> Vector2<f64> {
        let grad = Vector2::new(ls.jacobian[(0, 0)], ls.jacobian[(0, 1)]);
        let hess = Matrix2::from_iterator(ls.hessians[0].iter().copied());
        let gram = grad.norm_squared();
        let h_pdot = hess * p_dot;

        let beta = grad / gram;
        let beta_dot = h_pdot / gram - grad * (2.0 * grad.dot(&h_pdot) / (gram * gram));

        let k = self.law.convergence_gain();
        let phi_dot = grad.dot(p_dot);
        let u_dot = match &field.behavior {
            Some(b) => b.gamma_ddot[0] - k * (phi_dot - b.gamma_dot[0]),
            None => -k * phi_dot,
        };
        beta_dot * field.u_phi + beta * u_dot
    }

    fn derivative_from(&self, ls: &LevelSet, field: &UnicycleField, p_dot: &Vector2<f64>) -> Vector2<f64> {
        let vartheta_dot = self.vartheta_dot(ls, field, p_dot);
        let speed = field.speed;
        match field.alpha {
            None => {
                // d/dt (v vartheta / ||vartheta||)
                let n = field.vartheta.norm();
                let theta = field.vartheta;
                speed * (vartheta_dot / n - theta * (theta.dot(&vartheta_dot) / (n * n * n)))
            }
            Some(alpha) => {
                let hess = Matrix2::from_iterator(ls.hessians[0].iter().copied());
                let v_t = field.v_t;
                let v_t_dot = rot90() * (hess * p_dot) * self.gains.direction.sign();
                let n = v_t.norm();
                let unit = v_t / n;
                let unit_dot = v_t_dot / n - v_t * (v_t.dot(&v_t_dot) / (n * n * n));
                let alpha_dot = if alpha > 0.0 { -field.vartheta.dot(&vartheta_dot) / alpha } else { 0.0 };
                unit * alpha_dot + unit_dot * alpha + vartheta_dot
            }
        }
    }

    /// Full guidance evaluation at `state`, with the field speed set to the
    /// ground speed `||v R(theta) p_0 + wind||`.
    pub fn evaluate(&self, state: &UnicycleState, t: f64, wind: &Vector2<f64>) -> Result<UnicycleFieldSample> {
        let p_dot = state.velocity(self.gains.speed) + wind;
        self.evaluate_with_velocity(&state.position, &p_dot, t)
    }

    pub fn evaluate_with_velocity(
        &self,
        p: &Vector2<f64>,
        p_dot: &Vector2<f64>,
        t: f64,
    ) -> Result<UnicycleFieldSample> {
        let ls = self.path.evaluate(&to_dvec(p))?;
        let field = self.field_from(&ls, t, p_dot.norm())?;
        let f_dot = self.derivative_from(&ls, &field, p_dot);
        let cmd = heading_controller(p_dot, &field.f, &f_dot, self.gains.k_theta);
        Ok(UnicycleFieldSample { field, f_dot, theta_dot_c: cmd.theta_dot_c, omega: cmd.omega, p_dot: *p_dot })
    }
}

/// `omega = theta_dot_c + k_theta f^T E p_dot / v^2` with
/// `theta_dot_c = f^T E^T f_dot / v^2`, where `v = ||f||`.
///
/// Along the closed loop this gives `V_dot = -k_theta (f^T E p_dot)^2 / v^2`
/// for `V = ||p_dot - f||^2 / 2`.
pub fn heading_controller(
    p_dot: &Vector2<f64>,
    f: &Vector2<f64>,
    f_dot: &Vector2<f64>,
    k_theta: f64,
) -> HeadingCommand {
    let e = rot90();
    let v2 = f.norm_squared();
    let theta_dot_c = f.dot(&(e.transpose() * f_dot)) / v2;
    let omega = theta_dot_c + k_theta * f.dot(&(e * p_dot)) / v2;
    HeadingCommand { omega, theta_dot_c }
}

/// Orientation error `p_dot - f` and `V = ||p_dot - f||^2 / 2`.
pub fn alignment_error(p_dot: &Vector2<f64>, f: &Vector2<f64>) -> (Vector2<f64>, f64) {
    let err = p_dot - f;
    (err, 0.5 * err.norm_squared())
}
