//! Guiding vector fields for single-integrator robots `p_dot = f(p, t)`.
//!
//! The inverse-kinematics field splits `f = v_T + v_C + v_B`: a kernel
//! vector of `J_phi` for progress along the path, plus the least-squares
//! preimage `J^T (J J^T)^-1 u` of a designed error rate `u`. Because
//! `J v_T = 0`, the closed loop obeys `phi_dot = u` exactly wherever `J_phi`
//! has full rank.

use nalgebra::{DMatrix, DVector};

use crate::behavior::{BehaviorSignal, BehaviorValue};
use crate::error::{require_positive, GuidanceError, Result};
use crate::path::{check_rank, LevelSet, PathGeometry};

/// Traversal sense along the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// `+E grad(phi)` in 2D (counter-clockwise on a circle), `grad(phi_1) x grad(phi_2)` in 3D.
    #[default]
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Direction::Forward),
            -1 => Some(Direction::Reverse),
            _ => None,
        }
    }
}

/// Designed error dynamics.
///
/// Without a behavior signal the rate is `u = -k_phi phi`. With one it is
/// `u = gamma_dot - k_B (phi - gamma)`, where `k_B` falls back to `k_phi`
/// when unset.
#[derive(Debug, Clone)]
pub struct ErrorLaw {
    pub k_phi: f64,
    pub k_b: Option<f64>,
    pub behavior: Option<BehaviorSignal>,
}

impl ErrorLaw {
    pub fn new(k_phi: f64) -> Result<Self> {
        require_positive("k_phi", k_phi)?;
        Ok(Self { k_phi, k_b: None, behavior: None })
    }

    pub fn with_behavior(mut self, k_b: f64, behavior: BehaviorSignal) -> Result<Self> {
        require_positive("k_b", k_b)?;
        self.k_b = Some(k_b);
        self.behavior = Some(behavior);
        Ok(self)
    }

    /// Gain acting on `phi - gamma` (or on `phi` without behavior).
    pub fn convergence_gain(&self) -> f64 {
        match (&self.behavior, self.k_b) {
            (Some(_), Some(k_b)) => k_b,
            _ => self.k_phi,
        }
    }

    pub fn behavior_at(&self, t: f64, n: usize) -> Result<Option<BehaviorValue>> {
        self.behavior.as_ref().map(|b| b.eval_checked(t, n)).transpose()
    }
}

/// A field evaluation with its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub phi: DVector<f64>,
    pub f: DVector<f64>,
    pub v_t: DVector<f64>,
    pub v_c: DVector<f64>,
    pub v_b: DVector<f64>,
    /// Effective designed error rate, `J_phi (v_C + v_B)`.
    pub u_phi: DVector<f64>,
    pub gamma: Option<DVector<f64>>,
    pub saturated: bool,
    pub alpha: Option<f64>,
    /// Set when `J_phi` is rank deficient at the sample point.
    pub singular: bool,
}

impl FieldSample {
    /// `v_C + v_B`.
    pub fn converging(&self) -> DVector<f64> {
        &self.v_c + &self.v_b
    }
}

/// Converging terms of the IK field and the error rate they realize.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergingTerms {
    pub v_c: DVector<f64>,
    pub v_b: DVector<f64>,
    pub u_phi: DVector<f64>,
    pub behavior: Option<BehaviorValue>,
}

/// Unnormalized kernel vector of `J` with the crate's sign convention.
/// Zero when `J` is rank deficient.
pub(crate) fn kernel_vector(jacobian: &DMatrix<f64>, direction: Direction) -> DVector<f64> {
    let m = jacobian.ncols();
    let s = direction.sign();
    if m == 2 {
        // E grad(phi), E = [[0, -1], [1, 0]]
        return DVector::from_vec(vec![-s * jacobian[(0, 1)], s * jacobian[(0, 0)]]);
    }
    // generalized cross product of the rows; the cross product for m = 3
    DVector::from_fn(m, |i, _| {
        let minor = jacobian.clone().remove_column(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        s * sign * minor.determinant()
    })
}

/// Solves `(J J^T) x = rhs`. Errors instead of falling back to a least-norm
/// answer when `J` is rank deficient.
pub(crate) fn solve_gram(jacobian: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let rank = check_rank(jacobian);
    if !rank.full_rank {
        return Err(GuidanceError::RankDeficient { sigma_min: rank.sigma_min });
    }
    let gram = jacobian * jacobian.transpose();
    match gram.nrows() {
        1 => Ok(rhs / gram[(0, 0)]),
        2 => {
            let (a, b, c, d) = (gram[(0, 0)], gram[(0, 1)], gram[(1, 0)], gram[(1, 1)]);
            let det = a * d - b * c;
            Ok(DVector::from_vec(vec![(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det]))
        }
        _ => gram.cholesky().map(|ch| ch.solve(rhs)).ok_or(GuidanceError::RankDeficient { sigma_min: rank.sigma_min }),
    }
}

/// `J^T (J J^T)^-1 u`.
pub(crate) fn ik_preimage(ls: &LevelSet, u: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != ls.jacobian.nrows() {
        return Err(GuidanceError::DimensionMismatch { expected: ls.jacobian.nrows(), got: u.len() });
    }
    Ok(ls.jacobian.transpose() * solve_gram(&ls.jacobian, u)?)
}

pub(crate) fn tangent_from(ls: &LevelSet, direction: Direction) -> Result<DVector<f64>> {
    let rank = check_rank(&ls.jacobian);
    if !rank.full_rank {
        return Err(GuidanceError::TangentUndefined { sigma_min: rank.sigma_min });
    }
    Ok(kernel_vector(&ls.jacobian, direction))
}

pub(crate) fn converging_from(ls: &LevelSet, t: f64, law: &ErrorLaw) -> Result<ConvergingTerms> {
    let behavior = law.behavior_at(t, ls.phi.len())?;
    let k = law.convergence_gain();
    let v_c = ik_preimage(ls, &(&ls.phi * -k))?;
    let (v_b, u_phi) = match &behavior {
        Some(b) => {
            let drive = &b.gamma_dot + &b.gamma * k;
            let u = &drive - &ls.phi * k;
            (ik_preimage(ls, &drive)?, u)
        }
        None => (DVector::zeros(ls.dimension()), &ls.phi * -k),
    };
    Ok(ConvergingTerms { v_c, v_b, u_phi, behavior })
}

/// Classic field `f = v_T - J^T phi`.
///
/// Never fails on rank deficiency: the sample is flagged `singular` and the
/// field may vanish there.
pub fn classic_gvf(path: &PathGeometry, p: &DVector<f64>, direction: Direction) -> Result<FieldSample> {
    let ls = path.evaluate(p)?;
    let singular = !check_rank(&ls.jacobian).full_rank;
    let v_t = kernel_vector(&ls.jacobian, direction);
    let v_c = -(ls.jacobian.transpose() * &ls.phi);
    let u_phi = &ls.jacobian * &v_c;
    Ok(FieldSample {
        f: &v_t + &v_c,
        v_b: DVector::zeros(p.len()),
        phi: ls.phi,
        v_t,
        v_c,
        u_phi,
        gamma: None,
        saturated: false,
        alpha: None,
        singular,
    })
}

/// A nonzero vector in `Ker(J_phi)`, unnormalized.
pub fn tangent_field(path: &PathGeometry, p: &DVector<f64>, direction: Direction) -> Result<DVector<f64>> {
    tangent_from(&path.evaluate(p)?, direction)
}

/// `v_C = J^T (J J^T)^-1 u_phi`, so that `J v_C = u_phi`.
pub fn ik_converging_field(path: &PathGeometry, p: &DVector<f64>, u_phi: &DVector<f64>) -> Result<DVector<f64>> {
    ik_preimage(&path.evaluate(p)?, u_phi)
}

/// Solves `J (v_C + v_B) = gamma_dot - k_B (phi - gamma)` and returns
/// `(v_C + v_B, u_effective)`.
pub fn behavior_converging_field(
    path: &PathGeometry,
    p: &DVector<f64>,
    t: f64,
    law: &ErrorLaw,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let terms = converging_from(&path.evaluate(p)?, t, law)?;
    Ok((terms.v_c + terms.v_b, terms.u_phi))
}

/// The full inverse-kinematics field `f = v_T + v_C + v_B`.
pub fn assemble_ik_gvf(
    path: &PathGeometry,
    p: &DVector<f64>,
    t: f64,
    law: &ErrorLaw,
    direction: Direction,
) -> Result<FieldSample> {
    let ls = path.evaluate(p)?;
    assemble_from(ls, t, law, direction)
}

pub(crate) fn assemble_from(ls: LevelSet, t: f64, law: &ErrorLaw, direction: Direction) -> Result<FieldSample> {
    let v_t = tangent_from(&ls, direction)?;
    let terms = converging_from(&ls, t, law)?;
    Ok(FieldSample {
        f: &v_t + &terms.v_c + &terms.v_b,
        phi: ls.phi,
        v_t,
        v_c: terms.v_c,
        v_b: terms.v_b,
        u_phi: terms.u_phi,
        gamma: terms.behavior.map(|b| b.gamma),
        saturated: false,
        alpha: None,
        singular: false,
    })
}

/// `(I - J^T (J J^T)^-1 J) x`, the component of `x` tangent to the level set.
pub fn project_onto_tangent(path: &PathGeometry, p: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    let ls = path.evaluate(p)?;
    if x.len() != ls.dimension() {
        return Err(GuidanceError::DimensionMismatch { expected: ls.dimension(), got: x.len() });
    }
    let normal = ik_preimage(&ls, &(&ls.jacobian * x))?;
    Ok(x - normal)
}
