//! Fixed-step closed-loop simulation of single-integrator and unicycle
//! vehicles under inverse-kinematics guidance.

use nalgebra::{DVector, Vector2};
use thiserror::Error;

use crate::behavior::BehaviorSignal;
use crate::error::GuidanceError;
use crate::field::{assemble_from, ErrorLaw};
use crate::path::{check_rank, PathGeometry};
use crate::unicycle::{alignment_error, wrap_angle, GuidanceGains, UnicycleGuidance, UnicycleState};

pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("singularity encountered at t = {t:.6} s, position {position:?} (sigma_min {sigma_min:e})")]
    Singularity { t: f64, position: Vec<f64>, sigma_min: f64 },

    #[error("non-finite state at t = {t:.6} s: {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },

    #[error("guidance failed at t = {t:.6} s: {source}")]
    Guidance { t: f64, source: GuidanceError },
}

/// One classical fourth-order Runge-Kutta step of `x_dot = deriv(t, x)`.
pub fn rk4_step<F>(mut deriv: F, state: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>, SimError>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, SimError>,
{
    let mut stage = |t: f64, x: &DVector<f64>| {
        let k = deriv(t, x)?;
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(SimError::NonFinite { t, state: x.iter().copied().collect() })
        }
    };
    let half = 0.5 * dt;
    let k1 = stage(t, state)?;
    let k2 = stage(t + half, &(state + &k1 * half))?;
    let k3 = stage(t + half, &(state + &k2 * half))?;
    let k4 = stage(t + dt, &(state + &k3 * dt))?;
    let next = state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(SimError::NonFinite { t: t + dt, state: next.iter().copied().collect() })
    }
}

/// Additive ground-frame drift on `p_dot`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WindModel {
    #[default]
    None,
    Constant(Vector2<f64>),
    /// `mean + amplitude sin(2 pi frequency t + phase)` along the mean
    /// direction (along +x when the mean is zero). `frequency` is in Hz.
    Gust {
        mean: Vector2<f64>,
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

impl WindModel {
    pub fn at(&self, t: f64) -> Vector2<f64> {
        match *self {
            WindModel::None => Vector2::zeros(),
            WindModel::Constant(w) => w,
            WindModel::Gust { mean, amplitude, frequency, phase } => {
                let axis = if mean.norm() > 0.0 { mean.normalize() } else { Vector2::x() };
                let gust = amplitude * (2.0 * std::f64::consts::PI * frequency * t + phase).sin();
                mean + axis * gust
            }
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = match *self {
            WindModel::None => false,
            WindModel::Constant(w) => !w.iter().all(|v| v.is_finite()),
            WindModel::Gust { mean, amplitude, frequency, phase } => {
                !mean.iter().all(|v| v.is_finite())
                    || !(amplitude >= 0.0 && amplitude.is_finite())
                    || !(frequency >= 0.0 && frequency.is_finite())
                    || !phase.is_finite()
            }
        };
        if bad {
            Err(SimError::InvalidConfig("wind parameters must be finite, amplitude and frequency >= 0".into()))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleKind {
    SingleIntegrator,
    Unicycle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Vehicle {
    SingleIntegrator {
        position: DVector<f64>,
    },
    /// Flies at `gains.speed` through the air.
    Unicycle {
        state: UnicycleState,
    },
}

impl Vehicle {
    pub fn kind(&self) -> VehicleKind {
        match self {
            Vehicle::SingleIntegrator { .. } => VehicleKind::SingleIntegrator,
            Vehicle::Unicycle { .. } => VehicleKind::Unicycle,
        }
    }

    pub fn initial_position(&self) -> DVector<f64> {
        match self {
            Vehicle::SingleIntegrator { position } => position.clone(),
            Vehicle::Unicycle { state } => DVector::from_column_slice(state.position.as_slice()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub path: PathGeometry,
    pub vehicle: Vehicle,
    /// `k_theta` and `speed` only matter for the unicycle.
    pub gains: GuidanceGains,
    pub behavior: Option<BehaviorSignal>,
    pub dt: f64,
    pub t_final: f64,
    /// Start of the predicted-error reference.
    pub t_p: f64,
    pub wind: WindModel,
}

impl SimConfig {
    pub fn new(path: PathGeometry, vehicle: Vehicle, gains: GuidanceGains) -> Self {
        Self { path, vehicle, gains, behavior: None, dt: DEFAULT_DT, t_final: 60.0, t_p: 0.0, wind: WindModel::None }
    }

    pub fn law(&self) -> ErrorLaw {
        self.gains.error_law(self.behavior.clone())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return invalid(format!("t_final must be at least dt, got {}", self.t_final));
        }
        if !self.t_p.is_finite() || self.t_p < 0.0 {
            return invalid(format!("t_p must be non-negative, got {}", self.t_p));
        }
        self.wind.validate()?;
        let m = self.path.dimension();
        match &self.vehicle {
            Vehicle::SingleIntegrator { position } if position.len() != m => {
                invalid(format!("initial position has {} components, path lives in R^{m}", position.len()))
            }
            Vehicle::Unicycle { .. } if m != 2 => invalid(format!("unicycle needs a planar path, got R^{m}")),
            Vehicle::SingleIntegrator { .. } if !matches!(self.wind, WindModel::None) => {
                invalid("wind is only modeled for the unicycle".into())
            }
            _ => Ok(()),
        }
    }

    fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// One row of simulation telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub position: DVector<f64>,
    pub heading: Option<f64>,
    pub phi: DVector<f64>,
    pub phi_predicted: DVector<f64>,
    pub u_phi: DVector<f64>,
    pub gamma: Option<DVector<f64>>,
    pub vt_norm: f64,
    /// `||v_C + v_B||`.
    pub vc_norm: f64,
    pub alpha: Option<f64>,
    pub saturated: bool,
    pub omega: Option<f64>,
    pub theta_dot_c: Option<f64>,
    pub lyapunov_v: Option<f64>,
    pub ground_speed: f64,
}

impl TraceRecord {
    pub fn is_finite(&self) -> bool {
        let opt = |x: Option<f64>| x.is_none_or(f64::is_finite);
        let all = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        self.t.is_finite()
            && all(&self.position)
            && all(&self.phi)
            && all(&self.phi_predicted)
            && all(&self.u_phi)
            && self.gamma.as_ref().is_none_or(all)
            && self.vt_norm.is_finite()
            && self.vc_norm.is_finite()
            && self.ground_speed.is_finite()
            && opt(self.heading)
            && opt(self.alpha)
            && opt(self.omega)
            && opt(self.theta_dot_c)
            && opt(self.lyapunov_v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub kind: VehicleKind,
    pub dimension: usize,
    pub has_behavior: bool,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }
}

/// Runs the configured vehicle.
pub fn simulate(config: &SimConfig) -> Result<Trace, SimError> {
    match config.vehicle {
        Vehicle::SingleIntegrator { .. } => simulate_single_integrator(config),
        Vehicle::Unicycle { .. } => simulate_unicycle(config),
    }
}

fn rank_guard(path: &PathGeometry, p: &DVector<f64>, t: f64) -> Result<(), SimError> {
    let ls = path.evaluate(p).map_err(|source| SimError::Guidance { t, source })?;
    let rank = check_rank(&ls.jacobian);
    if rank.full_rank {
        Ok(())
    } else {
        Err(SimError::Singularity { t, position: p.iter().copied().collect(), sigma_min: rank.sigma_min })
    }
}

fn guidance_error(t: f64, position: &[f64], source: GuidanceError) -> SimError {
    match source {
        GuidanceError::RankDeficient { sigma_min } | GuidanceError::TangentUndefined { sigma_min } => {
            SimError::Singularity { t, position: position.to_vec(), sigma_min }
        }
        source => SimError::Guidance { t, source },
    }
}

/// `p_dot = f(p, t)` with the inverse-kinematics field.
pub fn simulate_single_integrator(config: &SimConfig) -> Result<Trace, SimError> {
    config.validate()?;
    let Vehicle::SingleIntegrator { position } = &config.vehicle else {
        return Err(SimError::InvalidConfig("expected a single-integrator vehicle".into()));
    };
    let law = config.law();
    let direction = config.gains.direction;
    let path = &config.path;
    let field = |t: f64, p: &DVector<f64>| {
        rank_guard(path, p, t)?;
        let ls = path.evaluate(p).map_err(|e| guidance_error(t, p.as_slice(), e))?;
        assemble_from(ls, t, &law, direction).map_err(|e| guidance_error(t, p.as_slice(), e))
    };

    let steps = config.steps();
    let mut records = Vec::with_capacity(steps + 1);
    let mut p = position.clone();
    for k in 0..=steps {
        let t = k as f64 * config.dt;
        let s = field(t, &p)?;
        let converging = &s.v_c + &s.v_b;
        records.push(TraceRecord {
            t,
            position: p.clone(),
            heading: None,
            phi_predicted: DVector::zeros(s.phi.len()),
            phi: s.phi,
            u_phi: s.u_phi,
            gamma: s.gamma,
            vt_norm: s.v_t.norm(),
            vc_norm: converging.norm(),
            alpha: None,
            saturated: false,
            omega: None,
            theta_dot_c: None,
            lyapunov_v: None,
            ground_speed: s.f.norm(),
        });
        if k == steps {
            break;
        }
        p = rk4_step(|t, x| field(t, x).map(|s| s.f), &p, t, config.dt)?;
    }
    let mut trace = Trace {
        kind: VehicleKind::SingleIntegrator,
        dimension: path.dimension(),
        has_behavior: config.behavior.is_some(),
        records,
    };
    fill_prediction(&mut trace, &law, config.t_p);
    Ok(trace)
}

/// `p_dot = v R(theta) p_0 + w(t)`, `theta_dot = omega`, with the field
/// speed taken as the ground speed.
pub fn simulate_unicycle(config: &SimConfig) -> Result<Trace, SimError> {
    config.validate()?;
    let Vehicle::Unicycle { state } = &config.vehicle else {
        return Err(SimError::InvalidConfig("expected a unicycle vehicle".into()));
    };
    let guidance = UnicycleGuidance::new(config.path.clone(), config.gains, config.behavior.clone())
        .map_err(|source| SimError::Guidance { t: 0.0, source })?;
    let wind = config.wind;
    let sample = |t: f64, x: &DVector<f64>| {
        let st = UnicycleState { position: Vector2::new(x[0], x[1]), heading: x[2] };
        guidance.evaluate(&st, t, &wind.at(t)).map_err(|e| guidance_error(t, &x.as_slice()[..2], e))
    };

    let steps = config.steps();
    let mut records = Vec::with_capacity(steps + 1);
    let mut x = DVector::from_vec(vec![state.position.x, state.position.y, state.heading]);
    for k in 0..=steps {
        let t = k as f64 * config.dt;
        let s = sample(t, &x)?;
        let (_, lyapunov) = alignment_error(&s.p_dot, &s.field.f);
        let field = &s.field;
        records.push(TraceRecord {
            t,
            position: x.rows(0, 2).into_owned(),
            heading: Some(x[2]),
            phi: DVector::from_element(1, field.phi),
            phi_predicted: DVector::zeros(1),
            u_phi: DVector::from_element(1, field.u_phi),
            gamma: field.behavior.as_ref().map(|b| b.gamma.clone()),
            vt_norm: field.v_t.norm(),
            vc_norm: field.vartheta.norm(),
            alpha: field.alpha,
            saturated: field.saturated,
            omega: Some(s.omega),
            theta_dot_c: Some(s.theta_dot_c),
            lyapunov_v: Some(lyapunov),
            ground_speed: s.p_dot.norm(),
        });
        if k == steps {
            break;
        }
        x = rk4_step(
            |t, x| {
                let s = sample(t, x)?;
                Ok(DVector::from_vec(vec![s.p_dot.x, s.p_dot.y, s.omega]))
            },
            &x,
            t,
            config.dt,
        )?;
        x[2] = wrap_angle(x[2]);
    }
    let mut trace =
        Trace { kind: VehicleKind::Unicycle, dimension: 2, has_behavior: config.behavior.is_some(), records };
    fill_prediction(&mut trace, guidance.law(), config.t_p);
    Ok(trace)
}

fn fill_prediction(trace: &mut Trace, law: &ErrorLaw, t_p: f64) {
    let Some(start) = trace.records.iter().position(|r| r.t >= t_p - 1e-9) else {
        return;
    };
    let t_start = trace.records[start].t;
    let phi_start = trace.records[start].phi.clone();
    let predicted = predicted_phi(law, t_start, &phi_start, &trace.times());
    for (record, p) in trace.records.iter_mut().zip(predicted) {
        record.phi_predicted = p;
    }
}

/// Reference error evolution from `phi(t_p)` under the designed dynamics.
///
/// Without behavior `phi_p(t) = phi(t_p) e^{-k (t - t_p)}`. With behavior,
/// `phi_p_dot = gamma_dot - k (phi_p - gamma)` is linear in `phi_p - gamma`,
/// so `phi_p(t) = gamma(t) + (phi(t_p) - gamma(t_p)) e^{-k (t - t_p)}`.
/// Samples before `t_p` are zero.
pub fn predicted_phi(law: &ErrorLaw, t_p: f64, phi_at_tp: &DVector<f64>, times: &[f64]) -> Vec<DVector<f64>> {
    let k = law.convergence_gain();
    let n = phi_at_tp.len();
    let gamma_at =
        |t: f64| -> DVector<f64> { law.behavior.as_ref().map_or_else(|| DVector::zeros(n), |b| b.eval(t).gamma) };
    let offset = phi_at_tp - gamma_at(t_p);
    times
        .iter()
        .map(|&t| if t < t_p { DVector::zeros(n) } else { gamma_at(t) + &offset * (-k * (t - t_p)).exp() })
        .collect()
}
