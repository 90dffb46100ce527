use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{GuidanceError, Result};

/// `gamma(t)` together with its first two time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorValue {
    pub gamma: DVector<f64>,
    pub gamma_dot: DVector<f64>,
    pub gamma_ddot: DVector<f64>,
}

impl BehaviorValue {
    pub fn zeros(n: usize) -> Self {
        Self { gamma: DVector::zeros(n), gamma_dot: DVector::zeros(n), gamma_ddot: DVector::zeros(n) }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

type BehaviorFn = dyn Fn(f64) -> BehaviorValue + Send + Sync;

#[derive(Clone)]
enum Signal {
    Sinusoid { amplitude: Vec<f64>, omega: f64, phase: f64 },
    Custom(Arc<BehaviorFn>),
}

/// Time-varying level-set reference the error is driven to track.
///
/// Derivatives are always supplied analytically; the unicycle field
/// derivative consumes `gamma_ddot` directly.
#[derive(Clone)]
pub struct BehaviorSignal {
    signal: Signal,
}

impl fmt::Debug for BehaviorSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.signal {
            Signal::Sinusoid { amplitude, omega, phase } => f
                .debug_struct("Sinusoid")
                .field("amplitude", amplitude)
                .field("omega", omega)
                .field("phase", phase)
                .finish(),
            Signal::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl BehaviorSignal {
    /// `gamma(t) = A sin(omega t + phase)` for a single level function.
    pub fn sinusoid(amplitude: f64, omega: f64, phase: f64) -> Self {
        Self::sinusoid_per_component(vec![amplitude], omega, phase)
    }

    /// One sinusoid per level function, sharing frequency and phase.
    pub fn sinusoid_per_component(amplitude: Vec<f64>, omega: f64, phase: f64) -> Self {
        Self { signal: Signal::Sinusoid { amplitude, omega, phase } }
    }

    pub fn custom<F>(eval: F) -> Self
    where
        F: Fn(f64) -> BehaviorValue + Send + Sync + 'static,
    {
        Self { signal: Signal::Custom(Arc::new(eval)) }
    }

    /// Constant reference (zero derivatives).
    pub fn constant(gamma: Vec<f64>) -> Self {
        let gamma = DVector::from_vec(gamma);
        Self::custom(move |_| BehaviorValue {
            gamma: gamma.clone(),
            gamma_dot: DVector::zeros(gamma.len()),
            gamma_ddot: DVector::zeros(gamma.len()),
        })
    }

    pub fn eval(&self, t: f64) -> BehaviorValue {
        match &self.signal {
            Signal::Sinusoid { amplitude, omega, phase } => {
                let (s, c) = (omega * t + phase).sin_cos();
                let a = DVector::from_column_slice(amplitude);
                BehaviorValue { gamma: &a * s, gamma_dot: &a * (omega * c), gamma_ddot: &a * (-omega * omega * s) }
            }
            Signal::Custom(f) => f(t),
        }
    }

    /// Evaluates and checks the signal has `n` components.
    pub fn eval_checked(&self, t: f64, n: usize) -> Result<BehaviorValue> {
        let value = self.eval(t);
        let bad = [&value.gamma, &value.gamma_dot, &value.gamma_ddot].into_iter().find(|v| v.len() != n);
        match bad {
            Some(v) => Err(GuidanceError::BehaviorDimension { expected: n, got: v.len() }),
            None => Ok(value),
        }
    }
}
