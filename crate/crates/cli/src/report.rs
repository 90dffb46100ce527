//! Run summaries (`summary.txt`).

use std::fmt::Write as _;

use gvf_ik::{radial_error, Trace, TraceRecord};

/// Tracking band for the settling time, in units of `phi`.
pub const SETTLING_BAND: f64 = 0.01;

/// Fraction of the run, counted from the end, treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub final_t: f64,
    pub final_phi: Vec<f64>,
    pub max_abs_phi: f64,
    /// Largest excursion of `phi - gamma` past zero, opposite to its initial sign.
    pub max_overshoot: f64,
    /// First time after which `|phi - gamma| < SETTLING_BAND` holds for the rest of the run.
    pub settling_time: Option<f64>,
    /// Max `|phi - gamma|` over the steady-state window.
    pub steady_state_error: f64,
    /// Same window, in meters along the radius (circle paths only).
    pub steady_state_error_m: Option<f64>,
    /// Final `1/2 ||p_dot - f||^2`; zero for the single integrator, which follows `f` exactly.
    pub final_v: f64,
    pub saturated_fraction: f64,
}

fn tracking_error(r: &TraceRecord) -> Vec<f64> {
    match &r.gamma {
        Some(g) => r.phi.iter().zip(g.iter()).map(|(p, g)| p - g).collect(),
        None => r.phi.iter().copied().collect(),
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn summarize(trace: &Trace, circle_radius: Option<f64>) -> Summary {
    let records = &trace.records;
    let last = records.last().expect("a trace has at least the initial record");
    let errors: Vec<Vec<f64>> = records.iter().map(tracking_error).collect();

    let max_abs_phi = records.iter().map(|r| r.phi.amax()).fold(0.0, f64::max);

    let mut max_overshoot: f64 = 0.0;
    for i in 0..errors[0].len() {
        let initial = errors[0][i];
        if initial == 0.0 {
            continue;
        }
        for e in &errors {
            if e[i] * initial < 0.0 {
                max_overshoot = max_overshoot.max(e[i].abs());
            }
        }
    }

    let settling_time = match errors.iter().rposition(|e| max_abs(e) >= SETTLING_BAND) {
        None => Some(records[0].t),
        Some(i) if i + 1 < records.len() => Some(records[i + 1].t),
        Some(_) => None,
    };

    let t0 = records[0].t;
    let window_start = last.t - STEADY_STATE_FRACTION * (last.t - t0);
    let steady: Vec<usize> = (0..records.len()).filter(|&i| records[i].t >= window_start - 1e-9).collect();
    let steady_state_error = steady.iter().map(|&i| max_abs(&errors[i])).fold(0.0, f64::max);
    let steady_state_error_m = circle_radius.map(|r| {
        steady
            .iter()
            .map(|&i| {
                let rec = &records[i];
                let gamma = rec.gamma.as_ref().map_or(0.0, |g| g[0]);
                (radial_error(rec.phi[0], r) - radial_error(gamma, r)).abs()
            })
            .fold(0.0, f64::max)
    });

    let saturated = records.iter().filter(|r| r.saturated).count();
    Summary {
        final_t: last.t,
        final_phi: last.phi.iter().copied().collect(),
        max_abs_phi,
        max_overshoot,
        settling_time,
        steady_state_error,
        steady_state_error_m,
        final_v: last.lyapunov_v.unwrap_or(0.0),
        saturated_fraction: saturated as f64 / records.len() as f64,
    }
}

impl Summary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let phi: Vec<String> = self.final_phi.iter().map(|x| format!("{x:.6e}")).collect();
        let _ = writeln!(s, "final_t = {}", self.final_t);
        let _ = writeln!(s, "final_phi = [{}]", phi.join(", "));
        let _ = writeln!(s, "max_abs_phi = {:.6e}", self.max_abs_phi);
        let _ = writeln!(s, "max_overshoot = {:.6e}", self.max_overshoot);
        match self.settling_time {
            Some(t) => {
                let _ = writeln!(s, "settling_time = {t:.2}");
            }
            None => {
                let _ = writeln!(s, "settling_time = none");
            }
        }
        let _ = writeln!(s, "steady_state_error = {:.6e}", self.steady_state_error);
        if let Some(m) = self.steady_state_error_m {
            let _ = writeln!(s, "steady_state_error_m = {m:.4}");
        }
        let _ = writeln!(s, "final_v = {:.6e}", self.final_v);
        let _ = writeln!(s, "saturated_fraction = {:.4}", self.saturated_fraction);
        let _ = writeln!(
            s,
            "# errors are phi - gamma (dimensionless); settling band {SETTLING_BAND}, steady state = last {}% of the run",
            STEADY_STATE_FRACTION * 100.0
        );
        s
    }
}
