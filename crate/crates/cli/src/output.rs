//! `trace.csv` writer.
//!
//! The column set depends only on the vehicle kind, the path dimension and
//! whether a behavior reference is configured. Unicycle-only columns
//! (`theta`, `omega`, `theta_dot_c`, `lyapunov_v`) are left out for the single
//! integrator.

use std::io::Write;

use gvf_ik::{Trace, TraceRecord, VehicleKind};

pub fn columns(kind: VehicleKind, dimension: usize, has_behavior: bool) -> Vec<String> {
    let n = dimension - 1;
    let unicycle = kind == VehicleKind::Unicycle;
    let mut cols = vec!["t".to_string(), "px".into(), "py".into()];
    if dimension == 3 {
        cols.push("pz".into());
    }
    if unicycle {
        cols.push("theta".into());
    }
    let indexed = |prefix: &'static str| (1..=n).map(move |i| format!("{prefix}_{i}"));
    cols.extend(indexed("phi"));
    cols.extend(indexed("phi_pred"));
    if has_behavior {
        cols.extend(indexed("gamma"));
    }
    cols.extend(indexed("u_phi"));
    cols.extend(["vt_norm", "vc_norm", "alpha", "saturated"].map(String::from));
    if unicycle {
        cols.extend(["omega", "theta_dot_c", "lyapunov_v"].map(String::from));
    }
    cols.push("ground_speed".into());
    cols
}

/// 15 significant digits; round-trips through any float parser.
pub fn number(x: f64) -> String {
    format!("{x:.14e}")
}

fn row(trace: &Trace, r: &TraceRecord) -> Vec<String> {
    let unicycle = trace.kind == VehicleKind::Unicycle;
    let mut out = vec![number(r.t)];
    out.extend(r.position.iter().map(|&x| number(x)));
    if unicycle {
        out.push(number(r.heading.unwrap_or(f64::NAN)));
    }
    out.extend(r.phi.iter().map(|&x| number(x)));
    out.extend(r.phi_predicted.iter().map(|&x| number(x)));
    if trace.has_behavior {
        match &r.gamma {
            Some(g) => out.extend(g.iter().map(|&x| number(x))),
            None => out.extend(r.phi.iter().map(|_| number(f64::NAN))),
        }
    }
    out.extend(r.u_phi.iter().map(|&x| number(x)));
    out.push(number(r.vt_norm));
    out.push(number(r.vc_norm));
    // no tangential share once the converging term alone exceeds the speed
    out.push(number(r.alpha.unwrap_or(0.0)));
    out.push(if r.saturated { "1" } else { "0" }.into());
    if unicycle {
        out.push(number(r.omega.unwrap_or(f64::NAN)));
        out.push(number(r.theta_dot_c.unwrap_or(f64::NAN)));
        out.push(number(r.lyapunov_v.unwrap_or(f64::NAN)));
    }
    out.push(number(r.ground_speed));
    out
}

pub fn write_trace<W: Write>(trace: &Trace, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(columns(trace.kind, trace.dimension, trace.has_behavior))?;
    for r in &trace.records {
        w.write_record(row(trace, r))?;
    }
    w.flush()?;
    Ok(())
}
