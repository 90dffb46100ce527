//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gvf_ik::{
    assemble_ik_gvf, radial_error, rk4_step, simulate, BehaviorSignal, Direction, ErrorLaw, GuidanceGains,
    PathGeometry, SimConfig, SimError, Trace, TraceRecord, UnicycleGuidance, UnicycleState, Vehicle, VehicleKind,
    WindModel,
};
use gvf_lab::output::columns;
use nalgebra::{DVector, Vector2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn circle() -> PathGeometry {
    PathGeometry::circle(100.0, [0.0, 0.0]).unwrap()
}

fn single_integrator(path: PathGeometry, p0: &[f64], k_phi: f64, dt: f64, t_final: f64) -> Trace {
    let gains = GuidanceGains::new(k_phi, 1.0, 1.0).unwrap();
    let mut config =
        SimConfig::new(path, Vehicle::SingleIntegrator { position: DVector::from_column_slice(p0) }, gains);
    config.dt = dt;
    config.t_final = t_final;
    simulate(&config).unwrap()
}

/// `max_t ||phi(t) - phi(0) e^{-k t}||_inf`
fn exponential_error(trace: &Trace, k: f64) -> f64 {
    let phi0 = trace.records[0].phi.clone();
    trace.records.iter().map(|r| (&r.phi - &phi0 * (-k * r.t).exp()).amax()).fold(0.0, f64::max)
}

fn exact_error_dynamics() -> Outcome {
    let start = Instant::now();
    let circle_trace = single_integrator(circle(), &[110.0, 0.0], 0.25, 1e-3, 20.0);
    let phi0 = circle_trace.records[0].phi[0];
    let circle_err = exponential_error(&circle_trace, 0.25);
    let cylinder = PathGeometry::cylinder_plane(1.0, 0.0).unwrap();
    let cylinder_err = exponential_error(&single_integrator(cylinder, &[1.2, 0.0, 0.3], 0.5, 1e-3, 20.0), 0.5);
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        (phi0 - 0.21).abs() < 1e-12 && circle_err < 1e-6 && cylinder_err < 1e-6 && elapsed < 5.0,
        format!("phi(0) {phi0}, circle {circle_err:.2e}, cylinder {cylinder_err:.2e} (< 1e-6), {elapsed:.2}s (< 5s)"),
    )
}

fn annulus_point(rng: &mut StdRng) -> Vector2<f64> {
    // uniform in area over 20 <= rho <= 300
    let (lo, hi) = (20.0f64 * 20.0, 300.0f64 * 300.0);
    let rho = rng.random_range(lo..hi).sqrt();
    let a = rng.random_range(0.0..TAU);
    Vector2::new(rho * a.cos(), rho * a.sin())
}

fn orthogonality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let path = circle();
    let plain = ErrorLaw::new(0.25).unwrap();
    let behavior = ErrorLaw::new(0.25).unwrap().with_behavior(0.25, BehaviorSignal::sinusoid(0.1, 0.55, 0.0)).unwrap();
    let (mut worst, mut dominance_violations) = (0.0f64, 0usize);
    let n = 100_000;
    for i in 0..n {
        let p = annulus_point(&mut rng);
        let p = DVector::from_column_slice(p.as_slice());
        let law = if i % 2 == 0 { &plain } else { &behavior };
        let t = rng.random_range(0.0..100.0);
        let s = assemble_ik_gvf(&path, &p, t, law, Direction::Forward).unwrap();
        let theta = s.converging();
        let scale = s.v_t.norm() * theta.norm();
        if scale > 0.0 {
            worst = worst.max(s.v_t.dot(&theta).abs() / scale);
        }
        if s.f.norm() < s.v_t.norm() {
            dominance_violations += 1;
        }
    }
    outcome(
        worst <= 1e-9 && dominance_violations == 0,
        format!("{n} points, max |v_T.theta|/(|v_T||theta|) = {worst:.2e} (<= 1e-9), ||f|| < ||v_T|| at {dominance_violations}"),
    )
}

fn speed_and_continuity() -> Outcome {
    let (v, k, r) = (15.0, 0.25, 100.0);
    let gains = GuidanceGains::new(k, 0.6, v).unwrap();
    let guidance = UnicycleGuidance::new(circle(), gains, None).unwrap();
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let (mut worst_speed, mut saturated, mut unsaturated) = (0.0f64, 0, 0);
    for _ in 0..100_000 {
        let p = annulus_point(&mut rng);
        let field = guidance.field(&p, 0.0, v).unwrap();
        worst_speed = worst_speed.max((field.f.norm() - v).abs() / v);
        if field.saturated {
            saturated += 1;
        } else {
            unsaturated += 1;
        }
    }

    // boundary ||vartheta|| = v on the circle: k (rho^2 - r^2) / (2 rho) = v
    let rho_star = (v + (v * v + k * k * r * r).sqrt()) / k;
    let (mut worst_jump, mut worst_offset) = (0.0f64, 0.0f64);
    for i in 0..360 {
        let a = i as f64 * TAU / 360.0;
        let p = Vector2::new(rho_star * a.cos(), rho_star * a.sin());
        // evaluate both branches at the speed that equals ||vartheta|| there
        let s = guidance.field(&p, 0.0, v).unwrap().vartheta.norm();
        worst_offset = worst_offset.max((s - v).abs() / v);
        let inner = guidance.field(&p, 0.0, s).unwrap();
        let outer = guidance.field(&p, 0.0, s.next_down()).unwrap();
        assert!(!inner.saturated && outer.saturated);
        worst_jump = worst_jump.max((inner.f - outer.f).norm() / s);
    }
    outcome(
        worst_speed <= 1e-9 && saturated > 0 && unsaturated > 0 && worst_jump <= 1e-9 && worst_offset < 1e-12,
        format!(
            "| ||f|| - v |/v <= {worst_speed:.1e} over {saturated} saturated + {unsaturated} unsaturated; \
             branch jump at rho* = {rho_star:.4} is {worst_jump:.1e} (<= 1e-9)"
        ),
    )
}

fn fd_field_derivative(guidance: &UnicycleGuidance, x: &DVector<f64>, t: f64, h: f64) -> (Vector2<f64>, bool) {
    let speed = guidance.gains().speed;
    let rate = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>, SimError> {
        let st = UnicycleState { position: Vector2::new(x[0], x[1]), heading: x[2] };
        let s = guidance.evaluate(&st, t, &Vector2::zeros()).unwrap();
        Ok(DVector::from_vec(vec![s.p_dot.x, s.p_dot.y, s.omega]))
    };
    let fwd = rk4_step(rate, x, t, h).unwrap();
    let back = rk4_step(rate, x, t, -h).unwrap();
    let at = |x: &DVector<f64>, t: f64| guidance.field(&Vector2::new(x[0], x[1]), t, speed).unwrap();
    let (fp, fm, f0) = (at(&fwd, t + h), at(&back, t - h), at(x, t));
    let same_branch = fp.saturated == f0.saturated && fm.saturated == f0.saturated;
    ((fp.f - fm.f) / (2.0 * h), same_branch)
}

fn derivative_oracle() -> Outcome {
    let cases: [(Vector2<f64>, f64, Option<BehaviorSignal>); 3] = [
        (Vector2::new(150.0, 0.0), FRAC_PI_2, None),
        (Vector2::new(250.0, 30.0), 2.5, None),
        (Vector2::new(60.0, -20.0), 0.3, Some(BehaviorSignal::sinusoid(0.1, 0.55, 0.0))),
    ];
    let (mut worst, mut checked, mut saturated) = (0.0f64, 0usize, 0usize);
    for (p0, heading, behavior) in cases {
        let gains = GuidanceGains::new(0.25, 0.6, 15.0).unwrap().with_k_b(0.25).unwrap();
        let guidance = UnicycleGuidance::new(circle(), gains, behavior.clone()).unwrap();
        let mut config = SimConfig::new(circle(), Vehicle::Unicycle { state: UnicycleState::new(p0, heading) }, gains);
        config.behavior = behavior;
        config.t_final = 40.0;
        let trace = simulate(&config).unwrap();
        for r in trace.records.iter().step_by(20) {
            let x = DVector::from_vec(vec![r.position[0], r.position[1], r.heading.unwrap()]);
            let st = UnicycleState { position: Vector2::new(x[0], x[1]), heading: x[2] };
            let sample = guidance.evaluate(&st, r.t, &Vector2::zeros()).unwrap();
            let (fd, same_branch) = fd_field_derivative(&guidance, &x, r.t, 1e-5);
            if !same_branch {
                continue;
            }
            worst = worst.max((fd - sample.f_dot).norm() / sample.f_dot.norm());
            checked += 1;
            saturated += sample.field.saturated as usize;
        }
    }
    outcome(
        worst < 1e-4 && saturated > 0,
        format!("{checked} samples ({saturated} saturated), max relative error {worst:.2e} (< 1e-4)"),
    )
}

fn unicycle_closed_loop_trace() -> Trace {
    let gains = GuidanceGains::new(0.25, 0.6, 15.0).unwrap();
    let state = UnicycleState::new(Vector2::new(150.0, 0.0), FRAC_PI_2);
    let mut config = SimConfig::new(circle(), Vehicle::Unicycle { state }, gains);
    config.t_final = 60.0;
    config.t_p = 8.0;
    simulate(&config).unwrap()
}

/// First time after which `pred` holds until the end of the trace.
fn settles(trace: &Trace, pred: impl Fn(&TraceRecord) -> bool) -> Option<f64> {
    match trace.records.iter().rposition(|r| !pred(r)) {
        None => Some(trace.records[0].t),
        Some(i) => trace.records.get(i + 1).map(|r| r.t),
    }
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or("never".into(), |t| format!("{t:.2}s"))
}

fn unicycle_closed_loop(trace: &Trace) -> Vec<(&'static str, Outcome)> {
    let mut rises = 0;
    let mut worst_rise = 0.0f64;
    for w in trace.records.windows(2) {
        let rise = w[1].lyapunov_v.unwrap() - w[0].lyapunov_v.unwrap();
        if rise > 1e-8 {
            rises += 1;
        }
        worst_rise = worst_rise.max(rise);
    }
    let aligned = settles(trace, |r| (2.0 * r.lyapunov_v.unwrap()).sqrt() < 1e-3);
    let aligned_at_15 =
        trace.records.iter().find(|r| r.t >= 15.0 - 1e-9).map(|r| (2.0 * r.lyapunov_v.unwrap()).sqrt()).unwrap();
    let converged = settles(trace, |r| r.phi[0].abs() < 0.01);
    let prediction = trace
        .records
        .iter()
        .filter(|r| r.t >= 8.0 - 1e-9)
        .map(|r| (r.phi[0] - r.phi_predicted[0]).abs())
        .fold(0.0, f64::max);
    vec![
        (
            "closed loop: V non-increasing",
            outcome(rises == 0, format!("largest step increase {worst_rise:.1e} (slack 1e-8)")),
        ),
        (
            "closed loop: ||p_dot - f|| < 1e-3 within 15 s",
            outcome(
                aligned.is_some_and(|t| t <= 15.0),
                format!("holds from {}; ||p_dot - f|| = {aligned_at_15:.3e} at t = 15 s", fmt_time(aligned)),
            ),
        ),
        (
            "closed loop: |phi| < 0.01 within 60 s",
            outcome(converged.is_some_and(|t| t <= 60.0), format!("holds from {}", fmt_time(converged))),
        ),
        (
            "closed loop: |phi - phi_p| < 0.05 after t_p = 8 s",
            outcome(
                prediction < 0.05,
                format!("max {prediction:.2e} ({:.2} m radial)", radial_error(prediction, 100.0)),
            ),
        ),
    ]
}

fn behavior_error(wind: WindModel, speed: f64) -> (f64, f64, f64) {
    let gains = GuidanceGains::new(0.25, 0.8, speed).unwrap();
    let state = UnicycleState::new(Vector2::new(150.0, 0.0), FRAC_PI_2);
    let mut config = SimConfig::new(circle(), Vehicle::Unicycle { state }, gains);
    config.behavior = Some(BehaviorSignal::sinusoid(0.1, 0.55, 0.0));
    config.t_final = 300.0;
    config.wind = wind;
    let trace = simulate(&config).unwrap();
    let error = trace
        .records
        .iter()
        .filter(|r| r.t >= 60.0)
        .map(|r| (radial_error(r.phi[0], 100.0) - radial_error(r.gamma.as_ref().unwrap()[0], 100.0)).abs())
        .fold(0.0, f64::max);
    let lo = trace.records.iter().map(|r| r.ground_speed).fold(f64::INFINITY, f64::min);
    let hi = trace.records.iter().map(|r| r.ground_speed).fold(0.0, f64::max);
    (error, lo, hi)
}

fn behavior_tracking() -> Vec<(&'static str, Outcome)> {
    let (calm, _, _) = behavior_error(WindModel::None, 15.0);
    let gust = WindModel::Gust { mean: Vector2::new(1.0, 0.0), amplitude: 0.5, frequency: 0.05, phase: 0.0 };
    let (gusty, lo, hi) = behavior_error(gust, 15.5);
    vec![
        (
            "behavior tracking: no wind, error < 5 m",
            outcome(calm < 5.0, format!("steady-state radial error {calm:.3} m (t >= 60 s)")),
        ),
        (
            "behavior tracking: gust, ground speed in [14, 17], error < 8 m",
            outcome(
                gusty < 8.0 && lo >= 14.0 && hi <= 17.0,
                format!("steady-state radial error {gusty:.3} m, ground speed [{lo:.2}, {hi:.2}] m/s"),
            ),
        ),
    ]
}

fn radial_conversion() -> Outcome {
    let m = radial_error(0.1, 100.0);
    outcome((m - 4.88).abs() <= 0.005, format!("phi = 0.1 on r = 100 -> {m:.4} m"))
}

fn rk4_order() -> Outcome {
    let coarse = exponential_error(&single_integrator(circle(), &[110.0, 0.0], 0.25, 0.2, 20.0), 0.25);
    let fine = exponential_error(&single_integrator(circle(), &[110.0, 0.0], 0.25, 0.1, 20.0), 0.25);
    let ratio = coarse / fine;
    outcome(ratio >= 8.0, format!("error {coarse:.2e} at dt 0.2, {fine:.2e} at dt 0.1, ratio {ratio:.2} (>= 8)"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn gvf_lab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gvf-lab")).args(args).output().expect("gvf-lab runs")
}

fn check_csv(path: &Path, expected: &[String]) -> Result<usize, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    if header != expected {
        return Err(format!("header {header:?}"));
    }
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != expected.len() || !rec.iter().all(|x| x.parse::<f64>().is_ok_and(f64::is_finite)) {
            return Err(format!("row {rows} malformed"));
        }
        rows += 1;
    }
    Ok(rows)
}

fn cli_contract() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    for (name, behavior) in [("fig2", false), ("fig3", true), ("fig4", true)] {
        let cfg = scenarios_dir().join(format!("{name}.cfg"));
        let cfg = cfg.to_str().unwrap();
        if !gvf_lab(&["validate", cfg]).status.success() {
            problems.push(format!("{name}: validate failed"));
            continue;
        }
        let dir = out.path().join(name);
        let start = Instant::now();
        let run = gvf_lab(&["run", cfg, "--out", dir.to_str().unwrap()]);
        let secs = start.elapsed().as_secs_f64();
        if !run.status.success() || secs >= 10.0 {
            problems.push(format!("{name}: run status {:?} in {secs:.1}s", run.status.code()));
            continue;
        }
        match check_csv(&dir.join("trace.csv"), &columns(VehicleKind::Unicycle, 2, behavior)) {
            Ok(rows) => notes.push(format!("{name} {rows} rows {secs:.1}s")),
            Err(e) => problems.push(format!("{name}: {e}")),
        }
        if !dir.join("summary.txt").is_file() {
            problems.push(format!("{name}: no summary.txt"));
        }
    }

    let fig2 = std::fs::read_to_string(scenarios_dir().join("fig2.cfg")).unwrap();
    for (label, text, key) in [
        ("negative radius", fig2.replace("r = 100.0", "r = -1.0"), "path.r"),
        ("unknown key", fig2.replace("k_theta = 0.6", "k_theta = 0.6\nk_gamma = 1.0"), "k_gamma"),
    ] {
        let cfg = out.path().join("bad.cfg");
        std::fs::write(&cfg, text).unwrap();
        for cmd in [&["validate", cfg.to_str().unwrap()][..], &["run", cfg.to_str().unwrap(), "--out", "unused"][..]] {
            let o = gvf_lab(cmd);
            let stderr = String::from_utf8_lossy(&o.stderr);
            if o.status.code() != Some(1) || !stderr.contains(key) {
                problems.push(format!("{label} ({}): exit {:?}, stderr {stderr:?}", cmd[0], o.status.code()));
            }
        }
    }
    if problems.is_empty() {
        outcome(true, format!("{}; malformed configs exit 1 naming the key", notes.join(", ")))
    } else {
        outcome(false, problems.join("; "))
    }
}

fn main() {
    let mut results: Vec<(&'static str, Outcome)> = vec![
        ("exact error dynamics (circle, cylinder-plane)", exact_error_dynamics()),
        ("orthogonality of tangent and converging terms", orthogonality()),
        ("speed preservation and branch continuity", speed_and_continuity()),
        ("field derivative vs finite differences", derivative_oracle()),
    ];
    results.extend(unicycle_closed_loop(&unicycle_closed_loop_trace()));
    results.extend(behavior_tracking());
    results.push(("radial conversion", radial_conversion()));
    results.push(("RK4 order", rk4_order()));
    results.push(("CLI contract", cli_contract()));

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("\n{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
