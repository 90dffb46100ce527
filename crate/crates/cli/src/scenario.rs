//! Scenario files: TOML with one table per concern.
//!
//! ```toml
//! [path]
//! type = "circle"        # circle | ellipse | line | cylinder_plane
//! r = 100.0
//! center = [0.0, 0.0]
//!
//! [vehicle]
//! kind = "unicycle"      # unicycle | single_integrator
//! v = 15.0
//! x0 = 150.0
//! y0 = 0.0
//! theta0 = 1.5707963267948966
//!
//! [gains]
//! k_phi = 0.25
//! k_theta = 0.6
//!
//! [sim]
//! dt = 0.01
//! t_final = 60.0
//! t_p = 8.0
//! ```
//!
//! Optional `[behavior]` (`amplitude`, `omega_gamma`, `phase`) and `[wind]`
//! (`mode`, `mean`, `direction`, `amplitude`, `frequency`, `phase`) tables
//! default to no behavior and no wind. Units are SI; `phi` and `gamma` are
//! dimensionless.

use std::fmt;

use gvf_ik::{
    check_rank, BehaviorSignal, Direction, GuidanceGains, PathGeometry, SimConfig, UnicycleGuidance, UnicycleState,
    Vehicle, WindModel,
};
use nalgebra::{DVector, Vector2};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key, e.g. `path.r`.
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(key), Some(line)) => write!(f, "line {line}: {key}: {}", self.message),
            (Some(key), None) => write!(f, "{key}: {}", self.message),
            (None, Some(line)) => write!(f, "line {line}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub path: PathSection,
    pub vehicle: VehicleSection,
    pub gains: GainsSection,
    pub behavior: Option<BehaviorSection>,
    #[serde(default)]
    pub sim: SimSection,
    pub wind: Option<WindSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    #[serde(rename = "type")]
    pub kind: String,
    pub r: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub z0: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub point: Option<[f64; 2]>,
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub kind: String,
    pub v: Option<f64>,
    pub x0: f64,
    pub y0: f64,
    pub z0: Option<f64>,
    pub theta0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub k_phi: f64,
    pub k_theta: Option<f64>,
    #[serde(alias = "k_B")]
    pub k_b: Option<f64>,
    pub direction: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorSection {
    #[serde(alias = "A")]
    pub amplitude: f64,
    pub omega_gamma: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub t_p: f64,
}

fn default_dt() -> f64 {
    gvf_ik::sim::DEFAULT_DT
}

fn default_t_final() -> f64 {
    60.0
}

impl Default for SimSection {
    fn default() -> Self {
        Self { dt: default_dt(), t_final: default_t_final(), t_p: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSection {
    pub mode: String,
    /// Mean wind speed (m/s).
    #[serde(default)]
    pub mean: f64,
    /// Direction the wind blows toward (rad from +x).
    #[serde(default)]
    pub direction: f64,
    #[serde(default)]
    pub amplitude: f64,
    /// Gust frequency (Hz).
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// A validated scenario ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub config: SimConfig,
    pub warnings: Vec<String>,
}

impl Scenario {
    /// Circle radius, when the path is a circle (for meter conversions).
    pub fn circle_radius(&self) -> Option<f64> {
        self.config.path.as_circle().map(|c| c.radius)
    }
}

/// 1-based line of `key` inside `[section]`, if it can be found.
pub fn locate_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut section_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                section_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    section_line
}

/// Name of the `[section]` that encloses 1-based `line`.
fn section_at(text: &str, line: usize) -> Option<String> {
    text.lines()
        .take(line)
        .filter_map(|l| l.split('#').next()?.trim().strip_prefix('[')?.strip_suffix(']').map(|n| n.trim().to_string()))
        .last()
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let (section, field) = key.split_once('.').unwrap_or((key, ""));
        ConfigError { key: Some(key.to_string()), line: locate_key(self.text, section, field), message: message.into() }
    }

    fn positive(&self, key: &str, value: f64) -> Result<f64, ConfigError> {
        if value.is_finite() && value > 0.0 {
            Ok(value)
        } else {
            Err(self.err(key, format!("must be a finite number > 0, got {value}")))
        }
    }

    fn non_negative(&self, key: &str, value: f64) -> Result<f64, ConfigError> {
        if value.is_finite() && value >= 0.0 {
            Ok(value)
        } else {
            Err(self.err(key, format!("must be a finite number >= 0, got {value}")))
        }
    }

    fn finite(&self, key: &str, value: f64) -> Result<f64, ConfigError> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.err(key, format!("must be finite, got {value}")))
        }
    }

    fn required<T: Copy>(&self, key: &str, value: Option<T>) -> Result<T, ConfigError> {
        value.ok_or_else(|| self.err(key, "missing required key"))
    }

    fn unused<T>(&self, key: &str, value: &Option<T>, context: &str) -> Result<(), ConfigError> {
        match value {
            Some(_) => Err(self.err(key, format!("not used by {context}"))),
            None => Ok(()),
        }
    }
}

/// Parses TOML text into the raw file structure. Unknown keys are errors.
pub fn parse(text: &str) -> Result<ScenarioFile, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        let message = e.message().to_string();
        let key = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
            .map(|k| match line.and_then(|l| section_at(text, l)) {
                Some(section) if !k.contains('.') => format!("{section}.{k}"),
                _ => k.to_string(),
            });
        ConfigError { key, line, message }
    })
}

/// Parses and validates a scenario. Non-fatal findings land in `warnings`.
pub fn load(text: &str) -> Result<Scenario, ConfigError> {
    let file = parse(text)?;
    build(text, file)
}

fn build_path(c: &Checker, s: &PathSection) -> Result<PathGeometry, ConfigError> {
    let ctx = format!("path type {:?}", s.kind);
    let path = match s.kind.as_str() {
        "circle" => {
            for (k, v) in [("path.z0", s.z0), ("path.a", s.a), ("path.b", s.b), ("path.angle", s.angle)] {
                c.unused(k, &v, &ctx)?;
            }
            c.unused("path.point", &s.point, &ctx)?;
            let r = c.positive("path.r", c.required("path.r", s.r)?)?;
            let center = s.center.unwrap_or([0.0, 0.0]);
            c.finite("path.center", center[0] + center[1])?;
            PathGeometry::circle(r, center)
        }
        "ellipse" => {
            for (k, v) in [("path.r", s.r), ("path.z0", s.z0), ("path.angle", s.angle)] {
                c.unused(k, &v, &ctx)?;
            }
            c.unused("path.point", &s.point, &ctx)?;
            let a = c.positive("path.a", c.required("path.a", s.a)?)?;
            let b = c.positive("path.b", c.required("path.b", s.b)?)?;
            let center = s.center.unwrap_or([0.0, 0.0]);
            c.finite("path.center", center[0] + center[1])?;
            PathGeometry::ellipse(a, b, center)
        }
        "line" => {
            for (k, v) in [("path.r", s.r), ("path.z0", s.z0), ("path.a", s.a), ("path.b", s.b)] {
                c.unused(k, &v, &ctx)?;
            }
            c.unused("path.center", &s.center, &ctx)?;
            let point = s.point.unwrap_or([0.0, 0.0]);
            c.finite("path.point", point[0] + point[1])?;
            let angle = c.finite("path.angle", s.angle.unwrap_or(0.0))?;
            Ok(PathGeometry::line(point, angle))
        }
        "cylinder_plane" => {
            for (k, v) in [("path.a", s.a), ("path.b", s.b), ("path.angle", s.angle)] {
                c.unused(k, &v, &ctx)?;
            }
            c.unused("path.center", &s.center, &ctx)?;
            c.unused("path.point", &s.point, &ctx)?;
            let r = c.positive("path.r", c.required("path.r", s.r)?)?;
            let z0 = c.finite("path.z0", s.z0.unwrap_or(0.0))?;
            PathGeometry::cylinder_plane(r, z0)
        }
        other => {
            return Err(c.err(
                "path.type",
                format!("unknown path type {other:?} (expected circle, ellipse, line or cylinder_plane)"),
            ))
        }
    };
    path.map_err(|e| c.err("path.type", e.to_string()))
}

fn build(text: &str, file: ScenarioFile) -> Result<Scenario, ConfigError> {
    let c = Checker { text };
    let path = build_path(&c, &file.path)?;
    let mut warnings = Vec::new();

    let g = &file.gains;
    let k_phi = c.positive("gains.k_phi", g.k_phi)?;
    let direction = match g.direction {
        None => Direction::Forward,
        Some(d) => {
            Direction::from_sign(d).ok_or_else(|| c.err("gains.direction", format!("must be 1 or -1, got {d}")))?
        }
    };
    let k_b = g.k_b.map(|k| c.positive("gains.k_b", k)).transpose()?;

    let v = &file.vehicle;
    let x0 = c.finite("vehicle.x0", v.x0)?;
    let y0 = c.finite("vehicle.y0", v.y0)?;
    let (vehicle, k_theta, speed) = match v.kind.as_str() {
        "unicycle" => {
            if path.dimension() != 2 {
                return Err(c.err("vehicle.kind", "unicycle needs a planar path"));
            }
            c.unused("vehicle.z0", &v.z0, "the unicycle")?;
            let speed = c.positive("vehicle.v", c.required("vehicle.v", v.v)?)?;
            let k_theta = c.positive("gains.k_theta", c.required("gains.k_theta", g.k_theta)?)?;
            let theta0 = c.finite("vehicle.theta0", v.theta0.unwrap_or(0.0))?;
            let state = UnicycleState::new(Vector2::new(x0, y0), theta0);
            (Vehicle::Unicycle { state }, k_theta, speed)
        }
        "single_integrator" => {
            c.unused("vehicle.theta0", &v.theta0, "the single integrator")?;
            c.unused("vehicle.v", &v.v, "the single integrator")?;
            c.unused("gains.k_theta", &g.k_theta, "the single integrator")?;
            let mut position = vec![x0, y0];
            match (path.dimension(), v.z0) {
                (3, z) => position.push(c.finite("vehicle.z0", z.unwrap_or(0.0))?),
                (_, Some(_)) => return Err(c.err("vehicle.z0", "only used with a 3D path")),
                _ => {}
            }
            let vehicle = Vehicle::SingleIntegrator { position: DVector::from_vec(position) };
            (vehicle, 1.0, 1.0)
        }
        other => {
            return Err(c.err(
                "vehicle.kind",
                format!("unknown vehicle kind {other:?} (expected unicycle or single_integrator)"),
            ))
        }
    };

    let mut gains = GuidanceGains { k_phi, k_theta, k_b: None, speed, direction };

    let behavior = match &file.behavior {
        Some(b) => {
            let amplitude = c.finite("behavior.amplitude", b.amplitude)?;
            let omega = c.finite("behavior.omega_gamma", b.omega_gamma)?;
            let phase = c.finite("behavior.phase", b.phase)?;
            gains.k_b = Some(k_b.unwrap_or(k_phi));
            Some(BehaviorSignal::sinusoid_per_component(vec![amplitude; path.codimension()], omega, phase))
        }
        None => {
            if k_b.is_some() {
                warnings.push("gains.k_b is ignored without a [behavior] table".to_string());
            }
            None
        }
    };

    let s = &file.sim;
    let dt = c.positive("sim.dt", s.dt)?;
    let t_final = c.positive("sim.t_final", s.t_final)?;
    if t_final < dt {
        return Err(c.err("sim.t_final", format!("must be at least sim.dt ({dt}), got {t_final}")));
    }
    let t_p = c.non_negative("sim.t_p", s.t_p)?;
    if t_p > t_final {
        return Err(c.err("sim.t_p", format!("must lie within the run (<= {t_final}), got {t_p}")));
    }

    let wind = match &file.wind {
        None => WindModel::None,
        Some(w) => {
            let mean = c.non_negative("wind.mean", w.mean)?;
            let heading = c.finite("wind.direction", w.direction)?;
            let mean_vec = Vector2::new(heading.cos(), heading.sin()) * mean;
            match w.mode.as_str() {
                "none" => WindModel::None,
                "constant" => WindModel::Constant(mean_vec),
                "gust" => WindModel::Gust {
                    mean: mean_vec,
                    amplitude: c.non_negative("wind.amplitude", w.amplitude)?,
                    frequency: c.non_negative("wind.frequency", w.frequency)?,
                    phase: c.finite("wind.phase", w.phase)?,
                },
                other => {
                    return Err(
                        c.err("wind.mode", format!("unknown wind mode {other:?} (expected none, constant or gust)"))
                    )
                }
            }
        }
    };
    if !matches!(wind, WindModel::None) && matches!(vehicle, Vehicle::SingleIntegrator { .. }) {
        return Err(c.err("wind.mode", "wind is only modeled for the unicycle"));
    }

    let mut config = SimConfig::new(path, vehicle, gains);
    config.behavior = behavior;
    config.dt = dt;
    config.t_final = t_final;
    config.t_p = t_p;
    config.wind = wind;
    config.validate().map_err(|e| ConfigError { key: None, line: None, message: e.to_string() })?;

    start_warnings(&config, &mut warnings);
    Ok(Scenario { file, config, warnings })
}

fn start_warnings(config: &SimConfig, warnings: &mut Vec<String>) {
    let p0 = config.vehicle.initial_position();
    let Ok(ls) = config.path.evaluate(&p0) else { return };
    let rank = check_rank(&ls.jacobian);
    if !rank.full_rank {
        warnings.push(format!(
            "rank-deficient start: level-set Jacobian is singular at the initial position (sigma_min {:e})",
            rank.sigma_min
        ));
        return;
    }
    if let Vehicle::Unicycle { state } = &config.vehicle {
        let Ok(guidance) = UnicycleGuidance::new(config.path.clone(), config.gains, config.behavior.clone()) else {
            return;
        };
        if let Ok(sample) = guidance.evaluate(state, 0.0, &config.wind.at(0.0)) {
            let cos = sample.p_dot.dot(&sample.field.f) / (sample.p_dot.norm() * sample.field.f.norm());
            if cos < -1.0 + 1e-9 {
                warnings.push("initial heading is anti-aligned with the field; the heading law stalls there".into());
            }
        }
    }
}
