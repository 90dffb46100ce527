//! `run`, `validate` and `sweep`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 simulation error.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use gvf_ik::{simulate, SimError};
use rayon::prelude::*;
use thiserror::Error;

use crate::output::{number, write_trace};
use crate::report::{summarize, Summary};
use crate::scenario::{self, ConfigError, Scenario};

pub const THREADS_ENV: &str = "GVF_LAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Sim(_) => 2,
        }
    }

    fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io { context: "writing CSV output".into(), source: e.into() }
    }
}

pub fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))
}

/// Parses and validates without simulating.
pub fn validate(config_path: &Path) -> Result<Scenario, CliError> {
    let text = read_config(config_path)?;
    Ok(scenario::load(&text)?)
}

/// Simulates a loaded scenario and writes `trace.csv` and `summary.txt` to `out`.
pub fn run_scenario(scenario: &Scenario, out: &Path) -> Result<Summary, CliError> {
    let trace = simulate(&scenario.config)?;
    fs::create_dir_all(out).map_err(CliError::io(format!("creating {}", out.display())))?;
    let csv_path = out.join("trace.csv");
    let file = fs::File::create(&csv_path).map_err(CliError::io(format!("creating {}", csv_path.display())))?;
    write_trace(&trace, BufWriter::new(file))?;
    let summary = summarize(&trace, scenario.circle_radius());
    let summary_path = out.join("summary.txt");
    fs::write(&summary_path, summary.render()).map_err(CliError::io(format!("writing {}", summary_path.display())))?;
    Ok(summary)
}

pub fn run(config_path: &Path, out: &Path) -> Result<Summary, CliError> {
    let scenario = validate(config_path)?;
    run_scenario(&scenario, out)
}

/// Replaces `section.key` in the scenario text with `value`.
///
/// Integer-typed keys stay integers when the value is integral.
pub fn override_key(text: &str, key: &str, value: f64) -> Result<String, ConfigError> {
    let bad = |message: String| ConfigError { key: Some(key.to_string()), line: None, message };
    let (section, field) =
        key.split_once('.').ok_or_else(|| bad("sweep parameter must be a dotted key such as gains.k_theta".into()))?;
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| bad(e.message().to_string()))?;
    let table = doc
        .entry(section)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| bad(format!("[{section}] is not a table")))?;
    let new_value = match table.get(field) {
        Some(toml::Value::Integer(_)) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
        Some(toml::Value::Integer(_) | toml::Value::Float(_)) | None => toml::Value::Float(value),
        Some(_) => return Err(bad("only numeric keys can be swept".into())),
    };
    table.insert(field.to_string(), new_value);
    toml::to_string(&doc).map_err(|e| bad(e.to_string()))
}

pub fn parse_values(list: &str) -> Result<Vec<f64>, ConfigError> {
    let values: Result<Vec<f64>, _> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| s.to_string()))
        .collect();
    match values {
        Ok(v) if v.is_empty() => Err(ConfigError { key: None, line: None, message: "no sweep values given".into() }),
        Ok(v) if v.iter().all(|x| x.is_finite()) => Ok(v),
        Ok(_) => Err(ConfigError { key: None, line: None, message: "sweep values must be finite".into() }),
        Err(s) => Err(ConfigError { key: None, line: None, message: format!("not a number: {s:?}") }),
    }
}

#[derive(Debug)]
pub struct SweepRun {
    pub value: f64,
    pub dir: PathBuf,
    pub outcome: Result<Summary, CliError>,
}

impl SweepRun {
    fn status(&self) -> &'static str {
        match &self.outcome {
            Ok(_) => "ok",
            Err(CliError::Sim(_)) => "simulation_error",
            Err(_) => "config_error",
        }
    }
}

/// Worker count: `GVF_LAB_THREADS` when set to a positive integer, else rayon's default.
pub fn sweep_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub fn sweep(config_path: &Path, param: &str, values: &[f64], out: &Path) -> Result<Vec<SweepRun>, CliError> {
    let text = read_config(config_path)?;
    scenario::load(&text)?;
    // fail fast on a bad key before spawning anything
    if let Some(&first) = values.first() {
        override_key(&text, param, first)?;
    }
    fs::create_dir_all(out).map_err(CliError::io(format!("creating {}", out.display())))?;

    let one = |&value: &f64| {
        let dir = out.join(format!("{param}={value}"));
        let outcome = override_key(&text, param, value)
            .map_err(CliError::from)
            .and_then(|t| scenario::load(&t).map_err(CliError::from))
            .and_then(|s| run_scenario(&s, &dir));
        SweepRun { value, dir, outcome }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = sweep_threads() {
        builder = builder.num_threads(n);
    }
    let runs: Vec<SweepRun> = match builder.build() {
        Ok(pool) => pool.install(|| values.par_iter().map(one).collect()),
        Err(_) => values.iter().map(one).collect(),
    };

    let agg_path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&agg_path)?;
    w.write_record(["value", "status", "settling_time", "max_abs_phi", "final_v", "steady_state_error", "message"])?;
    for r in &runs {
        let fields = match &r.outcome {
            Ok(s) => [
                s.settling_time.map(number).unwrap_or_default(),
                number(s.max_abs_phi),
                number(s.final_v),
                number(s.steady_state_error),
                String::new(),
            ],
            Err(e) => [String::new(), String::new(), String::new(), String::new(), e.to_string()],
        };
        let mut record = vec![number(r.value), r.status().to_string()];
        record.extend(fields);
        w.write_record(record)?;
    }
    w.flush().map_err(CliError::io(format!("writing {}", agg_path.display())))?;
    Ok(runs)
}

/// Exit code for a finished sweep: the first failing run decides, config errors first.
pub fn sweep_exit_code(runs: &[SweepRun]) -> i32 {
    let codes = runs.iter().filter_map(|r| r.outcome.as_ref().err().map(CliError::exit_code));
    codes.min().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_keeps_integers() {
        let text = "[gains]\nk_phi = 0.25\ndirection = 1\n";
        let out = override_key(text, "gains.direction", -1.0).unwrap();
        assert!(out.contains("direction = -1\n"), "{out}");
        let out = override_key(text, "gains.k_phi", 1.0).unwrap();
        assert!(out.contains("k_phi = 1.0"), "{out}");
    }

    #[test]
    fn override_adds_missing_key() {
        let out = override_key("[wind]\nmode = \"constant\"\n", "wind.mean", 2.0).unwrap();
        assert!(out.contains("mean = 2.0"));
    }

    #[test]
    fn override_rejects_bad_keys() {
        assert!(override_key("[path]\ntype = \"circle\"\n", "path.type", 1.0).is_err());
        assert!(override_key("[path]\n", "nodot", 1.0).is_err());
    }

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("0.2, 0.4,1").unwrap(), vec![0.2, 0.4, 1.0]);
        assert!(parse_values("0.2,x").is_err());
        assert!(parse_values(" ").is_err());
        assert!(parse_values("inf").is_err());
    }
}
