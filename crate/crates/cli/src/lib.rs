//! Scenario front end for the IK-GVF simulator: config parsing, trace CSV
//! output, run summaries and parameter sweeps.

pub mod commands;
pub mod output;
pub mod report;
pub mod scenario;
