//! Inverse-kinematics guiding vector fields (IK-GVF) for path following.
//!
//! A path is the zero set of `m - 1` implicit functions `phi(p)` in `R^m`.
//! The guiding field is split into a tangential part in `Ker(J_phi)` and a
//! converging part obtained by inverting the level-set kinematics
//! `phi_dot = J_phi p_dot` in the least-squares sense, which makes the error
//! follow a chosen law such as `phi_dot = -k phi` exactly.
//!
//! - [`path`]: implicit paths and their value, Jacobian and Hessians.
//! - [`field`]: classic and inverse-kinematics fields for single integrators.
//! - [`behavior`]: time-varying references `gamma(t)` for the error.
//! - [`unicycle`]: speed-preserving field and heading-rate law for a
//!   constant-speed unicycle.
//! - [`sim`]: RK4 closed-loop simulation and trace recording.
//!
//! `phi` is dimensionless for the normalized circle; use
//! [`path::radial_error`] to read it in meters.

pub mod behavior;
pub mod error;
pub mod field;
pub mod path;
pub mod sim;
pub mod unicycle;

pub use behavior::{BehaviorSignal, BehaviorValue};
pub use error::{GuidanceError, Result};
pub use field::{
    assemble_ik_gvf, behavior_converging_field, classic_gvf, ik_converging_field, project_onto_tangent, tangent_field,
    Direction, ErrorLaw, FieldSample,
};
pub use path::{
    check_rank, check_rank_with, radial_error, CirclePath, CylinderPlanePath3D, EllipsePath, ImplicitPath, LevelSet,
    LinePath, PathGeometry, RankReport, RANK_TOLERANCE,
};
pub use sim::{
    predicted_phi, rk4_step, simulate, simulate_single_integrator, simulate_unicycle, SimConfig, SimError, Trace,
    TraceRecord, Vehicle, VehicleKind, WindModel,
};
pub use unicycle::{
    alignment_error, heading_controller, wrap_angle, GuidanceGains, HeadingCommand, UnicycleField, UnicycleFieldSample,
    UnicycleGuidance, UnicycleState,
};
