//! Experiment driver: configuration, verification suite, experiments and
//! report emission.

pub mod config;
pub mod experiments;
pub mod jacobian;
pub mod report;
pub mod verify;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{
    concentration_table, invariance_table, jacobian_table, run_concentration, run_invariance,
    run_jacobian, ConcentrationRow, InvarianceRow, JacobianRow,
};
pub use jacobian::{numerical_jacobian_det, JacobianMap, JacobianReport};
pub use report::{Format, Provenance, Table};
pub use verify::{run_verify, CheckResult, VerifyHooks, VerifyReport};
