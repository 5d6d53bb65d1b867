//! Event-triggered parameterized control of discrete-time linear systems
//! with bounded disturbances.
//!
//! Each control input is a linear combination of fixed scalar functions;
//! the coefficients are recomputed only at event instants by solving a
//! convex QCQP that enforces a Lyapunov decrease over the first M steps of
//! the horizon. The trigger compares a worst-case one-step predictor of V
//! against a decaying threshold, which guarantees inter-event times of at
//! least M and ultimate boundedness of V below `(D / sigma)^2`.

pub mod basis;
pub mod config;
pub mod controllers;
pub mod error;
pub mod feasibility;
pub mod horizon;
pub mod linalg;
pub mod plant;
pub mod qcqp;
pub mod report;
pub mod sim;
pub mod trigger;

pub use basis::{BasisKind, BasisSet};
pub use config::{Check, Experiment, ExperimentConfig};
pub use controllers::{
    control_input, ClfController, ControllerKind, ControllerState, EmulationController,
    EventPolicy,
};
pub use error::{EtpcError, Result};
pub use feasibility::Certificate;
pub use horizon::{HorizonData, QcqpProblem};
pub use linalg::{Mat, SymEigExtremes, Vector};
pub use plant::{DisturbanceSource, SystemModel};
pub use qcqp::{SolveReport, SolveStatus};
pub use sim::{GuubReport, IetStats, SimTrace, StopRule};
pub use trigger::TriggerConfig;
