//! Battery state-of-charge models and battery-constrained shortest path
//! solvers for path planning.
//!
//! The crate covers four SOC-update models (Ohmic drop, first-order RC,
//! nominal voltage and a linear model that can be written as a MILP
//! constraint), a least-squares fit for the linear model, an RK4 reference
//! simulator for constant-power legs, random instance generation, and
//! labeling, branch-and-bound and brute-force solvers for the resulting
//! resource-constrained shortest path problem.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod bench;
pub mod instance;
pub mod models;
pub mod rcspp;
pub mod simulator;

pub use battery::{
    load_battery_config, BatteryConfig, BatteryError, BatteryParams, OcvCurve, SocState,
};
pub use models::{
    fit_linear, linear_delta, nominal_delta, ohmic_voltage, rc_step, FitDomain, LinearFit,
    ModelError, PowerDraw,
};
pub use instance::{
    generate_instance, load_instance, save_instance, Edge, GenConfig, Instance, InstanceError, Node,
};
pub use rcspp::{
    check_solution, export_milp, extend, solve, solve_bnb, solve_bruteforce, solve_labeling,
    CheckReport, ModelKind, PathSolution, ResourceModel, SolveError, SolveOptions, SolveStatus,
    SolverKind,
};
pub use bench::{aggregate, run_bench, BenchError, BenchPlan, BenchRecord, CellStatus, SummaryRow};
