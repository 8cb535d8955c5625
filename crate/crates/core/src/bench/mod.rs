//! Parameterized benchmark model families and the timing harness.

mod harness;
mod linear;
mod nonlinear;

pub use harness::{
    interior_point, run_timings, time_family, timings_csv, BenchConfig, ClnlbeamOverrides, FacOverrides, Family,
    LqcpOverrides, TimingRow, CSV_HEADER,
};
pub use linear::{
    build_fac, build_l2ball, build_lqcp, build_mincostflow, build_quadexample, quadexample_expr, Edge, FacParams,
    LqcpParams, MinCostFlowData,
};
pub use nonlinear::{build_clnlbeam, build_sqrt_model, ClnlbeamParams, NewtonSqrt};

use thiserror::Error;

use crate::ad::{AdError, EvaluatorError};
use crate::model::{ModelError, StandardFormError};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("edge {edge} references node {node}, but the network has {n} nodes")]
    EdgeNode { edge: usize, node: usize, n: usize },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    StandardForm(#[from] StandardFormError),
    #[error(transparent)]
    Evaluator(#[from] EvaluatorError),
    #[error(transparent)]
    Derivative(#[from] AdError),
}
