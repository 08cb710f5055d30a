use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::solver::SimulationResult;

/// Errors raised by the operators, special functions and integrators.
#[derive(Debug, thiserror::Error)]
pub enum FracError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("order {alpha} is an integer; use a classical derivative instead")]
    IntegerOrder { alpha: f64 },

    #[error("order {alpha} is not supported by this scheme ({reason})")]
    UnsupportedOrder { alpha: f64, reason: &'static str },

    #[error("expression is singular at t = {t}")]
    SingularPoint { t: f64 },

    #[error("constraint is singular at t = {t}: |grad| = {norm:e}, state = {state:?}")]
    SingularConstraint { t: f64, norm: f64, state: Vec<f64> },

    #[error("initial data violates the constraint: |f| = {residual:e} > {tolerance:e}")]
    InconsistentInitialData { residual: f64, tolerance: f64 },

    #[error("accuracy loss: achieved error bound {achieved:e}")]
    AccuracyLoss { achieved: f64 },

    #[error("integration diverged at t = {t} (step {step})")]
    Diverged {
        t: f64,
        step: usize,
        partial: Box<SimulationResult>,
    },
}

impl FracError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FracError::Domain(msg.into())
    }
}

pub type Result<T> = core::result::Result<T, FracError>;
