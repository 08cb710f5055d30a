//! Fractional calculus operators, Mittag-Leffler functions and integrators for
//! mechanical systems with fractional nonholonomic constraints.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod frac_ops;
pub mod grid;
pub mod hamilton;
pub mod constrained;
pub mod convergence;
pub mod linalg;
pub mod memory;
pub mod mittag_leffler;
pub mod oscillator;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod variational;

pub use constrained::{
    rhs_general, rhs_linear, rhs_nonlinear_frac_oscillator, FluxPath, LinearConstraint, OscillatorForm,
    Potential, SystemSpec,
};
pub use convergence::{convergence_study, ConvergenceTable};
pub use error::{FracError, Result};
pub use grid::{FracOrder, Grid, SampleSeries};
pub use hamilton::{integrate_hamilton, AffineField, HamiltonSpec};
pub use mittag_leffler::{ml, ml_decomp_f, ml_decomp_g, MLParams};
pub use oscillator::{exact_solution, OscillatorSpec};
pub use solver::{
    integrate_fractional_abm, integrate_second_order, History, IntegratorConfig, Scheme, SimulationResult,
};
pub use variational::variational_residual;
