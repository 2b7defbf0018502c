//! Numerical core for optimal control of a viscous stick-slip evolution
//!
//! ```text
//! 0 ∈ ∂|ż| − Δz − σΔż − g   on (0,T) × (0,1),   z(0) = 0
//! ```
//!
//! discretized with P1 finite elements in space and implicit Euler in time.
//! The crate provides the C² smoothing of `|·|`, forward solvers for the
//! smoothed and the non-smooth equation, linearized and adjoint solvers, a
//! first-order optimizer with smoothing continuation, and diagnostics for
//! the limiting optimality system.

pub mod adjoint;
pub mod error;
pub mod fem1d;
pub mod kkt;
pub mod optimizer;
pub mod presets;
pub mod sensitivity;
pub mod smoothing;
pub mod spacetime;
pub mod state;

pub use adjoint::{
    reduced_gradient, reduced_objective, riesz_time, solve_adjoint, AdjointTriple, CostConfig,
};
pub use error::{Error, Result};
pub use fem1d::{Mesh, SymTridiag};
pub use kkt::{check_cone_c, check_nonsmooth_kkt, classify_regimes, KktReport, Regime, RegimeTable};
pub use optimizer::{continuation, minimize_smoothed, ContinuationEntry, OptimizeOptions, OptimizeReport};
pub use sensitivity::{solve_sensitivity, SensitivityTrajectory};
pub use smoothing::SmoothingParam;
pub use state::{
    residual_inclusion, solve_nonsmooth, solve_regularized, step_nonsmooth, step_regularized,
    t_rho_apply, InclusionReport, ProblemConfig, SolverOptions, TimeGrid, Trajectory,
};
