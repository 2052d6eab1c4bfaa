//! Exact steady-state analysis of n parallel fluid queues fed by one
//! coupled Lévy input stream, verified against Monte Carlo simulation.
//!
//! Queue i receives the cumulative input Y_i = X_1 + ... + X_i, where X_1 is
//! spectrally positive (not a subordinator) and X_2, ..., X_n are
//! subordinators, so the reflected workloads are ordered: Z_1 <= ... <= Z_n.
//! Successive differences W_j = Z_j - Z_{j-1} are the workloads of the
//! corresponding tandem system, and for unit-rate compound-Poisson input the
//! cumulative class workloads of a preemptive-resume priority queue coincide
//! with Z as well.
//!
//! What the crate computes, all in closed form up to one convex root-solve:
//!
//! - [`model`]: the finite-activity input model, its Laplace exponents and
//!   the moments of X(1);
//! - [`psi`]: the root psi_k of phi(beta, ..., beta, tail) = 0 and its
//!   derivatives at zero;
//! - [`steady_state`]: the joint workload transform (backward recursion and
//!   the n = 2 closed form), the n-factor decomposition, the mixture
//!   weights, and stationary means;
//! - [`sim`]: exact event-driven simulation of the reflected system (Euler
//!   grid when a Brownian part is present), the tandem view, and the
//!   preemptive-resume priority oracle;
//! - [`verify`]: a pass/fail harness comparing all of the above.
//!
//! Replications and verification checks run on rayon when the `parallel`
//! feature (default) is enabled; results are bit-identical to the
//! sequential fallback.

pub mod error;
pub mod model;
pub mod psi;
pub mod sim;
pub mod steady_state;
pub mod test_models;
pub mod verify;

pub use error::{Error, Result, ValidationError, Violation};
pub use model::{
    model_from_json, validate, AlphaSpace, AlphaVector, JumpComponent, JumpLaw, LevyModel,
    Marginal, MomentTable, StabilityReport, ValidatedModel,
};
pub use psi::{psi, psi_derivatives_at_zero, psi_shifted, PsiQuery, PsiResult};
pub use sim::{
    priority_oracle, simulate, simulate_path, simulate_sequential, tandem_view, PathRecord,
    PathState, SimConfig, SimEstimate,
};
pub use steady_state::{
    decomposition, decomposition_identity_check, f, lst_2d_closed, lst_w, lst_z, mixture,
    moments_w, DecompositionFactors, FkValue, MixtureSpec, SubordinatorExponent, TransformSpace,
    WorkloadMoments,
};
pub use verify::{default_plan, run as run_verify, CheckSpec, VerifyPlan, VerifyReport};

/// Size the global worker pool (a no-op without the `parallel` feature).
/// Call at most once, before any parallel work.
pub fn configure_threads(threads: usize) -> std::result::Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}
