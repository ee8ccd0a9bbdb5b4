//! Linear objectives under block-diagonal linear matrix inequalities.
//!
//! A problem is `min c^T x` subject to `F0_k + sum_i x_i F_ik <= 0` for every
//! block `k` (negative semidefinite) and optional box bounds on `x`. Two
//! backends implement the same contract:
//!
//! * [`Backend::Clarabel`] forwards to the Clarabel conic solver (requires the
//!   default `clarabel` feature).
//! * [`Backend::Reference`] is a self-contained primal-dual interior-point
//!   method. It stores coefficient matrices sparsely and handles problems with
//!   many small blocks and few variables well.
//!
//! Every optimal solution is re-checked with an independent Jacobi eigenvalue
//! routine from [`verify`]; a solution that fails the check is reported as
//! [`SolveStatus::NumericalFailure`].
//!
//! ```
//! use blocksdp::{solve, LmiBlock, SdpProblem, SolverOptions, SolveStatus};
//!
//! // minimize g subject to diag(1, 3) - g I <= 0
//! let mut p = SdpProblem::new(1);
//! p.set_objective(0, 1.0);
//! let mut b = LmiBlock::new(2);
//! b.add_constant(0, 0, 1.0);
//! b.add_constant(1, 1, 3.0);
//! b.add_coeff(0, 0, 0, -1.0);
//! b.add_coeff(0, 1, 1, -1.0);
//! p.push_block(b);
//! let sol = solve(&p, &SolverOptions::default()).unwrap();
//! assert_eq!(sol.status, SolveStatus::Optimal);
//! assert!((sol.x[0] - 3.0).abs() < 1e-6);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::Duration;

#[cfg(feature = "clarabel")]
mod clarabel_backend;
mod ipm;
mod problem;
pub mod sdpa;
pub mod verify;

pub use problem::{LmiBlock, SdpProblem, SymSparse};

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("inconsistent problem dimensions: {0}")]
    Dimension(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("backend not available in this build: {0:?}")]
    Unavailable(Backend),
    #[error("malformed problem file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Clarabel,
    Reference,
}

impl Default for Backend {
    fn default() -> Self {
        if cfg!(feature = "clarabel") {
            Backend::Clarabel
        } else {
            Backend::Reference
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Bound on the largest eigenvalue of each block at an optimal point,
    /// relative to `max(1, largest coefficient magnitude of the block)`.
    pub tol_feas: f64,
    /// Relative duality gap at an optimal point.
    pub tol_gap: f64,
    /// Threshold for accepting an infeasibility or unboundedness certificate.
    pub tol_infeas: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step
    /// (reference backend only).
    pub step_fraction: f64,
    pub backend: Backend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            tol_infeas: 1e-8,
            max_iter: 100,
            step_fraction: 0.98,
            backend: Backend::default(),
        }
    }
}

impl SolverOptions {
    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Final iterate. On non-optimal status this is the best point seen.
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Largest scaled constraint eigenvalue or bound violation at `x`,
    /// clipped below at zero.
    pub primal_residual: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub solve_time: Duration,
    pub backend: &'static str,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Scaled worst constraint violation at `x`, using the Jacobi routine.
pub fn scaled_violation(problem: &SdpProblem, x: &[f64]) -> f64 {
    let mut worst = problem.bound_violation(x).max(0.0);
    for (blk, lmax) in problem.blocks().iter().zip(problem.block_max_eigenvalues(x)) {
        let scale = blk.scale_factor().max(1.0);
        worst = worst.max(lmax / scale);
    }
    worst
}

/// Solves `problem` with the backend selected in `opts`.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let mut sol = match opts.backend {
        Backend::Reference => ipm::solve(problem, opts),
        #[cfg(feature = "clarabel")]
        Backend::Clarabel => clarabel_backend::solve(problem, opts)?,
        #[cfg(not(feature = "clarabel"))]
        Backend::Clarabel => return Err(SdpError::Unavailable(Backend::Clarabel)),
    };
    sol.primal_residual = scaled_violation(problem, &sol.x);
    if sol.status == SolveStatus::Optimal
        && (sol.primal_residual > opts.tol_feas || !(sol.relative_gap <= opts.tol_gap))
    {
        sol.status = SolveStatus::NumericalFailure;
    }
    Ok(sol)
}
