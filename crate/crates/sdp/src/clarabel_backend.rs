//! Adapter onto Clarabel's conic form `A x + s = b`, `s` in a product cone.
//!
//! Each block contributes the triangle vectorization of `-(F0 + sum x_i F_i)`
//! to `s`, so column `i` of `A` holds `svec(F_i)` and `b = svec(-F0)`.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::problem::SdpProblem;
use crate::{SdpError, SdpSolution, SolveStatus, SolverOptions};

/// Offset of `(row, col)`, `row <= col`, in the column-major upper-triangle
/// vectorization Clarabel expects.
fn svec_index(row: usize, col: usize) -> usize {
    col * (col + 1) / 2 + row
}

pub(crate) fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    let start = Instant::now();
    let n = problem.num_vars;
    let mut blocks = problem.expanded_blocks();
    // Scalar blocks go first so they share one nonnegative cone.
    blocks.sort_by_key(|b| usize::from(b.size != 1));

    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut rhs = Vec::new();
    let mut cones = Vec::new();
    let mut nonneg = 0usize;
    let mut row0 = 0usize;
    for blk in &mut blocks {
        let s = blk.scale_factor();
        if s > 0.0 {
            blk.scale(1.0 / s);
        }
        let dim = blk.size * (blk.size + 1) / 2;
        rhs.resize(row0 + dim, 0.0);
        let weight = |r: usize, c: usize| if r == c { 1.0 } else { std::f64::consts::SQRT_2 };
        for (r, c, v) in blk.constant.iter() {
            rhs[row0 + svec_index(r, c)] = -v * weight(r, c);
        }
        for (var, f) in &blk.coeffs {
            for (r, c, v) in f.iter() {
                ii.push(row0 + svec_index(r, c));
                jj.push(*var);
                vv.push(v * weight(r, c));
            }
        }
        if blk.size == 1 {
            nonneg += 1;
        } else {
            cones.push(SupportedConeT::PSDTriangleConeT(blk.size));
        }
        row0 += dim;
    }
    if nonneg > 0 {
        cones.insert(0, SupportedConeT::NonnegativeConeT(nonneg));
    }

    let a = CscMatrix::new_from_triplets(row0, n, ii, jj, vv);
    let p = CscMatrix::zeros((n, n));
    let cmax = problem.objective.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cs = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
    let q: Vec<f64> = problem.objective.iter().map(|c| c * cs).collect();

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(opts.max_iter as u32)
        .tol_feas(opts.tol_feas)
        .tol_gap_abs(opts.tol_gap)
        .tol_gap_rel(opts.tol_gap)
        .tol_infeas_abs(opts.tol_infeas)
        .tol_infeas_rel(opts.tol_infeas)
        .build()
        .map_err(|e| SdpError::Backend(format!("{e:?}")))?;
    let mut solver =
        DefaultSolver::new(&p, &q, &a, &rhs, &cones, settings).map_err(|e| SdpError::Backend(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };
    let x = sol.x.clone();
    let gap = (sol.obj_val - sol.obj_val_dual).abs() / (1.0 + sol.obj_val.abs().min(sol.obj_val_dual.abs()));
    Ok(SdpSolution {
        objective: problem.objective_value(&x),
        x,
        status,
        primal_residual: f64::NAN,
        relative_gap: gap,
        iterations: sol.iterations as usize,
        solve_time: start.elapsed(),
        backend: "clarabel",
    })
}
