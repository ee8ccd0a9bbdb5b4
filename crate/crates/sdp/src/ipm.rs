//! Reference primal-dual interior-point method.
//!
//! The constraint `F0 + sum x_i F_i <= 0` is read as the dual slack of the
//! standard pair
//!
//! ```text
//!   (P) min <C, X>  s.t. <A_i, X> = b_i, X >= 0
//!   (D) max b^T y   s.t. S = C - sum y_i A_i >= 0
//! ```
//!
//! with `C = -F0`, `A_i = F_i`, `b = -c` and `y = x`. Iterates follow the
//! HKM search direction with a Mehrotra predictor-corrector from an
//! infeasible starting point. Every block is normalized to unit largest
//! coefficient and the objective to unit largest entry before iterating, so
//! the iterates do not depend on how the caller scaled the data.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::problem::{LmiBlock, SdpProblem};
use crate::{SdpSolution, SolveStatus, SolverOptions};

struct Prepared {
    m: usize,
    blocks: Vec<LmiBlock>,
    /// `b = -c`, already scaled.
    b: DVector<f64>,
}

fn prepare(problem: &SdpProblem) -> Prepared {
    let mut blocks = problem.expanded_blocks();
    for blk in &mut blocks {
        let s = blk.scale_factor();
        if s > 0.0 {
            blk.scale(1.0 / s);
        }
    }
    let cmax = problem.objective.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cs = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
    let b = DVector::from_iterator(problem.num_vars, problem.objective.iter().map(|c| -c * cs));
    Prepared {
        m: problem.num_vars,
        blocks,
        b,
    }
}

/// Largest step `a` in `(0, inf]` keeping `x + a dx` positive semidefinite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    if n == 1 {
        return if dx[(0, 0)] < 0.0 {
            -x[(0, 0)] / dx[(0, 0)]
        } else {
            f64::INFINITY
        };
    }
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let linv = match l.clone().try_inverse() {
        Some(v) => v,
        None => return 0.0,
    };
    let w = &linv * dx * linv.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let lmin = w.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn sym_inverse(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = s.nrows();
    if n == 1 {
        let v = s[(0, 0)];
        return if v > 0.0 {
            Some(DMatrix::from_element(1, 1, 1.0 / v))
        } else {
            None
        };
    }
    let inv = s.clone().cholesky()?.inverse();
    Some((&inv + inv.transpose()) * 0.5)
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    y: DVector<f64>,
}

impl Prepared {
    fn op_a(&self, mats: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, x) in self.blocks.iter().zip(mats) {
            for (var, f) in &blk.coeffs {
                out[*var] += f.trace_with(x);
            }
        }
        out
    }

    fn op_at(&self, k: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let blk = &self.blocks[k];
        let mut m = DMatrix::zeros(blk.size, blk.size);
        for (var, f) in &blk.coeffs {
            f.add_to_dense(&mut m, y[*var]);
        }
        m
    }

    fn c_block(&self, k: usize) -> DMatrix<f64> {
        let blk = &self.blocks[k];
        let mut m = DMatrix::zeros(blk.size, blk.size);
        blk.constant.add_to_dense(&mut m, -1.0);
        m
    }

    fn initial_point(&self) -> Iterate {
        let mut x = Vec::with_capacity(self.blocks.len());
        let mut s = Vec::with_capacity(self.blocks.len());
        for (k, blk) in self.blocks.iter().enumerate() {
            let n = blk.size as f64;
            let mut xi: f64 = 10.0_f64.max(n.sqrt());
            let mut eta: f64 = 10.0_f64.max(n.sqrt());
            for (var, f) in &blk.coeffs {
                let fa = f.frobenius_sq().sqrt();
                xi = xi.max(n * (1.0 + self.b[*var].abs()) / (1.0 + fa));
                eta = eta.max(fa);
            }
            eta = eta.max(self.c_block(k).norm());
            x.push(DMatrix::identity(blk.size, blk.size) * xi);
            s.push(DMatrix::identity(blk.size, blk.size) * eta);
        }
        Iterate {
            x,
            s,
            y: DVector::zeros(self.m),
        }
    }

    /// Schur complement `M_ij = <A_i, X A_j S^-1>`.
    fn schur(&self, it: &Iterate, sinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut mat = DMatrix::zeros(self.m, self.m);
        for (k, blk) in self.blocks.iter().enumerate() {
            let n = blk.size;
            let x = &it.x[k];
            for (jj, (vj, fj)) in blk.coeffs.iter().enumerate() {
                let mut xf = DMatrix::zeros(n, n);
                for (r, c, v) in fj.iter() {
                    for row in 0..n {
                        xf[(row, c)] += v * x[(row, r)];
                    }
                    if r != c {
                        for row in 0..n {
                            xf[(row, r)] += v * x[(row, c)];
                        }
                    }
                }
                let g = xf * &sinv[k];
                for (vi, fi) in blk.coeffs[jj..].iter() {
                    mat[(*vi, *vj)] += fi.trace_with(&g);
                }
            }
        }
        for i in 0..self.m {
            for j in 0..i {
                mat[(j, i)] = mat[(i, j)];
            }
        }
        for i in 0..self.m {
            if mat[(i, i)] == 0.0 {
                mat[(i, i)] = 1.0;
            }
        }
        mat
    }
}

enum SchurFactor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn new(mut m: DMatrix<f64>) -> Option<Self> {
        if let Some(c) = m.clone().cholesky() {
            return Some(SchurFactor::Chol(c));
        }
        let dmax = (0..m.nrows()).fold(0.0_f64, |a, i| a.max(m[(i, i)].abs()));
        for i in 0..m.nrows() {
            m[(i, i)] += 1e-12 * dmax.max(1.0);
        }
        if let Some(c) = m.clone().cholesky() {
            return Some(SchurFactor::Chol(c));
        }
        let lu = m.lu();
        if lu.is_invertible() {
            Some(SchurFactor::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            SchurFactor::Chol(c) => c.solve(rhs),
            SchurFactor::Lu(l) => l.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
        }
    }
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
}

pub(crate) fn solve(problem: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let start = Instant::now();
    let prep = prepare(problem);
    let m = prep.m;
    let nblk = prep.blocks.len();
    let total_dim: usize = prep.blocks.iter().map(|b| b.size).sum();

    let finish = |x: Vec<f64>, status: SolveStatus, iterations: usize, gap: f64| {
        let objective = problem.objective_value(&x);
        SdpSolution {
            x,
            objective,
            status,
            primal_residual: f64::NAN,
            relative_gap: gap,
            iterations,
            solve_time: start.elapsed(),
            backend: "reference-ipm",
        }
    };

    if nblk == 0 {
        // Only an objective: bounded iff it is identically zero.
        let status = if problem.objective.iter().all(|c| *c == 0.0) {
            SolveStatus::Optimal
        } else {
            SolveStatus::Unbounded
        };
        return finish(vec![0.0; m], status, 0, 0.0);
    }

    let c_blocks: Vec<DMatrix<f64>> = (0..nblk).map(|k| prep.c_block(k)).collect();
    let c_norm = c_blocks.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();
    let b_norm = prep.b.norm();

    let mut it = prep.initial_point();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut stalls = 0usize;

    for iter in 0..opts.max_iter {
        let Some(sinv) = it.s.iter().map(sym_inverse).collect::<Option<Vec<_>>>() else {
            let (x, gap) = best.map(|b| (b.1, b.2)).unwrap_or((vec![0.0; m], f64::NAN));
            return finish(x, SolveStatus::NumericalFailure, iter, gap);
        };

        let rd: Vec<DMatrix<f64>> = (0..nblk)
            .map(|k| &c_blocks[k] - &it.s[k] - prep.op_at(k, &it.y))
            .collect();
        let ax = prep.op_a(&it.x);
        let rp = &prep.b - &ax;

        let gap: f64 = it.x.iter().zip(&it.s).map(|(x, s)| inner(x, s)).sum();
        let mu = gap / total_dim as f64;
        let pobj: f64 = it.x.iter().zip(&c_blocks).map(|(x, c)| inner(x, c)).sum();
        let dobj = prep.b.dot(&it.y);
        let rel_gap = gap / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + c_norm);

        let merit = rel_gap.max(pinf).max(dinf);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, it.y.iter().copied().collect(), rel_gap));
        }

        if rel_gap <= opts.tol_gap && pinf <= opts.tol_feas && dinf <= opts.tol_feas {
            return finish(it.y.iter().copied().collect(), SolveStatus::Optimal, iter, rel_gap);
        }

        // Certificate that no x satisfies the constraints: X >= 0 with
        // A(X) ~ 0 and <C, X> < 0.
        if pobj < 0.0 && ax.norm() <= opts.tol_infeas * (-pobj) {
            return finish(it.y.iter().copied().collect(), SolveStatus::Infeasible, iter, rel_gap);
        }
        // Recession direction of the constraints along which the objective
        // decreases without bound.
        if dobj > 0.0 {
            let cr: f64 = (0..nblk)
                .map(|k| (&c_blocks[k] - &rd[k]).norm_squared())
                .sum::<f64>()
                .sqrt();
            if cr <= opts.tol_infeas * dobj && pinf > opts.tol_feas {
                return finish(it.y.iter().copied().collect(), SolveStatus::Unbounded, iter, rel_gap);
            }
        }

        let Some(factor) = SchurFactor::new(prep.schur(&it, &sinv)) else {
            let (x, gap) = best.map(|b| (b.1, b.2)).unwrap_or((vec![0.0; m], f64::NAN));
            return finish(x, SolveStatus::NumericalFailure, iter, gap);
        };

        let direction = |sigma_mu: f64, corr: Option<&[DMatrix<f64>]>| -> Direction {
            let h: Vec<DMatrix<f64>> = (0..nblk)
                .map(|k| {
                    let n = it.x[k].nrows();
                    let mut t = &it.x[k] * &rd[k];
                    if let Some(c) = corr {
                        t += &c[k];
                    }
                    for i in 0..n {
                        t[(i, i)] -= sigma_mu;
                    }
                    t * &sinv[k]
                })
                .collect();
            let rhs = &prep.b + prep.op_a(&h);
            let dy = factor.solve(&rhs);
            let mut dx = Vec::with_capacity(nblk);
            let mut ds = Vec::with_capacity(nblk);
            for k in 0..nblk {
                let n = it.x[k].nrows();
                let dsk = &rd[k] - prep.op_at(k, &dy);
                let mut t = &it.x[k] * &dsk;
                if let Some(c) = corr {
                    t += &c[k];
                }
                for i in 0..n {
                    t[(i, i)] -= sigma_mu;
                }
                let dxk = -&it.x[k] - t * &sinv[k];
                dx.push((&dxk + dxk.transpose()) * 0.5);
                ds.push(dsk);
            }
            Direction { dx, ds, dy }
        };

        let steps = |d: &Direction| -> (f64, f64) {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..nblk {
                ap = ap.min(max_step(&it.x[k], &d.dx[k]));
                ad = ad.min(max_step(&it.s[k], &d.ds[k]));
            }
            (ap, ad)
        };

        let pred = direction(0.0, None);
        let (ap, ad) = steps(&pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let gap_aff: f64 = (0..nblk)
            .map(|k| inner(&(&it.x[k] + &pred.dx[k] * ap), &(&it.s[k] + &pred.ds[k] * ad)))
            .sum();
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);
        let corr: Vec<DMatrix<f64>> = (0..nblk).map(|k| &pred.dx[k] * &pred.ds[k]).collect();
        let dir = direction(sigma * mu, Some(&corr));
        let (ap, ad) = steps(&dir);
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);

        if ap < 1e-12 && ad < 1e-12 {
            stalls += 1;
            if stalls > 3 {
                let (x, gap) = best.map(|b| (b.1, b.2)).unwrap_or((vec![0.0; m], f64::NAN));
                return finish(x, SolveStatus::NumericalFailure, iter, gap);
            }
        } else {
            stalls = 0;
        }

        for k in 0..nblk {
            it.x[k] += &dir.dx[k] * ap;
            it.s[k] += &dir.ds[k] * ad;
            let x = &it.x[k];
            it.x[k] = (x + x.transpose()) * 0.5;
            let s = &it.s[k];
            it.s[k] = (s + s.transpose()) * 0.5;
        }
        it.y += &dir.dy * ad;
    }

    let (x, gap) = best.map(|b| (b.1, b.2)).unwrap_or((vec![0.0; m], f64::NAN));
    finish(x, SolveStatus::NumericalFailure, opts.max_iter, gap)
}
