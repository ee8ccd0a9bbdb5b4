//! D-region pole placement LMIs for state feedback `u = -L_c x`.
//!
//! With `X = A P - B Y` the three region constraints are
//!
//! ```text
//! f1 = X + X^T + 2 alpha P                          (Re s < -alpha)
//! f2 = [[-r P, X], [X^T, -r P]]                      (|s| < r)
//! f3 = [[sin t (X + X^T), cos t (X - X^T)],
//!       [cos t (X^T - X), sin t (X + X^T)]]         (damping cone)
//! ```
//!
//! each required below `gamma I`, together with `-P < gamma I`. A solution
//! with `gamma < 0` certifies that `A - B L_c`, `L_c = Y P^{-1}`, has all
//! eigenvalues in the region.

use blocksdp::{LmiBlock, SdpProblem, SdpSolution, SolveStatus, SolverOptions};
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute margin used to make the strict inequalities non-strict.
pub const ETA: f64 = 1e-9;
/// Lower box bound on `gamma`.
pub const GAMMA_LOWER: f64 = -1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DRegion {
    /// Minimal decay rate (1/s).
    pub alpha: f64,
    /// Radius bound (1/s).
    pub r: f64,
    /// Cone half-angle (rad); poles satisfy damping `zeta >= cos(theta)`.
    pub theta: f64,
}

impl DRegion {
    pub fn new(alpha: f64, r: f64, theta: f64) -> Result<Self> {
        let reg = Self { alpha, r, theta };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::Domain(format!("alpha = {} must be >= 0", self.alpha)));
        }
        if !(self.r > self.alpha) {
            return Err(Error::Domain(format!(
                "r = {} must exceed alpha = {}",
                self.r, self.alpha
            )));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Domain(format!("theta = {} outside (0, pi/2)", self.theta)));
        }
        Ok(())
    }

    /// `alpha = 0.5`, `r = 7`, `theta = 30 deg`.
    pub fn default_design() -> Self {
        Self {
            alpha: 0.5,
            r: 7.0,
            theta: 30f64.to_radians(),
        }
    }

    pub fn min_damping(&self) -> f64 {
        self.theta.cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVars {
    pub p: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub gamma: f64,
}

impl DecisionVars {
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            p: &self.p * c,
            y: &self.y * c,
            gamma: self.gamma * c,
        }
    }
}

/// Number of free entries in `P in S^n` and `Y in R^{m x n}`; `gamma` is not
/// counted.
pub fn decision_variable_count(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m * n
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, p: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || p.shape() != (n, n) || y.shape() != (m, n) {
        return Err(Error::Dimension(format!(
            "A {:?}, B {:?}, P {:?}, Y {:?}",
            a.shape(),
            b.shape(),
            p.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// The region blocks `[f1, f2, f3, -P]` evaluated at `(P, Y)`; `gamma` does
/// not enter.
pub fn build_dregion_blocks(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    region: &DRegion,
    p: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<[DMatrix<f64>; 4]> {
    check_dims(a, b, p, y)?;
    Ok(region_blocks_unchecked(a, b, region, p, y))
}

fn region_blocks_unchecked(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    region: &DRegion,
    p: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> [DMatrix<f64>; 4] {
    let n = a.nrows();
    let x = a * p - b * y;
    let xt = x.transpose();
    let sym = &x + &xt;
    let skew = &x - &xt;
    let f1 = &sym + p * (2.0 * region.alpha);
    let mut f2 = DMatrix::zeros(2 * n, 2 * n);
    f2.view_mut((0, 0), (n, n)).copy_from(&(p * -region.r));
    f2.view_mut((n, n), (n, n)).copy_from(&(p * -region.r));
    f2.view_mut((0, n), (n, n)).copy_from(&x);
    f2.view_mut((n, 0), (n, n)).copy_from(&xt);
    let (s, c) = region.theta.sin_cos();
    let mut f3 = DMatrix::zeros(2 * n, 2 * n);
    f3.view_mut((0, 0), (n, n)).copy_from(&(&sym * s));
    f3.view_mut((n, n), (n, n)).copy_from(&(&sym * s));
    f3.view_mut((0, n), (n, n)).copy_from(&(&skew * c));
    f3.view_mut((n, 0), (n, n)).copy_from(&(&skew * -c));
    [f1, f2, f3, -p]
}

/// Largest eigenvalue of each `f_k - gamma I`, in the order
/// `[f1, f2, f3, -P]`. All margins `<= 0` iff the variables satisfy the
/// (non-strict) constraints for this plant.
pub fn evaluate_constraint(
    vars: &DecisionVars,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    region: &DRegion,
) -> Result<[f64; 4]> {
    let blocks = build_dregion_blocks(a, b, region, &vars.p, &vars.y)?;
    Ok(blocks.map(|f| {
        let sym = (&f + f.transpose()) * 0.5;
        blocksdp::verify::max_eigenvalue(&sym) - vars.gamma
    }))
}

/// `L_c = Y P^{-1}`.
pub fn recover_gain(p: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if p.nrows() != p.ncols() || y.ncols() != p.nrows() {
        return Err(Error::Dimension(format!("P {:?}, Y {:?}", p.shape(), y.shape())));
    }
    let sym = (p + p.transpose()) * 0.5;
    let lmin = blocksdp::verify::min_eigenvalue(&sym);
    if !(lmin > 1e-10) {
        return Err(Error::Domain(format!(
            "P is not positive definite (min eigenvalue {lmin:e})"
        )));
    }
    let chol = sym
        .cholesky()
        .ok_or_else(|| Error::Domain("P is not positive definite".into()))?;
    // L P = Y  <=>  P L^T = Y^T
    Ok(chol.solve(&y.transpose()).transpose())
}

/// Per-pole distances to the region boundary; positive means inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleMargin {
    pub re: f64,
    pub im: f64,
    /// `-alpha - Re(s)`.
    pub decay: f64,
    /// `r - |s|`.
    pub radius: f64,
    /// `tan(theta) |Re(s)| - |Im(s)|` for poles in the left half-plane,
    /// `-inf` otherwise.
    pub cone: f64,
}

impl PoleMargin {
    pub fn inside(&self) -> bool {
        self.decay > 0.0 && self.radius > 0.0 && self.cone >= 0.0
    }

    pub fn worst(&self) -> f64 {
        self.decay.min(self.radius).min(self.cone)
    }
}

pub fn pole_margin(s: Complex<f64>, region: &DRegion) -> PoleMargin {
    let cone = if s.re < 0.0 {
        region.theta.tan() * s.re.abs() - s.im.abs()
    } else {
        f64::NEG_INFINITY
    };
    PoleMargin {
        re: s.re,
        im: s.im,
        decay: -region.alpha - s.re,
        radius: region.r - s.norm(),
        cone,
    }
}

/// Eigenvalues of `A_cl` with imaginary parts of conjugate pairs made exactly
/// symmetric, ordered by real part then imaginary part.
pub fn closed_loop_poles(a_cl: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = a_cl.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    // Pair each pole with its conjugate partner and average the two.
    let n = ev.len();
    let mut used = vec![false; n];
    let tol = 1e-9 * ev.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
    for i in 0..n {
        if used[i] || ev[i].im.abs() <= tol {
            if !used[i] {
                ev[i].im = 0.0;
                used[i] = true;
            }
            continue;
        }
        let best = (0..n)
            .filter(|&j| j != i && !used[j])
            .min_by(|&j, &k| (ev[j] - ev[i].conj()).norm().total_cmp(&(ev[k] - ev[i].conj()).norm()));
        used[i] = true;
        if let Some(j) = best {
            let re = 0.5 * (ev[i].re + ev[j].re);
            let im = 0.5 * (ev[i].im.abs() + ev[j].im.abs());
            ev[i] = Complex::new(re, -im);
            ev[j] = Complex::new(re, im);
            used[j] = true;
        }
    }
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    ev
}

/// Whether every eigenvalue of `A_cl` lies in the region, with per-pole
/// margins.
pub fn pole_region_check(a_cl: &DMatrix<f64>, region: &DRegion) -> (bool, Vec<PoleMargin>) {
    let margins: Vec<PoleMargin> = closed_loop_poles(a_cl)
        .into_iter()
        .map(|s| pole_margin(s, region))
        .collect();
    (margins.iter().all(PoleMargin::inside), margins)
}

/// Variable indexing for `(P, Y, gamma)` in an SDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmiLayout {
    pub n: usize,
    pub m: usize,
}

impl LmiLayout {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    pub fn num_vars(&self) -> usize {
        decision_variable_count(self.n, self.m) + 1
    }

    /// Index of `P[i, j]`, `i <= j`.
    pub fn p_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        j * (j + 1) / 2 + i
    }

    pub fn y_index(&self, i: usize, j: usize) -> usize {
        self.n * (self.n + 1) / 2 + i * self.n + j
    }

    pub fn gamma_index(&self) -> usize {
        self.num_vars() - 1
    }

    pub fn unpack(&self, x: &[f64]) -> DecisionVars {
        let p = DMatrix::from_fn(self.n, self.n, |i, j| x[self.p_index(i, j)]);
        let y = DMatrix::from_fn(self.m, self.n, |i, j| x[self.y_index(i, j)]);
        DecisionVars {
            p,
            y,
            gamma: x[self.gamma_index()],
        }
    }

    /// Basis element of `(P, Y)` for variable `k` (`gamma` excluded).
    fn basis(&self, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut p = DMatrix::zeros(self.n, self.n);
        let mut y = DMatrix::zeros(self.m, self.n);
        let np = self.n * (self.n + 1) / 2;
        if k < np {
            let mut j = 0;
            while (j + 1) * (j + 2) / 2 <= k {
                j += 1;
            }
            let i = k - j * (j + 1) / 2;
            p[(i, j)] = 1.0;
            p[(j, i)] = 1.0;
        } else {
            let r = k - np;
            y[(r / self.n, r % self.n)] = 1.0;
        }
        (p, y)
    }
}

/// How the scenario program is assembled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScpSpec {
    /// Added to each scenario-dependent block (`f1`, `f2`, `f3`).
    pub tightening: f64,
    /// `P <= bound I`.
    pub p_upper: f64,
    /// Spectral-norm bound on `Y`, if any.
    pub y_bound: Option<f64>,
    pub eta: f64,
}

impl ScpSpec {
    /// Feasibility program: `P <= I` fixes the scale of the homogeneous
    /// constraints.
    pub fn feasibility() -> Self {
        Self {
            tightening: 0.0,
            p_upper: 1.0,
            y_bound: None,
            eta: ETA,
        }
    }

    pub fn optimality(tightening: f64, p_bound: f64, y_bound: f64) -> Self {
        Self {
            tightening,
            p_upper: p_bound,
            y_bound: Some(y_bound),
            eta: ETA,
        }
    }
}

fn to_block(layout: &LmiLayout, size: usize, coeffs: &[DMatrix<f64>], gamma_coeff: f64, constant: f64) -> LmiBlock {
    let mut blk = LmiBlock::new(size);
    for i in 0..size {
        blk.add_constant(i, i, constant);
        blk.add_coeff(layout.gamma_index(), i, i, gamma_coeff);
    }
    for (k, f) in coeffs.iter().enumerate() {
        for c in 0..size {
            for r in 0..=c {
                let v = 0.5 * (f[(r, c)] + f[(c, r)]);
                if v != 0.0 {
                    blk.add_coeff(k, r, c, v);
                }
            }
        }
    }
    blk
}

/// Builds `min gamma` over `(P, Y, gamma)` subject to the region blocks of
/// every plant.
pub fn build_scp_problem(
    plants: &[(DMatrix<f64>, DMatrix<f64>)],
    region: &DRegion,
    spec: &ScpSpec,
) -> Result<(SdpProblem, LmiLayout)> {
    let Some((a0, b0)) = plants.first() else {
        return Err(Error::Domain("scenario program needs at least one plant".into()));
    };
    let layout = LmiLayout::new(a0.nrows(), b0.ncols());
    let (n, m) = (layout.n, layout.m);
    let nd = decision_variable_count(n, m);
    let mut problem = SdpProblem::new(layout.num_vars());
    problem.set_objective(layout.gamma_index(), 1.0);
    problem.set_bounds(layout.gamma_index(), Some(GAMMA_LOWER), None);
    let bases: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..nd).map(|k| layout.basis(k)).collect();

    for (a, b) in plants {
        check_dims(a, b, &bases[0].0, &bases[0].1)?;
        let mut per_block: [Vec<DMatrix<f64>>; 3] = Default::default();
        for (p, y) in &bases {
            let [f1, f2, f3, _] = region_blocks_unchecked(a, b, region, p, y);
            per_block[0].push(f1);
            per_block[1].push(f2);
            per_block[2].push(f3);
        }
        let shift = spec.tightening + spec.eta;
        for (k, coeffs) in per_block.iter().enumerate() {
            let size = if k == 0 { n } else { 2 * n };
            problem.push_block(to_block(&layout, size, coeffs, -1.0, shift));
        }
    }

    // -P - (gamma - eta) I <= 0
    let neg_p: Vec<DMatrix<f64>> = bases.iter().map(|(p, _)| -p).collect();
    problem.push_block(to_block(&layout, n, &neg_p, -1.0, spec.eta));
    // P - p_upper I <= 0
    let pos_p: Vec<DMatrix<f64>> = bases.iter().map(|(p, _)| p.clone()).collect();
    problem.push_block(to_block(&layout, n, &pos_p, 0.0, -spec.p_upper));
    if let Some(mu) = spec.y_bound {
        // [[-mu I, Y], [Y^T, -mu I]] <= 0
        let size = m + n;
        let coeffs: Vec<DMatrix<f64>> = bases
            .iter()
            .map(|(_, y)| {
                let mut f = DMatrix::zeros(size, size);
                f.view_mut((0, m), (m, n)).copy_from(y);
                f.view_mut((m, 0), (n, m)).copy_from(&y.transpose());
                f
            })
            .collect();
        problem.push_block(to_block(&layout, size, &coeffs, 0.0, -mu));
    }
    Ok((problem, layout))
}

/// Outcome of one scenario program solve.
#[derive(Debug, Clone)]
pub struct ScpOutcome {
    pub vars: DecisionVars,
    /// Largest eigenvalue of `f1`, `f2`, `f3` over all plants at the
    /// solution, from an eigenvalue routine independent of the solver.
    pub max_block_eigenvalue: f64,
    pub p_min_eigenvalue: f64,
    /// Every region block strictly negative and `P > 0` at the returned
    /// point, which the solver reached optimally or as its best iterate:
    /// the gain places the poles of every plant in the region.
    pub feasible: bool,
    pub solution: SdpSolution,
}

impl ScpOutcome {
    pub fn gain(&self) -> Result<DMatrix<f64>> {
        recover_gain(&self.vars.p, &self.vars.y)
    }
}

/// Largest eigenvalue of the three region blocks over all plants.
pub fn max_region_eigenvalue(
    plants: &[(DMatrix<f64>, DMatrix<f64>)],
    region: &DRegion,
    p: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in plants {
        let blocks = build_dregion_blocks(a, b, region, p, y)?;
        for f in &blocks[..3] {
            worst = worst.max(blocksdp::verify::max_eigenvalue(f));
        }
    }
    Ok(worst)
}

pub fn solve_scp(
    plants: &[(DMatrix<f64>, DMatrix<f64>)],
    region: &DRegion,
    spec: &ScpSpec,
    opts: &SolverOptions,
) -> Result<ScpOutcome> {
    let (problem, layout) = build_scp_problem(plants, region, spec)?;
    let solution = blocksdp::solve(&problem, opts)?;
    let vars = layout.unpack(&solution.x);
    let max_block_eigenvalue = max_region_eigenvalue(plants, region, &vars.p, &vars.y)?;
    let p_min_eigenvalue = blocksdp::verify::min_eigenvalue(&vars.p);
    let reached = matches!(solution.status, SolveStatus::Optimal | SolveStatus::NumericalFailure);
    let feasible = reached
        && vars.p.iter().all(|v| v.is_finite())
        && vars.y.iter().all(|v| v.is_finite())
        && max_block_eigenvalue < 0.0
        && p_min_eigenvalue > 1e-10;
    Ok(ScpOutcome {
        vars,
        max_block_eigenvalue,
        p_min_eigenvalue,
        feasible,
        solution,
    })
}

/// How a controller was designed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Designer {
    Grid,
    Feasibility,
    Optimality,
}

impl std::fmt::Display for Designer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Designer::Grid => "grid",
            Designer::Feasibility => "feasibility",
            Designer::Optimality => "optimality",
        })
    }
}

impl std::str::FromStr for Designer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Designer::Grid),
            "feasibility" => Ok(Designer::Feasibility),
            "optimality" => Ok(Designer::Optimality),
            other => Err(Error::Config(format!(
                "unknown designer {other:?} (grid, feasibility, optimality)"
            ))),
        }
    }
}

/// State-feedback gain with the certificate variables it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub designer: Designer,
    #[serde(with = "crate::matrix_rows")]
    pub gain: DMatrix<f64>,
    #[serde(with = "crate::matrix_rows")]
    pub p: DMatrix<f64>,
    #[serde(with = "crate::matrix_rows")]
    pub y: DMatrix<f64>,
    pub gamma: f64,
    pub region: DRegion,
    /// Seed of the scenario set, absent for deterministic grids.
    pub seed: Option<u64>,
    /// Estimated contact translation used for `G^+`.
    pub delta_hat: f64,
    /// Equilibrium state the gain regulates around.
    pub x_eq: [f64; 6],
}

impl Controller {
    pub fn from_vars(
        designer: Designer,
        vars: &DecisionVars,
        region: DRegion,
        seed: Option<u64>,
        delta_hat: f64,
        x_eq: [f64; 6],
    ) -> Result<Self> {
        let gain = recover_gain(&vars.p, &vars.y)?;
        if (&gain * &vars.p - &vars.y).norm() > 1e-8 * (1.0 + vars.y.norm()) {
            return Err(Error::Singular("gain recovery residual too large".into()));
        }
        Ok(Self {
            designer,
            gain,
            p: vars.p.clone(),
            y: vars.y.clone(),
            gamma: vars.gamma,
            region,
            seed,
            delta_hat,
            x_eq,
        })
    }

    pub fn vars(&self) -> DecisionVars {
        DecisionVars {
            p: self.p.clone(),
            y: self.y.clone(),
            gamma: self.gamma,
        }
    }

    /// The same controller with `-L_c`; used as an instability sanity check.
    pub fn sign_flipped(&self) -> Self {
        Self {
            gain: -&self.gain,
            y: -&self.y,
            ..self.clone()
        }
    }
}
