//! Scenario sampling, sample-size bounds and scenario program solves.
//!
//! A scenario `xi` fixes an operating point `(q*, x_o*, x_o'*)` and the true
//! contact translation `delta`. Sample sizes follow the binomial tail bound
//! for convex scenario programs; the optimality variant maps an accuracy
//! `eps` on the optimal value to a violation level `(eps / L_xi)^n_xi` via
//! the Lipschitz constant of the constraints.
//!
//! Randomness comes from ChaCha20 seeded with [`ChaCha20Rng::seed_from_u64`];
//! scenario `k` of a set is drawn from stream `k`, so any subset can be
//! regenerated independently and in parallel.

use std::time::{SystemTime, UNIX_EPOCH};

use blocksdp::SolverOptions;
use nalgebra::{DMatrix, Vector3, Vector4};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{self, HandObjectParams, State};
use crate::linearization::{linearize, OperatingPoint};
use crate::lmi::{self, decision_variable_count, Controller, DRegion, Designer, ScpOutcome, ScpSpec};

pub type Plant = (DMatrix<f64>, DMatrix<f64>);

/// Number of scenario coordinates.
pub const COORDS: usize = 11;
pub const COORD_NAMES: [&str; COORDS] = [
    "q1", "q2", "q3", "q4", "px", "py", "ptheta", "vx", "vy", "omega", "delta",
];
const Q: usize = 0;
const POSE: usize = 4;
const VEL: usize = 7;
const DELTA: usize = 10;

/// Stream offset separating Lipschitz-estimation pairs from scenario sets.
const LIPSCHITZ_STREAM_BASE: u64 = 1 << 48;

/// One uncertainty realization, `[q (4), x_o (3), x_o' (3), delta]` in SI
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario(pub [f64; COORDS]);

impl Scenario {
    pub fn q(&self) -> Vector4<f64> {
        Vector4::from_column_slice(&self.0[Q..Q + 4])
    }

    pub fn pose(&self) -> Vector3<f64> {
        Vector3::from_column_slice(&self.0[POSE..POSE + 3])
    }

    pub fn vel(&self) -> Vector3<f64> {
        Vector3::from_column_slice(&self.0[VEL..VEL + 3])
    }

    pub fn delta(&self) -> f64 {
        self.0[DELTA]
    }

    pub fn operating_point(&self, x_eq: State) -> Result<OperatingPoint> {
        OperatingPoint::with_joints(self.q(), self.pose(), self.vel(), self.delta(), x_eq)
    }
}

/// Axis-aligned box of scenarios. Frozen coordinates are held at their
/// nominal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBox {
    pub lower: [f64; COORDS],
    pub upper: [f64; COORDS],
    pub nominal: [f64; COORDS],
    pub frozen: [bool; COORDS],
}

impl UncertaintyBox {
    pub fn new(
        lower: [f64; COORDS],
        upper: [f64; COORDS],
        nominal: [f64; COORDS],
        frozen: [bool; COORDS],
    ) -> Result<Self> {
        let b = Self {
            lower,
            upper,
            nominal,
            frozen,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..COORDS {
            let finite = self.lower[k].is_finite() && self.upper[k].is_finite() && self.nominal[k].is_finite();
            if !finite || self.lower[k] > self.upper[k] {
                return Err(Error::Domain(format!(
                    "coordinate {} has interval [{}, {}]",
                    COORD_NAMES[k], self.lower[k], self.upper[k]
                )));
            }
        }
        if self.n_xi() == 0 {
            return Err(Error::Domain("uncertainty box has no free coordinate".into()));
        }
        Ok(())
    }

    /// Number of free coordinates.
    pub fn n_xi(&self) -> usize {
        self.frozen.iter().filter(|f| !**f).count()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..COORDS).filter(|k| !self.frozen[*k]).collect()
    }

    /// Free coordinates of `s`, the vector the Lipschitz constants refer to.
    pub fn free_coordinates(&self, s: &Scenario) -> Vec<f64> {
        self.free_indices().into_iter().map(|k| s.0[k]).collect()
    }

    pub fn nominal_scenario(&self) -> Scenario {
        Scenario(self.nominal)
    }

    pub fn contains(&self, s: &Scenario) -> bool {
        (0..COORDS).all(|k| {
            if self.frozen[k] {
                s.0[k] == self.nominal[k]
            } else {
                s.0[k] >= self.lower[k] && s.0[k] <= self.upper[k]
            }
        })
    }

    /// The box with `coords` frozen at their nominal values.
    pub fn with_frozen(&self, coords: &[usize]) -> Result<Self> {
        let mut b = self.clone();
        for &k in coords {
            if k >= COORDS {
                return Err(Error::Dimension(format!("no coordinate {k}")));
            }
            b.frozen[k] = true;
        }
        b.validate()?;
        Ok(b)
    }

    /// Joint operating points only (pose, velocity and `delta` frozen).
    pub fn restricted(&self) -> Result<Self> {
        self.with_frozen(&[4, 5, 6, 7, 8, 9, 10])
    }

    /// Every free coordinate collapsed onto its nominal value.
    pub fn collapsed(&self) -> Self {
        Self {
            lower: self.nominal,
            upper: self.nominal,
            ..self.clone()
        }
    }

    /// Literal joint intervals quoted for the reference hand: joint angles in
    /// the given rectangles, `y` in `[36.5, 66.5] mm`, `delta` over the
    /// admissible interval, everything else frozen at the equilibrium.
    pub fn reference_joint_box(params: &HandObjectParams) -> Result<Self> {
        let (px, py, pt) = {
            let e = hand::default_equilibrium();
            (e[0], e[1], e[2])
        };
        let q_nom = hand::inverse_kinematics(&hand::default_equilibrium(), 0.0, params)?;
        #[allow(clippy::approx_constant)]
        let lower = [
            0.6632,
            1.1170,
            0.6632,
            1.0472,
            px,
            0.0365,
            pt,
            0.0,
            0.0,
            0.0,
            params.delta_range[0],
        ];
        let upper = [
            0.9250,
            1.7453,
            0.9250,
            1.7453,
            px,
            0.0665,
            pt,
            0.0,
            0.0,
            0.0,
            params.delta_range[1],
        ];
        let nominal = [q_nom[0], q_nom[1], q_nom[2], q_nom[3], px, py, pt, 0.0, 0.0, 0.0, 0.0];
        let mut frozen = [true; COORDS];
        for k in [0, 1, 2, 3, 5, 10] {
            frozen[k] = false;
        }
        Self::new(lower, upper, nominal, frozen)
    }

    /// Box covering a manipulation workspace: poses in the given ranges,
    /// joints over the inverse-kinematics image of those poses (sampled on a
    /// grid including the corners), `delta` over the admissible interval and
    /// zero velocity. Pose coordinates with an empty range are frozen. The
    /// nominal point is the workspace equilibrium with `delta = 0`.
    pub fn workspace(params: &HandObjectParams, ws: &Workspace) -> Result<Self> {
        let grid = ws.grid.max(2);
        let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        let deltas = [params.delta_range[0], 0.0, params.delta_range[1]];
        let mut qlo = [f64::INFINITY; 4];
        let mut qhi = [f64::NEG_INFINITY; 4];
        for i in 0..grid {
            for j in 0..grid {
                for k in 0..grid {
                    for &d in &deltas {
                        let pose = Vector3::new(
                            lin(ws.x[0], ws.x[1], i),
                            lin(ws.y[0], ws.y[1], j),
                            lin(ws.theta[0], ws.theta[1], k),
                        );
                        let q = hand::inverse_kinematics(&pose, d, params)?;
                        for c in 0..4 {
                            qlo[c] = qlo[c].min(q[c]);
                            qhi[c] = qhi[c].max(q[c]);
                        }
                    }
                }
            }
        }
        let e = ws.equilibrium;
        let q_nom = hand::inverse_kinematics(&e, 0.0, params)?;
        let lower = [
            qlo[0],
            qlo[1],
            qlo[2],
            qlo[3],
            ws.x[0],
            ws.y[0],
            ws.theta[0],
            0.0,
            0.0,
            0.0,
            params.delta_range[0],
        ];
        let upper = [
            qhi[0],
            qhi[1],
            qhi[2],
            qhi[3],
            ws.x[1],
            ws.y[1],
            ws.theta[1],
            0.0,
            0.0,
            0.0,
            params.delta_range[1],
        ];
        let nominal = [
            q_nom[0], q_nom[1], q_nom[2], q_nom[3], e[0], e[1], e[2], 0.0, 0.0, 0.0, 0.0,
        ];
        let mut frozen = [false; COORDS];
        frozen[VEL..VEL + 3].fill(true);
        for k in POSE..POSE + 3 {
            frozen[k] = lower[k] == upper[k];
        }
        Self::new(lower, upper, nominal, frozen)
    }
}

/// Pose ranges (m, m, rad) spanned by a manipulation task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub equilibrium: Vector3<f64>,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub theta: [f64; 2],
    /// Grid points per pose axis used to bound the joint image.
    pub grid: usize,
}

impl Workspace {
    /// Operating points of the default task: the object height varies
    /// between 36.5 and 66.5 mm at the default equilibrium `x` and angle.
    pub fn default_task() -> Self {
        let e = hand::default_equilibrium();
        Self {
            equilibrium: e,
            x: [e[0], e[0]],
            y: [0.0365, 0.0665],
            theta: [e[2], e[2]],
            grid: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub seed: u64,
    pub uncertainty: UncertaintyBox,
    pub scenarios: Vec<Scenario>,
    /// Seconds since the Unix epoch; not part of the determinism contract.
    pub generated_unix: u64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_one(b: &UncertaintyBox, rng: &mut ChaCha20Rng) -> Scenario {
    let mut x = b.nominal;
    for k in 0..COORDS {
        if !b.frozen[k] {
            let u: f64 = rng.random();
            x[k] = (b.lower[k] + (b.upper[k] - b.lower[k]) * u).min(b.upper[k]);
        }
    }
    Scenario(x)
}

/// Scenario `k` of the set with this seed.
pub fn draw_scenario(b: &UncertaintyBox, seed: u64, k: u64) -> Scenario {
    draw_one(b, &mut stream_rng(seed, k))
}

/// `n` i.i.d. uniform scenarios from the box.
pub fn draw_scenarios(b: &UncertaintyBox, n: usize, seed: u64) -> Result<ScenarioSet> {
    b.validate()?;
    if n == 0 {
        return Err(Error::Domain("at least one scenario is required".into()));
    }
    let scenarios = (0..n as u64).map(|k| draw_scenario(b, seed, k)).collect();
    let generated_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ScenarioSet {
        seed,
        uncertainty: b.clone(),
        scenarios,
        generated_unix,
    })
}

/// Maps a scenario to the `(A, B)` pair entering the region constraints.
pub trait ScenarioModel: Sync {
    fn plant(&self, s: &Scenario) -> Result<Plant>;
}

impl<F> ScenarioModel for F
where
    F: Fn(&Scenario) -> Result<Plant> + Sync,
{
    fn plant(&self, s: &Scenario) -> Result<Plant> {
        self(s)
    }
}

/// The hand linearized at each scenario, with `G^+` built from `delta_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub params: HandObjectParams,
    pub x_eq: State,
    pub delta_hat: f64,
}

impl HandModel {
    pub fn new(params: HandObjectParams, equilibrium: Vector3<f64>, delta_hat: f64) -> Self {
        let x_eq = State::new(equilibrium[0], equilibrium[1], equilibrium[2], 0.0, 0.0, 0.0);
        Self {
            params,
            x_eq,
            delta_hat,
        }
    }
}

impl ScenarioModel for HandModel {
    fn plant(&self, s: &Scenario) -> Result<Plant> {
        let op = s.operating_point(self.x_eq)?;
        let lin = linearize(&op, self.delta_hat, &self.params)?;
        Ok((
            DMatrix::from_column_slice(6, 6, lin.a.as_slice()),
            DMatrix::from_column_slice(6, 3, lin.b.as_slice()),
        ))
    }
}

/// Linearizes every scenario, in parallel, keeping scenario order.
pub fn plants<M: ScenarioModel + ?Sized>(model: &M, scenarios: &[Scenario]) -> Result<Vec<Plant>> {
    scenarios.par_iter().map(|s| model.plant(s)).collect()
}

/// `sum_{i<d} C(n, i) eps^i (1 - eps)^(n - i)`, summed in log space.
pub fn binomial_tail(n: u64, eps: f64, d: u64) -> f64 {
    if eps <= 0.0 {
        return 1.0;
    }
    if d > n {
        return 1.0;
    }
    if eps >= 1.0 {
        return 0.0;
    }
    let le = eps.ln();
    let l1e = (-eps).ln_1p();
    let nf = n as f64;
    let mut log_c = 0.0;
    let mut terms = Vec::with_capacity(d as usize);
    for i in 0..d {
        if i > 0 {
            let fi = i as f64;
            log_c += (nf - fi + 1.0).ln() - fi.ln();
        }
        let fi = i as f64;
        terms.push(log_c + fi * le + (nf - fi) * l1e);
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    (m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln())
        .exp()
        .min(1.0)
}

fn check_prob(name: &str, v: f64, allow_one: bool) -> Result<()> {
    let ok = v > 0.0 && (v < 1.0 || (allow_one && v == 1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} outside its admissible range")))
    }
}

/// Smallest `n >= d` with `binomial_tail(n, eps, d) <= beta`.
pub fn sample_size_feasibility(eps: f64, beta: f64, d: u64) -> Result<u64> {
    check_prob("eps", eps, false)?;
    check_prob("beta", beta, true)?;
    if d == 0 {
        return Err(Error::Domain("d must be at least 1".into()));
    }
    Ok(min_sample_size(eps, beta, d))
}

fn min_sample_size(eps: f64, beta: f64, d: u64) -> u64 {
    let ok = |n: u64| binomial_tail(n, eps, d) <= beta;
    if ok(d) {
        return d;
    }
    let mut lo = d;
    let mut hi = d.max(1) * 2;
    while !ok(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalitySampleSize {
    pub n: u64,
    pub alpha_tight: f64,
    /// `(eps / L_xi)^n_xi`, the violation level fed to the feasibility bound.
    pub epsilon_eff: f64,
    /// `eps >= L_xi`: the level was clamped below 1.
    pub degenerate: bool,
}

/// Sample size and tightening for an `eps`-accurate optimal value.
pub fn sample_size_optimality(eps: f64, beta: f64, n_xi: u32, l_xi: f64, d: u64) -> Result<OptimalitySampleSize> {
    check_prob("eps", eps, true)?;
    check_prob("beta", beta, true)?;
    if !(l_xi > 0.0) || n_xi == 0 || d == 0 {
        return Err(Error::Domain(format!(
            "need L_xi > 0, n_xi >= 1, d >= 1 (got {l_xi}, {n_xi}, {d})"
        )));
    }
    let ratio = eps / l_xi;
    let degenerate = ratio >= 1.0;
    let epsilon_eff = if degenerate {
        1.0 - f64::EPSILON
    } else {
        ratio.powi(n_xi as i32)
    };
    Ok(OptimalitySampleSize {
        n: min_sample_size(epsilon_eff, beta, d),
        alpha_tight: l_xi * eps.powf(1.0 / n_xi as f64),
        epsilon_eff,
        degenerate,
    })
}

/// Lipschitz constants of the three region blocks in `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConstants {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    /// Uniform constant for the stacked constraint.
    pub l: f64,
}

impl LipschitzConstants {
    pub fn blocks(&self) -> [f64; 3] {
        [self.l1, self.l2, self.l3]
    }
}

/// Constants for `||P||, ||Y|| <= mu` and plant slopes `L_A`, `L_B`.
pub fn lipschitz_lmi(mu: f64, theta: f64, l_a: f64, l_b: f64) -> LipschitzConstants {
    let l1 = 2.0 * mu * (l_a + l_b);
    let sc = theta.sin().abs() + theta.cos().abs();
    LipschitzConstants {
        l1,
        l2: 0.5 * l1,
        l3: l1 * sc,
        l: l1 * sc.max(1.0),
    }
}

pub const LIPSCHITZ_SAFETY: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsLipschitz {
    /// Safety-scaled estimates.
    pub l_a: f64,
    pub l_b: f64,
    /// Largest sampled slopes before scaling.
    pub raw_a: f64,
    pub raw_b: f64,
    pub pairs: usize,
    /// Pairs dropped because a plant could not be built.
    pub skipped: usize,
}

/// Largest sampled slopes `||A(xi_i) - A(xi_j)|| / ||xi_i - xi_j||` (and the
/// same for `B`) over `k` random pairs, times [`LIPSCHITZ_SAFETY`]. Pair `i`
/// is the same for every `k > i`, so growing `k` never lowers the estimate.
pub fn estimate_dynamics_lipschitz<M: ScenarioModel + ?Sized>(
    b: &UncertaintyBox,
    k: usize,
    seed: u64,
    model: &M,
) -> Result<DynamicsLipschitz> {
    if k < 2 {
        return Err(Error::Domain("at least two pairs are required".into()));
    }
    b.validate()?;
    let slopes: Vec<Option<(f64, f64)>> = (0..k as u64)
        .into_par_iter()
        .map(|i| {
            let s1 = draw_scenario(b, seed, LIPSCHITZ_STREAM_BASE + 2 * i);
            let s2 = draw_scenario(b, seed, LIPSCHITZ_STREAM_BASE + 2 * i + 1);
            let dxi: f64 = b
                .free_coordinates(&s1)
                .iter()
                .zip(b.free_coordinates(&s2))
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            let (Ok((a1, b1)), Ok((a2, b2))) = (model.plant(&s1), model.plant(&s2)) else {
                return None;
            };
            if dxi == 0.0 {
                return Some((0.0, 0.0));
            }
            Some((spectral_norm(&(a1 - a2)) / dxi, spectral_norm(&(b1 - b2)) / dxi))
        })
        .collect();
    let skipped = slopes.iter().filter(|s| s.is_none()).count();
    let (raw_a, raw_b) = slopes
        .iter()
        .flatten()
        .fold((0.0_f64, 0.0_f64), |(a, b), (x, y)| (a.max(*x), b.max(*y)));
    Ok(DynamicsLipschitz {
        l_a: LIPSCHITZ_SAFETY * raw_a,
        l_b: LIPSCHITZ_SAFETY * raw_b,
        raw_a,
        raw_b,
        pairs: k,
        skipped,
    })
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Parameters of the tightened (optimality) scenario program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityConfig {
    pub epsilon: f64,
    pub beta: f64,
    /// Bound on `P` and on `||Y||`.
    pub mu: f64,
    pub l_a: Option<f64>,
    pub l_b: Option<f64>,
    /// Per-block constants `L_1`, `L_2`, `L_3`.
    pub l_blocks: [f64; 3],
    /// Aggregated constant, the largest per-block constant.
    pub l_xi: f64,
    pub n_xi: u32,
    pub alpha_tight: f64,
}

impl OptimalityConfig {
    /// From given per-block Lipschitz constants.
    pub fn from_block_constants(epsilon: f64, beta: f64, mu: f64, l_blocks: [f64; 3], n_xi: u32) -> Result<Self> {
        let l_xi = l_blocks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(mu > 0.0) || n_xi == 0 || !(l_xi > 0.0) {
            return Err(Error::Domain(format!(
                "need mu > 0, n_xi >= 1, L_xi > 0 (got {mu}, {n_xi}, {l_xi})"
            )));
        }
        check_prob("eps", epsilon, true)?;
        check_prob("beta", beta, true)?;
        Ok(Self {
            epsilon,
            beta,
            mu,
            l_a: None,
            l_b: None,
            l_blocks,
            l_xi,
            n_xi,
            alpha_tight: l_xi * epsilon.powf(1.0 / n_xi as f64),
        })
    }

    /// From plant slopes through [`lipschitz_lmi`].
    pub fn from_dynamics(epsilon: f64, beta: f64, mu: f64, theta: f64, l_a: f64, l_b: f64, n_xi: u32) -> Result<Self> {
        let lc = lipschitz_lmi(mu, theta, l_a, l_b);
        let mut cfg = Self::from_block_constants(epsilon, beta, mu, lc.blocks(), n_xi)?;
        cfg.l_a = Some(l_a);
        cfg.l_b = Some(l_b);
        Ok(cfg)
    }

    pub fn sample_size(&self, d: u64) -> Result<OptimalitySampleSize> {
        sample_size_optimality(self.epsilon, self.beta, self.n_xi, self.l_xi, d)
    }
}

/// Empirical violation rate with a two-sided 95% Clopper-Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub samples: usize,
    pub violations: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fresh scenarios whose closed-loop poles left the region.
    pub pole_failures: usize,
    pub seed: u64,
}

/// Exact binomial confidence interval at level `1 - alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    assert!(k <= n && n > 0, "need 0 <= k <= n, n > 0");
    let bisect = |f: &dyn Fn(f64) -> bool| {
        // f is true on [0, p*) and false on (p*, 1]
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let half = 0.5 * alpha;
    // P(X >= k | p) = 1 - P(X <= k - 1) increases in p.
    let low = if k == 0 {
        0.0
    } else {
        bisect(&|p| 1.0 - binomial_tail(n, p, k) < half)
    };
    // P(X <= k | p) decreases in p.
    let high = if k == n {
        1.0
    } else {
        bisect(&|p| binomial_tail(n, p, k + 1) > half)
    };
    (low, high)
}

/// Fraction of `m` fresh scenarios on which some region block exceeds
/// `gamma` at the controller's `(P, Y)`. Also counts fresh scenarios whose
/// closed-loop poles leave the region.
pub fn empirical_violation<M: ScenarioModel + ?Sized>(
    controller: &Controller,
    b: &UncertaintyBox,
    m: usize,
    seed: u64,
    model: &M,
) -> Result<ViolationEstimate> {
    if m == 0 {
        return Err(Error::Domain("at least one test scenario is required".into()));
    }
    let vars = controller.vars();
    let flags: Vec<(bool, bool)> = (0..m as u64)
        .into_par_iter()
        .map(|k| {
            let s = draw_scenario(b, seed, k);
            let (a, bm) = model.plant(&s)?;
            let margins = lmi::evaluate_constraint(&vars, &a, &bm, &controller.region)?;
            let violated = margins[..3].iter().any(|v| *v > 0.0);
            let acl = &a - &bm * &controller.gain;
            let poles_out = !lmi::pole_region_check(&acl, &controller.region).0;
            Ok((violated, poles_out))
        })
        .collect::<Result<_>>()?;
    let violations = flags.iter().filter(|f| f.0).count();
    let pole_failures = flags.iter().filter(|f| f.1).count();
    let (ci_low, ci_high) = clopper_pearson(violations as u64, m as u64, 0.05);
    Ok(ViolationEstimate {
        samples: m,
        violations,
        rate: violations as f64 / m as f64,
        ci_low,
        ci_high,
        pole_failures,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignStatus {
    Feasible,
    Infeasible,
    SolverFailure,
}

/// Solver diagnostics carried by every certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub backend: String,
    pub solver_status: String,
    pub iterations: usize,
    pub primal_residual: f64,
    pub relative_gap: f64,
    pub gamma: f64,
    /// Largest region-block eigenvalue over the training scenarios.
    pub max_block_eigenvalue: f64,
    pub p_min_eigenvalue: f64,
}

impl SolveDiagnostics {
    fn from_outcome(out: &ScpOutcome) -> Self {
        Self {
            backend: out.solution.backend.to_string(),
            solver_status: format!("{:?}", out.solution.status),
            iterations: out.solution.iterations,
            primal_residual: out.solution.primal_residual,
            relative_gap: out.solution.relative_gap,
            gamma: out.vars.gamma,
            max_block_eigenvalue: out.max_block_eigenvalue,
            p_min_eigenvalue: out.p_min_eigenvalue,
        }
    }

    fn status(out: &ScpOutcome) -> DesignStatus {
        if out.feasible {
            DesignStatus::Feasible
        } else if out.solution.status == blocksdp::SolveStatus::Optimal
            || out.solution.status == blocksdp::SolveStatus::Infeasible
        {
            DesignStatus::Infeasible
        } else {
            DesignStatus::SolverFailure
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub status: DesignStatus,
    pub epsilon: f64,
    pub beta: f64,
    /// Decision-variable count `dim S^n + dim Y`.
    pub d: u64,
    pub n_required: u64,
    pub n_used: usize,
    pub seed: u64,
    pub uncertainty: UncertaintyBox,
    pub diagnostics: SolveDiagnostics,
    pub empirical: Option<ViolationEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    pub status: DesignStatus,
    pub config: OptimalityConfig,
    pub d: u64,
    pub sample_size: OptimalitySampleSize,
    pub n_used: usize,
    pub seed: u64,
    pub uncertainty: UncertaintyBox,
    /// Optimal value `J*_N = gamma` of the tightened program.
    pub j_star: f64,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCertificate {
    pub status: DesignStatus,
    pub deltas: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

/// A design result: the controller exists only for a feasible status.
#[derive(Debug, Clone)]
pub struct Design<C> {
    pub controller: Option<Controller>,
    pub certificate: C,
    pub outcome: ScpOutcome,
}

fn plant_dims(plants: &[Plant]) -> Result<(usize, usize)> {
    plants
        .first()
        .map(|(a, b)| (a.nrows(), b.ncols()))
        .ok_or_else(|| Error::Domain("scenario set is empty".into()))
}

fn controller_for(
    designer: Designer,
    out: &ScpOutcome,
    region: &DRegion,
    seed: Option<u64>,
    delta_hat: f64,
    x_eq: [f64; 6],
) -> Result<Option<Controller>> {
    if !out.feasible {
        return Ok(None);
    }
    Controller::from_vars(designer, &out.vars, *region, seed, delta_hat, x_eq).map(Some)
}

/// Feasibility scenario program over a set with at least the required
/// number of scenarios for `(eps, beta)`.
pub fn solve_feasibility_scp(
    set: &ScenarioSet,
    model: &HandModel,
    region: &DRegion,
    eps: f64,
    beta: f64,
    opts: &SolverOptions,
) -> Result<Design<FeasibilityCertificate>> {
    let plants = plants(model, &set.scenarios)?;
    let (n, m) = plant_dims(&plants)?;
    let d = decision_variable_count(n, m) as u64;
    let n_required = sample_size_feasibility(eps, beta, d)?;
    if (set.len() as u64) < n_required {
        return Err(Error::Domain(format!(
            "{} scenarios given, {n_required} required for eps = {eps}, beta = {beta}",
            set.len()
        )));
    }
    let out = lmi::solve_scp(&plants, region, &ScpSpec::feasibility(), opts)?;
    let certificate = FeasibilityCertificate {
        status: SolveDiagnostics::status(&out),
        epsilon: eps,
        beta,
        d,
        n_required,
        n_used: set.len(),
        seed: set.seed,
        uncertainty: set.uncertainty.clone(),
        diagnostics: SolveDiagnostics::from_outcome(&out),
        empirical: None,
    };
    let controller = controller_for(
        Designer::Feasibility,
        &out,
        region,
        Some(set.seed),
        model.delta_hat,
        model.x_eq.into(),
    )?;
    Ok(Design {
        controller,
        certificate,
        outcome: out,
    })
}

/// Tightened scenario program with `P <= mu I` and `||Y|| <= mu`. The set
/// may be smaller than the Theorem-level sample size; the certificate
/// reports both.
pub fn solve_optimality_scp(
    set: &ScenarioSet,
    model: &HandModel,
    region: &DRegion,
    cfg: &OptimalityConfig,
    opts: &SolverOptions,
) -> Result<Design<OptimalityCertificate>> {
    if !(cfg.alpha_tight >= 0.0) || !(cfg.mu > 0.0) {
        return Err(Error::Domain("need alpha_tight >= 0 and mu > 0".into()));
    }
    let plants = plants(model, &set.scenarios)?;
    let (n, m) = plant_dims(&plants)?;
    let d = decision_variable_count(n, m) as u64;
    let sample_size = cfg.sample_size(d)?;
    let spec = ScpSpec::optimality(cfg.alpha_tight, cfg.mu, cfg.mu);
    let out = lmi::solve_scp(&plants, region, &spec, opts)?;
    let status = SolveDiagnostics::status(&out);
    let certificate = OptimalityCertificate {
        status,
        config: *cfg,
        d,
        sample_size,
        n_used: set.len(),
        seed: set.seed,
        uncertainty: set.uncertainty.clone(),
        j_star: out.vars.gamma,
        diagnostics: SolveDiagnostics::from_outcome(&out),
    };
    let controller = controller_for(
        Designer::Optimality,
        &out,
        region,
        Some(set.seed),
        model.delta_hat,
        model.x_eq.into(),
    )?;
    Ok(Design {
        controller,
        certificate,
        outcome: out,
    })
}

/// `n` evenly spaced values over `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Baseline design over a deterministic `delta` grid at the fixed
/// equilibrium.
pub fn solve_grid_baseline(
    deltas: &[f64],
    model: &HandModel,
    region: &DRegion,
    opts: &SolverOptions,
) -> Result<Design<GridCertificate>> {
    if deltas.is_empty() {
        return Err(Error::Domain("delta grid is empty".into()));
    }
    let pose = model.x_eq.fixed_rows::<3>(0).into_owned();
    let scenarios: Vec<Scenario> = deltas
        .iter()
        .map(|&d| {
            let q = hand::inverse_kinematics(&pose, d, &model.params)?;
            let mut x = [0.0; COORDS];
            x[Q..Q + 4].copy_from_slice(q.as_slice());
            x[POSE..POSE + 3].copy_from_slice(pose.as_slice());
            x[DELTA] = d;
            Ok(Scenario(x))
        })
        .collect::<Result<_>>()?;
    let plants = plants(model, &scenarios)?;
    let out = lmi::solve_scp(&plants, region, &ScpSpec::feasibility(), opts)?;
    let certificate = GridCertificate {
        status: SolveDiagnostics::status(&out),
        deltas: deltas.to_vec(),
        diagnostics: SolveDiagnostics::from_outcome(&out),
    };
    let controller = controller_for(Designer::Grid, &out, region, None, model.delta_hat, model.x_eq.into())?;
    Ok(Design {
        controller,
        certificate,
        outcome: out,
    })
}
