//! Closed-loop simulation of the nonlinear hand-object model.
//!
//! The object state is integrated with classical RK4; finger joints follow
//! from inverse kinematics at every stage so the rolling-free contact
//! constraint `J_h q' = G^T x_o'` holds by construction. The object-level
//! input `u = L (x_ref - x)` is mapped to joint torques through the estimated
//! grasp, and an internal squeeze keeps both contacts inside their friction
//! cones.

use std::io::Write;
use std::path::Path;

use nalgebra::{Complex, DMatrix, Matrix4x3, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{self, HandObjectParams, State};
use crate::linearization::{linearize, OperatingPoint};
use crate::lmi::{self, Controller, DRegion};

/// Relative reduction of the friction coefficient used by the squeeze policy.
pub const CONE_MARGIN: f64 = 0.1;

/// Object-level control input `u = L_c (x_ref - x)`.
pub fn control_input(gain: &DMatrix<f64>, x: &State, x_ref: &State) -> Result<Vector3<f64>> {
    if gain.shape() != (3, 6) {
        return Err(Error::Dimension(format!("gain is {:?}, expected (3, 6)", gain.shape())));
    }
    let e = x_ref - x;
    let u = gain * DMatrix::from_column_slice(6, 1, e.as_slice());
    Ok(Vector3::new(u[0], u[1], u[2]))
}

/// Torque maps of the estimated grasp at joint angles `q` and orientation
/// `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueMap {
    /// `J_h^T G^+`, the image of object-level inputs.
    pub motion: Matrix4x3<f64>,
    /// `J_h^T n`, the image of a unit internal force.
    pub squeeze: Vector4<f64>,
    /// Unit internal-force direction of the estimated grasp.
    pub nullspace: Vector4<f64>,
}

impl TorqueMap {
    pub fn new(q: &Vector4<f64>, theta: f64, delta_hat: f64, params: &HandObjectParams) -> Result<Self> {
        let jh = hand::hand_jacobian(q, theta, params)?;
        let g = hand::grasp_map(delta_hat, params)?;
        let pinv = hand::grasp_pinv(&g.world(theta))?;
        let n = hand::grasp_nullspace(&g.g)?;
        Ok(Self {
            motion: jh.transpose() * pinv,
            squeeze: jh.transpose() * n,
            nullspace: n,
        })
    }

    pub fn torque(&self, u: &Vector3<f64>, lambda: f64) -> Vector4<f64> {
        self.motion * u + self.squeeze * lambda
    }
}

/// Joint torques `J_h^T (G^+ u + n lambda)` with the grasp built from
/// `delta_hat`.
pub fn joint_torques(
    u: &Vector3<f64>,
    lambda: f64,
    q: &Vector4<f64>,
    pose: &Vector3<f64>,
    delta_hat: f64,
    params: &HandObjectParams,
) -> Result<Vector4<f64>> {
    Ok(TorqueMap::new(q, pose[2], delta_hat, params)?.torque(u, lambda))
}

/// Why no admissible internal force exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactRisk {
    /// The squeeze direction cannot raise a normal force to `f_min`.
    NormalForce,
    /// No squeeze satisfies both cone constraints simultaneously.
    Cone,
}

/// Smallest `lambda >= 0` such that the contact forces
/// `base + lambda * per_unit` (ordered `[t1, n1, t2, n2]`) have normal
/// components of at least `f_min` and tangential ratios of at most
/// `mu_f (1 - margin)`.
pub fn internal_force_policy(
    base: &Vector4<f64>,
    per_unit: &Vector4<f64>,
    mu_f: f64,
    f_min: f64,
    margin: f64,
) -> std::result::Result<f64, ContactRisk> {
    let mu = mu_f * (1.0 - margin);
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut kind = None;
    // each constraint reads a + b lambda >= 0
    let mut apply = |a: f64, b: f64, k: ContactRisk| {
        let was_feasible = lo <= hi;
        if b > 0.0 {
            lo = lo.max(-a / b);
        } else if b < 0.0 {
            hi = hi.min(-a / b);
        } else if a < 0.0 {
            hi = f64::NEG_INFINITY;
        }
        if was_feasible && lo > hi {
            kind = Some(k);
        }
    };
    for c in 0..2 {
        let (t0, n0) = (base[2 * c], base[2 * c + 1]);
        let (t1, n1) = (per_unit[2 * c], per_unit[2 * c + 1]);
        apply(n0 - f_min, n1, ContactRisk::NormalForce);
        apply(mu * n0 - t0, mu * n1 - t1, ContactRisk::Cone);
        apply(mu * n0 + t0, mu * n1 + t1, ContactRisk::Cone);
    }
    match kind {
        None => Ok(lo),
        Some(k) => Err(k),
    }
}

/// Cone slack `min_i (mu_f n_i - |t_i|)` of contact forces `[t1, n1, t2, n2]`.
pub fn cone_margin(f: &Vector4<f64>, mu_f: f64) -> f64 {
    (mu_f * f[1] - f[0].abs()).min(mu_f * f[3] - f[2].abs())
}

/// One classical Runge-Kutta step of `x' = f(x)`.
pub fn rk4<F>(x: &State, dt: f64, mut f: F) -> Result<State>
where
    F: FnMut(&State) -> Result<State>,
{
    let k1 = f(x)?;
    let next = rk4_from(x, &k1, dt, |s, _| f(s))?;
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Domain("integration produced non-finite state".into()))
    }
}

fn rk4_from<F, E>(x: &State, k1: &State, dt: f64, mut f: F) -> std::result::Result<State, E>
where
    F: FnMut(&State, f64) -> std::result::Result<State, E>,
{
    let k2 = f(&(x + k1 * (0.5 * dt)), 0.5)?;
    let k3 = f(&(x + k2 * (0.5 * dt)), 0.5)?;
    let k4 = f(&(x + k3 * dt), 1.0)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// RK4 step under constant joint torque `tau`.
pub fn step(x: &State, tau: &Vector4<f64>, delta: f64, dt: f64, params: &HandObjectParams) -> Result<State> {
    rk4(x, dt, |s| hand::nonlinear_derivative(s, tau, delta, params))
}

/// Reference signal: a first-order filtered step from the initial pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub start: [f64; 3],
    pub target: [f64; 3],
    /// Filter time constant in seconds; zero gives a pure step.
    pub time_constant: f64,
}

impl Reference {
    pub fn pose(&self, t: f64) -> Vector3<f64> {
        let s = Vector3::from(self.start);
        let g = Vector3::from(self.target);
        if self.time_constant <= 0.0 {
            return g;
        }
        s + (g - s) * (1.0 - (-t / self.time_constant).exp())
    }

    pub fn state(&self, t: f64) -> State {
        let p = self.pose(t);
        Vector6::new(p[0], p[1], p[2], 0.0, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub delta_true: f64,
    pub delta_hat: f64,
    pub initial_pose: [f64; 3],
    #[serde(default)]
    pub initial_velocity: [f64; 3],
    pub reference: Reference,
    /// Position error norm in metres beyond which the run counts as diverged.
    pub divergence_position: f64,
    /// Orientation error in radians beyond which the run counts as diverged.
    pub divergence_angle: f64,
    pub cone_margin: f64,
}

impl SimConfig {
    /// Maneuver of `offset` from `initial_pose` with the standard filter.
    pub fn maneuver(initial_pose: [f64; 3], offset: [f64; 3], delta_true: f64, delta_hat: f64) -> Self {
        let target = [
            initial_pose[0] + offset[0],
            initial_pose[1] + offset[1],
            initial_pose[2] + offset[2],
        ];
        Self {
            dt: 1e-3,
            horizon: 5.0,
            delta_true,
            delta_hat,
            initial_pose,
            initial_velocity: [0.0; 3],
            reference: Reference {
                start: initial_pose,
                target,
                time_constant: 0.3,
            },
            divergence_position: 0.05,
            divergence_angle: 0.5,
            cone_margin: CONE_MARGIN,
        }
    }

    /// Holding still at `pose`.
    pub fn regulation(pose: [f64; 3], delta: f64) -> Self {
        Self::maneuver(pose, [0.0; 3], delta, delta)
    }

    pub fn validate(&self, params: &HandObjectParams) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "need dt > 0 and horizon >= dt, got {} / {}",
                self.dt, self.horizon
            )));
        }
        if !(self.divergence_position > 0.0 && self.divergence_angle > 0.0) || !(0.0..1.0).contains(&self.cone_margin) {
            return Err(Error::Config(
                "divergence thresholds must be positive and cone margin in [0, 1)".into(),
            ));
        }
        if !(self.reference.time_constant >= 0.0) {
            return Err(Error::Config("reference time constant must be non-negative".into()));
        }
        params.check_delta(self.delta_true)?;
        params.check_delta(self.delta_hat)?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Diverged,
    ContactRisk,
    Singular,
    Unreachable,
}

/// One logged sample, taken at the start of an integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: [f64; 6],
    pub x_ref: [f64; 6],
    pub q: [f64; 4],
    pub qd: [f64; 4],
    pub tau: [f64; 4],
    pub u: [f64; 3],
    pub lambda: f64,
    /// Contact forces `[t1, n1, t2, n2]` on the object.
    pub forces: [f64; 4],
    pub cone_margin: f64,
    /// Net object wrench produced by the internal-force channel.
    pub squeeze_wrench: [f64; 3],
    pub constraint_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: SimConfig,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub message: Option<String>,
}

struct Loop<'a> {
    gain: &'a DMatrix<f64>,
    cfg: &'a SimConfig,
    params: &'a HandObjectParams,
}

struct Evaluation {
    sample: Sample,
    xdot: State,
}

impl Loop<'_> {
    fn evaluate(&self, t: f64, x: &State) -> std::result::Result<Evaluation, (Termination, String)> {
        let p = self.params;
        let delta = self.cfg.delta_true;
        let x_ref = self.cfg.reference.state(t);
        let pose = x.fixed_rows::<3>(0).into_owned();
        let vel = x.fixed_rows::<3>(3).into_owned();
        let fail = |e: Error| match e {
            Error::Unreachable(m) => (Termination::Unreachable, m),
            other => (Termination::Singular, other.to_string()),
        };
        let u = control_input(self.gain, x, &x_ref).map_err(fail)?;
        let (jc, kin) = hand::joint_state(x, delta, p).map_err(fail)?;
        let map = TorqueMap::new(&jc.q, pose[2], self.cfg.delta_hat, p).map_err(fail)?;
        let tau_u = map.motion * u;
        let f0 = hand::contact_forces(x, &tau_u, delta, p).map_err(fail)?;
        let f1 = hand::contact_forces(x, &(tau_u + map.squeeze), delta, p).map_err(fail)? - f0;
        let lambda = internal_force_policy(&f0, &f1, p.mu_f, p.f_min, self.cfg.cone_margin).map_err(|k| {
            (
                Termination::ContactRisk,
                format!("no admissible squeeze ({k:?}) at t = {t:.4}"),
            )
        })?;
        let tau = tau_u + map.squeeze * lambda;
        let forces = f0 + f1 * lambda;
        let acc = hand::object_acceleration(&jc.q, &jc.qd, &pose, &vel, &tau, delta, p).map_err(fail)?;
        let xdot = Vector6::new(vel[0], vel[1], vel[2], acc[0], acc[1], acc[2]);
        let squeeze_wrench = kin.gw * map.nullspace * lambda;
        let residual = hand::contact_constraint_residual(&jc.q, &jc.qd, &pose, &vel, delta, p).map_err(fail)?;
        Ok(Evaluation {
            sample: Sample {
                t,
                x: (*x).into(),
                x_ref: x_ref.into(),
                q: jc.q.into(),
                qd: jc.qd.into(),
                tau: tau.into(),
                u: u.into(),
                lambda,
                forces: forces.into(),
                cone_margin: cone_margin(&forces, p.mu_f),
                squeeze_wrench: squeeze_wrench.into(),
                constraint_residual: residual,
            },
            xdot,
        })
    }
}

/// Runs the closed loop with gain `gain` until the horizon or the first
/// failure, logging one sample per step.
pub fn simulate_gain(gain: &DMatrix<f64>, cfg: &SimConfig, params: &HandObjectParams) -> Result<Trajectory> {
    cfg.validate(params)?;
    let lp = Loop { gain, cfg, params };
    let v0 = cfg.initial_velocity;
    let mut x = Vector6::new(
        cfg.initial_pose[0],
        cfg.initial_pose[1],
        cfg.initial_pose[2],
        v0[0],
        v0[1],
        v0[2],
    );
    let mut samples = Vec::with_capacity(cfg.steps() + 1);
    let dt = cfg.dt;
    let mut outcome = (Termination::Completed, None);
    for k in 0..=cfg.steps() {
        let t = k as f64 * dt;
        let first = match lp.evaluate(t, &x) {
            Ok(ev) => ev,
            Err((r, m)) => {
                outcome = (r, Some(m));
                break;
            }
        };
        let err = Vector3::from_row_slice(&first.sample.x[..3]) - cfg.reference.pose(t);
        let pos_err = (err[0] * err[0] + err[1] * err[1]).sqrt();
        samples.push(first.sample);
        if pos_err > cfg.divergence_position || err[2].abs() > cfg.divergence_angle {
            let msg = format!("pose error ({pos_err:.4} m, {:.4} rad) at t = {t:.4}", err[2].abs());
            outcome = (Termination::Diverged, Some(msg));
            break;
        }
        if k == cfg.steps() {
            break;
        }
        let next = rk4_from(&x, &first.xdot, dt, |s, frac| {
            lp.evaluate(t + frac * dt, s).map(|e| e.xdot)
        });
        match next {
            Ok(next) if next.iter().all(|v| v.is_finite()) => x = next,
            Ok(_) => {
                outcome = (Termination::Diverged, Some(format!("non-finite state at t = {t:.4}")));
                break;
            }
            Err((r, m)) => {
                outcome = (r, Some(m));
                break;
            }
        }
    }
    Ok(Trajectory {
        config: cfg.clone(),
        samples,
        termination: outcome.0,
        message: outcome.1,
    })
}

/// [`simulate_gain`] with a designed controller.
pub fn simulate(controller: &Controller, cfg: &SimConfig, params: &HandObjectParams) -> Result<Trajectory> {
    simulate_gain(&controller.gain, cfg, params)
}

/// Closed-loop poles along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSample {
    pub t: f64,
    /// Eigenvalues as `[re, im]`, conjugate pairs adjacent.
    pub poles: Vec<[f64; 2]>,
    pub inside: bool,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleTrace {
    pub region: DRegion,
    pub samples: Vec<PoleSample>,
    /// Times at which linearization failed.
    pub skipped: Vec<f64>,
}

impl PoleTrace {
    pub fn inside_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.inside).count() as f64 / self.samples.len() as f64
    }

    /// Largest Hausdorff distance between the pole sets of any two samples.
    pub fn dispersion(&self) -> f64 {
        let sets: Vec<Vec<Complex<f64>>> = self
            .samples
            .iter()
            .map(|s| s.poles.iter().map(|p| Complex::new(p[0], p[1])).collect())
            .collect();
        let directed = |a: &[Complex<f64>], b: &[Complex<f64>]| {
            a.iter()
                .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        let mut worst = 0.0f64;
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                worst = worst.max(directed(&sets[i], &sets[j]).max(directed(&sets[j], &sets[i])));
            }
        }
        worst
    }
}

/// Linearizes the plant at every `every`-th trajectory sample (true contact
/// translation, zero held torque as in the design model) and records the
/// eigenvalues of `A - B L`.
pub fn pole_trace(
    traj: &Trajectory,
    gain: &DMatrix<f64>,
    region: &DRegion,
    every: usize,
    params: &HandObjectParams,
) -> Result<PoleTrace> {
    if traj.samples.is_empty() {
        return Err(Error::Domain("trajectory has no samples".into()));
    }
    region.validate()?;
    let every = every.max(1);
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    let cfg = &traj.config;
    for s in traj.samples.iter().step_by(every) {
        let x = State::from(s.x);
        let pose = x.fixed_rows::<3>(0).into_owned();
        let vel = x.fixed_rows::<3>(3).into_owned();
        let op = OperatingPoint::with_joints(Vector4::from(s.q), pose, vel, cfg.delta_true, x);
        let plant = op.and_then(|op| linearize(&op, cfg.delta_hat, params));
        let Ok(plant) = plant else {
            skipped.push(s.t);
            continue;
        };
        let a = DMatrix::from_column_slice(6, 6, plant.a.as_slice());
        let b = DMatrix::from_column_slice(6, 3, plant.b.as_slice());
        let a_cl = a - b * gain;
        let (inside, margins) = lmi::pole_region_check(&a_cl, region);
        samples.push(PoleSample {
            t: s.t,
            poles: margins.iter().map(|m| [m.re, m.im]).collect(),
            inside,
            worst_margin: margins.iter().map(|m| m.worst()).fold(f64::INFINITY, f64::min),
        });
    }
    Ok(PoleTrace {
        region: *region,
        samples,
        skipped,
    })
}

/// Scalar performance figures of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub termination: Termination,
    pub converged: bool,
    pub duration: f64,
    /// Final position error norm in metres.
    pub final_position_error: f64,
    /// Final orientation error in radians.
    pub final_angle_error: f64,
    /// First time after which every pose coordinate stays within 2 % of its
    /// commanded change (or 0.1 mm / 0.1 deg for untouched coordinates).
    pub settling_time: Option<f64>,
    /// Largest overshoot past the target along any commanded coordinate, as
    /// a fraction of the commanded change.
    pub overshoot: f64,
    pub min_cone_margin: f64,
    pub max_cone_margin: f64,
    pub max_lambda: f64,
    pub max_squeeze_wrench: f64,
    pub max_constraint_residual: f64,
}

/// Tolerances defining convergence of a maneuver.
pub const CONVERGED_POSITION: f64 = 1e-3;
pub const CONVERGED_ANGLE: f64 = std::f64::consts::PI / 180.0;

pub fn metrics(traj: &Trajectory) -> Metrics {
    let r = &traj.config.reference;
    let start = Vector3::from(r.start);
    let target = Vector3::from(r.target);
    let change = target - start;
    let band = Vector3::new(
        (0.02 * change[0].abs()).max(1e-4),
        (0.02 * change[1].abs()).max(1e-4),
        (0.02 * change[2].abs()).max(0.1f64.to_radians()),
    );
    let mut settling = None;
    let mut overshoot = 0.0f64;
    let mut fold = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for s in &traj.samples {
        let pose = Vector3::from_row_slice(&s.x[..3]);
        let err = pose - target;
        let outside = (0..3).any(|i| err[i].abs() > band[i]);
        if outside {
            settling = None;
        } else if settling.is_none() {
            settling = Some(s.t);
        }
        for i in 0..3 {
            if change[i].abs() > 1e-12 {
                overshoot = overshoot.max(err[i] * change[i].signum() / change[i].abs());
            }
        }
        fold.0 = fold.0.min(s.cone_margin);
        fold.1 = fold.1.max(s.cone_margin);
        fold.2 = fold.2.max(s.lambda);
        fold.3 = fold.3.max(Vector3::from(s.squeeze_wrench).norm());
        fold.4 = fold.4.max(s.constraint_residual);
    }
    let last = traj.samples.last();
    let (pos_err, ang_err) = last
        .map(|s| {
            let e = Vector3::from_row_slice(&s.x[..3]) - target;
            ((e[0] * e[0] + e[1] * e[1]).sqrt(), e[2].abs())
        })
        .unwrap_or((f64::INFINITY, f64::INFINITY));
    let completed = traj.termination == Termination::Completed;
    Metrics {
        termination: traj.termination,
        converged: completed && pos_err <= CONVERGED_POSITION && ang_err <= CONVERGED_ANGLE,
        duration: last.map(|s| s.t).unwrap_or(0.0),
        final_position_error: pos_err,
        final_angle_error: ang_err,
        settling_time: if completed { settling } else { None },
        overshoot,
        min_cone_margin: fold.0,
        max_cone_margin: fold.1,
        max_lambda: fold.2,
        max_squeeze_wrench: fold.3,
        max_constraint_residual: fold.4,
    }
}

/// Column order of [`write_csv`].
pub const CSV_COLUMNS: [&str; 35] = [
    "t",
    "px",
    "py",
    "theta",
    "vx",
    "vy",
    "omega",
    "px_ref",
    "py_ref",
    "theta_ref",
    "q1",
    "q2",
    "q3",
    "q4",
    "qd1",
    "qd2",
    "qd3",
    "qd4",
    "tau1",
    "tau2",
    "tau3",
    "tau4",
    "ux",
    "uy",
    "utheta",
    "lambda",
    "t1",
    "n1",
    "t2",
    "n2",
    "cone_margin",
    "squeeze_fx",
    "squeeze_fy",
    "squeeze_m",
    "residual",
];

fn csv_writer<W: Write>(mut out: W, header: Option<&str>) -> Result<csv::Writer<W>> {
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(csv::Writer::from_writer(out))
}

/// One row per sample with fixed 12-digit scientific formatting, preceded
/// by `header` as `#` comment lines.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W, header: Option<&str>) -> Result<()> {
    let mut w = csv_writer(out, header)?;
    w.write_record(CSV_COLUMNS)?;
    for s in &traj.samples {
        let vals = std::iter::once(s.t)
            .chain(s.x)
            .chain(s.x_ref[..3].iter().copied())
            .chain(s.q)
            .chain(s.qd)
            .chain(s.tau)
            .chain(s.u)
            .chain([s.lambda])
            .chain(s.forces)
            .chain([s.cone_margin])
            .chain(s.squeeze_wrench)
            .chain([s.constraint_residual]);
        w.write_record(vals.map(|v| format!("{v:.12e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(traj: &Trajectory, path: &Path, header: Option<&str>) -> Result<()> {
    write_csv(traj, std::io::BufWriter::new(std::fs::File::create(path)?), header)
}

/// Samples written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<Sample>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let head = r.headers()?.clone();
    if head.iter().ne(CSV_COLUMNS) {
        return Err(Error::Config("trajectory CSV columns do not match".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let take = |i: usize, n: usize| v[i..i + n].to_vec();
        let arr = |i: usize| -> [f64; 4] { take(i, 4).try_into().unwrap() };
        let tri = |i: usize| -> [f64; 3] { take(i, 3).try_into().unwrap() };
        out.push(Sample {
            t: v[0],
            x: take(1, 6).try_into().unwrap(),
            x_ref: [v[7], v[8], v[9], 0.0, 0.0, 0.0],
            q: arr(10),
            qd: arr(14),
            tau: arr(18),
            u: tri(22),
            lambda: v[25],
            forces: arr(26),
            cone_margin: v[30],
            squeeze_wrench: tri(31),
            constraint_residual: v[34],
        });
    }
    Ok(out)
}

/// Column order of [`write_pole_csv`]: one row per pole.
pub const POLE_CSV_COLUMNS: [&str; 5] = ["t", "re", "im", "inside", "worst_margin"];

pub fn write_pole_csv<W: Write>(trace: &PoleTrace, out: W, header: Option<&str>) -> Result<()> {
    let mut w = csv_writer(out, header)?;
    w.write_record(POLE_CSV_COLUMNS)?;
    for s in &trace.samples {
        for p in &s.poles {
            w.write_record([
                format!("{:.12e}", s.t),
                format!("{:.12e}", p[0]),
                format!("{:.12e}", p[1]),
                u8::from(s.inside).to_string(),
                format!("{:.12e}", s.worst_margin),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
