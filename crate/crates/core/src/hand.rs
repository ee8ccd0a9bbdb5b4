//! Planar two-finger hand grasping a rectangular object.
//!
//! Each finger is a planar two-link arm whose tip holds a fixed point contact
//! on one side of the object. Finger 0 touches the `+x` face at `(r0, 0)` in
//! object coordinates, finger 1 the `-x` face at `(-r0, -delta)`, where
//! `delta` is the uncertain translation of the second contact. Contact forces
//! are expressed per contact as `[tangential, normal]` with the normal
//! pointing into the object, so entries 1 and 3 of a stacked contact force
//! vector are the two normal components.
//!
//! Joint angles are measured in a per-finger frame whose first axis points
//! away from the hand's centre line. Both fingers use the elbow-out branch,
//! which in that frame is `q_elbow in (0, pi)`.
//!
//! The object state is `x = [P_x, P_y, P_theta, dP_x, dP_y, dP_theta]`. With
//! fingers and object rigidly linked through the contacts, joint motion is
//! slaved to object motion by `J_h q' = G^T x_o'` and the hand-object system
//! reduces to
//!
//! ```text
//! M(x_o) x_o'' + C(x_o, x_o') x_o' = G J_h^{-T} tau
//! ```
//!
//! with `M = M_o + W^T M_h W`, `C = W^T M_h W' + W^T C_h W` and
//! `W = J_h^{-1} G^T`. Gravity is neglected.

use nalgebra::{
    DMatrix, Matrix2, Matrix3, Matrix3x4, Matrix4, Matrix4x3, Rotation2, Vector2, Vector3, Vector4, Vector6,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Object state `[pose; velocity]`.
pub type State = Vector6<f64>;

/// Condition number of `J_h` above which a configuration is treated as
/// singular.
pub const SINGULAR_COND: f64 = 1e6;

/// Physical parameters in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandObjectParams {
    /// Base position of each finger (m).
    pub finger_base: [[f64; 2]; 2],
    /// Proximal and distal link length of each finger (m).
    pub link_lengths: [[f64; 2]; 2],
    /// Link masses (kg).
    pub link_masses: [[f64; 2]; 2],
    /// Link inertias about the link centre of mass (kg m^2).
    pub link_inertias: [[f64; 2]; 2],
    /// Reflected actuator inertia at each joint (kg m^2), added to the joint
    /// space inertia diagonal.
    pub rotor_inertias: [[f64; 2]; 2],
    pub object_mass: f64,
    /// Object inertia about its centre (kg m^2).
    pub object_inertia: f64,
    /// Half-width of the object: distance from its centre to each contact
    /// face (m).
    pub r0: f64,
    pub mu_f: f64,
    /// Minimum normal force the grasp must keep (N).
    pub f_min: f64,
    /// Admissible interval of the contact translation `delta` (m).
    pub delta_range: [f64; 2],
    /// Per-joint `[lower, upper]` limits (rad), ordered `q1..q4`.
    pub joint_limits: [[f64; 2]; 4],
}

impl Default for HandObjectParams {
    fn default() -> Self {
        let l = 0.045;
        let m = 0.05;
        Self {
            finger_base: [[0.035, 0.0], [-0.035, 0.0]],
            link_lengths: [[l, l], [l, l]],
            link_masses: [[m, m], [m, m]],
            link_inertias: [[m * l * l / 12.0; 2]; 2],
            rotor_inertias: [[DEFAULT_ROTOR_INERTIA; 2]; 2],
            object_mass: 0.02,
            object_inertia: 0.02 * (0.035_f64.powi(2) * 2.0) / 12.0,
            r0: 0.0175,
            mu_f: 0.8,
            f_min: 0.5,
            delta_range: [-0.004, 0.005],
            joint_limits: [
                [-std::f64::consts::PI, std::f64::consts::PI],
                [0.05, std::f64::consts::PI - 0.05],
                [-std::f64::consts::PI, std::f64::consts::PI],
                [0.05, std::f64::consts::PI - 0.05],
            ],
        }
    }
}

/// Default reflected actuator inertia per joint: a small geared servo.
pub const DEFAULT_ROTOR_INERTIA: f64 = 5.0e-4;

impl HandObjectParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be strictly positive, got {v}")))
            }
        };
        for f in 0..2 {
            for k in 0..2 {
                pos(self.link_lengths[f][k], "link length")?;
                pos(self.link_masses[f][k], "link mass")?;
                pos(self.link_inertias[f][k], "link inertia")?;
                if !(self.rotor_inertias[f][k] >= 0.0) {
                    return Err(Error::Config("rotor inertia must be non-negative".into()));
                }
            }
        }
        pos(self.object_mass, "object mass")?;
        pos(self.object_inertia, "object inertia")?;
        pos(self.r0, "r0")?;
        pos(self.mu_f, "friction coefficient")?;
        if !(self.f_min >= 0.0) {
            return Err(Error::Config("f_min must be non-negative".into()));
        }
        if !(self.delta_range[0] <= self.delta_range[1]) {
            return Err(Error::Config("delta range is empty".into()));
        }
        for (j, lim) in self.joint_limits.iter().enumerate() {
            if !(lim[0] < lim[1]) {
                return Err(Error::Config(format!("joint {} limits are empty", j + 1)));
            }
        }
        Ok(())
    }

    pub fn check_delta(&self, delta: f64) -> Result<()> {
        let [lo, hi] = self.delta_range;
        if delta.is_finite() && delta >= lo - 1e-12 && delta <= hi + 1e-12 {
            Ok(())
        } else {
            Err(Error::Domain(format!("delta = {delta} m outside [{lo}, {hi}] m")))
        }
    }

    /// +1 when the finger's outward axis is world `+x`.
    fn side(&self, finger: usize) -> f64 {
        if self.finger_base[finger][0] >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Contact positions in object coordinates.
    pub fn contact_offsets(&self, delta: f64) -> [Vector2<f64>; 2] {
        [Vector2::new(self.r0, 0.0), Vector2::new(-self.r0, -delta)]
    }
}

/// Planar object pose and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl ObjectPose {
    pub fn at_rest(px: f64, py: f64, theta: f64) -> Self {
        Self {
            position: Vector3::new(px, py, wrap_angle(theta)),
            velocity: Vector3::zeros(),
        }
    }

    pub fn from_state(x: &State) -> Self {
        Self {
            position: x.fixed_rows::<3>(0).into_owned(),
            velocity: x.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn state(&self) -> State {
        let p = &self.position;
        let v = &self.velocity;
        Vector6::new(p[0], p[1], p[2], v[0], v[1], v[2])
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Joint angles and rates, ordered finger 0 (`q1, q2`) then finger 1
/// (`q3, q4`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub q: Vector4<f64>,
    pub qd: Vector4<f64>,
}

/// Grasp map in object coordinates together with the contact translation it
/// was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspMap {
    pub g: Matrix3x4<f64>,
    pub delta: f64,
}

impl GraspMap {
    /// The grasp map with force directions expressed in the world frame for
    /// an object at orientation `theta`.
    pub fn world(&self, theta: f64) -> Matrix3x4<f64> {
        let mut out = self.g;
        let r = Rotation2::new(theta).into_inner();
        let top = r * self.g.fixed_rows::<2>(0);
        out.fixed_rows_mut::<2>(0).copy_from(&top);
        out
    }
}

/// Grasp map for contact translation `delta`.
pub fn grasp_map(delta: f64, params: &HandObjectParams) -> Result<GraspMap> {
    params.check_delta(delta)?;
    let r0 = params.r0;
    #[rustfmt::skip]
    let g = Matrix3x4::new(
        0.0, -1.0, 0.0, 1.0,
        1.0, 0.0, -1.0, 0.0,
        r0, 0.0, r0, delta,
    );
    Ok(GraspMap { g, delta })
}

/// Moore-Penrose pseudo-inverse `G^T (G G^T)^{-1}` of a full-row-rank matrix.
pub fn grasp_pseudo_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = g.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if g.nrows() > g.ncols() || !(smin > 1e-12 * smax.max(1.0)) {
        return Err(Error::Singular(format!(
            "grasp map is rank deficient (singular values {:?})",
            svd.singular_values.as_slice()
        )));
    }
    let ggt = g * g.transpose();
    let inv = ggt
        .cholesky()
        .ok_or_else(|| Error::Singular("G G^T not positive definite".into()))?
        .inverse();
    Ok(g.transpose() * inv)
}

/// Fixed-size convenience wrapper around [`grasp_pseudo_inverse`].
pub fn grasp_pinv(g: &Matrix3x4<f64>) -> Result<Matrix4x3<f64>> {
    let d = grasp_pseudo_inverse(&DMatrix::from_column_slice(3, 4, g.as_slice()))?;
    Ok(Matrix4x3::from_column_slice(d.as_slice()))
}

/// Unit basis of `ker G`. The sign is chosen so that the basis squeezes the
/// object (the two normal components sum to a positive value).
pub fn grasp_nullspace(g: &Matrix3x4<f64>) -> Result<Vector4<f64>> {
    // Generalized cross product: component k is the signed minor obtained by
    // deleting column k.
    let minor = |skip: usize| {
        let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
        Matrix3::from_columns(&[g.column(cols[0]), g.column(cols[1]), g.column(cols[2])]).determinant()
    };
    let mut n = Vector4::new(minor(0), -minor(1), minor(2), -minor(3));
    let norm = n.norm();
    let scale = g.norm().max(1.0);
    if !(norm > 1e-12 * scale.powi(3)) {
        return Err(Error::Singular("grasp map kernel is not one-dimensional".into()));
    }
    n /= norm;
    if n[1] + n[3] < 0.0 {
        n = -n;
    }
    Ok(n)
}

fn finger_local_tip(l: [f64; 2], q1: f64, q2: f64) -> Vector2<f64> {
    Vector2::new(
        l[0] * q1.cos() + l[1] * (q1 + q2).cos(),
        l[0] * q1.sin() + l[1] * (q1 + q2).sin(),
    )
}

/// World fingertip positions for joint angles `q`.
pub fn forward_kinematics(q: &Vector4<f64>, params: &HandObjectParams) -> [Vector2<f64>; 2] {
    let mut out = [Vector2::zeros(); 2];
    for f in 0..2 {
        let local = finger_local_tip(params.link_lengths[f], q[2 * f], q[2 * f + 1]);
        let b = params.finger_base[f];
        out[f] = Vector2::new(b[0] + params.side(f) * local[0], b[1] + local[1]);
    }
    out
}

/// World contact positions for an object pose.
pub fn contact_points(pose: &Vector3<f64>, delta: f64, params: &HandObjectParams) -> [Vector2<f64>; 2] {
    let r = Rotation2::new(pose[2]);
    let p = Vector2::new(pose[0], pose[1]);
    let off = params.contact_offsets(delta);
    [p + r * off[0], p + r * off[1]]
}

/// Elbow-out joint angles `(proximal, distal)` placing the tip of `finger`
/// at the world point `target`. Joint limits are not checked.
pub fn finger_inverse_kinematics(
    finger: usize,
    target: &Vector2<f64>,
    params: &HandObjectParams,
) -> Result<(f64, f64)> {
    let b = params.finger_base[finger];
    let u = params.side(finger) * (target[0] - b[0]);
    let v = target[1] - b[1];
    let [l1, l2] = params.link_lengths[finger];
    let d2 = u * u + v * v;
    let c2 = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(c2.abs() <= 1.0) {
        return Err(Error::Unreachable(format!(
            "finger {finger}: target at distance {:.6} m, reach [{:.6}, {:.6}] m",
            d2.sqrt(),
            (l1 - l2).abs(),
            l1 + l2
        )));
    }
    let q2 = c2.acos();
    let q1 = v.atan2(u) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
    Ok((wrap_angle(q1), q2))
}

/// Elbow-out joint angles placing both fingertips on the contact points of
/// the object at `pose`.
pub fn inverse_kinematics(pose: &Vector3<f64>, delta: f64, params: &HandObjectParams) -> Result<Vector4<f64>> {
    let targets = contact_points(pose, delta, params);
    let mut q = Vector4::zeros();
    for f in 0..2 {
        let (q1, q2) = finger_inverse_kinematics(f, &targets[f], params)?;
        q[2 * f] = q1;
        q[2 * f + 1] = q2;
    }
    check_joint_limits(&q, params)?;
    Ok(q)
}

pub fn check_joint_limits(q: &Vector4<f64>, params: &HandObjectParams) -> Result<()> {
    for j in 0..4 {
        let [lo, hi] = params.joint_limits[j];
        if !(q[j] >= lo && q[j] <= hi) {
            return Err(Error::Unreachable(format!(
                "joint {} = {:.6} rad outside limits [{lo:.6}, {hi:.6}]",
                j + 1,
                q[j]
            )));
        }
    }
    Ok(())
}

/// World-frame fingertip Jacobians stacked block-diagonally (4x4).
pub fn finger_jacobian(q: &Vector4<f64>, params: &HandObjectParams) -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    for f in 0..2 {
        let [l1, l2] = params.link_lengths[f];
        let (q1, q2) = (q[2 * f], q[2 * f + 1]);
        let (s1, c1) = q1.sin_cos();
        let (s12, c12) = (q1 + q2).sin_cos();
        let s = params.side(f);
        let blk = Matrix2::new(s * (-l1 * s1 - l2 * s12), s * (-l2 * s12), l1 * c1 + l2 * c12, l2 * c12);
        j.fixed_view_mut::<2, 2>(2 * f, 2 * f).copy_from(&blk);
    }
    j
}

/// Time derivative of [`finger_jacobian`] along joint rates `qd`.
pub fn finger_jacobian_dot(q: &Vector4<f64>, qd: &Vector4<f64>, params: &HandObjectParams) -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    for f in 0..2 {
        let [l1, l2] = params.link_lengths[f];
        let (q1, q2) = (q[2 * f], q[2 * f + 1]);
        let (w1, w12) = (qd[2 * f], qd[2 * f] + qd[2 * f + 1]);
        let (s1, c1) = q1.sin_cos();
        let (s12, c12) = (q1 + q2).sin_cos();
        let s = params.side(f);
        let blk = Matrix2::new(
            s * (-l1 * c1 * w1 - l2 * c12 * w12),
            s * (-l2 * c12 * w12),
            -l1 * s1 * w1 - l2 * s12 * w12,
            -l2 * s12 * w12,
        );
        j.fixed_view_mut::<2, 2>(2 * f, 2 * f).copy_from(&blk);
    }
    j
}

/// World directions of the `[tangential, normal]` axes of both contacts,
/// stacked block-diagonally.
pub fn contact_frames(theta: f64) -> Matrix4<f64> {
    let r = Rotation2::new(theta).into_inner();
    let e1 = r * Matrix2::new(0.0, -1.0, 1.0, 0.0);
    let e2 = r * Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let mut e = Matrix4::zeros();
    e.fixed_view_mut::<2, 2>(0, 0).copy_from(&e1);
    e.fixed_view_mut::<2, 2>(2, 2).copy_from(&e2);
    e
}

/// Jacobian of the world contact positions with respect to the pose (4x3).
pub fn contact_jacobian(theta: f64, delta: f64, params: &HandObjectParams) -> Matrix4x3<f64> {
    let off = params.contact_offsets(delta);
    let dr = Rotation2::new(theta + std::f64::consts::FRAC_PI_2);
    let mut j = Matrix4x3::zeros();
    for (i, c) in off.iter().enumerate() {
        let t = dr * c;
        j[(2 * i, 0)] = 1.0;
        j[(2 * i + 1, 1)] = 1.0;
        j[(2 * i, 2)] = t[0];
        j[(2 * i + 1, 2)] = t[1];
    }
    j
}

fn contact_jacobian_dot(theta: f64, omega: f64, delta: f64, params: &HandObjectParams) -> Matrix4x3<f64> {
    let off = params.contact_offsets(delta);
    let r = Rotation2::new(theta);
    let mut j = Matrix4x3::zeros();
    for (i, c) in off.iter().enumerate() {
        let t = -(r * c) * omega;
        j[(2 * i, 2)] = t[0];
        j[(2 * i + 1, 2)] = t[1];
    }
    j
}

fn condition_number(m: &Matrix4<f64>) -> f64 {
    let sv = m.singular_values();
    let smin = sv.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / smin
    }
}

/// Hand Jacobian `J_h`: joint rates to contact-frame fingertip velocities.
pub fn hand_jacobian(q: &Vector4<f64>, theta: f64, params: &HandObjectParams) -> Result<Matrix4<f64>> {
    let jf = finger_jacobian(q, params);
    let jh = contact_frames(theta).transpose() * jf;
    let cond = condition_number(&jh);
    if !(cond <= SINGULAR_COND) {
        return Err(Error::Singular(format!(
            "hand Jacobian condition number {cond:.3e} at q = {:?}",
            q.as_slice()
        )));
    }
    Ok(jh)
}

/// Joint-space inertia of both fingers (block-diagonal).
pub fn hand_mass_matrix(q: &Vector4<f64>, params: &HandObjectParams) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for f in 0..2 {
        let [l1, l2] = params.link_lengths[f];
        let [m1, m2] = params.link_masses[f];
        let [i1, i2] = params.link_inertias[f];
        let [ir1, ir2] = params.rotor_inertias[f];
        let (lc1, lc2) = (0.5 * l1, 0.5 * l2);
        let c2 = q[2 * f + 1].cos();
        let m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + ir1;
        let m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
        let m22 = i2 + m2 * lc2 * lc2 + ir2;
        m.fixed_view_mut::<2, 2>(2 * f, 2 * f)
            .copy_from(&Matrix2::new(m11, m12, m12, m22));
    }
    m
}

/// Joint-space Coriolis matrix with `M_h' - 2 C_h` skew-symmetric.
pub fn hand_coriolis(q: &Vector4<f64>, qd: &Vector4<f64>, params: &HandObjectParams) -> Matrix4<f64> {
    let mut c = Matrix4::zeros();
    for f in 0..2 {
        let l1 = params.link_lengths[f][0];
        let lc2 = 0.5 * params.link_lengths[f][1];
        let m2 = params.link_masses[f][1];
        let h = -m2 * l1 * lc2 * q[2 * f + 1].sin();
        let (w1, w2) = (qd[2 * f], qd[2 * f + 1]);
        c.fixed_view_mut::<2, 2>(2 * f, 2 * f)
            .copy_from(&Matrix2::new(h * w2, h * (w1 + w2), -h * w1, 0.0));
    }
    c
}

/// Object-level inertia, Coriolis matrix and gravity vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectLevelDynamics {
    pub m: Matrix3<f64>,
    pub c: Matrix3<f64>,
    pub n: Vector3<f64>,
}

/// Kinematic quantities shared by the dynamics routines.
#[derive(Debug, Clone, Copy)]
pub struct GraspKinematics {
    pub jh: Matrix4<f64>,
    /// World-frame grasp map.
    pub gw: Matrix3x4<f64>,
    /// Velocity map `q' = W x_o'`.
    pub w: Matrix4x3<f64>,
    jf_inv: Matrix4<f64>,
}

impl GraspKinematics {
    pub fn new(q: &Vector4<f64>, pose: &Vector3<f64>, delta: f64, params: &HandObjectParams) -> Result<Self> {
        let theta = pose[2];
        let jh = hand_jacobian(q, theta, params)?;
        let jf = finger_jacobian(q, params);
        let jf_inv = jf
            .try_inverse()
            .ok_or_else(|| Error::Singular("finger Jacobian not invertible".into()))?;
        let jc = contact_jacobian(theta, delta, params);
        let gw = jc.transpose() * contact_frames(theta);
        let w = jf_inv * jc;
        Ok(Self { jh, gw, w, jf_inv })
    }

    /// `W'` along the given joint and object velocities.
    pub fn w_dot(
        &self,
        q: &Vector4<f64>,
        qd: &Vector4<f64>,
        pose: &Vector3<f64>,
        omega: f64,
        delta: f64,
        params: &HandObjectParams,
    ) -> Matrix4x3<f64> {
        let jcd = contact_jacobian_dot(pose[2], omega, delta, params);
        let jfd = finger_jacobian_dot(q, qd, params);
        self.jf_inv * (jcd - jfd * self.w)
    }
}

/// Object-level `M`, `C` and `N` (gravity neglected, so `N = 0`).
pub fn dynamics_terms(
    q: &Vector4<f64>,
    pose: &Vector3<f64>,
    qd: &Vector4<f64>,
    vel: &Vector3<f64>,
    delta: f64,
    params: &HandObjectParams,
) -> Result<ObjectLevelDynamics> {
    let kin = GraspKinematics::new(q, pose, delta, params)?;
    Ok(dynamics_with(&kin, q, pose, qd, vel, delta, params))
}

fn dynamics_with(
    kin: &GraspKinematics,
    q: &Vector4<f64>,
    pose: &Vector3<f64>,
    qd: &Vector4<f64>,
    vel: &Vector3<f64>,
    delta: f64,
    params: &HandObjectParams,
) -> ObjectLevelDynamics {
    let mh = hand_mass_matrix(q, params);
    let ch = hand_coriolis(q, qd, params);
    let mo = Matrix3::from_diagonal(&Vector3::new(
        params.object_mass,
        params.object_mass,
        params.object_inertia,
    ));
    let w = &kin.w;
    let wd = kin.w_dot(q, qd, pose, vel[2], delta, params);
    let m = mo + w.transpose() * mh * w;
    let m = (m + m.transpose()) * 0.5;
    let c = w.transpose() * mh * wd + w.transpose() * ch * w;
    ObjectLevelDynamics {
        m,
        c,
        n: Vector3::zeros(),
    }
}

/// Object acceleration for explicit joint state `(q, qd)`, which need not be
/// consistent with the pose.
pub fn object_acceleration(
    q: &Vector4<f64>,
    qd: &Vector4<f64>,
    pose: &Vector3<f64>,
    vel: &Vector3<f64>,
    tau: &Vector4<f64>,
    delta: f64,
    params: &HandObjectParams,
) -> Result<Vector3<f64>> {
    let kin = GraspKinematics::new(q, pose, delta, params)?;
    let d = dynamics_with(&kin, q, pose, qd, vel, delta, params);
    let wrench = kin.gw
        * kin
            .jh
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::Singular("hand Jacobian not invertible".into()))?
        * tau;
    solve_spd(&d.m, &(wrench - d.c * vel - d.n))
}

fn solve_spd(m: &Matrix3<f64>, rhs: &Vector3<f64>) -> Result<Vector3<f64>> {
    m.cholesky()
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::Singular("object-level inertia not positive definite".into()))
}

/// Joint configuration consistent with the object state: `q` from inverse
/// kinematics and `q' = W x_o'`.
pub fn joint_state(x: &State, delta: f64, params: &HandObjectParams) -> Result<(JointConfig, GraspKinematics)> {
    let pose = x.fixed_rows::<3>(0).into_owned();
    let vel = x.fixed_rows::<3>(3).into_owned();
    let q = inverse_kinematics(&pose, delta, params)?;
    let kin = GraspKinematics::new(&q, &pose, delta, params)?;
    let qd = kin.w * vel;
    Ok((JointConfig { q, qd }, kin))
}

/// State derivative of the reduced hand-object model under joint torques
/// `tau`.
pub fn nonlinear_derivative(x: &State, tau: &Vector4<f64>, delta: f64, params: &HandObjectParams) -> Result<State> {
    let pose = x.fixed_rows::<3>(0).into_owned();
    let vel = x.fixed_rows::<3>(3).into_owned();
    let (jc, _) = joint_state(x, delta, params)?;
    let acc = object_acceleration(&jc.q, &jc.qd, &pose, &vel, tau, delta, params)?;
    Ok(Vector6::new(vel[0], vel[1], vel[2], acc[0], acc[1], acc[2]))
}

/// Contact forces `[t1, n1, t2, n2]` the fingers exert on the object, from
/// the finger equations of motion `M_h q'' + C_h q' = tau - J_h^T f_c`.
pub fn contact_forces(x: &State, tau: &Vector4<f64>, delta: f64, params: &HandObjectParams) -> Result<Vector4<f64>> {
    let pose = x.fixed_rows::<3>(0).into_owned();
    let vel = x.fixed_rows::<3>(3).into_owned();
    let (jc, kin) = joint_state(x, delta, params)?;
    let acc = object_acceleration(&jc.q, &jc.qd, &pose, &vel, tau, delta, params)?;
    let wd = kin.w_dot(&jc.q, &jc.qd, &pose, vel[2], delta, params);
    let qdd = kin.w * acc + wd * vel;
    let mh = hand_mass_matrix(&jc.q, params);
    let ch = hand_coriolis(&jc.q, &jc.qd, params);
    let jht_inv = kin
        .jh
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Singular("hand Jacobian not invertible".into()))?;
    Ok(jht_inv * (tau - mh * qdd - ch * jc.qd))
}

/// Kinetic energy of the hand-object system.
pub fn kinetic_energy(x: &State, delta: f64, params: &HandObjectParams) -> Result<f64> {
    let pose = x.fixed_rows::<3>(0).into_owned();
    let vel = x.fixed_rows::<3>(3).into_owned();
    let (jc, _) = joint_state(x, delta, params)?;
    let d = dynamics_terms(&jc.q, &pose, &jc.qd, &vel, delta, params)?;
    Ok(0.5 * vel.dot(&(d.m * vel)))
}

/// Residual `||J_h q' - G^T x_o'||` of the contact constraint.
pub fn contact_constraint_residual(
    q: &Vector4<f64>,
    qd: &Vector4<f64>,
    pose: &Vector3<f64>,
    vel: &Vector3<f64>,
    delta: f64,
    params: &HandObjectParams,
) -> Result<f64> {
    let jh = hand_jacobian(q, pose[2], params)?;
    let gw = grasp_map(delta, params)?.world(pose[2]);
    Ok((jh * qd - gw.transpose() * vel).norm())
}

/// Default equilibrium pose `(-17.5 mm, 66.5 mm, 0)`.
pub fn default_equilibrium() -> Vector3<f64> {
    Vector3::new(-0.0175, 0.0665, 0.0)
}
