//! Affine models `x~' = A x~ + B u~ + V` of the hand-object dynamics around
//! operating points, with `x~ = x - x_eq`.

use nalgebra::{Matrix6, Matrix6x3, SMatrix, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{self, grasp_map, grasp_nullspace, grasp_pinv, GraspKinematics, HandObjectParams, State};

/// Relative central-difference step for the state Jacobian.
pub const FD_REL_STEP: f64 = 1e-6;

/// Point at which the dynamics are linearized. The joint angles are stored
/// separately from the pose because sampled operating points need not be
/// kinematically consistent with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub pose: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub q: Vector4<f64>,
    pub tau: Vector4<f64>,
    /// True contact translation.
    pub delta: f64,
    /// Equilibrium state the affine model is expressed around.
    pub x_eq: State,
}

impl OperatingPoint {
    /// Operating point whose joints follow from inverse kinematics, with zero
    /// torque.
    pub fn consistent(
        pose: Vector3<f64>,
        vel: Vector3<f64>,
        delta: f64,
        x_eq: State,
        params: &HandObjectParams,
    ) -> Result<Self> {
        let q = hand::inverse_kinematics(&pose, delta, params)?;
        Self::with_joints(q, pose, vel, delta, x_eq)
    }

    pub fn with_joints(
        q: Vector4<f64>,
        pose: Vector3<f64>,
        vel: Vector3<f64>,
        delta: f64,
        x_eq: State,
    ) -> Result<Self> {
        let op = Self {
            pose,
            vel,
            q,
            tau: Vector4::zeros(),
            delta,
            x_eq,
        };
        op.check()?;
        Ok(op)
    }

    /// The equilibrium itself: object at rest at `pose`.
    pub fn equilibrium(pose: Vector3<f64>, delta: f64, params: &HandObjectParams) -> Result<Self> {
        let x_eq = Vector6::new(pose[0], pose[1], pose[2], 0.0, 0.0, 0.0);
        Self::consistent(pose, Vector3::zeros(), delta, x_eq, params)
    }

    /// Holds `tau` fixed during linearization instead of zero torque.
    pub fn with_torque(mut self, tau: Vector4<f64>) -> Self {
        self.tau = tau;
        self
    }

    fn check(&self) -> Result<()> {
        let finite = self.pose.iter().all(|v| v.is_finite())
            && self.vel.iter().all(|v| v.is_finite())
            && self.q.iter().all(|v| v.is_finite())
            && self.tau.iter().all(|v| v.is_finite())
            && self.x_eq.iter().all(|v| v.is_finite())
            && self.delta.is_finite();
        if finite {
            Ok(())
        } else {
            Err(Error::Domain("operating point has non-finite entries".into()))
        }
    }

    pub fn state(&self) -> State {
        Vector6::new(
            self.pose[0],
            self.pose[1],
            self.pose[2],
            self.vel[0],
            self.vel[1],
            self.vel[2],
        )
    }

    /// Distance between `q` and the inverse-kinematics solution for the pose.
    pub fn ik_inconsistency(&self, params: &HandObjectParams) -> Result<f64> {
        let q = hand::inverse_kinematics(&self.pose, self.delta, params)?;
        Ok((q - self.q).norm())
    }
}

/// Joint torque `J_h^T N^ lambda` that keeps both normal forces at `f_min`
/// while the object is at rest, built from the estimated contact
/// translation.
pub fn resting_torque(q: &Vector4<f64>, theta: f64, delta_hat: f64, params: &HandObjectParams) -> Result<Vector4<f64>> {
    let n = grasp_nullspace(&grasp_map(delta_hat, params)?.g)?;
    let lambda = params.f_min / n[1].min(n[3]);
    let jh = hand::hand_jacobian(q, theta, params)?;
    Ok(jh.transpose() * n * lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePlant {
    pub a: Matrix6<f64>,
    /// Object-level input matrix with `G^+` of the estimated grasp absorbed.
    pub b: Matrix6x3<f64>,
    pub v: Vector6<f64>,
}

pub type Matrix7 = SMatrix<f64, 7, 7>;
pub type Matrix7x3 = SMatrix<f64, 7, 3>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedPlant {
    pub a: Matrix7,
    pub b: Matrix7x3,
}

/// Vector field linearized at `op`: joints follow the first-order path
/// `q(x_o) = q* + W*(x_o - x_o*)` and `q' = W x_o'`, with the torque held at
/// `op.tau`.
fn local_field(
    op: &OperatingPoint,
    w_star: &nalgebra::Matrix4x3<f64>,
    x: &State,
    params: &HandObjectParams,
) -> Result<State> {
    let pose = x.fixed_rows::<3>(0).into_owned();
    let vel = x.fixed_rows::<3>(3).into_owned();
    let q = op.q + w_star * (pose - op.pose);
    let kin = GraspKinematics::new(&q, &pose, op.delta, params)?;
    let qd = kin.w * vel;
    let acc = hand::object_acceleration(&q, &qd, &pose, &vel, &op.tau, op.delta, params)?;
    Ok(Vector6::new(vel[0], vel[1], vel[2], acc[0], acc[1], acc[2]))
}

/// Linearizes with the default relative step.
pub fn linearize(op: &OperatingPoint, delta_hat: f64, params: &HandObjectParams) -> Result<AffinePlant> {
    linearize_with_step(op, delta_hat, params, FD_REL_STEP)
}

pub fn linearize_with_step(
    op: &OperatingPoint,
    delta_hat: f64,
    params: &HandObjectParams,
    rel_step: f64,
) -> Result<AffinePlant> {
    params.check_delta(op.delta)?;
    let kin = GraspKinematics::new(&op.q, &op.pose, op.delta, params)?;
    let xs = op.state();
    let f0 = local_field(op, &kin.w, &xs, params)?;

    let mut a = Matrix6::zeros();
    for i in 0..6 {
        let h = rel_step * xs[i].abs().max(1.0);
        let mut xp = xs;
        let mut xm = xs;
        xp[i] += h;
        xm[i] -= h;
        let col = (local_field(op, &kin.w, &xp, params)? - local_field(op, &kin.w, &xm, params)?) / (2.0 * h);
        a.set_column(i, &col);
    }
    // The kinematic rows are exact.
    a.fixed_view_mut::<3, 6>(0, 0).fill(0.0);
    a.fixed_view_mut::<3, 3>(0, 3).fill_with_identity();

    let qd = kin.w * op.vel;
    let d = hand::dynamics_terms(&op.q, &op.pose, &qd, &op.vel, op.delta, params)?;
    let g_hat = grasp_map(delta_hat, params)?.world(op.pose[2]);
    let b_low =
        d.m.cholesky()
            .ok_or_else(|| Error::Singular("object-level inertia not positive definite".into()))?
            .solve(&(kin.gw * grasp_pinv(&g_hat)?));
    let mut b = Matrix6x3::zeros();
    b.fixed_view_mut::<3, 3>(3, 0).copy_from(&b_low);

    let v = f0 + a * (op.x_eq - xs);
    Ok(AffinePlant { a, b, v })
}

pub fn augment(plant: &AffinePlant) -> AugmentedPlant {
    let mut a = Matrix7::zeros();
    a.fixed_view_mut::<6, 6>(0, 0).copy_from(&plant.a);
    a.fixed_view_mut::<6, 1>(0, 6).copy_from(&plant.v);
    let mut b = Matrix7x3::zeros();
    b.fixed_view_mut::<6, 3>(0, 0).copy_from(&plant.b);
    AugmentedPlant { a, b }
}

/// Errors of the affine model against the nonlinear field at perturbation
/// scale `h` and `h/2`, and their ratio (about 4 for a correct model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationCheck {
    pub residual_h: f64,
    pub residual_half: f64,
    pub ratio: f64,
}

/// Direction of the state perturbation used by [`validate_linearization`].
pub const CHECK_STATE_DIRECTION: [f64; 6] = [1.0, -0.7, 0.5, 0.3, -0.4, 0.6];
/// Direction of the object-level input perturbation.
pub const CHECK_INPUT_DIRECTION: [f64; 3] = [0.4, -0.3, 0.01];

/// Compares the affine model with [`hand::nonlinear_derivative`] under a
/// joint state and input perturbation of size `h`. The operating point must
/// be kinematically consistent.
pub fn validate_linearization(
    plant: &AffinePlant,
    op: &OperatingPoint,
    h: f64,
    delta_hat: f64,
    params: &HandObjectParams,
) -> Result<LinearizationCheck> {
    let xs = op.state();
    let f0 = hand::nonlinear_derivative(&xs, &op.tau, op.delta, params)?;
    let jh = hand::hand_jacobian(&op.q, op.pose[2], params)?;
    let g_hat = grasp_map(delta_hat, params)?.world(op.pose[2]);
    let tau_per_u = jh.transpose() * grasp_pinv(&g_hat)?;
    let dx = Vector6::from_column_slice(&CHECK_STATE_DIRECTION);
    let du = Vector3::from_column_slice(&CHECK_INPUT_DIRECTION);
    let err = |s: f64| -> Result<f64> {
        let x = xs + dx * s;
        let u = du * s;
        let nl = hand::nonlinear_derivative(&x, &(op.tau + tau_per_u * u), op.delta, params)?;
        let lin = f0 + plant.a * (dx * s) + plant.b * u;
        Ok((nl - lin).norm())
    };
    let residual_h = err(h)?;
    let residual_half = err(0.5 * h)?;
    Ok(LinearizationCheck {
        residual_h,
        residual_half,
        ratio: residual_h / residual_half,
    })
}
