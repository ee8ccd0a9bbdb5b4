//! Kinematics, grasp map and contact forces of the hand-object system at the
//! design equilibrium.

use graspsynth::hand::{self, default_equilibrium, HandObjectParams};
use graspsynth::linearization::resting_torque;
use nalgebra::{Vector3, Vector4, Vector6};

fn main() -> graspsynth::Result<()> {
    let p = HandObjectParams::default();
    let pose = default_equilibrium();
    for delta in [-4e-3, 0.0, 5e-3] {
        let q = hand::inverse_kinematics(&pose, delta, &p)?;
        let g = hand::grasp_map(delta, &p)?.world(pose[2]);
        let n = hand::grasp_nullspace(&g)?;
        let x = Vector6::new(pose[0], pose[1], pose[2], 0.0, 0.0, 0.0);
        let tau = resting_torque(&q, pose[2], delta, &p)?;
        let f = hand::contact_forces(&x, &tau, delta, &p)?;
        println!("delta = {:+.1} mm", delta * 1e3);
        println!("  q (deg)          {:.2?}", q.map(f64::to_degrees).as_slice());
        println!(
            "  hand Jacobian det {:.4e}",
            hand::hand_jacobian(&q, pose[2], &p)?.determinant()
        );
        println!("  grasp map rank   {}", g.rank(1e-12));
        println!("  internal force   {:.4?}", n.as_slice());
        println!("  contact forces   {:.4?}", f.as_slice());
        println!(
            "  residual         {:.2e}",
            hand::contact_constraint_residual(&q, &Vector4::zeros(), &pose, &Vector3::zeros(), delta, &p)?
        );
    }
    Ok(())
}
