//! Linearization of the object-level dynamics at an equilibrium and at a
//! moving operating point, with the second-order residual check.

use graspsynth::hand::{default_equilibrium, HandObjectParams};
use graspsynth::linearization::{linearize, resting_torque, validate_linearization, OperatingPoint};
use nalgebra::{Vector3, Vector6};

fn main() -> graspsynth::Result<()> {
    let p = HandObjectParams::default();
    let e = default_equilibrium();
    let x_eq = Vector6::new(e[0], e[1], e[2], 0.0, 0.0, 0.0);
    let eq = OperatingPoint::equilibrium(e, 0.0, &p)?;
    let moving = OperatingPoint::consistent(
        Vector3::new(0.0, 0.05, 0.12),
        Vector3::new(0.03, -0.02, 0.4),
        3e-3,
        x_eq,
        &p,
    )?;
    let tau = resting_torque(&moving.q, moving.pose[2], 0.0, &p)?;
    let moving = moving.with_torque(tau);
    for (name, op) in [("equilibrium", eq), ("moving", moving)] {
        let plant = linearize(&op, 0.0, &p)?;
        let check = validate_linearization(&plant, &op, 1e-3, 0.0, &p)?;
        println!("{name}");
        println!("  A ={:.4}", plant.a);
        println!("  B ={:.4}", plant.b);
        println!("  affine term norm {:.3e}", plant.v.norm());
        println!("  residual ratio   {:.3}", check.ratio);
    }
    Ok(())
}
