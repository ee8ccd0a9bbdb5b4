//! Closed-loop maneuver of the scenario controller for several true contact
//! translations, with the trajectory of the first case written as CSV.

use graspsynth::config::ExperimentConfig;
use graspsynth::experiments::run_design;
use graspsynth::simulator::{metrics, simulate, write_csv_file, SimConfig};

fn main() -> graspsynth::Result<()> {
    let cfg = ExperimentConfig::default();
    let params = cfg.params()?;
    let ctl = run_design(&cfg)?.controller.expect("feasible design");
    let e = cfg.workspace.equilibrium();
    let start = [e[0], e[1] - 0.03, e[2]];
    let out = std::env::temp_dir().join("graspsynth_maneuver.csv");
    for (i, delta) in [0.0, -4e-3, 5e-3].into_iter().enumerate() {
        let sim = SimConfig::maneuver(start, [0.04, 0.0, 11f64.to_radians()], delta, 0.0).with_horizon(15.0);
        let tr = simulate(&ctl, &sim, &params)?;
        let m = metrics(&tr);
        println!(
            "delta_true {:+.1} mm: {:?} after {:.2} s, error {:.3} mm / {:.3} deg, min cone margin {:.3e} N, settling {:?}",
            delta * 1e3,
            m.termination,
            m.duration,
            m.final_position_error * 1e3,
            m.final_angle_error.to_degrees(),
            m.min_cone_margin,
            m.settling_time
        );
        if i == 0 {
            write_csv_file(&tr, &out, Some("maneuver from y - 30 mm, delta_true = 0"))?;
            println!("  wrote {}", out.display());
        }
    }
    Ok(())
}
