//! Closed-loop poles of the scenario and grid gains along a recovery
//! trajectory inside the design workspace.

use graspsynth::config::ExperimentConfig;
use graspsynth::experiments::run_design;
use graspsynth::lmi::Designer;
use graspsynth::simulator::{pole_trace, simulate, write_pole_csv, SimConfig};

fn main() -> graspsynth::Result<()> {
    let mut cfg = ExperimentConfig::default();
    let params = cfg.params()?;
    let region = cfg.region()?;
    let scen = run_design(&cfg)?.controller.expect("feasible design");
    cfg.design.designer = Designer::Grid;
    let grid = run_design(&cfg)?.controller.expect("feasible grid design");
    let e = cfg.workspace.equilibrium();
    let sim = SimConfig::maneuver([e[0], e[1] - 0.03, e[2]], [0.0, 0.03, 0.0], 0.0, 0.0).with_horizon(12.0);
    let tr = simulate(&scen, &sim, &params)?;
    println!("trajectory {:?}, {} samples", tr.termination, tr.samples.len());
    for (name, ctl) in [("scenario", &scen), ("grid", &grid)] {
        let trace = pole_trace(&tr, &ctl.gain, &region, 100, &params)?;
        let worst = trace
            .samples
            .iter()
            .map(|s| s.worst_margin)
            .fold(f64::INFINITY, f64::min);
        let unstable = trace
            .samples
            .iter()
            .filter(|s| s.poles.iter().any(|p| p[0] >= 0.0))
            .count();
        println!(
            "{name:<9} in-region fraction {:.3}, dispersion {:.3}, worst margin {worst:.3}, {unstable} samples with an unstable pole",
            trace.inside_fraction(),
            trace.dispersion(),
        );
        let path = std::env::temp_dir().join(format!("graspsynth_{name}_poles.csv"));
        write_pole_csv(&trace, &mut std::fs::File::create(&path)?, Some(name))?;
        println!("  wrote {}", path.display());
    }
    Ok(())
}
