//! Tightened optimality program on the restricted uncertainty box.
//!
//! The sample-size bound for the default tightening is near 10^5 scenarios;
//! pass a count to solve a smaller program, e.g.
//! `cargo run --release --example optimality_design -- 2000`.
//! Larger counts may take many minutes.

use graspsynth::config::ExperimentConfig;
use graspsynth::experiments::{optimality_config, scenario_count};
use graspsynth::lmi::Designer;
use graspsynth::scenario::{draw_scenarios, solve_optimality_scp};

fn main() -> graspsynth::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.design.designer = Designer::Optimality;
    cfg.design.optimality.lipschitz_blocks = Some([7.4713, 8.0188, 2.7833]);
    let oc = optimality_config(&cfg)?;
    let bound = scenario_count(&cfg, Some(&oc))?;
    let n: usize = std::env::args()
        .nth(1)
        .map_or(Ok(200), |s| s.parse())
        .expect("scenario count");
    println!("tightening {:.6}, bound N = {bound}, solving with {n}", oc.alpha_tight);
    let params = cfg.params()?;
    let set = draw_scenarios(&cfg.uncertainty(&params)?, n, cfg.design.seed)?;
    let d = solve_optimality_scp(&set, &cfg.model(&params), &cfg.region()?, &oc, &cfg.solver_options())?;
    let c = &d.certificate;
    println!("status {:?}, J* = {:.4}", c.status, c.j_star);
    println!(
        "solver {} in {} iterations, gap {:.3e}",
        c.diagnostics.solver_status, c.diagnostics.iterations, c.diagnostics.relative_gap
    );
    if let Some(ctl) = d.controller {
        println!("gain L ={:.4}", ctl.gain);
    }
    Ok(())
}
