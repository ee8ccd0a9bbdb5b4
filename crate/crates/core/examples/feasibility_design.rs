//! Scenario feasibility design over the default workspace, with the
//! certificate and the closed-loop poles at the nominal plant.

use graspsynth::config::ExperimentConfig;
use graspsynth::lmi::{closed_loop_poles, decision_variable_count};
use graspsynth::scenario::{draw_scenarios, sample_size_feasibility, solve_feasibility_scp, ScenarioModel};

fn main() -> graspsynth::Result<()> {
    let cfg = ExperimentConfig::default();
    let params = cfg.params()?;
    let region = cfg.region()?;
    let model = cfg.model(&params);
    let b = cfg.uncertainty(&params)?;
    let n = sample_size_feasibility(0.5, 1e-3, decision_variable_count(6, 3) as u64)? as usize;
    let set = draw_scenarios(&b, n, 2024)?;
    let design = solve_feasibility_scp(&set, &model, &region, 0.5, 1e-3, &cfg.solver_options())?;
    let c = &design.certificate;
    println!(
        "status {:?} with {} scenarios (required {})",
        c.status, c.n_used, c.n_required
    );
    println!(
        "solver {} {} in {} iterations",
        c.diagnostics.backend, c.diagnostics.solver_status, c.diagnostics.iterations
    );
    println!("max region eigenvalue {:.3e}", c.diagnostics.max_block_eigenvalue);
    let Some(ctl) = design.controller else {
        return Ok(());
    };
    println!("gain L ={:.4}", ctl.gain);
    let (a, bm) = model.plant(&b.nominal_scenario())?;
    for s in closed_loop_poles(&(a - bm * &ctl.gain)) {
        println!("  pole {:+.4} {:+.4}i", s.re, s.im);
    }
    Ok(())
}
