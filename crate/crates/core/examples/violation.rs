//! Monte Carlo estimate of the violation probability of scenario designs for
//! several violation levels.

use graspsynth::config::ExperimentConfig;
use graspsynth::experiments::run_design;
use graspsynth::scenario::empirical_violation;

fn main() -> graspsynth::Result<()> {
    let mut cfg = ExperimentConfig::default();
    let params = cfg.params()?;
    let b = cfg.uncertainty(&params)?;
    let model = cfg.model(&params);
    for eps in [0.5, 0.2, 0.1] {
        cfg.design.epsilon = eps;
        let Some(ctl) = run_design(&cfg)?.controller else {
            println!("eps = {eps}: infeasible");
            continue;
        };
        let v = empirical_violation(&ctl, &b, 4000, 99, &model)?;
        println!(
            "eps = {eps:<4} violation {:.4} (95% CI [{:.4}, {:.4}]) over {} fresh scenarios",
            v.rate, v.ci_low, v.ci_high, v.samples
        );
    }
    Ok(())
}
