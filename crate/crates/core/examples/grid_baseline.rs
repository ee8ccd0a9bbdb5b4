//! Deterministic grid baseline over the contact translation alone, compared
//! with the scenario design on fresh off-equilibrium scenarios.

use graspsynth::config::ExperimentConfig;
use graspsynth::experiments::run_design;
use graspsynth::lmi::Designer;
use graspsynth::scenario::empirical_violation;

fn main() -> graspsynth::Result<()> {
    let mut cfg = ExperimentConfig::default();
    let params = cfg.params()?;
    let b = cfg.uncertainty(&params)?;
    let model = cfg.model(&params);
    for designer in [Designer::Grid, Designer::Feasibility] {
        cfg.design.designer = designer;
        let out = run_design(&cfg)?;
        println!("{designer:?}: {:?}", out.certificate.status());
        let Some(ctl) = out.controller else { continue };
        let v = empirical_violation(&ctl, &b, 2000, 7, &model)?;
        println!(
            "  violation on the workspace box {}/{} = {:.4} (95% CI [{:.4}, {:.4}]), poles outside {}",
            v.violations, v.samples, v.rate, v.ci_low, v.ci_high, v.pole_failures
        );
    }
    Ok(())
}
