//! Scenario counts for the feasibility and the tightened optimality program.

use graspsynth::lmi::decision_variable_count;
use graspsynth::scenario::{binomial_tail, lipschitz_lmi, sample_size_feasibility, sample_size_optimality};

fn main() -> graspsynth::Result<()> {
    let d = decision_variable_count(6, 3) as u64;
    println!("decision variables d = {d}");
    for (eps, beta) in [(0.5, 1e-3), (0.1, 1e-3), (0.05, 1e-6)] {
        let n = sample_size_feasibility(eps, beta, d)?;
        println!(
            "feasibility eps = {eps:<5} beta = {beta:<6e} N = {n:<6} tail(N) = {:.3e} tail(N-1) = {:.3e}",
            binomial_tail(n, eps, d),
            binomial_tail(n - 1, eps, d)
        );
    }
    let l = lipschitz_lmi(1.0, 30f64.to_radians(), 1.0, 1.0);
    println!("block Lipschitz constants per unit mu and slope: {:.4?}", l.blocks());
    let l_xi = [7.4713f64, 8.0188, 2.7833].into_iter().fold(0.0, f64::max);
    let s = sample_size_optimality(0.99, 0.999, 4, l_xi, d)?;
    println!(
        "optimality eps = 0.99 beta = 0.999 L = {l_xi}: alpha_t = {:.6}, eps_eff = {:.4e}, N = {}",
        s.alpha_tight, s.epsilon_eff, s.n
    );
    Ok(())
}
