use blocksdp::SolverOptions;
use graspsynth::hand::{self, default_equilibrium, HandObjectParams};
use graspsynth::lmi::{self, DRegion};
use graspsynth::scenario::*;
use graspsynth::Result;
use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::beta::beta_reg;

fn params() -> HandObjectParams {
    HandObjectParams::default()
}

fn model() -> HandModel {
    HandModel::new(params(), default_equilibrium(), 0.0)
}

fn task_box() -> UncertaintyBox {
    UncertaintyBox::workspace(&params(), &Workspace::default_task()).unwrap()
}

/// Binomial CDF `P(X <= d - 1)` through the regularized incomplete beta
/// function.
fn tail_oracle(n: u64, eps: f64, d: u64) -> f64 {
    if d > n {
        return 1.0;
    }
    beta_reg((n - d + 1) as f64, d as f64, 1.0 - eps)
}

#[test]
fn binomial_tail_examples() {
    assert_eq!(binomial_tail(50, 0.0, 7), 1.0);
    assert!((binomial_tail(10, 0.5, 1) - 0.5f64.powi(10)).abs() < 1e-18);
    assert!(binomial_tail(110, 0.5, 39) <= 1e-3);
    assert!(binomial_tail(109, 0.5, 39) > 1e-3);
    assert!((binomial_tail(110, 0.5, 39) - 7.665262882362025e-4).abs() < 1e-15);
    assert!(binomial_tail(112, 0.5, 40) <= 1e-3);
    assert!(binomial_tail(111, 0.5, 40) > 1e-3);
    assert_eq!(binomial_tail(5, 1.0, 3), 0.0);
    // large n stays finite and matches the oracle
    let v = binomial_tail(111_714, 2.3e-4, 39);
    assert!((v - tail_oracle(111_714, 2.3e-4, 39)).abs() < 1e-10, "{v}");
}

#[test]
fn feasibility_sample_sizes() {
    assert_eq!(sample_size_feasibility(0.5, 1e-3, 39).unwrap(), 110);
    assert_eq!(sample_size_feasibility(0.5, 1e-3, 40).unwrap(), 112);
    assert_eq!(sample_size_feasibility(0.1, 0.01, 1).unwrap(), 44);
    // closed form for d = 1
    assert_eq!(44, (0.01f64.ln() / 0.9f64.ln()).ceil() as u64);
    assert!(sample_size_feasibility(0.25, 1e-3, 39).unwrap() > 111);
    assert!(sample_size_feasibility(1.5, 1e-3, 39).is_err());
    assert!(sample_size_feasibility(0.5, 0.0, 39).is_err());
    assert!(sample_size_feasibility(0.5, 1e-3, 0).is_err());
}

#[test]
fn optimality_sample_sizes() {
    let s = sample_size_optimality(0.99, 0.999, 4, 8.0188, 39).unwrap();
    assert!((s.alpha_tight - 7.9987).abs() < 1e-4, "{}", s.alpha_tight);
    assert!((s.epsilon_eff - (0.99f64 / 8.0188).powi(4)).abs() < 1e-18);
    assert!(!s.degenerate);
    assert_eq!(s.n, 96_875);
    assert!(binomial_tail(s.n, s.epsilon_eff, 39) <= 0.999);
    assert!(binomial_tail(s.n - 1, s.epsilon_eff, 39) > 0.999);

    let unit = sample_size_optimality(0.5, 1e-3, 1, 1.0, 39).unwrap();
    assert_eq!(unit.n, sample_size_feasibility(0.5, 1e-3, 39).unwrap());
    assert!((unit.alpha_tight - 0.5).abs() < 1e-15);

    let deg = sample_size_optimality(0.9, 0.5, 2, 0.5, 39).unwrap();
    assert!(deg.degenerate && deg.epsilon_eff < 1.0);
    assert!(sample_size_optimality(0.5, 0.5, 2, 0.0, 39).is_err());
}

#[test]
fn lipschitz_examples() {
    let c = lipschitz_lmi(1.0, 1e-12, 1.0, 0.0);
    assert!((c.l1 - 2.0).abs() < 1e-12 && (c.l2 - 1.0).abs() < 1e-12);
    assert!((c.l3 - 2.0).abs() < 1e-9 && (c.l - 2.0).abs() < 1e-9);
    let c = lipschitz_lmi(2.0, 30f64.to_radians(), 1.5, 0.5);
    assert!((c.l1 - 8.0).abs() < 1e-12);
    assert!((c.l2 - 4.0).abs() < 1e-12);
    assert!((c.l3 - 10.928).abs() < 1e-3, "{}", c.l3);
    assert_eq!(c.l, c.l3);
}

#[test]
fn clopper_pearson_against_beta_quantiles() {
    for (k, n) in [(0u64, 20u64), (3, 20), (20, 20), (517, 2000), (1, 1)] {
        let (lo, hi) = clopper_pearson(k, n, 0.05);
        let want_lo = if k == 0 {
            0.0
        } else {
            Beta::new(k as f64, (n - k + 1) as f64).unwrap().inverse_cdf(0.025)
        };
        let want_hi = if k == n {
            1.0
        } else {
            Beta::new((k + 1) as f64, (n - k) as f64).unwrap().inverse_cdf(0.975)
        };
        assert!((lo - want_lo).abs() < 1e-7, "{k}/{n}: {lo} vs {want_lo}");
        assert!((hi - want_hi).abs() < 1e-7, "{k}/{n}: {hi} vs {want_hi}");
    }
}

#[test]
fn reference_box_draws_stay_inside() {
    let b = UncertaintyBox::reference_joint_box(&params()).unwrap();
    assert_eq!(b.n_xi(), 6);
    let set = draw_scenarios(&b, 111, 42).unwrap();
    assert_eq!(set.len(), 111);
    #[allow(clippy::approx_constant)]
    let q_lo = [0.6632, 1.1170, 0.6632, 1.0472];
    let q_hi = [0.9250, 1.7453, 0.9250, 1.7453];
    for s in &set.scenarios {
        assert!(b.contains(s));
        for k in 0..4 {
            assert!(s.q()[k] >= q_lo[k] && s.q()[k] <= q_hi[k]);
        }
        assert!(s.pose()[1] >= 0.0365 && s.pose()[1] <= 0.0665);
        assert_eq!(s.pose()[0], default_equilibrium()[0]);
        assert_eq!(s.vel(), Vector3::zeros());
    }
    assert_eq!(b.restricted().unwrap().n_xi(), 4);
}

#[test]
fn draws_are_reproducible_and_stream_split() {
    let b = task_box();
    let a = draw_scenarios(&b, 50, 9).unwrap();
    let c = draw_scenarios(&b, 80, 9).unwrap();
    assert_eq!(a.scenarios[..], c.scenarios[..50]);
    assert_eq!(a.scenarios[17], draw_scenario(&b, 9, 17));
    assert_ne!(a.scenarios, draw_scenarios(&b, 50, 10).unwrap().scenarios);
}

#[test]
fn uniform_means_within_three_sigma() {
    let b = task_box();
    let n = 10_000;
    let set = draw_scenarios(&b, n, 1).unwrap();
    for k in b.free_indices() {
        let mean = set.scenarios.iter().map(|s| s.0[k]).sum::<f64>() / n as f64;
        let w = b.upper[k] - b.lower[k];
        let sigma = w / 12f64.sqrt() / (n as f64).sqrt();
        let mid = 0.5 * (b.lower[k] + b.upper[k]);
        assert!((mean - mid).abs() <= 3.0 * sigma, "{}: {mean} vs {mid}", COORD_NAMES[k]);
    }
}

#[test]
fn box_validation() {
    let b = task_box();
    let mut bad = b.clone();
    bad.lower[1] = bad.upper[1] + 0.1;
    assert!(bad.validate().is_err());
    assert!(b.with_frozen(&(0..COORDS).collect::<Vec<_>>()).is_err());
    assert!(draw_scenarios(&b, 0, 1).is_err());
    // the task box varies joints, height and delta
    assert_eq!(b.n_xi(), 6);
    let c = b.collapsed();
    assert!(c.contains(&c.nominal_scenario()));
}

fn single_free_box() -> UncertaintyBox {
    let mut lower = [0.0; COORDS];
    let mut upper = [0.0; COORDS];
    let mut frozen = [true; COORDS];
    lower[10] = -1.0;
    upper[10] = 2.0;
    frozen[10] = false;
    UncertaintyBox::new(lower, upper, [0.0; COORDS], frozen).unwrap()
}

#[test]
fn dynamics_lipschitz_on_linear_plant() {
    let e = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -1.0, 0.5]);
    let f = DMatrix::from_row_slice(2, 1, &[2.0, -1.0]);
    let norm_e = spectral_norm(&e);
    let norm_f = spectral_norm(&f);
    let (e2, f2) = (e.clone(), f.clone());
    let linear = move |s: &Scenario| -> Result<Plant> { Ok((&e2 * s.delta(), &f2 * s.delta())) };
    let est = estimate_dynamics_lipschitz(&single_free_box(), 50, 4, &linear).unwrap();
    assert!(
        est.l_a >= norm_e * (1.0 - 1e-12) && est.l_a <= 1.5 * norm_e * (1.0 + 1e-12),
        "{est:?}"
    );
    assert!(est.l_b >= norm_f * (1.0 - 1e-12) && est.l_b <= 1.5 * norm_f * (1.0 + 1e-12));
    assert_eq!(est.skipped, 0);

    let point = single_free_box().collapsed();
    let est = estimate_dynamics_lipschitz(&point, 10, 4, &linear).unwrap();
    assert_eq!((est.l_a, est.l_b), (0.0, 0.0));
    assert!(estimate_dynamics_lipschitz(&point, 1, 4, &linear).is_err());
}

#[test]
fn dynamics_lipschitz_grows_with_pairs_and_skips_failures() {
    let m = model();
    let b = task_box();
    let small = estimate_dynamics_lipschitz(&b, 20, 6, &m).unwrap();
    let big = estimate_dynamics_lipschitz(&b, 40, 6, &m).unwrap();
    assert!(big.raw_b >= small.raw_b && big.raw_a >= small.raw_a);
    // at rest with zero torque the state matrix does not depend on xi
    assert_eq!(big.raw_a, 0.0);
    assert!(big.raw_b > 0.0);

    let flaky = |s: &Scenario| -> Result<Plant> {
        if s.delta() > 0.5 {
            Err(graspsynth::Error::Singular("synthetic".into()))
        } else {
            Ok((DMatrix::identity(1, 1) * s.delta(), DMatrix::zeros(1, 1)))
        }
    };
    let est = estimate_dynamics_lipschitz(&single_free_box(), 40, 2, &flaky).unwrap();
    assert!(est.skipped > 0 && est.skipped < 40);
}

#[test]
fn feasibility_design_on_111_scenarios() {
    let m = model();
    let reg = DRegion::default_design();
    let set = draw_scenarios(&task_box(), 111, 2).unwrap();
    let design = solve_feasibility_scp(&set, &m, &reg, 0.5, 1e-3, &SolverOptions::default()).unwrap();
    assert_eq!(design.certificate.status, DesignStatus::Feasible);
    assert_eq!(design.certificate.d, 39);
    assert_eq!(design.certificate.n_required, 110);
    let c = design.controller.expect("feasible design has a controller");
    assert!(c.gamma < 0.0);
    assert!((&c.gain * &c.p - &c.y).norm() <= 1e-8 * (1.0 + c.y.norm()));
    for (a, b) in plants(&m, &set.scenarios).unwrap() {
        let margins = lmi::evaluate_constraint(&c.vars(), &a, &b, &reg).unwrap();
        assert!(margins.iter().all(|v| *v <= 1e-6), "{margins:?}");
        assert!(lmi::pole_region_check(&(&a - &b * &c.gain), &reg).0);
    }

    // violation on the training point itself is zero, flipped gain violates
    let single = UncertaintyBox::new(set.scenarios[0].0, set.scenarios[0].0, set.scenarios[0].0, {
        let mut f = [true; COORDS];
        f[10] = false;
        f
    })
    .unwrap();
    let v = empirical_violation(&c, &single, 20, 3, &m).unwrap();
    assert_eq!(v.violations, 0);
    let v = empirical_violation(&c.sign_flipped(), &task_box(), 200, 3, &m).unwrap();
    assert!(v.rate > 0.95, "{v:?}");
    assert_eq!(v.pole_failures, 200);

    let json = serde_json::to_string(&c).unwrap();
    let back: lmi::Controller = serde_json::from_str(&json).unwrap();
    assert_eq!(back, c);
    let cert = serde_json::to_string(&design.certificate).unwrap();
    let back: FeasibilityCertificate = serde_json::from_str(&cert).unwrap();
    assert_eq!(back, design.certificate);
}

#[test]
fn too_few_scenarios_is_an_error() {
    let set = draw_scenarios(&task_box(), 50, 2).unwrap();
    let r = solve_feasibility_scp(
        &set,
        &model(),
        &DRegion::default_design(),
        0.5,
        1e-3,
        &SolverOptions::default(),
    );
    assert!(r.is_err());
}

#[test]
fn empty_region_design_is_infeasible() {
    let set = draw_scenarios(&task_box(), 111, 2).unwrap();
    let reg = DRegion {
        alpha: 2.0,
        r: 1.0,
        theta: 0.5,
    };
    let d = solve_feasibility_scp(&set, &model(), &reg, 0.5, 1e-3, &SolverOptions::default()).unwrap();
    assert_ne!(d.certificate.status, DesignStatus::Feasible);
    assert!(d.controller.is_none());
}

#[test]
fn grid_baseline() {
    let m = model();
    let p = params();
    let reg = DRegion::default_design();
    let grid = uniform_grid(p.delta_range[0], p.delta_range[1], 46);
    assert_eq!(grid.len(), 46);
    assert_eq!(grid[0], -0.004);
    assert!((grid[45] - 0.005).abs() < 1e-15);
    let d = solve_grid_baseline(&grid, &m, &reg, &SolverOptions::default()).unwrap();
    assert_eq!(d.certificate.status, DesignStatus::Feasible);
    let c = d.controller.unwrap();
    assert_eq!(c.seed, None);

    let nominal = solve_grid_baseline(&[0.0], &m, &reg, &SolverOptions::default()).unwrap();
    assert!(nominal.controller.is_some());

    // off-equilibrium operating points are not covered by the grid design
    let low = Vector3::new(-0.0175, 0.0365, 0.0);
    let q = hand::inverse_kinematics(&low, 0.0, &p).unwrap();
    let mut x = task_box().nominal;
    x[..4].copy_from_slice(q.as_slice());
    x[5] = 0.0365;
    let (a, b) = m.plant(&Scenario(x)).unwrap();
    let margins = lmi::evaluate_constraint(&c.vars(), &a, &b, &reg).unwrap();
    assert!(margins[..3].iter().any(|v| *v > 0.0), "{margins:?}");
}

#[test]
fn optimality_design_small() {
    let m = model();
    let reg = DRegion::default_design();
    let b = task_box().restricted().unwrap();
    let set = draw_scenarios(&b, 60, 8).unwrap();
    let opts = SolverOptions::default();
    let cfg = OptimalityConfig::from_block_constants(0.99, 0.999, 1e8, [7.4713, 8.0188, 2.7833], 4).unwrap();
    assert_eq!(cfg.l_xi, 8.0188);
    let d = solve_optimality_scp(&set, &m, &reg, &cfg, &opts).unwrap();
    assert_eq!(d.certificate.status, DesignStatus::Feasible);
    assert_eq!(d.certificate.sample_size.n, 96_875);
    let looser = OptimalityConfig {
        alpha_tight: 1.0,
        ..cfg
    };
    let d2 = solve_optimality_scp(&set, &m, &reg, &looser, &opts).unwrap();
    assert!(d.certificate.j_star >= d2.certificate.j_star - 1e-6 * d2.certificate.j_star.abs());
    let c = d.controller.unwrap();
    assert!(c.p.norm() <= 1e8 * 6.0);
    for (a, bm) in plants(&m, &set.scenarios).unwrap() {
        let mg = lmi::evaluate_constraint(&c.vars(), &a, &bm, &reg).unwrap();
        for v in &mg[..3] {
            assert!(*v + cfg.alpha_tight <= 1e-6 * c.gamma.abs().max(1.0), "{mg:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_matches_incomplete_beta(n in 1u64..3000, d in 1u64..60, eps in 1e-4..0.999f64) {
        let got = binomial_tail(n, eps, d);
        let want = tail_oracle(n, eps, d);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1e-300) + 1e-14, "{} vs {}", got, want);
    }

    #[test]
    fn sample_size_is_exactly_minimal(eps in 0.01..0.9f64, beta in 1e-6..0.5f64, d in 1u64..60) {
        let n = sample_size_feasibility(eps, beta, d).unwrap();
        prop_assert!(binomial_tail(n, eps, d) <= beta);
        if n > d {
            prop_assert!(binomial_tail(n - 1, eps, d) > beta);
        }
    }

    #[test]
    fn sample_size_monotone(eps in 0.02..0.9f64, beta in 1e-6..0.5f64, d in 1u64..50) {
        let n = sample_size_feasibility(eps, beta, d).unwrap();
        prop_assert!(sample_size_feasibility(eps * 0.9, beta, d).unwrap() >= n);
        prop_assert!(sample_size_feasibility(eps, beta * 0.5, d).unwrap() >= n);
        prop_assert!(sample_size_feasibility(eps, beta, d + 1).unwrap() >= n);
    }

    #[test]
    fn lipschitz_structure(mu in 1e-3..1e3f64, theta in 1e-3..1.57f64, la in 0.0..1e3f64, lb in 1e-3..1e3f64) {
        let c = lipschitz_lmi(mu, theta, la, lb);
        prop_assert!((c.l2 - 0.5 * c.l1).abs() <= 1e-12 * c.l1);
        prop_assert!(c.l >= c.l1 && c.l >= c.l3);
    }
}
