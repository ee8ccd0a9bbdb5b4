//! End-to-end pipeline: design, closed-loop simulation batches and pole /
//! violation analysis, with JSON and CSV artifacts stamped with the config
//! hash and seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::lmi::{decision_variable_count, Controller, Designer};
use crate::scenario::{
    binomial_tail, draw_scenarios, empirical_violation, estimate_dynamics_lipschitz, sample_size_feasibility,
    sample_size_optimality, solve_feasibility_scp, solve_grid_baseline, solve_optimality_scp, uniform_grid,
    DesignStatus, FeasibilityCertificate, GridCertificate, OptimalityCertificate, OptimalityConfig,
    OptimalitySampleSize, ViolationEstimate,
};
use crate::simulator::{self, metrics, pole_trace, Metrics, SimConfig, Termination, Trajectory};

pub const CONTROLLER_FILE: &str = "controller.json";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const SIMULATION_FILE: &str = "simulation.json";
pub const ANALYSIS_FILE: &str = "analysis.json";

/// Provenance stamped onto every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed: cfg.design.seed,
        }
    }

    fn csv_header(&self, what: &str) -> String {
        format!("{what}\nconfig_hash={}\nseed={}", self.config_hash, self.seed)
    }
}

/// A JSON artifact: provenance plus payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub provenance: Provenance,
    pub data: T,
}

pub fn write_json<T: Serialize>(path: &Path, provenance: &Provenance, data: &T) -> Result<()> {
    let art = Artifact {
        provenance: provenance.clone(),
        data,
    };
    let mut text = serde_json::to_string_pretty(&art)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Artifact<T>> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "designer", rename_all = "lowercase")]
pub enum Certificate {
    Grid(GridCertificate),
    Feasibility(FeasibilityCertificate),
    Optimality(OptimalityCertificate),
}

impl Certificate {
    pub fn status(&self) -> DesignStatus {
        match self {
            Certificate::Grid(c) => c.status,
            Certificate::Feasibility(c) => c.status,
            Certificate::Optimality(c) => c.status,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub controller: Option<Controller>,
    pub certificate: Certificate,
}

/// Number of scenarios the configured designer uses.
pub fn scenario_count(cfg: &ExperimentConfig, opt: Option<&OptimalityConfig>) -> Result<usize> {
    let d = decision_variable_count(6, 3) as u64;
    let n = match (cfg.design.designer, opt) {
        (Designer::Optimality, Some(o)) => match cfg.design.optimality.samples {
            Some(n) => n as u64,
            None => o.sample_size(d)?.n,
        },
        _ => match cfg.design.samples {
            Some(n) => n as u64,
            None => sample_size_feasibility(cfg.design.epsilon, cfg.design.beta, d)?,
        },
    };
    usize::try_from(n).map_err(|_| Error::Config(format!("{n} scenarios do not fit in memory")))
}

/// Tightening parameters of the optimality program, estimating the
/// Lipschitz constants from the dynamics when none are configured.
pub fn optimality_config(cfg: &ExperimentConfig) -> Result<OptimalityConfig> {
    let params = cfg.params()?;
    let b = cfg.uncertainty(&params)?;
    let o = &cfg.design.optimality;
    let n_xi = b.n_xi() as u32;
    match o.lipschitz_blocks {
        Some(l) => OptimalityConfig::from_block_constants(o.epsilon, o.beta, o.mu, l, n_xi),
        None => {
            let est = estimate_dynamics_lipschitz(&b, o.lipschitz_pairs, cfg.design.seed, &cfg.model(&params))?;
            let region = cfg.region()?;
            OptimalityConfig::from_dynamics(o.epsilon, o.beta, o.mu, region.theta, est.l_a, est.l_b, n_xi)
        }
    }
}

pub fn run_design(cfg: &ExperimentConfig) -> Result<DesignOutcome> {
    let params = cfg.params()?;
    let region = cfg.region()?;
    let model = cfg.model(&params);
    let opts = cfg.solver_options();
    let seed = cfg.design.seed;
    match cfg.design.designer {
        Designer::Grid => {
            let deltas = uniform_grid(params.delta_range[0], params.delta_range[1], cfg.design.grid_points);
            let d = solve_grid_baseline(&deltas, &model, &region, &opts)?;
            Ok(DesignOutcome {
                controller: d.controller,
                certificate: Certificate::Grid(d.certificate),
            })
        }
        Designer::Feasibility => {
            let n = scenario_count(cfg, None)?;
            let set = draw_scenarios(&cfg.uncertainty(&params)?, n, seed)?;
            let d = solve_feasibility_scp(&set, &model, &region, cfg.design.epsilon, cfg.design.beta, &opts)?;
            Ok(DesignOutcome {
                controller: d.controller,
                certificate: Certificate::Feasibility(d.certificate),
            })
        }
        Designer::Optimality => {
            let oc = optimality_config(cfg)?;
            let n = scenario_count(cfg, Some(&oc))?;
            let set = draw_scenarios(&cfg.uncertainty(&params)?, n, seed)?;
            let d = solve_optimality_scp(&set, &model, &region, &oc, &opts)?;
            Ok(DesignOutcome {
                controller: d.controller,
                certificate: Certificate::Optimality(d.certificate),
            })
        }
    }
}

/// Writes the certificate and, for a feasible design, the controller.
pub fn write_design(cfg: &ExperimentConfig, outcome: &DesignOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let prov = Provenance::of(cfg);
    let mut paths = Vec::new();
    let cert = dir.join(CERTIFICATE_FILE);
    write_json(&cert, &prov, &outcome.certificate)?;
    paths.push(cert);
    let ctl = dir.join(CONTROLLER_FILE);
    match &outcome.controller {
        Some(c) => {
            write_json(&ctl, &prov, c)?;
            paths.push(ctl);
        }
        None if ctl.exists() => fs::remove_file(ctl)?,
        None => {}
    }
    Ok(paths)
}

pub fn load_controller(path: &Path) -> Result<Artifact<Controller>> {
    read_json(path)
}

/// Result of one simulation case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub name: String,
    pub config: SimConfig,
    pub metrics: Metrics,
    pub message: Option<String>,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub designer: Designer,
    pub controller_seed: Option<u64>,
    pub cases: Vec<CaseSummary>,
}

impl SimulationReport {
    /// Whether every case reached the horizon.
    pub fn all_completed(&self) -> bool {
        self.cases
            .iter()
            .all(|c| c.metrics.termination == Termination::Completed)
    }
}

/// Runs every configured case in parallel.
pub fn run_simulations(cfg: &ExperimentConfig, controller: &Controller) -> Result<Vec<(String, Trajectory)>> {
    let params = cfg.params()?;
    cfg.simulation
        .cases()
        .into_par_iter()
        .map(|c| Ok((c.name, simulator::simulate(controller, &c.config, &params)?)))
        .collect()
}

pub fn write_simulations(
    cfg: &ExperimentConfig,
    controller: &Controller,
    runs: &[(String, Trajectory)],
    dir: &Path,
) -> Result<SimulationReport> {
    fs::create_dir_all(dir)?;
    let prov = Provenance::of(cfg);
    let mut cases = Vec::new();
    for (name, tr) in runs {
        let csv = format!("{name}.csv");
        simulator::write_csv_file(
            tr,
            &dir.join(&csv),
            Some(&prov.csv_header(&format!("trajectory {name}"))),
        )?;
        cases.push(CaseSummary {
            name: name.clone(),
            config: tr.config.clone(),
            metrics: metrics(tr),
            message: tr.message.clone(),
            csv,
        });
    }
    let report = SimulationReport {
        designer: controller.designer,
        controller_seed: controller.seed,
        cases,
    };
    write_json(&dir.join(SIMULATION_FILE), &prov, &report)?;
    Ok(report)
}

/// Trajectories written by [`write_simulations`].
pub fn load_simulations(dir: &Path) -> Result<Vec<(String, Trajectory)>> {
    let art: Artifact<SimulationReport> = read_json(&dir.join(SIMULATION_FILE))?;
    art.data
        .cases
        .into_iter()
        .map(|c| {
            let samples = simulator::read_csv(fs::File::open(dir.join(&c.csv))?)?;
            Ok((
                c.name,
                Trajectory {
                    config: c.config,
                    samples,
                    termination: c.metrics.termination,
                    message: c.message,
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub name: String,
    pub evaluated: usize,
    pub skipped: usize,
    pub inside_fraction: f64,
    pub dispersion: f64,
    pub worst_margin: f64,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub designer: Designer,
    pub traces: Vec<TraceSummary>,
    /// Fresh scenarios from the design box of the configuration.
    pub violation: ViolationEstimate,
}

impl AnalysisReport {
    pub fn min_inside_fraction(&self) -> f64 {
        self.traces
            .iter()
            .map(|t| t.inside_fraction)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn run_analysis(
    cfg: &ExperimentConfig,
    controller: &Controller,
    runs: &[(String, Trajectory)],
    dir: &Path,
) -> Result<AnalysisReport> {
    fs::create_dir_all(dir)?;
    let params = cfg.params()?;
    let region = cfg.region()?;
    let prov = Provenance::of(cfg);
    let mut traces = Vec::new();
    for (name, tr) in runs {
        let trace = pole_trace(tr, &controller.gain, &region, cfg.analysis.pole_stride, &params)?;
        let csv = format!("{name}.poles.csv");
        let out = std::io::BufWriter::new(fs::File::create(dir.join(&csv))?);
        simulator::write_pole_csv(&trace, out, Some(&prov.csv_header(&format!("poles {name}"))))?;
        traces.push(TraceSummary {
            name: name.clone(),
            evaluated: trace.samples.len(),
            skipped: trace.skipped.len(),
            inside_fraction: trace.inside_fraction(),
            dispersion: trace.dispersion(),
            worst_margin: trace
                .samples
                .iter()
                .map(|s| s.worst_margin)
                .fold(f64::INFINITY, f64::min),
            csv,
        });
    }
    let b = cfg.uncertainty(&params)?;
    let violation = empirical_violation(
        controller,
        &b,
        cfg.analysis.violation_samples,
        cfg.analysis.violation_seed,
        &cfg.model(&params),
    )?;
    let report = AnalysisReport {
        designer: controller.designer,
        traces,
        violation,
    };
    write_json(&dir.join(ANALYSIS_FILE), &prov, &report)?;
    Ok(report)
}

/// Output of the `sample-size` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSizeReport {
    pub epsilon: f64,
    pub beta: f64,
    pub d: u64,
    pub n: u64,
    /// Binomial tail at `n` and at `n - 1`.
    pub tail: f64,
    pub tail_previous: f64,
    pub optimality: Option<OptimalitySampleSize>,
}

pub fn sample_size_report(eps: f64, beta: f64, d: u64, optimality: Option<(u32, f64)>) -> Result<SampleSizeReport> {
    let (n, level, opt) = match optimality {
        None => (sample_size_feasibility(eps, beta, d)?, eps, None),
        Some((n_xi, l_xi)) => {
            let s = sample_size_optimality(eps, beta, n_xi, l_xi, d)?;
            (s.n, s.epsilon_eff, Some(s))
        }
    };
    Ok(SampleSizeReport {
        epsilon: eps,
        beta,
        d,
        n,
        tail: binomial_tail(n, level, d),
        tail_previous: if n > 0 { binomial_tail(n - 1, level, d) } else { 1.0 },
        optimality: opt,
    })
}

impl fmt::Display for SampleSizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "epsilon        {}", self.epsilon)?;
        writeln!(f, "beta           {}", self.beta)?;
        writeln!(f, "d              {}", self.d)?;
        if let Some(o) = &self.optimality {
            writeln!(f, "alpha_tight    {:.6}", o.alpha_tight)?;
            writeln!(f, "epsilon_eff    {:.6e}", o.epsilon_eff)?;
            if o.degenerate {
                writeln!(f, "note           epsilon >= L_xi, epsilon_eff clamped below 1")?;
            }
        }
        writeln!(f, "N              {}", self.n)?;
        writeln!(f, "tail(N)        {:.6e}", self.tail)?;
        write!(f, "tail(N-1)      {:.6e}", self.tail_previous)
    }
}
