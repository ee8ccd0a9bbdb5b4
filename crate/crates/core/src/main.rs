use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graspsynth::config::ExperimentConfig;
use graspsynth::experiments::{self, CONTROLLER_FILE};
use graspsynth::lmi::Designer;
use graspsynth::scenario::DesignStatus;

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    version,
    about = "Scenario-based D-stable controller synthesis for a planar two-finger grasp"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the scenario count for a violation level and confidence.
    SampleSize {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 39)]
        d: u64,
        /// Number of free uncertainty coordinates (optimality mode).
        #[arg(long, requires = "lipschitz")]
        n_xi: Option<u32>,
        /// Lipschitz constant of the constraints (optimality mode).
        #[arg(long, requires = "n_xi")]
        lipschitz: Option<f64>,
    },
    /// Design a controller and write controller and certificate files.
    Design {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        designer: Option<Designer>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario count.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the configured maneuvers with a controller file.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to the controller file in the output directory.
        #[arg(long)]
        controller: Option<PathBuf>,
        /// Override the true contact translations (mm).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        delta_true_mm: Option<Vec<f64>>,
        #[arg(long, allow_negative_numbers = true)]
        delta_hat_mm: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pole traces along simulated trajectories and a Monte Carlo violation
    /// estimate.
    Analyze {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        controller: Option<PathBuf>,
        /// Directory holding the simulation output.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Option<PathBuf>) -> graspsynth::Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn usage(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => usage(e),
    }
}

fn run(cmd: Command) -> graspsynth::Result<ExitCode> {
    match cmd {
        Command::SampleSize {
            eps,
            beta,
            d,
            n_xi,
            lipschitz,
        } => {
            let opt = n_xi.zip(lipschitz);
            let report = experiments::sample_size_report(eps, beta, d, opt)?;
            println!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Design {
            config,
            designer,
            seed,
            samples,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(d) = designer {
                cfg.design.designer = d;
            }
            if let Some(s) = seed {
                cfg.design.seed = s;
            }
            if let Some(n) = samples {
                match cfg.design.designer {
                    Designer::Optimality => cfg.design.optimality.samples = Some(n),
                    _ => cfg.design.samples = Some(n),
                }
            }
            cfg.validate()?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let outcome = experiments::run_design(&cfg)?;
            for p in experiments::write_design(&cfg, &outcome, &dir)? {
                println!("wrote {}", p.display());
            }
            let status = outcome.certificate.status();
            println!("status {status:?}");
            if let Some(c) = &outcome.controller {
                println!("gamma {:.6e}", c.gamma);
            }
            Ok(if status == DesignStatus::Feasible {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INFEASIBLE)
            })
        }
        Command::Simulate {
            config,
            controller,
            delta_true_mm,
            delta_hat_mm,
            horizon,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(d) = delta_true_mm {
                cfg.simulation.delta_true_mm = d;
            }
            if let Some(d) = delta_hat_mm {
                cfg.simulation.delta_hat_mm = d;
            }
            if let Some(h) = horizon {
                cfg.simulation.horizon_s = h;
            }
            cfg.validate()?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let path = controller.unwrap_or_else(|| cfg.output_dir.join(CONTROLLER_FILE));
            let ctl = experiments::load_controller(&path)?.data;
            let runs = experiments::run_simulations(&cfg, &ctl)?;
            let report = experiments::write_simulations(&cfg, &ctl, &runs, &dir)?;
            for c in &report.cases {
                let m = &c.metrics;
                println!(
                    "{:<20} {:<12} converged={:<5} pos_err={:.3} mm ang_err={:.3} deg min_cone={:.3e} N",
                    c.name,
                    format!("{:?}", m.termination),
                    m.converged,
                    m.final_position_error * 1e3,
                    m.final_angle_error.to_degrees(),
                    m.min_cone_margin,
                );
            }
            Ok(if report.all_completed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_DIVERGED)
            })
        }
        Command::Analyze {
            config,
            controller,
            trajectories,
            out,
        } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let path = controller.unwrap_or_else(|| cfg.output_dir.join(CONTROLLER_FILE));
            let ctl = experiments::load_controller(&path)?.data;
            let runs = experiments::load_simulations(&trajectories.unwrap_or_else(|| cfg.output_dir.clone()))?;
            let report = experiments::run_analysis(&cfg, &ctl, &runs, &dir)?;
            for t in &report.traces {
                println!(
                    "{:<20} in_region={:.3} dispersion={:.3} skipped={}",
                    t.name, t.inside_fraction, t.dispersion, t.skipped
                );
            }
            let v = &report.violation;
            println!(
                "violation {}/{} = {:.4} (95% CI [{:.4}, {:.4}])",
                v.violations, v.samples, v.rate, v.ci_low, v.ci_high
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
