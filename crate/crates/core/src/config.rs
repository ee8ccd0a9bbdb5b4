//! Experiment configuration. Lengths are given in millimetres, angles in
//! degrees and masses in grams; everything is converted to SI on load.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use blocksdp::{Backend, SolverOptions};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hand::{self, HandObjectParams};
use crate::lmi::{DRegion, Designer};
use crate::scenario::{HandModel, UncertaintyBox, Workspace};
use crate::simulator::{Reference, SimConfig, CONE_MARGIN};

const MM: f64 = 1e-3;

fn deg(v: f64) -> f64 {
    v.to_radians()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandSection {
    pub finger_base_mm: [[f64; 2]; 2],
    pub link_lengths_mm: [[f64; 2]; 2],
    pub link_masses_g: [[f64; 2]; 2],
    pub rotor_inertia_kg_m2: f64,
    pub object_mass_g: f64,
    /// Object side length; the inertia is that of a uniform square.
    pub object_side_mm: f64,
    pub mu_f: f64,
    pub f_min_n: f64,
    pub delta_range_mm: [f64; 2],
}

impl Default for HandSection {
    fn default() -> Self {
        Self {
            finger_base_mm: [[35.0, 0.0], [-35.0, 0.0]],
            link_lengths_mm: [[45.0; 2]; 2],
            link_masses_g: [[50.0; 2]; 2],
            rotor_inertia_kg_m2: hand::DEFAULT_ROTOR_INERTIA,
            object_mass_g: 20.0,
            object_side_mm: 35.0,
            mu_f: 0.8,
            f_min_n: 0.5,
            delta_range_mm: [-4.0, 5.0],
        }
    }
}

impl HandSection {
    pub fn params(&self) -> Result<HandObjectParams> {
        let mut p = HandObjectParams::default();
        let scale = |a: [[f64; 2]; 2], s: f64| a.map(|r| r.map(|v| v * s));
        p.finger_base = scale(self.finger_base_mm, MM);
        p.link_lengths = scale(self.link_lengths_mm, MM);
        p.link_masses = scale(self.link_masses_g, 1e-3);
        for f in 0..2 {
            for k in 0..2 {
                let l = p.link_lengths[f][k];
                p.link_inertias[f][k] = p.link_masses[f][k] * l * l / 12.0;
            }
        }
        p.rotor_inertias = [[self.rotor_inertia_kg_m2; 2]; 2];
        p.object_mass = self.object_mass_g * 1e-3;
        let side = self.object_side_mm * MM;
        p.object_inertia = p.object_mass * 2.0 * side * side / 12.0;
        p.r0 = 0.5 * side;
        p.mu_f = self.mu_f;
        p.f_min = self.f_min_n;
        p.delta_range = [self.delta_range_mm[0] * MM, self.delta_range_mm[1] * MM];
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkspaceSection {
    /// Design equilibrium `[x, y]` and orientation.
    pub equilibrium_mm: [f64; 2],
    pub equilibrium_deg: f64,
    pub x_mm: [f64; 2],
    pub y_mm: [f64; 2],
    pub theta_deg: [f64; 2],
    pub grid: usize,
    /// Contact translation assumed by the controller.
    pub delta_hat_mm: f64,
}

impl Default for WorkspaceSection {
    fn default() -> Self {
        let w = Workspace::default_task();
        Self {
            equilibrium_mm: [w.equilibrium[0] / MM, w.equilibrium[1] / MM],
            equilibrium_deg: w.equilibrium[2].to_degrees(),
            x_mm: w.x.map(|v| v / MM),
            y_mm: w.y.map(|v| v / MM),
            theta_deg: w.theta.map(f64::to_degrees),
            grid: w.grid,
            delta_hat_mm: 0.0,
        }
    }
}

impl WorkspaceSection {
    pub fn equilibrium(&self) -> Vector3<f64> {
        Vector3::new(
            self.equilibrium_mm[0] * MM,
            self.equilibrium_mm[1] * MM,
            deg(self.equilibrium_deg),
        )
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            equilibrium: self.equilibrium(),
            x: self.x_mm.map(|v| v * MM),
            y: self.y_mm.map(|v| v * MM),
            theta: self.theta_deg.map(deg),
            grid: self.grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionSection {
    pub alpha: f64,
    pub radius: f64,
    pub cone_deg: f64,
}

impl Default for RegionSection {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            radius: 7.0,
            cone_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Clarabel,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimalitySection {
    pub epsilon: f64,
    pub beta: f64,
    pub mu: f64,
    /// Per-block Lipschitz constants; estimated from the dynamics when
    /// absent.
    pub lipschitz_blocks: Option<[f64; 3]>,
    /// Scenario pairs for the dynamics estimate.
    pub lipschitz_pairs: usize,
    /// Number of scenarios; the sample-size bound when absent.
    pub samples: Option<usize>,
    /// Freeze pose, velocity and contact translation at their nominal value.
    pub restricted: bool,
}

impl Default for OptimalitySection {
    fn default() -> Self {
        Self {
            epsilon: 0.99,
            beta: 0.999,
            mu: 1e8,
            lipschitz_blocks: None,
            lipschitz_pairs: 200,
            samples: None,
            restricted: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub designer: Designer,
    pub seed: u64,
    pub backend: BackendChoice,
    pub epsilon: f64,
    pub beta: f64,
    /// Number of scenarios; the sample-size bound when absent.
    pub samples: Option<usize>,
    pub grid_points: usize,
    pub optimality: OptimalitySection,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            designer: Designer::Feasibility,
            seed: 2024,
            backend: BackendChoice::Clarabel,
            epsilon: 0.5,
            beta: 1e-3,
            samples: None,
            grid_points: 46,
            optimality: OptimalitySection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt_s: f64,
    pub horizon_s: f64,
    pub filter_s: f64,
    /// Initial poses as `[x_mm, y_mm, theta_deg]`.
    pub initial_conditions: Vec<[f64; 3]>,
    /// Commanded change `[dx_mm, dy_mm, dtheta_deg]`.
    pub maneuver: [f64; 3],
    pub delta_true_mm: Vec<f64>,
    pub delta_hat_mm: f64,
    pub divergence_mm: f64,
    pub divergence_deg: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let e = hand::default_equilibrium();
        Self {
            dt_s: 1e-3,
            horizon_s: 15.0,
            filter_s: 0.3,
            initial_conditions: vec![[e[0] / MM, e[1] / MM, 0.0], [e[0] / MM, e[1] / MM - 30.0, 0.0]],
            maneuver: [40.0, 0.0, 11.0],
            delta_true_mm: vec![-4.0, 0.0, 5.0],
            delta_hat_mm: 0.0,
            divergence_mm: 50.0,
            divergence_deg: 0.5f64.to_degrees(),
        }
    }
}

/// One simulation case of the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SimCase {
    pub name: String,
    pub config: SimConfig,
}

impl SimulationSection {
    pub fn cases(&self) -> Vec<SimCase> {
        let mut out = Vec::new();
        for (i, ic) in self.initial_conditions.iter().enumerate() {
            for &d in &self.delta_true_mm {
                let start = [ic[0] * MM, ic[1] * MM, deg(ic[2])];
                let target = [
                    start[0] + self.maneuver[0] * MM,
                    start[1] + self.maneuver[1] * MM,
                    start[2] + deg(self.maneuver[2]),
                ];
                out.push(SimCase {
                    name: format!("ic{}_delta{:+.1}mm", i + 1, d),
                    config: SimConfig {
                        dt: self.dt_s,
                        horizon: self.horizon_s,
                        delta_true: d * MM,
                        delta_hat: self.delta_hat_mm * MM,
                        initial_pose: start,
                        initial_velocity: [0.0; 3],
                        reference: Reference {
                            start,
                            target,
                            time_constant: self.filter_s,
                        },
                        divergence_position: self.divergence_mm * MM,
                        divergence_angle: deg(self.divergence_deg),
                        cone_margin: CONE_MARGIN,
                    },
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Trajectory samples between pole evaluations.
    pub pole_stride: usize,
    pub violation_samples: usize,
    pub violation_seed: u64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            pole_stride: 100,
            violation_samples: 2000,
            violation_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub hand: HandSection,
    pub workspace: WorkspaceSection,
    pub region: RegionSection,
    pub design: DesignSection,
    pub simulation: SimulationSection,
    pub analysis: AnalysisSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            hand: HandSection::default(),
            workspace: WorkspaceSection::default(),
            region: RegionSection::default(),
            design: DesignSection::default(),
            simulation: SimulationSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.output_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    /// Checks every section, converting units along the way.
    pub fn validate(&self) -> Result<()> {
        let p = self.params()?;
        self.region()?;
        self.uncertainty(&p)?;
        let d = &self.design;
        let probs = [d.epsilon, d.beta, d.optimality.epsilon, d.optimality.beta];
        if probs.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::Config("epsilon and beta must lie in (0, 1)".into()));
        }
        if d.grid_points == 0 || d.optimality.lipschitz_pairs < 2 || !(d.optimality.mu > 0.0) {
            return Err(Error::Config(
                "need grid_points >= 1, lipschitz_pairs >= 2 and mu > 0".into(),
            ));
        }
        if d.optimality
            .lipschitz_blocks
            .is_some_and(|l| l.iter().any(|v| !(*v > 0.0)))
        {
            return Err(Error::Config("Lipschitz constants must be positive".into()));
        }
        p.check_delta(self.workspace.delta_hat_mm * MM)?;
        let s = &self.simulation;
        if s.initial_conditions.is_empty() || s.delta_true_mm.is_empty() {
            return Err(Error::Config(
                "simulation needs initial conditions and delta values".into(),
            ));
        }
        for c in s.cases() {
            c.config.validate(&p)?;
        }
        let a = &self.analysis;
        if a.pole_stride == 0 || a.violation_samples == 0 {
            return Err(Error::Config(
                "pole_stride and violation_samples must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<HandObjectParams> {
        self.hand.params()
    }

    pub fn region(&self) -> Result<DRegion> {
        DRegion::new(self.region.alpha, self.region.radius, deg(self.region.cone_deg))
    }

    /// Uncertainty box of the designer: restricted for the optimality
    /// program when configured.
    pub fn uncertainty(&self, params: &HandObjectParams) -> Result<UncertaintyBox> {
        let b = UncertaintyBox::workspace(params, &self.workspace.workspace())?;
        if self.design.designer == Designer::Optimality && self.design.optimality.restricted {
            b.restricted()
        } else {
            Ok(b)
        }
    }

    pub fn model(&self, params: &HandObjectParams) -> HandModel {
        HandModel::new(
            params.clone(),
            self.workspace.equilibrium(),
            self.workspace.delta_hat_mm * MM,
        )
    }

    pub fn solver_options(&self) -> SolverOptions {
        let backend = match self.design.backend {
            BackendChoice::Clarabel => Backend::Clarabel,
            BackendChoice::Reference => Backend::Reference,
        };
        SolverOptions::default().with_backend(backend)
    }

    /// SHA-256 of the canonical JSON form without the output directory, as
    /// lowercase hex.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
