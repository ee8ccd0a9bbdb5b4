use std::fs;
use std::path::{Path, PathBuf};

use graspsynth::config::{BackendChoice, ExperimentConfig};
use graspsynth::experiments::{self, Certificate, CERTIFICATE_FILE, CONTROLLER_FILE};
use graspsynth::hand::HandObjectParams;
use graspsynth::lmi::Designer;
use graspsynth::scenario::DesignStatus;
use graspsynth::Error;

fn default_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.toml")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1e-12)
}

#[test]
fn shipped_file_matches_defaults() {
    let text = fs::read_to_string(default_file()).unwrap();
    let mut cfg = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.output_dir, PathBuf::from("../out"));
    cfg.output_dir = ExperimentConfig::default().output_dir;
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn empty_document_is_the_default() {
    assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
}

#[test]
fn units_convert_to_si() {
    let p = ExperimentConfig::default().params().unwrap();
    let d = HandObjectParams::default();
    for f in 0..2 {
        for k in 0..2 {
            assert!(close(p.finger_base[f][k], d.finger_base[f][k]));
            assert!(close(p.link_lengths[f][k], d.link_lengths[f][k]));
            assert!(close(p.link_masses[f][k], d.link_masses[f][k]));
            assert!(close(p.link_inertias[f][k], d.link_inertias[f][k]));
            assert!(close(p.rotor_inertias[f][k], d.rotor_inertias[f][k]));
        }
    }
    assert!(close(p.object_mass, d.object_mass));
    assert!(close(p.object_inertia, d.object_inertia));
    assert!(close(p.r0, d.r0));
    assert!(close(p.delta_range[0], -4e-3) && close(p.delta_range[1], 5e-3));

    let cfg = ExperimentConfig::from_toml("[hand]\nobject_side_mm = 40.0\nobject_mass_g = 30.0\n").unwrap();
    let p = cfg.params().unwrap();
    assert!(close(p.r0, 0.02));
    assert!(close(p.object_inertia, 0.03 * 2.0 * 0.04 * 0.04 / 12.0));
    let cases = ExperimentConfig::default().simulation.cases();
    assert_eq!(cases.len(), 6);
    assert_eq!(cases[0].name, "ic1_delta-4.0mm");
    let c = &cases[5].config;
    assert!(close(c.delta_true, 5e-3));
    assert!(close(c.initial_pose[1], 0.0365));
    assert!(close(c.reference.target[0], 0.0225));
    assert!(close(c.reference.target[2], 11f64.to_radians()));
}

#[test]
fn rejects_bad_documents() {
    for text in [
        "unknown = 1",
        "[hand]\nmass = 3.0",
        "[design]\ndesigner = \"magic\"",
        "[design]\nepsilon = 1.5",
        "[design]\nbeta = 0.0",
        "[region]\nalpha = 8.0",
        "[hand]\nmu_f = -1.0",
        "[workspace]\ndelta_hat_mm = 9.0",
        "[simulation]\ndt_s = 0.0",
        "[simulation]\ndelta_true_mm = []",
        "[analysis]\npole_stride = 0",
        "[design.optimality]\nlipschitz_blocks = [1.0, 0.0, 1.0]",
        "[hand]\nlink_lengths_mm = \"long\"",
    ] {
        assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
    }
    assert!(matches!(ExperimentConfig::from_toml("nope = 1"), Err(Error::Toml(_))));
    let e = ExperimentConfig::from_toml("[design]\nepsilon = 1.5").unwrap_err();
    assert!(matches!(e, Error::Config(_)));
}

#[test]
fn load_resolves_output_dir_against_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "output_dir = \"runs\"\n[design]\nbackend = \"reference\"\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.output_dir, dir.path().join("runs"));
    assert_eq!(cfg.design.backend, BackendChoice::Reference);
    assert!(ExperimentConfig::load(&dir.path().join("missing.toml")).is_err());
}

#[test]
fn hash_ignores_output_dir_only() {
    let a = ExperimentConfig::default();
    let mut b = a.clone();
    b.output_dir = PathBuf::from("/somewhere/else");
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    assert!(a
        .hash()
        .bytes()
        .all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    b.design.seed += 1;
    assert_ne!(a.hash(), b.hash());
    let mut c = a.clone();
    c.hand.mu_f = 0.7;
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn restricted_box_only_for_optimality() {
    let mut cfg = ExperimentConfig::default();
    let p = cfg.params().unwrap();
    let full = cfg.uncertainty(&p).unwrap();
    cfg.design.designer = Designer::Optimality;
    let restricted = cfg.uncertainty(&p).unwrap();
    assert!(restricted.n_xi() < full.n_xi());
    assert_eq!(restricted.n_xi(), 4);
    cfg.design.optimality.restricted = false;
    assert_eq!(cfg.uncertainty(&p).unwrap().n_xi(), full.n_xi());
}

fn design_bytes(cfg: &ExperimentConfig, dir: &Path) -> (Vec<u8>, Vec<u8>) {
    let out = experiments::run_design(cfg).unwrap();
    experiments::write_design(cfg, &out, dir).unwrap();
    (
        fs::read(dir.join(CONTROLLER_FILE)).unwrap(),
        fs::read(dir.join(CERTIFICATE_FILE)).unwrap(),
    )
}

#[test]
fn design_artifacts_are_reproducible() {
    let mut cfg = ExperimentConfig::default();
    cfg.design.samples = Some(111);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = design_bytes(&cfg, a.path());
    let second = design_bytes(&cfg, b.path());
    assert_eq!(first, second);

    let ctl = experiments::load_controller(&a.path().join(CONTROLLER_FILE)).unwrap();
    assert_eq!(ctl.provenance.config_hash, cfg.hash());
    assert_eq!(ctl.provenance.seed, 2024);
    assert_eq!(ctl.data.designer, Designer::Feasibility);
    let cert: experiments::Artifact<Certificate> = experiments::read_json(&a.path().join(CERTIFICATE_FILE)).unwrap();
    assert_eq!(cert.data.status(), DesignStatus::Feasible);
    let text = String::from_utf8(first.1).unwrap();
    assert!(text.contains("\"designer\": \"feasibility\""));
    assert!(text.ends_with("}\n"));

    cfg.design.seed = 5;
    let c = tempfile::tempdir().unwrap();
    assert_ne!(design_bytes(&cfg, c.path()).0, second.0);
}

#[test]
fn infeasible_design_removes_stale_controller() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.design.samples = Some(111);
    design_bytes(&cfg, dir.path());
    cfg.region.alpha = 5.0;
    cfg.region.radius = 5.5;
    cfg.region.cone_deg = 2.0;
    let out = experiments::run_design(&cfg).unwrap();
    assert!(out.controller.is_none());
    assert_eq!(out.certificate.status(), DesignStatus::Infeasible);
    let written = experiments::write_design(&cfg, &out, dir.path()).unwrap();
    assert_eq!(written, vec![dir.path().join(CERTIFICATE_FILE)]);
    assert!(!dir.path().join(CONTROLLER_FILE).exists());
}

#[test]
fn sample_size_report_values() {
    let r = experiments::sample_size_report(0.5, 1e-3, 39, None).unwrap();
    assert_eq!(r.n, 110);
    assert!(r.tail <= 1e-3 && r.tail_previous > 1e-3);
    let r = experiments::sample_size_report(0.99, 0.999, 39, Some((4, 8.0188))).unwrap();
    assert_eq!(r.n, 96_875);
    assert!(r.optimality.is_some());
    let text = r.to_string();
    assert!(text.contains("N              96875"), "{text}");
    assert!(experiments::sample_size_report(0.5, 1.5, 39, None).is_err());
}
