//! Experiment configuration, orchestration, CSV output and figures.

pub mod config;
pub mod experiment;
pub mod plot;

pub use config::{load_config, Algorithm, ExperimentConfig, GraphFamily};
pub use experiment::{
    build_mixing, run_experiment, run_seed, run_sweep, write_outputs, ExperimentResult,
    ExperimentSummary, MedianSeries, SeedResult, SweepPoint,
};
pub use plot::{emit_plot, read_meta, PlotMeta, PlotStyle};

use serde::Serialize;

use crate::error::Result;
use crate::graph::{connectivity_window, validate, ContractionConstants, ValidationReport};
use crate::problem::{smoothness_constants, ProblemStream, SlotSource, SmoothnessConstants};
use crate::schedule::{BoundComponents, ConsensusSchedule};

/// Number of slots inspected by [`validate_config`].
pub const VALIDATE_SLOTS: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct MatrixCheck {
    pub slot: usize,
    pub report: ValidationReport,
}

/// Assumption checks for one seed, without running any algorithm.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub seed: u64,
    pub family: String,
    pub matrices_checked: usize,
    pub matrices_failed: Vec<MatrixCheck>,
    pub eta: f64,
    pub window: Option<usize>,
    pub contraction: Option<ContractionConstants>,
    pub contraction_error: Option<String>,
    pub iterations: usize,
    pub bound: Option<BoundComponents>,
    pub smoothness: SmoothnessConstants,
    /// `2μ/L²`, the exclusive upper end of the admissible DP-OGD step.
    pub alpha_limit: f64,
    pub alpha: f64,
    pub schedule_warnings: Vec<String>,
}

impl ValidationSummary {
    pub fn passed(&self) -> bool {
        self.matrices_failed.is_empty() && self.window.is_some()
    }
}

/// Graph and assumption checks for the first configured seed.
pub fn validate_config(cfg: &ExperimentConfig) -> Result<ValidationSummary> {
    let seed = cfg.seeds[0];
    let mixing = build_mixing(cfg, cfg.graph.family, seed)?;
    let eta = mixing.eta();
    let checked = cfg.horizon.min(VALIDATE_SLOTS);
    let mut failed = Vec::new();
    for t in 1..=checked {
        let report = validate(&mixing.matrix(t)?.weights, eta)?;
        if !report.passed() {
            failed.push(MatrixCheck { slot: t, report });
        }
    }
    let window = connectivity_window(&mixing, cfg.graph.max_window)?;
    let (contraction, contraction_error) = match window {
        Some(b) => match ContractionConstants::new(eta, mixing.n(), b) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, None),
    };
    let schedule = ConsensusSchedule::build(cfg.schedule.clone(), cfg.horizon)?;
    let bound = contraction.map(|c| schedule.bound_components_log(c.log_gamma, c.gamma));

    let stream = ProblemStream::generate(cfg.problem_params(), seed, cfg.horizon)?;
    let smoothness = (1..=checked)
        .map(|t| smoothness_constants(&stream.slot(t)))
        .reduce(SmoothnessConstants::merge)
        .expect("horizon is positive");
    Ok(ValidationSummary {
        seed,
        family: cfg.graph.family.label(),
        matrices_checked: checked,
        matrices_failed: failed,
        eta,
        window,
        contraction,
        contraction_error,
        iterations: schedule.iterations(),
        bound,
        smoothness,
        alpha_limit: 2.0 * smoothness.mu / (smoothness.l * smoothness.l),
        alpha: cfg.step.dpogd,
        schedule_warnings: schedule.warnings().iter().map(|w| w.to_string()).collect(),
    })
}
