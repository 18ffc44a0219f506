//! TOML experiment configuration.
//!
//! Every key is optional; missing keys take the defaults of the sparse
//! recovery experiment (`N = 100`, `n = 50`, `d = 4`, ten nonzeros,
//! `S(k) = 5`, `ι = 1`). See the README for the full grammar.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::AdmmParams;
use crate::error::{Error, Result};
use crate::graph::{BasisKind, HopMode};
use crate::problem::{MeasurementScale, OracleOptions, ProblemParams};
use crate::schedule::ScheduleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dpogd,
    PogdSlowed,
    AdmmSlowed,
    CcAdmmSh,
    CcAdmmMh,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Dpogd,
        Algorithm::PogdSlowed,
        Algorithm::AdmmSlowed,
        Algorithm::CcAdmmSh,
        Algorithm::CcAdmmMh,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Dpogd => "dpogd",
            Algorithm::PogdSlowed => "pogd-slowed",
            Algorithm::AdmmSlowed => "admm-slowed",
            Algorithm::CcAdmmSh => "cc-admm-sh",
            Algorithm::CcAdmmMh => "cc-admm-mh",
        }
    }

    pub fn hop_mode(self) -> Option<HopMode> {
        match self {
            Algorithm::CcAdmmSh => Some(HopMode::SingleHop),
            Algorithm::CcAdmmMh => Some(HopMode::MultiHop),
            _ => None,
        }
    }

    /// Whether the algorithm's output depends on the consensus schedule.
    pub fn uses_schedule(self) -> bool {
        matches!(
            self,
            Algorithm::Dpogd | Algorithm::PogdSlowed | Algorithm::AdmmSlowed
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which mixing matrices drive consensus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr", into = "FamilyRepr")]
pub enum GraphFamily {
    /// `(1/N) 1 1ᵀ`.
    Complete,
    /// `A^{(ι)}` with the given `ι`.
    Iota(usize),
    /// `A^{(N−1)}`.
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum FamilyRepr {
    Number(usize),
    Name(String),
}

impl TryFrom<FamilyRepr> for GraphFamily {
    type Error = String;
    fn try_from(r: FamilyRepr) -> std::result::Result<Self, String> {
        match r {
            FamilyRepr::Number(0) => Err("graph family iota must be at least 1".into()),
            FamilyRepr::Number(i) => Ok(GraphFamily::Iota(i)),
            FamilyRepr::Name(s) => match s.to_ascii_lowercase().as_str() {
                "complete" => Ok(GraphFamily::Complete),
                "n-1" | "full" => Ok(GraphFamily::Full),
                other => other.parse::<usize>().ok().filter(|&i| i > 0).map(GraphFamily::Iota).ok_or_else(|| {
                    format!("unknown graph family `{s}`, expected one of: complete, n-1, or a positive integer iota")
                }),
            },
        }
    }
}

impl From<GraphFamily> for FamilyRepr {
    fn from(f: GraphFamily) -> Self {
        match f {
            GraphFamily::Complete => FamilyRepr::Name("complete".into()),
            GraphFamily::Iota(i) => FamilyRepr::Number(i),
            GraphFamily::Full => FamilyRepr::Name("n-1".into()),
        }
    }
}

impl GraphFamily {
    /// `ι` for `N` nodes, `None` for the complete graph.
    pub fn iota(self, nodes: usize) -> Option<usize> {
        match self {
            GraphFamily::Complete => None,
            GraphFamily::Iota(i) => Some(i),
            GraphFamily::Full => Some(nodes - 1),
        }
    }

    /// Directory-safe label.
    pub fn label(self) -> String {
        match self {
            GraphFamily::Complete => "complete".into(),
            GraphFamily::Iota(i) => format!("iota{i}"),
            GraphFamily::Full => "iotaN-1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub nodes: usize,
    pub n: usize,
    pub d: usize,
    pub sparsity: usize,
    /// Defaults to `0.05 / (dN)`.
    pub lambda: Option<f64>,
    /// Defaults to `0.01 / (dN)²`.
    pub sigma: Option<f64>,
    pub noise_std: f64,
    pub radius: f64,
    pub scale: MeasurementScale,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            nodes: 100,
            n: 50,
            d: 4,
            sparsity: 10,
            lambda: None,
            sigma: None,
            noise_std: 0.01,
            radius: 10.0,
            scale: MeasurementScale::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub family: GraphFamily,
    pub basis: BasisKind,
    /// Largest window searched when estimating `B`.
    pub max_window: usize,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            family: GraphFamily::Iota(1),
            basis: BasisKind::Disjoint,
            max_window: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSection {
    pub dpogd: f64,
    pub pogd: f64,
}

impl Default for StepSection {
    fn default() -> Self {
        Self {
            dpogd: 0.5,
            pogd: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        let o = OracleOptions::default();
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Per-slot, per-node iterate CSVs (large).
    pub traces: bool,
    /// DP-OGD consensus diagnostics and lemma residuals.
    pub diagnostics: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub families: Vec<GraphFamily>,
    pub steps: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            families: vec![
                GraphFamily::Iota(1),
                GraphFamily::Iota(2),
                GraphFamily::Iota(3),
                GraphFamily::Full,
            ],
            steps: vec![5, 30],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub algorithms: Vec<Algorithm>,
    pub problem: ProblemSection,
    pub schedule: ScheduleKind,
    pub graph: GraphSection,
    pub step: StepSection,
    pub admm: AdmmParams,
    pub oracle: OracleSection,
    pub outputs: OutputSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            seeds: (0..10).collect(),
            output: PathBuf::from("out"),
            algorithms: vec![
                Algorithm::Dpogd,
                Algorithm::PogdSlowed,
                Algorithm::AdmmSlowed,
            ],
            problem: ProblemSection::default(),
            schedule: ScheduleKind::Explicit { steps: vec![5] },
            graph: GraphSection::default(),
            step: StepSection::default(),
            admm: AdmmParams::default(),
            oracle: OracleSection::default(),
            outputs: OutputSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

fn field_error(field: &str, msg: impl fmt::Display) -> Error {
    Error::Config(format!("`{field}` {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        for (name, v) in [
            ("problem.nodes", p.nodes),
            ("problem.n", p.n),
            ("problem.d", p.d),
            ("problem.sparsity", p.sparsity),
        ] {
            if v < 1 {
                return Err(field_error(name, "must be at least 1"));
            }
        }
        if p.sparsity > p.n {
            return Err(field_error(
                "problem.sparsity",
                format!("exceeds problem.n = {}", p.n),
            ));
        }
        if self.horizon < 3 {
            return Err(field_error("horizon", "must be at least 3"));
        }
        if self.seeds.is_empty() {
            return Err(field_error("seeds", "must list at least one seed"));
        }
        if self.algorithms.is_empty() {
            return Err(field_error(
                "algorithms",
                "must list at least one algorithm",
            ));
        }
        for (name, a) in [
            ("step.dpogd", self.step.dpogd),
            ("step.pogd", self.step.pogd),
        ] {
            if !(a > 0.0 && a.is_finite()) {
                return Err(field_error(name, format!("must be positive, got {a}")));
            }
        }
        if !(self.admm.varrho > 0.0) {
            return Err(field_error("admm.varrho", "must be positive"));
        }
        if !(self.admm.varpi >= 0.0) {
            return Err(field_error("admm.varpi", "must be non-negative"));
        }
        if let Some(l) = p.lambda {
            if !(l >= 0.0) {
                return Err(field_error("problem.lambda", "must be non-negative"));
            }
        }
        if let Some(s) = p.sigma {
            if !(s >= 0.0) {
                return Err(field_error("problem.sigma", "must be non-negative"));
            }
        }
        if !(p.radius > 0.0) {
            return Err(field_error("problem.radius", "must be positive"));
        }
        if !(p.noise_std >= 0.0) {
            return Err(field_error("problem.noise_std", "must be non-negative"));
        }
        if !(self.oracle.tol > 0.0) || self.oracle.max_iter == 0 {
            return Err(field_error("oracle", "needs tol > 0 and max_iter >= 1"));
        }
        let needs_graph = self
            .algorithms
            .iter()
            .any(|a| *a == Algorithm::Dpogd || a.hop_mode().is_some());
        if needs_graph {
            self.check_family("graph.family", self.graph.family)?;
        }
        crate::schedule::ConsensusSchedule::build(self.schedule.clone(), self.horizon)
            .map_err(|e| field_error("schedule", e))?;
        Ok(())
    }

    /// Extra checks for the sweep grid, which only `sweep` uses.
    pub fn validate_sweep(&self) -> Result<()> {
        self.validate()?;
        if self.sweep.families.is_empty() || self.sweep.steps.is_empty() {
            return Err(field_error(
                "sweep",
                "needs at least one family and one step count",
            ));
        }
        for f in &self.sweep.families {
            self.check_family("sweep.families", *f)?;
        }
        Ok(())
    }

    fn check_family(&self, field: &str, f: GraphFamily) -> Result<()> {
        let nodes = self.problem.nodes;
        if let Some(i) = f.iota(nodes) {
            if nodes < 2 {
                return Err(field_error(
                    field,
                    "permutation graphs need at least 2 nodes",
                ));
            }
            if i > nodes - 1 {
                return Err(field_error(
                    field,
                    format!("iota = {i} exceeds N - 1 = {}", nodes - 1),
                ));
            }
        }
        Ok(())
    }

    pub fn problem_params(&self) -> ProblemParams {
        let p = &self.problem;
        let mut params = ProblemParams::with_default_weights(p.n, p.nodes, p.d, p.sparsity);
        if let Some(l) = p.lambda {
            params.lambda = l;
        }
        if let Some(s) = p.sigma {
            params.sigma = s;
        }
        params.noise_std = p.noise_std;
        params.radius = p.radius;
        params.scale = p.scale;
        params
    }

    pub fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            tol: self.oracle.tol,
            max_iter: self.oracle.max_iter,
        }
    }

    pub fn alpha(&self, alg: Algorithm) -> f64 {
        match alg {
            Algorithm::Dpogd => self.step.dpogd,
            _ => self.step.pogd,
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| {
        Error::Config(format!(
            "{}: {}",
            path.display(),
            e.to_string().trim_start_matches("configuration error: ")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let p = cfg.problem_params();
        assert_eq!((p.nodes, p.n, p.d, p.sparsity), (100, 50, 4, 10));
        assert!((p.sigma - 0.01 / (400.0f64 * 400.0)).abs() < 1e-18);
        assert!((p.lambda - 0.05 / 400.0).abs() < 1e-15);
        assert_eq!(cfg.step.dpogd, 0.5);
        assert_eq!(cfg.step.pogd, 0.005);
        assert_eq!(
            cfg.admm,
            AdmmParams {
                varrho: 1.0,
                varpi: 0.1
            }
        );
    }

    #[test]
    fn zero_nodes_rejected() {
        let err = ExperimentConfig::from_toml_str("[problem]\nnodes = 0\n").unwrap_err();
        assert!(err.to_string().contains("problem.nodes"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_algorithm_lists_choices() {
        let err = ExperimentConfig::from_toml_str("algorithms = [\"sgd\"]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sgd") && msg.contains("cc-admm-sh"), "{msg}");
    }

    #[test]
    fn graph_family_forms() {
        let cfg = ExperimentConfig::from_toml_str(
            "[graph]\nfamily = \"complete\"\n[sweep]\nfamilies = [1, \"2\", \"n-1\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.graph.family, GraphFamily::Complete);
        assert_eq!(
            cfg.sweep.families,
            vec![
                GraphFamily::Iota(1),
                GraphFamily::Iota(2),
                GraphFamily::Full
            ]
        );
        assert!(ExperimentConfig::from_toml_str("[graph]\nfamily = \"ring\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[graph]\nfamily = 100\n").is_err());
    }

    #[test]
    fn sweep_grid_checked_only_for_sweeps() {
        let cfg =
            ExperimentConfig::from_toml_str("[problem]\nnodes = 3\nn = 4\nsparsity = 2\n").unwrap();
        let err = cfg.validate_sweep().unwrap_err();
        assert!(err.to_string().contains("sweep.families"), "{err}");
    }

    #[test]
    fn parse_error_reports_location() {
        let err = ExperimentConfig::from_toml_str("horizon = \n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = ExperimentConfig::from_toml_str("[problem]\nnodez = 3\n").unwrap_err();
        assert!(err.to_string().contains("nodez"), "{err}");
    }

    #[test]
    fn schedule_forms() {
        let cfg = ExperimentConfig::from_toml_str("[schedule]\nkind = \"logarithmic\"\nc = 2.0\n")
            .unwrap();
        assert_eq!(cfg.schedule, ScheduleKind::Logarithmic { c: 2.0 });
        assert!(
            ExperimentConfig::from_toml_str("[schedule]\nkind = \"constant\"\nu = 1.5\n").is_err()
        );
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
