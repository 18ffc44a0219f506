//! Experiment orchestration: one shared instance per seed, every configured
//! algorithm on it, regret and diagnostics, CSV/JSON emission and the
//! median-over-seeds aggregate.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_cc_admm, run_centralized_pogd, run_slowed_admm, Cadence};
use crate::cost::WorkCounter;
use crate::dpogd::{run_time_indexed, DpogdOptions, RunTrace};
use crate::error::{Error, Result};
use crate::graph::{connectivity_window, ContractionConstants, MixingSequence, PermutationBasis};
use crate::metrics::{
    consensus_diagnostics, dynamic_regret_batch, loglog_slope, overlay_series, subsampled_path,
    write_diagnostics_csv, DiagnosticsContext, DiagnosticsRecord, RegretLedger,
};
use crate::problem::{
    oracle_trace, stream_rng, streams, OracleRecord, ProblemManifest, ProblemStream,
};
use crate::schedule::{ConsensusSchedule, ScheduleKind};
use crate::RealVector;

use super::config::{Algorithm, ExperimentConfig, GraphFamily};

/// Mixing matrices for one seed; `None` when no configured algorithm needs
/// a graph.
pub fn build_mixing(
    cfg: &ExperimentConfig,
    family: GraphFamily,
    seed: u64,
) -> Result<MixingSequence> {
    let n = cfg.problem.nodes;
    match family.iota(n) {
        None => Ok(MixingSequence::complete(n, cfg.horizon)),
        Some(iota) => {
            let basis_seed = stream_rng(seed, streams::GRAPH_BASIS).next_u64();
            let basis = PermutationBasis::generate(n, basis_seed, cfg.graph.basis)?;
            let mut rng = stream_rng(seed, streams::GRAPH_SELECTION);
            MixingSequence::random(basis, iota, cfg.horizon, &mut rng)
        }
    }
}

fn tag_error(e: Error, alg: Algorithm, seed: u64) -> Error {
    match e {
        Error::Divergence { slot, detail } => Error::Divergence {
            slot,
            detail: format!("{alg}, seed {seed}: {detail}"),
        },
        other => other,
    }
}

/// Everything produced for one seed.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub manifest: ProblemManifest,
    pub schedule: ConsensusSchedule,
    pub ledgers: Vec<(Algorithm, RegretLedger)>,
    pub work: Vec<(Algorithm, WorkCounter)>,
    pub traces: Vec<(Algorithm, RunTrace)>,
    pub oracle: Option<Vec<OracleRecord>>,
    pub diagnostics: Option<Vec<DiagnosticsRecord>>,
    /// Smallest connectivity window found for the mixing sequence.
    pub window: Option<usize>,
    pub contraction: Option<ContractionConstants>,
    /// `(Σ_k ‖x⋆_{t_k} − x⋆_{t_{k−1}}‖, C_T)`.
    pub subsampled_path: (f64, f64),
    /// `R_t (1 + E_t + C_t)` per slot for the DP-OGD schedule.
    pub overlay: Option<Vec<Option<f64>>>,
}

/// Runs every configured algorithm on the instance of `seed`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let params = cfg.problem_params();
    let stream = ProblemStream::generate(params, seed, cfg.horizon)?;
    let oracle = oracle_trace(&stream, cfg.oracle_options(), seed)?;
    let schedule = ConsensusSchedule::build(cfg.schedule.clone(), cfg.horizon)?;
    let needs_graph = cfg
        .algorithms
        .iter()
        .any(|a| *a == Algorithm::Dpogd || a.hop_mode().is_some());
    let mixing = if needs_graph {
        Some(build_mixing(cfg, cfg.graph.family, seed)?)
    } else {
        None
    };
    let nodes = params.nodes;
    let x0 = RealVector::zeros(params.n);

    let mut traces: Vec<(Algorithm, RunTrace)> = Vec::new();
    for &alg in &cfg.algorithms {
        let alpha = cfg.alpha(alg);
        let trace = match alg {
            Algorithm::Dpogd => {
                let mut opts = DpogdOptions::new(alpha);
                opts.retain_buffers = cfg.outputs.diagnostics;
                run_time_indexed(
                    &stream,
                    &schedule,
                    mixing.as_ref().expect("graph built"),
                    opts,
                    &vec![x0.clone(); nodes],
                )
            }
            Algorithm::PogdSlowed => {
                run_centralized_pogd(&stream, alpha, Cadence::Sampled(&schedule), &x0)
            }
            Algorithm::AdmmSlowed => run_slowed_admm(&stream, &schedule, cfg.admm, &x0),
            Algorithm::CcAdmmSh | Algorithm::CcAdmmMh => run_cc_admm(
                &stream,
                mixing.as_ref().expect("graph built"),
                alg.hop_mode().expect("cc variant"),
                cfg.admm,
                &x0,
            ),
        }
        .map_err(|e| tag_error(e, alg, seed))?;
        traces.push((alg, trace));
    }

    let refs: Vec<&RunTrace> = traces.iter().map(|(_, t)| t).collect();
    let ledgers = dynamic_regret_batch(&refs, &stream, &oracle)?;
    let ledgers: Vec<(Algorithm, RegretLedger)> =
        traces.iter().map(|(a, _)| *a).zip(ledgers).collect();
    let work = traces.iter().map(|(a, t)| (*a, t.work)).collect();

    let (window, contraction) = match &mixing {
        Some(m) => {
            let window = connectivity_window(m, cfg.graph.max_window)?;
            let cc = window.and_then(|b| ContractionConstants::new(m.eta(), m.n(), b).ok());
            (window, cc)
        }
        None => (None, None),
    };

    let diagnostics = match traces.iter().find(|(a, _)| *a == Algorithm::Dpogd) {
        Some((_, tr)) if cfg.outputs.diagnostics => Some(consensus_diagnostics(
            tr,
            &stream,
            DiagnosticsContext {
                schedule: &schedule,
                alpha: cfg.step.dpogd,
                oracle: Some(&oracle),
                contraction: contraction.as_ref(),
            },
        )?),
        _ => None,
    };

    let path = &ledgers[0].1.path;
    let overlay = match (window, &contraction) {
        (Some(_), Some(c)) => Some(overlay_series(&cfg.schedule, c.log_gamma, path)?),
        // ω below the smallest double: γ^S rounds to one
        (Some(_), None) => Some(overlay_series(&cfg.schedule, 0.0, path)?),
        _ => None,
    };
    let sub = subsampled_path(&schedule, &oracle)?;

    if !cfg.outputs.traces {
        traces.clear();
    }
    Ok(SeedResult {
        seed,
        manifest: stream.manifest(),
        schedule,
        ledgers,
        work,
        traces,
        oracle: cfg.outputs.traces.then_some(oracle),
        diagnostics,
        window,
        contraction,
        subsampled_path: sub,
        overlay,
    })
}

/// Median of a non-empty slice (mean of the two middle values for even
/// lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    /// Median over seeds of the final `Reg_T / T`.
    pub final_regret_over_t: f64,
    /// Log-log slope of the median `Reg_T / T` over the last decade.
    pub slope: Option<f64>,
    pub mean_updates: f64,
    pub work_per_update: f64,
    pub linear_solve_per_update: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub manifest_hashes: Vec<String>,
    pub family: GraphFamily,
    pub schedule: ScheduleKind,
    pub path_slope: Option<f64>,
    pub final_path_over_t: f64,
    pub algorithms: Vec<AlgorithmSummary>,
    pub connectivity_window: Vec<Option<usize>>,
    /// Worst lemma residual over all seeds and iterations, when computed.
    pub worst_lemma_residual: Option<f64>,
}

/// Median-over-seeds `Reg_t / t` per algorithm and `C_t / t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianSeries {
    pub algorithms: Vec<Algorithm>,
    pub regret_over_t: Vec<Vec<f64>>,
    pub path_over_t: Vec<f64>,
    pub overlay_over_t: Option<Vec<Option<f64>>>,
}

impl MedianSeries {
    pub fn from_seeds(seeds: &[SeedResult]) -> Self {
        let algorithms: Vec<Algorithm> = seeds[0].ledgers.iter().map(|(a, _)| *a).collect();
        let horizon = seeds[0].ledgers[0].1.horizon();
        let regret_over_t = (0..algorithms.len())
            .map(|j| {
                (0..horizon)
                    .map(|i| {
                        let vals: Vec<f64> = seeds
                            .iter()
                            .map(|s| s.ledgers[j].1.cumulative[i] / (i + 1) as f64)
                            .collect();
                        median(&vals)
                    })
                    .collect()
            })
            .collect();
        let path_over_t = (0..horizon)
            .map(|i| {
                let vals: Vec<f64> = seeds
                    .iter()
                    .map(|s| s.ledgers[0].1.path[i] / (i + 1) as f64)
                    .collect();
                median(&vals)
            })
            .collect();
        let overlay_over_t = seeds.iter().all(|s| s.overlay.is_some()).then(|| {
            (0..horizon)
                .map(|i| {
                    let vals: Option<Vec<f64>> = seeds
                        .iter()
                        .map(|s| s.overlay.as_ref().unwrap()[i].map(|v| v / (i + 1) as f64))
                        .collect();
                    vals.map(|v| median(&v))
                })
                .collect()
        });
        Self {
            algorithms,
            regret_over_t,
            path_over_t,
            overlay_over_t,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W, hashes: &[String]) -> Result<()> {
        writeln!(w, "# manifest_hash={}", hashes.join(","))?;
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.algorithms.iter().map(|a| format!("{a}_reg_over_T")));
        header.push("C_t_over_T".into());
        header.push("overlay_over_T".into());
        wtr.write_record(&header)?;
        for i in 0..self.path_over_t.len() {
            let mut row = vec![(i + 1).to_string()];
            row.extend(self.regret_over_t.iter().map(|s| format!("{:e}", s[i])));
            row.push(format!("{:e}", self.path_over_t[i]));
            row.push(
                self.overlay_over_t
                    .as_ref()
                    .and_then(|o| o[i])
                    .map(|v| format!("{v:e}"))
                    .unwrap_or_default(),
            );
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn series(values: &[f64]) -> Vec<(f64, f64)> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| ((i + 1) as f64, *v))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedResult>,
    pub median: MedianSeries,
    pub summary: ExperimentSummary,
}

fn summarize(
    cfg: &ExperimentConfig,
    seeds: &[SeedResult],
    med: &MedianSeries,
) -> ExperimentSummary {
    let algorithms = med
        .algorithms
        .iter()
        .enumerate()
        .map(|(j, &alg)| {
            let finals: Vec<f64> = seeds
                .iter()
                .map(|s| s.ledgers[j].1.final_average())
                .collect();
            let works: Vec<WorkCounter> = seeds.iter().map(|s| s.work[j].1).collect();
            let m = works.len() as f64;
            let per = |f: &dyn Fn(&WorkCounter) -> u64| {
                works
                    .iter()
                    .map(|w| {
                        if w.updates == 0 {
                            0.0
                        } else {
                            f(w) as f64 / w.updates as f64
                        }
                    })
                    .sum::<f64>()
                    / m
            };
            AlgorithmSummary {
                algorithm: alg,
                final_regret_over_t: median(&finals),
                slope: loglog_slope(&series(&med.regret_over_t[j])).ok(),
                mean_updates: works.iter().map(|w| w.updates as f64).sum::<f64>() / m,
                work_per_update: per(&|w| w.total()),
                linear_solve_per_update: per(&|w| w.linear_solve),
            }
        })
        .collect();
    let worst = seeds
        .iter()
        .filter_map(|s| s.diagnostics.as_ref())
        .flat_map(|d| d.iter().filter_map(|r| r.worst_residual()))
        .reduce(f64::min);
    ExperimentSummary {
        horizon: cfg.horizon,
        seeds: cfg.seeds.clone(),
        manifest_hashes: seeds.iter().map(|s| s.manifest.hash.clone()).collect(),
        family: cfg.graph.family,
        schedule: cfg.schedule.clone(),
        path_slope: loglog_slope(&series(&med.path_over_t)).ok(),
        final_path_over_t: *med.path_over_t.last().unwrap_or(&0.0),
        algorithms,
        connectivity_window: seeds.iter().map(|s| s.window).collect(),
        worst_lemma_residual: worst,
    }
}

/// Runs every seed (in parallel) and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let seeds: Vec<SeedResult> = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s))
        .collect::<Result<_>>()?;
    let median = MedianSeries::from_seeds(&seeds);
    let summary = summarize(cfg, &seeds, &median);
    Ok(ExperimentResult {
        config: cfg.clone(),
        seeds,
        median,
        summary,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the resolved config, per-seed manifests and CSVs, the median
/// series and the summary under `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let cfg_text = toml::to_string(&result.config).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("config.toml"), cfg_text)?;
    for s in &result.seeds {
        let sd = dir.join(format!("seed-{}", s.seed));
        fs::create_dir_all(&sd)?;
        let hash = s.manifest.hash.as_str();
        serde_json::to_writer_pretty(create(&sd.join("manifest.json"))?, &s.manifest)?;
        let mut w = create(&sd.join("schedule.csv"))?;
        std::io::Write::write_fmt(&mut w, format_args!("# manifest_hash={hash}\n"))?;
        s.schedule.write_csv(w)?;
        for (alg, ledger) in &s.ledgers {
            let overlay = if *alg == Algorithm::Dpogd {
                s.overlay.as_deref()
            } else {
                None
            };
            ledger.write_csv(
                create(&sd.join(format!("{alg}_metrics.csv")))?,
                overlay,
                Some(hash),
            )?;
        }
        if let Some(d) = &s.diagnostics {
            write_diagnostics_csv(d, create(&sd.join("dpogd_diagnostics.csv"))?, Some(hash))?;
        }
        for (alg, tr) in &s.traces {
            let oracle: Option<Vec<RealVector>> = s
                .oracle
                .as_ref()
                .map(|o| o.iter().map(|r| r.x_star.clone()).collect());
            let mut w = create(&sd.join(format!("{alg}_trace.csv")))?;
            std::io::Write::write_fmt(&mut w, format_args!("# manifest_hash={hash}\n"))?;
            tr.write_csv(w, oracle.as_deref(), true)?;
        }
    }
    result.median.write_csv(
        create(&dir.join("median_metrics.csv"))?,
        &result.summary.manifest_hashes,
    )?;
    serde_json::to_writer_pretty(create(&dir.join("summary.json"))?, &result.summary)?;
    Ok(())
}

/// One point of a sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub family: GraphFamily,
    pub steps: usize,
    pub dir: PathBuf,
    pub summary: ExperimentSummary,
}

/// Runs the grid `sweep.families × sweep.steps`, writing each point to
/// `<out>/<family>/S-<steps>/`.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepPoint>> {
    cfg.validate_sweep()?;
    let mut points = Vec::new();
    for &family in &cfg.sweep.families {
        for &steps in &cfg.sweep.steps {
            let mut c = cfg.clone();
            c.graph.family = family;
            c.schedule = ScheduleKind::Explicit { steps: vec![steps] };
            let dir = out.join(family.label()).join(format!("S-{steps}"));
            c.output = dir.clone();
            let result = run_experiment(&c)?;
            write_outputs(&result, &dir)?;
            points.push(SweepPoint {
                family,
                steps,
                dir,
                summary: result.summary,
            });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            horizon: 120,
            seeds: vec![1, 2, 3],
            ..Default::default()
        };
        cfg.problem.nodes = 4;
        cfg.problem.n = 5;
        cfg.problem.d = 2;
        cfg.problem.sparsity = 2;
        cfg.step.dpogd = 0.01;
        cfg.algorithms = Algorithm::ALL.to_vec();
        cfg.outputs.diagnostics = true;
        cfg
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn algorithms_share_the_instance() {
        let cfg = tiny();
        let r = run_seed(&cfg, 7).unwrap();
        assert_eq!(r.ledgers.len(), 5);
        let c0 = &r.ledgers[0].1.path;
        assert!(r.ledgers.iter().all(|(_, l)| &l.path == c0));
        assert!(r.diagnostics.is_some());
        assert!(r.subsampled_path.0 <= r.subsampled_path.1 + 1e-12);
    }

    #[test]
    fn experiment_is_deterministic() {
        let cfg = tiny();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.median, b.median);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn divergence_names_the_algorithm() {
        let mut cfg = tiny();
        cfg.step.dpogd = 5.0;
        cfg.problem.radius = f64::INFINITY;
        cfg.algorithms = vec![Algorithm::Dpogd];
        match run_seed(&cfg, 1) {
            Err(Error::Divergence { detail, .. }) => assert!(detail.contains("dpogd, seed 1")),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
