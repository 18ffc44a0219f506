//! Dynamic regret, path length, consensus error diagnostics and bound
//! overlays.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpogd::{mean, RunTrace, TraceMode};
use crate::error::{Error, Result};
use crate::graph::ContractionConstants;
use crate::problem::{smoothness_constants, OracleRecord, SlotSource, SmoothnessConstants};
use crate::prox::prox_composite;
use crate::schedule::{ConsensusSchedule, ScheduleKind};
use crate::RealVector;

/// Per-slot and cumulative regret of one trace, with the path length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub label: String,
    pub instant: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// `C_t = Σ_{s=2}^{t} ‖x_s⋆ − x_{s−1}⋆‖`.
    pub path: Vec<f64>,
}

impl RegretLedger {
    pub fn horizon(&self) -> usize {
        self.instant.len()
    }

    /// `Reg_T / T` for the full horizon.
    pub fn final_average(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0) / self.horizon().max(1) as f64
    }

    /// Writes `t, regret_instant, regret_cum, regret_cum_over_T, C_t,
    /// C_t_over_T, overlay`, preceded by a `# manifest_hash=` comment when
    /// a hash is given.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        overlay: Option<&[Option<f64>]>,
        manifest_hash: Option<&str>,
    ) -> Result<()> {
        if let Some(h) = manifest_hash {
            writeln!(w, "# manifest_hash={h}")?;
        }
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "t",
            "regret_instant",
            "regret_cum",
            "regret_cum_over_T",
            "C_t",
            "C_t_over_T",
            "overlay",
        ])?;
        for t in 1..=self.horizon() {
            let tf = t as f64;
            let ov = overlay
                .and_then(|o| o.get(t - 1).copied().flatten())
                .map(|v| format!("{v:e}"))
                .unwrap_or_default();
            wtr.write_record([
                t.to_string(),
                format!("{:e}", self.instant[t - 1]),
                format!("{:e}", self.cumulative[t - 1]),
                format!("{:e}", self.cumulative[t - 1] / tf),
                format!("{:e}", self.path[t - 1]),
                format!("{:e}", self.path[t - 1] / tf),
                ov,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn cumulative(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Cumulative path length `C_t` from the oracle trace.
pub fn path_series(oracle: &[OracleRecord]) -> Vec<f64> {
    let inc: Vec<f64> = oracle
        .iter()
        .enumerate()
        .map(|(i, r)| if i == 0 { 0.0 } else { r.path_increment })
        .collect();
    cumulative(&inc)
}

/// Dynamic regret of one trace against the oracle.
pub fn dynamic_regret<S: SlotSource + ?Sized>(
    trace: &RunTrace,
    source: &S,
    oracle: &[OracleRecord],
) -> Result<RegretLedger> {
    Ok(dynamic_regret_batch(&[trace], source, oracle)?.remove(0))
}

/// Dynamic regret of several traces over the same instance, regenerating
/// each slot once.
///
/// Distributed traces score `(1/N) Σ_i [ℓ_t(x_t^i) − ℓ_t(x_t⋆)]`,
/// centralized ones `ℓ_t(x_t) − ℓ_t(x_t⋆)`.
pub fn dynamic_regret_batch<S: SlotSource + ?Sized>(
    traces: &[&RunTrace],
    source: &S,
    oracle: &[OracleRecord],
) -> Result<Vec<RegretLedger>> {
    if oracle.len() != source.horizon() {
        return Err(Error::Misaligned(format!(
            "oracle covers {} slots, problem has {}",
            oracle.len(),
            source.horizon()
        )));
    }
    for tr in traces {
        if tr.horizon > oracle.len() {
            return Err(Error::Misaligned(format!(
                "trace '{}' spans {} slots, oracle only {}",
                tr.label,
                tr.horizon,
                oracle.len()
            )));
        }
        if tr.snapshots[0][0].len() != source.dim() {
            return Err(Error::Misaligned(format!(
                "trace '{}' has dimension {}, problem {}",
                tr.label,
                tr.snapshots[0][0].len(),
                source.dim()
            )));
        }
    }
    let t_max = traces.iter().map(|t| t.horizon).max().unwrap_or(0);
    let rows: Vec<Vec<f64>> = (1..=t_max)
        .into_par_iter()
        .map(|t| {
            let slot = source.slot(t);
            let q = slot.quadratic();
            let opt = oracle[t - 1].value;
            traces
                .iter()
                .map(|tr| {
                    if t > tr.horizon {
                        return 0.0;
                    }
                    let xs = tr.actions_at(t);
                    let total: f64 = xs.iter().map(|x| q.value(x) + slot.g.value(x) - opt).sum();
                    match tr.mode {
                        TraceMode::Distributed => total / xs.len() as f64,
                        TraceMode::Centralized => total,
                    }
                })
                .collect()
        })
        .collect();
    let path = path_series(oracle);
    Ok(traces
        .iter()
        .enumerate()
        .map(|(j, tr)| {
            let instant: Vec<f64> = rows[..tr.horizon].iter().map(|r| r[j]).collect();
            RegretLedger {
                label: tr.label.clone(),
                cumulative: cumulative(&instant),
                instant,
                path: path[..tr.horizon].to_vec(),
            }
        })
        .collect())
}

/// Consensus error quantities and lemma residuals of one iteration.
/// Residuals are `bound − measured`, so a satisfied inequality is `≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub k: usize,
    pub e_k_norm: f64,
    pub eps_k_norm: f64,
    pub delta_k: f64,
    pub rho: Option<f64>,
    pub lemma1_residual: Option<f64>,
    pub lemma2_residuals: (Option<f64>, Option<f64>),
    pub lemma3_residual: Option<f64>,
}

impl DiagnosticsRecord {
    /// Smallest available residual.
    pub fn worst_residual(&self) -> Option<f64> {
        [
            self.lemma1_residual,
            self.lemma2_residuals.0,
            self.lemma2_residuals.1,
            self.lemma3_residual,
        ]
        .into_iter()
        .flatten()
        .reduce(f64::min)
    }
}

/// Inputs beyond the trace needed by [`consensus_diagnostics`].
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsContext<'a> {
    pub schedule: &'a ConsensusSchedule,
    pub alpha: f64,
    /// Per-slot optimum; enables the Lemma 1 residual.
    pub oracle: Option<&'a [OracleRecord]>,
    /// `(Γ, γ)`; enables the Lemma 2a and Lemma 3 residuals.
    pub contraction: Option<&'a ContractionConstants>,
}

/// `e_k`, `ε_k`, `δ_k` and the lemma residuals for every iteration of a
/// DP-OGD trace run with buffers retained.
///
/// The first iteration plays the role of index 0 in the bounds, so `ẑ_0`
/// is the gradient buffer of iteration 1. `L` and `M` are the worst case
/// over all sampled slots; `ρ` uses the constants of the iteration's slot.
pub fn consensus_diagnostics<S: SlotSource + ?Sized>(
    trace: &RunTrace,
    source: &S,
    ctx: DiagnosticsContext<'_>,
) -> Result<Vec<DiagnosticsRecord>> {
    let sch = ctx.schedule;
    let k_max = trace.updates();
    if trace.buffers.len() != k_max || k_max == 0 {
        return Err(Error::InvalidArgument(
            "diagnostics need a DP-OGD trace with retained buffers".into(),
        ));
    }
    if k_max > sch.iterations() {
        return Err(Error::Misaligned(format!(
            "trace has {k_max} iterations, schedule {}",
            sch.iterations()
        )));
    }
    let alpha = ctx.alpha;
    let n_nodes = trace.nodes() as f64;
    let slots: Vec<_> = (1..=k_max)
        .map(|k| source.slot(sch.sample_time(k)))
        .collect();
    let per_slot: Vec<SmoothnessConstants> = slots.par_iter().map(smoothness_constants).collect();
    let worst = per_slot
        .iter()
        .copied()
        .reduce(SmoothnessConstants::merge)
        .expect("at least one iteration");
    let zsum = |k: usize| -> f64 { trace.buffers[k - 1].z_hat.iter().map(|z| z.norm()).sum() };
    let z0 = zsum(1);
    let growth = |j: usize| z0 + 2.0 * alpha * n_nodes * worst.m * j as f64;
    let init_identical = trace.snapshots[0]
        .iter()
        .all(|x| x == &trace.snapshots[0][0]);

    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let slot = &slots[k - 1];
        let xs = &trace.snapshots[k - 1];
        let x_bar = mean(xs);
        let mut e = RealVector::zeros(x_bar.len());
        for (i, xi) in xs.iter().enumerate() {
            e += slot.local_gradient(i, xi) - slot.local_gradient(i, &x_bar);
        }
        e /= n_nodes;
        let x_next_bar = mean(&trace.snapshots[k]);
        let z_bar = &trace.z_bar[k - 1];
        let eps = &x_next_bar - prox_composite(z_bar, alpha, &slot.g);
        let delta = eps.norm() + alpha * e.norm();

        let sc = per_slot[k - 1];
        let rho_ok = alpha > 0.0 && alpha < 2.0 * sc.mu / (sc.l * sc.l);
        let rho = rho_ok.then(|| sc.rho(alpha));
        let lemma1 = match (rho, ctx.oracle) {
            (Some(r), Some(o)) => {
                let xs_star = &o[sch.sample_time(k) - 1].x_star;
                Some(r * (&x_bar - xs_star).norm() + delta - (&x_next_bar - xs_star).norm())
            }
            _ => None,
        };

        let lemma2b = Some(growth(k - 1) - zsum(k));
        let spread: f64 = xs.iter().map(|x| (&x_bar - x).norm()).sum();
        let (lemma2a, lemma3) = match ctx.contraction {
            Some(cc) => {
                let l2a = (k >= 2).then(|| {
                    2.0 * cc.bound(sch.consensus_steps(k - 1)) * n_nodes * zsum(k - 1) - spread
                });
                let second = cc.bound(sch.consensus_steps(k)) * growth(k - 1);
                let l3 = if k >= 2 {
                    let first = 2.0
                        * alpha
                        * worst.l
                        * cc.bound(sch.consensus_steps(k - 1))
                        * growth(k - 2);
                    Some(first + second - delta)
                } else if init_identical {
                    Some(second - delta)
                } else {
                    None
                };
                (l2a, l3)
            }
            None => (None, None),
        };
        out.push(DiagnosticsRecord {
            k,
            e_k_norm: e.norm(),
            eps_k_norm: eps.norm(),
            delta_k: delta,
            rho,
            lemma1_residual: lemma1,
            lemma2_residuals: (lemma2a, lemma2b),
            lemma3_residual: lemma3,
        });
    }
    Ok(out)
}

/// Writes `k, e_k, eps_k, delta_k, rho, lemma1, lemma2a, lemma2b, lemma3`.
pub fn write_diagnostics_csv<W: Write>(
    records: &[DiagnosticsRecord],
    mut w: W,
    manifest_hash: Option<&str>,
) -> Result<()> {
    if let Some(h) = manifest_hash {
        writeln!(w, "# manifest_hash={h}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "k", "e_k", "eps_k", "delta_k", "rho", "lemma1", "lemma2a", "lemma2b", "lemma3",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in records {
        wtr.write_record([
            r.k.to_string(),
            format!("{:e}", r.e_k_norm),
            format!("{:e}", r.eps_k_norm),
            format!("{:e}", r.delta_k),
            opt(r.rho),
            opt(r.lemma1_residual),
            opt(r.lemma2_residuals.0),
            opt(r.lemma2_residuals.1),
            opt(r.lemma3_residual),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `Σ_k ‖x⋆_{t_k} − x⋆_{t_{k−1}}‖` over the sample times, and the full
/// `C_T` over the schedule horizon.
pub fn subsampled_path(
    schedule: &ConsensusSchedule,
    oracle: &[OracleRecord],
) -> Result<(f64, f64)> {
    let horizon = schedule.horizon();
    if oracle.len() < horizon {
        return Err(Error::Misaligned(format!(
            "oracle covers {} slots, schedule {horizon}",
            oracle.len()
        )));
    }
    let sub = schedule
        .sample_times()
        .windows(2)
        .map(|w| (&oracle[w[1] - 1].x_star - &oracle[w[0] - 1].x_star).norm())
        .sum();
    let full = oracle[1..horizon].iter().map(|r| r.path_increment).sum();
    Ok((sub, full))
}

/// `R_T (1 + E_T + C_T)` for a schedule, with no hidden constant.
pub fn theoretical_overlay(schedule: &ConsensusSchedule, log_gamma: f64, c_t: f64) -> f64 {
    let b = schedule.bound_components_log(log_gamma, log_gamma.exp());
    b.r_t as f64 * (1.0 + b.e_t + c_t)
}

/// The overlay at every horizon `t = 1..=path.len()`, treating each `t` as
/// the final horizon. `None` where no iteration fits.
pub fn overlay_series(
    kind: &ScheduleKind,
    log_gamma: f64,
    path: &[f64],
) -> Result<Vec<Option<f64>>> {
    let t_max = path.len();
    match kind {
        ScheduleKind::Constant { u } => Ok((1..=t_max)
            .map(|t| {
                let s = (t as f64).powf(*u).floor() as usize;
                let k = t / (s + 2);
                (k > 0).then(|| {
                    let e = (log_gamma * s as f64).exp() * (k * (k + 1)) as f64 / 2.0;
                    s as f64 * (1.0 + e + path[t - 1])
                })
            })
            .collect()),
        _ => {
            if t_max < 3 {
                return Ok(vec![None; t_max]);
            }
            let sch = match ConsensusSchedule::build(kind.clone(), t_max) {
                Ok(s) => s,
                Err(Error::ScheduleInfeasible(_)) => return Ok(vec![None; t_max]),
                Err(e) => return Err(e),
            };
            let mut out = Vec::with_capacity(t_max);
            let mut k = 0usize;
            let mut e_t = 0.0;
            for t in 1..=t_max {
                while k < sch.iterations()
                    && sch.sample_time(k + 1) + sch.consensus_steps(k + 1) < t
                {
                    k += 1;
                    e_t += (log_gamma * sch.consensus_steps(k) as f64).exp() * k as f64;
                }
                out.push(
                    (k > 0).then(|| sch.consensus_steps(k) as f64 * (1.0 + e_t + path[t - 1])),
                );
            }
            Ok(out)
        }
    }
}

/// Least-squares slope of `ln value` against `ln T` over the last decade
/// of `T`.
pub fn loglog_slope(series: &[(f64, f64)]) -> Result<f64> {
    let t_last = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let window: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| p.0 >= t_last / 10.0)
        .copied()
        .collect();
    if window.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "slope window holds {} points, need at least 10",
            window.len()
        )));
    }
    if window.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InvalidArgument(
            "log-log slope needs positive values".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = window.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// `(T, Reg_T / T)` pairs.
pub fn average_regret_series(ledger: &RegretLedger) -> Vec<(f64, f64)> {
    ledger
        .cumulative
        .iter()
        .enumerate()
        .map(|(i, c)| ((i + 1) as f64, c / (i + 1) as f64))
        .collect()
}

/// `(T, C_T / T)` pairs.
pub fn average_path_series(ledger: &RegretLedger) -> Vec<(f64, f64)> {
    ledger
        .path
        .iter()
        .enumerate()
        .map(|(i, c)| ((i + 1) as f64, c / (i + 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpogd::{run_time_indexed, DpogdOptions};
    use crate::graph::{BasisKind, MixingSequence, PermutationBasis};
    use crate::problem::{
        oracle_trace, FixedSlots, OracleOptions, ProblemParams, ProblemStream, SlotData,
    };
    use crate::prox::NonsmoothSpec;
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> SlotData {
        SlotData {
            c: vec![dmatrix![1.0]],
            y: vec![dvector![0.0]],
            lambda: 0.0,
            g: NonsmoothSpec::unconstrained(0.0),
        }
    }

    #[test]
    fn regret_of_unit_action_is_one() {
        let src = FixedSlots::repeated(square(), 1);
        let oracle = oracle_trace(&src, OracleOptions::default(), 0).unwrap();
        let tr = RunTrace::new("x", TraceMode::Centralized, 1, vec![dvector![1.0]]);
        let l = dynamic_regret(&tr, &src, &oracle).unwrap();
        assert!((l.cumulative[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn playing_the_optimum_has_zero_regret() {
        let p = ProblemParams::with_default_weights(3, 3, 2, 2);
        let src = ProblemStream::generate(p, 1, 12).unwrap();
        let oracle = oracle_trace(&src, OracleOptions::default(), 1).unwrap();
        let mut tr = RunTrace::new(
            "opt",
            TraceMode::Distributed,
            12,
            vec![oracle[0].x_star.clone(); 3],
        );
        for t in 2..=12 {
            tr.starts.push(t);
            tr.snapshots.push(vec![oracle[t - 1].x_star.clone(); 3]);
        }
        let l = dynamic_regret(&tr, &src, &oracle).unwrap();
        assert!(l.instant.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn instantaneous_regret_non_negative() {
        let p = ProblemParams::with_default_weights(4, 6, 3, 2);
        let src = ProblemStream::generate(p, 4, 200).unwrap();
        let oracle = oracle_trace(&src, OracleOptions::default(), 4).unwrap();
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![2] }, 200).unwrap();
        let basis = PermutationBasis::generate(6, 1, BasisKind::Disjoint).unwrap();
        let mix = MixingSequence::random(basis, 1, 200, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let tr = run_time_indexed(
            &src,
            &sch,
            &mix,
            DpogdOptions::new(0.01),
            &vec![RealVector::zeros(4); 6],
        )
        .unwrap();
        let l = dynamic_regret(&tr, &src, &oracle).unwrap();
        assert!(l.instant.iter().all(|r| *r >= -1e-9));
        assert!(l.cumulative.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn misaligned_oracle_rejected() {
        let src = FixedSlots::repeated(square(), 4);
        let oracle = oracle_trace(
            &FixedSlots::repeated(square(), 3),
            OracleOptions::default(),
            0,
        )
        .unwrap();
        let tr = RunTrace::new("x", TraceMode::Centralized, 4, vec![dvector![1.0]]);
        assert!(matches!(
            dynamic_regret(&tr, &src, &oracle),
            Err(Error::Misaligned(_))
        ));
    }

    #[test]
    fn complete_graph_errors_vanish_after_first_iteration() {
        let n = 5;
        let p = ProblemParams::with_default_weights(3, n, 3, 2);
        let src = ProblemStream::generate(p, 8, 60).unwrap();
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![1] }, 60).unwrap();
        let mix = MixingSequence::complete(n, 60);
        let x0: Vec<_> = (0..n)
            .map(|i| RealVector::from_element(3, i as f64))
            .collect();
        let tr = run_time_indexed(
            &src,
            &sch,
            &mix,
            DpogdOptions::new(0.01).with_buffers(),
            &x0,
        )
        .unwrap();
        let ctx = DiagnosticsContext {
            schedule: &sch,
            alpha: 0.01,
            oracle: None,
            contraction: None,
        };
        let d = consensus_diagnostics(&tr, &src, ctx).unwrap();
        for r in &d[1..] {
            assert!(r.e_k_norm < 1e-12 && r.eps_k_norm < 1e-12);
        }
        assert!(d[0].e_k_norm > 0.0);
        for r in &d {
            assert_eq!(r.delta_k, r.eps_k_norm + 0.01 * r.e_k_norm);
        }
    }

    #[test]
    fn single_node_errors_are_zero() {
        let p = ProblemParams::with_default_weights(3, 1, 3, 2);
        let src = ProblemStream::generate(p, 8, 40).unwrap();
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![0] }, 40).unwrap();
        let mix = MixingSequence::complete(1, 40);
        let tr = run_time_indexed(
            &src,
            &sch,
            &mix,
            DpogdOptions::new(0.01).with_buffers(),
            &[RealVector::zeros(3)],
        )
        .unwrap();
        let ctx = DiagnosticsContext {
            schedule: &sch,
            alpha: 0.01,
            oracle: None,
            contraction: None,
        };
        for r in consensus_diagnostics(&tr, &src, ctx).unwrap() {
            assert_eq!(r.e_k_norm, 0.0);
            assert_eq!(r.eps_k_norm, 0.0);
        }
    }

    #[test]
    fn overlay_static_case() {
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![3] }, 100).unwrap();
        let lg = 0.5f64.ln();
        let b = sch.bound_components(0.5).unwrap();
        assert!((theoretical_overlay(&sch, lg, 0.0) - 3.0 * (1.0 + b.e_t)).abs() < 1e-12);
        let series = overlay_series(sch.kind(), lg, &vec![0.0; 100]).unwrap();
        assert!((series[99].unwrap() - theoretical_overlay(&sch, lg, 0.0)).abs() < 1e-9);
        assert!(series[0].is_none());
    }

    #[test]
    fn constant_overlay_matches_schedule() {
        let kind = ScheduleKind::Constant { u: 0.5 };
        let lg = 0.9f64.ln();
        let path: Vec<f64> = (1..=300).map(|t| t as f64 * 0.01).collect();
        let series = overlay_series(&kind, lg, &path).unwrap();
        for t in [10usize, 57, 123, 300] {
            let sch = ConsensusSchedule::build(kind.clone(), t).unwrap();
            let direct = theoretical_overlay(&sch, lg, path[t - 1]);
            assert!(
                (series[t - 1].unwrap() - direct).abs() < 1e-9 * direct,
                "t = {t}"
            );
        }
    }

    #[test]
    fn slope_examples() {
        let s: Vec<(f64, f64)> = (1..=1000)
            .map(|t| (t as f64, (t as f64).powf(-0.5)))
            .collect();
        assert!((loglog_slope(&s).unwrap() + 0.5).abs() < 1e-12);
        let c: Vec<(f64, f64)> = (1..=100).map(|t| (t as f64, 3.0)).collect();
        assert!(loglog_slope(&c).unwrap().abs() < 1e-12);
        let bad: Vec<(f64, f64)> = (1..=100).map(|t| (t as f64, 0.0)).collect();
        assert!(loglog_slope(&bad).is_err());
    }

    #[test]
    fn subsampled_path_not_longer() {
        let p = ProblemParams::with_default_weights(3, 2, 3, 2);
        let src = ProblemStream::generate(p, 2, 80).unwrap();
        let oracle = oracle_trace(&src, OracleOptions::default(), 2).unwrap();
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![4] }, 80).unwrap();
        let (sub, full) = subsampled_path(&sch, &oracle).unwrap();
        assert!(sub <= full + 1e-12);
        assert!(sub > 0.0);
    }

    #[test]
    fn metrics_csv_header() {
        let l = RegretLedger {
            label: "a".into(),
            instant: vec![1.0, 0.0],
            cumulative: vec![1.0, 1.0],
            path: vec![0.0, 0.5],
        };
        let mut buf = Vec::new();
        l.write_csv(&mut buf, None, Some("abc")).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("# manifest_hash=abc"));
        assert_eq!(
            lines.next(),
            Some("t,regret_instant,regret_cum,regret_cum_over_T,C_t,C_t_over_T,overlay")
        );
        assert_eq!(lines.nth(1), Some("2,0e0,1e0,5e-1,5e-1,2.5e-1,"));
    }
}
