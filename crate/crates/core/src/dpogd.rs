//! The DP-OGD engine.
//!
//! Two equivalent drivers are provided. [`run_time_indexed`] walks the
//! horizon one slot at a time, performing exactly one of the three updates
//! per slot:
//!
//! * gradient slot `t = t_k`: `z^i ← x^i − α ∇f_t^i(x^i)`;
//! * consensus slots `t_k < t ≤ t_k + S(k)`: `z^i ← Σ_j A_t^{ij} z^j`;
//! * prox slot `t = t_k + S(k) + 1`: `x^i ← prox_{g_{t_k}}^α(z^i)`.
//!
//! [`run_iteration_indexed`] condenses the `S(k)` consensus slots of each
//! iteration into one product `Q_k = A_{t_k+S(k)} ⋯ A_{t_k+1}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cost::{self, WorkCounter};
use crate::error::{Error, Result};
use crate::graph::{consensus_product, mix, MixingSequence};
use crate::problem::{SlotData, SlotSource};
use crate::prox::prox_composite;
use crate::schedule::{ConsensusSchedule, UpdateKind};
use crate::{all_finite, RealMatrix, RealVector};

/// Iterates larger than this multiple of the ball radius abort the run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
/// Norm limit used when the ball constraint is inactive.
pub const UNCONSTRAINED_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMode {
    Distributed,
    Centralized,
}

/// Per-iteration buffers `ẑ_k^i` (after the gradient step) and `ŷ_k^i`
/// (after consensus), kept only when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationBuffers {
    pub z_hat: Vec<RealVector>,
    pub y_hat: Vec<RealVector>,
}

/// Played actions of one run.
///
/// `snapshots[j]` is played from slot `starts[j]` until the slot before
/// `starts[j + 1]`. `data_slots[j]` is the slot whose functions produced
/// `snapshots[j + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub label: String,
    pub mode: TraceMode,
    pub horizon: usize,
    pub starts: Vec<usize>,
    pub snapshots: Vec<Vec<RealVector>>,
    pub data_slots: Vec<usize>,
    pub events: Vec<UpdateKind>,
    pub z_bar: Vec<RealVector>,
    pub buffers: Vec<IterationBuffers>,
    pub work: WorkCounter,
}

impl RunTrace {
    pub(crate) fn new(label: &str, mode: TraceMode, horizon: usize, init: Vec<RealVector>) -> Self {
        Self {
            label: label.to_string(),
            mode,
            horizon,
            starts: vec![1],
            snapshots: vec![init],
            data_slots: Vec::new(),
            events: Vec::with_capacity(horizon),
            z_bar: Vec::new(),
            buffers: Vec::new(),
            work: WorkCounter::default(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.snapshots[0].len()
    }

    /// Number of completed updates.
    pub fn updates(&self) -> usize {
        self.snapshots.len() - 1
    }

    /// Index of the snapshot played at slot `t`.
    pub fn snapshot_index(&self, t: usize) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Actions of every node at slot `t` (`x_t^i = x_{⌊t⌋}^i`).
    pub fn actions_at(&self, t: usize) -> &[RealVector] {
        &self.snapshots[self.snapshot_index(t)]
    }

    /// Network average of snapshot `j`.
    pub fn x_bar(&self, j: usize) -> RealVector {
        mean(&self.snapshots[j])
    }

    /// Writes one row per slot and node:
    /// `t, k, node, update_kind, [x_0 …], dist_to_oracle`.
    pub fn write_csv<W: Write>(
        &self,
        w: W,
        oracle: Option<&[RealVector]>,
        include_x: bool,
    ) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let dim = self.snapshots[0][0].len();
        let mut header = vec![
            "t".to_string(),
            "k".into(),
            "node".into(),
            "update_kind".into(),
        ];
        if include_x {
            header.extend((0..dim).map(|i| format!("x{i}")));
        }
        header.push("dist_to_oracle".into());
        wtr.write_record(&header)?;
        for t in 1..=self.horizon {
            let j = self.snapshot_index(t);
            let kind = self.events.get(t - 1).copied().unwrap_or(UpdateKind::Idle);
            for (i, x) in self.snapshots[j].iter().enumerate() {
                let mut row = vec![
                    t.to_string(),
                    (j + 1).to_string(),
                    match self.mode {
                        TraceMode::Distributed => i.to_string(),
                        TraceMode::Centralized => "central".to_string(),
                    },
                    kind.as_str().to_string(),
                ];
                if include_x {
                    row.extend(x.iter().map(|v| format!("{v:e}")));
                }
                row.push(match oracle {
                    Some(o) => format!("{:e}", (x - &o[t - 1]).norm()),
                    None => String::new(),
                });
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn mean(v: &[RealVector]) -> RealVector {
    let mut acc = RealVector::zeros(v[0].len());
    for x in v {
        acc += x;
    }
    acc / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpogdOptions {
    pub alpha: f64,
    /// Keep `ẑ_k` and `ŷ_k` for every iteration (needed by the diagnostics).
    pub retain_buffers: bool,
}

impl DpogdOptions {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            retain_buffers: false,
        }
    }

    pub fn with_buffers(mut self) -> Self {
        self.retain_buffers = true;
        self
    }
}

pub(crate) fn norm_limit(slot: &SlotData) -> f64 {
    if slot.g.radius.is_finite() {
        DIVERGENCE_FACTOR * slot.g.radius
    } else {
        UNCONSTRAINED_LIMIT
    }
}

pub(crate) fn guard(v: &RealVector, limit: f64, slot: usize, what: &str) -> Result<()> {
    if !all_finite(v) {
        return Err(Error::Divergence {
            slot,
            detail: format!("non-finite {what}"),
        });
    }
    let norm = v.norm();
    if norm > limit {
        return Err(Error::Divergence {
            slot,
            detail: format!("{what} norm {norm:e} exceeds {limit:e}"),
        });
    }
    Ok(())
}

fn check_inputs<S: SlotSource + ?Sized>(
    source: &S,
    schedule: &ConsensusSchedule,
    opts: &DpogdOptions,
    x_init: &[RealVector],
) -> Result<()> {
    if !(opts.alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {}",
            opts.alpha
        )));
    }
    if x_init.len() != source.nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial iterates for {} nodes",
            x_init.len(),
            source.nodes()
        )));
    }
    if x_init
        .iter()
        .any(|x| x.len() != source.dim() || !all_finite(x))
    {
        return Err(Error::InvalidArgument(
            "initial iterates must be finite with the problem dimension".into(),
        ));
    }
    if schedule.horizon() > source.horizon() {
        return Err(Error::DimensionMismatch(format!(
            "schedule horizon {} exceeds problem horizon {}",
            schedule.horizon(),
            source.horizon()
        )));
    }
    Ok(())
}

fn gradient_step(
    slot: &SlotData,
    x: &[RealVector],
    alpha: f64,
    t: usize,
    work: &mut WorkCounter,
) -> Result<Vec<RealVector>> {
    let (d, n) = slot.c[0].shape();
    let limit = norm_limit(slot);
    x.iter()
        .enumerate()
        .map(|(i, xi)| {
            work.gradient += cost::gradient_flops(d, n);
            let mut z = xi.clone();
            z.axpy(-alpha, &slot.local_gradient(i, xi), 1.0);
            guard(&z, limit, t, "gradient iterate")?;
            Ok(z)
        })
        .collect()
}

fn prox_step(
    slot: &SlotData,
    y: &[RealVector],
    alpha: f64,
    t: usize,
    work: &mut WorkCounter,
) -> Result<Vec<RealVector>> {
    let limit = norm_limit(slot);
    y.iter()
        .map(|yi| {
            work.prox += cost::prox_flops(yi.len());
            let x = prox_composite(yi, alpha, &slot.g);
            guard(&x, limit, t, "iterate")?;
            Ok(x)
        })
        .collect()
}

fn nonzeros(a: &RealMatrix) -> usize {
    a.iter().filter(|v| **v != 0.0).count()
}

/// Slot-by-slot DP-OGD.
pub fn run_time_indexed<S: SlotSource + ?Sized>(
    source: &S,
    schedule: &ConsensusSchedule,
    mixing: &MixingSequence,
    opts: DpogdOptions,
    x_init: &[RealVector],
) -> Result<RunTrace> {
    check_inputs(source, schedule, &opts, x_init)?;
    if mixing.n() != source.nodes() {
        return Err(Error::DimensionMismatch(format!(
            "mixing sequence over {} nodes for a {}-node problem",
            mixing.n(),
            source.nodes()
        )));
    }
    let horizon = schedule.horizon();
    let alpha = opts.alpha;
    let dim = source.dim();
    let mut trace = RunTrace::new("dpogd", TraceMode::Distributed, horizon, x_init.to_vec());
    let mut x = x_init.to_vec();
    let mut z: Vec<RealVector> = Vec::new();
    let mut z_hat: Vec<RealVector> = Vec::new();
    // the slot whose f and g drive the current iteration
    let mut current: Option<(usize, SlotData)> = None;

    for t in 1..=horizon {
        let kind = schedule.slot_kind(t)?;
        match kind {
            UpdateKind::Gradient => {
                let slot = source.slot(t);
                z = gradient_step(&slot, &x, alpha, t, &mut trace.work)?;
                trace.z_bar.push(mean(&z));
                if opts.retain_buffers {
                    z_hat = z.clone();
                }
                current = Some((t, slot));
            }
            UpdateKind::Consensus => {
                let a = mixing.matrix(t)?;
                trace.work.consensus += cost::mix_flops(nonzeros(&a.weights), dim);
                z = mix(&a.weights, &z)?;
            }
            UpdateKind::Prox => {
                let (tk, slot) = current.take().expect("prox slot follows a gradient slot");
                x = prox_step(&slot, &z, alpha, t, &mut trace.work)?;
                if opts.retain_buffers {
                    trace.buffers.push(IterationBuffers {
                        z_hat: std::mem::take(&mut z_hat),
                        y_hat: z.clone(),
                    });
                }
                trace.work.updates += 1;
                trace.starts.push(t + 1);
                trace.snapshots.push(x.clone());
                trace.data_slots.push(tk);
            }
            UpdateKind::Step | UpdateKind::Idle => {}
        }
        trace.events.push(kind);
    }
    Ok(trace)
}

/// `Q_k` for every iteration of `schedule`; the identity when `S(k) = 0`.
pub fn consensus_products(
    schedule: &ConsensusSchedule,
    mixing: &MixingSequence,
) -> Result<Vec<RealMatrix>> {
    let n = mixing.n();
    (1..=schedule.iterations())
        .map(|k| {
            let tk = schedule.sample_time(k);
            let s = schedule.consensus_steps(k);
            if s == 0 {
                return Ok(RealMatrix::identity(n, n));
            }
            let mats = (tk + 1..=tk + s)
                .map(|t| mixing.matrix(t).map(|m| m.weights))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&RealMatrix> = mats.iter().collect();
            consensus_product(&refs)
        })
        .collect()
}

/// Iteration-indexed DP-OGD with one consensus product per iteration.
pub fn run_iteration_indexed<S: SlotSource + ?Sized>(
    source: &S,
    schedule: &ConsensusSchedule,
    products: &[RealMatrix],
    opts: DpogdOptions,
    x_init: &[RealVector],
) -> Result<RunTrace> {
    check_inputs(source, schedule, &opts, x_init)?;
    let k_max = schedule.iterations();
    if products.len() < k_max {
        return Err(Error::Config(format!(
            "{} consensus products supplied for {k_max} iterations",
            products.len()
        )));
    }
    let alpha = opts.alpha;
    let dim = source.dim();
    let horizon = schedule.horizon();
    let mut trace = RunTrace::new("dpogd", TraceMode::Distributed, horizon, x_init.to_vec());
    let mut x = x_init.to_vec();
    for k in 1..=k_max {
        let tk = schedule.sample_time(k);
        let slot = source.slot(tk);
        let z = gradient_step(&slot, &x, alpha, tk, &mut trace.work)?;
        trace.z_bar.push(mean(&z));
        let q = &products[k - 1];
        trace.work.consensus += cost::mix_flops(nonzeros(q), dim);
        let y = mix(q, &z)?;
        let t_prox = tk + schedule.consensus_steps(k) + 1;
        x = prox_step(&slot, &y, alpha, t_prox, &mut trace.work)?;
        if opts.retain_buffers {
            trace.buffers.push(IterationBuffers { z_hat: z, y_hat: y });
        }
        trace.work.updates += 1;
        trace.starts.push(t_prox + 1);
        trace.snapshots.push(x.clone());
        trace.data_slots.push(tk);
    }
    trace.events = (1..=horizon)
        .map(|t| schedule.slot_kind(t))
        .collect::<Result<_>>()?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BasisKind, PermutationBasis};
    use crate::problem::{FixedSlots, ProblemParams, ProblemStream};
    use crate::prox::NonsmoothSpec;
    use crate::schedule::ScheduleKind;
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_node_slot() -> SlotData {
        SlotData {
            c: vec![dmatrix![1.0], dmatrix![1.0]],
            y: vec![dvector![1.0], dvector![3.0]],
            lambda: 0.0,
            g: NonsmoothSpec::unconstrained(0.0),
        }
    }

    #[test]
    fn hand_computed_two_node_iteration() {
        let src = FixedSlots::repeated(two_node_slot(), 3);
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![1] }, 3).unwrap();
        let mix = MixingSequence::explicit(vec![dmatrix![0.5, 0.5; 0.5, 0.5]; 3]).unwrap();
        let x0 = vec![dvector![0.0], dvector![0.0]];
        let tr = run_time_indexed(
            &src,
            &sch,
            &mix,
            DpogdOptions::new(0.25).with_buffers(),
            &x0,
        )
        .unwrap();
        assert_eq!(tr.buffers[0].z_hat, vec![dvector![0.5], dvector![1.5]]);
        assert_eq!(tr.buffers[0].y_hat, vec![dvector![1.0], dvector![1.0]]);
        assert_eq!(tr.snapshots[1], vec![dvector![1.0], dvector![1.0]]);
        assert_eq!(
            tr.events,
            vec![
                UpdateKind::Gradient,
                UpdateKind::Consensus,
                UpdateKind::Prox
            ]
        );
        assert_eq!(tr.starts, vec![1, 4]);

        let q = consensus_products(&sch, &mix).unwrap();
        let it = run_iteration_indexed(&src, &sch, &q, DpogdOptions::new(0.25), &x0).unwrap();
        assert_eq!(it.snapshots, tr.snapshots);
    }

    #[test]
    fn exact_averaging_gives_mean() {
        let p = ProblemParams::with_default_weights(4, 5, 2, 2);
        let src = ProblemStream::generate(p, 1, 40).unwrap();
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![2] }, 40).unwrap();
        let avg = RealMatrix::from_element(5, 5, 0.2);
        let q = vec![avg; sch.iterations()];
        let x0: Vec<_> = (0..5)
            .map(|i| RealVector::from_element(4, i as f64 * 0.1))
            .collect();
        let tr = run_iteration_indexed(&src, &sch, &q, DpogdOptions::new(0.01).with_buffers(), &x0)
            .unwrap();
        for (k, b) in tr.buffers.iter().enumerate() {
            for y in &b.y_hat {
                assert!((y - &tr.z_bar[k]).amax() < 1e-14);
            }
        }
    }

    #[test]
    fn single_node_is_centralized_prox_ogd() {
        let mut p = ProblemParams::with_default_weights(3, 1, 4, 2);
        p.sigma = 0.05;
        let src = ProblemStream::generate(p, 3, 30).unwrap();
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![0] }, 30).unwrap();
        let mix = MixingSequence::complete(1, 30);
        let x0 = vec![RealVector::zeros(3)];
        let alpha = 0.02;
        let tr = run_time_indexed(&src, &sch, &mix, DpogdOptions::new(alpha), &x0).unwrap();
        let mut x = RealVector::zeros(3);
        for (k, &tk) in sch.sample_times().iter().enumerate() {
            let s = src.slot(tk);
            x = prox_composite(&(&x - s.average_gradient(&x) * alpha), alpha, &s.g);
            assert!((&x - &tr.snapshots[k + 1][0]).amax() < 1e-14);
        }
    }

    #[test]
    fn consensus_preserves_mean() {
        let n = 6;
        let p = ProblemParams::with_default_weights(3, n, 2, 2);
        let src = ProblemStream::generate(p, 5, 60).unwrap();
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![4] }, 60).unwrap();
        let basis = PermutationBasis::generate(n, 2, BasisKind::Disjoint).unwrap();
        let mix = MixingSequence::random(basis, 2, 60, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let x0 = vec![RealVector::zeros(3); n];
        let tr = run_time_indexed(
            &src,
            &sch,
            &mix,
            DpogdOptions::new(0.01).with_buffers(),
            &x0,
        )
        .unwrap();
        for (k, b) in tr.buffers.iter().enumerate() {
            assert!((mean(&b.y_hat) - &tr.z_bar[k]).amax() < 1e-12);
        }
    }

    #[test]
    fn frozen_actions_between_samples() {
        let p = ProblemParams::with_default_weights(3, 2, 2, 2);
        let src = ProblemStream::generate(p, 5, 25).unwrap();
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![3] }, 25).unwrap();
        let mix = MixingSequence::complete(2, 25);
        let x0 = vec![RealVector::zeros(3); 2];
        let tr = run_time_indexed(&src, &sch, &mix, DpogdOptions::new(0.01), &x0).unwrap();
        for t in 1..=25 {
            let floor = sch.floor_time(t).unwrap();
            assert_eq!(tr.actions_at(t), tr.actions_at(floor));
        }
        // 25 slots = 5 iterations of 5 slots
        assert_eq!(tr.events.len(), 25);
        assert_eq!(tr.updates(), 5);
    }

    #[test]
    fn missing_mixing_matrix_is_config_error() {
        let src = FixedSlots::repeated(two_node_slot(), 10);
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![2] }, 10).unwrap();
        let mix = MixingSequence::complete(2, 2);
        let x0 = vec![dvector![0.0], dvector![0.0]];
        let err = run_time_indexed(&src, &sch, &mix, DpogdOptions::new(0.1), &x0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn divergence_is_reported_with_slot() {
        let src = FixedSlots::repeated(two_node_slot(), 400);
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![0] }, 400).unwrap();
        let mix = MixingSequence::complete(2, 400);
        let x0 = vec![dvector![1.0], dvector![1.0]];
        // α L = 5 > 2: the gradient map is expansive
        let err = run_time_indexed(&src, &sch, &mix, DpogdOptions::new(2.5), &x0).unwrap_err();
        match err {
            Error::Divergence { slot, .. } => assert!(slot > 1 && slot <= 400),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn csv_rows_per_slot_and_node() {
        let src = FixedSlots::repeated(two_node_slot(), 3);
        let sch = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![1] }, 3).unwrap();
        let mix = MixingSequence::complete(2, 3);
        let x0 = vec![dvector![0.0], dvector![0.0]];
        let tr = run_time_indexed(&src, &sch, &mix, DpogdOptions::new(0.25), &x0).unwrap();
        let oracle = vec![dvector![2.0]; 3];
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, Some(&oracle), true).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,k,node,update_kind,x0,dist_to_oracle");
        assert_eq!(lines.len(), 1 + 3 * 2);
        assert!(lines[1].starts_with("1,1,0,gradient,0e0,2e0"));
    }
}
