//! Centralized comparison algorithms: proximal OGD, dynamic ADMM and the
//! communication-constrained ADMM variants.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::cost::{self, WorkCounter};
use crate::dpogd::{guard, norm_limit, RunTrace, TraceMode};
use crate::error::{Error, Result};
use crate::graph::{dissemination_delay, HopMode, MixingSequence};
use crate::problem::{SlotData, SlotSource};
use crate::prox::{prox_composite, NonsmoothSpec};
use crate::schedule::{ConsensusSchedule, UpdateKind};
use crate::{all_finite, RealMatrix, RealVector};

/// When a centralized method is allowed to update.
#[derive(Debug, Clone, Copy)]
pub enum Cadence<'a> {
    /// Every slot; the update computed from slot `t` is played at `t + 1`.
    EverySlot,
    /// Only at the sample times of `schedule`; the update computed from
    /// `t_k` is played from `t_{k+1}`, as for DP-OGD.
    Sampled(&'a ConsensusSchedule),
}

/// Firing slots and the slot each result becomes visible.
fn cadence_slots(cadence: Cadence<'_>, horizon: usize) -> Result<Vec<(usize, usize)>> {
    match cadence {
        Cadence::EverySlot => Ok((1..=horizon).map(|t| (t, t + 1)).collect()),
        Cadence::Sampled(s) => {
            if s.horizon() > horizon {
                return Err(Error::DimensionMismatch(format!(
                    "schedule horizon {} exceeds problem horizon {horizon}",
                    s.horizon()
                )));
            }
            Ok((1..=s.iterations())
                .map(|k| {
                    let tk = s.sample_time(k);
                    (tk, tk + s.consensus_steps(k) + 2)
                })
                .collect())
        }
    }
}

fn trace_horizon(cadence: Cadence<'_>, source_horizon: usize) -> usize {
    match cadence {
        Cadence::EverySlot => source_horizon,
        Cadence::Sampled(s) => s.horizon(),
    }
}

fn check_init(x: &RealVector, dim: usize) -> Result<()> {
    if x.len() != dim || !all_finite(x) {
        return Err(Error::InvalidArgument(
            "initial iterate must be finite with the problem dimension".into(),
        ));
    }
    Ok(())
}

fn events_for(horizon: usize, fired: &[(usize, usize)]) -> Vec<UpdateKind> {
    let mut ev = vec![UpdateKind::Idle; horizon];
    for &(t, _) in fired {
        if t <= horizon {
            ev[t - 1] = UpdateKind::Step;
        }
    }
    ev
}

/// Centralized proximal OGD with the exact network-average gradient.
pub fn run_centralized_pogd<S: SlotSource + ?Sized>(
    source: &S,
    alpha: f64,
    cadence: Cadence<'_>,
    x_init: &RealVector,
) -> Result<RunTrace> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {alpha}"
        )));
    }
    check_init(x_init, source.dim())?;
    let horizon = trace_horizon(cadence, source.horizon());
    let label = match cadence {
        Cadence::EverySlot => "pogd",
        Cadence::Sampled(_) => "pogd-slowed",
    };
    let fire = cadence_slots(cadence, source.horizon())?;
    let mut trace = RunTrace::new(label, TraceMode::Centralized, horizon, vec![x_init.clone()]);
    let mut x = x_init.clone();
    for &(t, visible) in &fire {
        let slot = source.slot(t);
        let (d, n) = slot.c[0].shape();
        trace.work.gradient += slot.nodes() as u64 * cost::gradient_flops(d, n);
        trace.work.prox += cost::prox_flops(n);
        let z = &x - slot.average_gradient(&x) * alpha;
        x = prox_composite(&z, alpha, &slot.g);
        guard(&x, norm_limit(&slot), t, "iterate")?;
        trace.work.updates += 1;
        trace.starts.push(visible);
        trace.snapshots.push(vec![x.clone()]);
        trace.data_slots.push(t);
    }
    trace.events = events_for(horizon, &fire);
    Ok(trace)
}

/// ADMM penalty `ϱ` and proximal damping `ϖ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub varrho: f64,
    pub varpi: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            varrho: 1.0,
            varpi: 0.1,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.varrho > 0.0 && self.varrho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ADMM penalty must be positive, got {}",
                self.varrho
            )));
        }
        if !(self.varpi >= 0.0 && self.varpi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ADMM damping must be non-negative, got {}",
                self.varpi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: RealVector,
    pub z: RealVector,
    pub v: RealVector,
    pub varrho: f64,
    pub varpi: f64,
}

impl AdmmState {
    pub fn new(x: RealVector, params: AdmmParams) -> Result<Self> {
        params.validate()?;
        if !all_finite(&x) {
            return Err(Error::InvalidArgument("ADMM state must be finite".into()));
        }
        let n = x.len();
        Ok(Self {
            z: x.clone(),
            x,
            v: RealVector::zeros(n),
            varrho: params.varrho,
            varpi: params.varpi,
        })
    }
}

/// Aggregated smooth part `f(x) = xᵀHx − 2bᵀx + c0 + λ‖x‖²` with the
/// regularizer, as consumed by [`admm_step`].
#[derive(Debug, Clone)]
pub struct AdmmProblem {
    pub h: RealMatrix,
    pub b: RealVector,
    pub lambda: f64,
    pub g: NonsmoothSpec,
}

impl AdmmProblem {
    pub fn from_slot(slot: &SlotData) -> Self {
        let q = slot.quadratic();
        Self {
            h: q.h,
            b: q.b,
            lambda: q.lambda,
            g: slot.g,
        }
    }

    /// `2H + 2λI + (ϱ + ϖ)I`.
    pub fn x_hessian(&self, varrho: f64, varpi: f64) -> RealMatrix {
        let n = self.b.len();
        &self.h * 2.0 + RealMatrix::identity(n, n) * (2.0 * self.lambda + varrho + varpi)
    }

    /// Gradient of `L(x, z, v) + (ϖ/2)‖x − x_prev‖²` in `x`.
    pub fn x_residual(&self, state: &AdmmState, x_new: &RealVector) -> RealVector {
        (&self.h * x_new - &self.b) * 2.0
            + x_new * (2.0 * self.lambda)
            + &state.v
            + (x_new - &state.z) * state.varrho
            + (x_new - &state.x) * state.varpi
    }
}

/// One damped ADMM iteration.
pub fn admm_step(state: &AdmmState, problem: &AdmmProblem) -> Result<AdmmState> {
    if !(state.varrho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ADMM penalty must be positive, got {}",
            state.varrho
        )));
    }
    let (rho, pi) = (state.varrho, state.varpi);
    let hess = problem.x_hessian(rho, pi);
    let rhs = &problem.b * 2.0 - &state.v + &state.z * rho + &state.x * pi;
    let x = Cholesky::new(hess)
        .ok_or_else(|| {
            Error::InvalidArgument("ADMM x-update system is not positive definite".into())
        })?
        .solve(&rhs);
    let w = (&x * rho + &state.v + &state.z * pi) / (rho + pi);
    let z = prox_composite(&w, 1.0 / (rho + pi), &problem.g);
    let v = &state.v + (&x - &z) * rho;
    Ok(AdmmState {
        x,
        z,
        v,
        varrho: rho,
        varpi: pi,
    })
}

fn admm_update(
    state: &AdmmState,
    slot: &SlotData,
    t: usize,
    work: &mut WorkCounter,
) -> Result<AdmmState> {
    let (d, n) = slot.c[0].shape();
    work.assembly += cost::assembly_flops(slot.nodes(), d, n);
    work.linear_solve += cost::cholesky_solve_flops(n);
    work.prox += cost::prox_flops(n);
    let next = admm_step(state, &AdmmProblem::from_slot(slot))?;
    let limit = norm_limit(slot);
    guard(&next.x, limit, t, "ADMM x")?;
    guard(&next.z, limit, t, "ADMM z")?;
    if !all_finite(&next.v) {
        return Err(Error::Divergence {
            slot: t,
            detail: "non-finite ADMM dual".into(),
        });
    }
    Ok(next)
}

fn run_admm_at<S: SlotSource + ?Sized>(
    source: &S,
    label: &str,
    horizon: usize,
    fire: &[(usize, usize)],
    params: AdmmParams,
    x_init: &RealVector,
) -> Result<RunTrace> {
    check_init(x_init, source.dim())?;
    let mut state = AdmmState::new(x_init.clone(), params)?;
    let mut trace = RunTrace::new(label, TraceMode::Centralized, horizon, vec![x_init.clone()]);
    for &(t, visible) in fire {
        state = admm_update(&state, &source.slot(t), t, &mut trace.work)?;
        trace.work.updates += 1;
        trace.starts.push(visible);
        trace.snapshots.push(vec![state.x.clone()]);
        trace.data_slots.push(t);
    }
    trace.events = events_for(horizon, fire);
    Ok(trace)
}

/// Dynamic ADMM restricted to the sample times of `schedule`.
pub fn run_slowed_admm<S: SlotSource + ?Sized>(
    source: &S,
    schedule: &ConsensusSchedule,
    params: AdmmParams,
    x_init: &RealVector,
) -> Result<RunTrace> {
    let fire = cadence_slots(Cadence::Sampled(schedule), source.horizon())?;
    run_admm_at(
        source,
        "admm-slowed",
        schedule.horizon(),
        &fire,
        params,
        x_init,
    )
}

/// Dynamic ADMM updating at every slot.
pub fn run_admm<S: SlotSource + ?Sized>(
    source: &S,
    params: AdmmParams,
    x_init: &RealVector,
) -> Result<RunTrace> {
    let fire = cadence_slots(Cadence::EverySlot, source.horizon())?;
    run_admm_at(source, "admm", source.horizon(), &fire, params, x_init)
}

/// Firing slots of the communication-constrained ADMM: `τ_1 = 1`,
/// `τ_{j+1} = τ_j + delay(τ_j)`. Firing stops once the remaining slots
/// cannot complete a dissemination.
pub fn cc_admm_firing_times(
    mixing: &MixingSequence,
    horizon: usize,
    mode: HopMode,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut tau = 1;
    while tau <= horizon {
        let delay = match dissemination_delay(mixing, tau, mode) {
            Ok(d) => d,
            Err(e @ Error::InsufficientHorizon { .. }) if out.is_empty() => return Err(e),
            Err(Error::InsufficientHorizon { .. }) => break,
            Err(e) => return Err(e),
        };
        out.push((tau, tau + delay));
        tau += delay;
    }
    Ok(out)
}

/// ADMM whose cadence waits for single- or multi-hop dissemination over
/// the mixing sequence.
pub fn run_cc_admm<S: SlotSource + ?Sized>(
    source: &S,
    mixing: &MixingSequence,
    mode: HopMode,
    params: AdmmParams,
    x_init: &RealVector,
) -> Result<RunTrace> {
    let horizon = source.horizon().min(mixing.len());
    let fire = cc_admm_firing_times(mixing, horizon, mode)?;
    let label = match mode {
        HopMode::SingleHop => "cc-admm-sh",
        HopMode::MultiHop => "cc-admm-mh",
    };
    run_admm_at(source, label, horizon, &fire, params, x_init)
}
