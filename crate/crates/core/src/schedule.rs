//! Consensus schedule: the number of consensus slots `S(k)` per iteration,
//! the sample times `t_k` and the time/iteration bookkeeping.
//!
//! Slots are 1-based. Iteration `k` occupies slots `t_k ..= t_k + S(k) + 1`:
//! one gradient slot, `S(k)` consensus slots and one proximal slot, so that
//! `t_{k+1} = t_k + S(k) + 2`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `S(k)` is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `S(k) = ⌊T^u⌋` for every `k`, with `0 < u < 1`.
    Constant { u: f64 },
    /// `S(k) = ⌊c · ln k⌋`, with `c > 1`. `S(1) = 0` is allowed.
    Logarithmic { c: f64 },
    /// Explicit list of `S(k)`; the last entry repeats once the list is
    /// exhausted, so `[5]` means `S(k) = 5` for all `k`.
    Explicit { steps: Vec<usize> },
}

/// What to do with an explicit list that decreases somewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MonotonicityPolicy {
    #[default]
    Reject,
    Warn,
}

/// What a slot is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateKind {
    Gradient,
    Consensus,
    Prox,
    /// One complete update of a centralized baseline.
    Step,
    /// Slots in which nothing is updated.
    Idle,
}

impl UpdateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateKind::Gradient => "gradient",
            UpdateKind::Consensus => "consensus",
            UpdateKind::Prox => "prox",
            UpdateKind::Step => "step",
            UpdateKind::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSchedule {
    kind: ScheduleKind,
    horizon: usize,
    sample_times: Vec<usize>,
    steps: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

/// Ingredients of the regret bound: `S_T`, `R_T = S(S_T)` and
/// `E_T = Σ_{k ≤ S_T} γ^{S(k)} k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    pub k_count: usize,
    pub r_t: usize,
    pub e_t: f64,
    pub gamma: f64,
}

fn steps_for(kind: &ScheduleKind, horizon: usize, k: usize) -> usize {
    match kind {
        ScheduleKind::Constant { u } => {
            let v = (horizon as f64).powf(*u);
            // ⌊T^u⌋ with a relative guard against powf landing just below an integer
            (v * (1.0 + 1e-12)).floor() as usize
        }
        ScheduleKind::Logarithmic { c } => (c * (k as f64).ln()).floor().max(0.0) as usize,
        ScheduleKind::Explicit { steps } => {
            let idx = (k - 1).min(steps.len() - 1);
            steps[idx]
        }
    }
}

impl ConsensusSchedule {
    /// Builds the schedule with the largest number of iterations that fit in
    /// `horizon` slots.
    pub fn build(kind: ScheduleKind, horizon: usize) -> Result<Self> {
        Self::build_with_policy(kind, horizon, MonotonicityPolicy::Reject)
    }

    pub fn build_with_policy(
        kind: ScheduleKind,
        horizon: usize,
        policy: MonotonicityPolicy,
    ) -> Result<Self> {
        if horizon < 3 {
            return Err(Error::InvalidArgument(format!(
                "horizon must be at least 3 slots, got {horizon}"
            )));
        }
        let mut warnings = Vec::new();
        match &kind {
            ScheduleKind::Constant { u } => {
                if !(*u > 0.0 && *u < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "constant schedule needs 0 < u < 1, got {u}"
                    )));
                }
            }
            ScheduleKind::Logarithmic { c } => {
                if !(*c > 1.0) || !c.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "logarithmic schedule needs c > 1, got {c}"
                    )));
                }
            }
            ScheduleKind::Explicit { steps } => {
                if steps.is_empty() {
                    return Err(Error::InvalidArgument("explicit schedule is empty".into()));
                }
                if let Some(k) = steps.windows(2).position(|w| w[1] < w[0]) {
                    let msg = format!(
                        "S(k) decreases at k = {} ({} -> {})",
                        k + 2,
                        steps[k],
                        steps[k + 1]
                    );
                    match policy {
                        MonotonicityPolicy::Reject => {
                            return Err(Error::InvalidArgument(format!(
                                "explicit schedule is not non-decreasing: {msg}"
                            )))
                        }
                        MonotonicityPolicy::Warn => warnings.push(msg),
                    }
                }
            }
        }

        let first = steps_for(&kind, horizon, 1);
        if horizon < first + 2 {
            return Err(Error::ScheduleInfeasible(format!(
                "horizon {horizon} cannot hold one iteration of {} slots",
                first + 2
            )));
        }

        let mut sample_times = Vec::new();
        let mut steps = Vec::new();
        let mut t = 1usize;
        let mut k = 1usize;
        loop {
            let s = steps_for(&kind, horizon, k);
            if t + s + 1 > horizon {
                break;
            }
            sample_times.push(t);
            steps.push(s);
            t += s + 2;
            k += 1;
        }

        Ok(Self {
            kind,
            horizon,
            sample_times,
            steps,
            warnings,
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of complete iterations `K = S_T`.
    pub fn iterations(&self) -> usize {
        self.sample_times.len()
    }

    /// Sample times `t_1 < … < t_K`.
    pub fn sample_times(&self) -> &[usize] {
        &self.sample_times
    }

    /// `S(1), …, S(K)`.
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `t_k` for 1-based `k`.
    pub fn sample_time(&self, k: usize) -> usize {
        self.sample_times[k - 1]
    }

    /// `S(k)` for 1-based `k`.
    pub fn consensus_steps(&self, k: usize) -> usize {
        self.steps[k - 1]
    }

    /// `t_{K+1} = t_K + S(K) + 2`, the slot at which the output of the last
    /// iteration becomes the played action. May equal `horizon + 1`.
    pub fn end_slot(&self) -> usize {
        let k = self.iterations();
        self.sample_time(k) + self.consensus_steps(k) + 2
    }

    /// `⌊t⌋`: the largest sample time not exceeding `t`.
    pub fn floor_time(&self, t: usize) -> Result<usize> {
        let first = self.sample_times[0];
        if t < first {
            return Err(Error::OutOfRange { t, first });
        }
        let idx = self.sample_times.partition_point(|&s| s <= t);
        Ok(self.sample_times[idx - 1])
    }

    /// Iteration `k` (1-based) whose span contains slot `t`. Slots past the
    /// last iteration map to `K`.
    pub fn iteration_of(&self, t: usize) -> Result<usize> {
        let first = self.sample_times[0];
        if t < first {
            return Err(Error::OutOfRange { t, first });
        }
        Ok(self.sample_times.partition_point(|&s| s <= t))
    }

    /// Role of slot `t` in the time-indexed algorithm.
    pub fn slot_kind(&self, t: usize) -> Result<UpdateKind> {
        let k = self.iteration_of(t)?;
        let tk = self.sample_time(k);
        let s = self.consensus_steps(k);
        Ok(if t == tk {
            UpdateKind::Gradient
        } else if t <= tk + s {
            UpdateKind::Consensus
        } else if t == tk + s + 1 {
            UpdateKind::Prox
        } else {
            UpdateKind::Idle
        })
    }

    /// `S_T`, `R_T` and `E_T` for contraction factor `gamma ∈ (0, 1)`.
    pub fn bound_components(&self, gamma: f64) -> Result<BoundComponents> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        Ok(self.bound_components_log(gamma.ln(), gamma))
    }

    /// Same as [`bound_components`](Self::bound_components) but with `ln γ`
    /// supplied directly, for `γ` that rounds to 1 in double precision.
    pub fn bound_components_log(&self, log_gamma: f64, gamma: f64) -> BoundComponents {
        let e_t = self
            .steps
            .iter()
            .enumerate()
            .map(|(i, &s)| (log_gamma * s as f64).exp() * (i + 1) as f64)
            .sum();
        BoundComponents {
            k_count: self.iterations(),
            r_t: *self
                .steps
                .last()
                .expect("schedule has at least one iteration"),
            e_t,
            gamma,
        }
    }

    /// Writes the `(k, t_k, S(k))` CSV block.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "t_k", "S_k"])?;
        for (i, (&t, &s)) in self.sample_times.iter().zip(&self.steps).enumerate() {
            wtr.write_record([(i + 1).to_string(), t.to_string(), s.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(s: usize, t: usize) -> ConsensusSchedule {
        ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![s] }, t).unwrap()
    }

    #[test]
    fn explicit_five_over_hundred_slots() {
        let sch = fixed(5, 100);
        let expected: Vec<usize> = (0..14).map(|k| 1 + 7 * k).collect();
        assert_eq!(sch.sample_times(), expected.as_slice());
        assert_eq!(sch.iterations(), 14);
        assert_eq!(*sch.sample_times().last().unwrap(), 92);
    }

    #[test]
    fn logarithmic_c2_t12() {
        let sch = ConsensusSchedule::build(ScheduleKind::Logarithmic { c: 2.0 }, 12).unwrap();
        assert_eq!(sch.steps(), &[0, 1, 2]);
        assert_eq!(sch.sample_times(), &[1, 3, 6]);
        assert_eq!(sch.iterations(), 3);
    }

    #[test]
    fn constant_sqrt_schedule() {
        let sch = ConsensusSchedule::build(ScheduleKind::Constant { u: 0.5 }, 10_000).unwrap();
        assert!(sch.steps().iter().all(|&s| s == 100));
        assert_eq!(sch.iterations(), 98);
        // K ≈ T / (T^u + 2)
        assert_eq!(sch.iterations(), 10_000 / 102);
    }

    #[test]
    fn infeasible_horizon() {
        let err = ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![5] }, 6);
        assert!(matches!(err, Err(Error::ScheduleInfeasible(_))));
        assert!(ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![5] }, 7).is_ok());
        assert!(matches!(
            ConsensusSchedule::build(ScheduleKind::Explicit { steps: vec![0] }, 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(ConsensusSchedule::build(ScheduleKind::Constant { u: 1.0 }, 100).is_err());
        assert!(ConsensusSchedule::build(ScheduleKind::Constant { u: 0.0 }, 100).is_err());
        assert!(ConsensusSchedule::build(ScheduleKind::Logarithmic { c: 1.0 }, 100).is_err());
    }

    #[test]
    fn decreasing_explicit_list() {
        let kind = ScheduleKind::Explicit {
            steps: vec![3, 2, 4],
        };
        assert!(ConsensusSchedule::build(kind.clone(), 100).is_err());
        let sch =
            ConsensusSchedule::build_with_policy(kind, 100, MonotonicityPolicy::Warn).unwrap();
        assert_eq!(sch.warnings().len(), 1);
        assert_eq!(&sch.steps()[..3], &[3, 2, 4]);
    }

    #[test]
    fn floor_time_examples() {
        let sch = fixed(5, 100);
        assert_eq!(sch.floor_time(9).unwrap(), 8);
        assert_eq!(sch.floor_time(14).unwrap(), 8);
        assert_eq!(sch.floor_time(15).unwrap(), 15);
        for &t in sch.sample_times() {
            assert_eq!(sch.floor_time(t).unwrap(), t);
        }
        assert!(matches!(sch.floor_time(0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn slot_kinds_cover_each_iteration() {
        let sch = fixed(2, 20);
        let kinds: Vec<_> = (1..=8).map(|t| sch.slot_kind(t).unwrap()).collect();
        use UpdateKind::*;
        assert_eq!(
            kinds,
            vec![Gradient, Consensus, Consensus, Prox, Gradient, Consensus, Consensus, Prox]
        );
        // 20 = 5 iterations of 4 slots, no idle tail
        assert_eq!(sch.iterations(), 5);
        assert_eq!(sch.end_slot(), 21);
        let sch = fixed(2, 22);
        assert_eq!(sch.slot_kind(21).unwrap(), Idle);
        assert_eq!(sch.slot_kind(22).unwrap(), Idle);
    }

    #[test]
    fn bound_components_examples() {
        let bc = fixed(5, 100).bound_components(0.5).unwrap();
        assert_eq!(bc.k_count, 14);
        assert_eq!(bc.r_t, 5);
        assert!((bc.e_t - 105.0 / 32.0).abs() < 1e-12);

        let sch = ConsensusSchedule::build(
            ScheduleKind::Explicit {
                steps: vec![1, 2, 3, 4, 5, 6],
            },
            4 * 2 + 1 + 2 + 3 + 4,
        )
        .unwrap();
        assert_eq!(sch.iterations(), 4);
        let bc = sch.bound_components(0.5).unwrap();
        assert!((bc.e_t - 1.625).abs() < 1e-12);
        assert_eq!(bc.r_t, 4);

        assert!(fixed(5, 100).bound_components(1.0).is_err());
        assert!(fixed(5, 100).bound_components(0.0).is_err());
    }

    #[test]
    fn constant_regime_bound_shape() {
        // E_T ≈ γ^{T^u} T^{2-2u} / 2 for the constant regime
        let t = 40_000usize;
        let u = 0.5;
        let gamma: f64 = 0.99;
        let sch = ConsensusSchedule::build(ScheduleKind::Constant { u }, t).unwrap();
        let bc = sch.bound_components(gamma).unwrap();
        assert_eq!(bc.r_t, 200);
        let k = bc.k_count as f64;
        let exact = gamma.powi(200) * k * (k + 1.0) / 2.0;
        assert!((bc.e_t - exact).abs() < 1e-9 * exact);
        let shape = gamma.powf((t as f64).powf(u)) * (t as f64).powf(2.0 - 2.0 * u);
        let ratio = bc.e_t / shape;
        assert!(ratio > 0.4 && ratio < 0.6, "ratio {ratio}");
    }

    #[test]
    fn csv_block() {
        let mut buf = Vec::new();
        fixed(5, 20).write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "k,t_k,S_k\n1,1,5\n2,8,5\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_kind() -> impl Strategy<Value = ScheduleKind> {
            prop_oneof![
                (0.05f64..0.95).prop_map(|u| ScheduleKind::Constant { u }),
                (1.01f64..6.0).prop_map(|c| ScheduleKind::Logarithmic { c }),
                proptest::collection::vec(0usize..8, 1..6).prop_map(|mut v| {
                    v.sort_unstable();
                    ScheduleKind::Explicit { steps: v }
                }),
            ]
        }

        proptest! {
            #[test]
            fn schedule_invariants(kind in any_kind(), horizon in 12usize..3000) {
                let sch = match ConsensusSchedule::build(kind.clone(), horizon) {
                    Ok(s) => s,
                    Err(Error::ScheduleInfeasible(_)) => return Ok(()),
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                };
                let t = sch.sample_times();
                let s = sch.steps();
                prop_assert_eq!(t[0], 1);
                for k in 0..t.len() - 1 {
                    prop_assert_eq!(t[k + 1] - t[k], s[k] + 2);
                    prop_assert!(s[k + 1] >= s[k]);
                }
                let used: usize = s.iter().map(|x| x + 2).sum();
                prop_assert!(used <= horizon);
                let next = steps_for(&kind, horizon, s.len() + 1);
                prop_assert!(used + next + 2 > horizon);
                for probe in [1usize, horizon / 3 + 1, horizon / 2 + 1, horizon] {
                    let f = sch.floor_time(probe).unwrap();
                    prop_assert!(f <= probe);
                    prop_assert_eq!(sch.floor_time(f).unwrap(), f);
                }
            }
        }
    }
}
