//! Week-by-week orchestration of the three policies.
//!
//! Weeks before TS starts allocate the whole cohort uniformly and every
//! policy learns from those observations. In transition weeks UR and TS
//! split the cohort, and TS† learns half from TS and half from UR. After
//! that all three policies allocate, and TS† learns half from itself and
//! half from UR.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::environment::{check_dimensions, draw_rewards, EnvironmentError};
use crate::model::{
    ArmId, BatchObservation, BetaParams, EnvironmentSchedule, ExperimentConfig, Phase, PolicyId,
    Schedule, ValidationReport, Week,
};
use crate::policies::{ts_allocate, ur_allocate, AllocationResult, PolicyError, PolicyState};
use crate::rng::{replication_seed, stream, Purpose};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ValidationReport),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("INCOMPLETE_LOG: missing week {week} policy {policy} arm {arm}")]
    IncompleteLog {
        week: u32,
        policy: PolicyId,
        arm: usize,
    },
    #[error("duplicate observation for week {week} policy {policy} arm {arm}")]
    DuplicateObservation {
        week: u32,
        policy: PolicyId,
        arm: usize,
    },
}

/// Everything observed in one week, ordered by policy then arm.
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyOutcome {
    week: Week,
    observations: Vec<BatchObservation>,
}

impl WeeklyOutcome {
    pub fn week(&self) -> Week {
        self.week
    }

    pub fn observations(&self) -> &[BatchObservation] {
        &self.observations
    }

    /// This week's observations for one policy (empty if it did not allocate).
    pub fn for_policy(&self, policy: PolicyId) -> &[BatchObservation] {
        let start = self.observations.partition_point(|o| o.policy() < policy);
        let end = self.observations.partition_point(|o| o.policy() <= policy);
        &self.observations[start..end]
    }

    pub fn assigned(&self) -> u64 {
        self.observations.iter().map(BatchObservation::assigned).sum()
    }
}

/// Posterior parameters of every policy at the end of a week.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSnapshot {
    pub week: Week,
    pub posteriors: [Vec<BetaParams>; 3],
}

impl PosteriorSnapshot {
    pub fn of(&self, policy: PolicyId) -> &[BetaParams] {
        &self.posteriors[policy.position()]
    }
}

/// Full record of one experiment run or replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTrace {
    schedule: Schedule,
    config: Option<ExperimentConfig>,
    weeks: Vec<WeeklyOutcome>,
    snapshots: Vec<PosteriorSnapshot>,
    finals: [PolicyState; 3],
}

impl ExperimentTrace {
    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// The configuration a simulated run used; `None` for replays.
    pub fn config(&self) -> Option<&ExperimentConfig> {
        self.config.as_ref()
    }

    pub fn weeks(&self) -> &[WeeklyOutcome] {
        &self.weeks
    }

    pub fn snapshots(&self) -> &[PosteriorSnapshot] {
        &self.snapshots
    }

    pub fn final_state(&self, policy: PolicyId) -> &PolicyState {
        &self.finals[policy.position()]
    }

    /// All observations in (week, policy, arm) order.
    pub fn observations(&self) -> Vec<BatchObservation> {
        self.weeks
            .iter()
            .flat_map(|w| w.observations.iter().copied())
            .collect()
    }

    /// Observations a policy's summaries are built from in `week`: the
    /// shared uniform batch before TS starts, TS's batch in transition
    /// weeks for TS†, and the policy's own batch otherwise.
    pub fn credited_in_week(&self, policy: PolicyId, week: Week) -> &[BatchObservation] {
        let outcome = &self.weeks[week.offset()];
        let source = match (self.schedule.phase(week), policy) {
            (Phase::Shared, _) => PolicyId::Ur,
            (Phase::Transition, PolicyId::TsDagger) => PolicyId::Ts,
            (_, p) => p,
        };
        outcome.for_policy(source)
    }

    /// Every observation credited to a policy across the run.
    pub fn credited(&self, policy: PolicyId) -> Vec<BatchObservation> {
        self.weeks
            .iter()
            .flat_map(|w| self.credited_in_week(policy, w.week).iter().copied())
            .collect()
    }
}

/// Largest-remainder rounding of `total` by `fractions`; ties go to the
/// lower index. The result sums to `total` exactly.
pub fn split_cohort(total: u64, fractions: &[f64]) -> Vec<u64> {
    let quotas: Vec<f64> = fractions.iter().map(|f| total as f64 * f).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut leftover = total.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// Students each active policy receives in `week`, in policy order.
pub fn cohort_shares(cfg: &ExperimentConfig, week: Week) -> Vec<(PolicyId, u64)> {
    let total = cfg.cohort_sizes()[week.offset()];
    let phase = cfg.schedule().phase(week);
    let sizes = match phase {
        Phase::Shared => vec![total],
        Phase::Transition => split_cohort(total, &cfg.transition_split()),
        Phase::Full => split_cohort(total, &cfg.split()),
    };
    phase.active_policies().iter().copied().zip(sizes).collect()
}

struct Runner {
    schedule: Schedule,
    states: [PolicyState; 3],
    weeks: Vec<WeeklyOutcome>,
    snapshots: Vec<PosteriorSnapshot>,
}

impl Runner {
    fn new(schedule: Schedule) -> Self {
        let state = |p: PolicyId| PolicyState::new(p, schedule.arms, schedule.intro_week(p));
        Runner {
            schedule,
            states: PolicyId::ALL.map(state),
            weeks: Vec::with_capacity(schedule.horizon as usize),
            snapshots: Vec::with_capacity(schedule.horizon as usize),
        }
    }

    fn state(&self, policy: PolicyId) -> &PolicyState {
        &self.states[policy.position()]
    }

    /// Applies one week of observations (sorted by policy then arm).
    fn apply_week(&mut self, week: Week, observations: Vec<BatchObservation>) -> Result<(), EngineError> {
        let outcome = WeeklyOutcome { week, observations };
        let ur = outcome.for_policy(PolicyId::Ur);
        let ts = outcome.for_policy(PolicyId::Ts);
        let own = outcome.for_policy(PolicyId::TsDagger);
        let [s_ur, s_ts, s_dag] = &self.states;
        let next = match self.schedule.phase(week) {
            Phase::Shared => [
                s_ur.ur_update(ur)?,
                s_ts.burn_in_update(ur)?,
                s_dag.burn_in_update(ur)?,
            ],
            Phase::Transition => [
                s_ur.ur_update(ur)?,
                s_ts.ts_update(ts)?,
                s_dag.ts_dagger_update(Some(ts), ur, None)?,
            ],
            Phase::Full => [
                s_ur.ur_update(ur)?,
                s_ts.ts_update(ts)?,
                s_dag.ts_dagger_update(None, ur, Some(own))?,
            ],
        };
        self.states = next;
        self.snapshots.push(PosteriorSnapshot {
            week,
            posteriors: PolicyId::ALL.map(|p| self.state(p).posteriors().to_vec()),
        });
        self.weeks.push(outcome);
        Ok(())
    }

    fn finish(self, config: Option<ExperimentConfig>) -> ExperimentTrace {
        ExperimentTrace {
            schedule: self.schedule,
            config,
            weeks: self.weeks,
            snapshots: self.snapshots,
            finals: self.states,
        }
    }
}

/// Runs the experiment under the configuration's own seed.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    env: &EnvironmentSchedule,
) -> Result<ExperimentTrace, EngineError> {
    run_replication(cfg, env, 0)
}

/// Runs replication `index`; replication 0 is [`run_experiment`].
pub fn run_replication(
    cfg: &ExperimentConfig,
    env: &EnvironmentSchedule,
    index: u64,
) -> Result<ExperimentTrace, EngineError> {
    check_dimensions(env, cfg.arms(), cfg.horizon())?;
    let seed = replication_seed(cfg.seed(), index);
    let schedule = cfg.schedule();
    let mut runner = Runner::new(schedule);
    for week in schedule.weeks() {
        let means = env.means(week);
        let mut observations = Vec::with_capacity(schedule.arms * 3);
        for (policy, size) in cohort_shares(cfg, week) {
            let mut alloc_rng = stream(seed, week, policy, Purpose::Allocate);
            let alloc: AllocationResult = match policy {
                PolicyId::Ur => ur_allocate(size, schedule.arms, &mut alloc_rng),
                _ => ts_allocate(runner.state(policy).posteriors(), size, &mut alloc_rng),
            };
            let rewards = draw_rewards(&alloc, means, &mut stream(seed, week, policy, Purpose::Reward));
            for (k, (&n, &r)) in alloc.counts.iter().zip(&rewards).enumerate() {
                observations.push(
                    BatchObservation::new(week, policy, ArmId::new(k), n, r)
                        .expect("draw_rewards never exceeds the allocation"),
                );
            }
        }
        runner.apply_week(week, observations)?;
    }
    Ok(runner.finish(Some(cfg.clone())))
}

/// Rebuilds a trace from recorded observations without sampling.
///
/// The week layout is inferred from the log: the arm count and horizon
/// from the largest arm and week, TS's start from the first week TS (or
/// TS†) appears, TS†'s start from its first week. Every active
/// (week, policy, arm) cell must be present exactly once.
pub fn replay(log: &[BatchObservation]) -> Result<ExperimentTrace, EngineError> {
    let arms = log.iter().map(|o| o.arm().one_based()).max().unwrap_or(0);
    let horizon = log.iter().map(|o| o.week().get()).max().unwrap_or(0);
    let first_week = |policy: PolicyId| {
        log.iter()
            .filter(|o| o.policy() == policy)
            .map(|o| o.week().get())
            .min()
            .unwrap_or(horizon + 1)
    };
    let ts_dagger_intro_week = first_week(PolicyId::TsDagger);
    let ts_intro_week = first_week(PolicyId::Ts).min(ts_dagger_intro_week);
    let schedule = Schedule {
        arms,
        horizon,
        ts_intro_week,
        ts_dagger_intro_week,
    };

    let mut cells: BTreeMap<(Week, PolicyId, ArmId), BatchObservation> = BTreeMap::new();
    for obs in log {
        if cells.insert(obs.key(), *obs).is_some() {
            return Err(EngineError::DuplicateObservation {
                week: obs.week().get(),
                policy: obs.policy(),
                arm: obs.arm().one_based(),
            });
        }
    }

    let mut runner = Runner::new(schedule);
    for week in schedule.weeks() {
        let mut observations = Vec::with_capacity(arms * 3);
        for &policy in schedule.phase(week).active_policies() {
            for k in 0..arms {
                let obs = cells.remove(&(week, policy, ArmId::new(k))).ok_or(
                    EngineError::IncompleteLog {
                        week: week.get(),
                        policy,
                        arm: k + 1,
                    },
                )?;
                observations.push(obs);
            }
        }
        runner.apply_week(week, observations)?;
    }
    // Anything left is a policy reporting in a week it could not allocate.
    if let Some(obs) = cells.values().next() {
        return Err(EngineError::Policy(PolicyError::PolicyNotActive {
            policy: obs.policy(),
            active_from: schedule.intro_week(obs.policy()),
            week: obs.week().get(),
        }));
    }
    Ok(runner.finish(None))
}
