//! Allocation and posterior-update rules for the uniform, Thompson Sampling
//! and hybrid (TS†) policies.
//!
//! All updates happen once per week from that week's batch. Update
//! functions are pure: they return a new [`PolicyState`] and leave the
//! input untouched.

use rand::Rng;
use thiserror::Error;

use crate::model::{ArmId, BatchObservation, BetaParams, PolicyId};
use crate::sampling::beta_sample;

/// Weight given to each half of the hybrid policy's evidence.
pub const HALF_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("REWARD_EXCEEDS_ASSIGNED: arm {arm} week {week} has {opened} opened of {assigned}")]
    RewardExceedsAssigned {
        week: u32,
        arm: usize,
        assigned: u64,
        opened: u64,
    },
    #[error("POLICY_NOT_ACTIVE: {policy} does not allocate before week {active_from} (got week {week})")]
    PolicyNotActive {
        policy: PolicyId,
        active_from: u32,
        week: u32,
    },
    #[error("{policy} allocates from week {active_from}; shared uniform updates end there (got week {week})")]
    BurnInOver {
        policy: PolicyId,
        active_from: u32,
        week: u32,
    },
    #[error("MISSING_SOURCE: {0}")]
    MissingSource(&'static str),
    #[error("expected {expected} observations, got {got}")]
    WrongPolicy { expected: PolicyId, got: PolicyId },
    #[error("update for {expected} state applied to a {got} state")]
    WrongState { expected: PolicyId, got: PolicyId },
    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("mixed weeks in one batch: {0} and {1}")]
    MixedWeeks(u32, u32),
}

/// Students per arm for one policy in one week.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationResult {
    pub counts: Vec<u64>,
}

impl AllocationResult {
    pub fn zeros(arms: usize) -> Self {
        AllocationResult {
            counts: vec![0; arms],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Assigns each student independently and uniformly to one of `arms` arms.
pub fn ur_allocate<R: Rng + ?Sized>(batch_size: u64, arms: usize, rng: &mut R) -> AllocationResult {
    assert!(arms >= 1, "need at least one arm");
    let mut out = AllocationResult::zeros(arms);
    let arms = u32::try_from(arms).expect("arm count fits in u32");
    for _ in 0..batch_size {
        out.counts[rng.random_range(0..arms) as usize] += 1;
    }
    out
}

/// Thompson Sampling allocation with a fresh posterior draw per student:
/// each student goes to the arm with the largest sampled mean. Ties (a
/// probability-zero event) go to the lowest arm index.
pub fn ts_allocate<R: Rng + ?Sized>(
    posteriors: &[BetaParams],
    batch_size: u64,
    rng: &mut R,
) -> AllocationResult {
    let mut out = AllocationResult::zeros(posteriors.len());
    if posteriors.is_empty() {
        return out;
    }
    for _ in 0..batch_size {
        let mut best = 0;
        let mut best_draw = f64::NEG_INFINITY;
        for (k, params) in posteriors.iter().enumerate() {
            let draw = beta_sample(*params, rng);
            if draw > best_draw {
                best = k;
                best_draw = draw;
            }
        }
        out.counts[best] += 1;
    }
    out
}

/// One observation absorbed into a posterior, with the weight it received.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub observation: BatchObservation,
    pub weight: f64,
}

/// Posterior and update history of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    policy: PolicyId,
    active_from: u32,
    posteriors: Vec<BetaParams>,
    history: Vec<Contribution>,
}

impl PolicyState {
    /// Fresh Beta(1, 1) state for a policy that first allocates in week
    /// `active_from`.
    pub fn new(policy: PolicyId, arms: usize, active_from: u32) -> Self {
        PolicyState {
            policy,
            active_from,
            posteriors: vec![BetaParams::UNIFORM; arms],
            history: Vec::new(),
        }
    }

    pub fn policy(&self) -> PolicyId {
        self.policy
    }

    pub fn active_from(&self) -> u32 {
        self.active_from
    }

    pub fn posteriors(&self) -> &[BetaParams] {
        &self.posteriors
    }

    pub fn history(&self) -> &[Contribution] {
        &self.history
    }

    /// Weighted number of students absorbed for `arm`; equals
    /// `alpha + beta - 2` for that arm.
    pub fn weighted_assigned(&self, arm: ArmId) -> f64 {
        self.history
            .iter()
            .filter(|c| c.observation.arm() == arm)
            .map(|c| c.weight * c.observation.assigned() as f64)
            .sum()
    }

    /// Weighted number of successes absorbed for `arm`; equals `alpha - 1`.
    pub fn weighted_opened(&self, arm: ArmId) -> f64 {
        self.history
            .iter()
            .filter(|c| c.observation.arm() == arm)
            .map(|c| c.weight * c.observation.opened() as f64)
            .sum()
    }

    fn check_batch(&self, batch: &[BatchObservation], expected: PolicyId) -> Result<(), PolicyError> {
        let mut week = None;
        for obs in batch {
            if obs.policy() != expected {
                return Err(PolicyError::WrongPolicy {
                    expected,
                    got: obs.policy(),
                });
            }
            if obs.arm().index() >= self.posteriors.len() {
                return Err(PolicyError::ArmOutOfRange {
                    arm: obs.arm().one_based(),
                    arms: self.posteriors.len(),
                });
            }
            if obs.opened() > obs.assigned() {
                return Err(PolicyError::RewardExceedsAssigned {
                    week: obs.week().get(),
                    arm: obs.arm().one_based(),
                    assigned: obs.assigned(),
                    opened: obs.opened(),
                });
            }
            match week {
                None => week = Some(obs.week().get()),
                Some(w) if w != obs.week().get() => {
                    return Err(PolicyError::MixedWeeks(w, obs.week().get()))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    fn expect_state(&self, expected: PolicyId) -> Result<(), PolicyError> {
        if self.policy == expected {
            Ok(())
        } else {
            Err(PolicyError::WrongState {
                expected,
                got: self.policy,
            })
        }
    }

    fn absorb(&mut self, batch: &[BatchObservation], weight: f64) {
        for obs in batch {
            let slot = &mut self.posteriors[obs.arm().index()];
            *slot = slot.add_weighted(obs.opened(), obs.failures(), weight);
            self.history.push(Contribution {
                observation: *obs,
                weight,
            });
        }
    }

    /// Uniform-policy update: alpha += r, beta += n - r per arm.
    pub fn ur_update(&self, batch: &[BatchObservation]) -> Result<Self, PolicyError> {
        self.expect_state(PolicyId::Ur)?;
        self.check_batch(batch, PolicyId::Ur)?;
        let mut next = self.clone();
        next.absorb(batch, 1.0);
        Ok(next)
    }

    /// Shared update before a policy starts allocating: the uniform
    /// observations enter its posterior at full weight.
    pub fn burn_in_update(&self, ur_batch: &[BatchObservation]) -> Result<Self, PolicyError> {
        self.check_batch(ur_batch, PolicyId::Ur)?;
        if self.policy != PolicyId::Ur {
            if let Some(obs) = ur_batch.iter().find(|o| o.week().get() >= self.active_from) {
                return Err(PolicyError::BurnInOver {
                    policy: self.policy,
                    active_from: self.active_from,
                    week: obs.week().get(),
                });
            }
        }
        let mut next = self.clone();
        next.absorb(ur_batch, 1.0);
        Ok(next)
    }

    /// Thompson Sampling update from its own batch.
    pub fn ts_update(&self, batch: &[BatchObservation]) -> Result<Self, PolicyError> {
        self.expect_state(PolicyId::Ts)?;
        self.check_batch(batch, PolicyId::Ts)?;
        if let Some(obs) = batch.iter().find(|o| o.week().get() < self.active_from) {
            return Err(PolicyError::PolicyNotActive {
                policy: PolicyId::Ts,
                active_from: self.active_from,
                week: obs.week().get(),
            });
        }
        let mut next = self.clone();
        next.absorb(batch, 1.0);
        Ok(next)
    }

    /// Hybrid update. Before TS† allocates (`own` absent) it absorbs half of
    /// TS's batch and half of UR's; from then on half of its own batch and
    /// half of UR's, ignoring `ts`.
    pub fn ts_dagger_update(
        &self,
        ts: Option<&[BatchObservation]>,
        ur: &[BatchObservation],
        own: Option<&[BatchObservation]>,
    ) -> Result<Self, PolicyError> {
        self.expect_state(PolicyId::TsDagger)?;
        self.check_batch(ur, PolicyId::Ur)?;
        let source = match own {
            Some(own) => {
                self.check_batch(own, PolicyId::TsDagger)?;
                if let Some(obs) = own.iter().find(|o| o.week().get() < self.active_from) {
                    return Err(PolicyError::PolicyNotActive {
                        policy: PolicyId::TsDagger,
                        active_from: self.active_from,
                        week: obs.week().get(),
                    });
                }
                own
            }
            None => {
                let ts = ts.ok_or(PolicyError::MissingSource(
                    "TS observations are required before TS\u{2020} allocates",
                ))?;
                self.check_batch(ts, PolicyId::Ts)?;
                if ts.iter().any(|o| o.week().get() >= self.active_from) {
                    return Err(PolicyError::MissingSource(
                        "TS\u{2020} is allocating; its own observations are required",
                    ));
                }
                ts
            }
        };
        let mut next = self.clone();
        next.absorb(source, HALF_WEIGHT);
        next.absorb(ur, HALF_WEIGHT);
        Ok(next)
    }
}
