//! Monte Carlo replications of whole experiments.
//!
//! Each replication draws from its own seed derived from the master seed
//! and its index, so results do not depend on how work is scheduled. With
//! the `parallel` feature replications run on a rayon pool; without it
//! they run in a plain loop.

use crate::analysis::{
    allocation_concentration, expected_regret, pairwise_wald, summarize_trace, ArmSummary,
    WaldResult, DEFAULT_ALPHA,
};
use crate::engine::{run_replication, EngineError, ExperimentTrace};
use crate::model::{ArmId, EnvironmentSchedule, ExperimentConfig, PolicyId};

/// Final metrics of one policy in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub policy: PolicyId,
    /// Cumulative summaries over the policy's credited observations.
    pub summaries: Vec<ArmSummary>,
    /// Students the policy itself assigned, per arm.
    pub own_assigned: Vec<u64>,
    /// Share of the policy's own assignments per arm; zeros if it never
    /// allocated.
    pub own_shares: Vec<f64>,
    pub concentration_index: Option<f64>,
    pub regret: f64,
    /// Pairwise tests, Bonferroni-adjusted over the arm pairs; `None` when
    /// some arm had no observations.
    pub wald: Option<Vec<WaldResult>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub index: u64,
    pub policies: [PolicyOutcome; 3],
}

impl ReplicationOutcome {
    pub fn policy(&self, policy: PolicyId) -> &PolicyOutcome {
        &self.policies[policy.position()]
    }
}

/// Reduces a trace to its per-policy metrics.
pub fn evaluate(trace: &ExperimentTrace, env: &EnvironmentSchedule, index: u64) -> ReplicationOutcome {
    let arms = trace.schedule().arms;
    let policies = PolicyId::ALL.map(|policy| {
        let summaries = summarize_trace(trace, policy);
        let concentration = allocation_concentration(trace, policy);
        let own_assigned: Vec<u64> = (0..arms)
            .map(|k| {
                trace
                    .weeks()
                    .iter()
                    .flat_map(|w| w.for_policy(policy))
                    .filter(|o| o.arm() == ArmId::new(k))
                    .map(|o| o.assigned())
                    .sum()
            })
            .collect();
        PolicyOutcome {
            policy,
            wald: pairwise_wald(&summaries, DEFAULT_ALPHA).ok(),
            summaries,
            own_shares: concentration
                .as_ref()
                .map_or_else(|| vec![0.0; arms], |c| c.cumulative.clone()),
            concentration_index: concentration.map(|c| c.index),
            own_assigned,
            regret: expected_regret(trace, env, policy),
        }
    });
    ReplicationOutcome { index, policies }
}

fn run_one(
    cfg: &ExperimentConfig,
    env: &EnvironmentSchedule,
    index: u64,
) -> Result<ReplicationOutcome, EngineError> {
    let trace = run_replication(cfg, env, index)?;
    Ok(evaluate(&trace, env, index))
}

/// Runs replications `0..count` one after another.
pub fn run_replications_sequential(
    cfg: &ExperimentConfig,
    env: &EnvironmentSchedule,
    count: u64,
) -> Result<Vec<ReplicationOutcome>, EngineError> {
    (0..count).map(|i| run_one(cfg, env, i)).collect()
}

/// Runs replications `0..count` on `workers` threads (`None` for one per
/// core). Output is in replication order regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn run_replications(
    cfg: &ExperimentConfig,
    env: &EnvironmentSchedule,
    count: u64,
    workers: Option<usize>,
) -> Result<Vec<ReplicationOutcome>, EngineError> {
    use rayon::prelude::*;

    if workers == Some(1) {
        return run_replications_sequential(cfg, env, count);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build();
    match pool {
        Ok(pool) => pool.install(|| {
            (0..count)
                .into_par_iter()
                .map(|i| run_one(cfg, env, i))
                .collect()
        }),
        // no threads available; fall back to the caller's thread
        Err(_) => run_replications_sequential(cfg, env, count),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn run_replications(
    cfg: &ExperimentConfig,
    env: &EnvironmentSchedule,
    count: u64,
    _workers: Option<usize>,
) -> Result<Vec<ReplicationOutcome>, EngineError> {
    run_replications_sequential(cfg, env, count)
}

/// Order statistics of one metric across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub median: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Some(Quantiles {
            median: at(0.5),
            q05: at(0.05),
            q25: at(0.25),
            q75: at(0.75),
            q95: at(0.95),
        })
    }
}

/// Rejection rates of one arm pair across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRates {
    pub pair: (ArmId, ArmId),
    pub unadjusted: f64,
    pub bonferroni: f64,
    /// Replications where the test was defined.
    pub tested: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAggregate {
    pub policy: PolicyId,
    pub own_share: Vec<Option<Quantiles>>,
    pub mean: Vec<Option<Quantiles>>,
    pub concentration_index: Option<Quantiles>,
    pub regret: Option<Quantiles>,
    pub tests: Vec<PairRates>,
}

/// Distributional summary of a set of replications.
pub fn aggregate(outcomes: &[ReplicationOutcome], arms: usize) -> Vec<PolicyAggregate> {
    PolicyId::ALL
        .iter()
        .map(|&policy| {
            let rows: Vec<&PolicyOutcome> = outcomes.iter().map(|o| o.policy(policy)).collect();
            let allocated: Vec<&&PolicyOutcome> = rows
                .iter()
                .filter(|r| r.concentration_index.is_some())
                .collect();
            let own_share = (0..arms)
                .map(|k| Quantiles::of(&allocated.iter().map(|r| r.own_shares[k]).collect::<Vec<_>>()))
                .collect();
            let mean = (0..arms)
                .map(|k| {
                    Quantiles::of(
                        &rows
                            .iter()
                            .filter_map(|r| r.summaries[k].mean())
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            let concentration_index = Quantiles::of(
                &rows
                    .iter()
                    .filter_map(|r| r.concentration_index)
                    .collect::<Vec<_>>(),
            );
            let regret = Quantiles::of(
                &allocated.iter().map(|r| r.regret).collect::<Vec<_>>(),
            );
            let tested: Vec<&Vec<WaldResult>> = rows.iter().filter_map(|r| r.wald.as_ref()).collect();
            let tests = crate::analysis::arm_pairs(arms)
                .into_iter()
                .enumerate()
                .map(|(i, pair)| {
                    let n = tested.len();
                    let rate = |hit: &dyn Fn(&WaldResult) -> bool| {
                        if n == 0 {
                            0.0
                        } else {
                            tested.iter().filter(|w| hit(&w[i])).count() as f64 / n as f64
                        }
                    };
                    PairRates {
                        pair,
                        unadjusted: rate(&|w| w.p_value < DEFAULT_ALPHA),
                        bonferroni: rate(&|w| w.significant),
                        tested: n,
                    }
                })
                .collect();
            PolicyAggregate {
                policy,
                own_share,
                mean,
                concentration_index,
                regret,
                tests,
            }
        })
        .collect()
}
