#![allow(dead_code)]

use batched_bandit::environment::{make_schedule, ScheduleSpec};
use batched_bandit::model::EnvironmentSchedule;
use batched_bandit::{validate_config, ConfigDraft, ExperimentConfig, ExperimentTrace, PolicyId};
use proptest::prelude::*;

pub const EXAMPLE_CFG: &str = include_str!("../../data/paper.cfg");
pub const SUMMARY_CSV: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/final_summary.csv");

fn normalized<const N: usize>(weights: [u32; N]) -> [f64; N] {
    let total: u32 = weights.iter().sum();
    weights.map(|w| f64::from(w) / f64::from(total))
}

fn weights<const N: usize>() -> impl Strategy<Value = [u32; N]> {
    proptest::array::uniform::<_, N>(0u32..=10).prop_filter("not all zero", |w| w.iter().any(|&x| x > 0))
}

/// Small valid configs with their stationary or piecewise environment.
pub fn arb_experiment() -> impl Strategy<Value = (ExperimentConfig, EnvironmentSchedule)> {
    (2usize..=4, 1u32..=9)
        .prop_flat_map(|(arms, horizon)| {
            (
                Just(arms),
                Just(horizon),
                (1..=horizon).prop_flat_map(move |burn_in| {
                    (burn_in + 1..=horizon + 1).prop_flat_map(move |ts| {
                        (Just(burn_in), Just(ts), ts..=horizon + 1)
                    })
                }),
                proptest::collection::vec(1u64..=150, horizon as usize),
                weights::<3>(),
                weights::<2>(),
                any::<u64>(),
                proptest::collection::vec(
                    proptest::collection::vec(0.0f64..=1.0, arms),
                    horizon as usize,
                ),
            )
        })
        .prop_map(|(arms, horizon, (burn_in, ts, tsd), cohort, split, transition, seed, rows)| {
            let cfg = validate_config(ConfigDraft {
                arms,
                horizon,
                burn_in,
                ts_intro_week: ts,
                ts_dagger_intro_week: tsd,
                cohort_sizes: cohort,
                split: normalized(split),
                transition_split: normalized(transition),
                seed,
            })
            .expect("generator only builds valid configs");
            let env = make_schedule(ScheduleSpec::Piecewise { rows }).unwrap();
            (cfg, env)
        })
}

pub fn stationary(means: &[f64], horizon: u32) -> EnvironmentSchedule {
    make_schedule(ScheduleSpec::Stationary {
        means: means.to_vec(),
        horizon,
    })
    .unwrap()
}

pub fn deployment_config() -> ExperimentConfig {
    validate_config(ConfigDraft::deployment_defaults()).unwrap()
}

/// Weighted (assigned, opened) each policy should have absorbed per arm by
/// the end of `week`, computed from the raw observations and the config's
/// introduction weeks alone.
pub fn expected_weighted_counts(
    trace: &ExperimentTrace,
    cfg: &ExperimentConfig,
    policy: PolicyId,
    week: u32,
) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); cfg.arms()];
    for o in trace.observations() {
        let t = o.week().get();
        if t > week {
            continue;
        }
        let weight = match (policy, o.policy()) {
            (PolicyId::Ur, PolicyId::Ur) => 1.0,
            (PolicyId::Ts, PolicyId::Ur) if t < cfg.ts_intro_week() => 1.0,
            (PolicyId::Ts, PolicyId::Ts) => 1.0,
            (PolicyId::TsDagger, PolicyId::Ur) if t < cfg.ts_intro_week() => 1.0,
            (PolicyId::TsDagger, PolicyId::Ur) => 0.5,
            (PolicyId::TsDagger, PolicyId::Ts) if t < cfg.ts_dagger_intro_week() => 0.5,
            (PolicyId::TsDagger, PolicyId::TsDagger) => 0.5,
            _ => 0.0,
        };
        let slot = &mut out[o.arm().index()];
        slot.0 += weight * o.assigned() as f64;
        slot.1 += weight * o.opened() as f64;
    }
    out
}

/// Largest deviation between snapshot pseudo-counts and the oracle over
/// every week, policy and arm.
pub fn conservation_error(trace: &ExperimentTrace, cfg: &ExperimentConfig) -> f64 {
    let mut worst: f64 = 0.0;
    for snap in trace.snapshots() {
        for policy in PolicyId::ALL {
            let expected = expected_weighted_counts(trace, cfg, policy, snap.week.get());
            for (p, (n, r)) in snap.of(policy).iter().zip(expected) {
                worst = worst
                    .max(((p.alpha() - 1.0) + (p.beta() - 1.0) - n).abs())
                    .max((p.alpha() - 1.0 - r).abs());
            }
        }
    }
    worst
}
