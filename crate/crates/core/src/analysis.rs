//! Cumulative arm summaries, pairwise Wald z-tests with Bonferroni
//! correction, confidence intervals and allocation concentration.

use thiserror::Error;

use crate::engine::ExperimentTrace;
use crate::model::{ArmId, BatchObservation, EnvironmentSchedule, PolicyId, Week};
use crate::normal::{erfc, normal_quantile};

/// Family-wise level used when no correction is applied.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("UNDEFINED_SUMMARY: {policy} arm {arm} has no observations")]
    UndefinedSummary { policy: PolicyId, arm: usize },
    #[error("mean {0} is outside [0, 1]")]
    MeanOutOfRange(f64),
}

/// Cumulative open rate of one arm under one policy.
///
/// The standard error is always the binomial one,
/// `sqrt(mean * (1 - mean) / n)`. Arms with no observations have neither.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSummary {
    policy: PolicyId,
    arm: ArmId,
    mean: Option<f64>,
    n_total: u64,
}

impl ArmSummary {
    pub fn from_counts(policy: PolicyId, arm: ArmId, opened: u64, assigned: u64) -> Self {
        let mean = (assigned > 0).then(|| opened as f64 / assigned as f64);
        ArmSummary {
            policy,
            arm,
            mean,
            n_total: assigned,
        }
    }

    /// Summary from a reported mean (a proportion) and sample size.
    pub fn from_mean(
        policy: PolicyId,
        arm: ArmId,
        mean: f64,
        n_total: u64,
    ) -> Result<Self, AnalysisError> {
        if !(0.0..=1.0).contains(&mean) {
            return Err(AnalysisError::MeanOutOfRange(mean));
        }
        Ok(ArmSummary {
            policy,
            arm,
            mean: (n_total > 0).then_some(mean),
            n_total,
        })
    }

    pub fn policy(&self) -> PolicyId {
        self.policy
    }

    pub fn arm(&self) -> ArmId {
        self.arm
    }

    pub fn mean(&self) -> Option<f64> {
        self.mean
    }

    pub fn se(&self) -> Option<f64> {
        self.mean
            .map(|m| (m * (1.0 - m) / self.n_total as f64).sqrt())
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    fn defined(&self) -> Result<(f64, f64), AnalysisError> {
        match (self.mean, self.se()) {
            (Some(m), Some(se)) => Ok((m, se)),
            _ => Err(AnalysisError::UndefinedSummary {
                policy: self.policy,
                arm: self.arm.one_based(),
            }),
        }
    }
}

/// Pools a policy's credited history into one summary per arm.
pub fn summarize(policy: PolicyId, arms: usize, history: &[BatchObservation]) -> Vec<ArmSummary> {
    let mut opened = vec![0u64; arms];
    let mut assigned = vec![0u64; arms];
    for obs in history {
        let k = obs.arm().index();
        opened[k] += obs.opened();
        assigned[k] += obs.assigned();
    }
    (0..arms)
        .map(|k| ArmSummary::from_counts(policy, ArmId::new(k), opened[k], assigned[k]))
        .collect()
}

/// Final cumulative summaries of a traced policy.
pub fn summarize_trace(trace: &ExperimentTrace, policy: PolicyId) -> Vec<ArmSummary> {
    summarize(policy, trace.schedule().arms, &trace.credited(policy))
}

/// Two-sided Wald z-test between two arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldResult {
    pub policy: PolicyId,
    pub pair: (ArmId, ArmId),
    pub statistic: f64,
    pub p_value: f64,
    pub adjusted_threshold: f64,
    pub significant: bool,
}

impl WaldResult {
    fn with_threshold(mut self, threshold: f64) -> Self {
        self.adjusted_threshold = threshold;
        self.significant = self.p_value < threshold;
        self
    }
}

/// |mean_a - mean_b| / sqrt(se_a^2 + se_b^2) with unpooled standard errors;
/// p = 2 (1 - Phi(z)). The threshold is the unadjusted [`DEFAULT_ALPHA`].
pub fn wald_test(a: &ArmSummary, b: &ArmSummary) -> Result<WaldResult, AnalysisError> {
    let (ma, sa) = a.defined()?;
    let (mb, sb) = b.defined()?;
    let diff = (ma - mb).abs();
    let spread = (sa * sa + sb * sb).sqrt();
    let statistic = if diff == 0.0 {
        0.0
    } else if spread == 0.0 {
        f64::INFINITY
    } else {
        diff / spread
    };
    let p_value = erfc(statistic / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(WaldResult {
        policy: a.policy,
        pair: (a.arm, b.arm),
        statistic,
        p_value,
        adjusted_threshold: DEFAULT_ALPHA,
        significant: false,
    }
    .with_threshold(DEFAULT_ALPHA))
}

/// Sets every threshold to `family_alpha / m` and recomputes significance.
pub fn bonferroni(results: &[WaldResult], family_alpha: f64) -> Vec<WaldResult> {
    let threshold = family_alpha / results.len().max(1) as f64;
    results.iter().map(|r| r.with_threshold(threshold)).collect()
}

/// Unordered arm pairs in cyclic order: (1,2), (2,3), ..., (K,1), then
/// gap-2 pairs, and so on. For three arms this is 1v2, 2v3, 3v1.
pub fn arm_pairs(arms: usize) -> Vec<(ArmId, ArmId)> {
    let mut pairs = Vec::new();
    for gap in 1..=arms / 2 {
        let starts = if 2 * gap == arms { arms / 2 } else { arms };
        for i in 0..starts {
            pairs.push((ArmId::new(i), ArmId::new((i + gap) % arms)));
        }
    }
    pairs
}

/// Wald tests for every arm pair of one policy, Bonferroni-adjusted over
/// the family of pairs.
pub fn pairwise_wald(
    summaries: &[ArmSummary],
    family_alpha: f64,
) -> Result<Vec<WaldResult>, AnalysisError> {
    let raw = arm_pairs(summaries.len())
        .into_iter()
        .map(|(a, b)| wald_test(&summaries[a.index()], &summaries[b.index()]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(bonferroni(&raw, family_alpha))
}

/// mean ± z se with z = Phi^-1((1 + level) / 2), clamped to [0, 1].
pub fn confidence_interval(s: &ArmSummary, level: f64) -> Result<(f64, f64), AnalysisError> {
    let (mean, se) = s.defined()?;
    let z = normal_quantile((1.0 + level) / 2.0);
    Ok(((mean - z * se).max(0.0), (mean + z * se).min(1.0)))
}

/// Fraction of `counts` in each slot; all zeros when the total is zero.
pub fn shares(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// How strongly a policy's own allocations piled onto one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    /// Per-arm allocation proportions in each week the policy allocated.
    pub weekly: Vec<(Week, Vec<f64>)>,
    /// Per-arm share of everything the policy allocated.
    pub cumulative: Vec<f64>,
    /// Largest cumulative share.
    pub index: f64,
}

/// Allocation proportions of a policy's own assignments; weeks where it
/// allocated nothing are skipped. `None` if it never allocated.
pub fn allocation_concentration(trace: &ExperimentTrace, policy: PolicyId) -> Option<Concentration> {
    let arms = trace.schedule().arms;
    let mut totals = vec![0u64; arms];
    let mut weekly = Vec::new();
    for outcome in trace.weeks() {
        let own = outcome.for_policy(policy);
        let counts: Vec<u64> = (0..arms)
            .map(|k| {
                own.iter()
                    .filter(|o| o.arm().index() == k)
                    .map(BatchObservation::assigned)
                    .sum()
            })
            .collect();
        if counts.iter().sum::<u64>() == 0 {
            continue;
        }
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
        weekly.push((outcome.week(), shares(&counts)));
    }
    if weekly.is_empty() {
        return None;
    }
    let cumulative = shares(&totals);
    let index = cumulative.iter().copied().fold(0.0, f64::max);
    Some(Concentration {
        weekly,
        cumulative,
        index,
    })
}

/// Expected regret of a policy's own allocations: students times the gap
/// between the week's best true mean and the assigned arm's.
pub fn expected_regret(trace: &ExperimentTrace, env: &EnvironmentSchedule, policy: PolicyId) -> f64 {
    trace
        .weeks()
        .iter()
        .map(|outcome| {
            let means = env.means(outcome.week());
            let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            outcome
                .for_policy(policy)
                .iter()
                .map(|o| o.assigned() as f64 * (best - means[o.arm().index()]))
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(k: usize) -> ArmId {
        ArmId::new(k)
    }

    fn reported(mean_pct: f64, n: u64, k: usize) -> ArmSummary {
        ArmSummary::from_mean(PolicyId::Ur, arm(k), mean_pct / 100.0, n).unwrap()
    }

    #[test]
    fn binomial_standard_error() {
        let s = reported(60.61, 3130, 0);
        assert!((s.se().unwrap() * 100.0 - 0.87).abs() < 0.005);
        let one = ArmSummary::from_counts(PolicyId::Ur, arm(0), 1, 1);
        assert_eq!(one.mean(), Some(1.0));
        assert_eq!(one.se(), Some(0.0));
        let half = ArmSummary::from_counts(PolicyId::Ur, arm(0), 100, 200);
        assert!((half.se().unwrap() - (0.25f64 / 200.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_arm_is_undefined() {
        let empty = ArmSummary::from_counts(PolicyId::Ts, arm(2), 0, 0);
        assert_eq!(empty.mean(), None);
        let other = ArmSummary::from_counts(PolicyId::Ts, arm(0), 3, 10);
        assert_eq!(
            wald_test(&other, &empty).unwrap_err(),
            AnalysisError::UndefinedSummary {
                policy: PolicyId::Ts,
                arm: 3
            }
        );
        assert!(confidence_interval(&empty, 0.95).is_err());
    }

    #[test]
    fn wald_on_reported_ur_arms() {
        let r = wald_test(&reported(60.61, 3130, 0), &reported(57.96, 3094, 1)).unwrap();
        assert!((r.statistic - 2.129).abs() < 0.005, "{}", r.statistic);
        assert!((r.p_value - 0.033).abs() < 0.005, "{}", r.p_value);
        assert!(r.significant);
        let adjusted = bonferroni(&[r, r, r], 0.05);
        assert!((adjusted[0].adjusted_threshold - 0.05 / 3.0).abs() < 1e-15);
        assert!(!adjusted[0].significant);
    }

    #[test]
    fn identical_arms() {
        let a = reported(55.0, 400, 0);
        let r = wald_test(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn bonferroni_single_test_keeps_alpha() {
        let r = wald_test(&reported(50.0, 100, 0), &reported(60.0, 100, 1)).unwrap();
        assert_eq!(bonferroni(&[r], 0.05)[0].adjusted_threshold, 0.05);
    }

    #[test]
    fn interval_examples() {
        // mean 0.5, se 0.05: n = 0.25 / 0.0025 = 100
        let s = ArmSummary::from_mean(PolicyId::Ur, arm(0), 0.5, 100).unwrap();
        let (lo, hi) = confidence_interval(&s, 0.95).unwrap();
        assert!((lo - (0.5 - 1.959_964 * 0.05)).abs() < 1e-6);
        assert!((hi - (0.5 + 1.959_964 * 0.05)).abs() < 1e-6);
        assert!((lo - 0.402).abs() < 5e-4 && (hi - 0.598).abs() < 5e-4);

        let certain = ArmSummary::from_counts(PolicyId::Ur, arm(0), 7, 7);
        assert_eq!(confidence_interval(&certain, 0.95).unwrap(), (1.0, 1.0));

        // mean 0.99 with se 0.02 needs n = 0.99 * 0.01 / 0.0004
        let near_one = ArmSummary::from_mean(PolicyId::Ur, arm(0), 0.99, 25).unwrap();
        assert_eq!(confidence_interval(&near_one, 0.95).unwrap().1, 1.0);
    }

    #[test]
    fn pair_order() {
        let three: Vec<_> = arm_pairs(3).iter().map(|(a, b)| (a.one_based(), b.one_based())).collect();
        assert_eq!(three, vec![(1, 2), (2, 3), (3, 1)]);
        assert_eq!(arm_pairs(2).len(), 1);
        assert_eq!(arm_pairs(4).len(), 6);
        assert_eq!(arm_pairs(5).len(), 10);
    }

    #[test]
    fn table_one_ts_shares() {
        let s = shares(&[3217, 2086, 1825]);
        for (got, want) in s.iter().zip([0.451, 0.293, 0.256]) {
            assert!((got - want).abs() < 5e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn summarize_pools_weeks() {
        let w = |t| Week::new(t).unwrap();
        let history = vec![
            BatchObservation::new(w(1), PolicyId::Ur, arm(0), 100, 60).unwrap(),
            BatchObservation::new(w(2), PolicyId::Ur, arm(0), 100, 40).unwrap(),
            BatchObservation::new(w(1), PolicyId::Ur, arm(1), 50, 10).unwrap(),
        ];
        let s = summarize(PolicyId::Ur, 3, &history);
        assert_eq!(s[0].mean(), Some(0.5));
        assert_eq!(s[0].n_total(), 200);
        assert_eq!(s[1].mean(), Some(0.2));
        assert_eq!(s[2].mean(), None);
    }
}
