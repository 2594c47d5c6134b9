//! Simulated cohort: turns weekly assignments into open counts under
//! user-supplied true arm means.

use rand::Rng;
use thiserror::Error;

use crate::model::EnvironmentSchedule;
use crate::policies::AllocationResult;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvironmentError {
    #[error("BAD_DIMENSIONS: {0}")]
    BadDimensions(String),
    #[error("OUT_OF_RANGE: week {week} arm {arm} mean {value} is outside [0, 1]")]
    OutOfRange { week: usize, arm: usize, value: f64 },
}

/// How the rows given to [`make_schedule`] are interpreted.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    /// One row of means repeated for every week.
    Stationary { means: Vec<f64>, horizon: u32 },
    /// One row per week, stored verbatim.
    Piecewise { rows: Vec<Vec<f64>> },
}

pub fn make_schedule(spec: ScheduleSpec) -> Result<EnvironmentSchedule, EnvironmentError> {
    let rows = match spec {
        ScheduleSpec::Stationary { means, horizon } => vec![means; horizon as usize],
        ScheduleSpec::Piecewise { rows } => rows,
    };
    let width = rows.first().map_or(0, Vec::len);
    if !rows.is_empty() && width == 0 {
        return Err(EnvironmentError::BadDimensions(
            "rows must contain at least one arm".into(),
        ));
    }
    for (t, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(EnvironmentError::BadDimensions(format!(
                "week {} has {} means, expected {width}",
                t + 1,
                row.len()
            )));
        }
        if let Some((k, &value)) = row
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(EnvironmentError::OutOfRange {
                week: t + 1,
                arm: k + 1,
                value,
            });
        }
    }
    Ok(EnvironmentSchedule::from_rows_unchecked(rows))
}

/// Checks that a schedule covers `horizon` weeks of `arms` arms.
pub fn check_dimensions(
    env: &EnvironmentSchedule,
    arms: usize,
    horizon: u32,
) -> Result<(), EnvironmentError> {
    if env.horizon() != horizon as usize || env.arms() != arms {
        return Err(EnvironmentError::BadDimensions(format!(
            "schedule is {} weeks x {} arms, configuration needs {horizon} x {arms}",
            env.horizon(),
            env.arms()
        )));
    }
    Ok(())
}

/// Opens per arm, one Bernoulli draw per assigned student, in arm order.
///
/// Drawing student by student (rather than from a binomial sampler) fixes
/// stream consumption at exactly one uniform per student.
pub fn draw_rewards<R: Rng + ?Sized>(
    alloc: &AllocationResult,
    true_means: &[f64],
    rng: &mut R,
) -> Vec<u64> {
    assert_eq!(alloc.counts.len(), true_means.len(), "arm count mismatch");
    alloc
        .counts
        .iter()
        .zip(true_means)
        .map(|(&n, &p)| (0..n).filter(|_| rng.random::<f64>() < p).count() as u64)
        .collect()
}
