//! Experiment configuration files.
//!
//! Configurations are TOML documents with one key per setting:
//!
//! ```toml
//! arms = 3
//! horizon = 13
//! burn_in = 5
//! ts_intro_week = 6
//! ts_dagger_intro_week = 7
//! seed = 42
//! split = [0.5, 0.25, 0.25]       # UR, TS, TS† once all three allocate
//! transition_split = [0.5, 0.5]   # UR, TS while TS† is not yet allocating
//! cohort = { start = 1119, end = 1025 }   # or `cohort = 1119`, or a list
//!
//! [environment]
//! stationary = [0.606, 0.580, 0.585]      # or `piecewise = [[...], ...]`
//! ```
//!
//! Parse and validation errors carry the 1-based line they refer to.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use super::{IoError, LocatedIssue};
use crate::environment::{check_dimensions, make_schedule, ScheduleSpec};
use crate::model::{
    linear_cohort, constant_cohort, validate_config, ConfigDraft, EnvironmentSchedule,
    ExperimentConfig,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    arms: Spanned<usize>,
    horizon: Spanned<u32>,
    burn_in: Spanned<u32>,
    ts_intro_week: Spanned<u32>,
    ts_dagger_intro_week: Spanned<u32>,
    seed: Spanned<u64>,
    split: Spanned<Vec<f64>>,
    transition_split: Spanned<Vec<f64>>,
    cohort: Spanned<CohortSpec>,
    environment: Spanned<EnvironmentSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CohortSpec {
    Constant(u64),
    Sizes(Vec<u64>),
    Linear { start: u64, end: u64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentSpec {
    stationary: Option<Vec<f64>>,
    piecewise: Option<Vec<Vec<f64>>>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    let end = span.start.min(text.len());
    text[..end].matches('\n').count() + 1
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<(ExperimentConfig, EnvironmentSchedule), IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<(ExperimentConfig, EnvironmentSchedule), IoError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| IoError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s)),
        message: e.message().trim().to_string(),
    })?;
    let at = |span: Range<usize>| Some(line_of(text, span));

    let mut issues = Vec::new();
    let mut misshapen: Vec<&'static str> = Vec::new();
    let mut fixed = |v: &Spanned<Vec<f64>>, n: usize, issues: &mut Vec<LocatedIssue>, name: &'static str| {
        let values = v.get_ref();
        if values.len() == n {
            values.clone()
        } else {
            misshapen.push(name);
            issues.push(LocatedIssue {
                line: at(v.span()),
                message: format!("`{name}` needs {n} fractions, got {}", values.len()),
            });
            vec![f64::NAN; n]
        }
    };
    let split = fixed(&file.split, 3, &mut issues, "split");
    let transition_split = fixed(&file.transition_split, 2, &mut issues, "transition_split");
    let horizon = *file.horizon.get_ref();
    let cohort_sizes = match file.cohort.get_ref() {
        CohortSpec::Constant(n) => constant_cohort(*n, horizon),
        CohortSpec::Sizes(sizes) => sizes.clone(),
        CohortSpec::Linear { start, end } => linear_cohort(*start, *end, horizon),
    };

    let spans = [
        ("arms", file.arms.span()),
        ("horizon", file.horizon.span()),
        ("burn_in", file.burn_in.span()),
        ("ts_intro_week", file.ts_intro_week.span()),
        ("ts_dagger_intro_week", file.ts_dagger_intro_week.span()),
        ("split", file.split.span()),
        ("transition_split", file.transition_split.span()),
        ("cohort", file.cohort.span()),
    ];
    let draft = ConfigDraft {
        arms: *file.arms.get_ref(),
        horizon,
        burn_in: *file.burn_in.get_ref(),
        ts_intro_week: *file.ts_intro_week.get_ref(),
        ts_dagger_intro_week: *file.ts_dagger_intro_week.get_ref(),
        cohort_sizes,
        split: [split[0], split[1], split[2]],
        transition_split: [transition_split[0], transition_split[1]],
        seed: *file.seed.get_ref(),
    };
    let validated = validate_config(draft);
    if let Err(report) = &validated {
        for err in &report.0 {
            if misshapen.contains(&err.field()) {
                continue;
            }
            let line = spans
                .iter()
                .find(|(name, _)| *name == err.field())
                .and_then(|(_, span)| at(span.clone()));
            issues.push(LocatedIssue {
                line,
                message: err.to_string(),
            });
        }
    }

    let env_span = file.environment.span();
    let env_spec = file.environment.get_ref();
    let schedule = match (&env_spec.stationary, &env_spec.piecewise) {
        (Some(means), None) => Some(ScheduleSpec::Stationary {
            means: means.clone(),
            horizon,
        }),
        (None, Some(rows)) => Some(ScheduleSpec::Piecewise { rows: rows.clone() }),
        _ => {
            issues.push(LocatedIssue {
                line: at(env_span.clone()),
                message: "[environment] needs exactly one of `stationary` or `piecewise`".into(),
            });
            None
        }
    };
    let env = schedule.and_then(|spec| match make_schedule(spec) {
        Ok(env) => match check_dimensions(&env, *file.arms.get_ref(), horizon) {
            Ok(()) => Some(env),
            Err(e) => {
                issues.push(LocatedIssue {
                    line: at(env_span.clone()),
                    message: e.to_string(),
                });
                None
            }
        },
        Err(e) => {
            issues.push(LocatedIssue {
                line: at(env_span.clone()),
                message: e.to_string(),
            });
            None
        }
    });

    match (validated, env) {
        (Ok(cfg), Some(env)) if issues.is_empty() => Ok((cfg, env)),
        _ => {
            issues.sort_by_key(|i| i.line);
            Err(IoError::Validation(issues))
        }
    }
}

/// Writes a configuration back in the same format, with the cohort
/// expanded to its per-week sizes.
pub fn render_config(cfg: &ExperimentConfig, env: &EnvironmentSchedule) -> String {
    let list = |values: &[f64]| {
        values
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut out = String::new();
    let _ = writeln!(out, "arms = {}", cfg.arms());
    let _ = writeln!(out, "horizon = {}", cfg.horizon());
    let _ = writeln!(out, "burn_in = {}", cfg.burn_in());
    let _ = writeln!(out, "ts_intro_week = {}", cfg.ts_intro_week());
    let _ = writeln!(out, "ts_dagger_intro_week = {}", cfg.ts_dagger_intro_week());
    let _ = writeln!(out, "seed = {}", cfg.seed());
    let _ = writeln!(out, "split = [{}]", list(&cfg.split()));
    let _ = writeln!(out, "transition_split = [{}]", list(&cfg.transition_split()));
    let sizes: Vec<String> = cfg.cohort_sizes().iter().map(u64::to_string).collect();
    let _ = writeln!(out, "cohort = [{}]", sizes.join(", "));
    let _ = writeln!(out, "\n[environment]");
    if env.is_stationary() && env.horizon() > 0 {
        let _ = writeln!(out, "stationary = [{}]", list(&env.rows()[0]));
    } else {
        let _ = writeln!(out, "piecewise = [");
        for row in env.rows() {
            let _ = writeln!(out, "    [{}],", list(row));
        }
        let _ = writeln!(out, "]");
    }
    out
}
