//! Trace, summary and replication output files, plus aligned-text tables
//! for the terminal.
//!
//! Every CSV field is a number or a token from a closed set, so no field
//! ever needs quoting. Reals are written with six significant digits;
//! rows are ordered by week, then policy (UR, TS, TSD), then arm.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::log::write_log;
use super::IoError;
use crate::analysis::{
    arm_pairs, confidence_interval, pairwise_wald, shares, summarize, summarize_trace, ArmSummary,
    WaldResult, DEFAULT_ALPHA,
};
use crate::engine::ExperimentTrace;
use crate::model::{ArmId, BatchObservation, PolicyId};
use crate::replicate::{PolicyAggregate, Quantiles, ReplicationOutcome};

pub const WEEKLY_HEADER: [&str; 7] = [
    "week",
    "policy",
    "arm",
    "cumulative_mean",
    "ci_low",
    "ci_high",
    "allocation_proportion",
];
pub const SUMMARY_HEADER: [&str; 5] = ["policy", "arm", "mean", "se", "n"];
pub const WALD_HEADER: [&str; 7] = [
    "policy",
    "arm_a",
    "arm_b",
    "statistic",
    "p_value",
    "adjusted_threshold",
    "significant",
];
pub const POSTERIORS_HEADER: [&str; 5] = ["week", "policy", "arm", "alpha", "beta"];
pub const REPLICATIONS_HEADER: [&str; 8] = [
    "replication",
    "policy",
    "arm",
    "observations",
    "mean",
    "own_assigned",
    "own_share",
    "regret",
];
pub const REPLICATION_SUMMARY_HEADER: [&str; 9] = [
    "policy", "metric", "arm", "count", "median", "q05", "q25", "q75", "q95",
];
pub const REPLICATION_TESTS_HEADER: [&str; 6] = [
    "policy",
    "arm_a",
    "arm_b",
    "tested",
    "unadjusted_rejection_rate",
    "bonferroni_rejection_rate",
];

/// Confidence level of the intervals in `weekly.csv`.
pub const CI_LEVEL: f64 = 0.95;

/// Formats a real with six significant digits.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return "NaN".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    // the exponent of the rounded value, so 9.9999996 counts as 10
    let sci = format!("{x:.5e}");
    let exponent: i32 = sci[sci.find('e').map_or(0, |i| i + 1)..].parse().unwrap_or(0);
    let decimals = (5 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".into(), fmt_sig)
}

/// Minimal CSV writer that refuses fields needing quotes.
pub struct CsvOut<W: Write> {
    inner: csv::Writer<W>,
    width: usize,
}

impl<W: Write> CsvOut<W> {
    pub fn new(writer: W, header: &[&str]) -> std::io::Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Never)
            .from_writer(writer);
        inner.write_record(header)?;
        Ok(CsvOut {
            inner,
            width: header.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        assert_eq!(fields.len(), self.width, "row width mismatch");
        for f in fields {
            assert!(
                !f.contains([',', '"', '\n', '\r']),
                "field `{f}` would need quoting"
            );
        }
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, IoError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| IoError::io(path, e))
}

fn io_at(dir: &Path, name: &str) -> impl Fn(std::io::Error) -> IoError {
    let path = dir.join(name);
    move |e| IoError::io(path.clone(), e)
}

/// Writes `weekly.csv`, `summary.csv`, `wald.csv`, `posteriors.csv` and
/// `observations.csv` for a trace into `out_dir`, creating it if needed.
pub fn write_trace(trace: &ExperimentTrace, out_dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(out_dir).map_err(|e| IoError::io(out_dir, e))?;
    write_weekly(trace, out_dir)?;
    write_summary(trace, out_dir)?;
    write_wald(trace, out_dir)?;
    write_posteriors(trace, out_dir)?;
    let err = io_at(out_dir, "observations.csv");
    write_log(&trace.observations(), create(out_dir, "observations.csv")?).map_err(err)
}

fn write_weekly(trace: &ExperimentTrace, dir: &Path) -> Result<(), IoError> {
    let err = io_at(dir, "weekly.csv");
    let mut w = CsvOut::new(create(dir, "weekly.csv")?, &WEEKLY_HEADER).map_err(&err)?;
    let arms = trace.schedule().arms;
    let mut cumulative: [Vec<BatchObservation>; 3] = Default::default();
    for outcome in trace.weeks() {
        let week = outcome.week();
        for policy in PolicyId::ALL {
            let credited = trace.credited_in_week(policy, week);
            cumulative[policy.position()].extend_from_slice(credited);
            let summaries = summarize(policy, arms, &cumulative[policy.position()]);
            let counts: Vec<u64> = summarize(policy, arms, credited)
                .iter()
                .map(ArmSummary::n_total)
                .collect();
            let proportions = shares(&counts);
            for (k, s) in summaries.iter().enumerate() {
                let (lo, hi) = match confidence_interval(s, CI_LEVEL) {
                    Ok((lo, hi)) => (fmt_sig(lo), fmt_sig(hi)),
                    Err(_) => ("NaN".into(), "NaN".into()),
                };
                w.row(&[
                    week.to_string(),
                    policy.token().into(),
                    (k + 1).to_string(),
                    fmt_opt(s.mean()),
                    lo,
                    hi,
                    fmt_sig(proportions[k]),
                ])
                .map_err(&err)?;
            }
        }
    }
    w.finish().map_err(err)
}

fn write_summary(trace: &ExperimentTrace, dir: &Path) -> Result<(), IoError> {
    let err = io_at(dir, "summary.csv");
    let mut w = CsvOut::new(create(dir, "summary.csv")?, &SUMMARY_HEADER).map_err(&err)?;
    if !trace.weeks().is_empty() {
        for policy in PolicyId::ALL {
            for s in summarize_trace(trace, policy) {
                w.row(&summary_fields(&s)).map_err(&err)?;
            }
        }
    }
    w.finish().map_err(err)
}

fn summary_fields(s: &ArmSummary) -> [String; 5] {
    [
        s.policy().token().into(),
        s.arm().one_based().to_string(),
        fmt_opt(s.mean()),
        fmt_opt(s.se()),
        s.n_total().to_string(),
    ]
}

fn wald_fields(r: &WaldResult) -> [String; 7] {
    [
        r.policy.token().into(),
        r.pair.0.one_based().to_string(),
        r.pair.1.one_based().to_string(),
        fmt_sig(r.statistic),
        fmt_sig(r.p_value),
        fmt_sig(r.adjusted_threshold),
        u8::from(r.significant).to_string(),
    ]
}

fn write_wald(trace: &ExperimentTrace, dir: &Path) -> Result<(), IoError> {
    let err = io_at(dir, "wald.csv");
    let mut w = CsvOut::new(create(dir, "wald.csv")?, &WALD_HEADER).map_err(&err)?;
    if !trace.weeks().is_empty() {
        for policy in PolicyId::ALL {
            // policies with an unobserved arm have no defined tests
            if let Ok(results) = pairwise_wald(&summarize_trace(trace, policy), DEFAULT_ALPHA) {
                for r in &results {
                    w.row(&wald_fields(r)).map_err(&err)?;
                }
            }
        }
    }
    w.finish().map_err(err)
}

fn write_posteriors(trace: &ExperimentTrace, dir: &Path) -> Result<(), IoError> {
    let err = io_at(dir, "posteriors.csv");
    let mut w = CsvOut::new(create(dir, "posteriors.csv")?, &POSTERIORS_HEADER).map_err(&err)?;
    for snap in trace.snapshots() {
        for policy in PolicyId::ALL {
            for (k, p) in snap.of(policy).iter().enumerate() {
                w.row(&[
                    snap.week.to_string(),
                    policy.token().into(),
                    (k + 1).to_string(),
                    fmt_sig(p.alpha()),
                    fmt_sig(p.beta()),
                ])
                .map_err(&err)?;
            }
        }
    }
    w.finish().map_err(err)
}

/// Writes `replications.csv`, `replication_summary.csv` and
/// `replication_tests.csv`.
pub fn write_replications(
    outcomes: &[ReplicationOutcome],
    aggregates: &[PolicyAggregate],
    out_dir: &Path,
) -> Result<(), IoError> {
    std::fs::create_dir_all(out_dir).map_err(|e| IoError::io(out_dir, e))?;

    let err = io_at(out_dir, "replications.csv");
    let mut w =
        CsvOut::new(create(out_dir, "replications.csv")?, &REPLICATIONS_HEADER).map_err(&err)?;
    for outcome in outcomes {
        for p in &outcome.policies {
            for (k, s) in p.summaries.iter().enumerate() {
                w.row(&[
                    outcome.index.to_string(),
                    p.policy.token().into(),
                    (k + 1).to_string(),
                    s.n_total().to_string(),
                    fmt_opt(s.mean()),
                    p.own_assigned[k].to_string(),
                    fmt_sig(p.own_shares[k]),
                    fmt_sig(p.regret),
                ])
                .map_err(&err)?;
            }
        }
    }
    w.finish().map_err(err)?;

    let err = io_at(out_dir, "replication_summary.csv");
    let mut w = CsvOut::new(
        create(out_dir, "replication_summary.csv")?,
        &REPLICATION_SUMMARY_HEADER,
    )
    .map_err(&err)?;
    let count = outcomes.len().to_string();
    let quantile_row = |policy: PolicyId, metric: &str, arm: usize, q: &Option<Quantiles>| {
        let mut row = vec![policy.token().to_string(), metric.into(), arm.to_string(), count.clone()];
        match q {
            Some(q) => row.extend([q.median, q.q05, q.q25, q.q75, q.q95].map(fmt_sig)),
            None => row.extend(std::iter::repeat_n("NaN".to_string(), 5)),
        }
        row
    };
    for agg in aggregates {
        for (k, q) in agg.own_share.iter().enumerate() {
            w.row(&quantile_row(agg.policy, "own_share", k + 1, q)).map_err(&err)?;
        }
        for (k, q) in agg.mean.iter().enumerate() {
            w.row(&quantile_row(agg.policy, "mean", k + 1, q)).map_err(&err)?;
        }
        // arm 0 marks policy-level metrics
        w.row(&quantile_row(agg.policy, "concentration_index", 0, &agg.concentration_index))
            .map_err(&err)?;
        w.row(&quantile_row(agg.policy, "regret", 0, &agg.regret)).map_err(&err)?;
    }
    w.finish().map_err(err)?;

    let err = io_at(out_dir, "replication_tests.csv");
    let mut w = CsvOut::new(
        create(out_dir, "replication_tests.csv")?,
        &REPLICATION_TESTS_HEADER,
    )
    .map_err(&err)?;
    for agg in aggregates {
        for t in &agg.tests {
            w.row(&[
                agg.policy.token().into(),
                t.pair.0.one_based().to_string(),
                t.pair.1.one_based().to_string(),
                t.tested.to_string(),
                fmt_sig(t.unadjusted),
                fmt_sig(t.bonferroni),
            ])
            .map_err(&err)?;
        }
    }
    w.finish().map_err(err)
}

/// A row of a summary table: the summary used for testing plus the
/// standard error the file reported, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub summary: ArmSummary,
    pub reported_se: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RawSummaryRow {
    policy: String,
    arm: usize,
    #[serde(alias = "mean_pct")]
    mean: f64,
    #[serde(default, alias = "se_pct")]
    se: Option<f64>,
    #[serde(alias = "observations")]
    n: u64,
}

/// Reads a summary table with columns `policy,arm,mean,se,n`.
///
/// Means and standard errors are proportions; with columns named
/// `mean_pct` and `se_pct` they are read as percentages. The `se` column
/// is optional and only kept for comparison: the summaries always carry
/// the binomial standard error implied by (mean, n).
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    parse_summary(file)
}

pub fn parse_summary<R: std::io::Read>(reader: R) -> Result<Vec<SummaryRow>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IoError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let scale = if headers.iter().any(|h| h == "mean_pct") {
        0.01
    } else {
        1.0
    };
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| IoError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| IoError::Parse { line, message };
        let raw: RawSummaryRow = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(e.to_string()))?;
        let policy = PolicyId::from_token(&raw.policy).map_err(|e| parse_err(e.to_string()))?;
        let arm = ArmId::from_one_based(raw.arm).ok_or_else(|| parse_err("arm must be >= 1".into()))?;
        let summary = ArmSummary::from_mean(policy, arm, raw.mean * scale, raw.n)
            .map_err(|e| parse_err(e.to_string()))?;
        if rows
            .iter()
            .any(|r| r.summary.policy() == policy && r.summary.arm() == arm)
        {
            return Err(IoError::DuplicateRow {
                week: 0,
                policy,
                arm: arm.one_based(),
            });
        }
        rows.push(SummaryRow {
            summary,
            reported_se: raw.se.map(|se| se * scale),
        });
    }
    rows.sort_by_key(|r| (r.summary.policy(), r.summary.arm()));
    Ok(rows)
}

/// Pairwise Wald tests per policy for a summary table, Bonferroni-adjusted
/// within each policy.
pub fn analyze_summaries(
    rows: &[SummaryRow],
    family_alpha: f64,
) -> Result<Vec<WaldResult>, IoError> {
    let mut out = Vec::new();
    for policy in PolicyId::ALL {
        let summaries: Vec<ArmSummary> = rows
            .iter()
            .filter(|r| r.summary.policy() == policy)
            .map(|r| r.summary)
            .collect();
        if summaries.is_empty() {
            continue;
        }
        if let Some(pos) = summaries
            .iter()
            .enumerate()
            .position(|(k, s)| s.arm().index() != k)
        {
            return Err(IoError::Validation(vec![super::LocatedIssue {
                line: None,
                message: format!("{policy} is missing arm {}", pos + 1),
            }]));
        }
        let results = pairwise_wald(&summaries, family_alpha).map_err(|e| {
            IoError::Validation(vec![super::LocatedIssue {
                line: None,
                message: e.to_string(),
            }])
        })?;
        out.extend(results);
    }
    Ok(out)
}

/// Aligned-text version of a summary table, in percent.
pub fn render_summary_table(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>4} {:>9} {:>9} {:>12} {:>12}",
        "policy", "arm", "mean %", "se %", "reported se", "observations"
    );
    for r in rows {
        let s = &r.summary;
        let pct = |x: Option<f64>| x.map_or_else(|| "-".into(), |v| format!("{:.2}", v * 100.0));
        let _ = writeln!(
            out,
            "{:<6} {:>4} {:>9} {:>9} {:>12} {:>12}",
            s.policy().label(),
            s.arm().one_based(),
            pct(s.mean()),
            pct(s.se()),
            pct(r.reported_se),
            s.n_total()
        );
    }
    out
}

/// Aligned-text Wald table with three decimals, like a published table.
pub fn render_wald_table(results: &[WaldResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:<16} {:>9} {:>9} {:>10} {:>12}",
        "policy", "comparison", "statistic", "p-value", "threshold", "significant"
    );
    for r in results {
        let _ = writeln!(
            out,
            "{:<6} {:<16} {:>9.3} {:>9.3} {:>10.4} {:>12}",
            r.policy.label(),
            format!("Arm {} vs. Arm {}", r.pair.0.one_based(), r.pair.1.one_based()),
            r.statistic,
            r.p_value,
            r.adjusted_threshold,
            if r.significant { "yes" } else { "no" }
        );
    }
    out
}

/// Pairs a policy with `arms` arms is tested on, for callers that need the
/// family size.
pub fn family_size(arms: usize) -> usize {
    arm_pairs(arms).len()
}
