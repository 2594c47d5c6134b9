mod common;

use std::fs;
use std::path::Path;

use batched_bandit::io::cli::{run, EXIT_INVALID, EXIT_IO, EXIT_OK};
use common::{EXAMPLE_CFG, SUMMARY_CSV};

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("batched-bandit").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn analyze_prints_pairwise_table() {
    let (code, out, err) = cli(&["analyze", "--summary", SUMMARY_CSV]);
    assert_eq!(code, EXIT_OK, "{err}");
    for needle in ["2.128", "0.033", "0.385", "0.700", "0.159", "0.874", "0.0167"] {
        assert!(out.contains(needle), "missing {needle} in\n{out}");
    }
    assert!(out.contains("0 of 9 comparisons significant"));
}

#[test]
fn analyze_rejects_bad_alpha_and_missing_file() {
    let (code, _, _) = cli(&["analyze", "--summary", SUMMARY_CSV, "--alpha", "1.5"]);
    assert_eq!(code, EXIT_INVALID);
    let (code, _, err) = cli(&["analyze", "--summary", "/nonexistent/table.csv"]);
    assert_eq!(code, EXIT_IO);
    assert!(err.contains("IO_ERROR"), "{err}");
}

#[test]
fn validate_reports_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    let text = EXAMPLE_CFG
        .replace("split = [0.5, 0.25, 0.25]", "split = [0.5, 0.5, 0.25]")
        .replace("ts_intro_week = 6", "ts_intro_week = 9");
    fs::write(&bad, text).unwrap();
    let (code, _, err) = cli(&["validate", "--config", path_str(&bad)]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("SPLIT_NOT_NORMALIZED"), "{err}");
    assert!(err.contains("ts_intro_week (9) must be <= ts_dagger_intro_week (7)"), "{err}");
    assert!(err.contains("line "), "{err}");
}

#[test]
fn validate_accepts_shipped_config() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/paper.cfg");
    let (code, out, _) = cli(&["validate", "--config", path]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("3 arms, 13 weeks, seed 42"));
    let (code, _, _) = cli(&["validate", "--config", "/nonexistent.cfg"]);
    assert_eq!(code, EXIT_IO);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli(&["simulate"]).0, EXIT_INVALID);
    assert_eq!(cli(&["frobnicate"]).0, EXIT_INVALID);
    assert_eq!(cli(&["--help"]).0, EXIT_OK);
}

#[test]
fn simulate_writes_trace_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("paper.cfg");
    fs::write(&cfg, EXAMPLE_CFG).unwrap();
    let out = dir.path().join("run1");
    let (code, _, err) = cli(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
        "--replications",
        "20",
        "--workers",
        "2",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let expected = [
        ("weekly.csv", "week,policy,arm,cumulative_mean,ci_low,ci_high,allocation_proportion"),
        ("summary.csv", "policy,arm,mean,se,n"),
        ("wald.csv", "policy,arm_a,arm_b,statistic,p_value,adjusted_threshold,significant"),
        ("posteriors.csv", "week,policy,arm,alpha,beta"),
        ("observations.csv", "week,policy,arm,assigned,opened"),
        ("replications.csv", "replication,policy,arm,observations,mean,own_assigned,own_share,regret"),
        ("replication_summary.csv", "policy,metric,arm,count,median,q05,q25,q75,q95"),
        (
            "replication_tests.csv",
            "policy,arm_a,arm_b,tested,unadjusted_rejection_rate,bonferroni_rejection_rate",
        ),
    ];
    for (name, head) in expected {
        assert_eq!(header(&out.join(name)), head, "{name}");
    }
    let weekly = fs::read_to_string(out.join("weekly.csv")).unwrap();
    assert_eq!(weekly.lines().count(), 1 + 13 * 3 * 3);
    let reps = fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 20 * 3 * 3);
    assert!(reps.lines().nth(1).unwrap().starts_with("0,UR,1,"));

    // the rendered config reproduces the run
    let again = dir.path().join("run2");
    let used = out.join("config_used.cfg");
    let (code, _, _) = cli(&["simulate", "--config", path_str(&used), "--out", path_str(&again)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        fs::read(out.join("posteriors.csv")).unwrap(),
        fs::read(again.join("posteriors.csv")).unwrap()
    );
}

#[test]
fn simulate_with_invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, EXAMPLE_CFG.replace("burn_in = 5", "burn_in = 6")).unwrap();
    let (code, _, err) = cli(&["simulate", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("VALIDATION_ERROR"), "{err}");
}

/// Published final (mean %, assigned) per policy and arm.
const PUBLISHED_SUMMARY: [(&str, [(f64, u64); 3]); 3] = [
    ("UR", [(60.61, 3130), (57.96, 3094), (58.52, 3036)]),
    ("TS", [(60.07, 3217), (60.60, 2086), (60.36, 1825)]),
    ("TSD", [(61.21, 3618), (61.99, 1852), (61.44, 1653)]),
];

/// A complete 13-week log whose totals reproduce the published summary: 200 students
/// per arm each burn-in week (shared by every policy), no TS students in
/// week 6, and the rest of every total in week 13.
fn published_totals_log() -> String {
    let burn_n = 200u64;
    let burn_r = 120u64;
    let totals = |policy: &str| PUBLISHED_SUMMARY.iter().find(|(p, _)| *p == policy).unwrap().1;
    let remainder = |policy: &str, k: usize, credited_burn_in: bool| {
        let (pct, n) = totals(policy)[k];
        let r = (pct / 100.0 * n as f64).round() as u64;
        if credited_burn_in {
            (n - 5 * burn_n, r - 5 * burn_r)
        } else {
            (n, r)
        }
    };
    let mut log = String::from("week,policy,arm,assigned,opened\n");
    for week in 1..=13u32 {
        for k in 0..3 {
            let (n, r) = match week {
                1..=5 => (burn_n, burn_r),
                13 => {
                    let (n, r) = remainder("UR", k, false);
                    (n - 5 * burn_n, r - 5 * burn_r)
                }
                _ => (0, 0),
            };
            log.push_str(&format!("{week},UR,{},{n},{r}\n", k + 1));
        }
        if week >= 6 {
            for k in 0..3 {
                let (n, r) = if week == 13 { remainder("TS", k, true) } else { (0, 0) };
                log.push_str(&format!("{week},TS,{},{n},{r}\n", k + 1));
            }
        }
        if week >= 7 {
            for k in 0..3 {
                let (n, r) = if week == 13 { remainder("TSD", k, true) } else { (0, 0) };
                log.push_str(&format!("{week},TSD,{},{n},{r}\n", k + 1));
            }
        }
    }
    log
}

#[test]
fn replayed_totals_match_published_summary() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    fs::write(&log, published_totals_log()).unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = cli(&["replay", "--log", path_str(&log), "--out", path_str(&out)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    for (policy, arms) in PUBLISHED_SUMMARY {
        for (k, (pct, n)) in arms.iter().enumerate() {
            let prefix = format!("{policy},{},", k + 1);
            let row = rows.iter().find(|r| r.starts_with(&prefix)).unwrap();
            let fields: Vec<&str> = row.split(',').collect();
            let mean: f64 = fields[2].parse().unwrap();
            // opens are whole students, so a published percentage is only
            // reachable to within half a student
            let slack = 50.0 / *n as f64 + 0.005;
            assert!((mean * 100.0 - pct).abs() <= slack, "{row}");
            assert_eq!(fields[4], n.to_string());
        }
    }
}

#[test]
fn replay_of_empty_log_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    fs::write(&log, "week,policy,arm,assigned,opened\n").unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = cli(&["replay", "--log", path_str(&log), "--out", path_str(&out)]);
    assert_eq!(code, EXIT_OK, "{err}");
    for name in ["weekly.csv", "summary.csv", "wald.csv", "posteriors.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(text.lines().count(), 1, "{name}: {text}");
    }
}

#[test]
fn replay_reports_incomplete_and_duplicate_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    let full = published_totals_log();
    let missing: String = full
        .lines()
        .filter(|l| *l != "7,TS,2,0,0")
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&log, missing).unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = cli(&["replay", "--log", path_str(&log), "--out", path_str(&out)]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("INCOMPLETE_LOG"), "{err}");

    fs::write(&log, format!("{full}7,TS,2,0,0\n")).unwrap();
    let (code, _, err) = cli(&["replay", "--log", path_str(&log), "--out", path_str(&out)]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("DUPLICATE_ROW"), "{err}");
}
