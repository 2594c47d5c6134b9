//! Observation logs: one CSV row per (week, policy, arm) with header
//! `week,policy,arm,assigned,opened`. Arms are 1-based.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::IoError;
use crate::model::{ArmId, BatchObservation, PolicyId, Week};

pub const LOG_HEADER: [&str; 5] = ["week", "policy", "arm", "assigned", "opened"];

/// One row exactly as written in the file.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ObservationLogRow {
    pub week: u32,
    pub policy: String,
    pub arm: usize,
    pub assigned: u64,
    pub opened: u64,
}

impl ObservationLogRow {
    pub fn to_observation(&self) -> Result<BatchObservation, String> {
        let week = Week::new(self.week).map_err(|e| e.to_string())?;
        let policy = PolicyId::from_token(&self.policy).map_err(|e| e.to_string())?;
        let arm = ArmId::from_one_based(self.arm).ok_or("arm must be >= 1")?;
        if self.opened > self.assigned {
            return Err(format!(
                "opened ({}) must not exceed assigned ({})",
                self.opened, self.assigned
            ));
        }
        BatchObservation::new(week, policy, arm, self.assigned, self.opened).map_err(|e| e.to_string())
    }
}

pub fn read_log(path: &Path) -> Result<Vec<BatchObservation>, IoError> {
    let file = std::fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    parse_log(file)
}

/// Parses, validates and sorts a log by (week, policy, arm).
pub fn parse_log<R: Read>(reader: R) -> Result<Vec<BatchObservation>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IoError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != LOG_HEADER {
        return Err(IoError::Parse {
            line: 1,
            message: format!("expected header `{}`", LOG_HEADER.join(",")),
        });
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
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
        let row: ObservationLogRow = record.deserialize(Some(&headers)).map_err(|e| IoError::Parse {
            line,
            message: e.to_string(),
        })?;
        let obs = row
            .to_observation()
            .map_err(|message| IoError::Parse { line, message })?;
        if !seen.insert(obs.key()) {
            return Err(IoError::DuplicateRow {
                week: obs.week().get(),
                policy: obs.policy(),
                arm: obs.arm().one_based(),
            });
        }
        out.push(obs);
    }
    out.sort_by_key(BatchObservation::key);
    Ok(out)
}

pub fn write_log<W: Write>(observations: &[BatchObservation], writer: W) -> std::io::Result<()> {
    let mut w = super::report::CsvOut::new(writer, &LOG_HEADER)?;
    for obs in observations {
        w.row(&[
            obs.week().to_string(),
            obs.policy().token().to_string(),
            obs.arm().one_based().to_string(),
            obs.assigned().to_string(),
            obs.opened().to_string(),
        ])?;
    }
    w.finish()
}
