use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExclusionStatus, VoteState};
use crate::detect::DetectionSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    None,
    AttributeLevel,
    ClassLevel,
}

/// One pass of the adaptive loop. `l_miss` is the set in force during the
/// pass; `missing_classes` is what the exclusion check found after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub k_attr: u32,
    pub k_class: u32,
    pub l_miss: Vec<String>,
    pub flagged: usize,
    pub clean_rows: usize,
    pub verdict: Verdict,
    pub missing_classes: Vec<String>,
}

impl IterationRecord {
    pub(super) fn new(
        state: &VoteState,
        flagged: &DetectionSet,
        clean_rows: usize,
        status: &ExclusionStatus,
    ) -> Self {
        let (verdict, missing_classes) = match status {
            ExclusionStatus::None => (Verdict::None, Vec::new()),
            ExclusionStatus::AttributeLevel => (Verdict::AttributeLevel, Vec::new()),
            ExclusionStatus::ClassLevel(m) => (Verdict::ClassLevel, m.iter().cloned().collect()),
        };
        IterationRecord {
            iteration: state.iteration,
            k_attr: state.k_attr,
            k_class: state.k_class,
            l_miss: state.l_miss.iter().cloned().collect(),
            flagged: flagged.len(),
            clean_rows,
            verdict,
            missing_classes,
        }
    }
}

/// One JSON object per line.
pub fn write_trace_jsonl<W: Write>(trace: &[IterationRecord], mut writer: W) -> Result<()> {
    for rec in trace {
        let line = serde_json::to_string(rec).expect("trace records serialize");
        writeln!(writer, "{line}").map_err(|e| Error::io("<trace>", e))?;
    }
    writer.flush().map_err(|e| Error::io("<trace>", e))
}

pub fn write_trace_jsonl_file(trace: &[IterationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_jsonl(trace, std::io::BufWriter::new(file))
}

pub fn read_trace_jsonl<R: Read>(reader: R) -> Result<Vec<IterationRecord>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line.map_err(|e| Error::io("<trace>", e))?;
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
