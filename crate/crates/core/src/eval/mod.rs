//! Evaluation protocol: detection metrics, downstream model quality and
//! training time, pipeline variants and parameter sweeps.

mod downstream;
mod pipeline;
mod report;
mod sweep;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::inject::ErrorMask;
use crate::table::CellRef;

pub use downstream::{downstream_eval, macro_f1, Downstream, ModelConfig};
pub use pipeline::{
    evaluate, run_pipeline, summarize, CurateConfig, EvaluationReport, Experiment,
    ExperimentRecord, HarnessConfig, SummaryRow, Variant, COMBINED_ID,
};
pub use report::{
    write_curve_csv, write_error_rate_csv, write_records_csv, write_summary_csv,
    write_sweep_aug_csv, write_sweep_k_csv, write_timing_csv,
};
pub use sweep::{
    sweep_augmentation, sweep_error_rate, sweep_k, AugSweepRow, ErrorRateRow, KSweepRow,
};

/// Cell-level precision, recall and F1 of a flagged set against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl DetectionReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        // An empty denominator counts as perfect only when nothing was missed
        // on the other side, so flagged = truth = ∅ scores 1 everywhere.
        let precision = if tp + fp == 0 {
            if fn_ == 0 { 1.0 } else { 0.0 }
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            if fp == 0 { 1.0 } else { 0.0 }
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        DetectionReport {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

pub fn detection_metrics(flagged: &BTreeSet<CellRef>, truth: &ErrorMask) -> DetectionReport {
    let tp = flagged.iter().filter(|c| truth.entries.contains_key(c)).count();
    DetectionReport::from_counts(tp, flagged.len() - tp, truth.len() - tp)
}

#[cfg(test)]
mod tests;
