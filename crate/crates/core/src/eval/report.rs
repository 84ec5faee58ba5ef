use std::io::Write;

use super::{AugSweepRow, ErrorRateRow, ExperimentRecord, KSweepRow, SummaryRow};
use crate::error::{Error, Result};
use crate::nn::EpochLoss;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn wrap(e: csv::Error) -> Error {
    Error::io("<report>", std::io::Error::other(e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<report>", e))
}

/// Per-run results without wall-clock columns, so reruns compare byte for byte.
pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "pipeline_id", "repeat", "seed", "gamma", "n_aug", "metric_name", "metric",
        "train_rows", "dropped_rows", "clean_rows", "precision", "recall", "f1", "tp", "fp", "fn",
    ])
    .map_err(wrap)?;
    for r in records {
        let d = r.detection;
        w.write_record([
            r.pipeline_id.clone(),
            r.repeat.to_string(),
            r.seed.to_string(),
            r.gamma.to_string(),
            r.n_aug.to_string(),
            r.metric_name.clone(),
            r.metric.to_string(),
            r.train_rows.to_string(),
            r.dropped_rows.to_string(),
            opt(r.clean_rows),
            opt(d.map(|d| d.precision)),
            opt(d.map(|d| d.recall)),
            opt(d.map(|d| d.f1)),
            opt(d.map(|d| d.tp)),
            opt(d.map(|d| d.fp)),
            opt(d.map(|d| d.fn_)),
        ])
        .map_err(wrap)?;
    }
    finish(w)
}

/// Wall-clock columns of each run.
pub fn write_timing_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["pipeline_id", "repeat", "n_aug", "gamma", "prep_seconds", "fit_seconds", "train_time_seconds"])
        .map_err(wrap)?;
    for r in records {
        w.write_record([
            r.pipeline_id.clone(),
            r.repeat.to_string(),
            r.n_aug.to_string(),
            r.gamma.to_string(),
            r.prep_seconds.to_string(),
            r.fit_seconds.to_string(),
            r.train_time_seconds.to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["pipeline_id", "metric_name", "metric_mean", "metric_std", "time_mean", "time_std", "runs"])
        .map_err(wrap)?;
    for r in rows {
        w.write_record([
            r.pipeline_id.clone(),
            r.metric_name.clone(),
            opt(r.metric_mean),
            opt(r.metric_std),
            r.time_mean.to_string(),
            r.time_std.to_string(),
            r.runs.to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w)
}

pub fn write_sweep_k_csv<W: Write>(rows: &[KSweepRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["k", "precision", "recall", "f1", "tp", "fp", "fn"])
        .map_err(wrap)?;
    for r in rows {
        let d = &r.report;
        w.write_record([
            r.k.to_string(),
            d.precision.to_string(),
            d.recall.to_string(),
            d.f1.to_string(),
            d.tp.to_string(),
            d.fp.to_string(),
            d.fn_.to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w)
}

pub fn write_sweep_aug_csv<W: Write>(rows: &[AugSweepRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["n_aug", "metric_name", "metric_mean", "metric_std", "time_mean", "time_std", "runs"])
        .map_err(wrap)?;
    for r in rows {
        w.write_record([
            r.n_aug.to_string(),
            r.metric_name.clone(),
            r.metric_mean.to_string(),
            r.metric_std.to_string(),
            r.time_mean.to_string(),
            r.time_std.to_string(),
            r.runs.to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w)
}

pub fn write_error_rate_csv<W: Write>(rows: &[ErrorRateRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "gamma", "metric_name", "dirty_mean", "dirty_std", "curate_mean", "curate_std",
        "std_impute_mean", "std_impute_std",
    ])
    .map_err(wrap)?;
    for r in rows {
        w.write_record([
            r.gamma.to_string(),
            r.metric_name.clone(),
            r.dirty_mean.to_string(),
            r.dirty_std.to_string(),
            r.curate_mean.to_string(),
            r.curate_std.to_string(),
            r.std_impute_mean.to_string(),
            r.std_impute_std.to_string(),
        ])
        .map_err(wrap)?;
    }
    finish(w)
}

/// Learning curve `epoch,train,val`.
pub fn write_curve_csv<W: Write>(curve: &[EpochLoss], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["epoch", "train", "val"]).map_err(wrap)?;
    for e in curve {
        w.write_record([e.epoch.to_string(), e.train.to_string(), opt(e.val)])
            .map_err(wrap)?;
    }
    finish(w)
}
