//! Subcommand implementations. Each writes its artifacts under the output
//! directory and returns a short summary for the terminal.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use curate_core::detect::{read_detections_file, run_all_with, write_detections_file, DetectionSet, Detector, DetectorSpec};
use curate_core::eval::{
    evaluate, sweep_augmentation, sweep_error_rate, sweep_k, write_curve_csv, write_error_rate_csv,
    write_records_csv, write_summary_csv, write_sweep_aug_csv, write_sweep_k_csv, write_timing_csv,
    EvaluationReport, SummaryRow, COMBINED_ID,
};
use curate_core::inject::{inject, read_mask_file, restore, write_mask_file, ErrorMask};
use curate_core::table::{build_encoding, load_csv, write_csv, write_csv_file, Dataset};
use curate_core::vae::{generate_with, integrate, train_vae, write_provenance_csv, write_vae, write_vae_history_csv};
use curate_core::vote::{adaptive_detect, write_trace_jsonl_file, AdaptiveOutcome};
use curate_core::{seed, Error, Result};

use crate::config::EngineConfig;

const GENERATE_STREAM: u64 = 103;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Registry plus any externally produced detection sets.
fn registry(cfg: &EngineConfig, external: Option<&Path>) -> Result<Vec<DetectorSpec>> {
    let mut specs = cfg.registry();
    if let Some(path) = external {
        for set in read_detections_file(path)? {
            if specs.iter().any(|s| s.id() == set.detector_id) {
                return Err(Error::Config(format!(
                    "external detector id '{}' clashes with a registered detector",
                    set.detector_id
                )));
            }
            specs.push(DetectorSpec::external(set));
        }
    }
    if specs.is_empty() {
        return Err(Error::Config("the detector registry is empty".into()));
    }
    Ok(specs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectSummary {
    pub detectors: usize,
    pub k_attr: u32,
    pub k_class: u32,
    pub iterations: usize,
    pub clean_rows: usize,
    pub total_rows: usize,
    pub flagged_cells: usize,
}

impl DetectSummary {
    fn new(outcome: &AdaptiveOutcome, m: usize, total_rows: usize) -> Self {
        DetectSummary {
            detectors: m,
            k_attr: outcome.state.k_attr,
            k_class: outcome.state.k_class,
            iterations: outcome.state.iteration,
            clean_rows: outcome.clean.n_rows(),
            total_rows,
            flagged_cells: outcome.flagged.len(),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "detectors: {}\nk_attr: {}\nk_class: {}\niterations: {}\nflagged cells: {}\nclean rows: {} / {}\n",
            self.detectors,
            self.k_attr,
            self.k_class,
            self.iterations,
            self.flagged_cells,
            self.clean_rows,
            self.total_rows
        )
    }
}

/// Runs detection and adaptive voting, writing per-detector sets, the
/// ensemble set and the iteration trace. The trace is written even when the
/// loop hits its iteration cap.
fn detect_into(
    cfg: &EngineConfig,
    ds: &Dataset,
    external: Option<&Path>,
    out: &Path,
) -> Result<(AdaptiveOutcome, DetectSummary)> {
    let specs = registry(cfg, external)?;
    let sets = run_all_with(ds, &specs, cfg.harness.execution);
    for set in &sets {
        write_detections_file([set], out.join(format!("detector_{}.csv", set.detector_id)))?;
    }
    let trace_path = out.join("trace.jsonl");
    let outcome = match adaptive_detect(ds, &sets, &cfg.voting) {
        Ok(o) => o,
        Err(Error::IterationCap { cap, trace }) => {
            write_trace_jsonl_file(&trace, &trace_path)?;
            return Err(Error::IterationCap { cap, trace }.in_stage("vote"));
        }
        Err(e) => return Err(e.in_stage("vote")),
    };
    write_trace_jsonl_file(&outcome.state.trace, &trace_path)?;
    let ensemble = DetectionSet::from_cells("ensemble", outcome.flagged.cells.iter().copied());
    write_detections_file([&ensemble], out.join("ensemble.csv"))?;
    write_csv_file(&outcome.clean, out.join("clean.csv"))?;
    let summary = DetectSummary::new(&outcome, sets.len(), ds.n_rows());
    Ok((outcome, summary))
}

pub fn detect(cfg: &EngineConfig, external: Option<&Path>) -> Result<DetectSummary> {
    cfg.validate()?;
    let ds = cfg.load_data().map_err(|e| e.in_stage("load"))?;
    ensure_dir(&cfg.output_dir)?;
    detect_into(cfg, &ds, external, &cfg.output_dir).map(|(_, s)| s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurateSummary {
    pub detect: DetectSummary,
    pub synthetic_rows: usize,
    pub final_rows: usize,
}

impl CurateSummary {
    pub fn render(&self) -> String {
        format!(
            "{}synthetic rows: {}\nfinal rows: {}\n",
            self.detect.render(),
            self.synthetic_rows,
            self.final_rows
        )
    }
}

/// Detection, voting, VAE augmentation and integration.
pub fn curate(cfg: &EngineConfig, external: Option<&Path>) -> Result<CurateSummary> {
    cfg.validate()?;
    let ds = cfg.load_data().map_err(|e| e.in_stage("load"))?;
    let out = &cfg.output_dir;
    ensure_dir(out)?;
    let (outcome, detect) = detect_into(cfg, &ds, external, out)?;

    let acfg = cfg.augment_config();
    let aug = if acfg.n_aug == 0 {
        ds.empty_like()
    } else {
        let schema = build_encoding(&outcome.clean).map_err(|e| e.in_stage("augment"))?;
        let (model, history) =
            train_vae(&outcome.clean, &schema, &acfg).map_err(|e| e.in_stage("augment"))?;
        write_with(&out.join("model.json"), |w| write_vae(&model, w))?;
        write_with(&out.join("vae_history.csv"), |w| write_vae_history_csv(&history, w))?;
        let gen_seed = seed::derive(cfg.seed, GENERATE_STREAM);
        generate_with(&model, acfg.n_aug, gen_seed, cfg.harness.execution)
            .map_err(|e| e.in_stage("augment"))?
    };
    write_csv_file(&aug, out.join("augmented.csv"))?;
    let merged = integrate(&ds, &aug).map_err(|e| e.in_stage("integrate"))?;
    write_csv_file(&merged.data, out.join("final.csv"))?;
    write_with(&out.join("provenance.csv"), |w| write_provenance_csv(&merged.provenance, w))?;
    Ok(CurateSummary {
        detect,
        synthetic_rows: merged.synthetic_rows(),
        final_rows: merged.data.n_rows(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectSummary {
    pub injected: usize,
    pub realized_rate: f64,
    pub restore_verified: Option<bool>,
}

impl InjectSummary {
    pub fn render(&self) -> String {
        let mut s = format!(
            "injected cells: {}\nrealized rate: {:.6}\n",
            self.injected, self.realized_rate
        );
        if let Some(ok) = self.restore_verified {
            let _ = writeln!(s, "{}", if ok { "OK" } else { "MISMATCH" });
        }
        s
    }
}

fn csv_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    Ok(buf)
}

/// Corrupts the input table; optionally reloads both artifacts from disk and
/// checks that restoring reproduces the input byte for byte.
pub fn inject_cmd(cfg: &EngineConfig, verify_restore: bool) -> Result<InjectSummary> {
    cfg.validate()?;
    let clean = cfg.load_data().map_err(|e| e.in_stage("load"))?;
    let out = &cfg.output_dir;
    ensure_dir(out)?;
    let plan = cfg.plan()?;
    let (dirty, mask) = inject(&clean, &plan).map_err(|e| e.in_stage("inject"))?;
    let dirty_path = out.join("dirty.csv");
    let mask_path = out.join("mask.csv");
    write_csv_file(&dirty, &dirty_path)?;
    write_mask_file(&mask, &mask_path)?;

    let restore_verified = if verify_restore {
        let reloaded = load_csv(&dirty_path, &reload_options(cfg, &clean))?;
        let mask: ErrorMask = read_mask_file(&mask_path, &reloaded)?;
        let restored = restore(&reloaded, &mask)?;
        Some(csv_bytes(&restored)? == csv_bytes(&clean)?)
    } else {
        None
    };
    Ok(InjectSummary {
        injected: mask.len(),
        realized_rate: curate_core::inject::realized_rate(&mask, &clean),
        restore_verified,
    })
}

/// Load options that pin every column kind to that of `like`, so a column
/// whose numbers were all replaced by text still reads back the same way.
fn reload_options(cfg: &EngineConfig, like: &Dataset) -> curate_core::table::LoadOptions {
    let mut opts = cfg.load_options();
    opts.task = Some(like.task());
    for c in like.columns() {
        opts.schema_hint.insert(c.name.clone(), c.kind);
    }
    opts
}

fn experiment(cfg: &EngineConfig) -> Result<curate_core::eval::Experiment> {
    cfg.validate_for_evaluation()?;
    let clean = cfg.load_data().map_err(|e| e.in_stage("load"))?;
    let exp = cfg.experiment(clean)?;
    exp.validate()?;
    Ok(exp)
}

fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<14} {:>10} {:>10} {:>12} {:>12} {:>5}\n",
        "pipeline", "metric", "std", "time_s", "time_std", "runs"
    );
    let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14} {:>10} {:>10} {:>12.4} {:>12.4} {:>5}",
            r.pipeline_id,
            num(r.metric_mean),
            num(r.metric_std),
            r.time_mean,
            r.time_std,
            r.runs
        );
    }
    s
}

fn write_report(report: &EvaluationReport, out: &Path) -> Result<()> {
    write_with(&out.join("results.csv"), |w| write_records_csv(&report.records, w))?;
    write_with(&out.join("timing.csv"), |w| write_timing_csv(&report.records, w))?;
    write_with(&out.join("summary.csv"), |w| write_summary_csv(&report.summary, w))?;
    write_json(report, &out.join("results.json"))?;
    let curves = out.join("curves");
    ensure_dir(&curves)?;
    for rec in &report.records {
        let name = format!("{}_r{}.csv", rec.pipeline_id.replace('=', ""), rec.repeat);
        write_with(&curves.join(name), |w| write_curve_csv(&rec.curve, w))?;
    }
    let text = summary_table(&report.summary);
    fs::write(out.join("summary.txt"), &text).map_err(|e| Error::io(out.join("summary.txt"), e))
}

/// Runs every configured variant over the configured repeats.
pub fn evaluate_cmd(cfg: &EngineConfig) -> Result<(EvaluationReport, String)> {
    let exp = experiment(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let report = evaluate(&exp)?;
    write_report(&report, &cfg.output_dir)?;
    let mut text = summary_table(&report.summary);
    if report.row(COMBINED_ID).is_none() {
        text.push_str("(no baseline variants configured, so no combined timing row)\n");
    }
    Ok((report, text))
}

pub fn sweep_k_cmd(cfg: &EngineConfig) -> Result<String> {
    let exp = experiment(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let rows = sweep_k(&exp, cfg.harness.k_range.as_deref())?;
    write_with(&cfg.output_dir.join("sweep_k.csv"), |w| write_sweep_k_csv(&rows, w))?;
    let mut s = format!("{:>3} {:>10} {:>10} {:>10}\n", "k", "precision", "recall", "f1");
    for r in &rows {
        let _ = writeln!(
            s,
            "{:>3} {:>10.4} {:>10.4} {:>10.4}",
            r.k, r.report.precision, r.report.recall, r.report.f1
        );
    }
    Ok(s)
}

pub fn sweep_aug_cmd(cfg: &EngineConfig, sizes: Option<&[usize]>) -> Result<String> {
    let exp = experiment(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let sizes = sizes.unwrap_or(&cfg.harness.aug_sizes);
    let (rows, records) = sweep_augmentation(&exp, sizes)?;
    write_with(&cfg.output_dir.join("sweep_aug.csv"), |w| write_sweep_aug_csv(&rows, w))?;
    write_with(&cfg.output_dir.join("sweep_aug_records.csv"), |w| {
        write_records_csv(&records, w)
    })?;
    let mut s = format!("{:>7} {:>10} {:>10} {:>10}\n", "n_aug", "metric", "std", "time_s");
    for r in &rows {
        let _ = writeln!(
            s,
            "{:>7} {:>10.4} {:>10.4} {:>10.4}",
            r.n_aug, r.metric_mean, r.metric_std, r.time_mean
        );
    }
    Ok(s)
}

pub fn sweep_error_rate_cmd(cfg: &EngineConfig, gammas: Option<&[f64]>) -> Result<String> {
    let exp = experiment(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let gammas = gammas.unwrap_or(&cfg.harness.gammas);
    let (rows, records) = sweep_error_rate(&exp, gammas)?;
    write_with(&cfg.output_dir.join("sweep_error_rate.csv"), |w| {
        write_error_rate_csv(&rows, w)
    })?;
    write_with(&cfg.output_dir.join("sweep_error_rate_records.csv"), |w| {
        write_records_csv(&records, w)
    })?;
    let mut s = format!("{:>6} {:>10} {:>10} {:>10}\n", "gamma", "dirty", "curate", "std_impute");
    for r in &rows {
        let _ = writeln!(
            s,
            "{:>6.2} {:>10.4} {:>10.4} {:>10.4}",
            r.gamma, r.dirty_mean, r.curate_mean, r.std_impute_mean
        );
    }
    Ok(s)
}

/// Process exit code of a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) => 2,
        Error::Io { .. } | Error::Parse { .. } | Error::Schema(_) | Error::Encode { .. } => 3,
        Error::AugmentationInfeasible { .. } => 5,
        _ => 4,
    }
}
