use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::pipeline::{
    adaptive, detect, evaluate, mean_std, prepare, record, Experiment, ExperimentRecord, Prepped,
    Variant,
};
use super::{detection_metrics, DetectionReport};
use crate::error::{Error, Result, StageExt};
use crate::inject::{inject, InjectionPlan};
use crate::par::Execution;
use crate::seed;
use crate::table::build_encoding;
use crate::vae::{generate_with, integrate, train_vae, AugmentConfig};
use crate::vote::{min_k, tally_with};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: u32,
    #[serde(flatten)]
    pub report: DetectionReport,
}

/// Fixed-k single-pass voting over errors injected into the whole table,
/// one row per threshold in ascending order.
pub fn sweep_k(exp: &Experiment, k_range: Option<&[u32]>) -> Result<Vec<KSweepRow>> {
    exp.plan.validate()?;
    exp.curate.validate()?;
    let plan = InjectionPlan {
        seed: seed::derive(seed::derive(exp.harness.seed, 2), exp.plan.seed),
        ..exp.plan.clone()
    };
    let (dirty, mask) = inject(&exp.clean, &plan).stage("inject")?;
    let sets = detect(&dirty, &exp.curate.detectors).stage("detect")?;
    let m = sets.len() as u32;
    let mut ks: Vec<u32> = match k_range {
        Some(ks) => ks.to_vec(),
        None => (1..=m).collect(),
    };
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > m) {
        return Err(Error::Config(format!(
            "k = {bad} is outside [1, {m}] for {m} detectors"
        )));
    }
    ks.sort_unstable();
    ks.dedup();
    let counter = tally_with(&sets, exp.harness.execution);
    Ok(exp.harness.execution.map(&ks, |&k| KSweepRow {
        k,
        report: detection_metrics(&min_k(&counter, k).cells, &mask),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugSweepRow {
    pub n_aug: usize,
    pub metric_name: String,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub time_mean: f64,
    pub time_std: f64,
    pub runs: usize,
}

/// One curation run per augmentation size. Within a repeat detection, voting
/// and VAE training happen once; each size uses a prefix of one generated stream.
pub fn sweep_augmentation(
    exp: &Experiment,
    sizes: &[usize],
) -> Result<(Vec<AugSweepRow>, Vec<ExperimentRecord>)> {
    exp.validate()?;
    if sizes.is_empty() {
        return Err(Error::Config("augmentation sweep needs at least one size".into()));
    }
    let h = &exp.harness;
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let shared: Vec<_> = h
        .execution
        .map_range(h.repeats, |r| -> Result<_> {
            let prep = prepare(exp, h.repeat_seed(r), true)?;
            let start = Instant::now();
            let outcome = adaptive(&prep, exp)?;
            let generated = if largest == 0 {
                prep.dirty.empty_like()
            } else {
                let cfg = AugmentConfig {
                    seed: seed::derive(seed::derive(prep.seed, 3), exp.curate.augment.seed),
                    ..exp.curate.augment
                };
                let schema = build_encoding(&outcome.clean).stage("augment")?;
                let (model, _) = train_vae(&outcome.clean, &schema, &cfg).stage("augment")?;
                generate_with(&model, largest, seed::derive(prep.seed, 4), Execution::Sequential)
                    .stage("augment")?
            };
            let seconds = prep.detect_seconds + start.elapsed().as_secs_f64();
            Ok((prep, outcome, generated, seconds))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..h.repeats)
        .flat_map(|r| sizes.iter().map(move |&n| (r, n)))
        .collect();
    let records: Vec<ExperimentRecord> = h
        .execution
        .map(&cells, |&(r, n)| -> Result<_> {
            let (prep, outcome, generated, seconds) = &shared[r];
            let aug = generated.select_rows(&(0..n).collect::<Vec<_>>());
            let final_ = integrate(&prep.dirty, &aug).stage("integrate")?;
            let p = Prepped {
                id: Variant::Curate.id(),
                train: final_.data,
                prep_seconds: *seconds,
                detection: Some(detection_metrics(&outcome.flagged.cells, &prep.mask)),
                clean_rows: Some(outcome.clean_rows.len()),
                n_aug: n,
                config: serde_json::json!({ "n_aug": n }),
            };
            record(prep, r, p, exp)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let rows = sizes
        .iter()
        .map(|&n| {
            let mine: Vec<&ExperimentRecord> = records.iter().filter(|r| r.n_aug == n).collect();
            let metric: Vec<f64> = mine.iter().map(|r| r.metric).collect();
            let time: Vec<f64> = mine.iter().map(|r| r.train_time_seconds).collect();
            let (metric_mean, metric_std) = mean_std(&metric);
            let (time_mean, time_std) = mean_std(&time);
            AugSweepRow {
                n_aug: n,
                metric_name: mine.first().map(|r| r.metric_name.clone()).unwrap_or_default(),
                metric_mean,
                metric_std,
                time_mean,
                time_std,
                runs: mine.len(),
            }
        })
        .collect();
    Ok((rows, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateRow {
    pub gamma: f64,
    pub metric_name: String,
    pub dirty_mean: f64,
    pub dirty_std: f64,
    pub curate_mean: f64,
    pub curate_std: f64,
    pub std_impute_mean: f64,
    pub std_impute_std: f64,
}

/// The dirty, curate and imputation variants at each error rate, one row per rate.
pub fn sweep_error_rate(
    exp: &Experiment,
    gammas: &[f64],
) -> Result<(Vec<ErrorRateRow>, Vec<ExperimentRecord>)> {
    if gammas.is_empty() {
        return Err(Error::Config("error-rate sweep needs at least one gamma".into()));
    }
    let variants = [Variant::Dirty, Variant::Curate, Variant::StdImpute];
    let mut rows = Vec::with_capacity(gammas.len());
    let mut records = Vec::new();
    for &gamma in gammas {
        let mut at = exp.clone();
        at.plan.gamma = gamma;
        at.harness.variants = variants.to_vec();
        let report = evaluate(&at)?;
        let stat = |v: Variant| {
            report
                .row(&v.id())
                .map(|r| (r.metric_mean.unwrap_or(f64::NAN), r.metric_std.unwrap_or(f64::NAN)))
                .unwrap_or((f64::NAN, f64::NAN))
        };
        let (dirty_mean, dirty_std) = stat(Variant::Dirty);
        let (curate_mean, curate_std) = stat(Variant::Curate);
        let (std_impute_mean, std_impute_std) = stat(Variant::StdImpute);
        rows.push(ErrorRateRow {
            gamma,
            metric_name: report.summary[0].metric_name.clone(),
            dirty_mean,
            dirty_std,
            curate_mean,
            curate_std,
            std_impute_mean,
            std_impute_std,
        });
        records.extend(report.records);
    }
    Ok((rows, records))
}
