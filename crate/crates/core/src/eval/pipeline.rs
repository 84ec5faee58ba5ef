use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::downstream::{downstream_eval, Downstream, ModelConfig};
use super::{detection_metrics, DetectionReport};
use crate::detect::{default_registry, run_all_with, DetectionSet, DetectorSpec};
use crate::error::{Error, Result, StageExt};
use crate::inject::{inject, ErrorMask, InjectionPlan};
use crate::nn::EpochLoss;
use crate::par::Execution;
use crate::seed;
use crate::table::{build_encoding, split, Cell, CellRef, ColumnKind, Dataset};
use crate::vae::{generate_with, integrate, train_vae, AugmentConfig};
use crate::vote::{adaptive_detect, clean_rows, min_k, tally, AdaptiveOutcome, VoteParams};

/// Row id of the summed baseline training times in summaries.
pub const COMBINED_ID: &str = "combined";
/// Replacement for flagged or missing categorical cells in the imputation baseline.
pub const DUMMY_CATEGORY: &str = "dummy";

/// A way of preparing the training table before the downstream model sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    /// Injected training data, incomplete rows dropped.
    Dirty,
    /// Training split without injected errors.
    Clean,
    /// Adaptive voting, VAE augmentation of the clean fraction, integration.
    Curate,
    /// Single-pass Min-K voting at a fixed threshold, flagged rows dropped.
    MinK(u32),
    /// Ensemble detection, then mean imputation of numeric cells and a dummy
    /// category for categorical cells.
    StdImpute,
}

impl Variant {
    pub fn id(&self) -> String {
        self.to_string()
    }

    /// Whether the variant is a competing cleaning baseline (counted in the combined time row).
    pub fn is_baseline(&self) -> bool {
        matches!(self, Variant::MinK(_) | Variant::StdImpute)
    }

    fn needs_detection(&self) -> bool {
        !matches!(self, Variant::Dirty | Variant::Clean)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Dirty => f.write_str("dirty"),
            Variant::Clean => f.write_str("clean"),
            Variant::Curate => f.write_str("curate"),
            Variant::MinK(k) => write!(f, "mink_k={k}"),
            Variant::StdImpute => f.write_str("std_impute"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "dirty" => Ok(Variant::Dirty),
            "clean" => Ok(Variant::Clean),
            "curate" => Ok(Variant::Curate),
            "std_impute" => Ok(Variant::StdImpute),
            _ => s
                .strip_prefix("mink_k=")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|&k| k >= 1)
                .map(Variant::MinK)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown variant '{s}' (expected dirty, clean, curate, std_impute or mink_k=K)"
                    ))
                }),
        }
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

/// Detection, voting and augmentation settings of the curation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurateConfig {
    pub detectors: Vec<DetectorSpec>,
    pub voting: VoteParams,
    pub augment: AugmentConfig,
}

impl Default for CurateConfig {
    fn default() -> Self {
        CurateConfig {
            detectors: default_registry(),
            voting: VoteParams::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl CurateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(Error::Config("the detector registry is empty".into()));
        }
        for d in &self.detectors {
            d.validate()?;
        }
        self.voting.validate()?;
        self.augment.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub seed: u64,
    pub repeats: usize,
    pub test_fraction: f64,
    pub model: ModelConfig,
    pub variants: Vec<Variant>,
    /// Thresholds for the k sweep; every threshold from 1 to m when absent.
    pub k_range: Option<Vec<u32>>,
    pub aug_sizes: Vec<usize>,
    pub gammas: Vec<f64>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 0,
            repeats: 3,
            test_fraction: 0.2,
            model: ModelConfig::default(),
            variants: vec![
                Variant::Clean,
                Variant::Dirty,
                Variant::Curate,
                Variant::StdImpute,
                Variant::MinK(2),
                Variant::MinK(3),
            ],
            k_range: None,
            aug_sizes: vec![0, 500, 1000, 2000],
            gammas: vec![0.1, 0.2, 0.3, 0.4],
            execution: Execution::default(),
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if let Some(ks) = &self.k_range {
            if ks.is_empty() || ks.contains(&0) {
                return Err(Error::Config("k_range must list thresholds of at least 1".into()));
            }
        }
        if self.gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return Err(Error::Config("every sweep gamma must lie in (0, 1)".into()));
        }
        self.model.validate()
    }

    /// Seed of repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        seed::derive(self.seed, r as u64)
    }
}

/// Everything a harness run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub clean: Dataset,
    pub plan: InjectionPlan,
    pub curate: CurateConfig,
    pub harness: HarnessConfig,
}

impl Experiment {
    pub fn new(clean: Dataset, plan: InjectionPlan) -> Self {
        Experiment {
            clean,
            plan,
            curate: CurateConfig::default(),
            harness: HarnessConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clean.label_col().is_none() {
            return Err(Error::Config(
                "evaluation needs a labelled dataset (set data.label)".into(),
            ));
        }
        self.plan.validate()?;
        self.curate.validate()?;
        self.harness.validate()
    }
}

/// One downstream run of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub pipeline_id: String,
    pub repeat: usize,
    pub seed: u64,
    pub gamma: f64,
    pub n_aug: usize,
    pub metric_name: String,
    pub metric: f64,
    pub train_rows: usize,
    pub dropped_rows: usize,
    /// Rows of the clean fraction, for variants that extract one.
    pub clean_rows: Option<usize>,
    pub detection: Option<DetectionReport>,
    /// Detection, voting, augmentation or imputation time.
    pub prep_seconds: f64,
    /// Downstream model fitting time.
    pub fit_seconds: f64,
    pub train_time_seconds: f64,
    pub curve: Vec<EpochLoss>,
    pub config: serde_json::Value,
}

impl ExperimentRecord {
    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        ExperimentRecord {
            prep_seconds: 0.0,
            fit_seconds: 0.0,
            train_time_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Mean and standard deviation of one pipeline across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub pipeline_id: String,
    pub metric_name: String,
    pub metric_mean: Option<f64>,
    pub metric_std: Option<f64>,
    pub time_mean: f64,
    pub time_std: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
}

impl EvaluationReport {
    pub fn row(&self, pipeline_id: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.pipeline_id == pipeline_id)
    }

    pub fn mean_metric(&self, variant: Variant) -> Option<f64> {
        self.row(&variant.id()).and_then(|r| r.metric_mean)
    }
}

/// Shared state of one repeat: the split, the injected training table and,
/// if any variant needs it, the detector outputs.
pub(crate) struct Prepared {
    pub seed: u64,
    pub train_clean: Dataset,
    pub test: Dataset,
    pub dirty: Dataset,
    pub mask: ErrorMask,
    pub detections: Option<Vec<DetectionSet>>,
    pub detect_seconds: f64,
}

pub(crate) fn prepare(
    exp: &Experiment,
    repeat_seed: u64,
    with_detection: bool,
) -> Result<Prepared> {
    let (train_clean, test) = split(
        &exp.clean,
        exp.harness.test_fraction,
        seed::derive(repeat_seed, 1),
    )
    .stage("split")?;
    let plan = InjectionPlan {
        seed: seed::derive(seed::derive(repeat_seed, 2), exp.plan.seed),
        ..exp.plan.clone()
    };
    let (dirty, mask) = inject(&train_clean, &plan).stage("inject")?;
    let (detections, detect_seconds) = if with_detection {
        let start = Instant::now();
        let sets = detect(&dirty, &exp.curate.detectors).stage("detect")?;
        (Some(sets), start.elapsed().as_secs_f64())
    } else {
        (None, 0.0)
    };
    Ok(Prepared {
        seed: repeat_seed,
        train_clean,
        test,
        dirty,
        mask,
        detections,
        detect_seconds,
    })
}

pub(crate) fn detect(ds: &Dataset, specs: &[DetectorSpec]) -> Result<Vec<DetectionSet>> {
    for spec in specs {
        spec.validate()?;
    }
    // Cells of a sweep already run in parallel; detectors stay sequential here.
    Ok(run_all_with(ds, specs, Execution::Sequential))
}

pub(crate) fn adaptive(prep: &Prepared, exp: &Experiment) -> Result<AdaptiveOutcome> {
    let sets = prep
        .detections
        .as_ref()
        .expect("prepared with detection");
    adaptive_detect(&prep.dirty, sets, &exp.curate.voting).stage("vote")
}

/// Ensemble-flagged and missing cells replaced by column means or a dummy category.
pub(crate) fn impute(dirty: &Dataset, flagged: &DetectionSet) -> Result<Dataset> {
    let replace = |at: CellRef| flagged.contains(&at) || dirty.cell(at).is_missing();
    let mut out = dirty.clone();
    for col in dirty.feature_cols() {
        let fill = match dirty.column(col).kind {
            ColumnKind::Numeric => {
                let kept: Vec<f64> = (0..dirty.n_rows())
                    .filter(|&r| !replace(CellRef::new(r, col)))
                    .filter_map(|r| dirty.row(r)[col].as_number())
                    .collect();
                let mean = if kept.is_empty() {
                    0.0
                } else {
                    kept.iter().sum::<f64>() / kept.len() as f64
                };
                Cell::Number(mean)
            }
            ColumnKind::Categorical => Cell::Text(DUMMY_CATEGORY.into()),
        };
        for r in 0..dirty.n_rows() {
            let at = CellRef::new(r, col);
            if replace(at) {
                out.set_cell(at, fill.clone())?;
            }
        }
    }
    Ok(out)
}

pub(crate) struct Prepped {
    pub id: String,
    pub train: Dataset,
    pub prep_seconds: f64,
    pub detection: Option<DetectionReport>,
    pub clean_rows: Option<usize>,
    pub n_aug: usize,
    pub config: serde_json::Value,
}

pub(crate) fn prepare_variant(prep: &Prepared, variant: Variant, exp: &Experiment) -> Result<Prepped> {
    match variant {
        Variant::Clean => Ok(Prepped {
            id: variant.id(),
            train: prep.train_clean.clone(),
            prep_seconds: 0.0,
            detection: None,
            clean_rows: None,
            n_aug: 0,
            config: serde_json::Value::Null,
        }),
        Variant::Dirty => Ok(Prepped {
            id: variant.id(),
            train: prep.dirty.clone(),
            prep_seconds: 0.0,
            detection: None,
            clean_rows: None,
            n_aug: 0,
            config: snapshot(&exp.plan),
        }),
        Variant::MinK(k) => {
            let start = Instant::now();
            let sets = prep.detections.as_ref().expect("prepared with detection");
            let flagged = min_k(&tally(sets), k);
            let rows = clean_rows(&prep.dirty, &flagged);
            if rows.is_empty() {
                return Err(Error::Evaluation(format!(
                    "min-k at k={k} leaves no clean rows"
                )));
            }
            Ok(Prepped {
            id: variant.id(),
                train: prep.dirty.select_rows(&rows),
                prep_seconds: prep.detect_seconds + start.elapsed().as_secs_f64(),
                detection: Some(detection_metrics(&flagged.cells, &prep.mask)),
                clean_rows: Some(rows.len()),
                n_aug: 0,
                config: serde_json::json!({ "k": k }),
            })
        }
        Variant::StdImpute => {
            let start = Instant::now();
            let outcome = adaptive(prep, exp)?;
            let train = impute(&prep.dirty, &outcome.flagged).stage("impute")?;
            Ok(Prepped {
            id: variant.id(),
                train,
                prep_seconds: prep.detect_seconds + start.elapsed().as_secs_f64(),
                detection: Some(detection_metrics(&outcome.flagged.cells, &prep.mask)),
                clean_rows: Some(outcome.clean_rows.len()),
                n_aug: 0,
                config: snapshot(&exp.curate.voting),
            })
        }
        Variant::Curate => {
            let start = Instant::now();
            let outcome = adaptive(prep, exp)?;
            let n_aug = exp.curate.augment.n_aug;
            let aug = if n_aug == 0 {
                prep.dirty.empty_like()
            } else {
                let cfg = AugmentConfig {
                    seed: seed::derive(seed::derive(prep.seed, 3), exp.curate.augment.seed),
                    ..exp.curate.augment
                };
                let schema = build_encoding(&outcome.clean).stage("augment")?;
                let (model, _) = train_vae(&outcome.clean, &schema, &cfg).stage("augment")?;
                generate_with(&model, n_aug, seed::derive(prep.seed, 4), Execution::Sequential)
                    .stage("augment")?
            };
            let final_ = integrate(&prep.dirty, &aug).stage("integrate")?;
            Ok(Prepped {
            id: variant.id(),
                train: final_.data,
                prep_seconds: prep.detect_seconds + start.elapsed().as_secs_f64(),
                detection: Some(detection_metrics(&outcome.flagged.cells, &prep.mask)),
                clean_rows: Some(outcome.clean_rows.len()),
                n_aug,
                config: snapshot(&exp.curate),
            })
        }
    }
}

fn snapshot<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

pub(crate) fn record(
    prep: &Prepared,
    repeat: usize,
    p: Prepped,
    exp: &Experiment,
) -> Result<ExperimentRecord> {
    let Downstream {
        metric,
        metric_name,
        train_seconds,
        train_rows,
        dropped_rows,
        curve,
    } = downstream_eval(
        &p.train,
        &prep.test,
        &exp.harness.model,
        seed::derive(prep.seed, 5),
    )
    .stage("downstream")?;
    Ok(ExperimentRecord {
        pipeline_id: p.id,
        repeat,
        seed: prep.seed,
        gamma: exp.plan.gamma,
        n_aug: p.n_aug,
        metric_name: metric_name.into(),
        metric,
        train_rows,
        dropped_rows,
        clean_rows: p.clean_rows,
        detection: p.detection,
        prep_seconds: p.prep_seconds,
        fit_seconds: train_seconds,
        train_time_seconds: p.prep_seconds + train_seconds,
        curve,
        config: p.config,
    })
}

pub(crate) fn run_variant(
    prep: &Prepared,
    repeat: usize,
    variant: Variant,
    exp: &Experiment,
) -> Result<ExperimentRecord> {
    let p = prepare_variant(prep, variant, exp)?;
    record(prep, repeat, p, exp)
}

/// Split, inject into the training split, apply `variant` and score the
/// downstream model on the untouched test split.
pub fn run_pipeline(exp: &Experiment, variant: Variant, seed: u64) -> Result<ExperimentRecord> {
    exp.validate()?;
    let prep = prepare(exp, seed, variant.needs_detection())?;
    run_variant(&prep, 0, variant, exp)
}

/// Runs every configured variant for every repeat.
pub fn evaluate(exp: &Experiment) -> Result<EvaluationReport> {
    exp.validate()?;
    let h = &exp.harness;
    if h.variants.is_empty() {
        return Err(Error::Config("no variants to evaluate".into()));
    }
    let with_detection = h.variants.iter().any(Variant::needs_detection);
    let preps: Vec<Prepared> = h
        .execution
        .map_range(h.repeats, |r| prepare(exp, h.repeat_seed(r), with_detection))
        .into_iter()
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, Variant)> = (0..h.repeats)
        .flat_map(|r| h.variants.iter().map(move |&v| (r, v)))
        .collect();
    let records: Vec<ExperimentRecord> = h
        .execution
        .map(&cells, |&(r, v)| run_variant(&preps[r], r, v, exp))
        .into_iter()
        .collect::<Result<_>>()?;
    let summary = summarize(&records, &h.variants);
    Ok(EvaluationReport { records, summary })
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Per-variant mean ± sample std over repeats, in `variants` order, followed by
/// the combined row summing baseline training times per repeat.
pub fn summarize(records: &[ExperimentRecord], variants: &[Variant]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let metric_name = records
        .first()
        .map(|r| r.metric_name.clone())
        .unwrap_or_default();
    for v in variants {
        let id = v.id();
        let mine: Vec<&ExperimentRecord> = records.iter().filter(|r| r.pipeline_id == id).collect();
        let (m, s) = mean_std(&mine.iter().map(|r| r.metric).collect::<Vec<_>>());
        let (tm, ts) = mean_std(&mine.iter().map(|r| r.train_time_seconds).collect::<Vec<_>>());
        rows.push(SummaryRow {
            pipeline_id: id,
            metric_name: metric_name.clone(),
            metric_mean: Some(m),
            metric_std: Some(s),
            time_mean: tm,
            time_std: ts,
            runs: mine.len(),
        });
    }
    let baselines: Vec<String> = variants
        .iter()
        .filter(|v| v.is_baseline())
        .map(Variant::id)
        .collect();
    if !baselines.is_empty() {
        let mut per_repeat: BTreeMap<usize, f64> = BTreeMap::new();
        for r in records.iter().filter(|r| baselines.contains(&r.pipeline_id)) {
            *per_repeat.entry(r.repeat).or_default() += r.train_time_seconds;
        }
        let (tm, ts) = mean_std(&per_repeat.values().copied().collect::<Vec<_>>());
        rows.push(SummaryRow {
            pipeline_id: COMBINED_ID.into(),
            metric_name,
            metric_mean: None,
            metric_std: None,
            time_mean: tm,
            time_std: ts,
            runs: per_repeat.len(),
        });
    }
    rows
}
