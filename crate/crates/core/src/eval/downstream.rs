use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{train, Activation, EpochLoss, Loss, Network, TrainConfig};
use crate::table::{build_encoding, classes, Dataset, Task};

/// Downstream MLP `[d, hidden.., out]` with ReLU hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![32, 16],
            epochs: 100,
            batch_size: 64,
            lr: 1e-3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(
                "model epochs, batch_size and hidden widths must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("model learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of training on one table and scoring on another.
#[derive(Debug, Clone, PartialEq)]
pub struct Downstream {
    /// Macro F1 for classification, mean squared error in label units for regression.
    pub metric: f64,
    pub metric_name: &'static str,
    pub train_seconds: f64,
    pub train_rows: usize,
    pub dropped_rows: usize,
    /// Per-epoch train loss and loss on the test table.
    pub curve: Vec<EpochLoss>,
}

/// Macro-averaged F1 over the union of true and predicted classes.
pub fn macro_f1(truth: &[String], predicted: &[String]) -> f64 {
    let labels: BTreeSet<&String> = truth.iter().chain(predicted).collect();
    if labels.is_empty() {
        return 1.0;
    }
    let mut counts: BTreeMap<&String, [usize; 3]> = BTreeMap::new();
    for (t, p) in truth.iter().zip(predicted) {
        if t == p {
            counts.entry(t).or_default()[0] += 1;
        } else {
            counts.entry(p).or_default()[1] += 1;
            counts.entry(t).or_default()[2] += 1;
        }
    }
    let total: f64 = labels
        .iter()
        .map(|l| {
            let [tp, fp, fn_] = counts.get(l).copied().unwrap_or_default();
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            }
        })
        .sum();
    total / labels.len() as f64
}

/// Trains the downstream MLP on the complete rows of `train` and scores it on `test`.
pub fn downstream_eval(
    train_ds: &Dataset,
    test: &Dataset,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<Downstream> {
    cfg.validate()?;
    if !train_ds.same_structure(test) {
        return Err(Error::Evaluation(
            "train and test tables have different columns".into(),
        ));
    }
    let label = train_ds.label_col().ok_or_else(|| {
        Error::Evaluation("downstream evaluation needs a label column".into())
    })?;
    let complete: Vec<usize> = (0..train_ds.n_rows())
        .filter(|&r| train_ds.is_complete_row(r))
        .collect();
    let dropped_rows = train_ds.n_rows() - complete.len();
    if dropped_rows > 0 {
        log::info!("dropping {dropped_rows} train rows with missing cells");
    }
    if complete.is_empty() {
        return Err(Error::Evaluation("no complete rows left to train on".into()));
    }
    if test.is_empty() {
        return Err(Error::Evaluation("empty test table".into()));
    }
    let usable = train_ds.select_rows(&complete);
    let mut schema = build_encoding(&usable)?;
    let task = usable.task();
    if task == Task::Classification {
        schema.extend_label_vocab(&classes(test)?);
    }
    let split_xy = |m: Array2<f64>| {
        let f = schema.feature_width();
        (m.slice(s![.., ..f]).to_owned(), m.slice(s![.., f..]).to_owned())
    };
    let (x, y) = split_xy(schema.encode_all(&usable)?);
    let (tx, ty) = split_xy(schema.encode_all(test)?);

    let (loss, output) = match task {
        Task::Classification => (Loss::CrossEntropy, Activation::Identity),
        _ => (Loss::Mse, Activation::Identity),
    };
    let mut dims = vec![x.ncols()];
    dims.extend(&cfg.hidden);
    dims.push(y.ncols());
    let mut net = Network::mlp(&dims, Activation::Relu, output, seed)?;
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        seed: crate::seed::derive(seed, 1),
    };
    let start = Instant::now();
    let curve = train(&mut net, &x, &y, &loss, &train_cfg, Some((&tx, &ty)))?;
    let train_seconds = start.elapsed().as_secs_f64();

    let pred = net.predict(&tx)?;
    let (metric, metric_name) = match task {
        Task::Classification => {
            let decode = |block: ndarray::ArrayView1<f64>| -> String {
                let v = block.to_vec();
                schema
                    .decode_label(&v)
                    .and_then(|c| c.as_text().map(str::to_string))
                    .unwrap_or_default()
            };
            let predicted: Vec<String> = pred.axis_iter(Axis(0)).map(decode).collect();
            let truth: Vec<String> = (0..test.n_rows())
                .map(|r| test.label_of(r).unwrap_or_default())
                .collect();
            (macro_f1(&truth, &predicted), "f1")
        }
        _ => {
            let range = schema
                .label()
                .map(|l| match l.encoding {
                    crate::table::FieldEncoding::Numeric { min, max } => (min, max),
                    _ => (0.0, 1.0),
                })
                .unwrap_or((0.0, 1.0));
            let (min, max) = range;
            let mse = pred
                .column(0)
                .iter()
                .zip(0..test.n_rows())
                .map(|(&p, r)| {
                    let predicted = if max > min { min + p * (max - min) } else { min };
                    let actual = test.cell(crate::table::CellRef::new(r, label)).as_number().unwrap_or(0.0);
                    (predicted - actual).powi(2)
                })
                .sum::<f64>()
                / test.n_rows() as f64;
            (mse, "mse")
        }
    };
    Ok(Downstream {
        metric,
        metric_name,
        train_seconds,
        train_rows: usable.n_rows(),
        dropped_rows,
        curve,
    })
}
