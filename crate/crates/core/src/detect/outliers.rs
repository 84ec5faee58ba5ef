use serde::{Deserialize, Serialize};

use super::DetectionSet;
use crate::table::{CellRef, ColumnKind, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMethod {
    /// |x - mean| > param * population std.
    Sd,
    /// Outside [Q1 - param*IQR, Q3 + param*IQR].
    Iqr,
    /// |0.6745 (x - median) / MAD| > param.
    Mad,
}

impl OutlierMethod {
    fn id(self) -> &'static str {
        match self {
            OutlierMethod::Sd => "sd",
            OutlierMethod::Iqr => "iqr",
            OutlierMethod::Mad => "mad",
        }
    }
}

/// Linearly interpolated quantile at position `p * (n - 1)` of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Returns a predicate flagging outliers of one column, or `None` if the column
/// has no spread (nothing can be flagged).
fn column_rule(values: &[f64], method: OutlierMethod, param: f64) -> Option<Box<dyn Fn(f64) -> bool>> {
    if values.is_empty() {
        return None;
    }
    match method {
        OutlierMethod::Sd => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            (std > 0.0).then(|| Box::new(move |x: f64| (x - mean).abs() > param * std) as _)
        }
        OutlierMethod::Iqr => {
            let s = sorted(values);
            let q1 = quantile(&s, 0.25);
            let q3 = quantile(&s, 0.75);
            let iqr = q3 - q1;
            let (lo, hi) = (q1 - param * iqr, q3 + param * iqr);
            (iqr > 0.0).then(|| Box::new(move |x: f64| x < lo || x > hi) as _)
        }
        OutlierMethod::Mad => {
            let s = sorted(values);
            let median = quantile(&s, 0.5);
            let dev = sorted(&s.iter().map(|x| (x - median).abs()).collect::<Vec<_>>());
            let mad = quantile(&dev, 0.5);
            (mad > 0.0)
                .then(|| Box::new(move |x: f64| (0.6745 * (x - median) / mad).abs() > param) as _)
        }
    }
}

/// Flags numeric cells that are outliers within their column. Missing cells
/// and categorical columns are never flagged.
pub fn detect_outliers(ds: &Dataset, method: OutlierMethod, param: f64) -> DetectionSet {
    let mut set = DetectionSet::new(method.id());
    for col in 0..ds.n_cols() {
        if ds.column(col).kind != ColumnKind::Numeric {
            continue;
        }
        let Some(is_outlier) = column_rule(&ds.numeric_values(col), method, param) else {
            continue;
        };
        for (row, cells) in ds.rows().iter().enumerate() {
            if let Some(x) = cells[col].as_number() {
                if is_outlier(x) {
                    set.cells.insert(CellRef::new(row, col));
                }
            }
        }
    }
    set
}
