//! Base error detectors. Each one maps a [`Dataset`] to the set of cells it
//! considers erroneous; [`run_all`] evaluates an ordered registry of them.

mod io;
mod outliers;
mod rules;
mod typos;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::table::{CellRef, Dataset};

pub use io::{read_detections, read_detections_file, write_detections, write_detections_file};
pub use outliers::{detect_outliers, quantile, OutlierMethod};
pub use rules::{detect_duplicates, detect_fd_violations, FdRule};
pub use typos::detect_rare_typos;

/// Cells flagged by one detector (or by the ensemble).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetectionSet {
    pub detector_id: String,
    pub cells: BTreeSet<CellRef>,
}

impl DetectionSet {
    pub fn new(detector_id: impl Into<String>) -> Self {
        DetectionSet {
            detector_id: detector_id.into(),
            cells: BTreeSet::new(),
        }
    }

    pub fn from_cells(detector_id: impl Into<String>, cells: impl IntoIterator<Item = CellRef>) -> Self {
        DetectionSet {
            detector_id: detector_id.into(),
            cells: cells.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: &CellRef) -> bool {
        self.cells.contains(cell)
    }

    /// Rows touched by at least one flagged cell.
    pub fn rows(&self) -> BTreeSet<usize> {
        self.cells.iter().map(|c| c.row).collect()
    }

    pub fn check_bounds(&self, ds: &Dataset) -> Result<()> {
        match self
            .cells
            .iter()
            .find(|c| c.row >= ds.n_rows() || c.col >= ds.n_cols())
        {
            Some(c) => Err(Error::Schema(format!(
                "detector '{}' flags cell ({}, {}) outside a {}x{} table",
                self.detector_id,
                c.row,
                c.col,
                ds.n_rows(),
                ds.n_cols()
            ))),
            None => Ok(()),
        }
    }
}

/// A base error detector.
pub trait Detector: Send + Sync + fmt::Debug {
    fn id(&self) -> String;
    fn detect(&self, ds: &Dataset) -> Result<DetectionSet>;
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn detect(&self, ds: &Dataset) -> Result<DetectionSet> {
        (**self).detect(ds)
    }
}

pub const DEFAULT_SD_PARAM: f64 = 3.0;
pub const DEFAULT_IQR_PARAM: f64 = 1.5;
pub const DEFAULT_MAD_PARAM: f64 = 3.0;
pub const DEFAULT_MIN_SUPPORT: f64 = 0.01;
pub const DEFAULT_MAX_EDIT: usize = 1;

fn default_sd() -> f64 {
    DEFAULT_SD_PARAM
}
fn default_iqr() -> f64 {
    DEFAULT_IQR_PARAM
}
fn default_mad() -> f64 {
    DEFAULT_MAD_PARAM
}
fn default_min_support() -> f64 {
    DEFAULT_MIN_SUPPORT
}
fn default_max_edit() -> usize {
    DEFAULT_MAX_EDIT
}

/// Built-in detectors, as declared in a registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    Missing,
    Sd {
        #[serde(default = "default_sd")]
        param: f64,
    },
    Iqr {
        #[serde(default = "default_iqr")]
        param: f64,
    },
    /// Modified z-score around the median (Hampel / MAD).
    Mad {
        #[serde(default = "default_mad")]
        param: f64,
    },
    Duplicates,
    Fd {
        #[serde(default)]
        rules: Vec<FdRule>,
    },
    RareTypos {
        #[serde(default = "default_min_support")]
        min_support: f64,
        #[serde(default = "default_max_edit")]
        max_edit: usize,
    },
    /// Precomputed detections, e.g. exported by an external tool.
    External {
        id: String,
        #[serde(skip)]
        cells: BTreeSet<CellRef>,
    },
}

impl DetectorSpec {
    pub fn sd() -> Self {
        DetectorSpec::Sd { param: DEFAULT_SD_PARAM }
    }

    pub fn iqr() -> Self {
        DetectorSpec::Iqr { param: DEFAULT_IQR_PARAM }
    }

    pub fn mad() -> Self {
        DetectorSpec::Mad { param: DEFAULT_MAD_PARAM }
    }

    pub fn rare_typos() -> Self {
        DetectorSpec::RareTypos {
            min_support: DEFAULT_MIN_SUPPORT,
            max_edit: DEFAULT_MAX_EDIT,
        }
    }

    pub fn external(set: DetectionSet) -> Self {
        DetectorSpec::External {
            id: set.detector_id,
            cells: set.cells,
        }
    }

    /// Checks parameters that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorSpec::Sd { param } | DetectorSpec::Iqr { param } | DetectorSpec::Mad { param }
                if !(*param > 0.0 && param.is_finite()) =>
            {
                Err(Error::Config(format!("{}: parameter must be positive", self.id())))
            }
            DetectorSpec::RareTypos { min_support, .. }
                if !(*min_support > 0.0 && *min_support < 1.0) =>
            {
                Err(Error::Config("rare_typos: min_support must lie in (0, 1)".into()))
            }
            DetectorSpec::Fd { rules } if rules.is_empty() => {
                Err(Error::Config("fd detector declared without any rules".into()))
            }
            _ => Ok(()),
        }
    }
}

impl Detector for DetectorSpec {
    fn id(&self) -> String {
        match self {
            DetectorSpec::Missing => "mv".into(),
            DetectorSpec::Sd { .. } => "sd".into(),
            DetectorSpec::Iqr { .. } => "iqr".into(),
            DetectorSpec::Mad { .. } => "mad".into(),
            DetectorSpec::Duplicates => "dup".into(),
            DetectorSpec::Fd { .. } => "fd".into(),
            DetectorSpec::RareTypos { .. } => "typo".into(),
            DetectorSpec::External { id, .. } => id.clone(),
        }
    }

    fn detect(&self, ds: &Dataset) -> Result<DetectionSet> {
        let mut set = match self {
            DetectorSpec::Missing => detect_missing(ds),
            DetectorSpec::Sd { param } => detect_outliers(ds, OutlierMethod::Sd, *param),
            DetectorSpec::Iqr { param } => detect_outliers(ds, OutlierMethod::Iqr, *param),
            DetectorSpec::Mad { param } => detect_outliers(ds, OutlierMethod::Mad, *param),
            DetectorSpec::Duplicates => detect_duplicates(ds),
            DetectorSpec::Fd { rules } => detect_fd_violations(ds, rules)?,
            DetectorSpec::RareTypos {
                min_support,
                max_edit,
            } => detect_rare_typos(ds, *min_support, *max_edit),
            DetectorSpec::External { id, cells } => {
                let set = DetectionSet::from_cells(id.clone(), cells.iter().copied());
                set.check_bounds(ds)?;
                set
            }
        };
        set.detector_id = self.id();
        Ok(set)
    }
}

pub fn detect_missing(ds: &Dataset) -> DetectionSet {
    DetectionSet::from_cells("mv", ds.missing_cells())
}

/// Runs every detector in registry order. A failing detector contributes an
/// empty set instead of aborting the run.
pub fn run_all<D: Detector>(ds: &Dataset, registry: &[D]) -> Vec<DetectionSet> {
    run_all_with(ds, registry, Execution::default())
}

pub fn run_all_with<D: Detector>(ds: &Dataset, registry: &[D], exec: Execution) -> Vec<DetectionSet> {
    exec.map(registry, |d| match d.detect(ds) {
        Ok(set) => set,
        Err(e) => {
            log::warn!("detector '{}' failed, treating as empty: {e}", d.id());
            DetectionSet::new(d.id())
        }
    })
}

/// The default registry: missing values, three outlier rules, duplicates and typos.
pub fn default_registry() -> Vec<DetectorSpec> {
    vec![
        DetectorSpec::Missing,
        DetectorSpec::sd(),
        DetectorSpec::iqr(),
        DetectorSpec::mad(),
        DetectorSpec::Duplicates,
        DetectorSpec::rare_typos(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, Column, ColumnKind, Task};

    fn numeric_table(cols: &[&[f64]]) -> Dataset {
        let n = cols[0].len();
        Dataset::new(
            (0..cols.len())
                .map(|c| Column::new(format!("c{c}"), ColumnKind::Numeric))
                .collect(),
            (0..n)
                .map(|r| cols.iter().map(|col| Cell::Number(col[r])).collect())
                .collect(),
            None,
            Task::None,
        )
        .unwrap()
    }

    #[test]
    fn missing_cells_exactly() {
        let mut ds = numeric_table(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert!(detect_missing(&ds).is_empty());
        let holes = [CellRef::new(0, 0), CellRef::new(2, 0), CellRef::new(1, 1)];
        for h in holes {
            ds.set_cell(h, Cell::Missing).unwrap();
        }
        let scan = (0..ds.n_rows())
            .flat_map(|r| (0..ds.n_cols()).map(move |c| (r, c)))
            .filter(|&(r, c)| ds.row(r)[c].is_missing())
            .count();
        let set = detect_missing(&ds);
        assert_eq!(set.len(), scan);
        assert_eq!(set.len(), 3);
        assert!(holes.iter().all(|h| set.contains(h)));
    }

    #[test]
    fn run_all_keeps_registry_order() {
        let ds = numeric_table(&[&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]]);
        let registry = vec![
            DetectorSpec::Missing,
            DetectorSpec::sd(),
            DetectorSpec::iqr(),
            DetectorSpec::Duplicates,
            DetectorSpec::Fd {
                rules: vec![FdRule::new(["c0"], "c1")],
            },
        ];
        let sets = run_all(&ds, &registry);
        let ids: Vec<_> = sets.iter().map(|s| s.detector_id.as_str()).collect();
        assert_eq!(ids, ["mv", "sd", "iqr", "dup", "fd"]);
        assert!(sets.iter().all(DetectionSet::is_empty));
    }

    #[test]
    fn single_missing_cell() {
        let mut ds = numeric_table(&[&[1.0, 2.0, 3.0]]);
        ds.set_cell(CellRef::new(1, 0), Cell::Missing).unwrap();
        let sets = run_all(&ds, &[DetectorSpec::Missing, DetectorSpec::sd()]);
        assert_eq!(sets[0].cells, BTreeSet::from([CellRef::new(1, 0)]));
        assert!(sets[1].is_empty());
    }

    #[test]
    fn failing_detector_yields_empty_set() {
        let ds = numeric_table(&[&[1.0, 2.0]]);
        let registry = vec![
            DetectorSpec::Fd {
                rules: vec![FdRule::new(["nope"], "c0")],
            },
            DetectorSpec::external(DetectionSet::from_cells("ext", [CellRef::new(9, 9)])),
        ];
        let sets = run_all_with(&ds, &registry, Execution::Sequential);
        assert_eq!(sets.len(), 2);
        assert!(sets.iter().all(DetectionSet::is_empty));
        assert_eq!(sets[1].detector_id, "ext");
    }

    #[test]
    fn spec_validation() {
        assert!(DetectorSpec::Sd { param: 0.0 }.validate().is_err());
        assert!(DetectorSpec::Fd { rules: vec![] }.validate().is_err());
        assert!(DetectorSpec::RareTypos {
            min_support: 1.5,
            max_edit: 1
        }
        .validate()
        .is_err());
        assert!(default_registry().iter().all(|d| d.validate().is_ok()));
    }

    #[test]
    fn registry_round_trips_through_toml_like_json() {
        let json = r#"[{"kind":"missing"},{"kind":"sd","param":2.5},{"kind":"iqr"}]"#;
        let specs: Vec<DetectorSpec> = serde_json::from_str(json).unwrap();
        assert_eq!(specs[1], DetectorSpec::Sd { param: 2.5 });
        assert_eq!(specs[2], DetectorSpec::iqr());
    }
}
