//! Adaptive Min-K ensemble voting.
//!
//! Detections from `m` base detectors are tallied per cell. A cell is flagged
//! when at least `k` detectors agree. The clean fraction is every complete row
//! without a flagged cell. When that fraction is empty (attribute-level
//! exclusion) or lacks some label class (class-level exclusion), the
//! thresholds are relaxed and voting repeats:
//!
//! * attribute-level: `k_attr += rate`
//! * class-level: the missing classes become `L_miss`, `k_class += rate`, and
//!   `k_attr += rate` once `k_class - k_attr` reaches `2 * rate`.
//!
//! Cells in rows whose class is in `L_miss` are judged against `k_class`, all
//! other cells against `k_attr`.

mod trace;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::detect::DetectionSet;
use crate::error::{Error, Result};
use crate::detect::quantile;
use crate::par::Execution;
use crate::table::{classes, CellRef, Dataset, Task};

pub use trace::{read_trace_jsonl, write_trace_jsonl, write_trace_jsonl_file, IterationRecord, Verdict};

/// Number of distinct detectors flagging each cell. Cells nobody flagged are absent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CellCounter {
    counts: BTreeMap<CellRef, u32>,
    detectors: usize,
}

impl CellCounter {
    pub fn get(&self, cell: &CellRef) -> u32 {
        self.counts.get(cell).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellRef, &u32)> {
        self.counts.iter()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Registry size `m`.
    pub fn detectors(&self) -> usize {
        self.detectors
    }
}

pub fn tally(detections: &[DetectionSet]) -> CellCounter {
    tally_with(detections, Execution::default())
}

pub fn tally_with(detections: &[DetectionSet], exec: Execution) -> CellCounter {
    let chunk = detections.len().div_ceil(4).max(1);
    let chunks: Vec<&[DetectionSet]> = detections.chunks(chunk).collect();
    let partials = exec.map(&chunks, |sets| {
        let mut counts: BTreeMap<CellRef, u32> = BTreeMap::new();
        for set in sets.iter() {
            for cell in &set.cells {
                *counts.entry(*cell).or_default() += 1;
            }
        }
        counts
    });
    let mut counts = BTreeMap::new();
    for partial in partials {
        for (cell, n) in partial {
            *counts.entry(cell).or_default() += n;
        }
    }
    CellCounter {
        counts,
        detectors: detections.len(),
    }
}

/// Classic fixed-threshold Min-K: every cell flagged by at least `k` detectors.
pub fn min_k(counter: &CellCounter, k: u32) -> DetectionSet {
    DetectionSet::from_cells(
        format!("min_k={k}"),
        counter.iter().filter(|(_, &n)| n >= k).map(|(c, _)| *c),
    )
}

/// Adaptive voting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoteParams {
    pub k_init: u32,
    /// `None` freezes both thresholds at `k_init` and runs a single pass.
    pub update_rate: Option<u32>,
    /// Defaults to `4 * m`.
    pub iteration_cap: Option<usize>,
    /// Regression only: treat this many label quantile bins as classes.
    pub bin_coverage: Option<usize>,
}

impl Default for VoteParams {
    fn default() -> Self {
        VoteParams {
            k_init: 2,
            update_rate: Some(1),
            iteration_cap: None,
            bin_coverage: None,
        }
    }
}

impl VoteParams {
    pub fn new(k_init: u32, update_rate: u32) -> Self {
        VoteParams {
            k_init,
            update_rate: Some(update_rate),
            ..Default::default()
        }
    }

    pub fn frozen(k: u32) -> Self {
        VoteParams {
            k_init: k,
            update_rate: None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_init < 2 {
            return Err(Error::Config(format!(
                "k_init must be at least 2, got {}",
                self.k_init
            )));
        }
        if self.update_rate == Some(0) {
            return Err(Error::Config("update rate must be at least 1".into()));
        }
        if self.bin_coverage.is_some_and(|b| b < 2) {
            return Err(Error::Config("bin_coverage needs at least 2 bins".into()));
        }
        Ok(())
    }
}

/// Worst-case iteration count of the adaptive loop for `m` detectors.
pub fn iteration_bound(m: usize, k_init: u32, rate: u32) -> usize {
    let span = (m as i64 + 1 - k_init as i64).max(0) as usize;
    2 * span.div_ceil(rate as usize) + 2
}

/// Thresholds and bookkeeping of the adaptive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteState {
    pub k_init: u32,
    pub k_attr: u32,
    pub k_class: u32,
    pub l_miss: BTreeSet<String>,
    pub update_rate: Option<u32>,
    pub bin_coverage: Option<usize>,
    pub iteration: usize,
    pub trace: Vec<IterationRecord>,
}

impl VoteState {
    pub fn new(params: &VoteParams) -> Self {
        VoteState {
            k_init: params.k_init,
            k_attr: params.k_init,
            k_class: params.k_init,
            l_miss: BTreeSet::new(),
            update_rate: params.update_rate,
            bin_coverage: params.bin_coverage,
            iteration: 0,
            trace: Vec::new(),
        }
    }
}

/// Class of each row as seen by the exclusion check: the label for
/// classification, a label quantile bin for regression when enabled.
struct ClassView {
    edges: Option<Vec<f64>>,
}

impl ClassView {
    fn new(dirty: &Dataset, bins: Option<usize>) -> Self {
        let edges = match (dirty.task(), bins, dirty.label_col()) {
            (Task::Regression, Some(b), Some(l)) => {
                let mut values = dirty.numeric_values(l);
                values.sort_by(f64::total_cmp);
                (!values.is_empty()).then(|| {
                    (1..b).map(|i| quantile(&values, i as f64 / b as f64)).collect()
                })
            }
            _ => None,
        };
        ClassView { edges }
    }

    fn active(&self, ds: &Dataset) -> bool {
        ds.task() == Task::Classification || self.edges.is_some()
    }

    fn of_row(&self, ds: &Dataset, row: usize) -> Option<String> {
        match (&self.edges, ds.task()) {
            (_, Task::Classification) => ds.label_of(row),
            (Some(edges), Task::Regression) => {
                let x = ds.row(row)[ds.label_col()?].as_number()?;
                Some(format!("bin{}", edges.iter().filter(|&&e| x > e).count()))
            }
            _ => None,
        }
    }

    fn classes(&self, ds: &Dataset) -> BTreeSet<String> {
        if ds.task() == Task::Classification {
            return classes(ds).unwrap_or_default();
        }
        (0..ds.n_rows()).filter_map(|r| self.of_row(ds, r)).collect()
    }
}

/// Applies the current thresholds to every counted cell.
pub fn vote(counter: &CellCounter, ds: &Dataset, state: &VoteState) -> DetectionSet {
    let view = ClassView::new(ds, state.bin_coverage);
    vote_with_view(counter, ds, state, &view)
}

fn vote_with_view(counter: &CellCounter, ds: &Dataset, state: &VoteState, view: &ClassView) -> DetectionSet {
    let mut row_in_miss: BTreeMap<usize, bool> = BTreeMap::new();
    let cells = counter.iter().filter(|(cell, &n)| {
        let relaxed = !state.l_miss.is_empty()
            && *row_in_miss.entry(cell.row).or_insert_with(|| {
                view.of_row(ds, cell.row)
                    .is_some_and(|c| state.l_miss.contains(&c))
            });
        n >= if relaxed { state.k_class } else { state.k_attr }
    });
    let cells: Vec<CellRef> = cells.map(|(c, _)| *c).collect();
    DetectionSet::from_cells("ensemble", cells)
}

/// Rows with no flagged cell and no missing cell.
pub fn clean_rows(ds: &Dataset, flagged: &DetectionSet) -> Vec<usize> {
    let dirty_rows = flagged.rows();
    (0..ds.n_rows())
        .filter(|r| !dirty_rows.contains(r) && ds.is_complete_row(*r))
        .collect()
}

pub fn extract_clean(ds: &Dataset, flagged: &DetectionSet) -> Dataset {
    ds.select_rows(&clean_rows(ds, flagged))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExclusionStatus {
    None,
    AttributeLevel,
    ClassLevel(BTreeSet<String>),
}

pub fn check_exclusion(clean: &Dataset, dirty: &Dataset) -> ExclusionStatus {
    check_exclusion_with(clean, dirty, &ClassView::new(dirty, None))
}

fn check_exclusion_with(clean: &Dataset, dirty: &Dataset, view: &ClassView) -> ExclusionStatus {
    if clean.is_empty() {
        return ExclusionStatus::AttributeLevel;
    }
    if !view.active(dirty) {
        return ExclusionStatus::None;
    }
    let present = view.classes(clean);
    let missing: BTreeSet<String> = view
        .classes(dirty)
        .into_iter()
        .filter(|c| !present.contains(c))
        .collect();
    if missing.is_empty() {
        ExclusionStatus::None
    } else {
        ExclusionStatus::ClassLevel(missing)
    }
}

/// Result of [`adaptive_detect`].
#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub flagged: DetectionSet,
    pub clean: Dataset,
    /// Indices into the dirty table of the clean fraction's rows.
    pub clean_rows: Vec<usize>,
    pub counter: CellCounter,
    pub state: VoteState,
    pub verdict: ExclusionStatus,
}

/// Runs the adaptive voting loop until no exclusion remains.
///
/// With a frozen update rate a single pass is made and its verdict returned
/// as is (plain Min-K).
pub fn adaptive_detect(
    ds: &Dataset,
    detections: &[DetectionSet],
    params: &VoteParams,
) -> Result<AdaptiveOutcome> {
    params.validate()?;
    let counter = tally(detections);
    let m = detections.len();
    let cap = params.iteration_cap.unwrap_or(4 * m).max(2);
    let view = ClassView::new(ds, params.bin_coverage);
    let mut state = VoteState::new(params);

    loop {
        state.iteration += 1;
        let flagged = vote_with_view(&counter, ds, &state, &view);
        let rows = clean_rows(ds, &flagged);
        let clean = ds.select_rows(&rows);
        let verdict = check_exclusion_with(&clean, ds, &view);
        state.trace.push(IterationRecord::new(&state, &flagged, rows.len(), &verdict));

        let Some(rate) = state.update_rate else {
            return Ok(AdaptiveOutcome {
                flagged,
                clean,
                clean_rows: rows,
                counter,
                state,
                verdict,
            });
        };
        let saturated = state.k_attr as usize > m && state.k_class as usize > m;
        match &verdict {
            ExclusionStatus::None => {
                return Ok(AdaptiveOutcome {
                    flagged,
                    clean,
                    clean_rows: rows,
                    counter,
                    state,
                    verdict,
                })
            }
            // nothing is flagged any more, so only incomplete rows block the fraction
            _ if saturated => {
                return Err(Error::Schema(format!(
                    "data exclusion cannot be resolved by voting ({verdict:?}): \
                     the affected rows all contain missing cells"
                )))
            }
            ExclusionStatus::AttributeLevel => {
                state.k_attr += rate;
                state.k_class = state.k_class.max(state.k_attr);
            }
            ExclusionStatus::ClassLevel(missing) => {
                state.l_miss = missing.clone();
                state.k_class += rate;
                if state.k_class - state.k_attr >= 2 * rate {
                    state.k_attr += rate;
                }
            }
        }
        if state.iteration >= cap {
            return Err(Error::IterationCap {
                cap,
                trace: state.trace,
            });
        }
    }
}
