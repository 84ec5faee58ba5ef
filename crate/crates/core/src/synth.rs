//! Seeded synthetic tables for examples, benchmarks and end-to-end checks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::detect::DetectionSet;
use crate::seed;
use crate::table::{Cell, CellRef, Column, ColumnKind, Dataset, Task};

/// The five-record, two-attribute voting example with seven detectors.
///
/// Records R1 and R4 carry class "1", the rest class "0". Cell C12 (R1, A2)
/// is reported by s1, s3 and s4; C42 (R4, A2) by s1, s2, s5 and s6; C52
/// (R5, A2) by s2 and s7.
pub fn voting_example() -> (Dataset, Vec<DetectionSet>) {
    let labels = ["1", "0", "0", "1", "0"];
    let rows = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let x = (i + 1) as f64;
            vec![Cell::Number(x), Cell::Number(10.0 * x), Cell::text(*l)]
        })
        .collect();
    let ds = Dataset::new(
        vec![
            Column::new("A1", ColumnKind::Numeric),
            Column::new("A2", ColumnKind::Numeric),
            Column::new("class", ColumnKind::Categorical),
        ],
        rows,
        Some(2),
        Task::Classification,
    )
    .expect("valid toy table");

    let c12 = CellRef::new(0, 1);
    let c42 = CellRef::new(3, 1);
    let c52 = CellRef::new(4, 1);
    let members: [&[CellRef]; 7] = [
        &[c12, c42],
        &[c42, c52],
        &[c12],
        &[c12],
        &[c42],
        &[c42],
        &[c52],
    ];
    let detections = members
        .iter()
        .enumerate()
        .map(|(i, cells)| DetectionSet::from_cells(format!("s{}", i + 1), cells.iter().copied()))
        .collect();
    (ds, detections)
}

/// Independent Gaussian columns `x0..` with the given means and standard deviations.
pub fn gaussian_table(n: usize, means: &[f64], stds: &[f64], seed: u64) -> Dataset {
    assert_eq!(means.len(), stds.len());
    let mut rng = seed::rng(seed);
    let rows = (0..n)
        .map(|_| {
            means
                .iter()
                .zip(stds)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    Cell::Number(m + s * z)
                })
                .collect()
        })
        .collect();
    Dataset::new(
        (0..means.len())
            .map(|i| Column::new(format!("x{i}"), ColumnKind::Numeric))
            .collect(),
        rows,
        None,
        Task::None,
    )
    .expect("finite gaussian draws")
}

/// Binary classification table: balanced classes "a"/"b" whose numeric
/// features are unit-variance Gaussians with class means `±separation / 2`
/// on every feature.
pub fn two_class_blobs(n: usize, features: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = seed::rng(seed);
    let rows = (0..n)
        .map(|i| {
            let positive = i % 2 == 1;
            let shift = if positive { separation / 2.0 } else { -separation / 2.0 };
            let mut row: Vec<Cell> = (0..features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    Cell::Number(shift + z)
                })
                .collect();
            row.push(Cell::text(if positive { "b" } else { "a" }));
            row
        })
        .collect();
    let mut columns: Vec<Column> = (0..features)
        .map(|i| Column::new(format!("f{i}"), ColumnKind::Numeric))
        .collect();
    columns.push(Column::new("label", ColumnKind::Categorical));
    Dataset::new(columns, rows, Some(features), Task::Classification).expect("valid blobs")
}

/// Random labeled table with integer-valued numeric features.
pub fn random_labeled(n_rows: usize, n_cols: usize, n_classes: usize, seed: u64) -> Dataset {
    let mut rng = seed::rng(seed);
    let rows = (0..n_rows)
        .map(|r| {
            let mut row: Vec<Cell> = (0..n_cols)
                .map(|_| Cell::Number(rng.random_range(0..100) as f64))
                .collect();
            // every class appears at least once
            let class = if r < n_classes { r } else { rng.random_range(0..n_classes) };
            row.push(Cell::Text(format!("c{class}")));
            row
        })
        .collect();
    let mut columns: Vec<Column> = (0..n_cols)
        .map(|i| Column::new(format!("a{i}"), ColumnKind::Numeric))
        .collect();
    columns.push(Column::new("class", ColumnKind::Categorical));
    Dataset::new(columns, rows, Some(n_cols), Task::Classification).expect("valid random table")
}

/// `m` random detection sets over the feature cells of `ds`, each flagging a
/// cell with probability `rate`.
pub fn random_detections(ds: &Dataset, m: usize, rate: f64, seed: u64) -> Vec<DetectionSet> {
    let mut rng = seed::rng(seed);
    let features: Vec<usize> = ds.feature_cols().collect();
    (0..m)
        .map(|i| {
            let mut set = DetectionSet::new(format!("d{i}"));
            for r in 0..ds.n_rows() {
                for &c in &features {
                    if rng.random_bool(rate) {
                        set.cells.insert(CellRef::new(r, c));
                    }
                }
            }
            set
        })
        .collect()
}
