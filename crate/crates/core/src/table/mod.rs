//! Typed in-memory tables: cells, columns, CSV ingestion, numeric encoding
//! for the networks, and label/split utilities.

mod csvio;
mod encoding;
mod split;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csvio::{load_csv, read_csv, write_csv, write_csv_file, LoadOptions, DEFAULT_MISSING_TOKENS};
pub use encoding::{build_encoding, EncodedField, EncodingSchema, FieldEncoding};
pub use split::{split, split_indices};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

/// A single table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Hashable identity used for exact tuple comparison.
    pub fn key(&self) -> CellKey<'_> {
        match self {
            Cell::Missing => CellKey::Missing,
            // +0.0 and -0.0 compare equal as values
            Cell::Number(x) => CellKey::Number(if *x == 0.0 { 0 } else { x.to_bits() }),
            Cell::Text(s) => CellKey::Text(s),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Missing => Ok(()),
            Cell::Number(x) => write!(f, "{x}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKey<'a> {
    Missing,
    Number(u64),
    Text(&'a str),
}

/// Coordinates of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub row: usize,
    pub col: usize,
}

impl CellRef {
    pub fn new(row: usize, col: usize) -> Self {
        CellRef { row, col }
    }
}

/// Rectangular typed table with an optional prediction target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
    label: Option<usize>,
    task: Task,
}

impl Dataset {
    pub fn new(
        columns: Vec<Column>,
        rows: Vec<Vec<Cell>>,
        label: Option<usize>,
        task: Task,
    ) -> Result<Self> {
        let ds = Dataset {
            columns,
            rows,
            label,
            task,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n_cols = self.columns.len();
        match (self.label, self.task) {
            (None, Task::None) => {}
            (Some(l), Task::Classification) => {
                if l >= n_cols {
                    return Err(Error::Schema(format!("label column {l} out of range")));
                }
                if self.columns[l].kind != ColumnKind::Categorical {
                    return Err(Error::Schema(format!(
                        "classification label column '{}' must be categorical",
                        self.columns[l].name
                    )));
                }
            }
            (Some(l), Task::Regression) => {
                if l >= n_cols {
                    return Err(Error::Schema(format!("label column {l} out of range")));
                }
                if self.columns[l].kind != ColumnKind::Numeric {
                    return Err(Error::Schema(format!(
                        "regression label column '{}' must be numeric",
                        self.columns[l].name
                    )));
                }
            }
            (None, task) => {
                return Err(Error::Schema(format!("task {task:?} requires a label column")))
            }
            (Some(_), Task::None) => {
                return Err(Error::Schema("label column set but task is none".into()))
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Schema(format!(
                    "row {r} has {} cells, expected {n_cols}",
                    row.len()
                )));
            }
            for (c, cell) in row.iter().enumerate() {
                check_cell_kind(&self.columns[c], cell, CellRef::new(r, c))?;
            }
        }
        Ok(())
    }

    /// Same columns, label and task, no rows.
    pub fn empty_like(&self) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows: Vec::new(),
            label: self.label,
            task: self.task,
        }
    }

    /// Builds a table with this table's structure around new rows.
    pub fn with_rows(&self, rows: Vec<Vec<Cell>>) -> Result<Dataset> {
        Dataset::new(self.columns.clone(), rows, self.label, self.task)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows() * self.n_cols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, col: usize) -> &Column {
        &self.columns[col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, row: usize) -> &[Cell] {
        &self.rows[row]
    }

    pub fn cell(&self, at: CellRef) -> &Cell {
        &self.rows[at.row][at.col]
    }

    pub fn label_col(&self) -> Option<usize> {
        self.label
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Columns other than the label, i.e. the ones errors may live in.
    pub fn feature_cols(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_cols()).filter(move |&c| Some(c) != self.label)
    }

    /// Rendered label of a row, `None` if there is no label column or the cell is missing.
    pub fn label_of(&self, row: usize) -> Option<String> {
        let l = self.label?;
        match &self.rows[row][l] {
            Cell::Missing => None,
            cell => Some(cell.to_string()),
        }
    }

    pub fn is_complete_row(&self, row: usize) -> bool {
        self.rows[row].iter().all(|c| !c.is_missing())
    }

    pub fn set_cell(&mut self, at: CellRef, cell: Cell) -> Result<()> {
        if at.row >= self.n_rows() || at.col >= self.n_cols() {
            return Err(Error::Schema(format!(
                "cell ({}, {}) out of bounds",
                at.row, at.col
            )));
        }
        check_cell_kind(&self.columns[at.col], &cell, at)?;
        self.rows[at.row][at.col] = cell;
        Ok(())
    }

    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            label: self.label,
            task: self.task,
        }
    }

    /// Non-missing values of a numeric column, in row order.
    pub fn numeric_values(&self, col: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r[col].as_number())
            .collect()
    }

    pub fn same_structure(&self, other: &Dataset) -> bool {
        self.columns == other.columns && self.label == other.label && self.task == other.task
    }

    pub fn missing_cells(&self) -> impl Iterator<Item = CellRef> + '_ {
        self.rows.iter().enumerate().flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| c.is_missing())
                .map(move |(c, _)| CellRef::new(r, c))
        })
    }
}

fn check_cell_kind(column: &Column, cell: &Cell, at: CellRef) -> Result<()> {
    match (column.kind, cell) {
        (_, Cell::Missing) => Ok(()),
        (ColumnKind::Numeric, Cell::Number(x)) if x.is_finite() => Ok(()),
        (ColumnKind::Categorical, Cell::Text(_)) => Ok(()),
        _ => Err(Error::Schema(format!(
            "cell ({}, {}) value {cell:?} does not fit {:?} column '{}'",
            at.row, at.col, column.kind, column.name
        ))),
    }
}

/// Distinct non-missing label values of a classification table.
pub fn classes(ds: &Dataset) -> Result<BTreeSet<String>> {
    if ds.task() != Task::Classification {
        return Err(Error::Unsupported(format!(
            "classes() needs a classification task, table task is {:?}",
            ds.task()
        )));
    }
    Ok((0..ds.n_rows()).filter_map(|r| ds.label_of(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(labels: &[Option<&str>]) -> Dataset {
        let rows = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                vec![
                    Cell::Number(i as f64),
                    l.map_or(Cell::Missing, Cell::text),
                ]
            })
            .collect();
        Dataset::new(
            vec![
                Column::new("x", ColumnKind::Numeric),
                Column::new("y", ColumnKind::Categorical),
            ],
            rows,
            Some(1),
            Task::Classification,
        )
        .unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn classes_of_labels() {
        let ds = labeled(&[Some("0"), Some("1"), Some("1"), Some("0"), Some("1")]);
        assert_eq!(classes(&ds).unwrap(), set(&["0", "1"]));
        let ds = labeled(&[Some("a"), Some("a"), Some("a")]);
        assert_eq!(classes(&ds).unwrap(), set(&["a"]));
    }

    #[test]
    fn classes_ignore_missing_labels() {
        let ds = labeled(&[Some("0"), Some("1"), None]);
        let mut expected = BTreeSet::new();
        for r in 0..ds.n_rows() {
            if let Cell::Text(s) = &ds.row(r)[1] {
                expected.insert(s.clone());
            }
        }
        assert_eq!(classes(&ds).unwrap(), expected);
    }

    #[test]
    fn classes_rejects_regression() {
        let ds = Dataset::new(
            vec![Column::new("y", ColumnKind::Numeric)],
            vec![vec![Cell::Number(1.0)]],
            Some(0),
            Task::Regression,
        )
        .unwrap();
        assert!(matches!(classes(&ds), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rejects_ragged_and_mistyped_rows() {
        let cols = vec![Column::new("a", ColumnKind::Numeric)];
        assert!(Dataset::new(cols.clone(), vec![vec![]], None, Task::None).is_err());
        assert!(Dataset::new(cols.clone(), vec![vec![Cell::text("x")]], None, Task::None).is_err());
        assert!(
            Dataset::new(cols, vec![vec![Cell::Number(f64::NAN)]], None, Task::None).is_err()
        );
    }

    #[test]
    fn classification_label_must_be_categorical() {
        let cols = vec![Column::new("a", ColumnKind::Numeric)];
        assert!(Dataset::new(cols, vec![], Some(0), Task::Classification).is_err());
    }

    #[test]
    fn zero_keys_match() {
        assert_eq!(Cell::Number(0.0).key(), Cell::Number(-0.0).key());
        assert_ne!(Cell::Number(1.0).key(), Cell::text("1").key());
    }
}
