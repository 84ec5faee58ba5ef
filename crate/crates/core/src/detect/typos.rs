use std::collections::BTreeMap;

use super::DetectionSet;
use crate::table::{CellRef, ColumnKind, Dataset};

/// Flags rare categorical values that sit within `max_edit` Levenshtein
/// edits of a frequent value in the same column.
pub fn detect_rare_typos(ds: &Dataset, min_support: f64, max_edit: usize) -> DetectionSet {
    let mut set = DetectionSet::new("typo");
    for col in 0..ds.n_cols() {
        if ds.column(col).kind != ColumnKind::Categorical {
            continue;
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for row in ds.rows() {
            if let Some(s) = row[col].as_text() {
                *counts.entry(s).or_default() += 1;
            }
        }
        let total: usize = counts.values().sum();
        if total == 0 {
            continue;
        }
        let is_frequent = |n: usize| n as f64 / total as f64 >= min_support;
        let frequent: Vec<&str> = counts
            .iter()
            .filter(|(_, &n)| is_frequent(n))
            .map(|(s, _)| *s)
            .collect();
        let typos: Vec<&str> = counts
            .iter()
            .filter(|(_, &n)| !is_frequent(n))
            .map(|(s, _)| *s)
            .filter(|s| {
                frequent
                    .iter()
                    .any(|f| strsim::levenshtein(s, f) <= max_edit)
            })
            .collect();
        for (row, cells) in ds.rows().iter().enumerate() {
            if let Some(s) = cells[col].as_text() {
                if typos.contains(&s) {
                    set.cells.insert(CellRef::new(row, col));
                }
            }
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, Column, Task};

    fn column(values: &[&str]) -> Dataset {
        Dataset::new(
            vec![Column::new("c", ColumnKind::Categorical)],
            values.iter().map(|v| vec![Cell::text(*v)]).collect(),
            None,
            Task::None,
        )
        .unwrap()
    }

    #[test]
    fn rare_neighbor_flagged() {
        let mut values = vec!["red"; 199];
        values.push("rad");
        // 1/200 = 0.005 < 0.01 and lev("rad", "red") = 1
        assert_eq!(strsim::levenshtein("rad", "red"), 1);
        let set = detect_rare_typos(&column(&values), 0.01, 1);
        assert_eq!(set.cells.iter().map(|c| c.row).collect::<Vec<_>>(), vec![199]);
    }

    #[test]
    fn balanced_values_not_flagged() {
        let values: Vec<&str> = (0..100).map(|i| if i % 2 == 0 { "red" } else { "ted" }).collect();
        assert!(detect_rare_typos(&column(&values), 0.01, 1).is_empty());
    }

    #[test]
    fn far_rare_value_not_flagged() {
        let mut values = vec!["red"; 199];
        values.push("xyzzy");
        assert!(detect_rare_typos(&column(&values), 0.01, 1).is_empty());
    }
}
