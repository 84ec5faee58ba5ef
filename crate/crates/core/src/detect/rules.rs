use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::DetectionSet;
use crate::error::{Error, Result};
use crate::table::{CellKey, CellRef, Dataset};

/// Functional dependency `lhs -> rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdRule {
    pub lhs: Vec<String>,
    pub rhs: String,
}

impl FdRule {
    pub fn new<S: Into<String>>(lhs: impl IntoIterator<Item = S>, rhs: impl Into<String>) -> Self {
        FdRule {
            lhs: lhs.into_iter().map(Into::into).collect(),
            rhs: rhs.into(),
        }
    }

    /// Resolves column names to indices, rejecting malformed rules.
    pub fn resolve(&self, ds: &Dataset) -> Result<(Vec<usize>, usize)> {
        let err = |why: &str| Error::Config(format!("invalid fd rule {self}: {why}"));
        if self.lhs.is_empty() {
            return Err(err("empty left-hand side"));
        }
        if self.lhs.contains(&self.rhs) {
            return Err(err("rhs appears in lhs"));
        }
        let lookup = |name: &str| {
            ds.column_index(name)
                .ok_or_else(|| err(&format!("unknown column '{name}'")))
        };
        let lhs = self.lhs.iter().map(|n| lookup(n)).collect::<Result<_>>()?;
        Ok((lhs, lookup(&self.rhs)?))
    }

    /// Rows grouped by their (complete) lhs values, in first-seen order.
    pub(crate) fn groups(lhs: &[usize], ds: &Dataset) -> Vec<Vec<usize>> {
        let mut index: HashMap<Vec<CellKey<'_>>, usize> = HashMap::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (r, row) in ds.rows().iter().enumerate() {
            if lhs.iter().any(|&c| row[c].is_missing()) {
                continue;
            }
            let key: Vec<_> = lhs.iter().map(|&c| row[c].key()).collect();
            let g = *index.entry(key).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(r);
        }
        groups
    }
}

impl std::fmt::Display for FdRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {}", self.lhs.join(","), self.rhs)
    }
}

/// Flags every cell of every repeated row after its first occurrence.
pub fn detect_duplicates(ds: &Dataset) -> DetectionSet {
    let mut seen = std::collections::HashSet::new();
    let mut set = DetectionSet::new("dup");
    for (r, row) in ds.rows().iter().enumerate() {
        let key: Vec<_> = row.iter().map(|c| c.key()).collect();
        if !seen.insert(key) {
            set.cells.extend((0..ds.n_cols()).map(|c| CellRef::new(r, c)));
        }
    }
    set
}

/// Flags the rhs cell of every row in an lhs group carrying two or more
/// distinct non-missing rhs values.
pub fn detect_fd_violations(ds: &Dataset, rules: &[FdRule]) -> Result<DetectionSet> {
    let resolved = rules
        .iter()
        .map(|r| r.resolve(ds))
        .collect::<Result<Vec<_>>>()?;
    let mut set = DetectionSet::new("fd");
    for (lhs, rhs) in resolved {
        for group in FdRule::groups(&lhs, ds) {
            let distinct: BTreeSet<_> = group
                .iter()
                .map(|&r| &ds.row(r)[rhs])
                .filter(|c| !c.is_missing())
                .map(|c| c.key())
                .collect();
            if distinct.len() >= 2 {
                set.cells.extend(group.iter().map(|&r| CellRef::new(r, rhs)));
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, Column, ColumnKind, Task};

    fn text_table(names: &[&str], rows: &[&[&str]]) -> Dataset {
        Dataset::new(
            names
                .iter()
                .map(|n| Column::new(*n, ColumnKind::Categorical))
                .collect(),
            rows.iter()
                .map(|r| {
                    r.iter()
                        .map(|v| if v.is_empty() { Cell::Missing } else { Cell::text(*v) })
                        .collect()
                })
                .collect(),
            None,
            Task::None,
        )
        .unwrap()
    }

    #[test]
    fn duplicate_rows_after_first() {
        let ds = text_table(&["a", "b"], &[&["x", "1"], &["x", "1"], &["y", "2"]]);
        let set = detect_duplicates(&ds);
        assert_eq!(set.rows(), BTreeSet::from([1]));
        assert_eq!(set.len(), 2);
        let distinct = text_table(&["a"], &[&["x"], &["y"]]);
        assert!(detect_duplicates(&distinct).is_empty());
    }

    #[test]
    fn triple_duplicate_flags_surplus_rows() {
        let row: &[&str] = &["p", "q", "r", ""];
        let ds = text_table(&["a", "b", "c", "d"], &[row, &["z", "z", "z", "z"], row, row]);
        let set = detect_duplicates(&ds);
        assert_eq!(set.len(), 2 * 4);
        assert_eq!(set.rows(), BTreeSet::from([2, 3]));
    }

    #[test]
    fn fd_conflict_flags_both() {
        let ds = text_table(&["zip", "city"], &[&["10001", "NYC"], &["10001", "LA"]]);
        let set = detect_fd_violations(&ds, &[FdRule::new(["zip"], "city")]).unwrap();
        assert_eq!(
            set.cells,
            BTreeSet::from([CellRef::new(0, 1), CellRef::new(1, 1)])
        );
    }

    #[test]
    fn fd_consistent_groups() {
        let ds = text_table(
            &["zip", "city"],
            &[&["1", "A"], &["1", "A"], &["2", "B"], &["", "C"]],
        );
        assert!(detect_fd_violations(&ds, &[FdRule::new(["zip"], "city")])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn fd_group_of_three() {
        let rows: &[&[&str]] = &[&["g", "A"], &["g", "A"], &["g", "B"], &["h", "C"]];
        let ds = text_table(&["k", "v"], rows);
        let set = detect_fd_violations(&ds, &[FdRule::new(["k"], "v")]).unwrap();
        // by hand: group "g" holds rows 0..3 with values {A, B}; group "h" is consistent
        let expected: BTreeSet<_> = (0..3).map(|r| CellRef::new(r, 1)).collect();
        assert_eq!(set.cells, expected);
        assert!(set.cells.iter().all(|c| c.col == 1));
    }

    #[test]
    fn invalid_rules() {
        let ds = text_table(&["a", "b"], &[&["x", "y"]]);
        for rule in [
            FdRule::new(Vec::<String>::new(), "b"),
            FdRule::new(["a"], "a"),
            FdRule::new(["a"], "missing"),
        ] {
            match detect_fd_violations(&ds, std::slice::from_ref(&rule)) {
                Err(Error::Config(msg)) => assert!(msg.contains(&rule.to_string())),
                other => panic!("{other:?}"),
            }
        }
    }
}
