use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::seed;

fn test_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Row indices of a seeded train/test partition, each sorted ascending.
///
/// Classification tables are stratified by label; if any class has a single
/// row the split falls back to an unstratified shuffle.
pub fn split_indices(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::Schema(format!("cannot split a table of {n} rows")));
    }
    let mut rng = seed::rng(seed);

    let mut test = Vec::new();
    if ds.task() == Task::Classification {
        let mut groups: BTreeMap<Option<String>, Vec<usize>> = BTreeMap::new();
        for r in 0..n {
            groups.entry(ds.label_of(r)).or_default().push(r);
        }
        if groups.values().all(|g| g.len() >= 2) {
            for group in groups.values_mut() {
                group.shuffle(&mut rng);
                let k = (test_fraction * group.len() as f64).round() as usize;
                test.extend_from_slice(&group[..k.min(group.len() - 1)]);
            }
        } else {
            log::warn!("a class has a single row; falling back to an unstratified split");
        }
    }
    if test.is_empty() {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        test = all[..test_count(n, test_fraction)].to_vec();
    }
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &t in &test {
        in_test[t] = true;
    }
    let train = (0..n).filter(|&r| !in_test[r]).collect();
    Ok((train, test))
}

pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds, test_fraction, seed)?;
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, Column, ColumnKind};

    fn labeled(labels: &[&str]) -> Dataset {
        Dataset::new(
            vec![
                Column::new("x", ColumnKind::Numeric),
                Column::new("y", ColumnKind::Categorical),
            ],
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| vec![Cell::Number(i as f64), Cell::text(*l)])
                .collect(),
            Some(1),
            Task::Classification,
        )
        .unwrap()
    }

    fn unlabeled(n: usize) -> Dataset {
        Dataset::new(
            vec![Column::new("x", ColumnKind::Numeric)],
            (0..n).map(|i| vec![Cell::Number(i as f64)]).collect(),
            None,
            Task::None,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_sizes() {
        let ds = unlabeled(10);
        let (tr, te) = split_indices(&ds, 0.2, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert_eq!(split_indices(&ds, 0.2, 7).unwrap(), (tr, te));
        let (tr, te) = split(&unlabeled(4), 0.5, 1).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (2, 2));
    }

    #[test]
    fn stratified_counts() {
        let ds = labeled(&["A", "A", "A", "A", "A", "B", "B", "B", "B", "B"]);
        for seed in 0..20 {
            let (_, test) = split(&ds, 0.2, seed).unwrap();
            let a = (0..test.n_rows())
                .filter(|&r| test.label_of(r).as_deref() == Some("A"))
                .count();
            let b = (0..test.n_rows())
                .filter(|&r| test.label_of(r).as_deref() == Some("B"))
                .count();
            assert_eq!((a, b), (1, 1), "seed {seed}");
        }
    }

    #[test]
    fn singleton_class_falls_back() {
        let ds = labeled(&["A", "A", "A", "B"]);
        let (tr, te) = split_indices(&ds, 0.5, 3).unwrap();
        assert_eq!(tr.len() + te.len(), 4);
        assert_eq!(te.len(), 2);
    }

    #[test]
    fn rejects_tiny_or_bad_fraction() {
        assert!(split(&unlabeled(1), 0.5, 0).is_err());
        assert!(split(&unlabeled(5), 1.0, 0).is_err());
    }
}
