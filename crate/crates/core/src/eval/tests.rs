use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::detect::DetectionSet;
use crate::inject::{ErrorType, InjectionPlan, TypeMix};
use crate::synth;
use crate::table::{Cell, CellRef, Column, ColumnKind, Dataset, Task};

fn mask_of(cells: &[(usize, usize)]) -> crate::inject::ErrorMask {
    let mut m = crate::inject::ErrorMask::default();
    for &(r, c) in cells {
        m.entries
            .insert(CellRef::new(r, c), (ErrorType::MissingValue, Cell::Number(0.0)));
    }
    m
}

fn cells(list: &[(usize, usize)]) -> BTreeSet<CellRef> {
    list.iter().map(|&(r, c)| CellRef::new(r, c)).collect()
}

fn fast_experiment(features: usize, seed: u64) -> Experiment {
    let clean = synth::two_class_blobs(300, features, 2.0, seed);
    let plan = InjectionPlan::new(
        0.1,
        TypeMix::uniform(&[ErrorType::MissingValue, ErrorType::Outlier]),
        seed,
    );
    let mut exp = Experiment::new(clean, plan);
    exp.harness.repeats = 2;
    exp.harness.model.epochs = 10;
    exp.curate.augment.epochs = 10;
    exp.curate.augment.n_aug = 50;
    exp
}

#[test]
fn perfect_detection_scores_one() {
    let truth = mask_of(&[(0, 0), (1, 1)]);
    let r = detection_metrics(&cells(&[(0, 0), (1, 1)]), &truth);
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    let empty = detection_metrics(&BTreeSet::new(), &mask_of(&[]));
    assert_eq!((empty.precision, empty.recall, empty.f1), (1.0, 1.0, 1.0));
}

#[test]
fn empty_flagged_set_has_zero_recall() {
    let r = detection_metrics(&BTreeSet::new(), &mask_of(&[(0, 0)]));
    assert_eq!((r.recall, r.f1, r.fn_), (0.0, 0.0, 1));
}

#[test]
fn hand_computed_counts() {
    let r = DetectionReport::from_counts(3, 1, 2);
    assert_eq!(r.precision, 0.75);
    assert_eq!(r.recall, 0.6);
    assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
    let truth = mask_of(&[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)]);
    let flagged = cells(&[(0, 0), (0, 1), (0, 2), (5, 5)]);
    assert_eq!(detection_metrics(&flagged, &truth), r);
}

proptest! {
    #[test]
    fn report_identities_hold(
        flagged in prop::collection::btree_set((0usize..20, 0usize..5), 0..40),
        truth in prop::collection::btree_set((0usize..20, 0usize..5), 0..40),
    ) {
        let f: BTreeSet<CellRef> = flagged.iter().map(|&(r, c)| CellRef::new(r, c)).collect();
        let t = mask_of(&truth.iter().copied().collect::<Vec<_>>());
        let r = detection_metrics(&f, &t);
        prop_assert_eq!(r.tp + r.fp, f.len());
        prop_assert_eq!(r.tp + r.fn_, t.len());
        if r.precision + r.recall > 0.0 {
            prop_assert!((r.f1 - 2.0 * r.precision * r.recall / (r.precision + r.recall)).abs() < 1e-12);
        } else {
            prop_assert_eq!(r.f1, 0.0);
        }
        for v in [r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn macro_f1_averages_per_class_scores() {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    assert_eq!(macro_f1(&s(&["a", "b"]), &s(&["a", "b"])), 1.0);
    // class a: tp 1 fp 1 fn 0 -> 2/3; class b: tp 0 -> 0.
    assert!((macro_f1(&s(&["a", "b"]), &s(&["a", "a"])) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn separable_blobs_score_high_f1() {
    let ds = synth::two_class_blobs(400, 2, 6.0, 1);
    let out = downstream_eval(&ds, &ds, &ModelConfig::default(), 3).unwrap();
    assert_eq!(out.metric_name, "f1");
    assert!(out.metric > 0.95, "{}", out.metric);
    assert_eq!(out.curve.len(), ModelConfig::default().epochs);
    assert!(out.curve.iter().all(|e| e.val.is_some()));
    let again = downstream_eval(&ds, &ds, &ModelConfig::default(), 3).unwrap();
    assert_eq!(again.metric, out.metric);
}

#[test]
fn noiseless_identity_regression_has_small_mse() {
    let columns = vec![
        Column::new("x", ColumnKind::Numeric),
        Column::new("y", ColumnKind::Numeric),
    ];
    let rows: Vec<Vec<Cell>> = (0..300)
        .map(|i| {
            let x = i as f64 / 299.0;
            vec![Cell::Number(x), Cell::Number(x)]
        })
        .collect();
    let ds = Dataset::new(columns, rows, Some(1), Task::Regression).unwrap();
    let cfg = ModelConfig {
        epochs: 200,
        ..ModelConfig::default()
    };
    let out = downstream_eval(&ds, &ds, &cfg, 1).unwrap();
    assert_eq!(out.metric_name, "mse");
    assert!(out.metric < 1e-2, "{}", out.metric);
}

#[test]
fn incomplete_train_rows_are_dropped() {
    let ds = synth::two_class_blobs(40, 2, 4.0, 2);
    let mut holey = ds.clone();
    holey.set_cell(CellRef::new(0, 0), Cell::Missing).unwrap();
    holey.set_cell(CellRef::new(3, 1), Cell::Missing).unwrap();
    let out = downstream_eval(&holey, &ds, &ModelConfig::default(), 1).unwrap();
    assert_eq!((out.train_rows, out.dropped_rows), (38, 2));
    let all_missing = ds.with_rows(
        ds.rows()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r[0] = Cell::Missing;
                r
            })
            .collect(),
    );
    let all_missing = all_missing.unwrap();
    assert!(matches!(
        downstream_eval(&all_missing, &ds, &ModelConfig::default(), 1),
        Err(crate::Error::Evaluation(_))
    ));
}

#[test]
fn variants_parse_and_print() {
    for s in ["dirty", "clean", "curate", "std_impute", "mink_k=3"] {
        assert_eq!(s.parse::<Variant>().unwrap().to_string(), s);
    }
    assert!("mink_k=0".parse::<Variant>().is_err());
    assert!("best".parse::<Variant>().is_err());
    assert!(Variant::MinK(2).is_baseline() && Variant::StdImpute.is_baseline());
    assert!(!Variant::Curate.is_baseline() && !Variant::Dirty.is_baseline());
}

#[test]
fn imputation_fills_flagged_and_missing_cells() {
    let columns = vec![
        Column::new("x", ColumnKind::Numeric),
        Column::new("c", ColumnKind::Categorical),
        Column::new("y", ColumnKind::Categorical),
    ];
    let rows = vec![
        vec![Cell::Number(1.0), Cell::text("p"), Cell::text("a")],
        vec![Cell::Number(3.0), Cell::Missing, Cell::text("b")],
        vec![Cell::Number(100.0), Cell::text("q"), Cell::text("a")],
        vec![Cell::Missing, Cell::text("p"), Cell::text("b")],
    ];
    let ds = Dataset::new(columns, rows, Some(2), Task::Classification).unwrap();
    let flagged = DetectionSet::from_cells("ensemble", [CellRef::new(2, 0), CellRef::new(0, 2)]);
    let out = pipeline::impute(&ds, &flagged).unwrap();
    assert_eq!(out.row(2)[0], Cell::Number(2.0));
    assert_eq!(out.row(3)[0], Cell::Number(2.0));
    assert_eq!(out.row(1)[1], Cell::text(pipeline::DUMMY_CATEGORY));
    // Label cells are left alone even when flagged.
    assert_eq!(out.row(0)[2], Cell::text("a"));
}

#[test]
fn clean_variant_sees_no_injected_errors() {
    let exp = fast_experiment(3, 1);
    let rec = run_pipeline(&exp, Variant::Clean, 5).unwrap();
    assert_eq!(rec.dropped_rows, 0);
    assert!(rec.detection.is_none());
    let dirty = run_pipeline(&exp, Variant::Dirty, 5).unwrap();
    assert!(dirty.dropped_rows > 0);
}

#[test]
fn zero_budget_curation_trains_on_the_dirty_table() {
    let mut exp = fast_experiment(3, 2);
    exp.curate.augment.n_aug = 0;
    let curate = run_pipeline(&exp, Variant::Curate, 9).unwrap();
    let dirty = run_pipeline(&exp, Variant::Dirty, 9).unwrap();
    assert_eq!(curate.metric, dirty.metric);
    assert_eq!(curate.train_rows, dirty.train_rows);
}

#[test]
fn curation_keeps_every_dirty_row() {
    let exp = fast_experiment(3, 3);
    let curate = run_pipeline(&exp, Variant::Curate, 1).unwrap();
    let dirty = run_pipeline(&exp, Variant::Dirty, 1).unwrap();
    assert_eq!(curate.train_rows, dirty.train_rows + 50);
    assert_eq!(curate.dropped_rows, dirty.dropped_rows);
}

#[test]
fn test_split_is_shared_across_variants() {
    let exp = fast_experiment(3, 4);
    let a = pipeline::prepare(&exp, 11, false).unwrap();
    let b = pipeline::prepare(&exp, 11, true).unwrap();
    let mut bytes = (Vec::new(), Vec::new());
    crate::table::write_csv(&a.test, &mut bytes.0).unwrap();
    crate::table::write_csv(&b.test, &mut bytes.1).unwrap();
    assert_eq!(bytes.0, bytes.1);
    assert_eq!(a.dirty, b.dirty);
}

#[test]
fn evaluation_is_reproducible_and_summarised() {
    let mut exp = fast_experiment(3, 5);
    exp.harness.variants = vec![
        Variant::Clean,
        Variant::Dirty,
        Variant::Curate,
        Variant::MinK(2),
        Variant::StdImpute,
    ];
    let a = evaluate(&exp).unwrap();
    exp.harness.execution = crate::Execution::Sequential;
    let b = evaluate(&exp).unwrap();
    let strip = |r: &EvaluationReport| -> Vec<ExperimentRecord> {
        r.records.iter().map(ExperimentRecord::without_timing).collect()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a.records.len(), 10);
    let ids: Vec<&str> = a.summary.iter().map(|r| r.pipeline_id.as_str()).collect();
    assert_eq!(ids, ["clean", "dirty", "curate", "mink_k=2", "std_impute", COMBINED_ID]);
    let combined = a.row(COMBINED_ID).unwrap();
    assert!(combined.metric_mean.is_none());
    let baseline_total: f64 = a
        .records
        .iter()
        .filter(|r| r.pipeline_id == "mink_k=2" || r.pipeline_id == "std_impute")
        .map(|r| r.train_time_seconds)
        .sum();
    assert!((combined.time_mean * 2.0 - baseline_total).abs() < 1e-9);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_records_csv(&a.records, &mut csv_a).unwrap();
    write_records_csv(&b.records, &mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn invalid_harness_settings_are_rejected() {
    let mut exp = fast_experiment(2, 1);
    exp.harness.repeats = 0;
    assert!(matches!(evaluate(&exp), Err(crate::Error::Config(_))));
    let mut exp = fast_experiment(2, 1);
    exp.clean = synth::gaussian_table(50, &[0.0], &[1.0], 1);
    assert!(matches!(evaluate(&exp), Err(crate::Error::Config(_))));
}

#[test]
fn k_sweep_recall_is_non_increasing() {
    let exp = fast_experiment(4, 6);
    let rows = sweep_k(&exp, None).unwrap();
    let m = exp.curate.detectors.len() as u32;
    assert_eq!(rows.len() as u32, m);
    assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), (1..=m).collect::<Vec<_>>());
    for pair in rows.windows(2) {
        assert!(pair[1].report.recall <= pair[0].report.recall);
        assert!(pair[1].report.tp + pair[1].report.fp <= pair[0].report.tp + pair[0].report.fp);
    }
    assert!(sweep_k(&exp, Some(&[0])).is_err());
    assert!(sweep_k(&exp, Some(&[m + 1])).is_err());
}

#[test]
fn augmentation_sweep_has_one_row_per_size() {
    let exp = fast_experiment(3, 7);
    let (rows, records) = sweep_augmentation(&exp, &[0, 20, 60]).unwrap();
    assert_eq!(rows.iter().map(|r| r.n_aug).collect::<Vec<_>>(), [0, 20, 60]);
    assert_eq!(records.len(), 6);
    let base = records.iter().find(|r| r.n_aug == 0).unwrap().train_rows;
    let big = records.iter().find(|r| r.n_aug == 60 && r.repeat == 0).unwrap();
    assert_eq!(big.train_rows, base + 60);
    assert!(sweep_augmentation(&exp, &[]).is_err());
}

#[test]
fn error_rate_sweep_is_reproducible() {
    let exp = fast_experiment(3, 8);
    let (a, _) = sweep_error_rate(&exp, &[0.05, 0.15]).unwrap();
    let (b, _) = sweep_error_rate(&exp, &[0.05, 0.15]).unwrap();
    assert_eq!(a.len(), 2);
    assert_eq!(a, b);
    let mut out = Vec::new();
    write_error_rate_csv(&a, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
}
