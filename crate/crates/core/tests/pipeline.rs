use curate_core::detect::{default_registry, run_all, run_all_with};
use curate_core::eval::{evaluate, Experiment, HarnessConfig, ModelConfig, Variant};
use curate_core::inject::{inject, restore, InjectionPlan, TypeMix};
use curate_core::table::{build_encoding, classes, read_csv, write_csv, LoadOptions};
use curate_core::vae::{generate, generate_with, integrate, train_vae, AugmentConfig};
use curate_core::vote::{adaptive_detect, tally_with, VoteParams};
use curate_core::{synth, Execution};

fn small_augment() -> AugmentConfig {
    AugmentConfig {
        n_aug: 150,
        epochs: 40,
        ..AugmentConfig::default()
    }
}

#[test]
fn injected_table_flows_from_detection_to_integration() {
    let clean = synth::two_class_blobs(400, 4, 1.5, 11);
    let (dirty, mask) = inject(&clean, &InjectionPlan::new(0.1, TypeMix::default(), 11)).unwrap();
    assert!(!mask.is_empty());

    let detections = run_all(&dirty, &default_registry());
    let out = adaptive_detect(&dirty, &detections, &VoteParams::new(2, 1)).unwrap();
    assert_eq!(out.clean.missing_cells().count(), 0);
    assert_eq!(classes(&out.clean).unwrap(), classes(&clean).unwrap());
    assert_eq!(out.clean.n_rows(), out.clean_rows.len());
    assert!(out.clean.n_rows() < dirty.n_rows());

    let cfg = small_augment();
    let schema = build_encoding(&out.clean).unwrap();
    let (model, history) = train_vae(&out.clean, &schema, &cfg).unwrap();
    assert_eq!(history.len(), cfg.epochs);
    let aug = generate(&model, cfg.n_aug, 5).unwrap();
    assert_eq!(aug.n_rows(), cfg.n_aug);
    assert_eq!(aug.missing_cells().count(), 0);

    let merged = integrate(&dirty, &aug).unwrap();
    assert_eq!(merged.data.n_rows(), dirty.n_rows() + cfg.n_aug);
    assert_eq!(merged.synthetic_rows(), cfg.n_aug);
    assert_eq!(merged.data.select_rows(&(0..dirty.n_rows()).collect::<Vec<_>>()), dirty);
}

#[test]
fn dirty_table_restores_after_csv_round_trip() {
    let clean = synth::two_class_blobs(300, 3, 1.0, 4);
    let (dirty, mask) = inject(&clean, &InjectionPlan::new(0.25, TypeMix::default(), 4)).unwrap();
    let mut buf = Vec::new();
    write_csv(&dirty, &mut buf).unwrap();
    let opts = LoadOptions {
        label: Some("label".into()),
        ..LoadOptions::default()
    };
    let reloaded = read_csv(buf.as_slice(), &opts).unwrap();
    let restored = restore(&reloaded, &mask).unwrap();
    let mut expected = Vec::new();
    write_csv(&clean, &mut expected).unwrap();
    let mut got = Vec::new();
    write_csv(&restored, &mut got).unwrap();
    assert_eq!(got, expected);
}

#[test]
fn execution_modes_agree() {
    let clean = synth::two_class_blobs(500, 5, 1.0, 8);
    let (dirty, _) = inject(&clean, &InjectionPlan::new(0.15, TypeMix::default(), 8)).unwrap();
    let registry = default_registry();
    let seq = run_all_with(&dirty, &registry, Execution::Sequential);
    let par = run_all_with(&dirty, &registry, Execution::Parallel);
    assert_eq!(seq, par);
    assert_eq!(tally_with(&seq, Execution::Sequential), tally_with(&seq, Execution::Parallel));

    let schema = build_encoding(&clean).unwrap();
    let (model, _) = train_vae(&clean, &schema, &small_augment()).unwrap();
    assert_eq!(
        generate_with(&model, 300, 2, Execution::Sequential).unwrap(),
        generate_with(&model, 300, 2, Execution::Parallel).unwrap()
    );
}

#[test]
fn harness_results_do_not_depend_on_execution_mode() {
    let clean = synth::two_class_blobs(300, 3, 1.5, 9);
    let run = |execution| {
        let mut exp = Experiment::new(clean.clone(), InjectionPlan::new(0.1, TypeMix::default(), 9));
        exp.curate.augment = small_augment();
        exp.harness = HarnessConfig {
            repeats: 2,
            variants: vec![Variant::Dirty, Variant::Curate, Variant::MinK(2)],
            model: ModelConfig {
                epochs: 10,
                ..ModelConfig::default()
            },
            execution,
            ..HarnessConfig::default()
        };
        let report = evaluate(&exp).unwrap();
        report.records.iter().map(|r| r.without_timing()).collect::<Vec<_>>()
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}
