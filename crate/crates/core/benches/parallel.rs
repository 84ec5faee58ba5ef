//! Sequential against data-parallel execution of the parallelised stages.
//!
//! Without the `parallel` feature both modes run the sequential code path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use curate_core::detect::{default_registry, run_all_with};
use curate_core::eval::{evaluate, Experiment, HarnessConfig, ModelConfig, Variant};
use curate_core::inject::{inject, InjectionPlan, TypeMix};
use curate_core::table::build_encoding;
use curate_core::vae::{generate_with, train_vae, AugmentConfig};
use curate_core::vote::tally_with;
use curate_core::{synth, Execution};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn detectors(c: &mut Criterion) {
    let clean = synth::two_class_blobs(5000, 8, 1.0, 1);
    let (dirty, _) = inject(&clean, &InjectionPlan::new(0.2, TypeMix::default(), 1)).unwrap();
    let registry = default_registry();
    let mut group = c.benchmark_group("run_all");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_all_with(black_box(&dirty), &registry, exec))
        });
    }
    group.finish();
}

fn voting(c: &mut Criterion) {
    let ds = synth::random_labeled(20_000, 8, 3, 2);
    let detections = synth::random_detections(&ds, 7, 0.2, 2);
    let mut group = c.benchmark_group("tally");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| tally_with(black_box(&detections), exec))
        });
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let train = synth::two_class_blobs(500, 8, 1.0, 3);
    let schema = build_encoding(&train).unwrap();
    let cfg = AugmentConfig {
        epochs: 20,
        ..AugmentConfig::default()
    };
    let (model, _) = train_vae(&train, &schema, &cfg).unwrap();
    let mut group = c.benchmark_group("generate");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_with(black_box(&model), 5000, 4, exec).unwrap())
        });
    }
    group.finish();
}

fn harness(c: &mut Criterion) {
    let clean = synth::two_class_blobs(600, 4, 1.5, 5);
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut exp = Experiment::new(clean.clone(), InjectionPlan::new(0.1, TypeMix::default(), 5));
        exp.curate.augment.n_aug = 200;
        exp.curate.augment.epochs = 20;
        exp.harness = HarnessConfig {
            repeats: 4,
            variants: vec![Variant::Clean, Variant::Dirty, Variant::StdImpute, Variant::MinK(2)],
            model: ModelConfig {
                epochs: 10,
                ..ModelConfig::default()
            },
            execution: exec,
            ..HarnessConfig::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate(black_box(&exp)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, detectors, voting, generation, harness);
criterion_main!(benches);
