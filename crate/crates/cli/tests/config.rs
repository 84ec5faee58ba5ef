use curate_cli::{EngineConfig, Overrides};
use curate_core::detect::{Detector, DetectorSpec};
use curate_core::eval::Variant;
use curate_core::inject::TypeMix;
use curate_core::seed;
use curate_core::Error;

fn parse(text: &str) -> EngineConfig {
    EngineConfig::from_toml(text).unwrap()
}

fn config_error(text: &str) -> String {
    let err = EngineConfig::from_toml(text).and_then(|c| c.validate()).unwrap_err();
    match err {
        Error::Config(msg) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn empty_file_gives_defaults() {
    let cfg = parse("");
    cfg.validate().unwrap();
    let ids: Vec<String> = cfg.registry().iter().map(|d| d.id()).collect();
    assert_eq!(ids, ["mv", "sd", "iqr", "mad", "dup", "typo"]);
    assert_eq!(cfg.voting.k_init, 2);
    assert_eq!(cfg.augment.epochs, 500);
    assert_eq!(cfg.plan().unwrap().type_mix, TypeMix::default());
    assert_eq!(cfg.harness.repeats, 3);
}

#[test]
fn readme_example_parses_and_validates() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + "```toml\n".len();
    let end = start + readme[start..].find("```").unwrap();
    let cfg = parse(&readme[start..end]);
    cfg.validate().unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.data.label.as_deref(), Some("diagnosis"));
    assert!(cfg.registry().iter().any(|d| matches!(d, DetectorSpec::Fd { rules } if rules.len() == 1)));
    assert_eq!(cfg.harness.variants.len(), 6);
    assert!(cfg.harness.variants.contains(&Variant::MinK(3)));
}

#[test]
fn fd_detectors_take_top_level_rules() {
    let cfg = parse(
        r#"
        [[detectors]]
        kind = "fd"
        [[detectors]]
        kind = "sd"
        param = 2.5
        [[fd_rules]]
        lhs = ["a", "b"]
        rhs = "c"
        "#,
    );
    cfg.validate().unwrap();
    match &cfg.registry()[0] {
        DetectorSpec::Fd { rules } => assert_eq!(rules[0].lhs, ["a", "b"]),
        other => panic!("{other:?}"),
    }
    assert_eq!(cfg.registry()[1], DetectorSpec::Sd { param: 2.5 });
}

#[test]
fn cross_field_rules_are_enforced() {
    assert!(config_error("[inject]\ntypes = [\"RV\"]\n").contains("fd rules"));
    assert!(config_error("[[detectors]]\nkind = \"fd\"\n").contains("without any rules"));
    assert!(config_error("[data]\ntask = \"regression\"\n").contains("requires data.label"));
    assert!(config_error("[harness]\nk_range = [2, 7]\n").contains("only 6 detectors"));
    assert!(config_error("[[detectors]]\nkind = \"sd\"\n[[detectors]]\nkind = \"sd\"\n").contains("twice"));
    assert!(config_error("[inject]\ntypes = [\"XX\"]\n").contains("unknown error type"));
    assert!(config_error("[inject]\ngamma = 1.5\n").contains("gamma"));
    assert!(config_error("[augment]\nlatent_dim = 0\n").contains("latent"));
    // misspelt keys in nested tables are rejected too
    assert!(EngineConfig::from_toml("[voting]\nk = 3\n").is_err());
    assert!(EngineConfig::from_toml("[[detectors]]\nkind = \"sd\"\nparm = 2.0\n").is_err());
    assert!(EngineConfig::from_toml("[harness.model]\nepoch = 2\n").is_err());
}

#[test]
fn evaluation_needs_a_label() {
    let cfg = parse("");
    assert!(matches!(cfg.validate_for_evaluation(), Err(Error::Config(_))));
    parse("[data]\nlabel = \"y\"\n").validate_for_evaluation().unwrap();
}

#[test]
fn overrides_take_precedence() {
    let mut cfg = parse("seed = 1\n[augment]\nn_aug = 5\n[inject]\ngamma = 0.3\n");
    cfg.apply(&Overrides {
        input: Some("x.csv".into()),
        output_dir: Some("elsewhere".into()),
        seed: Some(9),
        n_aug: Some(40),
        gamma: None,
    });
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.augment.n_aug, 40);
    assert_eq!(cfg.inject.gamma, 0.3);
    assert_eq!(cfg.input_path().unwrap(), std::path::Path::new("x.csv"));
    assert_eq!(cfg.output_dir, std::path::Path::new("elsewhere"));
}

#[test]
fn subsystem_seeds_derive_from_the_top_level_seed() {
    let a = parse("seed = 4\n");
    let b = parse("seed = 5\n");
    assert_eq!(a.plan().unwrap().seed, seed::derive(4, 101));
    assert_eq!(a.augment_config().seed, seed::derive(4, 102));
    assert_ne!(a.plan().unwrap().seed, b.plan().unwrap().seed);
    assert_ne!(a.plan().unwrap().seed, a.augment_config().seed);
    assert_eq!(a.harness().seed, 4);
}

#[test]
fn relative_data_path_resolves_against_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.toml");
    std::fs::write(&path, "[data]\npath = \"data/t.csv\"\n").unwrap();
    let cfg = EngineConfig::load(&path).unwrap();
    assert_eq!(cfg.input_path().unwrap(), tmp.path().join("data/t.csv"));
}
