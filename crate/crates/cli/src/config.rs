//! TOML engine configuration and its cross-field validation.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use curate_core::detect::{default_registry, Detector, DetectorSpec, FdRule};
use curate_core::eval::{CurateConfig, Experiment, HarnessConfig};
use curate_core::inject::{ErrorType, InjectionPlan, TypeMix};
use curate_core::seed;
use curate_core::table::{load_csv, ColumnKind, Dataset, LoadOptions, Task, DEFAULT_MISSING_TOKENS};
use curate_core::vae::AugmentConfig;
use curate_core::vote::VoteParams;
use curate_core::{Error, Result};

/// Seed streams derived from the top-level seed.
const INJECT_STREAM: u64 = 101;
const AUGMENT_STREAM: u64 = 102;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    /// Root of every random stream.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    /// Detector registry; the built-in registry when absent.
    pub detectors: Option<Vec<DetectorSpec>>,
    #[serde(default)]
    pub fd_rules: Vec<FdRule>,
    #[serde(default)]
    pub voting: VoteParams,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub inject: InjectSection,
    #[serde(default)]
    pub harness: HarnessConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub label: Option<String>,
    pub task: Option<Task>,
    pub missing_tokens: Option<Vec<String>>,
    /// Column kind overrides, by column name.
    #[serde(default)]
    pub schema: HashMap<String, ColumnKind>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub n_aug: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    pub kl_weight: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub output_noise: bool,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentConfig::default();
        AugmentSection {
            n_aug: d.n_aug,
            latent_dim: d.latent_dim,
            epochs: d.epochs,
            kl_weight: d.kl_weight,
            lr: d.lr,
            batch_size: d.batch_size,
            output_noise: d.output_noise,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectSection {
    pub gamma: f64,
    /// Error types mixed uniformly; ignored when `type_mix` is given.
    pub types: Vec<String>,
    pub type_mix: Option<TypeMix>,
    pub outlier_scale: f64,
}

impl Default for InjectSection {
    fn default() -> Self {
        let plan = InjectionPlan::default();
        InjectSection {
            gamma: plan.gamma,
            types: vec!["MV".into(), "OT".into()],
            type_mix: None,
            outlier_scale: plan.outlier_scale,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_aug: Option<usize>,
    pub gamma: Option<f64>,
}

impl EngineConfig {
    /// Every setting at its default, writing to `out`.
    pub fn default_with_output() -> Self {
        Self::from_toml("").expect("an empty config is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative data paths are resolved against the config file's directory.
        if let (Some(data), Some(dir)) = (&cfg.data.path, path.parent()) {
            if data.is_relative() {
                cfg.data.path = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.input {
            self.data.path = Some(p.clone());
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.n_aug {
            self.augment.n_aug = n;
        }
        if let Some(g) = o.gamma {
            self.inject.gamma = g;
        }
    }

    /// Registry with fd detectors bound to the top-level rules.
    pub fn registry(&self) -> Vec<DetectorSpec> {
        let mut specs = self.detectors.clone().unwrap_or_else(|| {
            let mut d = default_registry();
            if !self.fd_rules.is_empty() {
                d.push(DetectorSpec::Fd { rules: Vec::new() });
            }
            d
        });
        for spec in &mut specs {
            if let DetectorSpec::Fd { rules } = spec {
                if rules.is_empty() {
                    *rules = self.fd_rules.clone();
                }
            }
        }
        specs
    }

    pub fn type_mix(&self) -> Result<TypeMix> {
        if let Some(mix) = self.inject.type_mix {
            return Ok(mix);
        }
        let types = self
            .inject
            .types
            .iter()
            .map(|t| t.parse::<ErrorType>())
            .collect::<Result<Vec<_>>>()?;
        if types.is_empty() {
            return Err(Error::Config("inject.types is empty".into()));
        }
        Ok(TypeMix::uniform(&types))
    }

    pub fn plan(&self) -> Result<InjectionPlan> {
        Ok(InjectionPlan {
            gamma: self.inject.gamma,
            type_mix: self.type_mix()?,
            fd_rules: self.fd_rules.clone(),
            outlier_scale: self.inject.outlier_scale,
            seed: seed::derive(self.seed, INJECT_STREAM),
        })
    }

    pub fn augment_config(&self) -> AugmentConfig {
        let a = &self.augment;
        AugmentConfig {
            n_aug: a.n_aug,
            latent_dim: a.latent_dim,
            epochs: a.epochs,
            kl_weight: a.kl_weight,
            lr: a.lr,
            batch_size: a.batch_size,
            seed: seed::derive(self.seed, AUGMENT_STREAM),
            output_noise: a.output_noise,
        }
    }

    pub fn curate_config(&self) -> CurateConfig {
        CurateConfig {
            detectors: self.registry(),
            voting: self.voting,
            augment: self.augment_config(),
        }
    }

    pub fn harness(&self) -> HarnessConfig {
        HarnessConfig {
            seed: self.seed,
            ..self.harness.clone()
        }
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            schema_hint: self.data.schema.clone(),
            label: self.data.label.clone(),
            task: self.data.task,
            missing_tokens: self.data.missing_tokens.clone().unwrap_or_else(|| {
                DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
            }),
        }
    }

    pub fn input_path(&self) -> Result<&Path> {
        self.data
            .path
            .as_deref()
            .ok_or_else(|| Error::Config("no input dataset (set data.path or pass --input)".into()))
    }

    pub fn load_data(&self) -> Result<Dataset> {
        load_csv(self.input_path()?, &self.load_options())
    }

    /// Checks every cross-field rule that does not need the data.
    pub fn validate(&self) -> Result<()> {
        if matches!(self.data.task, Some(Task::Classification | Task::Regression))
            && self.data.label.is_none()
        {
            return Err(Error::Config(format!(
                "data.task = {:?} requires data.label",
                self.data.task.expect("checked")
            )));
        }
        if self.data.task == Some(Task::None) && self.data.label.is_some() {
            return Err(Error::Config("data.label is set but data.task is none".into()));
        }
        // may be empty here: external detection sets can supply every detector
        let registry = self.registry();
        let mut ids = std::collections::BTreeSet::new();
        for spec in &registry {
            spec.validate()?;
            if !ids.insert(spec.id()) {
                return Err(Error::Config(format!("detector '{}' is declared twice", spec.id())));
            }
            if let DetectorSpec::External { id, .. } = spec {
                return Err(Error::Config(format!(
                    "external detector '{id}' cannot be declared in the config; pass its output with --detections"
                )));
            }
        }
        self.voting.validate()?;
        self.augment_config().validate()?;
        self.plan()?.validate().map_err(|e| match e {
            Error::Plan(msg) => Error::Config(format!("inject: {msg}")),
            other => other,
        })?;
        self.harness.validate()?;
        if let Some(ks) = &self.harness.k_range {
            let m = registry.len() as u32;
            if let Some(k) = ks.iter().find(|&&k| k > m) {
                return Err(Error::Config(format!(
                    "harness.k_range contains {k} but only {m} detectors are registered"
                )));
            }
        }
        Ok(())
    }

    /// Validation specific to the evaluation commands.
    pub fn validate_for_evaluation(&self) -> Result<()> {
        self.validate()?;
        if self.data.label.is_none() {
            return Err(Error::Config(
                "evaluation commands need a labelled dataset (set data.label)".into(),
            ));
        }
        Ok(())
    }

    pub fn experiment(&self, clean: Dataset) -> Result<Experiment> {
        Ok(Experiment {
            clean,
            plan: self.plan()?,
            curate: self.curate_config(),
            harness: self.harness(),
        })
    }
}
