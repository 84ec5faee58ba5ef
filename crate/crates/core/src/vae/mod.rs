//! Variational autoencoder that learns the clean fraction's distribution and
//! samples synthetic rows from it.
//!
//! Encoder `d → 50 → 12 → 2L` (ReLU hidden, identity head split into the
//! latent mean and log-variance); decoder `L → 12 → 50 → d` (ReLU hidden,
//! sigmoid output to match min-max encoded inputs).

mod io;

use ndarray::{concatenate, s, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig, AdamState, Gradients, Network};
use crate::par::Execution;
use crate::seed;
use crate::table::{Dataset, EncodingSchema, FieldEncoding};

pub use io::{read_vae, write_provenance_csv, write_vae, write_vae_history_csv};

pub const HIDDEN_LAYERS: [usize; 2] = [50, 12];
/// Smallest clean fraction the model will be trained on.
pub const MIN_CLEAN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Number of synthetic rows to generate.
    pub n_aug: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    /// Weight of the KL term against the summed squared reconstruction error.
    pub kl_weight: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Sample numeric cells from the decoder's Gaussian around its mean, using
    /// the per-field residual spread on the training rows, instead of emitting
    /// the mean itself.
    pub output_noise: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            n_aug: 0,
            latent_dim: 8,
            epochs: 500,
            kl_weight: 0.1,
            lr: 1e-3,
            batch_size: 64,
            seed: 0,
            output_noise: true,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "latent_dim, epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.kl_weight > 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::Config("kl_weight must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeLoss {
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

/// Batch-mean reconstruction error `Σ(x - x̂)²`, batch-mean KL divergence of
/// `N(μ, exp(logvar))` from `N(0, I)`, and `recon + kl_weight * kl`.
pub fn vae_loss(
    x: &Array2<f64>,
    x_hat: &Array2<f64>,
    mu: &Array2<f64>,
    logvar: &Array2<f64>,
    kl_weight: f64,
) -> Result<VaeLoss> {
    if x.dim() != x_hat.dim() {
        return Err(Error::Shape {
            expected: x.len(),
            got: x_hat.len(),
        });
    }
    if mu.dim() != logvar.dim() || mu.nrows() != x.nrows() {
        return Err(Error::Shape {
            expected: mu.len(),
            got: logvar.len(),
        });
    }
    let finite = |a: &Array2<f64>| a.iter().all(|v| v.is_finite());
    if !(finite(x) && finite(x_hat) && finite(mu) && finite(logvar)) {
        return Err(Error::Numeric("non-finite input to the VAE loss".into()));
    }
    let n = x.nrows().max(1) as f64;
    let recon = Zip::from(x)
        .and(x_hat)
        .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b))
        / n;
    let kl = 0.5
        * Zip::from(mu)
            .and(logvar)
            .fold(0.0, |acc, &m, &lv| acc + m * m + lv.exp() - lv - 1.0)
        / n;
    Ok(VaeLoss {
        recon,
        kl,
        total: recon + kl_weight * kl,
    })
}

/// Standard normal noise of the given shape, drawn row-major.
pub fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// `z = μ + exp(logvar / 2) ⊙ ε` for a given noise draw.
pub fn reparameterize_with(mu: &Array2<f64>, logvar: &Array2<f64>, eps: &Array2<f64>) -> Array2<f64> {
    let mut z = mu.to_owned();
    Zip::from(&mut z)
        .and(logvar)
        .and(eps)
        .for_each(|z, &lv, &e| *z += (0.5 * lv).exp() * e);
    z
}

/// Draws `ε ~ N(0, I)` from `rng` and returns `(z, ε)`.
pub fn reparameterize<R: Rng>(mu: &Array2<f64>, logvar: &Array2<f64>, rng: &mut R) -> (Array2<f64>, Array2<f64>) {
    let eps = standard_normal(mu.nrows(), mu.ncols(), rng);
    (reparameterize_with(mu, logvar, &eps), eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeGradients {
    pub encoder: Gradients,
    pub decoder: Gradients,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeEpoch {
    pub epoch: usize,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub encoder: Network,
    pub decoder: Network,
    pub latent_dim: usize,
    pub schema: EncodingSchema,
    /// Empty table carrying the output columns, label and task.
    pub template: Dataset,
    /// Per encoded field standard deviation of generation noise; zero for
    /// one-hot blocks and when output noise is disabled.
    pub output_std: Vec<f64>,
    pub encoder_adam: AdamState,
    pub decoder_adam: AdamState,
}

impl VaeModel {
    pub fn new(template: &Dataset, schema: &EncodingSchema, cfg: &AugmentConfig) -> Result<Self> {
        cfg.validate()?;
        let d = schema.encoded_width();
        let l = cfg.latent_dim;
        let [h1, h2] = HIDDEN_LAYERS;
        let encoder = Network::new(
            &[d, h1, h2, 2 * l],
            &[Activation::Relu, Activation::Relu, Activation::Identity],
            seed::derive(cfg.seed, 1),
        )?;
        let decoder = Network::new(
            &[l, h2, h1, d],
            &[Activation::Relu, Activation::Relu, Activation::Sigmoid],
            seed::derive(cfg.seed, 2),
        )?;
        let adam = AdamConfig::with_lr(cfg.lr);
        Ok(VaeModel {
            encoder_adam: AdamState::new(&encoder, adam),
            decoder_adam: AdamState::new(&decoder, adam),
            encoder,
            decoder,
            latent_dim: l,
            schema: schema.clone(),
            template: template.empty_like(),
            output_std: vec![0.0; d],
        })
    }

    /// Latent mean and log-variance of a batch.
    pub fn encode(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let h = self.encoder.predict(x)?;
        let l = self.latent_dim;
        Ok((h.slice(s![.., ..l]).to_owned(), h.slice(s![.., l..]).to_owned()))
    }

    pub fn decode(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        self.decoder.predict(z)
    }

    /// Loss of a batch for a fixed noise draw.
    pub fn loss_with_eps(&self, x: &Array2<f64>, eps: &Array2<f64>, kl_weight: f64) -> Result<VaeLoss> {
        let (mu, logvar) = self.encode(x)?;
        let z = reparameterize_with(&mu, &logvar, eps);
        vae_loss(x, &self.decode(&z)?, &mu, &logvar, kl_weight)
    }

    /// Loss and exact gradients through decoder, reparameterization and
    /// encoder. `eps` is treated as a constant.
    pub fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        eps: &Array2<f64>,
        kl_weight: f64,
    ) -> Result<(VaeLoss, VaeGradients)> {
        let l = self.latent_dim;
        let enc_pass = self.encoder.forward(x)?;
        let head = enc_pass.output();
        let mu = head.slice(s![.., ..l]).to_owned();
        let logvar = head.slice(s![.., l..]).to_owned();
        if eps.dim() != mu.dim() {
            return Err(Error::Shape {
                expected: mu.len(),
                got: eps.len(),
            });
        }
        let z = reparameterize_with(&mu, &logvar, eps);
        let dec_pass = self.decoder.forward(&z)?;
        let x_hat = dec_pass.output();
        let loss = vae_loss(x, x_hat, &mu, &logvar, kl_weight)?;

        let n = x.nrows() as f64;
        let d_xhat = (x_hat - x) * (2.0 / n);
        let decoder = self.decoder.backward(&dec_pass, &d_xhat);
        let dz = &decoder.input;

        let mut d_mu = dz.to_owned();
        Zip::from(&mut d_mu)
            .and(&mu)
            .for_each(|g, &m| *g += kl_weight * m / n);
        let mut d_logvar = Array2::zeros(logvar.raw_dim());
        Zip::from(&mut d_logvar)
            .and(dz)
            .and(&logvar)
            .and(eps)
            .for_each(|g, &dz, &lv, &e| {
                let sigma = (0.5 * lv).exp();
                *g = dz * 0.5 * sigma * e + kl_weight * 0.5 * (lv.exp() - 1.0) / n;
            });
        let upstream = concatenate(Axis(1), &[d_mu.view(), d_logvar.view()])
            .expect("matching row counts");
        let encoder = self.encoder.backward(&enc_pass, &upstream);
        Ok((loss, VaeGradients { encoder, decoder }))
    }

    fn apply(&mut self, grads: &VaeGradients) -> Result<()> {
        self.encoder_adam.step(&mut self.encoder, &grads.encoder)?;
        self.decoder_adam.step(&mut self.decoder, &grads.decoder)
    }
}

/// Trains a VAE on every row of `clean`.
pub fn train_vae(
    clean: &Dataset,
    schema: &EncodingSchema,
    cfg: &AugmentConfig,
) -> Result<(VaeModel, Vec<VaeEpoch>)> {
    cfg.validate()?;
    if clean.n_rows() < MIN_CLEAN_ROWS {
        return Err(Error::AugmentationInfeasible {
            rows: clean.n_rows(),
            required: MIN_CLEAN_ROWS,
        });
    }
    let x = schema.encode_all(clean)?;
    let mut model = VaeModel::new(clean, schema, cfg)?;
    let mut rng = seed::rng(seed::derive(cfg.seed, 3));
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 3];
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let eps = standard_normal(batch.len(), model.latent_dim, &mut rng);
            let (loss, grads) = model
                .loss_and_gradients(&xb, &eps, cfg.kl_weight)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            let w = batch.len() as f64;
            sums[0] += loss.recon * w;
            sums[1] += loss.kl * w;
            sums[2] += loss.total * w;
            model
                .apply(&grads)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
        }
        let n = x.nrows() as f64;
        history.push(VaeEpoch {
            epoch,
            recon: sums[0] / n,
            kl: sums[1] / n,
            total: sums[2] / n,
        });
    }
    if cfg.output_noise {
        model.output_std = residual_std(&model, &x, &mut rng)?;
    }
    Ok((model, history))
}

/// Root mean squared reconstruction error of each numeric field over `x`,
/// with latent codes sampled from the posterior.
fn residual_std<R: Rng>(model: &VaeModel, x: &Array2<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let (mu, logvar) = model.encode(x)?;
    let (z, _) = reparameterize(&mu, &logvar, rng);
    let x_hat = model.decode(&z)?;
    let mut std = vec![0.0; x.ncols()];
    let numeric = model
        .schema
        .features()
        .iter()
        .chain(model.schema.label())
        .filter(|f| matches!(f.encoding, FieldEncoding::Numeric { .. }));
    for field in numeric {
        let j = field.offset;
        let sq: f64 = x
            .column(j)
            .iter()
            .zip(x_hat.column(j))
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        std[j] = (sq / x.nrows() as f64).sqrt();
    }
    Ok(std)
}

pub fn generate(model: &VaeModel, n: usize, seed: u64) -> Result<Dataset> {
    generate_with(model, n, seed, Execution::default())
}

/// Decodes `n` draws `z ~ N(0, I)` into rows of the source schema.
///
/// Draws are made row by row (latent code, then output noise), so the first
/// rows of a longer run equal a shorter run with the same seed.
pub fn generate_with(model: &VaeModel, n: usize, seed: u64, exec: Execution) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let l = model.latent_dim;
    let noisy: Vec<usize> = (0..model.output_std.len())
        .filter(|&j| model.output_std[j] > 0.0)
        .collect();
    let mut z = Array2::zeros((n, l));
    let mut noise = Array2::zeros((n, model.output_std.len()));
    for i in 0..n {
        for k in 0..l {
            z[[i, k]] = rng.sample(StandardNormal);
        }
        for &j in &noisy {
            let e: f64 = rng.sample(StandardNormal);
            noise[[i, j]] = e * model.output_std[j];
        }
    }
    const CHUNK: usize = 256;
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let chunks = exec.map(&starts, |&start| -> Result<Vec<_>> {
        let end = (start + CHUNK).min(n);
        let decoded = model.decode(&z.slice(s![start..end, ..]).to_owned())?
            + noise.slice(s![start..end, ..]);
        decoded
            .axis_iter(Axis(0))
            .map(|row| model.schema.decode_row(&row.to_vec()))
            .collect()
    });
    let mut rows = Vec::with_capacity(n);
    for chunk in chunks {
        rows.extend(chunk?);
    }
    model.template.with_rows(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Synthetic,
}

/// Dirty rows followed by synthetic rows, with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrated {
    pub data: Dataset,
    pub provenance: Vec<Origin>,
}

impl Integrated {
    pub fn synthetic_rows(&self) -> usize {
        self.provenance
            .iter()
            .filter(|o| **o == Origin::Synthetic)
            .count()
    }
}

pub fn integrate(dirty: &Dataset, aug: &Dataset) -> Result<Integrated> {
    if !dirty.same_structure(aug) {
        return Err(Error::Integration(
            "augmented rows do not share the dirty table's columns".into(),
        ));
    }
    let rows = dirty.rows().iter().chain(aug.rows()).cloned().collect();
    let mut provenance = vec![Origin::Original; dirty.n_rows()];
    provenance.resize(dirty.n_rows() + aug.n_rows(), Origin::Synthetic);
    Ok(Integrated {
        data: dirty.with_rows(rows)?,
        provenance,
    })
}
