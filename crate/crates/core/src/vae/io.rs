use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Origin, VaeEpoch, VaeModel};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Network, NetworkRecord};
use crate::table::{Column, Dataset, EncodingSchema, Task};

const FORMAT_NAME: &str = "curate-vae";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct VaeRecord {
    format: String,
    version: u32,
    latent_dim: usize,
    columns: Vec<Column>,
    label: Option<usize>,
    task: Task,
    schema: EncodingSchema,
    encoder: NetworkRecord,
    decoder: NetworkRecord,
    #[serde(default)]
    output_std: Vec<f64>,
}

/// Writes the trained networks, encoding schema and output columns as JSON.
/// Optimizer state is not stored.
pub fn write_vae<W: Write>(model: &VaeModel, writer: W) -> Result<()> {
    let rec = VaeRecord {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        latent_dim: model.latent_dim,
        columns: model.template.columns().to_vec(),
        label: model.template.label_col(),
        task: model.template.task(),
        schema: model.schema.clone(),
        encoder: NetworkRecord::from(&model.encoder),
        decoder: NetworkRecord::from(&model.decoder),
        output_std: model.output_std.clone(),
    };
    serde_json::to_writer(writer, &rec).map_err(|e| Error::io("<vae>", std::io::Error::other(e)))
}

pub fn read_vae<R: Read>(reader: R) -> Result<VaeModel> {
    let rec: VaeRecord = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        row: e.line(),
        message: e.to_string(),
    })?;
    if rec.format != FORMAT_NAME || rec.version != FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported model format {} v{}",
            rec.format, rec.version
        )));
    }
    let encoder = Network::try_from(rec.encoder)?;
    let decoder = Network::try_from(rec.decoder)?;
    let width = rec.schema.encoded_width();
    if encoder.input_dim() != width
        || decoder.output_dim() != width
        || encoder.output_dim() != 2 * rec.latent_dim
        || decoder.input_dim() != rec.latent_dim
    {
        return Err(Error::Schema(
            "model networks do not match the encoding schema".into(),
        ));
    }
    if rec.schema.n_cols() != rec.columns.len() {
        return Err(Error::Schema(
            "encoding schema does not match the column list".into(),
        ));
    }
    let template = Dataset::new(rec.columns, Vec::new(), rec.label, rec.task)?;
    let output_std = if rec.output_std.is_empty() {
        vec![0.0; width]
    } else if rec.output_std.len() == width && rec.output_std.iter().all(|s| s.is_finite() && *s >= 0.0) {
        rec.output_std
    } else {
        return Err(Error::Schema("invalid output noise in model file".into()));
    };
    Ok(VaeModel {
        encoder_adam: AdamState::new(&encoder, AdamConfig::default()),
        decoder_adam: AdamState::new(&decoder, AdamConfig::default()),
        encoder,
        decoder,
        latent_dim: rec.latent_dim,
        schema: rec.schema,
        template,
        output_std,
    })
}

/// `row_index,origin` with origin `original` or `synthetic`.
pub fn write_provenance_csv<W: Write>(provenance: &[Origin], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::io("<provenance>", std::io::Error::other(e));
    w.write_record(["row_index", "origin"]).map_err(wrap)?;
    for (i, o) in provenance.iter().enumerate() {
        let origin = match o {
            Origin::Original => "original",
            Origin::Synthetic => "synthetic",
        };
        w.write_record([i.to_string().as_str(), origin]).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<provenance>", e))
}

/// `epoch,recon_loss,kl_loss,total_loss`.
pub fn write_vae_history_csv<W: Write>(history: &[VaeEpoch], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::io("<history>", std::io::Error::other(e));
    w.write_record(["epoch", "recon_loss", "kl_loss", "total_loss"])
        .map_err(wrap)?;
    for h in history {
        w.write_record([
            h.epoch.to_string(),
            h.recon.to_string(),
            h.kl.to_string(),
            h.total.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<history>", e))
}
