use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, EpochLoss, Layer, Network};
use crate::error::{Error, Result};

pub const NETWORK_FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "curate-network";

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct LayerRecord {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct NetworkRecord {
    format: String,
    version: u32,
    seed: u64,
    layers: Vec<LayerRecord>,
}

impl From<&Network> for NetworkRecord {
    fn from(net: &Network) -> Self {
        NetworkRecord {
            format: FORMAT_NAME.into(),
            version: NETWORK_FORMAT_VERSION,
            seed: net.seed,
            layers: net
                .layers
                .iter()
                .map(|l| LayerRecord {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkRecord> for Network {
    type Error = Error;

    fn try_from(rec: NetworkRecord) -> Result<Self> {
        if rec.format != FORMAT_NAME || rec.version != NETWORK_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported network format {} v{}",
                rec.format, rec.version
            )));
        }
        let mut layers = Vec::with_capacity(rec.layers.len());
        for (i, l) in rec.layers.into_iter().enumerate() {
            let weights = Array2::from_shape_vec((l.outputs, l.inputs), l.weights)
                .map_err(|e| Error::Schema(format!("layer {i} weights: {e}")))?;
            if l.bias.len() != l.outputs {
                return Err(Error::Shape {
                    expected: l.outputs,
                    got: l.bias.len(),
                });
            }
            if let Some(prev) = layers.last().map(Layer::outputs) {
                if prev != l.inputs {
                    return Err(Error::Shape {
                        expected: prev,
                        got: l.inputs,
                    });
                }
            }
            layers.push(Layer {
                weights,
                bias: Array1::from(l.bias),
                activation: l.activation,
            });
        }
        if layers.is_empty() {
            return Err(Error::Schema("network has no layers".into()));
        }
        let net = Network {
            layers,
            seed: rec.seed,
        };
        if !net.is_finite() {
            return Err(Error::Schema("network parameters are not finite".into()));
        }
        Ok(net)
    }
}

pub fn write_network<W: Write>(net: &Network, writer: W) -> Result<()> {
    serde_json::to_writer(writer, &NetworkRecord::from(net))
        .map_err(|e| Error::io("<network>", std::io::Error::other(e)))
}

pub fn read_network<R: Read>(reader: R) -> Result<Network> {
    let rec: NetworkRecord = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        row: e.line(),
        message: e.to_string(),
    })?;
    Network::try_from(rec)
}

/// `epoch,train_loss,val_loss` with an empty field when there is no validation loss.
pub fn write_history_csv<W: Write>(history: &[EpochLoss], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::io("<history>", std::io::Error::other(e));
    w.write_record(["epoch", "train_loss", "val_loss"]).map_err(wrap)?;
    for h in history {
        w.write_record([
            h.epoch.to_string(),
            h.train.to_string(),
            h.val.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<history>", e))
}
