use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Layer, Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::geometry::Similarity;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "sdfit-network";

/// A network plus the input normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub normalization: Option<Similarity>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    /// Row-major.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointRecord {
    format: String,
    version: u32,
    spec: NetworkSpec,
    layers: Vec<LayerRecord>,
    normalization: Option<Similarity>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let record = CheckpointRecord {
            format: MAGIC.into(),
            version: CHECKPOINT_VERSION,
            spec: self.network.spec().clone(),
            layers: self
                .network
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    rows: l.weight.nrows(),
                    cols: l.weight.ncols(),
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            normalization: self.normalization.clone(),
        };
        serde_json::to_string(&record).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: CheckpointRecord = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if record.format != MAGIC {
            return Err(Error::Format(format!("not a network checkpoint: '{}'", record.format)));
        }
        if record.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                record.version
            )));
        }
        let layers = record
            .layers
            .into_iter()
            .map(|l| {
                let weight =
                    Array2::from_shape_vec((l.rows, l.cols), l.weight).map_err(|e| Error::Format(e.to_string()))?;
                Ok(Layer {
                    weight,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            network: Network::from_layers(record.spec, layers)?,
            normalization: record.normalization,
        })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint.to_json())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_json(&fs::read_to_string(path)?)
}
