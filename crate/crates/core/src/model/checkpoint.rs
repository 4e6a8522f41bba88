use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, Params, Vocabulary};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    arrays: BTreeMap<String, Array>,
}

impl Model {
    /// JSON checkpoint. Floats are written in shortest round-trip form, so
    /// loading gives back the same bits.
    pub fn to_json(&self) -> String {
        let arrays = Params::NAMES
            .iter()
            .zip(self.params.tensors())
            .map(|(name, t)| {
                (
                    name.to_string(),
                    Array {
                        shape: t.shape().to_vec(),
                        data: t.data().to_vec(),
                    },
                )
            })
            .collect();
        let ck = Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.tokens().to_vec(),
            arrays,
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Input(format!(
                "checkpoint format_version {} is not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                ck.format_version
            )));
        }
        if let Some(extra) = ck.arrays.keys().find(|k| !Params::NAMES.contains(&k.as_str())) {
            return Err(Error::Input(format!("unknown array {extra:?} in checkpoint")));
        }
        let mut tensors = Vec::with_capacity(Params::NAMES.len());
        for name in Params::NAMES {
            let a = ck.arrays.remove(name).ok_or_else(|| Error::Input(format!("checkpoint lacks array {name:?}")))?;
            tensors.push(Tensor::new(a.shape, a.data)?);
        }
        let tensors: [Tensor; 11] = tensors.try_into().expect("one tensor per name");
        Model::from_parts(ck.config, Vocabulary::from_tokens(ck.vocab)?, Params::from_tensors(tensors))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
