//! Learned models: the causal-decoupling pipeline, the ERM baselines, and
//! checkpoint persistence.

mod erm;
mod mlp;
mod pipeline;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::Backbone;
use crate::{Error, Result};

pub use erm::{erm_predict, train_erm, BackboneKind};
pub use mlp::Mlp;
pub use pipeline::{
    argmax_rows, background_counterfactual, estimate_effects, materialize_shared, per_class_dot,
    per_class_dot_on_tape, predict, predict_from_effects, scm_a_logits, scm_x_logits, train_decaf,
    train_encoder, train_scm_a, train_scm_x, BackgroundSample, DecafModel, EffectEstimates,
    Encoder, Head, MaterializedShared, ScmA, ScmX, TrainConfig,
};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SavedModel {
    Decaf(DecafModel),
    Erm(Backbone),
}

/// Versioned JSON container for a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_fingerprint: String,
    pub model: SavedModel,
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string(checkpoint)
        .map_err(|e| Error::invalid(format!("checkpoint serialization: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported checkpoint version {}",
            ckpt.version
        )));
    }
    Ok(ckpt)
}
