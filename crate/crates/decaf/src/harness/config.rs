//! Experiment configuration and fingerprinting.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{BackboneKind, TrainConfig};
use crate::scmgen::{Recipe, ShiftKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Decaf,
    Erm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Decaf => "decaf",
            Method::Erm => "erm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decaf" => Ok(Method::Decaf),
            "erm" => Ok(Method::Erm),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSpec {
    Recipe {
        recipe: Recipe,
        nodes: usize,
        target_mean_degree: f64,
    },
    Path {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub kind: ShiftKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub num_groups: usize,
    pub major_share: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            num_groups: 3,
            major_share: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub shift: Option<ShiftConfig>,
    #[serde(default)]
    pub split: SplitConfig,
    pub method: Method,
    #[serde(default = "default_backbone")]
    pub backbone: BackboneKind,
    #[serde(default)]
    pub hyper: TrainConfig,
    pub seed: u64,
}

fn default_backbone() -> BackboneKind {
    BackboneKind::Sgc
}

impl ExperimentConfig {
    pub fn default_recipe(recipe: Recipe, method: Method, seed: u64) -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Recipe {
                recipe,
                nodes: 8000,
                target_mean_degree: 20.0,
            },
            shift: None,
            split: SplitConfig::default(),
            method,
            backbone: BackboneKind::Sgc,
            hyper: TrainConfig::default(),
            seed,
        }
    }

    /// Stable content hash over the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialization");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
