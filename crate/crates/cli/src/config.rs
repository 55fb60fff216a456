//! JSON run configuration: every field has a default, unknown keys are
//! rejected, and type errors name the offending key.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use dyngraph_core::features::MfccConfig;
use dyngraph_core::graph::{EdgePolicy, PositionalMode};
use dyngraph_core::model::AdjacencyVariant;
use dyngraph_core::training::{derive_seed, GraphBuildConfig, TrainConfig};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    /// Sliding-window length in frames (nodes per segment graph).
    pub window: usize,
    /// Sliding-window hop in frames.
    pub hop: usize,
    /// Fix every sequence to this many frames before segmentation.
    pub target_frames: Option<usize>,
    pub edges: EdgeSection,
    pub adjacency: AdjacencySection,
    pub train: TrainSection,
    pub mfcc: MfccSection,
    pub seed: u64,
    /// Worker threads for fold-level parallelism.
    pub jobs: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::default(),
            window: 40,
            hop: 40,
            target_frames: None,
            edges: EdgeSection::default(),
            adjacency: AdjacencySection::default(),
            train: TrainSection::default(),
            mfcc: MfccSection::default(),
            seed: 0,
            jobs: 1,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Deterministic sinusoid-class dataset generated in memory.
    Synthetic {
        #[serde(default = "default_n_per_class")]
        n_per_class: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_frames")]
        frames: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    /// Precomputed per-frame feature CSVs listed in a manifest.
    Manifest { path: PathBuf },
}

fn default_n_per_class() -> usize {
    10
}
fn default_classes() -> usize {
    4
}
fn default_frames() -> usize {
    40
}
fn default_dim() -> usize {
    8
}
fn default_noise() -> f64 {
    0.3
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic {
            n_per_class: default_n_per_class(),
            classes: default_classes(),
            frames: default_frames(),
            dim: default_dim(),
            noise: default_noise(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeSection {
    pub neighbor_radius: usize,
    pub random_edges_per_node: usize,
    pub min_random_distance: usize,
}

impl Default for EdgeSection {
    fn default() -> Self {
        let p = EdgePolicy::default();
        EdgeSection {
            neighbor_radius: p.neighbor_radius,
            random_edges_per_node: p.random_edges_per_node,
            min_random_distance: p.min_random_distance,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AdjacencySection {
    pub phi: f64,
    pub variant: VariantName,
    pub positional_mode: PositionalName,
}

impl Default for AdjacencySection {
    fn default() -> Self {
        AdjacencySection {
            phi: 0.6,
            variant: VariantName::Full,
            positional_mode: PositionalName::Squared,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum VariantName {
    Binary,
    Weighted,
    LearnOnly,
    DiceOnly,
    Full,
}

impl From<VariantName> for AdjacencyVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Binary => AdjacencyVariant::Binary,
            VariantName::Weighted => AdjacencyVariant::Weighted,
            VariantName::LearnOnly => AdjacencyVariant::LearnOnly,
            VariantName::DiceOnly => AdjacencyVariant::DiceOnly,
            VariantName::Full => AdjacencyVariant::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PositionalName {
    Squared,
    InverseSquared,
}

impl From<PositionalName> for PositionalMode {
    fn from(p: PositionalName) -> Self {
        match p {
            PositionalName::Squared => PositionalMode::Squared,
            PositionalName::InverseSquared => PositionalMode::InverseSquared,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub iters_per_epoch: usize,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub early_stop_patience: usize,
    pub folds: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub hidden_dim: usize,
    pub flip_structure_sign: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            iters_per_epoch: t.iters_per_epoch,
            decay_factor: t.decay_factor,
            decay_every: t.decay_every,
            early_stop_patience: t.early_stop_patience,
            folds: t.folds,
            lambda1: t.lambda1,
            lambda2: t.lambda2,
            hidden_dim: t.hidden_dim,
            flip_structure_sign: t.flip_structure_sign,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MfccSection {
    pub sample_rate: u32,
    pub frame_ms: u32,
    pub hop_ms: u32,
    pub n_mels: usize,
    pub n_mfcc: usize,
}

impl Default for MfccSection {
    fn default() -> Self {
        let m = MfccConfig::default();
        MfccSection {
            sample_rate: m.sample_rate,
            frame_ms: m.frame_ms,
            hop_ms: m.hop_ms,
            n_mels: m.n_mels,
            n_mfcc: m.n_mfcc,
        }
    }
}

impl RunConfig {
    /// Loads and validates a config file; a missing `--config` means all
    /// defaults. Unknown or ill-typed keys are usage errors naming the key.
    pub fn load(path: Option<&Path>) -> CliResult<RunConfig> {
        let cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))
                    .map_err(CliError::usage)?;
                let deserializer = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(deserializer)
                    .map_err(|e| {
                        CliError::usage(anyhow::anyhow!(
                            "config key '{}': {}",
                            e.path(),
                            e.inner()
                        ))
                    })?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.to_train_config().validate().map_err(CliError::usage)?;
        self.edge_policy().validate().map_err(CliError::usage)?;
        self.to_mfcc_config().validate().map_err(CliError::usage)?;
        if self.window < 2 || self.hop == 0 {
            return Err(CliError::usage(anyhow::anyhow!(
                "window must be >= 2 and hop >= 1"
            )));
        }
        if self.jobs == 0 {
            return Err(CliError::usage(anyhow::anyhow!("jobs must be >= 1")));
        }
        Ok(())
    }

    /// Edge randomness gets its own stream derived from the run seed.
    pub fn edge_policy(&self) -> EdgePolicy {
        EdgePolicy {
            neighbor_radius: self.edges.neighbor_radius,
            random_edges_per_node: self.edges.random_edges_per_node,
            min_random_distance: self.edges.min_random_distance,
            seed: derive_seed(self.seed, 0x6564_6765),
        }
    }

    pub fn graph_build_config(&self) -> GraphBuildConfig {
        GraphBuildConfig {
            window: self.window,
            hop: self.hop,
            policy: self.edge_policy(),
            positional_mode: self.adjacency.positional_mode.into(),
        }
    }

    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.train.lr,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            iters_per_epoch: self.train.iters_per_epoch,
            decay_factor: self.train.decay_factor,
            decay_every: self.train.decay_every,
            early_stop_patience: self.train.early_stop_patience,
            folds: self.train.folds,
            lambda1: self.train.lambda1,
            lambda2: self.train.lambda2,
            phi: self.adjacency.phi,
            seed: self.seed,
            variant: self.adjacency.variant.into(),
            hidden_dim: self.train.hidden_dim,
            flip_structure_sign: self.train.flip_structure_sign,
        }
    }

    pub fn to_mfcc_config(&self) -> MfccConfig {
        MfccConfig {
            sample_rate: self.mfcc.sample_rate,
            frame_ms: self.mfcc.frame_ms,
            hop_ms: self.mfcc.hop_ms,
            n_mels: self.mfcc.n_mels,
            n_mfcc: self.mfcc.n_mfcc,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"train": {"lr": 0.001, "not_a_knob": 3}}"#;
        let deserializer = &mut serde_json::Deserializer::from_str(text);
        let res: Result<RunConfig, _> = serde_path_to_error::deserialize(deserializer);
        assert!(res.is_err());
    }

    #[test]
    fn type_errors_name_the_key() {
        let text = r#"{"train": {"lambda1": "high"}}"#;
        let deserializer = &mut serde_json::Deserializer::from_str(text);
        let res: Result<RunConfig, _> = serde_path_to_error::deserialize(deserializer);
        let err = res.unwrap_err();
        assert!(err.path().to_string().contains("lambda1"), "{}", err.path());
    }
}
