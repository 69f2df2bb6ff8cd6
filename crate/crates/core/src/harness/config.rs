use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::docmodel::PlanMode;
use crate::model::ModelConfig;
use crate::numerics::AdamConfig;
use crate::reasoner::StructureMode;

/// Flat run configuration; every field has a default so a config file
/// only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Optional `token v1 … vd` embedding file.
    pub embeddings: Option<PathBuf>,
    pub mode: PlanMode,
    pub structure: StructureMode,
    pub share_induction: bool,
    pub residual: bool,
    pub d: usize,
    pub d_emb: usize,
    pub blocks: usize,
    pub sub_layers: usize,
    /// Relation count; inferred from the corpora when absent.
    pub relations: Option<usize>,
    pub batch_size: usize,
    pub lr: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Fixed decision threshold; tuned on dev when absent.
    pub threshold: Option<f64>,
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: None,
            dev: None,
            test: None,
            embeddings: None,
            mode: PlanMode::WithMdp,
            structure: StructureMode::Induced,
            share_induction: false,
            residual: false,
            d: 120,
            d_emb: 100,
            blocks: 2,
            sub_layers: 2,
            relations: None,
            batch_size: 20,
            lr: 0.001,
            dropout: 0.3,
            epochs: 10,
            seed: 1,
            threshold: None,
            checkpoint: None,
            log: None,
            report: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.d == 0 || self.d % 2 != 0 {
            return bad("d must be a positive even number");
        }
        if self.sub_layers == 0 || self.d % self.sub_layers != 0 {
            return bad("d must be divisible by sub_layers");
        }
        if self.blocks == 0 {
            return bad("blocks must be at least 1");
        }
        if self.d_emb == 0 || self.batch_size == 0 {
            return bad("d_emb and batch_size must be positive");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.relations == Some(0) {
            return bad("relations must be positive");
        }
        Ok(())
    }

    pub fn model_config(&self, relations: usize) -> ModelConfig {
        ModelConfig {
            d_emb: self.d_emb,
            d: self.d,
            blocks: self.blocks,
            sub_layers: self.sub_layers,
            relations,
            dropout: self.dropout,
            mode: self.mode,
            structure: self.structure,
            share_induction: self.share_induction,
            residual: self.residual,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = RunConfig::default();
        assert_eq!((c.batch_size, c.lr, c.d, c.blocks, c.dropout), (20, 0.001, 120, 2, 0.3));
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"epochs": 3, "mode": "full-tokens"}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.mode, PlanMode::FullTokens);
        assert_eq!(c.d, 120);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"epoch": 3}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for c in [
            RunConfig { d: 7, ..RunConfig::default() },
            RunConfig { blocks: 0, ..RunConfig::default() },
            RunConfig { dropout: 1.0, ..RunConfig::default() },
            RunConfig { sub_layers: 7, ..RunConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
