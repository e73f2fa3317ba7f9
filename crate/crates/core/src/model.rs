use std::path::Path;

use lane_tensor::{checkpoint, Group, ParamId, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::vocab::Vocab;
use crate::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of embeddings, hidden states and key vectors.
    pub dim: usize,
    /// Number of memory items.
    pub pool: usize,
    /// Longest skeleton the solver may emit.
    pub skeleton_cap: usize,
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 128,
            pool: 3,
            skeleton_cap: 16,
            init_scale: 0.08,
        }
    }
}

/// Handles of every learnable array.
#[derive(Debug, Clone, Copy)]
pub struct ParamIds {
    pub src_emb: ParamId,
    pub src_key: ParamId,
    pub dst_key: ParamId,
    pub leaf_w: ParamId,
    pub leaf_b: ParamId,
    pub tree_w: ParamId,
    pub tree_b: ParamId,
    pub query: ParamId,
    pub check_w: ParamId,
    pub check_b: ParamId,
    pub enc_w: ParamId,
    pub enc_b: ParamId,
    pub dec_w: ParamId,
    pub dec_b: ParamId,
    pub dec_in: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub out_emb: ParamId,
}

/// Manifest stored alongside checkpoint tensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub seed: u64,
    pub lesson: usize,
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    pub ids: ParamIds,
}

impl Model {
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        if config.dim == 0 || config.pool == 0 || config.skeleton_cap == 0 {
            return Err(ModelError::Config(
                "dim, pool and skeleton_cap must be positive".into(),
            ));
        }
        if vocab.src.is_empty() || vocab.dst.is_empty() {
            return Err(ModelError::Config("empty vocabulary".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.dim;
        let s = config.init_scale;
        let n_src = vocab.src.len();
        let n_dst = vocab.dst.len();
        let mut store = ParamStore::new();
        let mut w = |store: &mut ParamStore, name: &str, group, shape: &[usize]| {
            store.add(name, group, Tensor::uniform(shape, s, &mut rng))
        };
        let zero = |store: &mut ParamStore, name: &str, group, n: usize| {
            store.add(name, group, Tensor::zeros(&[n]))
        };
        use Group::{Composer as C, Solver as S};
        let ids = ParamIds {
            src_emb: w(&mut store, "composer.src_emb", C, &[n_src, d])?,
            src_key: w(&mut store, "composer.src_key", C, &[config.pool, d])?,
            dst_key: w(&mut store, "composer.dst_key", C, &[config.pool, d])?,
            leaf_w: w(&mut store, "composer.leaf_w", C, &[2 * d, d])?,
            leaf_b: zero(&mut store, "composer.leaf_b", C, 2 * d)?,
            tree_w: w(&mut store, "composer.tree_w", C, &[5 * d, 2 * d])?,
            tree_b: zero(&mut store, "composer.tree_b", C, 5 * d)?,
            query: w(&mut store, "composer.query", C, &[2 * d])?,
            check_w: w(&mut store, "composer.check_w", C, &[1, 2 * d])?,
            check_b: zero(&mut store, "composer.check_b", C, 1)?,
            enc_w: w(&mut store, "solver.enc_w", S, &[4 * d, 2 * d])?,
            enc_b: zero(&mut store, "solver.enc_b", S, 4 * d)?,
            dec_w: w(&mut store, "solver.dec_w", S, &[4 * d, 2 * d])?,
            dec_b: zero(&mut store, "solver.dec_b", S, 4 * d)?,
            dec_in: w(&mut store, "solver.dec_in", S, &[n_dst + 1, d])?,
            out_w: w(&mut store, "solver.out_w", S, &[d, 2 * d])?,
            out_b: zero(&mut store, "solver.out_b", S, d)?,
            out_emb: w(&mut store, "solver.out_emb", S, &[n_dst + 1, d])?,
        };
        Ok(Model {
            config,
            vocab,
            store,
            ids,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Number of action words; index `n_actions()` is the start/end marker.
    pub fn n_actions(&self) -> usize {
        self.vocab.dst.len()
    }

    pub fn composer_params(&self) -> Vec<ParamId> {
        self.store
            .ids()
            .filter(|&i| self.store.group(i) == Group::Composer)
            .collect()
    }

    pub fn solver_params(&self) -> Vec<ParamId> {
        self.store
            .ids()
            .filter(|&i| self.store.group(i) == Group::Solver)
            .collect()
    }

    pub fn save(&self, path: &Path, seed: u64, lesson: usize, extra: serde_json::Value) -> Result<()> {
        let meta = CheckpointMeta {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            seed,
            lesson,
            extra,
        };
        let manifest = serde_json::to_string(&meta)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        checkpoint::save(path, &self.store, &manifest)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta)> {
        let (stored, manifest) = checkpoint::load(path)?;
        let mut meta: CheckpointMeta = serde_json::from_str(&manifest)
            .map_err(|e| ModelError::Checkpoint(format!("bad manifest: {e}")))?;
        meta.vocab.reindex();
        let mut model = Model::new(meta.config.clone(), meta.vocab.clone(), 0)?;
        checkpoint::restore_into(&mut model.store, &stored)?;
        Ok((model, meta))
    }
}
