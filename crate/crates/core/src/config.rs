//! Key-value run configuration.
//!
//! ```text
//! # comment
//! task = miniscan
//! dim = 32
//! gamma = 0.5
//! lesson_bounds = 2,4,6,8
//! ```
//!
//! Validation reports every problem at once rather than the first.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the simplicity reward.
    pub gamma: f64,
    /// Rollouts per example per update.
    pub samples: usize,
    pub entropy_init: f64,
    pub entropy_decay: f64,
    pub lr_composer: f64,
    pub lr_solver: f64,
    pub rho: f64,
    pub eps: f64,
    pub max_steps: usize,
    /// Inclusive upper token counts of every lesson but the last.
    pub lesson_bounds: Vec<usize>,
    pub curriculum: bool,
    /// Dev accuracy that ends a lesson.
    pub advance_accuracy: f64,
    pub epoch_cap: usize,
    /// No lesson ends before this many updates; matters for tiny pools.
    pub min_updates: usize,
    /// Hard limit on updates over the whole run (0 = none).
    pub max_updates: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.5,
            samples: 10,
            entropy_init: 0.1,
            entropy_decay: 0.5,
            lr_composer: 0.1,
            lr_solver: 1.0,
            rho: 0.95,
            eps: 1e-6,
            max_steps: crate::rollout::DEFAULT_MAX_STEPS,
            lesson_bounds: vec![2, 4, 6, 8],
            curriculum: true,
            advance_accuracy: 0.995,
            epoch_cap: 30,
            min_updates: 0,
            max_updates: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: String,
    /// Drop commands longer than this from every split (0 keeps all).
    pub max_len: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: "simple".into(),
            max_len: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "task",
    "max_len",
    "dim",
    "pool",
    "skeleton_cap",
    "init_scale",
    "gamma",
    "samples",
    "entropy_init",
    "entropy_decay",
    "lr_composer",
    "lr_solver",
    "rho",
    "eps",
    "max_steps",
    "lesson_bounds",
    "curriculum",
    "advance_accuracy",
    "epoch_cap",
    "min_updates",
    "max_updates",
    "seed",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut errors = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", n + 1));
                continue;
            };
            if let Err(e) = cfg.set(k.trim(), v.trim()) {
                errors.push(format!("line {}: {e}", n + 1));
            }
        }
        errors.extend(cfg.problems());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ModelError::Config(errors.join("; ")))
        }
    }

    /// Assign one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("`{key}` has an unparsable value `{v}`"))
        }
        let (m, t) = (&mut self.model, &mut self.train);
        match key {
            "task" => self.task = value.to_string(),
            "max_len" => self.max_len = num(key, value)?,
            "dim" => m.dim = num(key, value)?,
            "pool" => m.pool = num(key, value)?,
            "skeleton_cap" => m.skeleton_cap = num(key, value)?,
            "init_scale" => m.init_scale = num(key, value)?,
            "gamma" => t.gamma = num(key, value)?,
            "samples" => t.samples = num(key, value)?,
            "entropy_init" => t.entropy_init = num(key, value)?,
            "entropy_decay" => t.entropy_decay = num(key, value)?,
            "lr_composer" => t.lr_composer = num(key, value)?,
            "lr_solver" => t.lr_solver = num(key, value)?,
            "rho" => t.rho = num(key, value)?,
            "eps" => t.eps = num(key, value)?,
            "max_steps" => t.max_steps = num(key, value)?,
            "lesson_bounds" => {
                t.lesson_bounds = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|x| num(key, x.trim()))
                        .collect::<std::result::Result<_, _>>()?
                }
            }
            "curriculum" => t.curriculum = num(key, value)?,
            "advance_accuracy" => t.advance_accuracy = num(key, value)?,
            "epoch_cap" => t.epoch_cap = num(key, value)?,
            "min_updates" => t.min_updates = num(key, value)?,
            "max_updates" => t.max_updates = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every constraint violation, empty when the config is usable.
    pub fn problems(&self) -> Vec<String> {
        let (m, t) = (&self.model, &self.train);
        let mut p = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                p.push(msg.to_string());
            }
        };
        need(m.dim > 0, "dim must be positive");
        need(m.pool > 0, "pool must be positive");
        need(m.skeleton_cap > 0, "skeleton_cap must be positive");
        need(m.init_scale > 0.0, "init_scale must be positive");
        need(t.gamma >= 0.0, "gamma must be non-negative");
        need(t.samples >= 1, "samples must be at least 1");
        need(t.entropy_init >= 0.0, "entropy_init must be non-negative");
        need(
            (0.0..=1.0).contains(&t.entropy_decay),
            "entropy_decay must lie in [0, 1]",
        );
        need(t.lr_composer > 0.0, "lr_composer must be positive");
        need(t.lr_solver > 0.0, "lr_solver must be positive");
        need(t.rho > 0.0 && t.rho < 1.0, "rho must lie in (0, 1)");
        need(t.eps > 0.0, "eps must be positive");
        need(t.max_steps >= 1, "max_steps must be at least 1");
        need(
            t.lesson_bounds.windows(2).all(|w| w[0] < w[1]),
            "lesson_bounds must be strictly increasing",
        );
        need(
            t.lesson_bounds.first().is_none_or(|&b| b >= 1),
            "lesson_bounds must be positive",
        );
        need(
            (0.0..=1.0).contains(&t.advance_accuracy),
            "advance_accuracy must lie in [0, 1]",
        );
        need(t.epoch_cap >= 1, "epoch_cap must be at least 1");
        need(!self.task.is_empty(), "task must be named");
        p
    }

    pub fn render(&self) -> String {
        let (m, t) = (&self.model, &self.train);
        let mut s = String::new();
        let bounds: Vec<String> = t.lesson_bounds.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "task = {}", self.task);
        let _ = writeln!(s, "max_len = {}", self.max_len);
        let _ = writeln!(s, "dim = {}", m.dim);
        let _ = writeln!(s, "pool = {}", m.pool);
        let _ = writeln!(s, "skeleton_cap = {}", m.skeleton_cap);
        let _ = writeln!(s, "init_scale = {}", m.init_scale);
        let _ = writeln!(s, "gamma = {}", t.gamma);
        let _ = writeln!(s, "samples = {}", t.samples);
        let _ = writeln!(s, "entropy_init = {}", t.entropy_init);
        let _ = writeln!(s, "entropy_decay = {}", t.entropy_decay);
        let _ = writeln!(s, "lr_composer = {}", t.lr_composer);
        let _ = writeln!(s, "lr_solver = {}", t.lr_solver);
        let _ = writeln!(s, "rho = {}", t.rho);
        let _ = writeln!(s, "eps = {}", t.eps);
        let _ = writeln!(s, "max_steps = {}", t.max_steps);
        let _ = writeln!(s, "lesson_bounds = {}", bounds.join(","));
        let _ = writeln!(s, "curriculum = {}", t.curriculum);
        let _ = writeln!(s, "advance_accuracy = {}", t.advance_accuracy);
        let _ = writeln!(s, "epoch_cap = {}", t.epoch_cap);
        let _ = writeln!(s, "min_updates = {}", t.min_updates);
        let _ = writeln!(s, "max_updates = {}", t.max_updates);
        let _ = writeln!(s, "seed = {}", t.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_roundtrip() {
        let mut c = RunConfig {
            task: "miniscan".into(),
            ..RunConfig::default()
        };
        c.model.dim = 24;
        c.train.lesson_bounds = vec![3, 5];
        c.train.curriculum = false;
        assert_eq!(RunConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn every_problem_is_reported() {
        let err = RunConfig::parse("dim = 0\nsamples = 0\nbogus = 1\nrho = x\n")
            .unwrap_err()
            .to_string();
        for needle in ["dim must", "samples must", "unknown key `bogus`", "`rho`"] {
            assert!(err.contains(needle), "{err}");
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = RunConfig::parse("# header\n\ngamma = 0 # ablation\n").unwrap();
        assert_eq!(c.train.gamma, 0.0);
    }

    #[test]
    fn every_key_is_settable() {
        let c = RunConfig::default();
        let text = c.render();
        for k in KEYS {
            assert!(text.lines().any(|l| l.starts_with(&format!("{k} ="))), "{k}");
        }
    }
}
