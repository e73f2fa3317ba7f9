//! REINFORCE with a per-example mean baseline and an entropy bonus, driven
//! by a length curriculum.

use std::io::Write;

use lane_scan::Example;
use lane_tensor::{AdaDelta, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::choice::Chooser;
use crate::config::TrainConfig;
use crate::eval::evaluate;
use crate::expr::SrcExp;
use crate::model::Model;
use crate::reward;
use crate::rollout::{rollout, Trajectory};
use crate::{ModelError, Result};

/// Mix run seed, update counter and sample index into a rollout seed.
pub fn rollout_seed(seed: u64, update: u64, sample: u64) -> u64 {
    let mut z = seed ^ update.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ sample.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `-sum_n (R_n - b)(lp_theta + lp_phi) - lambda * sum_n H_n` with `b` the
/// mean reward.
pub fn reinforce_loss(tape: &mut Tape, trajs: &[Trajectory], rewards: &[f64], lambda: f64) -> Result<Var> {
    if trajs.len() != rewards.len() || trajs.is_empty() {
        return Err(ModelError::Contract("one reward per trajectory required".into()));
    }
    let b = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let mut terms = Vec::with_capacity(2 * trajs.len());
    for (t, &r) in trajs.iter().zip(rewards) {
        let lp = tape.add(t.log_prob_composer, t.log_prob_solver)?;
        terms.push(tape.scale(lp, -(r - b)));
        if lambda != 0.0 {
            terms.push(tape.scale(t.entropy, -lambda));
        }
    }
    let parts = tape.concat(&terms)?;
    Ok(tape.sum(parts))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    pub rewards: Vec<f64>,
    pub mean_reward: f64,
    /// Rollouts whose output matched the target exactly.
    pub exact: usize,
    pub aborted: usize,
    /// Steps with variable-only skeletons over all steps.
    pub variable_only: (usize, usize),
    /// No gradient step was taken (every rollout aborted).
    pub skipped: bool,
}

pub struct Trainer {
    pub model: Model,
    pub opt: AdaDelta,
    pub cfg: TrainConfig,
    pub updates: u64,
}

impl Trainer {
    pub fn new(model: Model, cfg: TrainConfig) -> Result<Self> {
        let opt = AdaDelta::new(&model.store, cfg.rho, cfg.eps, cfg.lr_composer, cfg.lr_solver);
        Ok(Trainer {
            model,
            opt,
            cfg,
            updates: 0,
        })
    }

    /// N sampled rollouts of one example, then one optimizer step.
    pub fn update(&mut self, ex: &Example, lambda: f64) -> Result<UpdateStats> {
        let src = SrcExp::from_words(&ex.command, &self.model.vocab)?;
        let target = self.model.vocab.encode_actions(&ex.actions)?;
        let n = self.cfg.samples;
        let grads = {
            let mut tape = Tape::new(&self.model.store);
            let mut trajs = Vec::with_capacity(n);
            let mut stats = UpdateStats::default();
            for s in 0..n {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(rollout_seed(self.cfg.seed, self.updates, s as u64));
                let mut ch = Chooser::sample(&mut rng);
                let t = rollout(&mut tape, &self.model, &src, &mut ch, self.cfg.max_steps)?;
                let r = reward::total(&t, &target, self.cfg.gamma);
                stats.rewards.push(r);
                stats.aborted += t.aborted as usize;
                stats.exact += (!t.aborted && t.output.actions() == target) as usize;
                stats.variable_only.0 += t.t_star();
                stats.variable_only.1 += t.steps.len();
                trajs.push(t);
            }
            stats.mean_reward = stats.rewards.iter().sum::<f64>() / n as f64;
            self.updates += 1;
            if stats.aborted == n {
                stats.skipped = true;
                return Ok(stats);
            }
            let loss = reinforce_loss(&mut tape, &trajs, &stats.rewards, lambda)?;
            (tape.backward(loss)?, stats)
        };
        let (mut g, stats) = grads;
        self.opt.step(&mut self.model.store, &mut g)?;
        Ok(stats)
    }
}

#[derive(Debug, Clone)]
pub struct Lesson {
    /// Largest command length admitted; `None` admits everything.
    pub bound: Option<usize>,
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
}

/// Accumulating lessons by command length. Lessons that would add no new
/// training example are dropped.
pub fn lessons(train: &[Example], dev: &[Example], cfg: &TrainConfig) -> Vec<Lesson> {
    let mut bounds: Vec<Option<usize>> = Vec::new();
    if cfg.curriculum {
        bounds.extend(cfg.lesson_bounds.iter().map(|&b| Some(b)));
    }
    bounds.push(None);
    let fits = |e: &Example, b: Option<usize>| b.is_none_or(|b| e.command.len() <= b);
    let mut out: Vec<Lesson> = Vec::new();
    for b in bounds {
        let pool: Vec<Example> = train.iter().filter(|e| fits(e, b)).cloned().collect();
        let prev = out.last().map_or(0, |l| l.train.len());
        if pool.len() == prev {
            continue;
        }
        out.push(Lesson {
            bound: b,
            train: pool,
            dev: dev.iter().filter(|e| fits(e, b)).cloned().collect(),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub lesson: usize,
    pub epoch: usize,
    pub example: usize,
    pub stats: UpdateStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LessonReport {
    pub bound: Option<usize>,
    pub pool: usize,
    pub dev: usize,
    pub epochs: usize,
    pub updates: usize,
    pub entropy_weight: f64,
    pub dev_accuracy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub lessons: Vec<LessonReport>,
    pub history: Vec<UpdateRecord>,
    pub warnings: Vec<String>,
    /// The update budget ran out before the last lesson finished.
    pub budget_exhausted: bool,
}

impl RunReport {
    /// Fraction of sampled rollouts that matched exactly over the first
    /// `updates` updates.
    pub fn early_exact_rate(&self, updates: usize) -> f64 {
        let (mut e, mut n) = (0, 0);
        for r in self.history.iter().take(updates) {
            e += r.stats.exact;
            n += r.stats.rewards.len();
        }
        if n == 0 {
            0.0
        } else {
            e as f64 / n as f64
        }
    }
}

/// Train through every lesson. `metrics` receives one line per update;
/// `on_lesson` is called after each lesson with its index.
pub fn run_curriculum(
    trainer: &mut Trainer,
    train: &[Example],
    dev: &[Example],
    metrics: &mut dyn Write,
    on_lesson: &mut dyn FnMut(&Model, usize, &LessonReport) -> Result<()>,
) -> Result<RunReport> {
    let cfg = trainer.cfg.clone();
    let plan = lessons(train, dev, &cfg);
    let mut report = RunReport::default();
    let mut lambda = cfg.entropy_init;
    let mut total = 0usize;
    'lessons: for (li, lesson) in plan.iter().enumerate() {
        if li > 0 {
            lambda *= cfg.entropy_decay;
        }
        // An empty dev pool falls back to the training pool.
        let judge = if lesson.dev.is_empty() { &lesson.train } else { &lesson.dev };
        let mut order: Vec<usize> = (0..lesson.train.len()).collect();
        let mut lr = LessonReport {
            bound: lesson.bound,
            pool: lesson.train.len(),
            dev: lesson.dev.len(),
            epochs: 0,
            updates: 0,
            entropy_weight: lambda,
            dev_accuracy: 0.0,
            converged: false,
        };
        loop {
            lr.epochs += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(cfg.seed ^ 0x5EED, li as u64, lr.epochs as u64));
            order.shuffle(&mut rng);
            for &i in &order {
                if cfg.max_updates > 0 && total >= cfg.max_updates {
                    report.budget_exhausted = true;
                    lr.dev_accuracy = evaluate(&trainer.model, judge, cfg.max_steps)?.accuracy;
                    report.lessons.push(lr);
                    break 'lessons;
                }
                let stats = trainer.update(&lesson.train[i], lambda)?;
                total += 1;
                lr.updates += 1;
                writeln!(
                    metrics,
                    "{li} {} {i} {:.6} {}",
                    lr.epochs,
                    stats.mean_reward,
                    (stats.exact > 0) as u8
                )?;
                report.history.push(UpdateRecord {
                    lesson: li,
                    epoch: lr.epochs,
                    example: i,
                    stats,
                });
            }
            lr.dev_accuracy = evaluate(&trainer.model, judge, cfg.max_steps)?.accuracy;
            log::info!(
                "lesson {li} epoch {} dev accuracy {:.4} over {}",
                lr.epochs,
                lr.dev_accuracy,
                judge.len()
            );
            if lr.updates < cfg.min_updates {
                continue;
            }
            if lr.dev_accuracy >= cfg.advance_accuracy {
                lr.converged = true;
                break;
            }
            if lr.epochs >= cfg.epoch_cap {
                report.warnings.push(format!(
                    "lesson {li} stopped at the epoch cap with dev accuracy {:.4}",
                    lr.dev_accuracy
                ));
                break;
            }
        }
        on_lesson(&trainer.model, li, &lr)?;
        report.lessons.push(lr);
    }
    Ok(report)
}

/// Zero tensor shaped like parameter `id`; handy in tests.
pub fn zeros_like(model: &Model, id: lane_tensor::ParamId) -> Tensor {
    Tensor::zeros(model.store.value(id).shape())
}
