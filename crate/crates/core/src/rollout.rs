//! One episode: alternate composer and solver until the recognized span
//! covers the whole expression.

use lane_tensor::{Tape, Var};

use crate::choice::Chooser;
use crate::composer::{compose_step, LayerDecision};
use crate::expr::{supersede, DerivationBuilder, DstExp, Memory, SrcExp, Tree};
use crate::model::Model;
use crate::solver::solve;
use crate::{ModelError, Result};

pub const DEFAULT_MAX_STEPS: usize = 20;

#[derive(Debug, Clone)]
pub struct Step {
    /// Expression the composer saw.
    pub src: SrcExp,
    pub span: (usize, usize),
    pub tree: Tree,
    pub decisions: Vec<LayerDecision>,
    pub skeleton: DstExp,
    pub constant: DstExp,
    pub written: Option<usize>,
    pub truncated: bool,
}

impl Step {
    pub fn variable_only(&self) -> bool {
        self.skeleton.is_variable_only()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub output: DstExp,
    pub aborted: bool,
    pub abort_reason: Option<String>,
    pub log_prob_composer: Var,
    pub log_prob_solver: Var,
    pub entropy: Var,
    /// Every discrete choice in order, for exact replay.
    pub choices: Vec<usize>,
}

impl Trajectory {
    pub fn t_star(&self) -> usize {
        self.steps.iter().filter(|s| s.variable_only()).count()
    }

    /// `span => skeleton => constant` per step and the bracketed derivation
    /// of the whole command.
    pub fn derivation(&self, model: &Model) -> (Vec<String>, String) {
        let mut b = DerivationBuilder::new(model.config.pool);
        let mut last = String::new();
        for s in &self.steps {
            last = b.record(&s.src, &s.tree, &s.skeleton, &s.constant, s.written, &model.vocab);
        }
        (b.steps, last)
    }
}

/// Run one episode on `tape`. Capacity exhaustion and step overflow abort
/// the episode; other errors are returned.
pub fn rollout(
    tape: &mut Tape,
    model: &Model,
    src: &SrcExp,
    chooser: &mut Chooser,
    max_steps: usize,
) -> Result<Trajectory> {
    if src.is_empty() {
        return Err(ModelError::Contract("rollout on an empty command".into()));
    }
    let mut w = src.clone();
    let mut mem = Memory::new(model.config.pool);
    let mut steps = Vec::new();
    let (mut lp_c, mut lp_s, mut ent) = (Vec::new(), Vec::new(), Vec::new());
    let mut output = None;
    let mut abort_reason = None;
    for _ in 0..max_steps {
        let hla = compose_step(tape, model, &w, chooser)?;
        lp_c.push(hla.log_prob);
        ent.push(hla.entropy);
        let (s, e) = hla.span;
        let g = w.span(s, e);
        let terminal = s == 0 && e + 1 == w.len();
        let lla = match solve(tape, model, &g, &mut mem, chooser, terminal) {
            Ok(l) => l,
            Err(ModelError::Capacity(n)) => {
                abort_reason = Some(format!("memory pool exhausted ({n} slots)"));
                break;
            }
            Err(err) => return Err(err),
        };
        lp_s.push(lla.log_prob);
        ent.push(lla.entropy);
        let next = match lla.written {
            Some(v) => Some(supersede(&w, s, e, v)?),
            None => None,
        };
        steps.push(Step {
            src: w.clone(),
            span: hla.span,
            tree: hla.tree,
            decisions: hla.decisions,
            skeleton: lla.skeleton,
            constant: lla.constant.clone(),
            written: lla.written,
            truncated: lla.truncated,
        });
        match next {
            None => {
                output = Some(lla.constant);
                break;
            }
            Some(n) => w = n,
        }
    }
    if output.is_none() && abort_reason.is_none() {
        abort_reason = Some(format!("no terminal step within {max_steps} steps"));
    }
    let log_prob_composer = tape.add_all(&lp_c)?;
    let log_prob_solver = tape.add_all(&lp_s)?;
    let entropy = tape.add_all(&ent)?;
    Ok(Trajectory {
        steps,
        aborted: output.is_none(),
        output: output.unwrap_or_default(),
        abort_reason,
        log_prob_composer,
        log_prob_solver,
        entropy,
        choices: chooser.trace.clone(),
    })
}
