//! Source of discrete decisions: sampling, argmax, or replay of a recorded
//! decision sequence. Every pick is appended to [`Chooser::trace`] so a
//! sampled trajectory can be replayed exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sample,
    Greedy,
}

enum Source<'a> {
    Sample(&'a mut ChaCha8Rng),
    Greedy,
    Replay { choices: &'a [usize], pos: usize },
}

pub struct Chooser<'a> {
    source: Source<'a>,
    pub trace: Vec<usize>,
}

impl<'a> Chooser<'a> {
    pub fn sample(rng: &'a mut ChaCha8Rng) -> Self {
        Chooser {
            source: Source::Sample(rng),
            trace: Vec::new(),
        }
    }

    pub fn greedy() -> Self {
        Chooser {
            source: Source::Greedy,
            trace: Vec::new(),
        }
    }

    pub fn replay(choices: &'a [usize]) -> Self {
        Chooser {
            source: Source::Replay { choices, pos: 0 },
            trace: Vec::new(),
        }
    }

    pub fn is_greedy(&self) -> bool {
        matches!(self.source, Source::Greedy)
    }

    /// Pick an index from a categorical distribution given log-probabilities.
    /// Greedy ties resolve to the lowest index.
    pub fn pick(&mut self, log_probs: &[f64]) -> Result<usize> {
        let c = match &mut self.source {
            Source::Greedy => {
                let mut best = 0;
                for (i, &lp) in log_probs.iter().enumerate() {
                    if lp > log_probs[best] {
                        best = i;
                    }
                }
                best
            }
            Source::Sample(rng) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = None;
                let mut last = 0;
                for (i, &lp) in log_probs.iter().enumerate() {
                    let p = lp.exp();
                    if p > 0.0 {
                        last = i;
                    }
                    acc += p;
                    if u < acc {
                        pick = Some(i);
                        break;
                    }
                }
                pick.unwrap_or(last)
            }
            Source::Replay { choices, pos } => {
                let c = *choices.get(*pos).ok_or_else(|| {
                    ModelError::Contract("replay ran past the recorded decisions".into())
                })?;
                *pos += 1;
                if c >= log_probs.len() {
                    return Err(ModelError::Contract(format!(
                        "replayed choice {c} outside {} options",
                        log_probs.len()
                    )));
                }
                c
            }
        };
        self.trace.push(c);
        Ok(c)
    }
}
