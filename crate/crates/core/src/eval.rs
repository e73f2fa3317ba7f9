//! Greedy inference and exact-match evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use lane_scan::Example;
use lane_tensor::Tape;

use crate::choice::Chooser;
use crate::expr::SrcExp;
use crate::model::Model;
use crate::rollout::{rollout, Trajectory};
use crate::{ModelError, Result};

/// Failure examples kept in a report.
pub const FAILURE_CAP: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub command: String,
    pub target: String,
    pub predicted: String,
    pub correct: bool,
}

impl Prediction {
    pub fn length(&self) -> usize {
        self.command.split_whitespace().count()
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Input length to (correct, total).
    pub by_length: BTreeMap<usize, (usize, usize)>,
    pub failures: Vec<Prediction>,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn from_predictions(predictions: Vec<Prediction>) -> Self {
        let total = predictions.len();
        let correct = predictions.iter().filter(|p| p.correct).count();
        let mut by_length = BTreeMap::new();
        for p in &predictions {
            let e = by_length.entry(p.length()).or_insert((0, 0));
            e.0 += p.correct as usize;
            e.1 += 1;
        }
        let failures = predictions
            .iter()
            .filter(|p| !p.correct)
            .take(FAILURE_CAP)
            .cloned()
            .collect();
        EvalReport {
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            correct,
            total,
            by_length,
            failures,
            predictions,
        }
    }

    /// `length,accuracy,count,train_frequency` rows, one per test length.
    pub fn length_table(&self, train_lengths: &BTreeMap<usize, usize>) -> String {
        let mut s = String::from("length,accuracy,count,train_frequency\n");
        for (len, (c, n)) in &self.by_length {
            let _ = writeln!(
                s,
                "{len},{:.4},{n},{}",
                *c as f64 / *n as f64,
                train_lengths.get(len).copied().unwrap_or(0)
            );
        }
        s
    }

    /// One tab-separated line per example: command, target, prediction.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for p in &self.predictions {
            let _ = writeln!(s, "{}\t{}\t{}", p.command, p.target, p.predicted);
        }
        s
    }
}

/// Accuracy recomputed from a [`EvalReport::dump`].
pub fn recount(dump: &str) -> f64 {
    let (mut c, mut n) = (0usize, 0usize);
    for line in dump.lines().filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        n += 1;
        if f.len() == 3 && f[1] == f[2] {
            c += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        c as f64 / n as f64
    }
}

pub fn length_histogram(examples: &[Example]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for e in examples {
        *m.entry(e.command.len()).or_insert(0) += 1;
    }
    m
}

/// Greedy episode for one command.
pub fn infer(model: &Model, command: &[String], max_steps: usize) -> Result<Trajectory> {
    let src = SrcExp::from_words(command, &model.vocab)?;
    let mut tape = Tape::new(&model.store);
    rollout(&mut tape, model, &src, &mut Chooser::greedy(), max_steps)
}

/// Greedy action words for one command; empty when the episode aborts.
pub fn predict(model: &Model, command: &[String], max_steps: usize) -> Result<Vec<String>> {
    let tr = infer(model, command, max_steps)?;
    Ok(tr
        .output
        .actions()
        .into_iter()
        .map(|a| model.vocab.dst[a].clone())
        .collect())
}

pub fn evaluate(model: &Model, examples: &[Example], max_steps: usize) -> Result<EvalReport> {
    let unknown = model.vocab.unknown_tokens(examples);
    let unknown_src: Vec<&String> = unknown
        .iter()
        .filter(|t| examples.iter().any(|e| e.command.contains(t)))
        .collect();
    if !unknown_src.is_empty() {
        let names: Vec<&str> = unknown_src.iter().map(|s| s.as_str()).collect();
        return Err(ModelError::UnknownWord(names.join(", ")));
    }
    let mut preds = Vec::with_capacity(examples.len());
    for e in examples {
        let p = predict(model, &e.command, max_steps)?;
        preds.push(Prediction {
            command: e.command_str(),
            target: e.actions_str(),
            correct: p == e.actions,
            predicted: p.join(" "),
        });
    }
    Ok(EvalReport::from_predictions(preds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(c: &str, t: &str, p: &str) -> Prediction {
        Prediction {
            command: c.into(),
            target: t.into(),
            predicted: p.into(),
            correct: t == p,
        }
    }

    #[test]
    fn report_counts_and_recount_agree() {
        let r = EvalReport::from_predictions(vec![
            pred("jump", "JUMP", "JUMP"),
            pred("walk twice", "WALK WALK", "WALK"),
            pred("run twice", "RUN RUN", "RUN RUN"),
        ]);
        assert_eq!((r.correct, r.total), (2, 3));
        assert_eq!(r.by_length[&2], (1, 2));
        assert_eq!(r.failures.len(), 1);
        assert!((recount(&r.dump()) - r.accuracy).abs() < 1e-15);
    }

    #[test]
    fn empty_outputs_score_zero() {
        let r = EvalReport::from_predictions(vec![pred("jump", "JUMP", ""), pred("walk", "WALK", "")]);
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn length_table_has_every_length() {
        let r = EvalReport::from_predictions(vec![pred("a", "X", "X"), pred("a b c", "X", "Y")]);
        let t = r.length_table(&BTreeMap::from([(1, 7)]));
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("1,1.0000,1,7"));
        assert!(t.contains("3,0.0000,1,0"));
    }
}
