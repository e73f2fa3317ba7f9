use std::collections::{BTreeSet, HashMap};

use lane_scan::Example;
use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

/// Source words and destination action words, in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub src: Vec<String>,
    pub dst: Vec<String>,
    #[serde(skip)]
    src_index: HashMap<String, usize>,
    #[serde(skip)]
    dst_index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new(src: Vec<String>, dst: Vec<String>) -> Self {
        let mut v = Vocab {
            src,
            dst,
            src_index: HashMap::new(),
            dst_index: HashMap::new(),
        };
        v.reindex();
        v
    }

    /// Rebuild lookup tables, e.g. after deserialising.
    pub fn reindex(&mut self) {
        self.src_index = self.src.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        self.dst_index = self.dst.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Self {
        let mut src = BTreeSet::new();
        let mut dst = BTreeSet::new();
        for e in examples {
            src.extend(e.command.iter().cloned());
            dst.extend(e.actions.iter().cloned());
        }
        Vocab::new(src.into_iter().collect(), dst.into_iter().collect())
    }

    pub fn word(&self, w: &str) -> Result<usize> {
        self.src_index
            .get(w)
            .copied()
            .ok_or_else(|| ModelError::UnknownWord(w.to_string()))
    }

    pub fn action(&self, a: &str) -> Result<usize> {
        self.dst_index
            .get(a)
            .copied()
            .ok_or_else(|| ModelError::UnknownAction(a.to_string()))
    }

    pub fn encode_actions(&self, actions: &[String]) -> Result<Vec<usize>> {
        actions.iter().map(|a| self.action(a)).collect()
    }

    /// Tokens of `examples` absent from this vocabulary, sorted.
    pub fn unknown_tokens<'a>(&self, examples: impl IntoIterator<Item = &'a Example>) -> Vec<String> {
        let mut missing = BTreeSet::new();
        for e in examples {
            missing.extend(e.command.iter().filter(|w| !self.src_index.contains_key(*w)).cloned());
            missing.extend(e.actions.iter().filter(|a| !self.dst_index.contains_key(*a)).cloned());
        }
        missing.into_iter().collect()
    }
}
