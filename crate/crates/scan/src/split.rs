use std::collections::{HashMap, HashSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{DataError, Example};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub name: String,
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
    pub seed: u64,
    /// Non-fatal problems found while building or loading.
    pub warnings: Vec<String>,
}

/// Fraction of the training portion moved to the development set.
pub const DEV_FRACTION: f64 = 0.2;

/// Copies of the bare primitive kept in the Add Jump training portion, as
/// in the published split files.
pub const ADD_JUMP_PRIMITIVE_COPIES: usize = 1467;

pub const SIMPLE_TRAIN: usize = 16728;

/// Shortest action sequence held out by the Length split. No SCAN command
/// has 23 actions, so training tops out at 22.
pub const LENGTH_TEST_MIN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Simple,
    AddJump,
    AroundRight,
    Length,
}

impl FromStr for SplitName {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        Ok(match s {
            "simple" => SplitName::Simple,
            "add_jump" | "addprim_jump" => SplitName::AddJump,
            "around_right" => SplitName::AroundRight,
            "length" => SplitName::Length,
            other => return Err(DataError::UnknownSplit(other.to_string())),
        })
    }
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Simple => "simple",
            SplitName::AddJump => "add_jump",
            SplitName::AroundRight => "around_right",
            SplitName::Length => "length",
        }
    }
}

fn contains_seq(words: &[String], pat: &[&str]) -> bool {
    words
        .windows(pat.len())
        .any(|w| w.iter().zip(pat).all(|(a, b)| a == b))
}

/// Build one of the standard SCAN splits from [`crate::generate_scan`]
/// output. The development set is left empty; see
/// [`DatasetSplit::extract_dev`].
pub fn split(name: SplitName, data: &[Example], seed: u64) -> DatasetSplit {
    let (train, test): (Vec<Example>, Vec<Example>) = match name {
        SplitName::Simple => {
            let mut all = data.to_vec();
            all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let cut = SIMPLE_TRAIN.min(all.len());
            let test = all.split_off(cut);
            (all, test)
        }
        SplitName::AddJump => {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for ex in data {
                if ex.command == ["jump"] {
                    for _ in 0..ADD_JUMP_PRIMITIVE_COPIES {
                        train.push(ex.clone());
                    }
                } else if ex.command.iter().any(|w| w == "jump") {
                    test.push(ex.clone());
                } else {
                    train.push(ex.clone());
                }
            }
            (train, test)
        }
        SplitName::AroundRight => {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for ex in data {
                if !contains_seq(&ex.command, &["around", "right"]) {
                    train.push(ex.clone());
                } else if !contains_seq(&ex.command, &["turn", "around", "right"]) {
                    test.push(ex.clone());
                }
            }
            (train, test)
        }
        SplitName::Length => data
            .iter()
            .cloned()
            .partition(|ex| ex.actions.len() < LENGTH_TEST_MIN),
    };
    DatasetSplit {
        name: name.as_str().into(),
        train,
        dev: Vec::new(),
        test,
        seed,
        warnings: Vec::new(),
    }
}

impl DatasetSplit {
    /// Move a seeded random 20% of the training portion into `dev`.
    pub fn extract_dev(mut self, seed: u64) -> Self {
        let mut all = std::mem::take(&mut self.train);
        all.extend(std::mem::take(&mut self.dev));
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xD5EB_u64));
        let n_dev = (all.len() as f64 * DEV_FRACTION).round() as usize;
        self.dev = all.split_off(all.len() - n_dev);
        self.train = all;
        self
    }

    /// Training portion as published: train plus dev.
    pub fn train_portion(&self) -> usize {
        self.train.len() + self.dev.len()
    }

    /// Commands shared between training (train or dev) and test.
    pub fn overlap(&self) -> Vec<String> {
        let train: HashSet<&Vec<String>> =
            self.train.iter().chain(&self.dev).map(|e| &e.command).collect();
        self.test
            .iter()
            .filter(|e| train.contains(&e.command))
            .map(Example::command_str)
            .collect()
    }
}

/// Resolve MCD index files (one command string per line) against the full
/// generated SCAN set.
pub fn load_mcd(train_index: &str, test_index: &str, data: &[Example]) -> Result<DatasetSplit, DataError> {
    let lookup: HashMap<String, &Example> = data.iter().map(|e| (e.command_str(), e)).collect();
    let resolve = |text: &str| -> Result<Vec<Example>, DataError> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                let key = l.split_whitespace().collect::<Vec<_>>().join(" ");
                lookup
                    .get(&key)
                    .map(|e| (*e).clone())
                    .ok_or(DataError::Unresolved(key))
            })
            .collect()
    };
    let train = resolve(train_index)?;
    let test = resolve(test_index)?;
    let mut split = DatasetSplit {
        name: "mcd".into(),
        train,
        dev: Vec::new(),
        test,
        seed: 0,
        warnings: Vec::new(),
    };
    let overlap = split.overlap();
    if !overlap.is_empty() {
        return Err(DataError::Load(format!(
            "train and test share {} commands, e.g. `{}`",
            overlap.len(),
            overlap[0]
        )));
    }
    if (split.train.len(), split.test.len()) != (8365, 1045) {
        split.warnings.push(format!(
            "MCD split has {}/{} examples, published splits have 8365/1045",
            split.train.len(),
            split.test.len()
        ));
    }
    Ok(split)
}
