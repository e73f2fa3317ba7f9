//! Small pseudo-word datasets with `[train]` / `[test]` sections.

use std::collections::BTreeSet;

use crate::io::parse_line;
use crate::split::DatasetSplit;
use crate::{DataError, Example};

pub const LIMIT_TRAIN: usize = 14;
pub const LIMIT_TEST: usize = 8;

/// The bundled "Limit" file. Its items are reconstructed from the original
/// few-shot study and should be checked against that source.
pub const DEFAULT_LIMIT: &str = include_str!("../data/miniscan_limit.txt");

pub fn load_miniscan(text: &str) -> Result<DatasetSplit, DataError> {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut section: Option<bool> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "[train]" => section = Some(true),
            "[test]" => section = Some(false),
            _ => {
                let ex = parse_line(line, i + 1)?;
                match section {
                    Some(true) => train.push(ex),
                    Some(false) => test.push(ex),
                    None => {
                        return Err(DataError::Format {
                            line: i + 1,
                            msg: "example before any `[train]`/`[test]` header".into(),
                        })
                    }
                }
            }
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(DataError::Load("MiniSCAN file needs non-empty train and test sections".into()));
    }
    let mut warnings = Vec::new();
    if (train.len(), test.len()) != (LIMIT_TRAIN, LIMIT_TEST) {
        warnings.push(format!(
            "{}/{} examples, the Limit task has {LIMIT_TRAIN}/{LIMIT_TEST}",
            train.len(),
            test.len()
        ));
    }
    let mut split = DatasetSplit {
        name: "miniscan".into(),
        train,
        dev: Vec::new(),
        test,
        seed: 0,
        warnings,
    };
    if let Err(missing) = validate_vocabulary(&split) {
        split
            .warnings
            .push(format!("test tokens unseen in training: {}", missing.join(" ")));
    }
    Ok(split)
}

/// Input and output vocabularies induced from the training examples.
pub fn induced_vocabulary(examples: &[Example]) -> (BTreeSet<String>, BTreeSet<String>) {
    let src = examples.iter().flat_map(|e| e.command.iter().cloned()).collect();
    let dst = examples.iter().flat_map(|e| e.actions.iter().cloned()).collect();
    (src, dst)
}

/// Every test token (either side) must occur in training.
pub fn validate_vocabulary(split: &DatasetSplit) -> Result<(), Vec<String>> {
    let (src, dst) = induced_vocabulary(&split.train);
    let missing: BTreeSet<String> = split
        .test
        .iter()
        .flat_map(|e| {
            e.command
                .iter()
                .filter(|t| !src.contains(*t))
                .chain(e.actions.iter().filter(|t| !dst.contains(*t)))
                .cloned()
                .collect::<Vec<_>>()
        })
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(missing.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_file_sizes() {
        let s = load_miniscan(DEFAULT_LIMIT).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (14, 8));
        assert!(s.warnings.is_empty(), "{:?}", s.warnings);
        assert!(validate_vocabulary(&s).is_ok());
    }

    #[test]
    fn empty_file_fails() {
        assert!(load_miniscan("").is_err());
        assert!(load_miniscan("# only a comment\n").is_err());
    }

    #[test]
    fn size_mismatch_only_warns() {
        let s = load_miniscan("[train]\nIN: a OUT: X\n[test]\nIN: a OUT: X\n").unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn unseen_test_token_is_reported() {
        let s = load_miniscan("[train]\nIN: a OUT: X\n[test]\nIN: b OUT: Y\n").unwrap();
        assert_eq!(validate_vocabulary(&s).unwrap_err(), vec!["Y".to_string(), "b".to_string()]);
    }
}
