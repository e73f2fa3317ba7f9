//! `IN: <command> OUT: <actions>` lines.

use std::fmt::Write as _;
use std::path::Path;

use crate::grammar::Action;
use crate::{DataError, Example};

pub fn format_examples(examples: &[Example]) -> String {
    let mut s = String::new();
    for e in examples {
        writeln!(s, "IN: {} OUT: {}", e.command_str(), e.actions_str()).unwrap();
    }
    s
}

pub fn write_examples(path: &Path, examples: &[Example]) -> Result<(), DataError> {
    std::fs::write(path, format_examples(examples))?;
    Ok(())
}

/// Parse one line. SCAN action names in the `I_*` spelling are normalised
/// to the short tokens; other output tokens pass through unchanged.
pub fn parse_line(line: &str, lineno: usize) -> Result<Example, DataError> {
    let fail = |msg: &str| DataError::Format {
        line: lineno,
        msg: msg.to_string(),
    };
    let rest = line.trim().strip_prefix("IN:").ok_or_else(|| fail("missing `IN:`"))?;
    let (cmd, out) = rest.split_once("OUT:").ok_or_else(|| fail("missing `OUT:`"))?;
    let command: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
    if command.is_empty() {
        return Err(fail("empty input"));
    }
    let actions = out
        .split_whitespace()
        .map(|t| Action::from_token(t).map_or_else(|| t.to_string(), |a| a.token().to_string()))
        .collect();
    Ok(Example { command, actions })
}

pub fn parse_examples(text: &str) -> Result<Vec<Example>, DataError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

pub fn read_examples(path: &Path) -> Result<Vec<Example>, DataError> {
    parse_examples(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn original_spelling_is_normalised() {
        let e = parse_line("IN: turn left twice OUT: I_TURN_LEFT I_TURN_LEFT", 1).unwrap();
        assert_eq!(e, Example::new("turn left twice", "LTURN LTURN"));
    }

    #[test]
    fn roundtrip() {
        let ex = vec![Example::new("jump twice", "JUMP JUMP"), Example::new("dax", "RED")];
        assert_eq!(parse_examples(&format_examples(&ex)).unwrap(), ex);
    }

    #[test]
    fn malformed_lines() {
        assert!(parse_line("jump OUT: JUMP", 3).is_err());
        assert!(parse_line("IN: jump JUMP", 3).is_err());
        assert!(parse_line("IN: OUT: JUMP", 3).is_err());
    }
}
