//! Command grammar and interpretation.
//!
//! ```text
//! command := clause ( ("and" clause)+ | "after" clause )?
//! clause  := phrase ("twice" | "thrice")?
//! phrase  := prim ( dir | "opposite" dir | "around" dir )?
//!          | "turn" ( dir | "opposite" dir | "around" dir )
//! prim    := "walk" | "look" | "run" | "jump"
//! dir     := "left" | "right"
//! ```
//!
//! Classic SCAN uses at most one conjunction; chains of `and` are accepted
//! for the extended data. `and` and `after` never mix.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Walk,
    Look,
    Run,
    Jump,
    LTurn,
    RTurn,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Walk,
        Action::Look,
        Action::Run,
        Action::Jump,
        Action::LTurn,
        Action::RTurn,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Action::Walk => "WALK",
            Action::Look => "LOOK",
            Action::Run => "RUN",
            Action::Jump => "JUMP",
            Action::LTurn => "LTURN",
            Action::RTurn => "RTURN",
        }
    }

    /// Accepts both the short tokens and the `I_*` names of the original
    /// distribution files.
    pub fn from_token(tok: &str) -> Option<Action> {
        Some(match tok {
            "WALK" | "I_WALK" => Action::Walk,
            "LOOK" | "I_LOOK" => Action::Look,
            "RUN" | "I_RUN" => Action::Run,
            "JUMP" | "I_JUMP" => Action::Jump,
            "LTURN" | "I_TURN_LEFT" => Action::LTurn,
            "RTURN" | "I_TURN_RIGHT" => Action::RTurn,
            _ => return None,
        })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

pub const PRIMITIVES: [&str; 4] = ["walk", "look", "run", "jump"];

/// Every word the grammar knows.
pub const SOURCE_VOCAB: [&str; 13] = [
    "walk", "look", "run", "jump", "turn", "left", "right", "opposite", "around", "twice",
    "thrice", "and", "after",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verb {
    Prim(Action),
    Turn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    Left,
    Right,
}

impl Dir {
    fn turn(self) -> Action {
        match self {
            Dir::Left => Action::LTurn,
            Dir::Right => Action::RTurn,
        }
    }

    fn word(self) -> &'static str {
        match self {
            Dir::Left => "left",
            Dir::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modifier {
    Plain,
    Dir(Dir),
    Opposite(Dir),
    Around(Dir),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phrase {
    pub verb: Verb,
    pub modifier: Modifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Clause {
    pub phrase: Phrase,
    /// 1, 2 (`twice`) or 3 (`thrice`).
    pub repeat: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Command {
    /// One or more clauses joined by `and`.
    And(Vec<Clause>),
    After(Clause, Clause),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at token {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

struct Parser<'a> {
    toks: &'a [&'a str],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).copied()
    }

    fn dir(&mut self) -> Result<Dir, ParseError> {
        let d = match self.peek() {
            Some("left") => Dir::Left,
            Some("right") => Dir::Right,
            Some(t) => return self.err(format!("expected `left` or `right`, found `{t}`")),
            None => return self.err("expected `left` or `right`, found end of input"),
        };
        self.pos += 1;
        Ok(d)
    }

    fn phrase(&mut self) -> Result<Phrase, ParseError> {
        let verb = match self.peek() {
            Some("turn") => Verb::Turn,
            Some(t) => match PRIMITIVES.iter().position(|p| *p == t) {
                Some(i) => Verb::Prim(Action::ALL[i]),
                None => return self.err(format!("expected a verb, found `{t}`")),
            },
            None => return self.err("expected a verb, found end of input"),
        };
        self.pos += 1;
        let modifier = match self.peek() {
            Some("left") | Some("right") => Modifier::Dir(self.dir()?),
            Some("opposite") => {
                self.pos += 1;
                Modifier::Opposite(self.dir()?)
            }
            Some("around") => {
                self.pos += 1;
                Modifier::Around(self.dir()?)
            }
            _ if verb == Verb::Turn => return self.err("`turn` needs a direction"),
            _ => Modifier::Plain,
        };
        Ok(Phrase { verb, modifier })
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let phrase = self.phrase()?;
        let repeat = match self.peek() {
            Some("twice") => 2,
            Some("thrice") => 3,
            _ => 1,
        };
        if repeat > 1 {
            self.pos += 1;
        }
        Ok(Clause { phrase, repeat })
    }

    fn command(&mut self) -> Result<Command, ParseError> {
        let first = self.clause()?;
        let cmd = match self.peek() {
            None => Command::And(vec![first]),
            Some("after") => {
                self.pos += 1;
                Command::After(first, self.clause()?)
            }
            Some("and") => {
                let mut clauses = vec![first];
                while self.peek() == Some("and") {
                    self.pos += 1;
                    clauses.push(self.clause()?);
                }
                Command::And(clauses)
            }
            Some(t) => return self.err(format!("unexpected `{t}`")),
        };
        if let Some(t) = self.peek() {
            return self.err(format!("unexpected trailing `{t}`"));
        }
        Ok(cmd)
    }
}

pub fn parse_tokens(tokens: &[&str]) -> Result<Command, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError {
            position: 0,
            message: "empty command".into(),
        });
    }
    Parser { toks: tokens, pos: 0 }.command()
}

pub fn parse(command: &str) -> Result<Command, ParseError> {
    let toks: Vec<&str> = command.split_whitespace().collect();
    parse_tokens(&toks)
}

impl Phrase {
    pub fn eval(&self, out: &mut Vec<Action>) {
        let prim = match self.verb {
            Verb::Prim(a) => Some(a),
            Verb::Turn => None,
        };
        match self.modifier {
            Modifier::Plain => out.extend(prim),
            Modifier::Dir(d) => {
                out.push(d.turn());
                out.extend(prim);
            }
            Modifier::Opposite(d) => {
                out.push(d.turn());
                out.push(d.turn());
                out.extend(prim);
            }
            Modifier::Around(d) => {
                for _ in 0..4 {
                    out.push(d.turn());
                    out.extend(prim);
                }
            }
        }
    }

    pub fn words(&self) -> Vec<&'static str> {
        let mut w = vec![match self.verb {
            Verb::Prim(a) => PRIMITIVES[Action::ALL.iter().position(|x| *x == a).unwrap()],
            Verb::Turn => "turn",
        }];
        match self.modifier {
            Modifier::Plain => {}
            Modifier::Dir(d) => w.push(d.word()),
            Modifier::Opposite(d) => w.extend(["opposite", d.word()]),
            Modifier::Around(d) => w.extend(["around", d.word()]),
        }
        w
    }
}

impl Clause {
    pub fn eval(&self, out: &mut Vec<Action>) {
        let start = out.len();
        self.phrase.eval(out);
        let once = out[start..].to_vec();
        for _ in 1..self.repeat {
            out.extend_from_slice(&once);
        }
    }

    pub fn words(&self) -> Vec<&'static str> {
        let mut w = self.phrase.words();
        match self.repeat {
            2 => w.push("twice"),
            3 => w.push("thrice"),
            _ => {}
        }
        w
    }

    pub fn text(&self) -> String {
        self.words().join(" ")
    }
}

impl Command {
    pub fn eval(&self) -> Vec<Action> {
        let mut out = Vec::new();
        match self {
            Command::And(cs) => cs.iter().for_each(|c| c.eval(&mut out)),
            Command::After(x, y) => {
                y.eval(&mut out);
                x.eval(&mut out);
            }
        }
        out
    }
}

/// Interpret a command string.
pub fn interpret(command: &str) -> Result<Vec<Action>, ParseError> {
    Ok(parse(command)?.eval())
}

pub fn interpret_tokens(tokens: &[String]) -> Result<Vec<String>, ParseError> {
    let toks: Vec<&str> = tokens.iter().map(String::as_str).collect();
    Ok(parse_tokens(&toks)?
        .eval()
        .into_iter()
        .map(|a| a.token().to_string())
        .collect())
}

/// All 102 clauses in canonical order.
pub fn all_clauses() -> Vec<Clause> {
    let mut verbs: Vec<Verb> = Action::ALL[..4].iter().map(|&a| Verb::Prim(a)).collect();
    verbs.push(Verb::Turn);
    let dirs = [Dir::Left, Dir::Right];
    let mut phrases = Vec::new();
    for &verb in &verbs {
        if let Verb::Prim(_) = verb {
            phrases.push(Phrase { verb, modifier: Modifier::Plain });
        }
        for &d in &dirs {
            phrases.push(Phrase { verb, modifier: Modifier::Dir(d) });
            phrases.push(Phrase { verb, modifier: Modifier::Opposite(d) });
            phrases.push(Phrase { verb, modifier: Modifier::Around(d) });
        }
    }
    let mut clauses = Vec::new();
    for phrase in phrases {
        for repeat in 1..=3 {
            clauses.push(Clause { phrase, repeat });
        }
    }
    clauses
}

pub fn render(actions: &[Action]) -> String {
    actions.iter().map(|a| a.token()).collect::<Vec<_>>().join(" ")
}
