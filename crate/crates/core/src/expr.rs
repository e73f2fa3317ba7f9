//! Source/destination expressions and the value-slot memory.
//!
//! Variables are addressed by memory item index: `SrcSym::Var(i)` and
//! `DstSym::Var(i)` both refer to item `i`, whose value slot holds the
//! constant the variable currently stands for.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::vocab::Vocab;
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SrcSym {
    Word(usize),
    Var(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DstSym {
    Action(usize),
    Var(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SrcExp(pub Vec<SrcSym>);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DstExp(pub Vec<DstSym>);

impl SrcExp {
    pub fn from_words(words: &[String], vocab: &Vocab) -> Result<Self> {
        words
            .iter()
            .map(|w| vocab.word(w).map(SrcSym::Word))
            .collect::<Result<Vec<_>>>()
            .map(SrcExp)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|s| matches!(s, SrcSym::Word(_)))
    }

    pub fn vars(&self) -> BTreeSet<usize> {
        self.0
            .iter()
            .filter_map(|s| match s {
                SrcSym::Var(i) => Some(*i),
                SrcSym::Word(_) => None,
            })
            .collect()
    }

    pub fn span(&self, start: usize, end: usize) -> SrcExp {
        SrcExp(self.0[start..=end].to_vec())
    }

    pub fn render(&self, vocab: &Vocab) -> String {
        self.0
            .iter()
            .map(|s| match s {
                SrcSym::Word(w) => vocab.src[*w].clone(),
                SrcSym::Var(i) => format!("$x{i}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl DstExp {
    pub fn constant(actions: &[usize]) -> Self {
        DstExp(actions.iter().map(|&a| DstSym::Action(a)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|s| matches!(s, DstSym::Action(_)))
    }

    /// Non-empty and made of destination variables only.
    pub fn is_variable_only(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|s| matches!(s, DstSym::Var(_)))
    }

    pub fn vars(&self) -> BTreeSet<usize> {
        self.0
            .iter()
            .filter_map(|s| match s {
                DstSym::Var(i) => Some(*i),
                DstSym::Action(_) => None,
            })
            .collect()
    }

    /// Action indices of a constant expression.
    pub fn actions(&self) -> Vec<usize> {
        self.0
            .iter()
            .filter_map(|s| match s {
                DstSym::Action(a) => Some(*a),
                DstSym::Var(_) => None,
            })
            .collect()
    }

    pub fn render(&self, vocab: &Vocab) -> String {
        self.0
            .iter()
            .map(|s| match s {
                DstSym::Action(a) => vocab.dst[*a].clone(),
                DstSym::Var(i) => format!("$X{i}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Value slots of the memory pool. Key vectors live in the parameter store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    slots: Vec<Option<DstExp>>,
}

impl Memory {
    pub fn new(capacity: usize) -> Self {
        Memory {
            slots: vec![None; capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_occupied(&self, i: usize) -> bool {
        self.slots.get(i).is_some_and(Option::is_some)
    }

    pub fn value(&self, i: usize) -> Option<&DstExp> {
        self.slots.get(i).and_then(Option::as_ref)
    }

    pub fn slots(&self) -> &[Option<DstExp>] {
        &self.slots
    }

    /// Expand every variable of `skeleton` with its stored constant, then
    /// empty each distinct slot that was read.
    pub fn substitute(&mut self, skeleton: &DstExp) -> Result<DstExp> {
        let mut out = Vec::new();
        for sym in &skeleton.0 {
            match sym {
                DstSym::Action(_) => out.push(*sym),
                DstSym::Var(i) => match self.value(*i) {
                    Some(v) => out.extend_from_slice(&v.0),
                    None => {
                        return Err(ModelError::Protocol(format!(
                            "variable $X{i} read from an empty slot"
                        )))
                    }
                },
            }
        }
        for i in skeleton.vars() {
            self.slots[i] = None;
        }
        Ok(DstExp(out))
    }

    /// Store a constant in the lowest-index empty slot and return its index.
    pub fn allocate_write(&mut self, value: DstExp) -> Result<usize> {
        if !value.is_constant() {
            return Err(ModelError::Protocol("only constants can be stored".into()));
        }
        let i = self
            .slots
            .iter()
            .position(Option::is_none)
            .ok_or(ModelError::Capacity(self.slots.len()))?;
        self.slots[i] = Some(value);
        Ok(i)
    }

    /// Drop the values of variables that are leaving the expression.
    pub fn release(&mut self, vars: impl IntoIterator<Item = usize>) {
        for i in vars {
            if let Some(s) = self.slots.get_mut(i) {
                *s = None;
            }
        }
    }
}

/// Replace `w[start..=end]` by the single symbol `$x{var}`.
pub fn supersede(w: &SrcExp, start: usize, end: usize, var: usize) -> Result<SrcExp> {
    if start > end || end >= w.len() {
        return Err(ModelError::Span {
            start,
            end,
            len: w.len(),
        });
    }
    let mut out = Vec::with_capacity(w.len() - (end - start));
    out.extend_from_slice(&w.0[..start]);
    out.push(SrcSym::Var(var));
    out.extend_from_slice(&w.0[end + 1..]);
    Ok(SrcExp(out))
}

/// Binary merge structure of a recognized span, over positions of the
/// expression it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tree {
    Leaf(usize),
    Node(Box<Tree>, Box<Tree>),
}

impl Tree {
    /// Bracketed rendering; `leaf` renders the symbol at a position.
    pub fn bracketed(&self, leaf: &dyn Fn(usize) -> String) -> String {
        match self {
            Tree::Leaf(i) => leaf(*i),
            Tree::Node(l, r) => format!("({} {})", l.bracketed(leaf), r.bracketed(leaf)),
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        match self {
            Tree::Leaf(i) => vec![*i],
            Tree::Node(l, r) => {
                let mut v = l.leaves();
                v.extend(r.leaves());
                v
            }
        }
    }
}

/// Builds the whole-command derivation from the per-step recognized trees.
#[derive(Debug, Clone, Default)]
pub struct DerivationBuilder {
    /// Bracketed text each live variable stands for.
    var_text: Vec<Option<String>>,
    pub steps: Vec<String>,
}

impl DerivationBuilder {
    pub fn new(capacity: usize) -> Self {
        DerivationBuilder {
            var_text: vec![None; capacity],
            steps: Vec::new(),
        }
    }

    /// Render a recognized tree over `w`, expanding variables into the
    /// derivations they stand for.
    pub fn render(&self, w: &SrcExp, tree: &Tree, vocab: &Vocab) -> String {
        tree.bracketed(&|i| match w.0[i] {
            SrcSym::Word(x) => vocab.src[x].clone(),
            SrcSym::Var(v) => self
                .var_text
                .get(v)
                .cloned()
                .flatten()
                .unwrap_or_else(|| format!("$x{v}")),
        })
    }

    pub fn record(
        &mut self,
        w: &SrcExp,
        tree: &Tree,
        skeleton: &DstExp,
        constant: &DstExp,
        written: Option<usize>,
        vocab: &Vocab,
    ) -> String {
        let text = self.render(w, tree, vocab);
        let leaves = tree.leaves();
        let span = SrcExp(leaves.iter().map(|&i| w.0[i]).collect());
        let mut line = String::new();
        write!(
            line,
            "{} => {} => {}",
            span.render(vocab),
            skeleton.render(vocab),
            constant.render(vocab)
        )
        .unwrap();
        self.steps.push(line);
        if let Some(v) = written {
            if v < self.var_text.len() {
                self.var_text[v] = Some(text.clone());
            }
        }
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WALK: usize = 0;
    const JUMP: usize = 1;

    fn c(a: &[usize]) -> DstExp {
        DstExp::constant(a)
    }

    #[test]
    fn substitute_repeated_variable() {
        let mut m = Memory::new(2);
        m.allocate_write(c(&[WALK])).unwrap();
        let sk = DstExp(vec![DstSym::Var(0), DstSym::Var(0)]);
        assert_eq!(m.substitute(&sk).unwrap(), c(&[WALK, WALK]));
        assert!(!m.is_occupied(0));
    }

    #[test]
    fn substitute_constant_is_identity() {
        let mut m = Memory::new(2);
        m.allocate_write(c(&[WALK])).unwrap();
        let before = m.clone();
        assert_eq!(m.substitute(&c(&[JUMP])).unwrap(), c(&[JUMP]));
        assert_eq!(m, before);
    }

    #[test]
    fn substitute_two_variables() {
        let mut m = Memory::new(2);
        m.allocate_write(c(&[JUMP])).unwrap();
        m.allocate_write(c(&[WALK, WALK])).unwrap();
        let sk = DstExp(vec![DstSym::Var(0), DstSym::Var(1)]);
        assert_eq!(m.substitute(&sk).unwrap(), c(&[JUMP, WALK, WALK]));
        assert_eq!(m.occupied(), 0);
    }

    #[test]
    fn substitute_empty_slot_fails() {
        let mut m = Memory::new(2);
        let sk = DstExp(vec![DstSym::Var(1)]);
        assert!(matches!(m.substitute(&sk), Err(ModelError::Protocol(_))));
    }

    #[test]
    fn lowest_index_allocation() {
        let mut m = Memory::new(2);
        assert_eq!(m.allocate_write(c(&[WALK, WALK])).unwrap(), 0);
        let mut m = Memory::new(2);
        m.allocate_write(c(&[JUMP])).unwrap();
        assert_eq!(m.allocate_write(c(&[WALK])).unwrap(), 1);
        assert!(matches!(m.allocate_write(c(&[WALK])), Err(ModelError::Capacity(2))));
        m.release([0]);
        assert_eq!(m.allocate_write(c(&[WALK])).unwrap(), 0);
        assert!(m.allocate_write(DstExp(vec![DstSym::Var(0)])).is_err());
    }

    #[test]
    fn supersede_spans() {
        // "$x after $y twice" with words after=10, twice=11
        let w = SrcExp(vec![SrcSym::Var(0), SrcSym::Word(10), SrcSym::Var(1), SrcSym::Word(11)]);
        let out = supersede(&w, 2, 3, 1).unwrap();
        assert_eq!(out, SrcExp(vec![SrcSym::Var(0), SrcSym::Word(10), SrcSym::Var(1)]));
        assert_eq!(supersede(&w, 0, 3, 0).unwrap().len(), 1);
        assert_eq!(supersede(&w, 2, 2, 1).unwrap(), w);
        assert!(supersede(&w, 2, 4, 0).is_err());
        assert!(supersede(&w, 3, 2, 0).is_err());
    }

    #[test]
    fn derivation_rendering() {
        let vocab = Vocab::new(
            vec!["jump".into(), "twice".into()],
            vec!["JUMP".into()],
        );
        let mut d = DerivationBuilder::new(2);
        let w = SrcExp(vec![SrcSym::Word(0), SrcSym::Word(1)]);
        let t = d.record(&w, &Tree::Leaf(0), &c(&[0]), &c(&[0]), Some(0), &vocab);
        assert_eq!(t, "jump");
        let w2 = supersede(&w, 0, 0, 0).unwrap();
        let tree = Tree::Node(Box::new(Tree::Leaf(0)), Box::new(Tree::Leaf(1)));
        let sk = DstExp(vec![DstSym::Var(0), DstSym::Var(0)]);
        let t = d.record(&w2, &tree, &sk, &c(&[0, 0]), None, &vocab);
        assert_eq!(t, "(jump twice)");
        assert_eq!(d.steps[1], "$x0 twice => $X0 $X0 => JUMP JUMP");
    }
}
