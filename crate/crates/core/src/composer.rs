//! High-level policy: find one recognizable span of the current source
//! expression by bottom-up Tree-LSTM merging with a check after each merge.
//!
//! Before any merging, a leaf layer offers every word leaf as a candidate
//! (variables excluded) so single words can be recognized in place.

use lane_tensor::{Tape, Tensor, Var};

use crate::choice::Chooser;
use crate::expr::{SrcExp, SrcSym, Tree};
use crate::model::Model;
use crate::{ModelError, Result};

/// Tree node representation. `r` is `[h; c]`.
#[derive(Debug, Clone)]
pub struct NodeRepr {
    pub h: Var,
    pub c: Var,
    pub r: Var,
    pub span: (usize, usize),
    pub tree: Tree,
}

/// One layer of decisions: which candidate was selected among how many,
/// and the check outcome (`None` when the root was forced).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDecision {
    pub select: usize,
    pub candidates: usize,
    pub check: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct HighLevelAction {
    pub decisions: Vec<LayerDecision>,
    pub span: (usize, usize),
    pub tree: Tree,
    /// Scalar node: sum of selection and check log-probabilities.
    pub log_prob: Var,
    /// Scalar node: sum of the entropies of every distribution sampled from.
    pub entropy: Var,
}

impl HighLevelAction {
    /// Number of selection and check decisions that carried probability.
    pub fn draws(&self) -> usize {
        self.decisions
            .iter()
            .map(|d| (d.candidates > 1) as usize + d.check.is_some() as usize)
            .sum()
    }
}

/// Result of one categorical draw on the tape.
pub struct Draw {
    pub index: usize,
    pub log_prob: Var,
    pub entropy: Var,
}

/// Draw from `softmax(scores)`; `scores` is a vector node.
pub fn categorical(tape: &mut Tape, scores: Var, chooser: &mut Chooser) -> Result<Draw> {
    let lsm = tape.log_softmax(scores)?;
    let index = chooser.pick(tape.value(lsm))?;
    let log_prob = tape.pick(lsm, index)?;
    let p = tape.softmax(scores)?;
    let plp = tape.mul(p, lsm)?;
    let s = tape.sum(plp);
    let entropy = tape.neg(s);
    Ok(Draw {
        index,
        log_prob,
        entropy,
    })
}

pub fn leaf_transform(tape: &mut Tape, model: &Model, w: &SrcExp) -> Result<Vec<NodeRepr>> {
    if w.is_empty() {
        return Err(ModelError::Contract("leaf_transform on an empty expression".into()));
    }
    let d = model.dim();
    let ids = model.ids;
    let lw = tape.param(ids.leaf_w);
    let lb = tape.param(ids.leaf_b);
    w.0.iter()
        .enumerate()
        .map(|(i, sym)| {
            let emb = embed(tape, model, *sym)?;
            let m = tape.matvec(lw, emb)?;
            let r = tape.add(m, lb)?;
            let h = tape.slice(r, 0, d)?;
            let c = tape.slice(r, d, d)?;
            Ok(NodeRepr {
                h,
                c,
                r,
                span: (i, i),
                tree: Tree::Leaf(i),
            })
        })
        .collect()
}

/// Word embedding for words, source key for variables.
pub fn embed(tape: &mut Tape, model: &Model, sym: SrcSym) -> Result<Var> {
    let v = match sym {
        SrcSym::Word(x) => {
            if x >= model.vocab.src.len() {
                return Err(ModelError::UnknownWord(format!("#{x}")));
            }
            tape.row(model.ids.src_emb, x)?
        }
        SrcSym::Var(i) => {
            if i >= model.config.pool {
                return Err(ModelError::Contract(format!("variable $x{i} outside the pool")));
            }
            tape.row(model.ids.src_key, i)?
        }
    };
    Ok(v)
}

pub fn treelstm_merge(
    tape: &mut Tape,
    model: &Model,
    left: &NodeRepr,
    right: &NodeRepr,
) -> Result<NodeRepr> {
    if left.span.1 + 1 != right.span.0 {
        return Err(ModelError::Contract(format!(
            "merge of non-adjacent spans {:?} and {:?}",
            left.span, right.span
        )));
    }
    let d = model.dim();
    let tw = tape.param(model.ids.tree_w);
    let tb = tape.param(model.ids.tree_b);
    let x = tape.concat(&[left.h, right.h])?;
    let m = tape.matvec(tw, x)?;
    let pre = tape.add(m, tb)?;
    let gates = tape.slice(pre, 0, 4 * d)?;
    let gates = tape.sigmoid(gates);
    let o = tape.slice(gates, 0, d)?;
    let fl = tape.slice(gates, d, d)?;
    let fr = tape.slice(gates, 2 * d, d)?;
    let e = tape.slice(gates, 3 * d, d)?;
    let g = tape.slice(pre, 4 * d, d)?;
    let g = tape.tanh(g);
    let a = tape.mul(fl, left.c)?;
    let b = tape.mul(fr, right.c)?;
    let eg = tape.mul(e, g)?;
    let ab = tape.add(a, b)?;
    let c = tape.add(ab, eg)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    let r = tape.concat(&[h, c])?;
    Ok(NodeRepr {
        h,
        c,
        r,
        span: (left.span.0, right.span.1),
        tree: Tree::Node(Box::new(left.tree.clone()), Box::new(right.tree.clone())),
    })
}

/// Select one of several candidate nodes by `softmax(<q, r_k>)`.
/// A single candidate is taken without a draw (log-probability zero).
pub fn select(
    tape: &mut Tape,
    model: &Model,
    candidates: &[&NodeRepr],
    chooser: &mut Chooser,
) -> Result<Option<Draw>> {
    match candidates.len() {
        0 => Err(ModelError::Contract("selection over no candidates".into())),
        1 => Ok(None),
        _ => {
            let q = tape.param(model.ids.query);
            let scores = candidates
                .iter()
                .map(|n| tape.dot(q, n.r))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let scores = tape.concat(&scores)?;
            categorical(tape, scores, chooser).map(Some)
        }
    }
}

/// Compute every adjacent merge of `layer` and select one.
pub fn select_merge(
    tape: &mut Tape,
    model: &Model,
    layer: &[NodeRepr],
    chooser: &mut Chooser,
) -> Result<(usize, NodeRepr, Option<Draw>)> {
    if layer.len() < 2 {
        return Err(ModelError::Contract("select_merge needs at least two nodes".into()));
    }
    let cands = layer
        .windows(2)
        .map(|p| treelstm_merge(tape, model, &p[0], &p[1]))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&NodeRepr> = cands.iter().collect();
    let draw = select(tape, model, &refs, chooser)?;
    let k = draw.as_ref().map_or(0, |d| d.index);
    Ok((k, cands[k].clone(), draw))
}

/// Bernoulli recognizability check with `p = sigmoid(W_c r + b_c)`, written
/// as a two-way softmax over `[0, z]` so index 1 means "recognized".
pub fn check(tape: &mut Tape, model: &Model, node: &NodeRepr, chooser: &mut Chooser) -> Result<(bool, Draw)> {
    let cw = tape.param(model.ids.check_w);
    let cb = tape.param(model.ids.check_b);
    let z = tape.matvec(cw, node.r)?;
    let z = tape.add(z, cb)?;
    let zero = tape.constant(Tensor::vector(vec![0.0]));
    let scores = tape.concat(&[zero, z])?;
    let draw = categorical(tape, scores, chooser)?;
    Ok((draw.index == 1, draw))
}

/// Probability that `node` is judged recognizable.
pub fn check_prob(tape: &mut Tape, model: &Model, node: &NodeRepr) -> Result<f64> {
    let cw = tape.param(model.ids.check_w);
    let cb = tape.param(model.ids.check_b);
    let z = tape.matvec(cw, node.r)?;
    let z = tape.add(z, cb)?;
    let z = tape.scalar(z);
    Ok(1.0 / (1.0 + (-z).exp()))
}

struct Acc {
    lp: Vec<Var>,
    ent: Vec<Var>,
    decisions: Vec<LayerDecision>,
}

impl Acc {
    fn push(&mut self, d: Option<&Draw>) {
        if let Some(d) = d {
            self.lp.push(d.log_prob);
            self.ent.push(d.entropy);
        }
    }

    fn finish(self, tape: &mut Tape, node: &NodeRepr) -> Result<HighLevelAction> {
        let log_prob = tape.add_all(&self.lp)?;
        let entropy = tape.add_all(&self.ent)?;
        Ok(HighLevelAction {
            decisions: self.decisions,
            span: node.span,
            tree: node.tree.clone(),
            log_prob,
            entropy,
        })
    }
}

/// One high-level action on `w`.
pub fn compose_step(
    tape: &mut Tape,
    model: &Model,
    w: &SrcExp,
    chooser: &mut Chooser,
) -> Result<HighLevelAction> {
    let mut nodes = leaf_transform(tape, model, w)?;
    let mut acc = Acc {
        lp: Vec::new(),
        ent: Vec::new(),
        decisions: Vec::new(),
    };
    if nodes.len() == 1 {
        return acc.finish(tape, &nodes[0]);
    }

    let words: Vec<&NodeRepr> = nodes
        .iter()
        .filter(|n| matches!(w.0[n.span.0], SrcSym::Word(_)))
        .collect();
    if !words.is_empty() {
        let draw = select(tape, model, &words, chooser)?;
        let k = draw.as_ref().map_or(0, |d| d.index);
        let leaf = words[k].clone();
        let (bit, cd) = check(tape, model, &leaf, chooser)?;
        acc.push(draw.as_ref());
        acc.push(Some(&cd));
        acc.decisions.push(LayerDecision {
            select: k,
            candidates: words.len(),
            check: Some(bit),
        });
        if bit {
            return acc.finish(tape, &leaf);
        }
    }

    // Candidates are cached: only the two next to a new parent change.
    let mut cands = nodes
        .windows(2)
        .map(|p| treelstm_merge(tape, model, &p[0], &p[1]))
        .collect::<Result<Vec<_>>>()?;
    loop {
        if cands.len() == 1 {
            acc.decisions.push(LayerDecision {
                select: 0,
                candidates: 1,
                check: None,
            });
            return acc.finish(tape, &cands[0]);
        }
        let refs: Vec<&NodeRepr> = cands.iter().collect();
        let draw = select(tape, model, &refs, chooser)?;
        let k = draw.as_ref().map_or(0, |d| d.index);
        let candidates = cands.len();
        let parent = cands.remove(k);
        let (bit, cd) = check(tape, model, &parent, chooser)?;
        acc.push(draw.as_ref());
        acc.push(Some(&cd));
        acc.decisions.push(LayerDecision {
            select: k,
            candidates,
            check: Some(bit),
        });
        if bit {
            return acc.finish(tape, &parent);
        }
        nodes.splice(k..=k + 1, [parent]);
        if k > 0 {
            cands[k - 1] = treelstm_merge(tape, model, &nodes[k - 1], &nodes[k])?;
        }
        if k + 1 < nodes.len() {
            cands[k] = treelstm_merge(tape, model, &nodes[k], &nodes[k + 1])?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::vocab::Vocab;
    use lane_tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(dim: usize) -> Model {
        let vocab = Vocab::new(
            ["walk", "jump", "twice", "after", "and"].map(String::from).to_vec(),
            ["WALK", "JUMP"].map(String::from).to_vec(),
        );
        Model::new(
            ModelConfig {
                dim,
                ..ModelConfig::default()
            },
            vocab,
            3,
        )
        .unwrap()
    }

    fn zero(m: &mut Model, pick: fn(&crate::model::ParamIds) -> lane_tensor::ParamId) {
        let id = pick(&m.ids);
        let shape = m.store.value(id).shape().to_vec();
        m.store.set(id, Tensor::zeros(&shape)).unwrap();
    }

    fn words(m: &Model, s: &str) -> SrcExp {
        let w: Vec<String> = s.split_whitespace().map(String::from).collect();
        SrcExp::from_words(&w, &m.vocab).unwrap()
    }

    #[test]
    fn leaves_have_unit_spans_and_zero_weights_give_zero() {
        let mut m = model(4);
        zero(&mut m, |i| i.leaf_w);
        let w = words(&m, "walk twice and jump");
        let mut t = Tape::new(&m.store);
        let leaves = leaf_transform(&mut t, &m, &w).unwrap();
        assert_eq!(leaves.len(), 4);
        for (i, l) in leaves.iter().enumerate() {
            assert_eq!(l.span, (i, i));
            assert!(t.value(l.r).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn zero_tree_weights_closed_form() {
        let mut m = model(3);
        zero(&mut m, |i| i.tree_w);
        let w = words(&m, "walk twice");
        let mut t = Tape::new(&m.store);
        let l = leaf_transform(&mut t, &m, &w).unwrap();
        let p = treelstm_merge(&mut t, &m, &l[0], &l[1]).unwrap();
        let (cl, cr) = (t.value(l[0].c).to_vec(), t.value(l[1].c).to_vec());
        for i in 0..3 {
            let c = 0.5 * (cl[i] + cr[i]);
            assert!((t.value(p.c)[i] - c).abs() < 1e-15);
            assert!((t.value(p.h)[i] - 0.5 * c.tanh()).abs() < 1e-15);
        }
        assert_eq!(p.span, (0, 1));
    }

    #[test]
    fn merge_matches_direct_formula() {
        let m = model(3);
        let w = words(&m, "jump after");
        let mut t = Tape::new(&m.store);
        let l = leaf_transform(&mut t, &m, &w).unwrap();
        let p = treelstm_merge(&mut t, &m, &l[0], &l[1]).unwrap();
        let d = 3;
        let x: Vec<f64> = [t.value(l[0].h), t.value(l[1].h)].concat();
        let wt = m.store.value(m.ids.tree_w);
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let pre: Vec<f64> = (0..5 * d)
            .map(|r| wt.row(r).iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        for i in 0..d {
            let c = sig(pre[d + i]) * t.value(l[0].c)[i]
                + sig(pre[2 * d + i]) * t.value(l[1].c)[i]
                + sig(pre[3 * d + i]) * pre[4 * d + i].tanh();
            let h = sig(pre[i]) * c.tanh();
            assert!((t.value(p.c)[i] - c).abs() < 1e-12);
            assert!((t.value(p.h)[i] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn non_adjacent_merge_is_rejected() {
        let m = model(2);
        let w = words(&m, "walk and jump");
        let mut t = Tape::new(&m.store);
        let l = leaf_transform(&mut t, &m, &w).unwrap();
        assert!(treelstm_merge(&mut t, &m, &l[0], &l[2]).is_err());
        assert!(select_merge(&mut t, &m, &l[..1], &mut Chooser::greedy()).is_err());
    }

    #[test]
    fn identical_candidates_are_uniform() {
        let mut m = model(2);
        zero(&mut m, |i| i.leaf_w);
        let w = words(&m, "walk walk walk walk");
        let mut t = Tape::new(&m.store);
        let l = leaf_transform(&mut t, &m, &w).unwrap();
        let (_, _, draw) = select_merge(&mut t, &m, &l, &mut Chooser::greedy()).unwrap();
        let d = draw.unwrap();
        assert!((t.scalar(d.log_prob) + 3f64.ln()).abs() < 1e-12);
        assert!((t.scalar(d.entropy) - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn check_probability_follows_bias() {
        let mut m = model(2);
        zero(&mut m, |i| i.check_w);
        let w = words(&m, "walk");
        let mut t = Tape::new(&m.store);
        let l = leaf_transform(&mut t, &m, &w).unwrap();
        let (bit, d) = check(&mut t, &m, &l[0], &mut Chooser::greedy()).unwrap();
        assert!(!bit);
        assert!((t.scalar(d.log_prob) - 0.5f64.ln()).abs() < 1e-12);

        m.store.set(m.ids.check_b, Tensor::vector(vec![0.7f64.ln() - 0.3f64.ln()])).unwrap();
        let mut t = Tape::new(&m.store);
        let l = leaf_transform(&mut t, &m, &w).unwrap();
        let (bit, d) = check(&mut t, &m, &l[0], &mut Chooser::greedy()).unwrap();
        assert!(bit);
        assert!((t.scalar(d.log_prob) - 0.7f64.ln()).abs() < 1e-12);

        m.store.set(m.ids.check_b, Tensor::vector(vec![-40.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ch = Chooser::sample(&mut rng);
        let mut t = Tape::new(&m.store);
        let l = leaf_transform(&mut t, &m, &w).unwrap();
        for _ in 0..100 {
            assert!(!check(&mut t, &m, &l[0], &mut ch).unwrap().0);
        }
    }

    #[test]
    fn single_token_has_no_decisions() {
        let m = model(4);
        let w = words(&m, "jump");
        let mut t = Tape::new(&m.store);
        let a = compose_step(&mut t, &m, &w, &mut Chooser::greedy()).unwrap();
        assert_eq!(a.span, (0, 0));
        assert!(a.decisions.is_empty());
        assert_eq!(t.scalar(a.log_prob), 0.0);
    }

    #[test]
    fn rejected_checks_force_the_root() {
        let mut m = model(4);
        zero(&mut m, |i| i.check_w);
        m.store.set(m.ids.check_b, Tensor::vector(vec![-40.0])).unwrap();
        let w = words(&m, "walk twice after jump and walk");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ch = Chooser::sample(&mut rng);
        let mut t = Tape::new(&m.store);
        let a = compose_step(&mut t, &m, &w, &mut ch).unwrap();
        assert_eq!(a.span, (0, 5));
        assert_eq!(a.tree.leaves(), (0..6).collect::<Vec<_>>());
        assert!(a.draws() <= 2 * (w.len() - 1));
        assert_eq!(a.decisions.last().unwrap().check, None);
    }

    #[test]
    fn leaf_layer_skips_variables() {
        let mut m = model(4);
        zero(&mut m, |i| i.check_w);
        m.store.set(m.ids.check_b, Tensor::vector(vec![40.0])).unwrap();
        let w = SrcExp(vec![SrcSym::Var(0), SrcSym::Word(2)]);
        let mut t = Tape::new(&m.store);
        let a = compose_step(&mut t, &m, &w, &mut Chooser::greedy()).unwrap();
        assert_eq!(a.span, (1, 1));
        assert_eq!(a.decisions[0].candidates, 1);
    }
}
