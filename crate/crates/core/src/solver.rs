//! Low-level policy: attention encoder-decoder from a recognized span to a
//! skeleton over action words and destination variables.
//!
//! Output symbols are numbered `0..A` for actions, `A` for the end marker,
//! and `A + 1 + j` for the j-th allowed variable of the step.

use lane_tensor::{Tape, Var};

use crate::choice::Chooser;
use crate::composer::{categorical, embed};
use crate::expr::{DstExp, DstSym, Memory, SrcExp};
use crate::model::Model;
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub skeleton: DstExp,
    pub log_prob: Var,
    pub entropy: Var,
    /// Cap reached before the end marker.
    pub truncated: bool,
    /// Attention weights per emitted symbol.
    pub attention: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LowLevelAction {
    pub skeleton: DstExp,
    pub constant: DstExp,
    /// Slot the constant was written to; `None` on the terminal step.
    pub written: Option<usize>,
    pub log_prob: Var,
    pub entropy: Var,
    pub truncated: bool,
}

/// One LSTM cell step; `w` is `[4D, 2D]` over `[x; h]`, gates `i, f, o, g`.
fn lstm(tape: &mut Tape, w: Var, b: Var, d: usize, x: Var, s: LstmState) -> Result<LstmState> {
    let xh = tape.concat(&[x, s.h])?;
    let m = tape.matvec(w, xh)?;
    let pre = tape.add(m, b)?;
    let sg = tape.slice(pre, 0, 3 * d)?;
    let sg = tape.sigmoid(sg);
    let i = tape.slice(sg, 0, d)?;
    let f = tape.slice(sg, d, d)?;
    let o = tape.slice(sg, 2 * d, d)?;
    let g = tape.slice(pre, 3 * d, d)?;
    let g = tape.tanh(g);
    let fc = tape.mul(f, s.c)?;
    let ig = tape.mul(i, g)?;
    let c = tape.add(fc, ig)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok(LstmState { h, c })
}

fn zero_state(tape: &mut Tape, d: usize) -> LstmState {
    let z = tape.constant(lane_tensor::Tensor::zeros(&[d]));
    LstmState { h: z, c: z }
}

/// Encoder states for every position of `g`, plus the final state.
pub fn encode(tape: &mut Tape, model: &Model, g: &SrcExp) -> Result<(Vec<Var>, LstmState)> {
    if g.is_empty() {
        return Err(ModelError::Contract("encode on an empty expression".into()));
    }
    let d = model.dim();
    let w = tape.param(model.ids.enc_w);
    let b = tape.param(model.ids.enc_b);
    let mut s = zero_state(tape, d);
    let mut hs = Vec::with_capacity(g.len());
    for sym in &g.0 {
        let x = embed(tape, model, *sym)?;
        s = lstm(tape, w, b, d, x, s)?;
        hs.push(s.h);
    }
    Ok((hs, s))
}

/// Destination variables the decoder may emit for span `g`: those whose
/// source variable occurs in `g` and whose slot is occupied.
pub fn allowed_vars(g: &SrcExp, mem: &Memory) -> Vec<usize> {
    g.vars().into_iter().filter(|&i| mem.is_occupied(i)).collect()
}

pub fn decode(
    tape: &mut Tape,
    model: &Model,
    enc: &(Vec<Var>, LstmState),
    allowed: &[usize],
    chooser: &mut Chooser,
) -> Result<Decoded> {
    let d = model.dim();
    let n_act = model.n_actions();
    let ids = model.ids;
    let w = tape.param(ids.dec_w);
    let b = tape.param(ids.dec_b);
    let ow = tape.param(ids.out_w);
    let ob = tape.param(ids.out_b);
    let oe = tape.param(ids.out_emb);
    let keys = allowed
        .iter()
        .map(|&i| tape.row(ids.dst_key, i))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let (hs, last) = enc;
    let mut s = *last;
    let mut x = tape.row(ids.dec_in, n_act)?;
    let mut syms = Vec::new();
    let mut lps = Vec::new();
    let mut ents = Vec::new();
    let mut attention = Vec::new();
    let mut truncated = true;
    for _ in 0..model.config.skeleton_cap {
        s = lstm(tape, w, b, d, x, s)?;
        let scores = hs
            .iter()
            .map(|&e| tape.dot(s.h, e))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let scores = tape.concat(&scores)?;
        let alpha = tape.softmax(scores)?;
        attention.push(tape.value(alpha).to_vec());
        let mut terms = Vec::with_capacity(hs.len());
        for (j, &e) in hs.iter().enumerate() {
            let a = tape.pick(alpha, j)?;
            terms.push(tape.scale_by(a, e)?);
        }
        let mut ctx = terms[0];
        for &t in &terms[1..] {
            ctx = tape.add(ctx, t)?;
        }
        let hc = tape.concat(&[s.h, ctx])?;
        let m = tape.matvec(ow, hc)?;
        let m = tape.add(m, ob)?;
        let proj = tape.tanh(m);
        let mut parts = vec![tape.matvec(oe, proj)?];
        for &k in &keys {
            parts.push(tape.dot(k, proj)?);
        }
        let logits = tape.concat(&parts)?;
        let draw = categorical(tape, logits, chooser)?;
        lps.push(draw.log_prob);
        ents.push(draw.entropy);
        let k = draw.index;
        if k == n_act {
            truncated = false;
            break;
        }
        if k < n_act {
            syms.push(DstSym::Action(k));
            x = tape.row(ids.dec_in, k)?;
        } else {
            let v = allowed[k - n_act - 1];
            syms.push(DstSym::Var(v));
            x = keys[k - n_act - 1];
        }
    }
    let log_prob = tape.add_all(&lps)?;
    let entropy = tape.add_all(&ents)?;
    Ok(Decoded {
        skeleton: DstExp(syms),
        log_prob,
        entropy,
        truncated,
        attention,
    })
}

/// Translate `g`, resolve the skeleton against `mem`, and unless `terminal`
/// store the constant in a fresh slot. Variables of `g` the skeleton did not
/// read are released since they leave the expression.
pub fn solve(
    tape: &mut Tape,
    model: &Model,
    g: &SrcExp,
    mem: &mut Memory,
    chooser: &mut Chooser,
    terminal: bool,
) -> Result<LowLevelAction> {
    let enc = encode(tape, model, g)?;
    let allowed = allowed_vars(g, mem);
    let dec = decode(tape, model, &enc, &allowed, chooser)?;
    let constant = mem.substitute(&dec.skeleton)?;
    mem.release(g.vars());
    let written = if terminal {
        None
    } else {
        Some(mem.allocate_write(constant.clone())?)
    };
    Ok(LowLevelAction {
        skeleton: dec.skeleton,
        constant,
        written,
        log_prob: dec.log_prob,
        entropy: dec.entropy,
        truncated: dec.truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::SrcSym;
    use crate::model::ModelConfig;
    use crate::vocab::Vocab;
    use lane_tensor::Tensor;

    fn model() -> Model {
        let vocab = Vocab::new(
            ["walk", "twice"].map(String::from).to_vec(),
            ["WALK", "LOOK", "RUN", "JUMP", "LTURN", "RTURN"].map(String::from).to_vec(),
        );
        Model::new(
            ModelConfig {
                dim: 4,
                ..ModelConfig::default()
            },
            vocab,
            5,
        )
        .unwrap()
    }

    fn zero(m: &mut Model, pick: fn(&crate::model::ParamIds) -> lane_tensor::ParamId) {
        let id = pick(&m.ids);
        let shape = m.store.value(id).shape().to_vec();
        m.store.set(id, Tensor::zeros(&shape)).unwrap();
    }

    #[test]
    fn zero_encoder_gives_zero_states() {
        let mut m = model();
        zero(&mut m, |i| i.enc_w);
        let g = SrcExp(vec![SrcSym::Word(0), SrcSym::Word(1)]);
        let mut t = Tape::new(&m.store);
        let (hs, _) = encode(&mut t, &m, &g).unwrap();
        assert_eq!(hs.len(), 2);
        for h in hs {
            assert_eq!(t.value(h), &[0.0; 4]);
        }
    }

    #[test]
    fn empty_memory_masks_every_variable() {
        let mem = Memory::new(3);
        let g = SrcExp(vec![SrcSym::Var(0), SrcSym::Word(1)]);
        assert!(allowed_vars(&g, &mem).is_empty());
    }

    #[test]
    fn uniform_logits_over_seven_symbols() {
        let mut m = model();
        zero(&mut m, |i| i.out_w);
        zero(&mut m, |i| i.out_b);
        m.config.skeleton_cap = 3;
        let g = SrcExp(vec![SrcSym::Word(0)]);
        let mut t = Tape::new(&m.store);
        let enc = encode(&mut t, &m, &g).unwrap();
        let dec = decode(&mut t, &m, &enc, &[], &mut Chooser::greedy()).unwrap();
        // Ties go to action 0, so the cap is reached.
        assert!(dec.truncated);
        assert_eq!(dec.skeleton.len(), 3);
        assert!((t.scalar(dec.log_prob) + 3.0 * 7f64.ln()).abs() < 1e-12);
        for row in &dec.attention {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn terminal_step_does_not_write() {
        let m = model();
        let g = SrcExp(vec![SrcSym::Word(0)]);
        let mut mem = Memory::new(3);
        let mut t = Tape::new(&m.store);
        let a = solve(&mut t, &m, &g, &mut mem, &mut Chooser::greedy(), true).unwrap();
        assert!(a.written.is_none());
        assert_eq!(mem.occupied(), 0);
        assert!(a.constant.is_constant());
    }
}
