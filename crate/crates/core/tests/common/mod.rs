//! Checks shared by the integration suites and the acceptance run.
#![allow(dead_code)]

use std::collections::BTreeSet;

use lane_core::choice::Chooser;
use lane_core::composer::{check, leaf_transform, select, treelstm_merge};
use lane_core::expr::{supersede, Memory, SrcExp, SrcSym};
use lane_core::reward;
use lane_core::rollout::{rollout, Trajectory};
use lane_core::solver::{decode, encode};
use lane_core::trainer::reinforce_loss;
use lane_core::vocab::Vocab;
use lane_core::{Model, ModelConfig};
use lane_scan::grammar::SOURCE_VOCAB;
use lane_scan::{generate_scan, Example};
use lane_tensor::gradcheck::{check_params, Report};
use lane_tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ACTIONS: [&str; 6] = ["WALK", "LOOK", "RUN", "JUMP", "LTURN", "RTURN"];

pub fn scan_vocab() -> Vocab {
    Vocab::new(
        SOURCE_VOCAB.iter().map(|s| s.to_string()).collect(),
        ACTIONS.iter().map(|s| s.to_string()).collect(),
    )
}

pub fn scan_model(dim: usize, pool: usize, init_scale: f64, seed: u64) -> Model {
    let cfg = ModelConfig {
        dim,
        pool,
        skeleton_cap: 8,
        init_scale,
    };
    Model::new(cfg, scan_vocab(), seed).expect("model")
}

pub fn words(m: &Model, s: &str) -> SrcExp {
    let w: Vec<String> = s.split_whitespace().map(String::from).collect();
    SrcExp::from_words(&w, &m.vocab).expect("known words")
}

/// SCAN commands of at most `max_len` tokens.
pub fn short_commands(max_len: usize) -> Vec<Example> {
    generate_scan()
        .into_iter()
        .filter(|e| e.command.len() <= max_len)
        .collect()
}

// ------------------------------------------------------------ gradients

const PER_PARAM: usize = 20;

/// Finite-difference report plus how many checked parameters receive a
/// gradient above round-off, so an all-zero backward pass cannot pass.
pub struct GradCheck {
    pub report: Report,
    pub live: usize,
    pub params: usize,
}

fn gradcheck<F>(store: &lane_tensor::ParamStore, ids: &[lane_tensor::ParamId], rng: &mut ChaCha8Rng, f: F) -> GradCheck
where
    F: Fn(&mut Tape) -> lane_tensor::Result<lane_tensor::Var>,
{
    let grads = {
        let mut t = Tape::new(store);
        let loss = f(&mut t).expect("forward");
        t.backward(loss).expect("backward")
    };
    let live = ids
        .iter()
        .filter(|&&id| grads.get(id).is_some_and(|g| g.iter().any(|x| x.abs() > 1e-6)))
        .count();
    let report = check_params(store, ids, PER_PARAM, rng, f).expect("gradcheck runs");
    GradCheck {
        report,
        live,
        params: ids.len(),
    }
}

/// Two merges over three leaves (one a variable), a selection and a check.
pub fn tree_lstm_gradcheck(seed: u64) -> GradCheck {
    let m = scan_model(5, 3, 0.5, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Tensor::uniform(&[10], 1.0, &mut rng);
    let w = SrcExp(vec![SrcSym::Word(0), SrcSym::Var(1), SrcSym::Word(7)]);
    let ids = [
        m.ids.src_emb,
        m.ids.src_key,
        m.ids.leaf_w,
        m.ids.leaf_b,
        m.ids.tree_w,
        m.ids.tree_b,
        m.ids.query,
        m.ids.check_w,
        m.ids.check_b,
    ];
    gradcheck(&m.store, &ids, &mut rng, |t: &mut Tape| {
        let leaves = leaf_transform(t, &m, &w).map_err(into_tensor)?;
        let a = treelstm_merge(t, &m, &leaves[0], &leaves[1]).map_err(into_tensor)?;
        let b = treelstm_merge(t, &m, &leaves[1], &leaves[2]).map_err(into_tensor)?;
        let top = treelstm_merge(t, &m, &a, &leaves[2]).map_err(into_tensor)?;
        let sel = select(t, &m, &[&a, &b], &mut Chooser::replay(&[1]))
            .map_err(into_tensor)?
            .expect("two candidates draw");
        let (_, chk) = check(t, &m, &top, &mut Chooser::replay(&[0])).map_err(into_tensor)?;
        let uv = t.constant(u.clone());
        let proj = t.dot(uv, top.r)?;
        let s = t.add(proj, sel.log_prob)?;
        t.add(s, chk.log_prob)
    })
}

fn into_tensor(e: lane_core::ModelError) -> lane_tensor::TensorError {
    match e {
        lane_core::ModelError::Tensor(t) => t,
        other => panic!("model error inside gradcheck: {other}"),
    }
}

/// Encoder and attention decoder along one sampled, then frozen, output.
pub fn decoder_gradcheck(seed: u64) -> GradCheck {
    let m = scan_model(5, 3, 0.5, seed);
    let g = SrcExp(vec![SrcSym::Word(2), SrcSym::Var(0), SrcSym::Word(9), SrcSym::Var(2)]);
    let allowed = [0usize, 2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDEC);
    let trace = {
        let mut t = Tape::new(&m.store);
        let enc = encode(&mut t, &m, &g).unwrap();
        let mut ch = Chooser::sample(&mut rng);
        decode(&mut t, &m, &enc, &allowed, &mut ch).unwrap();
        ch.trace
    };
    let ids: Vec<_> = m.solver_params().into_iter().chain([m.ids.src_emb, m.ids.src_key]).collect();
    gradcheck(&m.store, &ids, &mut rng, |t: &mut Tape| {
        let enc = encode(t, &m, &g).map_err(into_tensor)?;
        let d = decode(t, &m, &enc, &allowed, &mut Chooser::replay(&trace)).map_err(into_tensor)?;
        let e = t.scale(d.entropy, 0.1);
        t.add(d.log_prob, e)
    })
}

fn sample_trajectories(m: &Model, src: &SrcExp, n: usize, seed: u64) -> Vec<Trajectory> {
    let mut t = Tape::new(&m.store);
    (0..n)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(k as u64));
            rollout(&mut t, m, src, &mut Chooser::sample(&mut rng), 20).unwrap()
        })
        .collect()
}

/// REINFORCE loss over N frozen trajectories, every parameter.
pub fn reinforce_gradcheck(seed: u64) -> GradCheck {
    let m = scan_model(4, 3, 0.5, seed);
    let cmd = "jump twice after walk left";
    let src = words(&m, cmd);
    let target = m.vocab.encode_actions(&lane_scan::grammar::interpret_tokens(
        &cmd.split(' ').map(String::from).collect::<Vec<_>>(),
    ).unwrap()).unwrap();
    let trajs = sample_trajectories(&m, &src, 4, seed);
    let rewards: Vec<f64> = trajs.iter().map(|t| reward::total(t, &target, 0.5)).collect();
    let choices: Vec<Vec<usize>> = trajs.iter().map(|t| t.choices.clone()).collect();
    let ids: Vec<_> = m.store.ids().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4E1);
    gradcheck(&m.store, &ids, &mut rng, |t: &mut Tape| {
        let replayed = choices
            .iter()
            .map(|c| rollout(t, &m, &src, &mut Chooser::replay(c), 20))
            .collect::<lane_core::Result<Vec<_>>>()
            .map_err(into_tensor)?;
        reinforce_loss(t, &replayed, &rewards, 0.1).map_err(into_tensor)
    })
}

/// Largest gap between a sampled trajectory and its replay in log-probability
/// and entropy, over `n` episodes. Outputs must match exactly.
pub fn replay_gap(seed: u64, n: usize) -> f64 {
    let m = scan_model(6, 3, 0.5, seed);
    let cmds = short_commands(9);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0f64;
    for k in 0..n {
        let ex = &cmds[rng.gen_range(0..cmds.len())];
        let src = SrcExp::from_words(&ex.command, &m.vocab).unwrap();
        let mut t = Tape::new(&m.store);
        let a = {
            let mut r = ChaCha8Rng::seed_from_u64(seed + k as u64);
            rollout(&mut t, &m, &src, &mut Chooser::sample(&mut r), 20).unwrap()
        };
        let b = rollout(&mut t, &m, &src, &mut Chooser::replay(&a.choices), 20).unwrap();
        assert_eq!(a.output, b.output);
        assert_eq!(a.choices, b.choices);
        for (x, y) in [
            (a.log_prob_composer, b.log_prob_composer),
            (a.log_prob_solver, b.log_prob_solver),
            (a.entropy, b.entropy),
        ] {
            worst = worst.max((t.scalar(x) - t.scalar(y)).abs());
        }
    }
    worst
}

// ------------------------------------------------------------ rewards

/// Longest common substring by enumerating every substring of `a`.
pub fn lcs_oracle(a: &[u8], b: &[u8]) -> usize {
    let mut best = 0;
    for i in 0..a.len() {
        for j in i + 1..=a.len() {
            let sub = &a[i..j];
            if sub.len() > best && b.windows(sub.len()).any(|w| w == sub) {
                best = sub.len();
            }
        }
    }
    best
}

pub fn random_seq(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = rng.gen_range(0..=10);
    let alphabet = rng.gen_range(1..=4);
    (0..n).map(|_| rng.gen_range(0..alphabet)).collect()
}

/// Violations of the similarity reward properties over `pairs` random pairs.
pub fn reward_violations(pairs: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for _ in 0..pairs {
        let a = random_seq(&mut rng);
        // Half the pairs are equal or near-equal to exercise the `= 1` case.
        let b = match rng.gen_range(0..4) {
            0 => a.clone(),
            1 if !a.is_empty() => {
                let mut b = a.clone();
                b.remove(rng.gen_range(0..b.len()));
                b
            }
            _ => random_seq(&mut rng),
        };
        let r = reward::similarity(&a, &b);
        let lcs = reward::longest_common_substring(&a, &b);
        if !(0.0..=1.0).contains(&r) {
            bad.push(format!("{a:?} {b:?}: similarity {r} outside [0, 1]"));
        }
        if (r == 1.0) != (a == b) {
            bad.push(format!("{a:?} {b:?}: similarity {r} but equality is {}", a == b));
        }
        if lcs != lcs_oracle(&a, &b) {
            bad.push(format!("{a:?} {b:?}: lcs {lcs} vs oracle {}", lcs_oracle(&a, &b)));
        }
    }
    bad
}

/// `T* / T` recounted from the text dump of a trajectory.
pub fn simplicity_from_dump(lines: &[String]) -> f64 {
    if lines.is_empty() {
        return 0.0;
    }
    let var_only = lines
        .iter()
        .filter(|l| {
            let skeleton = l.split("=>").nth(1).unwrap_or("").trim();
            !skeleton.is_empty() && skeleton.split(' ').all(|t| t.starts_with("$X"))
        })
        .count();
    var_only as f64 / lines.len() as f64
}

// ------------------------------------------------------------ protocol

/// Replay the memory protocol of one trajectory step by step and report
/// every broken invariant: occupied slots are exactly the variables of the
/// current expression, skeletons only read variables of their span that
/// are occupied, constants are the substitution of their skeleton, and the
/// next expression is the superseded one.
pub fn protocol_violations(tr: &Trajectory, pool: usize, src: &SrcExp) -> Vec<String> {
    let mut bad = Vec::new();
    let mut mem = Memory::new(pool);
    let mut w = src.clone();
    for (k, st) in tr.steps.iter().enumerate() {
        if st.src != w {
            bad.push(format!("step {k}: expression drifted"));
            return bad;
        }
        let occupied: BTreeSet<usize> = (0..pool).filter(|&i| mem.is_occupied(i)).collect();
        if occupied != w.vars() {
            bad.push(format!("step {k}: occupied {occupied:?} but live vars {:?}", w.vars()));
        }
        let (s, e) = st.span;
        let g = w.span(s, e);
        let readable: BTreeSet<usize> = g.vars().intersection(&occupied).copied().collect();
        if !st.skeleton.vars().is_subset(&readable) {
            bad.push(format!(
                "step {k}: skeleton reads {:?}, span allows {readable:?}",
                st.skeleton.vars()
            ));
            return bad;
        }
        let constant = match mem.substitute(&st.skeleton) {
            Ok(c) => c,
            Err(err) => {
                bad.push(format!("step {k}: {err}"));
                return bad;
            }
        };
        if constant != st.constant || !constant.is_constant() {
            bad.push(format!("step {k}: constant differs from substitution"));
        }
        mem.release(g.vars());
        let terminal = s == 0 && e + 1 == w.len();
        match (terminal, st.written) {
            (true, None) => {
                if k + 1 != tr.steps.len() || tr.output != constant {
                    bad.push(format!("step {k}: terminal step is not final"));
                }
            }
            (false, Some(v)) => match mem.allocate_write(constant) {
                Ok(slot) if slot == v => w = supersede(&w, s, e, v).unwrap(),
                Ok(slot) => bad.push(format!("step {k}: wrote slot {v}, lowest free is {slot}")),
                Err(err) => bad.push(format!("step {k}: {err}")),
            },
            (t, wr) => bad.push(format!("step {k}: terminal {t} with write {wr:?}")),
        }
    }
    if tr.aborted && !tr.output.is_empty() {
        bad.push("aborted episode carries an output".into());
    }
    bad
}

pub struct Sweep {
    pub episodes: usize,
    pub aborted: usize,
    /// Broken memory-protocol or masking invariants.
    pub protocol: Vec<String>,
    /// Trajectories whose `T* / T` disagrees with the recount from the dump.
    pub simplicity: Vec<String>,
}

/// Episodes sampled from several random models on random SCAN commands.
pub fn protocol_sweep(episodes: usize, seed: u64) -> Sweep {
    let cmds = short_commands(9);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models: Vec<Model> = (0..4)
        .map(|i| scan_model(4, 2 + i % 3, 1.0 + i as f64, seed + i as u64))
        .collect();
    let mut out = Sweep {
        episodes,
        aborted: 0,
        protocol: Vec::new(),
        simplicity: Vec::new(),
    };
    for k in 0..episodes {
        let m = &models[k % models.len()];
        let ex = &cmds[rng.gen_range(0..cmds.len())];
        let src = SrcExp::from_words(&ex.command, &m.vocab).unwrap();
        let mut t = Tape::new(&m.store);
        let tr = rollout(&mut t, m, &src, &mut Chooser::sample(&mut rng), 20).unwrap();
        out.aborted += tr.aborted as usize;
        for v in protocol_violations(&tr, m.config.pool, &src) {
            out.protocol.push(format!("`{}`: {v}", ex.command_str()));
        }
        let dump = tr.derivation(m).0;
        let recount = simplicity_from_dump(&dump);
        let direct = reward::simplicity(&tr);
        if !tr.aborted && ((recount - direct).abs() > 1e-12 || dump.len() != tr.steps.len()) {
            out.simplicity
                .push(format!("`{}`: R_a {direct} but dump gives {recount}", ex.command_str()));
        }
    }
    out
}
