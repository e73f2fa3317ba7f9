mod common;

use common::*;
use lane_core::expr::{supersede, DstExp, DstSym, Memory, SrcExp, SrcSym};
use lane_core::reward::{longest_common_substring, similarity};
use proptest::prelude::*;

#[test]
fn similarity_reward_over_ten_thousand_pairs() {
    let bad = reward_violations(10_000, 17);
    assert!(bad.is_empty(), "{} violations, e.g. {:?}", bad.len(), &bad[..bad.len().min(5)]);
}

#[test]
fn memory_protocol_over_ten_thousand_episodes() {
    let s = protocol_sweep(10_000, 23);
    assert!(s.aborted < s.episodes, "every episode aborted");
    for bad in [&s.protocol, &s.simplicity] {
        assert!(bad.is_empty(), "{} violations, e.g. {:?}", bad.len(), &bad[..bad.len().min(5)]);
    }
}

proptest! {
    #[test]
    fn lcs_matches_oracle(a in prop::collection::vec(0u8..3, 0..9), b in prop::collection::vec(0u8..3, 0..9)) {
        prop_assert_eq!(longest_common_substring(&a, &b), lcs_oracle(&a, &b));
        prop_assert_eq!(longest_common_substring(&a, &b), longest_common_substring(&b, &a));
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(a in prop::collection::vec(0u8..3, 0..9), b in prop::collection::vec(0u8..3, 0..9)) {
        let r = similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r, similarity(&b, &a));
    }

    /// Hand-driven protocol: write constants for single words, then combine
    /// them with a variable-only skeleton.
    #[test]
    fn combine_step_conserves_slots(n_words in 2usize..5, reps in prop::collection::vec(1usize..3, 4)) {
        let mut mem = Memory::new(4);
        let mut w = SrcExp((0..n_words).map(SrcSym::Word).collect());
        for i in 0..n_words {
            let pos = w.0.iter().position(|s| matches!(s, SrcSym::Word(_))).unwrap();
            let v = mem.allocate_write(DstExp::constant(&vec![i; reps[i % 4]])).unwrap();
            w = supersede(&w, pos, pos, v).unwrap();
            prop_assert_eq!(mem.occupied(), i + 1);
        }
        let vars: Vec<usize> = w.vars().into_iter().collect();
        let skeleton = DstExp(vars.iter().rev().map(|&v| DstSym::Var(v)).collect());
        let out = mem.substitute(&skeleton).unwrap();
        mem.release(w.vars());
        prop_assert_eq!(mem.occupied(), 0);
        prop_assert_eq!(out.len(), (0..n_words).map(|i| reps[i % 4]).sum::<usize>());
    }
}
