use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grammar::{all_clauses, Clause};
use crate::split::DatasetSplit;
use crate::Example;

fn example_of(words: Vec<&str>, actions: Vec<crate::Action>) -> Example {
    Example {
        command: words.into_iter().map(str::to_string).collect(),
        actions: actions.into_iter().map(|a| a.token().to_string()).collect(),
    }
}

fn join(clauses: &[Clause], conj: &'static str) -> Example {
    let mut words = Vec::new();
    for (i, c) in clauses.iter().enumerate() {
        if i > 0 {
            words.push(conj);
        }
        words.extend(c.words());
    }
    let mut actions = Vec::new();
    if conj == "after" {
        for c in clauses.iter().rev() {
            c.eval(&mut actions);
        }
    } else {
        clauses.iter().for_each(|c| c.eval(&mut actions));
    }
    example_of(words, actions)
}

/// Every SCAN command (at most one conjunction), in canonical order:
/// single clauses, then `x and y`, then `x after y`.
pub fn generate_scan() -> Vec<Example> {
    let clauses = all_clauses();
    let mut out = Vec::with_capacity(clauses.len() * (1 + 2 * clauses.len()));
    for c in &clauses {
        out.push(join(&[*c], "and"));
    }
    for conj in ["and", "after"] {
        for x in &clauses {
            for y in &clauses {
                out.push(join(&[*x, *y], conj));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtSizes {
    pub train: usize,
    pub test: usize,
    /// Largest number of `and` in a training command.
    pub train_max_and: usize,
    /// Range of `and` counts drawn for test commands.
    pub test_min_and: usize,
    pub test_max_and: usize,
}

impl Default for ExtSizes {
    fn default() -> Self {
        ExtSizes {
            train: 20506,
            test: 4000,
            train_max_and: 2,
            test_min_and: 3,
            test_max_and: 9,
        }
    }
}

/// Even split of `total` into `k` quotas, remainder to the first buckets.
fn quotas(total: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| total / k + usize::from(i < total % k)).collect()
}

fn sample_distinct(
    rng: &mut ChaCha8Rng,
    clauses: &[Clause],
    n_and: usize,
    want: usize,
    seen: &mut HashSet<Vec<String>>,
    out: &mut Vec<Example>,
) {
    let mut got = 0;
    while got < want {
        let picked: Vec<Clause> = (0..=n_and)
            .map(|_| clauses[rng.gen_range(0..clauses.len())])
            .collect();
        let ex = join(&picked, "and");
        if seen.insert(ex.command.clone()) {
            out.push(ex);
            got += 1;
        }
    }
}

/// Seeded SCAN-ext sampler: clauses drawn uniformly and chained with `and`.
///
/// Training holds every single-clause command and splits the remaining
/// quota evenly across 1..=`train_max_and` conjunctions. Test commands are
/// spread evenly over `test_min_and..=test_max_and`.
pub fn generate_scan_ext(seed: u64, sizes: ExtSizes) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = all_clauses();
    let mut seen = HashSet::new();

    let mut train = Vec::with_capacity(sizes.train);
    let singles = clauses.len().min(sizes.train);
    for c in &clauses[..singles] {
        let ex = join(&[*c], "and");
        seen.insert(ex.command.clone());
        train.push(ex);
    }
    if sizes.train_max_and > 0 {
        let rest = quotas(sizes.train - singles, sizes.train_max_and);
        for (i, q) in rest.into_iter().enumerate() {
            sample_distinct(&mut rng, &clauses, i + 1, q, &mut seen, &mut train);
        }
    }

    let mut test = Vec::with_capacity(sizes.test);
    let span = sizes.test_max_and - sizes.test_min_and + 1;
    for (i, q) in quotas(sizes.test, span).into_iter().enumerate() {
        sample_distinct(&mut rng, &clauses, sizes.test_min_and + i, q, &mut seen, &mut test);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    DatasetSplit {
        name: "scan_ext".into(),
        train,
        dev: Vec::new(),
        test,
        seed,
        warnings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotas_sum() {
        assert_eq!(quotas(4000, 7).iter().sum::<usize>(), 4000);
        assert_eq!(quotas(10, 3), vec![4, 3, 3]);
    }

    #[test]
    fn scan_contains_primitives() {
        let all = generate_scan();
        assert!(all.contains(&Example::new("jump", "JUMP")));
        assert_eq!(all.len(), 20910);
    }
}
