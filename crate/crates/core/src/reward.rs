//! Trajectory rewards: sequence similarity against the target and the
//! fraction of steps whose skeleton holds only variables.

use crate::rollout::Trajectory;

/// Length of the longest common contiguous run of `a` and `b`.
pub fn longest_common_substring<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Intersection over union with the longest common substring as the
/// intersection. Two empty sequences count as identical.
pub fn similarity<T: PartialEq>(a: &[T], o: &[T]) -> f64 {
    let l = longest_common_substring(a, o);
    let union = a.len() + o.len() - l;
    if union == 0 {
        1.0
    } else {
        l as f64 / union as f64
    }
}

/// `T* / T`; zero for an empty or aborted trajectory.
pub fn simplicity(traj: &Trajectory) -> f64 {
    if traj.aborted || traj.steps.is_empty() {
        return 0.0;
    }
    traj.t_star() as f64 / traj.steps.len() as f64
}

pub fn total(traj: &Trajectory, target: &[usize], gamma: f64) -> f64 {
    if traj.aborted {
        return 0.0;
    }
    similarity(&traj.output.actions(), target) + gamma * simplicity(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&[3, 3], &[3, 3]), 1.0);
        assert_eq!(similarity(&[0], &[3]), 0.0);
        assert!((similarity(&[3, 0, 0], &[0, 0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(similarity::<u8>(&[], &[1]), 0.0);
    }

    #[test]
    fn substring_is_contiguous() {
        // Common subsequence 1 2 3 has length 3, common substring only 2.
        assert_eq!(longest_common_substring(&[1, 9, 2, 3], &[1, 2, 3]), 2);
    }
}
