//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates the forward pass, so it is an
//! independent oracle for whatever backward rules the tape applies.

use rand::seq::index::sample;
use rand::Rng;

use crate::{ParamId, ParamStore, Result, Tape, Var};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Coordinates whose analytic and numeric values are both below this are
/// compared absolutely; relative error is meaningless at round-off scale.
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checked: usize,
    pub passed: usize,
    pub worst_rel: f64,
    pub failures: Vec<(String, usize, f64, f64)>,
}

impl Report {
    pub fn pass_rate(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }

    pub fn merge(&mut self, other: Report) {
        self.checked += other.checked;
        self.passed += other.passed;
        self.worst_rel = self.worst_rel.max(other.worst_rel);
        self.failures.extend(other.failures);
    }
}

pub fn agrees(analytic: f64, numeric: f64) -> (bool, f64) {
    let diff = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if diff <= ABS_FLOOR {
        return (true, 0.0);
    }
    let rel = diff / scale;
    (rel < REL_TOL, rel)
}

/// Compare `d f / d p` for up to `per_param` random coordinates of each
/// parameter in `ids`. `f` builds a scalar loss on a fresh tape and must be
/// deterministic in the parameter values.
pub fn check_params<F, R>(
    store: &ParamStore,
    ids: &[ParamId],
    per_param: usize,
    rng: &mut R,
    f: F,
) -> Result<Report>
where
    F: Fn(&mut Tape) -> Result<Var>,
    R: Rng + ?Sized,
{
    let grads = {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape)?;
        tape.backward(loss)?
    };
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(s);
        let loss = f(&mut tape)?;
        Ok(tape.scalar(loss))
    };
    let mut work = store.clone();
    let mut report = Report::default();
    for &id in ids {
        let n = store.value(id).len();
        let picks = sample(rng, n, per_param.min(n));
        for i in picks.iter() {
            let orig = store.value(id).data()[i];
            work.value_mut(id).data_mut()[i] = orig + STEP;
            let up = eval(&work)?;
            work.value_mut(id).data_mut()[i] = orig - STEP;
            let down = eval(&work)?;
            work.value_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let analytic = grads.get(id).map_or(0.0, |g| g[i]);
            let (ok, rel) = agrees(analytic, numeric);
            report.checked += 1;
            report.worst_rel = report.worst_rel.max(rel);
            if ok {
                report.passed += 1;
            } else {
                report
                    .failures
                    .push((store.name(id).to_string(), i, analytic, numeric));
            }
        }
    }
    Ok(report)
}
