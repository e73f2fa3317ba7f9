use std::collections::HashMap;

use crate::{Result, Tensor, TensorError};

/// Which policy owns a parameter. The optimizer applies a separate
/// learning-rate multiplier per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Composer,
    Solver,
}

impl Group {
    pub fn tag(self) -> u8 {
        match self {
            Group::Composer => 0,
            Group::Solver => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Group::Composer),
            1 => Some(Group::Solver),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Param {
    pub name: String,
    pub group: Group,
    pub value: Tensor,
}

/// Named learnable arrays, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, group: Group, value: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(TensorError::Contract(format!(
                "parameter `{name}` registered twice"
            )));
        }
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            group,
            value,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn group(&self, id: ParamId) -> Group {
        self.params[id.0].group
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    /// Replace the value of a parameter, keeping its shape.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let cur = &self.params[id.0].value;
        if cur.shape() != value.shape() {
            return Err(TensorError::shape("set", &[cur.shape(), value.shape()]));
        }
        self.params[id.0].value = value;
        Ok(())
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Per-parameter gradient buffers produced by one or more tapes.
///
/// A `None` entry means the parameter was not reached by any loss.
#[derive(Debug, Clone)]
pub struct Gradients {
    bufs: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn new(store: &ParamStore) -> Self {
        Gradients {
            bufs: vec![None; store.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.bufs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bufs.iter().all(Option::is_none)
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.bufs.get(id.0).and_then(|b| b.as_deref())
    }

    pub(crate) fn slot(&mut self, id: ParamId, n: usize) -> &mut Vec<f64> {
        self.bufs[id.0].get_or_insert_with(|| vec![0.0; n])
    }

    pub(crate) fn take(&mut self, id: ParamId) -> Option<Vec<f64>> {
        self.bufs[id.0].take()
    }

    /// Sum another buffer into this one.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if other.bufs.len() != self.bufs.len() {
            return Err(TensorError::Contract(
                "gradient buffers built for different stores".into(),
            ));
        }
        for (mine, theirs) in self.bufs.iter_mut().zip(&other.bufs) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => m.iter_mut().zip(t).for_each(|(a, b)| *a += b),
                    None => *mine = Some(t.clone()),
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for b in self.bufs.iter_mut().flatten() {
            b.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn zero(&mut self) {
        self.bufs.iter_mut().for_each(|b| *b = None);
    }

    pub fn max_abs(&self) -> f64 {
        self.bufs
            .iter()
            .flatten()
            .flat_map(|b| b.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}
