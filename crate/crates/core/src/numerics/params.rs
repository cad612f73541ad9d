use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Optimizer group a parameter belongs to; each group has its own learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamGroup {
    Encoder,
    Decoder,
}

/// Index of a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Ordered, named collection of trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    groups: Vec<ParamGroup>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

/// Parameters of a [`ParamSet`] as recorded on one tape.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, group: ParamGroup, tensor: Tensor) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        let id = self.tensors.len();
        self.index.insert(name.to_string(), id);
        self.names.push(name.to_string());
        self.groups.push(group);
        self.tensors.push(tensor.with_grad());
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn group(&self, id: ParamId) -> ParamGroup {
        self.groups[id.0]
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ParamGroup, &Tensor)> {
        self.names
            .iter()
            .zip(&self.groups)
            .zip(&self.tensors)
            .map(|((n, g), t)| (n.as_str(), *g, t))
    }

    /// Total number of scalar coordinates.
    pub fn coordinate_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn bind(&self, tape: &Tape) -> Bound {
        Bound {
            vars: self.tensors.iter().map(|t| tape.leaf(t)).collect(),
        }
    }

    /// Copies gradients for bound parameters into each tensor's `grad`.
    /// Parameters the loss does not depend on receive zeros.
    pub fn store_grads(&mut self, bound: &Bound, grads: &Gradients) -> Result<()> {
        if bound.vars.len() != self.tensors.len() {
            return Err(Error::invalid("binding belongs to a different parameter set"));
        }
        for (t, &v) in self.tensors.iter_mut().zip(&bound.vars) {
            let g = grads.get(v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec);
            t.set_grad(g)?;
        }
        Ok(())
    }

    /// Adds `grads` into the tensors' existing gradients (starting from zero).
    pub fn accumulate_grads(&mut self, bound: &Bound, grads: &Gradients) -> Result<()> {
        for (t, &v) in self.tensors.iter_mut().zip(&bound.vars) {
            let mut acc = t.grad().map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec);
            if let Some(g) = grads.get(v) {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
            t.set_grad(acc)?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
    }

    /// Replaces every tensor's values with those of `other`, which must have
    /// the same names and shapes.
    pub fn copy_values_from(&mut self, other: &ParamSet) -> Result<()> {
        for (name, _, src) in other.iter() {
            let dst = self
                .get_mut(name)
                .ok_or_else(|| Error::ConfigMismatch(format!("unexpected parameter `{name}`")))?;
            if dst.shape() != src.shape() {
                return Err(Error::ConfigMismatch(format!(
                    "parameter `{name}`: expected shape {:?}, found {:?}",
                    dst.shape(),
                    src.shape()
                )));
            }
            dst.values_mut().copy_from_slice(src.values());
        }
        if other.len() != self.len() {
            let missing: Vec<&str> = self
                .names
                .iter()
                .filter(|n| other.get(n).is_none())
                .map(String::as_str)
                .collect();
            return Err(Error::ConfigMismatch(format!("missing parameters {missing:?}")));
        }
        Ok(())
    }
}
