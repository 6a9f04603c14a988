//! Named parameter storage shared by all networks.
//!
//! Parameters live in one flat, registration-ordered store. Each training
//! phase materializes the store as a vector of graph leaves, marking only the
//! parameter groups being updated as trainable; everything downstream of the
//! store (optimizers, checkpoints) addresses parameters by their stable index.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Var};
use ndarray::ArrayD;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    /// Generator plus both encoders: everything updated by the generator step.
    Generator,
    SpatialDisc,
    TemporalDisc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

pub struct ParamEntry<F: Scalar> {
    pub name: String,
    pub group: ParamGroup,
    pub data: ArrayD<F>,
}

pub struct ParamStore<F: Scalar> {
    entries: Vec<ParamEntry<F>>,
    by_name: HashMap<String, usize>,
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, group: ParamGroup, data: ArrayD<F>) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.entries.len());
        self.by_name.insert(name.to_string(), id.0);
        self.entries.push(ParamEntry {
            name: name.to_string(),
            group,
            data,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<F> {
        &self.entries[id.0]
    }

    pub fn data(&self, id: ParamId) -> &ArrayD<F> {
        &self.entries[id.0].data
    }

    pub fn set_data(&mut self, id: ParamId, data: ArrayD<F>) {
        assert_eq!(self.entries[id.0].data.shape(), data.shape());
        self.entries[id.0].data = data;
    }

    pub fn data_mut(&mut self, id: ParamId) -> &mut ArrayD<F> {
        &mut self.entries[id.0].data
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry<F>)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (ParamId(i), e))
    }

    pub fn lookup(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::Corruption(format!("unknown parameter `{name}`")))
    }

    pub fn ids_in_group(&self, group: ParamGroup) -> Vec<ParamId> {
        self.iter()
            .filter(|(_, e)| e.group == group)
            .map(|(id, _)| id)
            .collect()
    }

    /// Graph leaves for one forward/backward pass. `trainable` selects which
    /// groups collect gradients.
    pub fn leaves(&self, trainable: impl Fn(ParamGroup) -> bool) -> Leaves<F> {
        Leaves {
            vars: self
                .entries
                .iter()
                .map(|e| Var::leaf(e.data.clone(), trainable(e.group)))
                .collect(),
        }
    }

    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }
}

/// Per-pass leaf views of the parameter store.
pub struct Leaves<F: Scalar> {
    vars: Vec<Var<F>>,
}

impl<F: Scalar> Leaves<F> {
    pub fn var(&self, id: ParamId) -> &Var<F> {
        &self.vars[id.0]
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Gradients accumulated on the leaves, aligned with store order.
    pub fn take_grads(&self) -> Vec<Option<ArrayD<F>>> {
        self.vars.iter().map(|v| v.take_grad()).collect()
    }
}
