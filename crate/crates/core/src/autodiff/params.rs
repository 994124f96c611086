use serde::{Deserialize, Serialize};

use super::{Gradients, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ordered, named collection of learnable tensors belonging to one network.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new() }
    }

    /// Appends a tensor and returns its index. Names must be unique.
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> usize {
        let name = name.into();
        assert!(self.index_of(&name).is_none(), "duplicate parameter {name}");
        self.entries.push((name, tensor.with_requires_grad(true)));
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn tensor(&self, idx: usize) -> &Tensor<T> {
        &self.entries[idx].1
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Inserts every tensor into the graph as a leaf; gradients are tracked.
    pub fn bind(&self, graph: &mut Graph<T>) -> Vec<Var> {
        self.entries.iter().map(|(_, t)| graph.leaf(t)).collect()
    }

    /// Inserts every tensor as a constant (no parameter gradients are computed).
    pub fn bind_frozen(&self, graph: &mut Graph<T>) -> Vec<Var> {
        self.entries
            .iter()
            .map(|(_, t)| graph.constant(t.shape().to_vec(), t.data().to_vec()))
            .collect()
    }

    /// Adds the gradients of a previous `bind` into each tensor's grad store.
    pub fn accumulate_grads(&mut self, grads: &Gradients<T>, binding: &[Var]) -> Result<()> {
        if binding.len() != self.entries.len() {
            return Err(Error::Usage(format!(
                "binding has {} vars for {} parameters",
                binding.len(),
                self.entries.len()
            )));
        }
        for ((_, t), &v) in self.entries.iter_mut().zip(binding) {
            match grads.get(v) {
                Some(g) => t.accumulate_grad(g)?,
                None => {
                    let zeros = vec![T::zero(); t.numel()];
                    t.accumulate_grad(&zeros)?;
                }
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.entries.iter_mut().for_each(|(_, t)| t.zero_grad());
    }

    /// Converts every tensor to another scalar type (grads are dropped).
    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        let entries = self
            .entries
            .iter()
            .map(|(n, t)| {
                let data = t.data().iter().map(|v| U::lit(v.to_f64_lossy())).collect();
                let t = Tensor::new(t.shape().to_vec(), data)
                    .expect("same shape")
                    .with_requires_grad(true);
                (n.clone(), t)
            })
            .collect();
        ParamSet { entries }
    }
}
