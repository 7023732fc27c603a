use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named, ordered parameter tensors of one network. This is the unit clients
/// upload and the server averages.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new(entries: Vec<(String, Tensor)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (name, _) in &entries {
            if !seen.insert(name.as_str()) {
                return Err(Error::Usage(format!("duplicate parameter name `{name}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn tensor(&self, index: usize) -> &Tensor {
        &self.entries[index].1
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].1
    }

    /// Two distinct entries borrowed mutably at once; `a < b`.
    pub(crate) fn pair_mut(&mut self, a: usize, b: usize) -> (&mut Tensor, &mut Tensor) {
        assert!(a < b, "pair_mut expects ascending indices");
        let (left, right) = self.entries.split_at_mut(b);
        (&mut left[a].1, &mut right[0].1)
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.zeros_like()))
                .collect(),
        }
    }

    /// Same names, order and shapes.
    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, x), (b, y))| a == b && x.shape() == y.shape())
    }

    /// Describes the first layout difference, if any.
    pub fn layout_mismatch(&self, other: &ParamSet) -> Option<String> {
        if self.entries.len() != other.entries.len() {
            return Some(format!(
                "{} tensors, expected {}",
                other.entries.len(),
                self.entries.len()
            ));
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .find(|((a, x), (b, y))| a != b || x.shape() != y.shape())
            .map(|((a, x), (b, y))| format!("`{b}` {:?}, expected `{a}` {:?}", y.shape(), x.shape()))
    }

    pub fn scale(&mut self, factor: f32) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Largest absolute elementwise difference; `None` on layout mismatch.
    pub fn max_abs_diff(&self, other: &ParamSet) -> Option<f32> {
        self.same_layout(other).then(|| {
            self.tensors()
                .zip(other.tensors())
                .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f32::max)
        })
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0` and NaN payloads.
    pub fn bitwise_eq(&self, other: &ParamSet) -> bool {
        self.same_layout(other)
            && self.tensors().zip(other.tensors()).all(|(a, b)| {
                a.data()
                    .iter()
                    .zip(b.data())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
