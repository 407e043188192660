//! Flat f64 tensors and ordered named parameter trees.

use crate::error::{Error, Result};

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::Shape(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Named tensors in fixed insertion order.
///
/// The order is part of the contract: optimizer state, gradient
/// accumulation, checkpoints and coordinate indexing all walk entries in
/// this order, which keeps results bit-stable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamTree {
    entries: Vec<(String, Tensor)>,
}

impl ParamTree {
    pub fn new() -> Self {
        ParamTree { entries: Vec::new() }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        assert!(
            self.entries.iter().all(|(n, _)| n != name),
            "duplicate parameter name `{name}`"
        );
        self.entries.push((name.to_string(), tensor));
    }

    /// Panics if the name is missing; lookups are internal invariants.
    pub fn get(&self, name: &str) -> &Tensor {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .unwrap_or_else(|| panic!("missing parameter `{name}`"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .unwrap_or_else(|| panic!("missing parameter `{name}`"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn num_tensors(&self) -> usize {
        self.entries.len()
    }

    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamTree {
        ParamTree {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    /// Adds `other` into `self` elementwise.
    pub fn add_assign(&mut self, other: &ParamTree) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::Shape("parameter tree size mismatch".into()));
        }
        for ((n, t), (on, ot)) in self.entries.iter_mut().zip(&other.entries) {
            if n != on || t.shape() != ot.shape() {
                return Err(Error::Shape(format!("parameter tree mismatch at `{n}` vs `{on}`")));
            }
            for (a, b) in t.data_mut().iter_mut().zip(ot.data()) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.entries.iter_mut() {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    /// Global coordinate access across all tensors in entry order.
    pub fn coord(&self, index: usize) -> f64 {
        let (tensor, offset) = self.locate(index);
        self.entries[tensor].1.data()[offset]
    }

    pub fn set_coord(&mut self, index: usize, value: f64) {
        let (tensor, offset) = self.locate(index);
        self.entries[tensor].1.data_mut()[offset] = value;
    }

    pub fn coord_name(&self, index: usize) -> (&str, usize) {
        let (tensor, offset) = self.locate(index);
        (self.entries[tensor].0.as_str(), offset)
    }

    fn locate(&self, index: usize) -> (usize, usize) {
        let mut rest = index;
        for (i, (_, t)) in self.entries.iter().enumerate() {
            if rest < t.len() {
                return (i, rest);
            }
            rest -= t.len();
        }
        panic!("coordinate {index} out of range for tree with {} params", self.num_params());
    }
}
