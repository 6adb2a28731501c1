use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::TensorValue;

/// How a declared parameter is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamInit {
    /// Uniform on `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`; the
    /// tensor is read as `[fan_out, fan_in]`.
    Glorot,
    Zeros,
}

/// Named parameter tensors, in declaration order.
///
/// Graph nodes refer to parameters by name, so any number of nodes may share
/// one tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    names: Vec<String>,
    tensors: Vec<TensorValue>,
    index: HashMap<String, usize>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor. Re-inserting an existing name with the same shape
    /// overwrites it; a different shape is an error.
    pub fn insert(&mut self, name: impl Into<String>, value: TensorValue) -> Result<()> {
        let name = name.into();
        if let Some(&i) = self.index.get(&name) {
            if self.tensors[i].shape() != value.shape() {
                return Err(Error::ShapeMismatch {
                    node: name,
                    detail: format!(
                        "parameter already declared with shape {:?}, got {:?}",
                        self.tensors[i].shape(),
                        value.shape()
                    ),
                });
            }
            self.tensors[i] = value;
            return Ok(());
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(value);
        Ok(())
    }

    pub fn init<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        init: ParamInit,
        rng: &mut R,
    ) -> Result<()> {
        let mut t = TensorValue::zeros(shape);
        if init == ParamInit::Glorot {
            let (fan_out, fan_in) = match t.shape() {
                [n] => (*n, 1),
                [o, i] => (*o, *i),
                s => (s[0], s[1..].iter().product()),
            };
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in t.data_mut() {
                *v = rng.gen_range(-s..=s);
            }
        }
        self.insert(name, t)
    }

    pub fn get(&self, name: &str) -> Option<&TensorValue> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut TensorValue> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn require(&self, name: &str) -> Result<&TensorValue> {
        self.get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Total scalar count `A`.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TensorValue)> {
        self.names.iter().map(|s| s.as_str()).zip(self.tensors.iter())
    }

    pub fn tensors(&self) -> &[TensorValue] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [TensorValue] {
        &mut self.tensors
    }

    /// A zeroed gradient store with the same layout.
    pub fn zeros_like(&self) -> GradientStore {
        GradientStore {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorValue::zeros(t.shape().to_vec()))
                .collect(),
        }
    }
}

/// One gradient tensor per stored parameter, in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStore {
    names: Vec<String>,
    tensors: Vec<TensorValue>,
}

impl GradientStore {
    pub fn reset(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.fill(0.0));
    }

    pub fn get(&self, name: &str) -> Option<&TensorValue> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn at(&self, i: usize) -> &TensorValue {
        &self.tensors[i]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut TensorValue {
        &mut self.tensors[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[TensorValue] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [TensorValue] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TensorValue)> {
        self.names.iter().map(|s| s.as_str()).zip(self.tensors.iter())
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &GradientStore) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.axpy(alpha, b);
        }
    }

    /// First non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<(&str, usize)> {
        self.iter().find_map(|(name, t)| {
            t.data()
                .iter()
                .position(|v| !v.is_finite())
                .map(|i| (name, i))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
