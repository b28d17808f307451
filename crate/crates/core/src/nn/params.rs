use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to one tensor inside a [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named weights with a same-shape gradient buffer for each.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ParameterSet {
    pub fn new() -> Self {
        ParameterSet {
            names: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
        }
    }

    /// Adds a zero-initialised parameter.
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        let name = name.into();
        assert!(
            self.id(&name).is_none(),
            "duplicate parameter name `{name}`"
        );
        self.names.push(name);
        self.values.push(Tensor::zeros(shape));
        self.grads.push(Tensor::zeros(shape));
        ParamId(self.values.len() - 1)
    }

    /// Glorot-uniform weights: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn init_glorot<R: Rng + ?Sized>(
        &mut self,
        id: ParamId,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in self.values[id.0].data_mut() {
            *w = rng.random_range(-a..a);
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.id(name)
            .map(|id| self.value(id))
            .ok_or_else(|| Error::UnknownParameter(name.into()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::UnknownParameter(name.into()))?;
        Ok(self.value_mut(id))
    }

    pub fn grad_by_name(&self, name: &str) -> Result<&Tensor> {
        self.id(name)
            .map(|id| self.grad(id))
            .ok_or_else(|| Error::UnknownParameter(name.into()))
    }

    /// Splits into read-only values and writable gradients, for backward passes.
    pub(crate) fn split(&mut self) -> (&[Tensor], &mut [Tensor]) {
        (&self.values, &mut self.grads)
    }

    pub(crate) fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    /// `p <- p - lr * grad` for every parameter, then zeroes the gradients.
    pub fn sgd_step(&mut self, learning_rate: f64) {
        self.sgd_step_with(|_| learning_rate);
    }

    /// Like [`sgd_step`](Self::sgd_step) with a per-parameter learning rate.
    pub fn sgd_step_with(&mut self, mut learning_rate: impl FnMut(&str) -> f64) {
        for i in 0..self.values.len() {
            let lr = learning_rate(&self.names[i]);
            if lr != 0.0 {
                for (p, g) in self.values[i]
                    .data_mut()
                    .iter_mut()
                    .zip(self.grads[i].data())
                {
                    *p -= lr * g;
                }
            }
            self.grads[i].fill(0.0);
        }
    }

    /// Copies every value from `other`, which must have the same layout.
    pub fn copy_values_from(&mut self, other: &ParameterSet) {
        assert_eq!(self.names, other.names, "parameter layouts differ");
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            dst.data_mut().copy_from_slice(src.data());
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(p: f64, g: f64) -> ParameterSet {
        let mut ps = ParameterSet::new();
        let id = ps.add("p", &[1]);
        ps.value_mut(id).data_mut()[0] = p;
        ps.grad_mut(id).data_mut()[0] = g;
        ps
    }

    #[test]
    fn sgd_scalar_arithmetic() {
        let mut ps = scalar(1.0, 2.0);
        ps.sgd_step(0.1);
        assert!((ps.get("p").unwrap().data()[0] - 0.8).abs() < 1e-15);
        assert_eq!(ps.grad_by_name("p").unwrap().data()[0], 0.0);
    }

    #[test]
    fn sgd_zero_rate_leaves_values() {
        let mut ps = scalar(1.25, 7.0);
        ps.sgd_step(0.0);
        assert_eq!(ps.get("p").unwrap().data()[0], 1.25);
        assert_eq!(ps.grad_by_name("p").unwrap().data()[0], 0.0);
    }

    #[test]
    fn two_steps_equal_one_summed_step() {
        let mut a = scalar(3.0, 0.5);
        a.sgd_step(0.2);
        a.grad_mut(ParamId(0)).data_mut()[0] = 0.5;
        a.sgd_step(0.2);
        let mut b = scalar(3.0, 0.5);
        b.sgd_step(0.4);
        assert!((a.get("p").unwrap().data()[0] - b.get("p").unwrap().data()[0]).abs() < 1e-15);
    }

    #[test]
    fn unknown_name_is_error() {
        let ps = ParameterSet::new();
        assert!(matches!(ps.get("nope"), Err(Error::UnknownParameter(_))));
    }
}
