use std::collections::HashSet;

use crate::error::{Error, Result};

use super::Matrix;

/// A named learnable value with gradient storage of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSlot {
    name: String,
    value: Matrix,
    grad: Matrix,
}

impl ParamSlot {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, Matrix::scalar(value))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Matrix {
        &self.value
    }

    /// Mutable access to the value. Only entries may change, never the shape.
    pub fn value_mut(&mut self) -> &mut [f64] {
        self.value.data_mut()
    }

    pub fn set_value(&mut self, value: Matrix) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(Error::dim("ParamSlot::set_value", self.value.shape(), value.shape()));
        }
        self.value = value;
        Ok(())
    }

    pub fn grad(&self) -> &Matrix {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        self.grad.data_mut()
    }

    pub fn accumulate_grad(&mut self, g: &Matrix) -> Result<()> {
        self.grad.add_assign(g)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that exposes an ordered set of uniquely named parameter slots.
pub trait ParamCollection {
    fn slots(&self) -> Vec<&ParamSlot>;
    fn slots_mut(&mut self) -> Vec<&mut ParamSlot>;

    fn zero_grads(&mut self) {
        for slot in self.slots_mut() {
            slot.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.slots().iter().map(|s| s.value().len()).sum()
    }

    /// Fails if two slots share a name.
    fn check_unique_names(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for slot in self.slots() {
            if !seen.insert(slot.name().to_string()) {
                return Err(Error::InvalidParam(format!(
                    "duplicate slot name `{}`",
                    slot.name()
                )));
            }
        }
        Ok(())
    }

    fn slot(&self, name: &str) -> Option<&ParamSlot> {
        self.slots().into_iter().find(|s| s.name() == name)
    }
}

impl ParamCollection for Vec<ParamSlot> {
    fn slots(&self) -> Vec<&ParamSlot> {
        self.iter().collect()
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot> {
        self.iter_mut().collect()
    }
}
