//! Named parameter storage with paired gradients, and the Adam optimizer.

use std::collections::BTreeMap;

use thiserror::Error;

use super::matrix::Matrix;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("non-finite gradient in parameter '{name}'")]
    NonFiniteGrad { name: String },
    #[error("unknown parameter '{name}'")]
    UnknownParam { name: String },
}

/// Map name → (value, grad). Iteration order is the name order, so every
/// traversal (Adam, checkpoints, gradient checks) is deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: BTreeMap<String, (Matrix, Matrix)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter; its gradient starts at zero.
    pub fn insert(&mut self, name: &str, value: Matrix) {
        assert!(
            !self.entries.contains_key(name),
            "duplicate parameter name '{name}'"
        );
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.entries.insert(name.to_string(), (value, grad));
    }

    pub fn value(&self, name: &str) -> &Matrix {
        &self.entries.get(name).unwrap_or_else(|| panic!("unknown parameter '{name}'")).0
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Matrix {
        &mut self.entries.get_mut(name).unwrap_or_else(|| panic!("unknown parameter '{name}'")).0
    }

    pub fn grad(&self, name: &str) -> &Matrix {
        &self.entries.get(name).unwrap_or_else(|| panic!("unknown parameter '{name}'")).1
    }

    pub fn add_to_grad(&mut self, name: &str, delta: &Matrix) {
        let (_, g) = self
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter '{name}'"));
        g.add_assign(delta);
    }

    pub fn zero_grads(&mut self) {
        for (_, g) in self.entries.values_mut() {
            for v in g.data_mut() {
                *v = 0.0;
            }
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(|(v, _)| v.len()).sum()
    }
}

/// Adam moments; constants fixed at the conventional
/// β1=0.9, β2=0.999, ε=1e-8.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: BTreeMap<String, Matrix>,
    v: BTreeMap<String, Matrix>,
    step: u64,
}

pub(crate) const ADAM_BETA1: f64 = 0.9;
pub(crate) const ADAM_BETA2: f64 = 0.999;
pub(crate) const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let mut m = BTreeMap::new();
        let mut v = BTreeMap::new();
        for name in params.names() {
            let shape = params.value(name).shape();
            m.insert(name.to_string(), Matrix::zeros(shape.0, shape.1));
            v.insert(name.to_string(), Matrix::zeros(shape.0, shape.1));
        }
        AdamState { m, v, step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update; gradients are zeroed afterwards.
///
/// A non-finite gradient anywhere aborts the step before any parameter is
/// touched.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, lr: f64) -> Result<(), OptimError> {
    for name in params.names() {
        if !params.grad(name).all_finite() {
            return Err(OptimError::NonFiniteGrad { name: name.to_string() });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let g = params.grad(name).clone();
        let m = state.m.get_mut(name).ok_or_else(|| OptimError::UnknownParam { name: name.clone() })?;
        let v = state.v.get_mut(name).ok_or_else(|| OptimError::UnknownParam { name: name.clone() })?;
        for i in 0..g.len() {
            let gi = g.data()[i];
            m.data_mut()[i] = ADAM_BETA1 * m.data()[i] + (1.0 - ADAM_BETA1) * gi;
            v.data_mut()[i] = ADAM_BETA2 * v.data()[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = m.data()[i] / bc1;
            let v_hat = v.data()[i] / bc2;
            params.value_mut(name).data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    params.zero_grads();
    Ok(())
}
