use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Half-width of the uniform initialisation interval.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameters together with their gradient buffers and Adagrad accumulators.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    index: HashMap<String, ParamId>,
    values: Vec<Matrix>,
    grads: Vec<Matrix>,
    accum: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Matrix) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Domain(format!("duplicate parameter name {name}")));
        }
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.grads.push(Matrix::zeros(value.rows(), value.cols()));
        self.accum.push(Matrix::zeros(value.rows(), value.cols()));
        self.values.push(value);
        Ok(id)
    }

    /// Adds a parameter initialised uniformly in `[-INIT_SCALE, INIT_SCALE]`.
    ///
    /// Each parameter draws from its own generator keyed on `(seed, name)`, so a
    /// parameter shared between model variants starts from identical values.
    pub fn add_uniform(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        seed: u64,
    ) -> Result<ParamId> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(name.as_bytes()));
        self.add(name, Matrix::uniform(rows, cols, INIT_SCALE, &mut rng))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<ParamId> {
        self.id(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn accumulator(&self, id: ParamId) -> &Matrix {
        &self.accum[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Total number of scalar entries.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// `grad += scale * g` for every parameter that received a gradient.
    pub fn accumulate(&mut self, grads: &ParamGrads, scale: f64) {
        for (id, g) in grads.iter() {
            let target = self.grads[id.0].data_mut();
            for (t, v) in target.iter_mut().zip(g.data()) {
                *t += scale * v;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Applies one Adagrad update using the stored gradients and accumulators.
    pub fn adagrad_step(&mut self, lr: f64) {
        for i in 0..self.values.len() {
            adagrad_update(
                self.values[i].data_mut(),
                self.grads[i].data(),
                self.accum[i].data_mut(),
                lr,
            );
        }
    }

    /// Replaces values from another store with the same names and shapes.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        for (i, name) in self.names.iter().enumerate() {
            let src = other.require(name)?;
            let v = other.value(src);
            if v.shape() != self.values[i].shape() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for {name}: {:?} vs {:?}",
                    v.shape(),
                    self.values[i].shape()
                )));
            }
            self.values[i] = v.clone();
        }
        Ok(())
    }
}

/// Adagrad stabiliser added to the accumulator square root.
pub const ADAGRAD_EPS: f64 = 1e-10;

/// `acc += g^2; theta -= lr * g / (sqrt(acc) + eps)`
pub fn adagrad_update(theta: &mut [f64], grad: &[f64], acc: &mut [f64], lr: f64) {
    for ((t, &g), a) in theta.iter_mut().zip(grad).zip(acc.iter_mut()) {
        *a += g * g;
        *t -= lr * g / (a.sqrt() + ADAGRAD_EPS);
    }
}

/// Sparse map of parameter gradients produced by one backward pass.
#[derive(Clone, Debug, Default)]
pub struct ParamGrads {
    entries: Vec<Option<Matrix>>,
}

impl ParamGrads {
    pub(crate) fn new(len: usize) -> Self {
        ParamGrads {
            entries: vec![None; len],
        }
    }

    pub(crate) fn add(&mut self, id: ParamId, g: &Matrix) {
        if id.0 >= self.entries.len() {
            self.entries.resize(id.0 + 1, None);
        }
        match &mut self.entries[id.0] {
            Some(existing) => existing.add_assign(g),
            slot => *slot = Some(g.clone()),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.entries.get(id.0).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }

    /// Adds `other` into `self` (fixed order, so reductions are reproducible).
    pub fn merge(&mut self, other: &ParamGrads) {
        for (id, g) in other.iter() {
            self.add(id, g);
        }
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("w", Matrix::zeros(1, 1)).unwrap();
        assert!(s.add("w", Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn init_is_seeded_per_name() {
        let mut a = ParamStore::new();
        let mut b = ParamStore::new();
        a.add_uniform("x", 3, 3, 7).unwrap();
        let wa = a.add_uniform("w", 4, 2, 7).unwrap();
        let wb = b.add_uniform("w", 4, 2, 7).unwrap();
        assert_eq!(a.value(wa), b.value(wb));
        assert!(a.value(wa).data().iter().all(|v| v.abs() <= INIT_SCALE));
    }

    #[test]
    fn adagrad_zero_gradient_is_noop() {
        let mut theta = [0.3, -0.2];
        let mut acc = [0.0, 0.0];
        adagrad_update(&mut theta, &[0.0, 0.0], &mut acc, 0.15);
        assert_eq!(theta, [0.3, -0.2]);
    }

    #[test]
    fn adagrad_single_step_by_hand() {
        let mut theta = [1.0];
        let mut acc = [0.0];
        adagrad_update(&mut theta, &[2.0], &mut acc, 0.1);
        assert_eq!(acc, [4.0]);
        assert!((theta[0] - (1.0 - 0.1 * 2.0 / (2.0 + 1e-10))).abs() < 1e-15);
        assert!((theta[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn adagrad_second_identical_step_is_smaller() {
        let mut theta = [0.0];
        let mut acc = [0.0];
        adagrad_update(&mut theta, &[0.5], &mut acc, 0.1);
        let first = -theta[0];
        let before = theta[0];
        adagrad_update(&mut theta, &[0.5], &mut acc, 0.1);
        let second = before - theta[0];
        assert!(second < first);
    }
}
