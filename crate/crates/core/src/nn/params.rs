use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::Real;
use crate::error::{Error, Result};

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed)
}

/// One named parameter tensor with its freeze mask and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub dims: Vec<usize>,
    pub value: Vec<T>,
    pub frozen: Vec<bool>,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Param<T> {
    pub fn new(dims: Vec<usize>, value: Vec<T>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != value.len() {
            return Err(Error::Shape(format!(
                "parameter dims {dims:?} hold {n} values, got {}",
                value.len()
            )));
        }
        Ok(Self {
            dims,
            frozen: vec![false; n],
            m: vec![T::ZERO; n],
            v: vec![T::ZERO; n],
            value,
        })
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn moments(&self) -> (&[T], &[T]) {
        (&self.m, &self.v)
    }

    fn reset_moments_at(&mut self, i: usize) {
        self.m[i] = T::ZERO;
        self.v[i] = T::ZERO;
    }
}

/// Adam hyperparameters other than the learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Gradients keyed by parameter name, aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub(crate) by_name: BTreeMap<String, Vec<T>>,
}

impl<T: Real> Grads<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Self {
            by_name: store
                .params
                .iter()
                .map(|(k, p)| (k.clone(), vec![T::ZERO; p.len()]))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.by_name.get(name).map(Vec::as_slice)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<T>> {
        self.by_name.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.by_name.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub(crate) fn accumulate(&mut self, name: &str, g: &[T]) {
        let slot = self
            .by_name
            .get_mut(name)
            .unwrap_or_else(|| panic!("gradient slot `{name}` missing"));
        for (a, &b) in slot.iter_mut().zip(g) {
            *a += b;
        }
    }

    pub fn add(&mut self, other: &Grads<T>) {
        for (name, g) in &other.by_name {
            self.accumulate(name, g);
        }
    }

    pub fn scale(&mut self, s: T) {
        for g in self.by_name.values_mut() {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.by_name.values().flatten().all(|v| v.is_finite())
    }
}

/// Named parameters with per-scalar freeze masks and Adam state.
///
/// Every mutation bumps a generation counter so that a forward trace
/// recorded against older values cannot be backpropagated.
#[derive(Debug)]
pub struct ParamStore<T> {
    params: BTreeMap<String, Param<T>>,
    adam: AdamConfig,
    step: u64,
    id: u64,
    generation: u64,
}

impl<T: Real> Clone for ParamStore<T> {
    fn clone(&self) -> Self {
        Self {
            params: self.params.clone(),
            adam: self.adam,
            step: self.step,
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: BTreeMap::new(),
            adam: AdamConfig::default(),
            step: 0,
            id: fresh_id(),
            generation: 0,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, param: Param<T>) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        self.params.insert(name, param);
        self.touch();
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub(crate) fn value(&self, name: &str) -> &[T] {
        &self.params[name].value
    }

    /// Mutable access to a parameter; counts as a mutation.
    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.touch();
        self.params.get_mut(name)
    }

    /// Parameters in lexicographic name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.values().map(Param::len).sum()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn adam_config(&self) -> AdamConfig {
        self.adam
    }

    pub fn set_adam_config(&mut self, cfg: AdamConfig) {
        self.adam = cfg;
    }

    pub(crate) fn stamp(&self) -> (u64, u64) {
        (self.id, self.generation)
    }

    fn touch(&mut self) {
        self.generation += 1;
    }

    pub fn set_frozen(&mut self, name: &str, mask: Vec<bool>) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{name}`")))?;
        if mask.len() != p.len() {
            return Err(Error::Shape(format!(
                "mask of {} for `{name}` with {} scalars",
                mask.len(),
                p.len()
            )));
        }
        p.frozen = mask;
        Ok(())
    }

    pub fn frozen_count(&self) -> usize {
        self.params.values().flat_map(|p| &p.frozen).filter(|&&f| f).count()
    }

    pub fn clear_frozen(&mut self) {
        for p in self.params.values_mut() {
            p.frozen.fill(false);
        }
    }

    /// Checks that `other` has exactly the same names and shapes.
    pub fn check_aligned<U: Real>(&self, other: &ParamStore<U>) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::Shape(format!(
                "parameter stores hold {} vs {} tensors",
                self.params.len(),
                other.params.len()
            )));
        }
        for ((a, pa), (b, pb)) in self.params.iter().zip(&other.params) {
            if a != b || pa.dims != pb.dims {
                return Err(Error::Shape(format!(
                    "parameter `{a}` {:?} does not align with `{b}` {:?}",
                    pa.dims, pb.dims
                )));
            }
        }
        Ok(())
    }

    fn check_grads(&self, grads: &Grads<T>) -> Result<()> {
        if grads.by_name.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "{} gradient tensors for {} parameters",
                grads.by_name.len(),
                self.params.len()
            )));
        }
        for ((a, p), (b, g)) in self.params.iter().zip(&grads.by_name) {
            if a != b || p.len() != g.len() {
                return Err(Error::Shape(format!(
                    "gradient `{b}` ({}) misaligned with parameter `{a}` ({})",
                    g.len(),
                    p.len()
                )));
            }
        }
        Ok(())
    }

    /// One bias-corrected Adam update of every non-frozen scalar.
    ///
    /// Frozen scalars keep their value and moments untouched; the step
    /// counter advances once per call.
    pub fn adam_step(&mut self, grads: &Grads<T>, lr: f64) -> Result<()> {
        self.check_grads(grads)?;
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.adam;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let (b1, b2) = (T::from_f64(beta1), T::from_f64(beta2));
        let (ob1, ob2) = (T::from_f64(1.0 - beta1), T::from_f64(1.0 - beta2));
        let (ic1, ic2) = (T::from_f64(1.0 / c1), T::from_f64(1.0 / c2));
        let (lr, eps) = (T::from_f64(lr), T::from_f64(eps));
        for (p, g) in self.params.values_mut().zip(grads.by_name.values()) {
            for i in 0..p.value.len() {
                if p.frozen[i] {
                    continue;
                }
                let gi = g[i];
                p.m[i] = b1 * p.m[i] + ob1 * gi;
                p.v[i] = b2 * p.v[i] + ob2 * gi * gi;
                let m_hat = p.m[i] * ic1;
                let v_hat = p.v[i] * ic2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        self.touch();
        Ok(())
    }

    /// Copies every value from `snapshot` and clears all optimizer state.
    pub fn restore_from(&mut self, snapshot: &ParamStore<T>) -> Result<()> {
        self.check_aligned(snapshot)?;
        for (p, s) in self.params.values_mut().zip(snapshot.params.values()) {
            p.value.copy_from_slice(&s.value);
            p.m.fill(T::ZERO);
            p.v.fill(T::ZERO);
        }
        self.step = 0;
        self.touch();
        Ok(())
    }

    /// Restores scalar `i` of `name` to `value` and zeroes its moments.
    pub(crate) fn reset_scalar(&mut self, name: &str, i: usize, value: T) {
        let p = self.params.get_mut(name).expect("known parameter");
        p.value[i] = value;
        p.reset_moments_at(i);
        self.generation += 1;
    }

    pub fn values_equal(&self, other: &ParamStore<T>) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((a, pa), (b, pb))| a == b && pa.value == pb.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(vals: Vec<f64>) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("w", Param::new(vec![vals.len()], vals).unwrap()).unwrap();
        s
    }

    fn grads(s: &ParamStore<f64>, g: Vec<f64>) -> Grads<f64> {
        let mut out = Grads::zeros_like(s);
        *out.get_mut("w").unwrap() = g;
        out
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store(vec![0.3, -0.2]);
        let g = grads(&s, vec![0.0, 0.0]);
        s.adam_step(&g, 1e-3).unwrap();
        assert_eq!(s.value("w"), &[0.3, -0.2]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store(vec![0.0]);
        let g = grads(&s, vec![1.0]);
        s.adam_step(&g, 5e-5).unwrap();
        let expected = -5e-5 / (1.0 + 1e-8);
        assert!((s.value("w")[0] - expected).abs() < 1e-15);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn frozen_scalar_never_moves() {
        let mut s = store(vec![0.7, 0.7]);
        s.set_frozen("w", vec![true, false]).unwrap();
        for k in 0..100 {
            let g = grads(&s, vec![1.0 + k as f64, -2.0]);
            s.adam_step(&g, 1e-2).unwrap();
        }
        let p = s.get("w").unwrap();
        assert_eq!(p.value[0].to_bits(), 0.7f64.to_bits());
        assert_eq!(p.moments().0[0], 0.0);
        assert_ne!(p.value[1], 0.7);
    }

    #[test]
    fn misaligned_gradients_are_rejected() {
        let mut s = store(vec![0.0, 1.0]);
        let mut g = Grads::zeros_like(&s);
        g.by_name.insert("w".into(), vec![0.0]);
        assert!(s.adam_step(&g, 1e-3).is_err());
        let mut g = Grads::zeros_like(&s);
        g.by_name.insert("zzz".into(), vec![0.0]);
        assert!(s.adam_step(&g, 1e-3).is_err());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut s = store(vec![1.0]);
        assert!(s.insert("w", Param::new(vec![1], vec![2.0]).unwrap()).is_err());
    }

    #[test]
    fn restore_resets_values_and_state() {
        let mut s = store(vec![0.5, 0.5]);
        let snap = s.clone();
        let g = grads(&s, vec![1.0, 1.0]);
        s.adam_step(&g, 0.1).unwrap();
        s.restore_from(&snap).unwrap();
        assert!(s.values_equal(&snap));
        assert_eq!(s.step_count(), 0);
        assert!(s.get("w").unwrap().moments().0.iter().all(|&m| m == 0.0));
    }
}
