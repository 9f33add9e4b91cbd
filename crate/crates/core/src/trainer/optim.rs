use std::collections::BTreeMap;

use crate::autodiff::{Array, ParameterStore};

pub type Gradients = BTreeMap<String, Array>;

pub fn global_norm(grads: &Gradients) -> f64 {
    grads.values().flat_map(|a| a.data()).map(|v| v * v).sum::<f64>().sqrt()
}

/// Rescales `grads` so that their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        for a in grads.values_mut() {
            a.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    /// Descends along `grads` (gradients of a loss to minimize).
    pub fn update(&mut self, params: &mut ParameterStore, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (name, g) in grads {
            let Some(values) = params.values_mut(name) else { continue };
            let m = self.first.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            let v = self.second.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            for (i, &gi) in g.data().iter().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                values[i] -= self.learning_rate * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut store = ParameterStore::new(0);
        store.insert("w", Array::vector(vec![3.0, -2.0])).unwrap();
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let w = store.get("w").unwrap().data().to_vec();
            let mut g = Gradients::new();
            g.insert("w".into(), Array::vector(w.iter().map(|v| 2.0 * (v - 1.0)).collect()));
            opt.update(&mut store, &g);
        }
        for v in store.get("w").unwrap().data() {
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn first_adam_step_has_learning_rate_size() {
        let mut store = ParameterStore::new(0);
        store.insert("w", Array::vector(vec![0.0, 0.0])).unwrap();
        let mut g = Gradients::new();
        g.insert("w".into(), Array::vector(vec![5.0, -0.01]));
        Adam::new(0.1).update(&mut store, &g);
        let w = store.get("w").unwrap().data();
        assert!((w[0] + 0.1).abs() < 1e-6 && (w[1] - 0.1).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn clipped_norm_never_exceeds_threshold(
            a in prop::collection::vec(-1e4f64..1e4, 1..8),
            b in prop::collection::vec(-1e4f64..1e4, 1..8),
            max in 1e-3f64..100.0,
        ) {
            let mut g = Gradients::new();
            g.insert("a".into(), Array::vector(a.clone()));
            g.insert("b".into(), Array::vector(b));
            let before = global_norm(&g);
            let reported = clip_global_norm(&mut g, max);
            prop_assert_eq!(reported, before);
            let after = global_norm(&g);
            prop_assert!(after <= max + 1e-9);
            if before <= max {
                prop_assert_eq!(g["a"].data(), &a[..]);
            }
        }
    }
}
