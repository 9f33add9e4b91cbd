//! Diagonal Gaussian densities, divergences and their graph counterparts.

use crate::autodiff::{Graph, GraphError, NodeId};

use super::ModelError;

/// Log-variances produced by any output head lie strictly inside `(-B, B)`.
pub const LOGVAR_BOUND: f64 = 10.0;

pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Per-step diagonal Gaussian parameters, `T × dim` for both fields.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<Vec<f64>>,
    pub log_variance: Vec<Vec<f64>>,
}

impl GaussianParams {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    pub fn variance(&self, t: usize) -> Vec<f64> {
        self.log_variance[t].iter().map(|v| v.exp()).collect()
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<(), ModelError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite { step: None, what })
    }
}

/// `Σ_d ln N(x_d; μ_d, exp(log_var_d))`.
pub fn gaussian_logpdf(x: &[f64], mean: &[f64], log_var: &[f64]) -> Result<f64, ModelError> {
    if x.len() != mean.len() || x.len() != log_var.len() {
        return Err(ModelError::DimMismatch { expected: x.len(), got: mean.len().max(log_var.len()) });
    }
    check_finite(x, "x")?;
    check_finite(mean, "mean")?;
    check_finite(log_var, "log-variance")?;
    Ok(x
        .iter()
        .zip(mean)
        .zip(log_var)
        .map(|((&x, &m), &lv)| -HALF_LN_2PI - 0.5 * lv - (x - m) * (x - m) / (2.0 * lv.exp()))
        .sum())
}

/// `KL(q ‖ p)` for diagonal Gaussians, summed over dimensions.
pub fn gaussian_kl(
    q_mean: &[f64],
    q_log_var: &[f64],
    p_mean: &[f64],
    p_log_var: &[f64],
) -> Result<f64, ModelError> {
    let n = q_mean.len();
    if q_log_var.len() != n || p_mean.len() != n || p_log_var.len() != n {
        return Err(ModelError::DimMismatch { expected: n, got: p_mean.len() });
    }
    for (v, what) in [(q_mean, "q mean"), (q_log_var, "q log-variance"), (p_mean, "p mean"), (p_log_var, "p log-variance")] {
        check_finite(v, what)?;
    }
    Ok((0..n)
        .map(|d| {
            let diff = q_mean[d] - p_mean[d];
            0.5 * (p_log_var[d] - q_log_var[d] + (q_log_var[d].exp() + diff * diff) / p_log_var[d].exp() - 1.0)
        })
        .sum())
}

/// `z = μ + exp(½ log_var) ⊙ ε` per step.
pub fn sample_latent(q: &GaussianParams, noise: &[Vec<f64>]) -> Vec<Vec<f64>> {
    q.mean
        .iter()
        .zip(&q.log_variance)
        .zip(noise)
        .map(|((m, lv), e)| m.iter().zip(lv).zip(e).map(|((m, lv), e)| m + (0.5 * lv).exp() * e).collect())
        .collect()
}

/// Maps an unconstrained head output into `(-B, B)` via `B·tanh(raw / B)`.
pub fn bound_logvar(g: &mut Graph, raw: NodeId) -> Result<NodeId, GraphError> {
    let scaled = g.scale(raw, 1.0 / LOGVAR_BOUND)?;
    let squashed = g.tanh(scaled);
    g.scale(squashed, LOGVAR_BOUND)
}

/// Elementwise Gaussian log-density; all three inputs share one shape.
pub fn logpdf_elements(g: &mut Graph, x: NodeId, mean: NodeId, log_var: NodeId) -> Result<NodeId, GraphError> {
    let d = g.sub(x, mean)?;
    let sq = g.square(d);
    let neg = g.scale(log_var, -1.0)?;
    let prec = g.exp(neg);
    let maha = g.mul(sq, prec)?;
    let t = g.add(log_var, maha)?;
    let half = g.scale(t, -0.5)?;
    g.offset(half, -HALF_LN_2PI)
}

/// Elementwise `KL(q ‖ p)` terms of diagonal Gaussians.
pub fn kl_elements(
    g: &mut Graph,
    q_mean: NodeId,
    q_log_var: NodeId,
    p_mean: NodeId,
    p_log_var: NodeId,
) -> Result<NodeId, GraphError> {
    let q_var = g.exp(q_log_var);
    let d = g.sub(q_mean, p_mean)?;
    let d2 = g.square(d);
    let num = g.add(q_var, d2)?;
    let neg = g.scale(p_log_var, -1.0)?;
    let p_prec = g.exp(neg);
    let ratio = g.mul(num, p_prec)?;
    let lv_diff = g.sub(p_log_var, q_log_var)?;
    let s = g.add(lv_diff, ratio)?;
    let s = g.offset(s, -1.0)?;
    g.scale(s, 0.5)
}

/// Differentiable reparameterized draw `μ + exp(½ log_var) ⊙ ε`.
pub fn reparameterize(g: &mut Graph, mean: NodeId, log_var: NodeId, eps: NodeId) -> Result<NodeId, GraphError> {
    let half = g.scale(log_var, 0.5)?;
    let std = g.exp(half);
    let noise = g.mul(std, eps)?;
    g.add(mean, noise)
}

/// `ln((1/n) Σ exp(v))`, shifted by the maximum before exponentiating.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + s.ln() - (values.len() as f64).ln()
}
