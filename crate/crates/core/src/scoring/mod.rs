//! Normality scores. Every score is oriented so that higher means more normal.
//!
//! Off-line scores summarize a whole sequence; on-line scores are per step
//! and can be computed frame by frame with [`StreamingScorer`].

mod csv;
mod online;

pub use csv::{offline_csv, online_csv, parse_offline_csv, parse_online_csv, OfflineRecord, OnlineRecord};
pub use online::{
    online_scores, smoothing_weights, OnlineConfig, OnlineFrame, OnlineKind, StreamingScorer, DEFAULT_WINDOW,
    SMOOTHING_SIGMA, SMOOTHING_SPAN,
};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::seqmodel::{ElboBreakdown, ModelError, StornModel, SCORE_SAMPLES};

/// Proposals for the importance-sampled likelihood.
pub const DEFAULT_IS_SAMPLES: usize = 64;
/// Percentile used by the two percentile scores.
pub const DEFAULT_PERCENTILE: f64 = 95.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("frame {got} arrived out of order (expected {expected})")]
    OutOfOrder { expected: usize, got: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("non-finite {0} score")]
    NonFinite(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OfflineKind {
    Elbo,
    IsLikelihood,
    MapDev,
    StepBound,
}

impl OfflineKind {
    pub const ALL: [OfflineKind; 4] =
        [OfflineKind::Elbo, OfflineKind::IsLikelihood, OfflineKind::MapDev, OfflineKind::StepBound];

    pub fn name(self) -> &'static str {
        match self {
            OfflineKind::Elbo => "elbo",
            OfflineKind::IsLikelihood => "is_likelihood",
            OfflineKind::MapDev => "map_dev",
            OfflineKind::StepBound => "step_bound",
        }
    }
}

impl fmt::Display for OfflineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OfflineKind {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OfflineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ScoreError::InvalidArgument(format!("unknown off-line score '{s}'")))
    }
}

/// Percentile of `values` with linear interpolation between order
/// statistics; `p` is in percent.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, ScoreError> {
    if values.is_empty() {
        return Err(ScoreError::InvalidArgument("percentile of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(ScoreError::InvalidArgument(format!("percentile {p} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

fn finite(v: f64, what: &'static str) -> Result<f64, ScoreError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScoreError::NonFinite(what))
    }
}

/// Sequence bound with the scoring sample count.
pub fn elbo_breakdown(model: &StornModel, x: &[Vec<f64>], seed: u64) -> Result<ElboBreakdown, ScoreError> {
    Ok(model.elbo(x, SCORE_SAMPLES, seed)?)
}

pub fn score_elbo(model: &StornModel, x: &[Vec<f64>], seed: u64) -> Result<f64, ScoreError> {
    finite(elbo_breakdown(model, x, seed)?.total, "elbo")
}

pub fn score_is(model: &StornModel, x: &[Vec<f64>], k: usize, seed: u64) -> Result<f64, ScoreError> {
    if k == 0 {
        return Err(ScoreError::InvalidArgument("need at least one proposal".into()));
    }
    finite(model.log_likelihood_is(x, k, seed)?.estimate, "is_likelihood")
}

/// Standardized distance of each frame from its MAP one-step prediction.
pub fn map_deviations(model: &StornModel, x: &[Vec<f64>]) -> Result<Vec<f64>, ScoreError> {
    let preds = model.map_predictions(x)?;
    Ok(x.iter()
        .zip(&preds)
        .map(|(row, p)| {
            row.iter()
                .zip(p.mean.iter().zip(&p.variance))
                .map(|(v, (m, var))| (v - m).powi(2) / var)
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

pub fn score_map_dev(model: &StornModel, x: &[Vec<f64>], p: f64) -> Result<f64, ScoreError> {
    check_high_percentile(p)?;
    finite(-percentile(&map_deviations(model, x)?, p)?, "map_dev")
}

/// Negated high percentile of the step surprisal `−(recon_t − kl_t)`.
pub fn step_bound_score(breakdown: &ElboBreakdown, p: f64) -> Result<f64, ScoreError> {
    check_high_percentile(p)?;
    let surprisal: Vec<f64> = breakdown.step_bounds().iter().map(|b| -b).collect();
    finite(-percentile(&surprisal, p)?, "step_bound")
}

fn check_high_percentile(p: f64) -> Result<(), ScoreError> {
    if p > 50.0 && p < 100.0 {
        Ok(())
    } else {
        Err(ScoreError::InvalidArgument(format!("percentile {p} must lie in (50, 100)")))
    }
}

/// Settings shared by the off-line scores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OfflineConfig {
    pub is_samples: usize,
    pub percentile: f64,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig { is_samples: DEFAULT_IS_SAMPLES, percentile: DEFAULT_PERCENTILE }
    }
}

/// All four off-line scores of one normalized sequence, in [`OfflineKind::ALL`] order.
pub fn offline_scores(
    model: &StornModel,
    x: &[Vec<f64>],
    config: &OfflineConfig,
    seed: u64,
) -> Result<[f64; 4], ScoreError> {
    let breakdown = elbo_breakdown(model, x, seed)?;
    Ok([
        finite(breakdown.total, "elbo")?,
        score_is(model, x, config.is_samples, seed)?,
        score_map_dev(model, x, config.percentile)?,
        step_bound_score(&breakdown, config.percentile)?,
    ])
}
