use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use super::ScoreError;
use crate::autodiff::Array;
use crate::seqmodel::{FilterState, NoiseStream, StornModel, SCORE_SAMPLES};

/// Frames in the truncated window of the gradient score.
pub const DEFAULT_WINDOW: usize = 16;
/// Width of the causal smoothing kernel, in steps.
pub const SMOOTHING_SIGMA: f64 = 3.0;
/// Steps looked back by the smoothing kernel (four widths).
pub const SMOOTHING_SPAN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OnlineKind {
    Bound,
    BoundSmoothed,
    BoundDiff,
    GradMagnitude,
}

impl OnlineKind {
    pub const ALL: [OnlineKind; 4] =
        [OnlineKind::Bound, OnlineKind::BoundSmoothed, OnlineKind::BoundDiff, OnlineKind::GradMagnitude];

    pub fn name(self) -> &'static str {
        match self {
            OnlineKind::Bound => "bound",
            OnlineKind::BoundSmoothed => "bound_smoothed",
            OnlineKind::BoundDiff => "bound_diff",
            OnlineKind::GradMagnitude => "grad_magnitude",
        }
    }
}

impl fmt::Display for OnlineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OnlineKind {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OnlineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ScoreError::InvalidArgument(format!("unknown on-line score '{s}'")))
    }
}

/// The four on-line scores at one step. `t` counts from zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlineFrame {
    pub t: usize,
    pub bound: f64,
    pub smoothed: f64,
    pub diff: f64,
    pub grad: f64,
}

impl OnlineFrame {
    pub fn get(&self, kind: OnlineKind) -> f64 {
        match kind {
            OnlineKind::Bound => self.bound,
            OnlineKind::BoundSmoothed => self.smoothed,
            OnlineKind::BoundDiff => self.diff,
            OnlineKind::GradMagnitude => self.grad,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OnlineConfig {
    pub samples: usize,
    pub window: usize,
    pub seed: u64,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig { samples: SCORE_SAMPLES, window: DEFAULT_WINDOW, seed: 0 }
    }
}

impl OnlineConfig {
    fn validate(&self) -> Result<(), ScoreError> {
        if self.samples == 0 || self.window == 0 {
            return Err(ScoreError::InvalidArgument("samples and window must be positive".into()));
        }
        Ok(())
    }
}

/// Unnormalized kernel weights for lags `0..=SMOOTHING_SPAN`.
pub fn smoothing_weights() -> [f64; SMOOTHING_SPAN + 1] {
    std::array::from_fn(|k| (-((k * k) as f64) / (2.0 * SMOOTHING_SIGMA * SMOOTHING_SIGMA)).exp())
}

/// Smoothed bound at the last entry of `recent` (at most `SMOOTHING_SPAN + 1`
/// values, oldest first), with the kernel renormalized over what exists.
fn smooth(recent: &[f64], weights: &[f64; SMOOTHING_SPAN + 1]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, b) in recent.iter().rev().enumerate() {
        num += weights[k] * b;
        den += weights[k];
    }
    num / den
}

fn diff(prev: Option<f64>, b: f64) -> f64 {
    prev.map_or(0.0, |p| -(b - p).abs())
}

fn grad_score(g: &[f64]) -> f64 {
    -g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Frame-by-frame scorer over a frozen model. Frames must be normalized.
pub struct StreamingScorer<'m> {
    model: &'m StornModel,
    config: OnlineConfig,
    noise: NoiseStream,
    weights: [f64; SMOOTHING_SPAN + 1],
    next_t: usize,
    /// States after the most recent `window` frames, oldest first.
    states: VecDeque<FilterState>,
    frames: VecDeque<Vec<f64>>,
    eps: VecDeque<Array>,
    bounds: VecDeque<f64>,
}

impl<'m> StreamingScorer<'m> {
    pub fn new(model: &'m StornModel, config: OnlineConfig) -> Result<Self, ScoreError> {
        config.validate()?;
        Ok(StreamingScorer {
            model,
            config,
            noise: NoiseStream::new(config.seed),
            weights: smoothing_weights(),
            next_t: 0,
            states: VecDeque::new(),
            frames: VecDeque::new(),
            eps: VecDeque::new(),
            bounds: VecDeque::new(),
        })
    }

    /// Index the next frame must carry.
    pub fn next_t(&self) -> usize {
        self.next_t
    }

    pub fn push(&mut self, t: usize, x_t: &[f64]) -> Result<OnlineFrame, ScoreError> {
        if t != self.next_t {
            return Err(ScoreError::OutOfOrder { expected: self.next_t, got: t });
        }
        let w = self.config.window;
        let eps = self.noise.next(self.model.dims().z_dim, self.config.samples);
        let (terms, state) = self.model.filter_step(self.states.back(), x_t, &eps)?;
        let bound = terms.bound();

        // window start is the state just before its first frame
        let start = if t >= w { self.states.front().cloned() } else { None };
        self.frames.push_back(x_t.to_vec());
        self.eps.push_back(eps);
        if self.frames.len() > w {
            self.frames.pop_front();
            self.eps.pop_front();
        }
        let xs: Vec<Vec<f64>> = self.frames.iter().cloned().collect();
        let noise: Vec<Array> = self.eps.iter().cloned().collect();
        let (_, g) = self.model.window_gradient(start.as_ref(), &xs, &noise)?;

        self.states.push_back(state);
        if self.states.len() > w {
            self.states.pop_front();
        }
        let prev = self.bounds.back().copied();
        self.bounds.push_back(bound);
        if self.bounds.len() > SMOOTHING_SPAN + 1 {
            self.bounds.pop_front();
        }
        self.next_t += 1;
        Ok(OnlineFrame {
            t,
            bound,
            smoothed: smooth(self.bounds.make_contiguous(), &self.weights),
            diff: diff(prev, bound),
            grad: grad_score(&g),
        })
    }
}

/// Whole-sequence counterpart of [`StreamingScorer`]; yields the same frames.
pub fn online_scores(model: &StornModel, x: &[Vec<f64>], config: &OnlineConfig) -> Result<Vec<OnlineFrame>, ScoreError> {
    config.validate()?;
    let run = model.run_filter(x, config.samples, config.seed)?;
    let bounds = run.breakdown.step_bounds();
    let weights = smoothing_weights();
    let w = config.window;
    let mut out = Vec::with_capacity(x.len());
    for t in 0..x.len() {
        let first = (t + 1).saturating_sub(w);
        let start = if t >= w { Some(&run.states[t - w]) } else { None };
        let (_, g) = model.window_gradient(start, &x[first..=t], &run.noise[first..=t])?;
        let recent = &bounds[t.saturating_sub(SMOOTHING_SPAN)..=t];
        out.push(OnlineFrame {
            t,
            bound: bounds[t],
            smoothed: smooth(recent, &weights),
            diff: diff(t.checked_sub(1).map(|p| bounds[p]), bounds[t]),
            grad: grad_score(&g),
        });
    }
    Ok(out)
}
