use crate::autodiff::{Array, Graph, NodeId};

use super::gaussian::{log_mean_exp, reparameterize, GaussianParams};
use super::model::{Component, FilterState, NoiseStream, StepNodes, StepOptions, StornModel};
use super::ModelError;

/// Per-step decomposition of the lower bound for one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ElboBreakdown {
    /// `E_q[ln p(x_t | h^g_t)]`, averaged over sample paths.
    pub recon: Vec<f64>,
    /// `KL(q_t ‖ prior_t)`, averaged over sample paths.
    pub kl: Vec<f64>,
    /// `Σ recon − Σ kl`.
    pub total: f64,
    pub num_samples: usize,
}

impl ElboBreakdown {
    pub(crate) fn from_terms(recon: Vec<f64>, kl: Vec<f64>, num_samples: usize) -> Self {
        let total = recon.iter().sum::<f64>() - kl.iter().sum::<f64>();
        ElboBreakdown { recon, kl, total, num_samples }
    }

    pub fn len(&self) -> usize {
        self.recon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recon.is_empty()
    }

    /// `recon_t − kl_t` per step.
    pub fn step_bounds(&self) -> Vec<f64> {
        self.recon.iter().zip(&self.kl).map(|(r, k)| r - k).collect()
    }
}

/// Importance-sampled estimate of `ln p(x_{1:T})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceEstimate {
    pub estimate: f64,
    /// `ln p(x|z^k) + ln p(z^k) − ln q(z^k|x)` per sample.
    pub log_weights: Vec<f64>,
    /// Delta-method standard error of `estimate`; zero for a single sample.
    pub std_error: f64,
}

/// Moment-matched predictive Gaussian for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveGaussian {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Average of the per-sample variances (the within-component part).
    pub mean_component_variance: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictMode {
    /// Zero noise everywhere: `z` follows the means of `q` and the prior.
    Map,
    Sampled { num_samples: usize, seed: u64 },
}

/// Whole-sequence graph with the bound as root.
pub struct SequenceGraph {
    pub graph: Graph,
    /// One `[D]` leaf per step.
    pub x_leaves: Vec<NodeId>,
    /// Scalar `Σ_t (recon_t − kl_t)`.
    pub total: NodeId,
    pub(crate) steps: Vec<StepNodes>,
    pub(crate) noise: Vec<Array>,
    pub num_samples: usize,
}

impl SequenceGraph {
    /// Reads the per-step terms after a forward pass.
    pub fn breakdown(&self) -> Result<ElboBreakdown, ModelError> {
        let mut recon = Vec::with_capacity(self.steps.len());
        let mut kl = Vec::with_capacity(self.steps.len());
        for (t, s) in self.steps.iter().enumerate() {
            let r = scalar(&self.graph, s.recon.expect("likelihood terms built"))?;
            let k = scalar(&self.graph, s.kl.expect("likelihood terms built"))?;
            if !r.is_finite() {
                return Err(ModelError::NonFinite { step: Some(t), what: "reconstruction term" });
            }
            if !k.is_finite() {
                return Err(ModelError::NonFinite { step: Some(t), what: "KL term" });
            }
            recon.push(r);
            kl.push(k);
        }
        Ok(ElboBreakdown::from_terms(recon, kl, self.num_samples))
    }

    /// Recurrent state after each step.
    pub fn states(&self, model: &StornModel) -> Vec<FilterState> {
        self.steps.iter().map(|s| model.read_state(&self.graph, &s.state)).collect()
    }

    pub fn noise(&self) -> &[Array] {
        &self.noise
    }
}

fn scalar(g: &Graph, id: NodeId) -> Result<f64, ModelError> {
    Ok(g.value(id).ok_or(ModelError::Graph(crate::autodiff::GraphError::NotEvaluated(id.index())))?.item())
}

/// Per-step outputs of [`StornModel::filter_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepTerms {
    pub recon: f64,
    pub kl: f64,
}

impl StepTerms {
    pub fn bound(&self) -> f64 {
        self.recon - self.kl
    }
}

/// Result of [`StornModel::run_filter`].
pub struct FilterRun {
    pub breakdown: ElboBreakdown,
    /// State after each step.
    pub states: Vec<FilterState>,
    /// Noise block consumed at each step.
    pub noise: Vec<Array>,
}

fn col(a: &Array) -> Vec<f64> {
    a.column(0)
}

impl StornModel {
    /// Builds the lower-bound graph of `x` over `num_samples` parallel paths.
    pub fn build_sequence_graph(
        &self,
        x: &[Vec<f64>],
        num_samples: usize,
        noise: &mut NoiseStream,
    ) -> Result<SequenceGraph, ModelError> {
        self.sequence_graph(x, num_samples, noise, StepOptions { likelihood: true, importance: false })
    }

    fn sequence_graph(
        &self,
        x: &[Vec<f64>],
        num_samples: usize,
        noise: &mut NoiseStream,
        opts: StepOptions,
    ) -> Result<SequenceGraph, ModelError> {
        self.validate(x)?;
        if num_samples == 0 {
            return Err(ModelError::InvalidArgument("num_samples must be at least 1".into()));
        }
        let mut g = Graph::new();
        let mut state = self.initial_state_nodes(&mut g, num_samples)?;
        let mut steps = Vec::with_capacity(x.len());
        let mut x_leaves = Vec::with_capacity(x.len());
        let mut eps_all = Vec::with_capacity(x.len());
        let mut total: Option<NodeId> = None;
        for (t, row) in x.iter().enumerate() {
            let xl = g.leaf(format!("x[{t}]"), Array::vector(row.clone()));
            let eps_v = noise.next(self.dims().z_dim, num_samples);
            let eps = g.constant(eps_v.clone());
            let step = self.build_step(&mut g, &state, xl, eps, opts)?;
            if let Some(b) = step.bound {
                total = Some(match total {
                    None => b,
                    Some(acc) => g.add(acc, b)?,
                });
            }
            state = step.state;
            steps.push(step);
            x_leaves.push(xl);
            eps_all.push(eps_v);
        }
        let total = match total {
            Some(t) => t,
            None => g.constant(Array::scalar(0.0)),
        };
        Ok(SequenceGraph { graph: g, x_leaves, total, steps, noise: eps_all, num_samples })
    }

    /// Lower bound of `x` with `num_samples` reparameterized paths.
    pub fn elbo(&self, x: &[Vec<f64>], num_samples: usize, seed: u64) -> Result<ElboBreakdown, ModelError> {
        let mut sg = self.build_sequence_graph(x, num_samples, &mut NoiseStream::new(seed))?;
        sg.graph.forward(sg.total)?;
        sg.breakdown()
    }

    /// Lower bound together with the recurrent state after every step.
    pub fn run_filter(&self, x: &[Vec<f64>], num_samples: usize, seed: u64) -> Result<FilterRun, ModelError> {
        let mut sg = self.build_sequence_graph(x, num_samples, &mut NoiseStream::new(seed))?;
        sg.graph.forward(sg.total)?;
        let breakdown = sg.breakdown()?;
        let states = sg.states(self);
        Ok(FilterRun { breakdown, states, noise: sg.noise })
    }

    /// One incremental step from `state` (`None` = learned initial state).
    /// `eps` is `[Z, S]`.
    pub fn filter_step(
        &self,
        state: Option<&FilterState>,
        x_t: &[f64],
        eps: &Array,
    ) -> Result<(StepTerms, FilterState), ModelError> {
        self.validate(std::slice::from_ref(&x_t.to_vec()))?;
        let samples = eps.shape()[1];
        if let Some(s) = state {
            if s.samples() != samples {
                return Err(ModelError::InvalidArgument(format!(
                    "state has {} sample paths, noise has {samples}",
                    s.samples()
                )));
            }
        }
        let mut g = Graph::new();
        let st = self.state_nodes(&mut g, state, samples)?;
        let xl = g.leaf("x", Array::vector(x_t.to_vec()));
        let e = g.constant(eps.clone());
        let step = self.build_step(&mut g, &st, xl, e, StepOptions { likelihood: true, importance: false })?;
        let bound = step.bound.expect("likelihood terms built");
        g.forward(bound)?;
        // the state nodes are ancestors of the bound
        let terms = StepTerms { recon: scalar(&g, step.recon.unwrap())?, kl: scalar(&g, step.kl.unwrap())? };
        if !terms.recon.is_finite() || !terms.kl.is_finite() {
            return Err(ModelError::NonFinite { step: None, what: "step bound" });
        }
        Ok((terms, self.read_state(&g, &step.state)))
    }

    /// Gradient of `Σ_τ (recon_τ − kl_τ)` over the window `xs`, started from
    /// `start`, with respect to the last frame of the window.
    ///
    /// Returns the window's step bounds and the gradient.
    pub fn window_gradient(
        &self,
        start: Option<&FilterState>,
        xs: &[Vec<f64>],
        noise: &[Array],
    ) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        self.validate(xs)?;
        if noise.len() != xs.len() {
            return Err(ModelError::LengthMismatch { x: xs.len(), z: noise.len() });
        }
        let samples = noise[0].shape()[1];
        let mut g = Graph::new();
        let mut st = self.state_nodes(&mut g, start, samples)?;
        let mut total: Option<NodeId> = None;
        let mut bounds = Vec::with_capacity(xs.len());
        let mut last_x = None;
        for (row, eps) in xs.iter().zip(noise) {
            let xl = g.leaf("x", Array::vector(row.clone()));
            let e = g.constant(eps.clone());
            let step = self.build_step(&mut g, &st, xl, e, StepOptions { likelihood: true, importance: false })?;
            let b = step.bound.expect("likelihood terms built");
            bounds.push(b);
            total = Some(match total {
                None => b,
                Some(acc) => g.add(acc, b)?,
            });
            st = step.state;
            last_x = Some(xl);
        }
        let total = total.expect("non-empty window");
        g.forward(total)?;
        g.backward(total)?;
        let grad = g
            .adjoint(last_x.expect("non-empty window"))
            .map(|a| a.data().to_vec())
            .unwrap_or_else(|| vec![0.0; self.dims().x_dim]);
        let bounds = bounds.into_iter().map(|b| scalar(&g, b)).collect::<Result<Vec<_>, _>>()?;
        Ok((bounds, grad))
    }

    /// Importance-sampled `ln p(x)` with `k` proposals from the recognition
    /// model. With `k = 1` this is the single-sample stochastic bound.
    pub fn log_likelihood_is(&self, x: &[Vec<f64>], k: usize, seed: u64) -> Result<ImportanceEstimate, ModelError> {
        let mut noise = NoiseStream::new(seed);
        let mut sg = self.sequence_graph(x, k, &mut noise, StepOptions { likelihood: false, importance: true })?;
        let mut log_w = vec![0.0; k];
        for s in &sg.steps {
            let rows = s.importance.expect("importance rows built");
            for id in [rows.log_lik, rows.log_prior, rows.log_q] {
                sg.graph.forward(id)?;
            }
            let ll = sg.graph.value(rows.log_lik).unwrap().data().to_vec();
            let lp = sg.graph.value(rows.log_prior).unwrap().data().to_vec();
            let lq = sg.graph.value(rows.log_q).unwrap().data().to_vec();
            for j in 0..k {
                log_w[j] += ll[j] + lp[j] - lq[j];
            }
        }
        // release the graph before summarizing
        sg.graph = Graph::new();
        if let Some(j) = log_w.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { step: None, what: if j == 0 { "log weight" } else { "log weights" } });
        }
        let estimate = log_mean_exp(&log_w);
        let std_error = if k > 1 {
            let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = log_w.iter().map(|v| (v - m).exp()).collect();
            let mean = w.iter().sum::<f64>() / k as f64;
            let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt() / mean
        } else {
            0.0
        };
        Ok(ImportanceEstimate { estimate, log_weights: log_w, std_error })
    }

    /// Recognition parameters for every step; step `t` depends on `x_{1:t}` only.
    pub fn recognize(&self, x: &[Vec<f64>]) -> Result<GaussianParams, ModelError> {
        self.validate(x)?;
        let mut g = Graph::new();
        let mut h = self.p_node(&mut g, Component::Recognition, "h0")?;
        let mut outs = Vec::with_capacity(x.len());
        for row in x {
            let xl = g.constant(Array::vector(row.clone()));
            h = self.gru(&mut g, Component::Recognition, xl, h)?;
            outs.push(self.head(&mut g, Component::Recognition, h)?);
        }
        collect_params(&mut g, &outs, |a| a.data().to_vec())
    }

    /// One recognition step from hidden state `h` (`None` = learned initial).
    pub fn recognize_step(&self, h: Option<&Array>, x_t: &[f64]) -> Result<(Array, Vec<f64>, Vec<f64>), ModelError> {
        let mut g = Graph::new();
        let h0 = match h {
            Some(a) => g.constant(a.clone()),
            None => self.p_node(&mut g, Component::Recognition, "h0")?,
        };
        let xl = g.constant(Array::vector(x_t.to_vec()));
        let h1 = self.gru(&mut g, Component::Recognition, xl, h0)?;
        let (m, lv) = self.head(&mut g, Component::Recognition, h1)?;
        let mean = g.forward(m)?.data().to_vec();
        let log_var = g.forward(lv)?.data().to_vec();
        Ok((g.value(h1).unwrap().clone(), mean, log_var))
    }

    /// Trending-prior parameters along a given latent path; step `t`
    /// depends on `z_{1:t-1}` only (`z_0 = 0`).
    pub fn prior_rollout(&self, z: &[Vec<f64>]) -> Result<GaussianParams, ModelError> {
        let zd = self.dims().z_dim;
        check_rows(z, zd)?;
        let mut g = Graph::new();
        let h0 = self.p_node(&mut g, Component::Prior, "h0")?;
        let mut h = g.broadcast(h0, &[self.dims().hidden_dim, 1])?;
        let mut z_prev = g.constant(Array::zeros(&[zd, 1]));
        let mut outs = Vec::with_capacity(z.len());
        for row in z {
            h = self.gru(&mut g, Component::Prior, z_prev, h)?;
            outs.push(self.head(&mut g, Component::Prior, h)?);
            z_prev = g.constant(Array::matrix(zd, 1, row.clone()));
        }
        collect_params(&mut g, &outs, col)
    }

    /// One prior step from hidden state `h` (`[H, 1]`, `None` = initial).
    pub fn prior_step(&self, h: Option<&Array>, z_prev: &[f64]) -> Result<(Array, Vec<f64>, Vec<f64>), ModelError> {
        let zd = self.dims().z_dim;
        let mut g = Graph::new();
        let h0 = match h {
            Some(a) => g.constant(a.clone()),
            None => {
                let p = self.p_node(&mut g, Component::Prior, "h0")?;
                g.broadcast(p, &[self.dims().hidden_dim, 1])?
            }
        };
        let zl = g.constant(Array::matrix(zd, 1, z_prev.to_vec()));
        let h1 = self.gru(&mut g, Component::Prior, zl, h0)?;
        let (m, lv) = self.head(&mut g, Component::Prior, h1)?;
        let mean = col(g.forward(m)?);
        let log_var = col(g.forward(lv)?);
        Ok((g.value(h1).unwrap().clone(), mean, log_var))
    }

    /// Generative output parameters for `x_{1:T}` given the latent path.
    /// Step `t` reads `x_{t-1}` (learned `x_0` at `t = 1`) and `z_t`, so the
    /// last observation is never an input.
    pub fn generate_params(&self, x: &[Vec<f64>], z: &[Vec<f64>]) -> Result<GaussianParams, ModelError> {
        self.validate(x)?;
        if x.len() != z.len() {
            return Err(ModelError::LengthMismatch { x: x.len(), z: z.len() });
        }
        let zd = self.dims().z_dim;
        check_rows(z, zd)?;
        let mut g = Graph::new();
        let h0 = self.p_node(&mut g, Component::Generative, "h0")?;
        let mut h = g.broadcast(h0, &[self.dims().hidden_dim, 1])?;
        let mut x_prev = self.p_node(&mut g, Component::Generative, "x0")?;
        let mut outs = Vec::with_capacity(x.len());
        for (xr, zr) in x.iter().zip(z) {
            let zl = g.constant(Array::matrix(zd, 1, zr.clone()));
            let xb = g.broadcast(x_prev, &[self.dims().x_dim, 1])?;
            let input = g.concat(xb, zl)?;
            h = self.gru(&mut g, Component::Generative, input, h)?;
            outs.push(self.head(&mut g, Component::Generative, h)?);
            x_prev = g.constant(Array::vector(xr.clone()));
        }
        collect_params(&mut g, &outs, col)
    }

    /// One generative step from hidden state `h` (`[H, 1]`, `None` = initial)
    /// and previous observation (`None` = learned `x_0`).
    pub fn generative_step(
        &self,
        h: Option<&Array>,
        x_prev: Option<&[f64]>,
        z_t: &[f64],
    ) -> Result<(Array, Vec<f64>, Vec<f64>), ModelError> {
        let mut g = Graph::new();
        let h0 = match h {
            Some(a) => g.constant(a.clone()),
            None => {
                let p = self.p_node(&mut g, Component::Generative, "h0")?;
                g.broadcast(p, &[self.dims().hidden_dim, 1])?
            }
        };
        let xp = match x_prev {
            Some(v) => g.constant(Array::vector(v.to_vec())),
            None => self.p_node(&mut g, Component::Generative, "x0")?,
        };
        let zl = g.constant(Array::matrix(self.dims().z_dim, 1, z_t.to_vec()));
        let xb = g.broadcast(xp, &[self.dims().x_dim, 1])?;
        let input = g.concat(xb, zl)?;
        let h1 = self.gru(&mut g, Component::Generative, input, h0)?;
        let (m, lv) = self.head(&mut g, Component::Generative, h1)?;
        let mean = col(g.forward(m)?);
        let log_var = col(g.forward(lv)?);
        Ok((g.value(h1).unwrap().clone(), mean, log_var))
    }

    /// Predictive distribution of `x_{t+1}` after observing `history = x_{1:t}`
    /// (possibly empty), collapsed over sample paths by moment matching.
    pub fn predict_next(&self, history: &[Vec<f64>], mode: PredictMode) -> Result<PredictiveGaussian, ModelError> {
        if !history.is_empty() {
            self.validate(history)?;
        }
        let (samples, mut noise) = match mode {
            PredictMode::Map => (1, NoiseStream::zeros()),
            PredictMode::Sampled { num_samples, seed } => {
                if num_samples == 0 {
                    return Err(ModelError::InvalidArgument("num_samples must be at least 1".into()));
                }
                (num_samples, NoiseStream::new(seed))
            }
        };
        let zd = self.dims().z_dim;
        let mut g = Graph::new();
        let mut state = self.initial_state_nodes(&mut g, samples)?;
        for row in history {
            let xl = g.constant(Array::vector(row.clone()));
            let eps = g.constant(noise.next(zd, samples));
            state = self.build_step(&mut g, &state, xl, eps, StepOptions::default())?.state;
        }
        let eps = g.constant(noise.next(zd, samples));
        let (m, lv) = self.build_predictive(&mut g, &state, eps)?;
        g.forward(m)?;
        g.forward(lv)?;
        Ok(moment_match(g.value(m).unwrap(), g.value(lv).unwrap()))
    }

    /// MAP one-step predictions for every step of `x`: entry `t` is the
    /// predictive Gaussian of `x_t` given `x_{1:t-1}`.
    pub fn map_predictions(&self, x: &[Vec<f64>]) -> Result<Vec<PredictiveGaussian>, ModelError> {
        self.validate(x)?;
        let zd = self.dims().z_dim;
        let mut g = Graph::new();
        let mut state = self.initial_state_nodes(&mut g, 1)?;
        let mut heads = Vec::with_capacity(x.len());
        for row in x {
            let eps = g.constant(Array::zeros(&[zd, 1]));
            heads.push(self.build_predictive(&mut g, &state, eps)?);
            let xl = g.constant(Array::vector(row.clone()));
            let eps = g.constant(Array::zeros(&[zd, 1]));
            state = self.build_step(&mut g, &state, xl, eps, StepOptions::default())?.state;
        }
        heads
            .iter()
            .map(|&(m, lv)| {
                g.forward(m)?;
                g.forward(lv)?;
                Ok(moment_match(g.value(m).unwrap(), g.value(lv).unwrap()))
            })
            .collect()
    }

    /// Ancestral sample of length `len` through the prior and generative chains.
    pub fn sample_sequence(&self, len: usize, seed: u64) -> Result<Vec<Vec<f64>>, ModelError> {
        let (xd, zd, hd) = (self.dims().x_dim, self.dims().z_dim, self.dims().hidden_dim);
        let mut noise = NoiseStream::new(seed);
        let mut g = Graph::new();
        let p0 = self.p_node(&mut g, Component::Prior, "h0")?;
        let mut prior_h = g.broadcast(p0, &[hd, 1])?;
        let g0 = self.p_node(&mut g, Component::Generative, "h0")?;
        let mut gen_h = g.broadcast(g0, &[hd, 1])?;
        let mut z_prev = g.constant(Array::zeros(&[zd, 1]));
        let mut x_prev = self.p_node(&mut g, Component::Generative, "x0")?;
        let mut xs = Vec::with_capacity(len);
        for _ in 0..len {
            prior_h = self.gru(&mut g, Component::Prior, z_prev, prior_h)?;
            let (pm, plv) = self.head(&mut g, Component::Prior, prior_h)?;
            let ez = g.constant(noise.next(zd, 1));
            let z = reparameterize(&mut g, pm, plv, ez)?;
            let xb = g.broadcast(x_prev, &[xd, 1])?;
            let input = g.concat(xb, z)?;
            gen_h = self.gru(&mut g, Component::Generative, input, gen_h)?;
            let (xm, xlv) = self.head(&mut g, Component::Generative, gen_h)?;
            let ex = g.constant(noise.next(xd, 1));
            let x = reparameterize(&mut g, xm, xlv, ex)?;
            xs.push(x);
            z_prev = z;
            x_prev = x;
        }
        let mut out = Vec::with_capacity(len);
        if let Some(&last) = xs.last() {
            g.forward(last)?;
        }
        for x in xs {
            out.push(col(g.value(x).unwrap()));
        }
        Ok(out)
    }

    fn p_node(&self, g: &mut Graph, c: Component, part: &str) -> Result<NodeId, ModelError> {
        Ok(g.param(self.params(), &format!("{}.{}", c.prefix(), part))?)
    }
}

fn check_rows(rows: &[Vec<f64>], dim: usize) -> Result<(), ModelError> {
    for (t, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(ModelError::RowDim { step: t, expected: dim, got: r.len() });
        }
    }
    Ok(())
}

fn collect_params(
    g: &mut Graph,
    outs: &[(NodeId, NodeId)],
    extract: impl Fn(&Array) -> Vec<f64>,
) -> Result<GaussianParams, ModelError> {
    let mut mean = Vec::with_capacity(outs.len());
    let mut log_variance = Vec::with_capacity(outs.len());
    for &(m, lv) in outs {
        mean.push(extract(g.forward(m)?));
        log_variance.push(extract(g.forward(lv)?));
    }
    Ok(GaussianParams { mean, log_variance })
}

/// Collapses `[D, S]` per-sample Gaussians into one by matching moments.
fn moment_match(mean: &Array, log_var: &Array) -> PredictiveGaussian {
    let d = mean.shape()[0];
    let s = mean.shape()[1];
    let mut m = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut within = vec![0.0; d];
    for i in 0..d {
        let mu: f64 = (0..s).map(|j| mean.get2(i, j)).sum::<f64>() / s as f64;
        let w: f64 = (0..s).map(|j| log_var.get2(i, j).exp()).sum::<f64>() / s as f64;
        let between: f64 = (0..s).map(|j| (mean.get2(i, j) - mu).powi(2)).sum::<f64>() / s as f64;
        m[i] = mu;
        within[i] = w;
        v[i] = w + between;
    }
    PredictiveGaussian { mean: m, variance: v, mean_component_variance: within }
}

