use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{format_values, parse_values, Array, Checkpoint, Graph, GraphError, NodeId, ParameterStore};
use crate::trainer::NormStats;

use super::gaussian::{bound_logvar, kl_elements, logpdf_elements, reparameterize, LOGVAR_BOUND};
use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub x_dim: usize,
    pub z_dim: usize,
    pub hidden_dim: usize,
}

/// The three recurrent components of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    /// Emits `p(x_t | h^g_t)`; input `(x_{t-1}, z_t)`.
    Generative,
    /// Emits the trending prior `p(z_t | h^p_t)`; input `z_{t-1}`.
    Prior,
    /// Emits `q(z_t | x_{1:t})`; input `x_t`.
    Recognition,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Generative, Component::Prior, Component::Recognition];

    pub fn prefix(self) -> &'static str {
        match self {
            Component::Generative => "gen",
            Component::Prior => "prior",
            Component::Recognition => "rec",
        }
    }

    fn input_dim(self, d: &ModelDims) -> usize {
        match self {
            Component::Generative => d.x_dim + d.z_dim,
            Component::Prior => d.z_dim,
            Component::Recognition => d.x_dim,
        }
    }

    fn output_dim(self, d: &ModelDims) -> usize {
        match self {
            Component::Generative => d.x_dim,
            Component::Prior | Component::Recognition => d.z_dim,
        }
    }
}

fn pname(c: Component, part: &str) -> String {
    format!("{}.{}", c.prefix(), part)
}

/// Source of the standard-normal noise consumed by sampling paths.
///
/// Draws are row-major per requested `[rows, cols]` block, in request order.
pub struct NoiseStream {
    rng: Option<ChaCha8Rng>,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream { rng: Some(ChaCha8Rng::seed_from_u64(seed)) }
    }

    /// A stream that only ever yields zeros (MAP paths).
    pub fn zeros() -> Self {
        NoiseStream { rng: None }
    }

    pub fn next(&mut self, rows: usize, cols: usize) -> Array {
        match &mut self.rng {
            Some(rng) => {
                let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
                Array::matrix(rows, cols, data)
            }
            None => Array::zeros(&[rows, cols]),
        }
    }
}

/// Recurrent state after a step, for `S` parallel sample paths.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    /// `[H]`: recognition is deterministic given `x`, so it has one path.
    pub rec_h: Array,
    /// `[H, S]`
    pub gen_h: Array,
    /// `[H, S]`
    pub prior_h: Array,
    /// `[Z, S]`
    pub z_prev: Array,
    /// `[D]`
    pub x_prev: Array,
}

impl FilterState {
    pub fn samples(&self) -> usize {
        self.gen_h.shape()[1]
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct StateNodes {
    rec_h: NodeId,
    gen_h: NodeId,
    prior_h: NodeId,
    z_prev: NodeId,
    x_prev: NodeId,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct StepOptions {
    pub likelihood: bool,
    pub importance: bool,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ImportanceRows {
    /// `[1, S]` rows of `ln p(x_t|·)`, `ln p(z_t|·)`, `ln q(z_t|·)`.
    pub log_lik: NodeId,
    pub log_prior: NodeId,
    pub log_q: NodeId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct StepNodes {
    pub recon: Option<NodeId>,
    pub kl: Option<NodeId>,
    pub bound: Option<NodeId>,
    pub importance: Option<ImportanceRows>,
    pub state: StateNodes,
}

/// STORN with a trending prior and a causal recognition model.
#[derive(Clone, Debug, PartialEq)]
pub struct StornModel {
    dims: ModelDims,
    params: ParameterStore,
    norm: Option<NormStats>,
}

impl StornModel {
    /// Randomly initialized model. Weight matrices are `N(0, 1/fan_in)`,
    /// biases and initial states start at zero.
    pub fn new(dims: ModelDims, seed: u64) -> Result<Self, ModelError> {
        if dims.x_dim == 0 || dims.z_dim == 0 || dims.hidden_dim == 0 {
            return Err(ModelError::InvalidArgument(format!("all model dimensions must be positive: {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterStore::new(seed);
        let h = dims.hidden_dim;
        for c in Component::ALL {
            let fan_in = c.input_dim(&dims) + h;
            let out = c.output_dim(&dims);
            params.insert(pname(c, "h0"), Array::zeros(&[h]))?;
            params.insert_normal(pname(c, "w_gate"), &[2 * h, fan_in], (fan_in as f64).powf(-0.5), &mut rng)?;
            params.insert(pname(c, "b_gate"), Array::zeros(&[2 * h]))?;
            params.insert_normal(pname(c, "w_cand"), &[h, fan_in], (fan_in as f64).powf(-0.5), &mut rng)?;
            params.insert(pname(c, "b_cand"), Array::zeros(&[h]))?;
            params.insert_normal(pname(c, "w_mean"), &[out, h], 0.1 * (h as f64).powf(-0.5), &mut rng)?;
            params.insert(pname(c, "b_mean"), Array::zeros(&[out]))?;
            params.insert_normal(pname(c, "w_logvar"), &[out, h], 0.1 * (h as f64).powf(-0.5), &mut rng)?;
            params.insert(pname(c, "b_logvar"), Array::zeros(&[out]))?;
        }
        params.insert(pname(Component::Generative, "x0"), Array::zeros(&[dims.x_dim]))?;
        Ok(StornModel { dims, params, norm: None })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    pub fn norm(&self) -> Option<&NormStats> {
        self.norm.as_ref()
    }

    pub fn set_norm(&mut self, norm: Option<NormStats>) {
        self.norm = norm;
    }

    /// Sets every weight matrix to zero, leaving biases and initial states.
    /// The outputs then no longer depend on `x` or `z`.
    pub fn zero_weights(&mut self) {
        let names: Vec<String> = self.params.names().filter(|n| n.contains(".w_")).map(str::to_string).collect();
        for n in names {
            self.params.values_mut(&n).expect("name from store").fill(0.0);
        }
    }

    pub(crate) fn validate(&self, x: &[Vec<f64>]) -> Result<(), ModelError> {
        if x.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        for (t, row) in x.iter().enumerate() {
            if row.len() != self.dims.x_dim {
                return Err(ModelError::RowDim { step: t, expected: self.dims.x_dim, got: row.len() });
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(ModelError::NonFinite { step: Some(t), what: "input" });
            }
        }
        Ok(())
    }

    // ---- graph building -------------------------------------------------

    fn p(&self, g: &mut Graph, c: Component, part: &str) -> Result<NodeId, GraphError> {
        g.param(&self.params, &pname(c, part))
    }

    /// Gated recurrent update. `input` is `[I]` or `[I, S]`, `h` matches its
    /// trailing shape with `H` rows.
    pub(crate) fn gru(&self, g: &mut Graph, c: Component, input: NodeId, h: NodeId) -> Result<NodeId, GraphError> {
        let hd = self.dims.hidden_dim;
        let xh = g.concat(input, h)?;
        let w_gate = self.p(g, c, "w_gate")?;
        let pre = g.matmul(w_gate, xh)?;
        let b_gate = self.p(g, c, "b_gate")?;
        let shape = g.shape(pre).to_vec();
        let bb = g.broadcast(b_gate, &shape)?;
        let pre = g.add(pre, bb)?;
        let gates = g.sigmoid(pre);
        let update = g.slice(gates, 0, hd)?;
        let reset = g.slice(gates, hd, hd)?;
        let rh = g.mul(reset, h)?;
        let xrh = g.concat(input, rh)?;
        let w_cand = self.p(g, c, "w_cand")?;
        let cand = g.matmul(w_cand, xrh)?;
        let b_cand = self.p(g, c, "b_cand")?;
        let shape = g.shape(cand).to_vec();
        let bc = g.broadcast(b_cand, &shape)?;
        let cand = g.add(cand, bc)?;
        let cand = g.tanh(cand);
        let delta = g.sub(cand, h)?;
        let step = g.mul(update, delta)?;
        g.add(h, step)
    }

    /// Diagonal Gaussian output head: `(mean, bounded log-variance)`.
    pub(crate) fn head(&self, g: &mut Graph, c: Component, h: NodeId) -> Result<(NodeId, NodeId), GraphError> {
        let w = self.p(g, c, "w_mean")?;
        let m = g.matmul(w, h)?;
        let b = self.p(g, c, "b_mean")?;
        let shape = g.shape(m).to_vec();
        let bb = g.broadcast(b, &shape)?;
        let mean = g.add(m, bb)?;
        let w = self.p(g, c, "w_logvar")?;
        let r = g.matmul(w, h)?;
        let b = self.p(g, c, "b_logvar")?;
        let bb = g.broadcast(b, &shape)?;
        let raw = g.add(r, bb)?;
        let lv = bound_logvar(g, raw)?;
        Ok((mean, lv))
    }

    pub(crate) fn initial_state_nodes(&self, g: &mut Graph, samples: usize) -> Result<StateNodes, GraphError> {
        let h = self.dims.hidden_dim;
        let rec_h = self.p(g, Component::Recognition, "h0")?;
        let g0 = self.p(g, Component::Generative, "h0")?;
        let gen_h = g.broadcast(g0, &[h, samples])?;
        let p0 = self.p(g, Component::Prior, "h0")?;
        let prior_h = g.broadcast(p0, &[h, samples])?;
        let z_prev = g.constant(Array::zeros(&[self.dims.z_dim, samples]));
        let x_prev = self.p(g, Component::Generative, "x0")?;
        Ok(StateNodes { rec_h, gen_h, prior_h, z_prev, x_prev })
    }

    /// State nodes for `state`, or the learned initial state when `None`.
    pub(crate) fn state_nodes(
        &self,
        g: &mut Graph,
        state: Option<&FilterState>,
        samples: usize,
    ) -> Result<StateNodes, GraphError> {
        match state {
            None => self.initial_state_nodes(g, samples),
            Some(s) => Ok(StateNodes {
                rec_h: g.constant(s.rec_h.clone()),
                gen_h: g.constant(s.gen_h.clone()),
                prior_h: g.constant(s.prior_h.clone()),
                z_prev: g.constant(s.z_prev.clone()),
                x_prev: g.constant(s.x_prev.clone()),
            }),
        }
    }

    pub(crate) fn read_state(&self, g: &Graph, s: &StateNodes) -> FilterState {
        let v = |id| g.value(id).expect("state evaluated").clone();
        FilterState { rec_h: v(s.rec_h), gen_h: v(s.gen_h), prior_h: v(s.prior_h), z_prev: v(s.z_prev), x_prev: v(s.x_prev) }
    }

    /// Generative step given `z_t` (`[Z, S]`) and the previous state.
    fn generative(
        &self,
        g: &mut Graph,
        x_prev: NodeId,
        z: NodeId,
        gen_h: NodeId,
    ) -> Result<(NodeId, NodeId, NodeId), GraphError> {
        let samples = g.shape(z)[1];
        let xb = g.broadcast(x_prev, &[self.dims.x_dim, samples])?;
        let input = g.concat(xb, z)?;
        let h = self.gru(g, Component::Generative, input, gen_h)?;
        let (m, lv) = self.head(g, Component::Generative, h)?;
        Ok((h, m, lv))
    }

    /// One filtering step: recognition on `x_t`, trending prior on
    /// `z_{t-1}`, reparameterized `z_t ~ q`, generative output for `x_t`.
    pub(crate) fn build_step(
        &self,
        g: &mut Graph,
        state: &StateNodes,
        x_t: NodeId,
        eps: NodeId,
        opts: StepOptions,
    ) -> Result<StepNodes, GraphError> {
        let (zd, xd) = (self.dims.z_dim, self.dims.x_dim);
        let samples = g.shape(eps)[1];

        let rec_h = self.gru(g, Component::Recognition, x_t, state.rec_h)?;
        let (q_mean, q_logvar) = self.head(g, Component::Recognition, rec_h)?;

        let prior_h = self.gru(g, Component::Prior, state.z_prev, state.prior_h)?;
        let (prior_mean, prior_logvar) = self.head(g, Component::Prior, prior_h)?;

        let qm = g.broadcast(q_mean, &[zd, samples])?;
        let qlv = g.broadcast(q_logvar, &[zd, samples])?;
        let z = reparameterize(g, qm, qlv, eps)?;

        let (gen_h, x_mean, x_logvar) = self.generative(g, state.x_prev, z, state.gen_h)?;

        let mut out = StepNodes {
            recon: None,
            kl: None,
            bound: None,
            importance: None,
            state: StateNodes { rec_h, gen_h, prior_h, z_prev: z, x_prev: x_t },
        };
        if !(opts.likelihood || opts.importance) {
            return Ok(out);
        }
        let xb = g.broadcast(x_t, &[xd, samples])?;
        let lp = logpdf_elements(g, xb, x_mean, x_logvar)?;
        if opts.likelihood {
            let inv_s = 1.0 / samples as f64;
            let lp_sum = g.sum(lp);
            let recon = g.scale(lp_sum, inv_s)?;
            let kl_el = kl_elements(g, qm, qlv, prior_mean, prior_logvar)?;
            let kl_sum = g.sum(kl_el);
            let kl = g.scale(kl_sum, inv_s)?;
            out.recon = Some(recon);
            out.kl = Some(kl);
            out.bound = Some(g.sub(recon, kl)?);
        }
        if opts.importance {
            let ones_x = g.constant(Array::filled(&[1, xd], 1.0));
            let ones_z = g.constant(Array::filled(&[1, zd], 1.0));
            let log_lik = g.matmul(ones_x, lp)?;
            let lpz = logpdf_elements(g, z, prior_mean, prior_logvar)?;
            let log_prior = g.matmul(ones_z, lpz)?;
            let lqz = logpdf_elements(g, z, qm, qlv)?;
            let log_q = g.matmul(ones_z, lqz)?;
            out.importance = Some(ImportanceRows { log_lik, log_prior, log_q });
        }
        Ok(out)
    }

    /// Predictive branch for the next observation from `state`, with
    /// `z_{t+1}` drawn from the trending prior using `eps` (`[Z, S]`).
    pub(crate) fn build_predictive(
        &self,
        g: &mut Graph,
        state: &StateNodes,
        eps: NodeId,
    ) -> Result<(NodeId, NodeId), GraphError> {
        let prior_h = self.gru(g, Component::Prior, state.z_prev, state.prior_h)?;
        let (pm, plv) = self.head(g, Component::Prior, prior_h)?;
        let z = reparameterize(g, pm, plv, eps)?;
        let (_, m, lv) = self.generative(g, state.x_prev, z, state.gen_h)?;
        Ok((m, lv))
    }

    // ---- checkpoints ----------------------------------------------------

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint { hyper: Default::default(), store: self.params.clone() };
        ck.hyper.insert("x_dim".into(), self.dims.x_dim.to_string());
        ck.hyper.insert("z_dim".into(), self.dims.z_dim.to_string());
        ck.hyper.insert("hidden_dim".into(), self.dims.hidden_dim.to_string());
        ck.hyper.insert("logvar_min".into(), format!("{:?}", -LOGVAR_BOUND));
        ck.hyper.insert("logvar_max".into(), format!("{:?}", LOGVAR_BOUND));
        if let Some(n) = &self.norm {
            ck.hyper.insert("norm_mean".into(), format_values(&n.mean));
            ck.hyper.insert("norm_std".into(), format_values(&n.std));
        }
        ck
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, ModelError> {
        let get = |k: &str| -> Result<usize, ModelError> {
            ck.hyper
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ModelError::Checkpoint(format!("missing or bad hyperparameter {k}")))
        };
        let dims = ModelDims { x_dim: get("x_dim")?, z_dim: get("z_dim")?, hidden_dim: get("hidden_dim")? };
        let reference = StornModel::new(dims, 0)?;
        for (name, arr) in reference.params.iter() {
            match ck.store.get(name) {
                Some(a) if a.shape() == arr.shape() => {}
                Some(a) => {
                    return Err(ModelError::Checkpoint(format!(
                        "parameter {name} has shape {:?}, expected {:?}",
                        a.shape(),
                        arr.shape()
                    )))
                }
                None => return Err(ModelError::Checkpoint(format!("missing parameter {name}"))),
            }
        }
        if ck.store.len() != reference.params.len() {
            return Err(ModelError::Checkpoint("unexpected extra parameters".into()));
        }
        let norm = match (ck.hyper.get("norm_mean"), ck.hyper.get("norm_std")) {
            (Some(m), Some(s)) => {
                let mean = parse_values(m).map_err(ModelError::Checkpoint)?;
                let std = parse_values(s).map_err(ModelError::Checkpoint)?;
                if mean.len() != dims.x_dim || std.len() != dims.x_dim {
                    return Err(ModelError::Checkpoint("normalization statistics have wrong length".into()));
                }
                Some(NormStats { mean, std })
            }
            (None, None) => None,
            _ => return Err(ModelError::Checkpoint("incomplete normalization statistics".into())),
        };
        Ok(StornModel { dims, params: ck.store, norm })
    }

    pub fn to_text(&self) -> String {
        self.to_checkpoint().to_text()
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        Self::from_checkpoint(Checkpoint::from_text(text)?)
    }
}
