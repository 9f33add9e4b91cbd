//! Synthetic stand-in for a pick-and-place robot-arm dataset: waypoint
//! traversals in 7-dim joint space, optional "hit" perturbations, and two
//! imperfect per-step label channels.

mod io;

pub use io::{read_dataset, write_dataset, Dataset};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub const JOINTS: usize = 7;
/// Length of the hit-window label in seconds.
pub const HIT_WINDOW_SECS: f64 = 4.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("infeasible task: {0}")]
    Infeasible(String),
    #[error("hit step {step} outside sequence of length {len}")]
    HitOutOfRange { step: usize, len: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSequence {
    /// `T × 7` joint positions in radians.
    pub x: Vec<Vec<f64>>,
    pub dt: f64,
    pub hit_commands: Vec<usize>,
    pub label_hit_window: Vec<bool>,
    pub label_torque_proxy: Vec<bool>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_anomalous(&self) -> bool {
        !self.hit_commands.is_empty()
    }
}

/// Steps covered by one hit-window label.
pub fn hit_window_steps(dt: f64) -> usize {
    (HIT_WINDOW_SECS / dt).round() as usize
}

/// `label[t]` is true iff a hit command lies in `(t − window, t]`.
pub fn hit_window_labels(hits: &[usize], len: usize, dt: f64) -> Vec<bool> {
    let w = hit_window_steps(dt);
    (0..len).map(|t| hits.iter().any(|&h| h <= t && t < h + w)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub waypoint_pool: Vec<[f64; JOINTS]>,
    /// Seconds.
    pub duration: f64,
    /// Hz.
    pub rate: f64,
    /// Radians.
    pub noise_std: f64,
    pub joint_limits: [(f64, f64); JOINTS],
    /// Joint speed cap used to time the segments (rad/s).
    pub max_speed: f64,
    /// Shortest segment (s).
    pub min_segment: f64,
}

const ARM_LIMITS: [(f64, f64); JOINTS] = [
    (-1.70, 1.70),
    (-2.14, 1.04),
    (-3.05, 3.05),
    (-0.05, 2.61),
    (-3.05, 3.05),
    (-1.57, 2.09),
    (-3.05, 3.05),
];

impl TaskSpec {
    /// Pool of 10 waypoints drawn from the middle half of each joint range.
    pub fn with_pool_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool = (0..10)
            .map(|_| {
                let mut w = [0.0; JOINTS];
                for (v, &(lo, hi)) in w.iter_mut().zip(&ARM_LIMITS) {
                    let c = 0.5 * (lo + hi);
                    let r = 0.25 * (hi - lo);
                    *v = rng.random_range(c - r..c + r);
                }
                w
            })
            .collect();
        TaskSpec {
            waypoint_pool: pool,
            duration: 30.0,
            rate: 15.0,
            noise_std: 0.005,
            joint_limits: ARM_LIMITS,
            max_speed: 1.0,
            min_segment: 1.0,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn steps(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }

    fn check(&self) -> Result<(), DataError> {
        if self.waypoint_pool.len() < 2 {
            return Err(DataError::Infeasible("need at least two waypoints".into()));
        }
        if !(self.rate > 0.0 && self.duration > 0.0 && self.max_speed > 0.0 && self.noise_std >= 0.0) {
            return Err(DataError::Infeasible("rate, duration and speed must be positive".into()));
        }
        for (i, w) in self.waypoint_pool.iter().enumerate() {
            for (j, (&v, &(lo, hi))) in w.iter().zip(&self.joint_limits).enumerate() {
                if !(lo..=hi).contains(&v) {
                    return Err(DataError::Infeasible(format!(
                        "waypoint {i} joint {j} = {v} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Minimum-jerk duration that keeps every joint below `max_speed`.
    fn segment_time(&self, a: &[f64; JOINTS], b: &[f64; JOINTS]) -> f64 {
        let disp = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        (MIN_JERK_PEAK * disp / self.max_speed).max(self.min_segment)
    }
}

/// Peak of `ds/dτ` for the quintic blend.
pub const MIN_JERK_PEAK: f64 = 1.875;

fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// Noise-free trajectory through `route` (which should end where it starts),
/// holding the last point after the route is finished.
fn trajectory(spec: &TaskSpec, route: &[usize]) -> Vec<Vec<f64>> {
    let pool = &spec.waypoint_pool;
    let mut knots = vec![0.0];
    for w in route.windows(2) {
        let last = *knots.last().unwrap();
        knots.push(last + spec.segment_time(&pool[w[0]], &pool[w[1]]));
    }
    (0..spec.steps())
        .map(|k| {
            let time = k as f64 * spec.dt();
            let seg = knots.windows(2).position(|s| time < s[1]);
            match seg {
                None => pool[*route.last().unwrap()].to_vec(),
                Some(i) => {
                    let s = min_jerk((time - knots[i]) / (knots[i + 1] - knots[i]));
                    let (a, b) = (&pool[route[i]], &pool[route[i + 1]]);
                    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
                }
            }
        })
        .collect()
}

/// Random waypoint order starting from the initial configuration (pool
/// point 0): as many pool points as fit in the duration, then back home.
fn random_route(spec: &TaskSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let pool = &spec.waypoint_pool;
    let mut route = vec![0];
    let mut elapsed = 0.0;
    loop {
        let cur = *route.last().unwrap();
        let mut candidates: Vec<usize> = (0..pool.len()).filter(|&i| i != cur).collect();
        candidates.shuffle(rng);
        let next = candidates[0];
        let step = spec.segment_time(&pool[cur], &pool[next]);
        let back = spec.segment_time(&pool[next], &pool[route[0]]);
        if elapsed + step + back > spec.duration {
            break;
        }
        elapsed += step;
        route.push(next);
    }
    if route.len() > 1 {
        route.push(route[0]);
    }
    route
}

/// `n` anomaly-free sequences; `(spec, n, seed)` fully determines the output.
pub fn generate_normal(spec: &TaskSpec, n: usize, seed: u64) -> Result<Vec<LabeledSequence>, DataError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = spec.dt();
    Ok((0..n)
        .map(|_| {
            let route = random_route(spec, &mut rng);
            let mut x = trajectory(spec, &route);
            for row in &mut x {
                for v in row.iter_mut() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *v += spec.noise_std * e;
                }
            }
            let len = x.len();
            LabeledSequence {
                x,
                dt,
                hit_commands: Vec::new(),
                label_hit_window: vec![false; len],
                label_torque_proxy: vec![false; len],
            }
        })
        .collect())
}

/// Parameters of the injected perturbations.
#[derive(Clone, Debug, PartialEq)]
pub struct HitSpec {
    /// Euclidean displacement range (rad) right after a hit.
    pub magnitude_min: f64,
    pub magnitude_max: f64,
    /// Decay time constant (s).
    pub decay: f64,
    /// Torque-proxy threshold as a multiple of the per-step velocity noise.
    pub torque_factor: f64,
    /// Sensor noise the threshold is scaled by (rad).
    pub noise_std: f64,
}

impl Default for HitSpec {
    fn default() -> Self {
        HitSpec { magnitude_min: 0.05, magnitude_max: 0.3, decay: 0.5, torque_factor: 5.0, noise_std: 0.005 }
    }
}

impl HitSpec {
    /// Velocity-deviation threshold (rad/s) for the torque proxy.
    pub fn torque_threshold(&self, dt: f64) -> f64 {
        self.torque_factor * self.noise_std * std::f64::consts::SQRT_2 / dt
    }
}

/// One hit: onset step, unit direction, magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Hit {
    pub step: usize,
    pub direction: [f64; JOINTS],
    pub magnitude: f64,
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; JOINTS] {
    loop {
        let mut d = [0.0; JOINTS];
        d.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-9 {
            d.iter_mut().for_each(|v| *v /= n);
            return d;
        }
    }
}

/// Adds the given hits to `seq` and recomputes both label channels.
pub fn apply_hits(seq: &LabeledSequence, hits: &[Hit], spec: &HitSpec) -> Result<LabeledSequence, DataError> {
    let len = seq.len();
    if let Some(h) = hits.iter().find(|h| h.step >= len) {
        return Err(DataError::HitOutOfRange { step: h.step, len });
    }
    let dt = seq.dt;
    let offset: Vec<[f64; JOINTS]> = (0..len)
        .map(|t| {
            let mut o = [0.0; JOINTS];
            for h in hits.iter().filter(|h| h.step <= t) {
                let a = h.magnitude * (-((t - h.step) as f64) * dt / spec.decay).exp();
                o.iter_mut().zip(&h.direction).for_each(|(v, d)| *v += a * d);
            }
            o
        })
        .collect();
    let mut out = seq.clone();
    for (row, o) in out.x.iter_mut().zip(&offset) {
        row.iter_mut().zip(o).for_each(|(v, d)| *v += d);
    }
    let threshold = spec.torque_threshold(dt);
    let mut torque = seq.label_torque_proxy.clone();
    for t in 0..len {
        let prev = if t == 0 { [0.0; JOINTS] } else { offset[t - 1] };
        let dv = offset[t].iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / dt;
        torque[t] |= dv > threshold;
    }
    let mut commands = seq.hit_commands.clone();
    commands.extend(hits.iter().map(|h| h.step));
    commands.sort_unstable();
    out.label_hit_window = hit_window_labels(&commands, len, dt);
    out.label_torque_proxy = torque;
    out.hit_commands = commands;
    Ok(out)
}

/// Draws `n_hits` hits at distinct random steps and applies them.
pub fn inject_hits(
    seq: &LabeledSequence,
    n_hits: usize,
    spec: &HitSpec,
    seed: u64,
) -> Result<LabeledSequence, DataError> {
    if n_hits == 0 || n_hits > seq.len() {
        return Err(DataError::InvalidArgument(format!(
            "n_hits must be in 1..={}, got {n_hits}",
            seq.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps: Vec<usize> = rand::seq::index::sample(&mut rng, seq.len(), n_hits).into_vec();
    steps.sort_unstable();
    let hits: Vec<Hit> = steps
        .into_iter()
        .map(|step| {
            let direction = random_direction(&mut rng);
            let magnitude = if spec.magnitude_max > spec.magnitude_min {
                rng.random_range(spec.magnitude_min..spec.magnitude_max)
            } else {
                spec.magnitude_min
            };
            Hit { step, direction, magnitude }
        })
        .collect();
    apply_hits(seq, &hits, spec)
}

/// `n` sequences each carrying between `min_hits` and `max_hits` hits.
pub fn generate_anomalous(
    task: &TaskSpec,
    hits: &HitSpec,
    n: usize,
    hit_range: (usize, usize),
    seed: u64,
) -> Result<Vec<LabeledSequence>, DataError> {
    let (lo, hi) = hit_range;
    if lo == 0 || hi < lo {
        return Err(DataError::InvalidArgument(format!("bad hit range {lo}..={hi}")));
    }
    let base = generate_normal(task, n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_a11);
    base.iter()
        .map(|s| {
            let k = rng.random_range(lo..=hi);
            inject_hits(s, k, hits, rng.random())
        })
        .collect()
}

/// Train/valid/test sizes in the proportions 640 : 160 : 208.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n as f64 * 640.0 / 1008.0).round() as usize;
    let valid = ((n as f64 * 160.0 / 1008.0).round() as usize).min(n - train);
    (train, valid, n - train - valid)
}

#[cfg(test)]
mod tests;
