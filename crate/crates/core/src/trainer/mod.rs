//! Stochastic-gradient fitting of [`StornModel`] by maximizing the lower
//! bound, with validation-based early stopping.

mod config;
mod norm;
mod optim;

pub use config::TrainConfig;
pub use norm::{NormStats, STD_FLOOR};
pub use optim::{clip_global_norm, global_norm, Adam, Gradients};

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::seqmodel::{ModelError, NoiseStream, StornModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, batch {batch} (parameter norm {param_norm:.6e})")]
    NonFinite { epoch: usize, batch: usize, param_norm: f64 },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Mean per-step bounds for one epoch. Epoch 0 is the untrained model.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_bound: f64,
    pub valid_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_bound,valid_bound\n");
        for r in &self.epochs {
            let _ = writeln!(s, "{},{:?},{:?}", r.epoch, r.train_bound, r.valid_bound);
        }
        s
    }
}

/// SplitMix64 finalizer; derives independent stream seeds from one base seed.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const EVAL_STREAM: u64 = 1 << 40;

/// Bound and parameter gradients of one sequence.
fn sequence_gradient(
    model: &StornModel,
    x: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<(f64, Gradients), ModelError> {
    let mut sg = model.build_sequence_graph(x, samples, &mut NoiseStream::new(seed))?;
    let total = sg.graph.forward(sg.total)?.item();
    sg.graph.backward(sg.total)?;
    Ok((total, sg.graph.param_gradients()))
}

/// Mean per-step bound over `set`, with noise fixed by `seed`.
pub fn mean_step_bound(model: &StornModel, set: &[Vec<Vec<f64>>], samples: usize, seed: u64) -> Result<f64, ModelError> {
    let totals: Vec<f64> = set
        .par_iter()
        .enumerate()
        .map(|(i, x)| model.elbo(x, samples, mix_seed(seed, EVAL_STREAM + i as u64)).map(|e| e.total))
        .collect::<Result<_, _>>()?;
    let steps: usize = set.iter().map(Vec::len).sum();
    Ok(totals.iter().sum::<f64>() / steps as f64)
}

/// Shuffled batches of equal-length sequences.
fn length_buckets(lengths: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match batches.last_mut() {
            Some(b) if b.len() < batch_size && lengths[b[0]] == lengths[i] => b.push(i),
            _ => batches.push(vec![i]),
        }
    }
    batches.shuffle(rng);
    batches
}

/// Fits `model` to `train` (raw, unnormalized sequences) and returns the
/// parameters of the best validation epoch.
///
/// Normalization statistics are fitted on `train` and stored in the model.
pub fn train(
    mut model: StornModel,
    train: &[Vec<Vec<f64>>],
    valid: &[Vec<Vec<f64>>],
    config: &TrainConfig,
) -> Result<(StornModel, TrainHistory), TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySet("training"));
    }
    if valid.is_empty() {
        return Err(TrainError::EmptySet("validation"));
    }
    let norm = NormStats::fit(train)?;
    let train: Vec<_> = train.iter().map(|x| norm.normalize(x)).collect::<Result<_, _>>()?;
    let valid: Vec<_> = valid.iter().map(|x| norm.normalize(x)).collect::<Result<_, _>>()?;
    model.set_norm(Some(norm));

    let samples = config.num_elbo_samples;
    let eval_seed = mix_seed(config.seed, 0);
    let mut epochs = vec![EpochRecord {
        epoch: 0,
        train_bound: mean_step_bound(&model, &train, samples, eval_seed)?,
        valid_bound: mean_step_bound(&model, &valid, samples, eval_seed)?,
    }];
    log::info!("epoch 0: train {:.4} valid {:.4}", epochs[0].train_bound, epochs[0].valid_bound);
    let mut best_epoch = 0;
    let mut best_params = model.params().clone();

    let lengths: Vec<usize> = train.iter().map(Vec::len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adam::new(config.learning_rate);
    let mut draw = 0u64;

    for epoch in 1..=config.max_epochs {
        let mut epoch_total = 0.0;
        let mut epoch_steps = 0usize;
        for (b, batch) in length_buckets(&lengths, config.batch_size, &mut rng).into_iter().enumerate() {
            let seeds: Vec<u64> = batch.iter().map(|_| {
                draw += 1;
                mix_seed(config.seed, draw)
            }).collect();
            let results: Vec<(f64, Gradients)> = batch
                .par_iter()
                .zip(seeds.par_iter())
                .map(|(&i, &s)| sequence_gradient(&model, &train[i], samples, s))
                .collect::<Result<_, _>>()?;
            let steps: usize = batch.iter().map(|&i| lengths[i]).sum();
            let mut total = 0.0;
            let mut grads = Gradients::new();
            for (t, g) in results {
                total += t;
                for (name, a) in g {
                    match grads.get_mut(&name) {
                        Some(acc) => acc.data_mut().iter_mut().zip(a.data()).for_each(|(x, y)| *x += y),
                        None => {
                            grads.insert(name, a);
                        }
                    }
                }
            }
            // loss is the negative mean per-step bound
            let scale = -1.0 / steps as f64;
            for a in grads.values_mut() {
                a.data_mut().iter_mut().for_each(|v| *v *= scale);
            }
            if !total.is_finite() || !global_norm(&grads).is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: b, param_norm: model.params().global_norm() });
            }
            clip_global_norm(&mut grads, config.gradient_clip_norm);
            opt.update(model.params_mut(), &grads);
            epoch_total += total;
            epoch_steps += steps;
        }
        let record = EpochRecord {
            epoch,
            train_bound: epoch_total / epoch_steps as f64,
            valid_bound: mean_step_bound(&model, &valid, samples, eval_seed)?,
        };
        log::info!("epoch {epoch}: train {:.4} valid {:.4}", record.train_bound, record.valid_bound);
        if !record.valid_bound.is_finite() {
            return Err(TrainError::NonFinite { epoch, batch: usize::MAX, param_norm: model.params().global_norm() });
        }
        if record.valid_bound > epochs[best_epoch].valid_bound {
            best_epoch = epoch;
            best_params = model.params().clone();
        }
        epochs.push(record);
        if epoch - best_epoch >= config.patience {
            log::info!("early stop at epoch {epoch}; best epoch {best_epoch}");
            break;
        }
    }
    *model.params_mut() = best_params;
    Ok((model, TrainHistory { epochs, best_epoch }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets_hold_equal_lengths_and_cover_everything() {
        let lengths = [5, 3, 5, 5, 3, 7, 5, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batches = length_buckets(&lengths, 2, &mut rng);
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        for b in &batches {
            assert!(b.len() <= 2);
            assert!(b.iter().all(|&i| lengths[i] == lengths[b[0]]));
        }
    }

    #[test]
    fn mixed_seeds_differ() {
        assert_ne!(mix_seed(0, 1), mix_seed(0, 2));
        assert_ne!(mix_seed(1, 1), mix_seed(0, 1));
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }

    #[test]
    fn history_csv_layout() {
        let h = TrainHistory {
            epochs: vec![
                EpochRecord { epoch: 0, train_bound: -3.0, valid_bound: -3.5 },
                EpochRecord { epoch: 1, train_bound: -2.0, valid_bound: -2.25 },
            ],
            best_epoch: 1,
        };
        assert_eq!(h.to_csv(), "epoch,train_bound,valid_bound\n0,-3.0,-3.5\n1,-2.0,-2.25\n");
        assert_eq!(h.best().epoch, 1);
    }
}
