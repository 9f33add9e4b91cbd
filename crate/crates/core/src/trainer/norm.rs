use crate::seqmodel::ModelError;

/// Standard-deviation floor applied to near-constant dimensions.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension normalization statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Statistics pooled over every step of every sequence.
    pub fn fit(sequences: &[Vec<Vec<f64>>]) -> Result<Self, ModelError> {
        let dim = sequences
            .iter()
            .flat_map(|s| s.first())
            .map(Vec::len)
            .next()
            .ok_or(ModelError::EmptySequence)?;
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        for row in sequences.iter().flatten() {
            check_dim(row, dim)?;
            n += 1;
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for row in sequences.iter().flatten() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n as f64).sqrt().max(STD_FLOOR)).collect();
        Ok(NormStats { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ModelError> {
        x.iter()
            .map(|row| {
                check_dim(row, self.dim())?;
                Ok(row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect())
            })
            .collect()
    }

    pub fn denormalize(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ModelError> {
        x.iter()
            .map(|row| {
                check_dim(row, self.dim())?;
                Ok(row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect())
            })
            .collect()
    }
}

fn check_dim(row: &[f64], dim: usize) -> Result<(), ModelError> {
    if row.len() != dim {
        return Err(ModelError::DimMismatch { expected: dim, got: row.len() });
    }
    Ok(())
}
