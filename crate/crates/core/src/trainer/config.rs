use std::fmt;
use std::str::FromStr;

use super::TrainError;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub gradient_clip_norm: f64,
    pub num_elbo_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 10,
            gradient_clip_norm: 10.0,
            num_elbo_samples: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.num_elbo_samples == 0 {
            return bad("batch_size, max_epochs, patience and num_elbo_samples must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.gradient_clip_norm > 0.0) {
            return bad("gradient_clip_norm must be positive");
        }
        if self.patience > self.max_epochs {
            return bad("patience must not exceed max_epochs");
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        match key {
            "batch_size" => self.batch_size = parse(value)?,
            "learning_rate" => self.learning_rate = parse(value)?,
            "max_epochs" => self.max_epochs = parse(value)?,
            "patience" => self.patience = parse(value)?,
            "gradient_clip_norm" => self.gradient_clip_norm = parse(value)?,
            "num_elbo_samples" => self.num_elbo_samples = parse(value)?,
            "seed" => self.seed = parse(value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses a `key = value` file over the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| TrainError::ConfigParse { line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            cfg.set(k.trim(), v.trim()).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "learning_rate = {:?}", self.learning_rate)?;
        writeln!(f, "max_epochs = {}", self.max_epochs)?;
        writeln!(f, "patience = {}", self.patience)?;
        writeln!(f, "gradient_clip_norm = {:?}", self.gradient_clip_norm)?;
        writeln!(f, "num_elbo_samples = {}", self.num_elbo_samples)?;
        writeln!(f, "seed = {}", self.seed)
    }
}
