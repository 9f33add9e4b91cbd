use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DataError, LabeledSequence};

/// A set of labeled sequences sharing dimension and sampling rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x_dim: usize,
    pub rate: f64,
    pub sequences: Vec<LabeledSequence>,
}

impl Dataset {
    pub fn new(x_dim: usize, rate: f64, sequences: Vec<LabeledSequence>) -> Self {
        Dataset { x_dim, rate, sequences }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Positions only.
    pub fn inputs(&self) -> Vec<Vec<Vec<f64>>> {
        self.sequences.iter().map(|s| s.x.clone()).collect()
    }

    /// Text form:
    ///
    /// ```text
    /// <n_sequences>,<x_dim>,<rate>
    /// <T>,<hit>;<hit>;...          one per sequence, then T lines of
    /// <x_1>,...,<x_D>,<hit_window>,<torque>
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{},{},{:?}", self.sequences.len(), self.x_dim, self.rate);
        for seq in &self.sequences {
            let hits: Vec<String> = seq.hit_commands.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(s, "{},{}", seq.len(), hits.join(";"));
            for t in 0..seq.len() {
                for v in &seq.x[t] {
                    let _ = write!(s, "{v:?},");
                }
                let _ = writeln!(
                    s,
                    "{},{}",
                    u8::from(seq.label_hit_window[t]),
                    u8::from(seq.label_torque_proxy[t])
                );
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, DataError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| DataError::Parse { line, message };
        let (ln, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let h: Vec<&str> = header.split(',').collect();
        if h.len() != 3 {
            return Err(err(ln, format!("header needs 3 fields, found {}", h.len())));
        }
        let n: usize = h[0].trim().parse().map_err(|_| err(ln, format!("bad sequence count {:?}", h[0])))?;
        let x_dim: usize = h[1].trim().parse().map_err(|_| err(ln, format!("bad dimension {:?}", h[1])))?;
        let rate: f64 = h[2].trim().parse().map_err(|_| err(ln, format!("bad rate {:?}", h[2])))?;
        if !(rate > 0.0) || x_dim == 0 {
            return Err(err(ln, "rate and dimension must be positive".into()));
        }
        let dt = 1.0 / rate;
        let mut sequences = Vec::with_capacity(n);
        for k in 0..n {
            let (ln, meta) = lines.next().ok_or_else(|| err(ln + 1, format!("missing sequence {k}")))?;
            let (len, hits) = meta.split_once(',').ok_or_else(|| err(ln, "expected <T>,<hits>".into()))?;
            let len: usize = len.trim().parse().map_err(|_| err(ln, format!("bad length {len:?}")))?;
            let hit_commands = hits
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    let h: usize = s.trim().parse().map_err(|_| err(ln, format!("bad hit index {s:?}")))?;
                    if h >= len {
                        return Err(err(ln, format!("hit index {h} beyond length {len}")));
                    }
                    Ok(h)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut seq = LabeledSequence {
                x: Vec::with_capacity(len),
                dt,
                hit_commands,
                label_hit_window: Vec::with_capacity(len),
                label_torque_proxy: Vec::with_capacity(len),
            };
            for _ in 0..len {
                let (ln, row) = lines.next().ok_or_else(|| err(ln + 1, "unexpected end of file".into()))?;
                let fields: Vec<&str> = row.split(',').collect();
                if fields.len() != x_dim + 2 {
                    return Err(err(ln, format!("expected {} fields, found {}", x_dim + 2, fields.len())));
                }
                let x = fields[..x_dim]
                    .iter()
                    .map(|f| match f.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(v),
                        _ => Err(err(ln, format!("bad value {f:?}"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let bit = |f: &str| match f.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(err(ln, format!("bad label {other:?}"))),
                };
                seq.x.push(x);
                seq.label_hit_window.push(bit(fields[x_dim])?);
                seq.label_torque_proxy.push(bit(fields[x_dim + 1])?);
            }
            sequences.push(seq);
        }
        if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(ln, format!("trailing content {extra:?}")));
        }
        Ok(Dataset { x_dim, rate, sequences })
    }
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), DataError> {
    fs::write(path, data.to_text())?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, DataError> {
    Dataset::from_text(&fs::read_to_string(path)?)
}
