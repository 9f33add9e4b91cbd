use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::array::Array;
use super::GraphError;

/// Flat set of named parameter arrays.
///
/// Names are unique and the shape of an entry never changes after insertion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    entries: BTreeMap<String, Array>,
    rng_seed: u64,
}

impl ParameterStore {
    pub fn new(rng_seed: u64) -> Self {
        ParameterStore { entries: BTreeMap::new(), rng_seed }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) -> Result<(), GraphError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(GraphError::DuplicateParameter(name));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    /// Adds an entry with i.i.d. `N(0, std²)` values drawn from `rng`.
    pub fn insert_normal(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        std: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), GraphError> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        self.insert(name, Array::new(shape.to_vec(), data))
    }

    pub fn get(&self, name: &str) -> Option<&Array> {
        self.entries.get(name)
    }

    /// Mutable view of an entry's values; the shape stays fixed.
    pub fn values_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.entries.get_mut(name).map(|a| a.data_mut())
    }

    /// Replaces an entry's values. The new array must have the same shape.
    pub fn set(&mut self, name: &str, value: Array) -> Result<(), GraphError> {
        let slot = self
            .entries
            .get_mut(name)
            .ok_or_else(|| GraphError::UnknownParameter(name.to_string()))?;
        if slot.shape() != value.shape() {
            return Err(GraphError::BindShape {
                name: name.to_string(),
                expected: slot.shape().to_vec(),
                got: value.shape().to_vec(),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.entries.values().map(Array::len).sum()
    }

    /// Euclidean norm over all entries.
    pub fn global_norm(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|a| a.data().iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

pub const CHECKPOINT_MAGIC: &str = "storn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A parameter store together with free-form hyperparameters, as written to
/// and read from a checkpoint file.
///
/// Layout (one item per line, LF endings):
///
/// ```text
/// storn-checkpoint 1
/// seed <u64>
/// hyper <key> <value>
/// param <name> <d0>x<d1>...      (or "scalar")
/// <row-major values separated by single spaces>
/// end
/// ```
///
/// Values are written with the shortest representation that parses back to
/// the same double, so a write/read round trip is bit-exact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub hyper: BTreeMap<String, String>,
    pub store: ParameterStore,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}").unwrap();
        writeln!(out, "seed {}", self.store.rng_seed()).unwrap();
        for (k, v) in &self.hyper {
            writeln!(out, "hyper {k} {v}").unwrap();
        }
        for (name, arr) in self.store.iter() {
            let shape = if arr.shape().is_empty() {
                "scalar".to_string()
            } else {
                arr.shape().iter().map(usize::to_string).collect::<Vec<_>>().join("x")
            };
            writeln!(out, "param {name} {shape}").unwrap();
            out.push_str(&format_values(arr.data()));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let err = |line: usize, msg: &str| GraphError::Checkpoint { line, message: msg.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (n, header) = lines.next().ok_or_else(|| err(1, "empty checkpoint"))?;
        let mut parts = header.split(' ');
        if parts.next() != Some(CHECKPOINT_MAGIC) {
            return Err(err(n, "missing checkpoint header"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(n, "bad format version"))?;
        if version != CHECKPOINT_VERSION {
            return Err(err(n, &format!("unsupported format version {version}")));
        }

        let (n, seed_line) = lines.next().ok_or_else(|| err(2, "missing seed line"))?;
        let seed = seed_line
            .strip_prefix("seed ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(n, "bad seed line"))?;

        let mut ck = Checkpoint { hyper: BTreeMap::new(), store: ParameterStore::new(seed) };
        let mut saw_end = false;
        while let Some((n, line)) = lines.next() {
            if line == "end" {
                saw_end = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("hyper ") {
                let (k, v) = rest.split_once(' ').ok_or_else(|| err(n, "bad hyper line"))?;
                ck.hyper.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("param ") {
                let (name, shape_s) = rest.split_once(' ').ok_or_else(|| err(n, "bad param line"))?;
                let shape: Vec<usize> = if shape_s == "scalar" {
                    Vec::new()
                } else {
                    shape_s
                        .split('x')
                        .map(|d| d.parse().map_err(|_| err(n, "bad shape")))
                        .collect::<Result<_, _>>()?
                };
                let (vn, values_line) = lines.next().ok_or_else(|| err(n + 1, "missing values"))?;
                let values = parse_values(values_line).map_err(|m| err(vn, &m))?;
                let expected: usize = shape.iter().product();
                if values.len() != expected {
                    return Err(err(vn, &format!("expected {expected} values, found {}", values.len())));
                }
                ck.store
                    .insert(name, Array::new(shape, values))
                    .map_err(|e| err(n, &e.to_string()))?;
            } else {
                return Err(err(n, "unrecognized line"));
            }
        }
        if !saw_end {
            return Err(err(text.lines().count(), "truncated checkpoint (no end marker)"));
        }
        Ok(ck)
    }
}

pub(crate) fn format_values(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:?}").unwrap();
    }
    s
}

pub(crate) fn parse_values(line: &str) -> Result<Vec<f64>, String> {
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(' ')
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn names_are_unique() {
        let mut s = ParameterStore::new(0);
        s.insert("w", Array::zeros(&[2])).unwrap();
        assert!(matches!(s.insert("w", Array::zeros(&[2])), Err(GraphError::DuplicateParameter(_))));
    }

    #[test]
    fn set_rejects_shape_change() {
        let mut s = ParameterStore::new(0);
        s.insert("w", Array::zeros(&[2, 3])).unwrap();
        assert!(s.set("w", Array::zeros(&[3, 2])).is_err());
        assert!(s.set("w", Array::filled(&[2, 3], 1.0)).is_ok());
    }

    #[test]
    fn checkpoint_round_trip_random_store() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = ParameterStore::new(99);
        s.insert_normal("a.w", &[4, 3], 1.0, &mut rng).unwrap();
        s.insert_normal("b", &[5], 1e-300, &mut rng).unwrap();
        s.insert("c", Array::scalar(-0.0)).unwrap();
        let mut ck = Checkpoint { hyper: BTreeMap::new(), store: s };
        ck.hyper.insert("x_dim".into(), "7".into());
        let text = ck.to_text();
        let back = Checkpoint::from_text(&text).unwrap();
        for ((na, a), (nb, b)) in ck.store.iter().zip(back.store.iter()) {
            assert_eq!(na, nb);
            let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(back.hyper, ck.hyper);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let mut s = ParameterStore::new(1);
        s.insert("w", Array::vector(vec![1.0, 2.0])).unwrap();
        let text = Checkpoint { hyper: BTreeMap::new(), store: s }.to_text();
        let cut = text.replace("end\n", "");
        assert!(Checkpoint::from_text(&cut).is_err());
        let bad = text.replace("1.0 2.0", "1.0");
        match Checkpoint::from_text(&bad) {
            Err(GraphError::Checkpoint { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn values_round_trip_bit_exact(bits in proptest::collection::vec(any::<u64>(), 0..40)) {
            let values: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).filter(|v| v.is_finite()).collect();
            let back = parse_values(&format_values(&values)).unwrap();
            let a: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
