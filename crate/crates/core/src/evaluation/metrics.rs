use std::fmt;

/// Counts with anomalies as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_neg: usize,
    pub false_pos: usize,
    pub true_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_neg + self.false_pos + self.true_neg
    }

    /// Tallies verdicts (`true` = flagged anomalous) against labels.
    pub fn from_verdicts(verdicts: &[bool], labels: &[bool]) -> Self {
        let mut c = ConfusionCounts::default();
        for (&v, &l) in verdicts.iter().zip(labels) {
            match (l, v) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_neg += 1,
                (false, true) => c.false_pos += 1,
                (false, false) => c.true_neg += 1,
            }
        }
        c
    }

    /// Verdict `score < threshold` for each score.
    pub fn at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let verdicts: Vec<bool> = scores.iter().map(|&s| s < threshold).collect();
        Self::from_verdicts(&verdicts, labels)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Standard classification metrics; `None` marks a zero denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub accuracy: Option<f64>,
}

impl Metrics {
    pub const NAMES: [&'static str; 5] = ["sensitivity", "specificity", "ppv", "npv", "accuracy"];

    pub fn values(&self) -> [Option<f64>; 5] {
        [self.sensitivity, self.specificity, self.ppv, self.npv, self.accuracy]
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics {
        sensitivity: ratio(c.true_pos, c.true_pos + c.false_neg),
        specificity: ratio(c.true_neg, c.true_neg + c.false_pos),
        ppv: ratio(c.true_pos, c.true_pos + c.false_pos),
        npv: ratio(c.true_neg, c.true_neg + c.false_neg),
        accuracy: ratio(c.true_pos + c.true_neg, c.total()),
    }
}

/// Three-decimal rendering in the style `.972` / `1.0`; `-` when undefined.
pub fn format_metric(v: Option<f64>) -> String {
    match v {
        None => "-".to_string(),
        Some(x) => {
            let s = format!("{x:.3}");
            if s == "1.000" {
                "1.0".to_string()
            } else if let Some(rest) = s.strip_prefix("0.") {
                format!(".{rest}")
            } else {
                s
            }
        }
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Self::NAMES
            .iter()
            .zip(self.values())
            .map(|(n, v)| format!("{n} {}", format_metric(v)))
            .collect();
        f.write_str(&parts.join(", "))
    }
}
