//! Score-to-verdict conversion: confusion metrics, ROC curves, threshold
//! selection and split-based evaluation.

mod metrics;
mod roc;
mod thresholds;

pub use metrics::{format_metric, metrics, ConfusionCounts, Metrics};
pub use roc::{candidate_thresholds, roc, RocCurve, RocPoint};
pub use thresholds::{pick_threshold_online, pick_threshold_topleft, Criterion, Threshold, HIT_PPV_WEIGHT};

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("labels contain a single class; need both anomalous and normal examples")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFinite(usize),
    #[error("sequence {0:?} appears in both the fitting and the test half")]
    Leakage(String),
    #[error("{0}")]
    Parse(String),
}

/// Per-sequence scores of several kinds with anomaly labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSet {
    pub ids: Vec<String>,
    /// `true` = anomalous sequence.
    pub labels: Vec<bool>,
    /// `(score kind, one value per sequence)`.
    pub scores: Vec<(String, Vec<f64>)>,
}

/// Seeded split into two halves, stratified by label.
pub fn split_halves(labels: &[bool], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fit, mut test) = (Vec::new(), Vec::new());
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let half = idx.len().div_ceil(2);
        fit.extend_from_slice(&idx[..half]);
        test.extend_from_slice(&idx[half..]);
    }
    fit.sort_unstable();
    test.sort_unstable();
    (fit, test)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub score: String,
    pub threshold: f64,
    pub fit_auc: f64,
    pub test_auc: f64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("score,threshold,fit_auc,test_auc,tp,fn,fp,tn");
        for n in Metrics::NAMES {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for r in &self.rows {
            let c = &r.counts;
            let _ = write!(
                s,
                "{},{:?},{:?},{:?},{},{},{},{}",
                r.score, r.threshold, r.fit_auc, r.test_auc, c.true_pos, c.false_neg, c.false_pos, c.true_neg
            );
            for v in r.metrics.values() {
                match v {
                    Some(x) => {
                        let _ = write!(s, ",{x:?}");
                    }
                    None => s.push_str(",undefined"),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Confusion counts and metrics side by side, one column per score.
    pub fn to_table(&self) -> String {
        let w = 12;
        let mut s = format!("{:<14}", "");
        for r in &self.rows {
            let _ = write!(s, "{:>w$}", r.score);
        }
        s.push('\n');
        let mut line = |label: &str, f: &dyn Fn(&ReportRow) -> String| {
            let _ = write!(s, "{label:<14}");
            for r in &self.rows {
                let _ = write!(s, "{:>w$}", f(r));
            }
            s.push('\n');
        };
        line("TP", &|r| r.counts.true_pos.to_string());
        line("FP", &|r| r.counts.false_pos.to_string());
        line("FN", &|r| r.counts.false_neg.to_string());
        line("TN", &|r| r.counts.true_neg.to_string());
        for (i, n) in Metrics::NAMES.iter().enumerate() {
            line(n, &|r| format_metric(r.metrics.values()[i]));
        }
        line("AUC (test)", &|r| format!("{:.3}", r.test_auc));
        s
    }
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Fits top-left thresholds on `fit` and reports metrics on `test` only.
pub fn evaluate_split(set: &ScoredSet, fit: &[usize], test: &[usize]) -> Result<MetricsReport, EvalError> {
    let fit_ids: HashSet<&str> = fit.iter().map(|&i| set.ids[i].as_str()).collect();
    if let Some(&i) = test.iter().find(|&&i| fit_ids.contains(set.ids[i].as_str())) {
        return Err(EvalError::Leakage(set.ids[i].clone()));
    }
    let fit_labels = pick(&set.labels, fit);
    let test_labels = pick(&set.labels, test);
    let mut rows = Vec::with_capacity(set.scores.len());
    for (name, values) in &set.scores {
        if values.len() != set.labels.len() {
            return Err(EvalError::LengthMismatch { scores: values.len(), labels: set.labels.len() });
        }
        let fit_scores = pick(values, fit);
        let test_scores = pick(values, test);
        let fit_roc = roc(&fit_scores, &fit_labels)?;
        let test_roc = roc(&test_scores, &test_labels)?;
        let th = pick_threshold_topleft(&fit_roc);
        let counts = ConfusionCounts::at_threshold(&test_scores, &test_labels, th.value);
        rows.push(ReportRow {
            score: name.clone(),
            threshold: th.value,
            fit_auc: fit_roc.auc,
            test_auc: test_roc.auc,
            counts,
            metrics: metrics(&counts),
        });
    }
    Ok(MetricsReport { rows })
}

/// How well per-step verdicts cover injected hits.
#[derive(Clone, Debug, PartialEq)]
pub struct Localization {
    pub windows: usize,
    pub detected: usize,
    /// Mean over sequences of flagged / unflagged-label steps.
    pub false_alarm_rate: f64,
    pub max_false_alarm_rate: f64,
}

impl Localization {
    pub fn detection_rate(&self) -> f64 {
        if self.windows == 0 {
            0.0
        } else {
            self.detected as f64 / self.windows as f64
        }
    }
}

/// A hit window `[h, h + window)` counts as detected if any verdict inside
/// it is anomalous. False alarms are anomalous verdicts on steps whose
/// window label is false.
pub fn localization(
    verdicts: &[Vec<bool>],
    hit_commands: &[Vec<usize>],
    window_labels: &[Vec<bool>],
    window: usize,
) -> Localization {
    let (mut windows, mut detected) = (0, 0);
    let mut rates = Vec::new();
    for ((v, hits), labels) in verdicts.iter().zip(hit_commands).zip(window_labels) {
        for &h in hits {
            windows += 1;
            let end = (h + window).min(v.len());
            if v[h.min(end)..end].iter().any(|&b| b) {
                detected += 1;
            }
        }
        let normal = labels.iter().filter(|&&l| !l).count();
        if normal > 0 {
            let alarms = v.iter().zip(labels).filter(|&(&b, &l)| b && !l).count();
            rates.push(alarms as f64 / normal as f64);
        }
    }
    let mean = if rates.is_empty() { 0.0 } else { rates.iter().sum::<f64>() / rates.len() as f64 };
    Localization {
        windows,
        detected,
        false_alarm_rate: mean,
        max_false_alarm_rate: rates.iter().copied().fold(0.0, f64::max),
    }
}
