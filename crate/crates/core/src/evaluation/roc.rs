use super::EvalError;

/// One operating point: verdict `score < threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl RocPoint {
    pub fn fpr(&self) -> f64 {
        1.0 - self.specificity
    }
}

/// Points ordered by increasing threshold, from `-inf` (nothing flagged)
/// to `+inf` (everything flagged).
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// `threshold,fpr,tpr` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            s.push_str(&format!("{:?},{:?},{:?}\n", p.threshold, p.fpr(), p.sensitivity));
        }
        s
    }
}

fn between(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m > a && m <= b {
        m
    } else {
        b
    }
}

/// Candidate thresholds: `-inf`, midpoints between consecutive distinct
/// scores, `+inf`. Each yields a distinct classifier.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut out = Vec::with_capacity(s.len() + 1);
    out.push(f64::NEG_INFINITY);
    out.extend(s.windows(2).map(|w| between(w[0], w[1])));
    out.push(f64::INFINITY);
    out
}

/// Counts `(flagged positives, flagged negatives)` at each candidate, by a
/// single sweep over the sorted scores.
pub(crate) fn sweep(scores: &[f64], labels: &[bool]) -> (Vec<f64>, Vec<(usize, usize)>) {
    let thresholds = candidate_thresholds(scores);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut counts = Vec::with_capacity(thresholds.len());
    let (mut pos, mut neg, mut k) = (0, 0, 0);
    for &th in &thresholds {
        while k < order.len() && scores[order[k]] < th {
            if labels[order[k]] {
                pos += 1;
            } else {
                neg += 1;
            }
            k += 1;
        }
        counts.push((pos, neg));
    }
    (thresholds, counts)
}

pub(crate) fn class_sizes(labels: &[bool]) -> (usize, usize) {
    let p = labels.iter().filter(|&&l| l).count();
    (p, labels.len() - p)
}

/// ROC of normality scores against anomaly labels (`true` = anomalous).
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve, EvalError> {
    check_inputs(scores, labels)?;
    let (p, n) = class_sizes(labels);
    let (thresholds, counts) = sweep(scores, labels);
    let points: Vec<RocPoint> = thresholds
        .iter()
        .zip(&counts)
        .map(|(&threshold, &(tp, fp))| RocPoint {
            threshold,
            sensitivity: tp as f64 / p as f64,
            specificity: 1.0 - fp as f64 / n as f64,
        })
        .collect();
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr() - w[0].fpr()) * (w[1].sensitivity + w[0].sensitivity) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

pub(crate) fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let (p, n) = class_sizes(labels);
    if p == 0 || n == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok(())
}
