use std::fmt;
use std::str::FromStr;

use super::roc::{check_inputs, class_sizes, sweep, RocCurve};
use super::EvalError;

/// Weight of the hit-window PPV term in [`Criterion::SensSpecPpvHit`].
pub const HIT_PPV_WEIGHT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// Off-line: the ROC point nearest `(fpr, tpr) = (0, 1)`.
    TopLeft,
    /// On-line 1: maximize `sens² + spec²` on torque labels.
    SensSpec,
    /// On-line 2: criterion 1 plus torque PPV.
    SensSpecPpv,
    /// On-line 3: criterion 2 plus weighted hit-window PPV.
    SensSpecPpvHit,
}

impl Criterion {
    pub const ONLINE: [Criterion; 3] = [Criterion::SensSpec, Criterion::SensSpecPpv, Criterion::SensSpecPpvHit];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::TopLeft => "topleft",
            Criterion::SensSpec => "sens_spec",
            Criterion::SensSpecPpv => "sens_spec_ppv",
            Criterion::SensSpecPpvHit => "sens_spec_ppv_hit",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Criterion::TopLeft, Criterion::SensSpec, Criterion::SensSpecPpv, Criterion::SensSpecPpvHit]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| EvalError::Parse(format!("unknown criterion {s:?}")))
    }
}

/// Decision rule: anomaly iff `score < value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub criterion: Criterion,
    /// Value of the criterion's objective at the chosen point.
    pub objective: f64,
}

impl Threshold {
    pub fn is_anomalous(&self, score: f64) -> bool {
        score < self.value
    }
}

/// Point of `roc` minimizing `(1 − sens)² + (1 − spec)²`; ties go to higher
/// specificity, then lower threshold.
pub fn pick_threshold_topleft(roc: &RocCurve) -> Threshold {
    let dist = |p: &super::RocPoint| (1.0 - p.sensitivity).powi(2) + (1.0 - p.specificity).powi(2);
    let best = roc
        .points
        .iter()
        .min_by(|a, b| {
            dist(a)
                .total_cmp(&dist(b))
                .then(b.specificity.total_cmp(&a.specificity))
                .then(a.threshold.total_cmp(&b.threshold))
        })
        .expect("curve has endpoints");
    Threshold { value: best.threshold, criterion: Criterion::TopLeft, objective: dist(best) }
}

/// Exhaustive search over candidate thresholds for an on-line criterion.
/// Undefined PPVs count as zero. Ties go to higher torque specificity,
/// then lower threshold.
pub fn pick_threshold_online(
    scores: &[f64],
    torque: &[bool],
    hit: &[bool],
    criterion: Criterion,
    hit_weight: f64,
) -> Result<Threshold, EvalError> {
    check_inputs(scores, torque)?;
    if criterion == Criterion::TopLeft {
        return Err(EvalError::Parse("topleft is an off-line criterion".into()));
    }
    let use_hit = criterion == Criterion::SensSpecPpvHit;
    if use_hit {
        check_inputs(scores, hit)?;
    }
    let (p, n) = class_sizes(torque);
    let (thresholds, torque_counts) = sweep(scores, torque);
    let hit_counts = if use_hit { Some(sweep(scores, hit).1) } else { None };
    let ppv = |tp: usize, fp: usize| if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };

    let mut best: Option<(f64, f64, f64)> = None; // (objective, spec, threshold)
    for (k, &th) in thresholds.iter().enumerate() {
        let (tp, fp) = torque_counts[k];
        let sens = tp as f64 / p as f64;
        let spec = 1.0 - fp as f64 / n as f64;
        let mut obj = sens * sens + spec * spec;
        if criterion != Criterion::SensSpec {
            obj += ppv(tp, fp);
        }
        if let Some(hc) = &hit_counts {
            let (htp, hfp) = hc[k];
            obj += hit_weight * ppv(htp, hfp);
        }
        let better = match best {
            None => true,
            Some((bo, bs, _)) => obj > bo || (obj == bo && spec > bs),
        };
        if better {
            best = Some((obj, spec, th));
        }
    }
    let (objective, _, value) = best.expect("at least two candidates");
    Ok(Threshold { value, criterion, objective })
}
