//! End-to-end glue shared by the command-line tool and the acceptance
//! suite: corpus layout on disk, per-set scoring, threshold tables and
//! the final report.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::evaluation::{
    evaluate_split, localization, pick_threshold_online, split_halves, Criterion, EvalError, Localization,
    MetricsReport, ScoredSet, Threshold, HIT_PPV_WEIGHT,
};
use crate::scoring::{
    offline_scores, online_scores, OfflineConfig, OfflineKind, OfflineRecord, OnlineConfig, OnlineKind, OnlineRecord,
    ScoreError,
};
use crate::seqmodel::{ModelError, StornModel};
use crate::synthdata::{
    generate_anomalous, generate_normal, hit_window_steps, read_dataset, split_sizes, write_dataset, DataError, Dataset,
    HitSpec, LabeledSequence, TaskSpec, JOINTS,
};
use crate::trainer::{mix_seed, TrainError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Invalid(String),
}

/// How a corpus is synthesized.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub normal: usize,
    pub anomalous: usize,
    /// Seconds per sequence.
    pub duration: f64,
    pub hits_per_sequence: (usize, usize),
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { normal: 320, anomalous: 100, duration: 10.0, hits_per_sequence: (1, 3), seed: 0 }
    }
}

/// Anomaly-free training and validation sets, plus a test set holding the
/// held-out normal sequences followed by every anomalous one.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

const FILES: [&str; 3] = ["train.csv", "valid.csv", "test.csv"];

impl Corpus {
    pub fn generate(config: &CorpusConfig) -> Result<Self, PipelineError> {
        let task = TaskSpec { duration: config.duration, ..TaskSpec::with_pool_seed(mix_seed(config.seed, 0)) };
        let normal = generate_normal(&task, config.normal, mix_seed(config.seed, 1))?;
        let anomalous = if config.anomalous == 0 {
            Vec::new()
        } else {
            generate_anomalous(
                &task,
                &HitSpec::default(),
                config.anomalous,
                config.hits_per_sequence,
                mix_seed(config.seed, 2),
            )?
        };
        let (n_train, n_valid, _) = split_sizes(config.normal);
        let mut normal = normal.into_iter();
        let train: Vec<LabeledSequence> = normal.by_ref().take(n_train).collect();
        let valid: Vec<LabeledSequence> = normal.by_ref().take(n_valid).collect();
        let test: Vec<LabeledSequence> = normal.chain(anomalous).collect();
        let ds = |s| Dataset::new(JOINTS, task.rate, s);
        Ok(Corpus { train: ds(train), valid: ds(valid), test: ds(test) })
    }

    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(DataError::Io)?;
        for (name, ds) in FILES.iter().zip([&self.train, &self.valid, &self.test]) {
            write_dataset(&dir.join(name), ds)?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, PipelineError> {
        let [train, valid, test] = FILES.map(|name| read_dataset(&dir.join(name)));
        Ok(Corpus { train: train?, valid: valid?, test: test? })
    }
}

/// Stable identifier of the `i`-th sequence of a set.
pub fn sequence_id(i: usize) -> String {
    format!("seq{i:04}")
}

/// Seed used to score sequence `i` of a set under base `seed`.
pub fn sequence_seed(seed: u64, i: usize) -> u64 {
    mix_seed(seed, i as u64)
}

/// Applies the model's stored normalization, if any.
pub fn model_input(model: &StornModel, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ModelError> {
    match model.norm() {
        Some(norm) => norm.normalize(x),
        None => Ok(x.to_vec()),
    }
}

/// Off-line scores for every sequence, grouped by sequence then kind.
pub fn score_offline_set(
    model: &StornModel,
    data: &Dataset,
    config: &OfflineConfig,
    seed: u64,
) -> Result<Vec<OfflineRecord>, PipelineError> {
    let per_seq: Vec<[f64; 4]> = data
        .sequences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let x = model_input(model, &s.x)?;
            Ok::<_, PipelineError>(offline_scores(model, &x, config, sequence_seed(seed, i))?)
        })
        .collect::<Result<_, _>>()?;
    Ok(per_seq
        .iter()
        .enumerate()
        .flat_map(|(i, values)| {
            OfflineKind::ALL
                .iter()
                .zip(values)
                .map(move |(&kind, &value)| OfflineRecord { sequence_id: sequence_id(i), kind, value })
        })
        .collect())
}

/// On-line scores for every step of every sequence.
pub fn score_online_set(
    model: &StornModel,
    data: &Dataset,
    config: &OnlineConfig,
) -> Result<Vec<OnlineRecord>, PipelineError> {
    let per_seq: Vec<_> = data
        .sequences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let x = model_input(model, &s.x)?;
            let cfg = OnlineConfig { seed: sequence_seed(config.seed, i), ..*config };
            Ok::<_, PipelineError>(online_scores(model, &x, &cfg)?)
        })
        .collect::<Result<_, _>>()?;
    Ok(per_seq
        .into_iter()
        .enumerate()
        .flat_map(|(i, frames)| {
            frames.into_iter().map(move |frame| OnlineRecord { sequence_id: sequence_id(i), frame })
        })
        .collect())
}

fn index_of(id: &str, n: usize) -> Result<usize, PipelineError> {
    id.strip_prefix("seq")
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&i| i < n)
        .ok_or_else(|| PipelineError::Invalid(format!("unknown sequence id {id:?}")))
}

/// Off-line records arranged for [`evaluate_split`].
pub fn offline_scored_set(records: &[OfflineRecord], data: &Dataset) -> Result<ScoredSet, PipelineError> {
    let n = data.len();
    let mut columns: Vec<(String, Vec<f64>)> =
        OfflineKind::ALL.iter().map(|k| (k.name().to_string(), vec![f64::NAN; n])).collect();
    for r in records {
        let i = index_of(&r.sequence_id, n)?;
        let col = OfflineKind::ALL.iter().position(|&k| k == r.kind).expect("kind listed");
        columns[col].1[i] = r.value;
    }
    if let Some((name, _)) = columns.iter().find(|(_, v)| v.iter().any(|x| x.is_nan())) {
        return Err(PipelineError::Invalid(format!("missing {name} scores for some sequences")));
    }
    Ok(ScoredSet {
        ids: (0..n).map(sequence_id).collect(),
        labels: data.sequences.iter().map(|s| s.is_anomalous()).collect(),
        scores: columns,
    })
}

/// Per-sequence series of one on-line score kind.
pub fn online_series(records: &[OnlineRecord], data: &Dataset, kind: OnlineKind) -> Result<Vec<Vec<f64>>, PipelineError> {
    let mut out: Vec<Vec<f64>> = data.sequences.iter().map(|s| vec![f64::NAN; s.len()]).collect();
    for r in records {
        let i = index_of(&r.sequence_id, data.len())?;
        let slot = out[i]
            .get_mut(r.frame.t)
            .ok_or_else(|| PipelineError::Invalid(format!("{}: step {} out of range", r.sequence_id, r.frame.t)))?;
        *slot = r.frame.get(kind);
    }
    if out.iter().flatten().any(|v| v.is_nan()) {
        return Err(PipelineError::Invalid(format!("missing {kind} scores for some steps")));
    }
    Ok(out)
}

/// The twelve on-line thresholds, in (score kind, criterion) order.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdTable {
    pub entries: Vec<(OnlineKind, Threshold)>,
}

const THRESHOLD_HEADER: &str = "score_kind,criterion,value,objective";

impl ThresholdTable {
    pub fn get(&self, kind: OnlineKind, criterion: Criterion) -> Option<&Threshold> {
        self.entries.iter().find(|(k, t)| *k == kind && t.criterion == criterion).map(|(_, t)| t)
    }

    /// Verdict bits for one frame, `true` = anomalous, in table order.
    pub fn verdicts(&self, frame: &crate::scoring::OnlineFrame) -> Vec<bool> {
        self.entries.iter().map(|(k, t)| t.is_anomalous(frame.get(*k))).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{THRESHOLD_HEADER}\n");
        for (k, t) in &self.entries {
            writeln!(out, "{k},{},{:?},{:?}", t.criterion, t.value, t.objective).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, PipelineError> {
        let bad = |line: usize, m: &str| PipelineError::Invalid(format!("thresholds line {line}: {m}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(THRESHOLD_HEADER) {
            return Err(bad(1, "missing header"));
        }
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate().map(|(i, l)| (i + 2, l)) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad(n, "expected 4 fields"));
            }
            let kind: OnlineKind = f[0].parse().map_err(|e: ScoreError| bad(n, &e.to_string()))?;
            let criterion: Criterion = f[1].parse().map_err(|e: EvalError| bad(n, &e.to_string()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("bad number {s:?}")));
            entries.push((kind, Threshold { value: num(f[2])?, criterion, objective: num(f[3])? }));
        }
        for kind in OnlineKind::ALL {
            for c in Criterion::ONLINE {
                if entries.iter().filter(|(k, t)| *k == kind && t.criterion == c).count() != 1 {
                    return Err(PipelineError::Invalid(format!("thresholds need exactly one {kind}/{c} row")));
                }
            }
        }
        entries.sort_by_key(|(k, t)| (*k, Criterion::ONLINE.iter().position(|c| *c == t.criterion)));
        Ok(ThresholdTable { entries })
    }
}

fn gather<T: Copy>(rows: &[Vec<T>], idx: &[usize]) -> Vec<T> {
    idx.iter().flat_map(|&i| rows[i].iter().copied()).collect()
}

/// Fits all on-line thresholds on the sequences listed in `fit`.
pub fn fit_online_thresholds(
    records: &[OnlineRecord],
    data: &Dataset,
    fit: &[usize],
) -> Result<ThresholdTable, PipelineError> {
    let torque: Vec<Vec<bool>> = data.sequences.iter().map(|s| s.label_torque_proxy.clone()).collect();
    let hit: Vec<Vec<bool>> = data.sequences.iter().map(|s| s.label_hit_window.clone()).collect();
    let (torque, hit) = (gather(&torque, fit), gather(&hit, fit));
    let mut entries = Vec::with_capacity(12);
    for kind in OnlineKind::ALL {
        let scores = gather(&online_series(records, data, kind)?, fit);
        for c in Criterion::ONLINE {
            entries.push((kind, pick_threshold_online(&scores, &torque, &hit, c, HIT_PPV_WEIGHT)?));
        }
    }
    Ok(ThresholdTable { entries })
}

/// Hit-window coverage of one on-line score on the sequences in `test`.
pub fn online_localization(
    records: &[OnlineRecord],
    data: &Dataset,
    test: &[usize],
    kind: OnlineKind,
    threshold: &Threshold,
) -> Result<Localization, PipelineError> {
    let series = online_series(records, data, kind)?;
    let verdicts: Vec<Vec<bool>> =
        test.iter().map(|&i| series[i].iter().map(|&s| threshold.is_anomalous(s)).collect()).collect();
    let hits: Vec<Vec<usize>> = test.iter().map(|&i| data.sequences[i].hit_commands.clone()).collect();
    let labels: Vec<Vec<bool>> = test.iter().map(|&i| data.sequences[i].label_hit_window.clone()).collect();
    Ok(localization(&verdicts, &hits, &labels, hit_window_steps(1.0 / data.rate)))
}

/// Off-line metrics plus on-line localization for every threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub offline: Option<MetricsReport>,
    pub online: Vec<(OnlineKind, Criterion, Localization)>,
}

impl Report {
    pub fn localization_csv(&self) -> String {
        let mut out = String::from("score_kind,criterion,windows,detected,detection_rate,false_alarm_rate\n");
        for (k, c, l) in &self.online {
            writeln!(out, "{k},{c},{},{},{:.4},{:.4}", l.windows, l.detected, l.detection_rate(), l.false_alarm_rate)
                .unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(off) = &self.offline {
            out.push_str(&off.to_table());
            out.push('\n');
        }
        if !self.online.is_empty() {
            writeln!(out, "{:<16}{:<20}{:>9}{:>13}", "score", "criterion", "detected", "false alarms").unwrap();
            for (k, c, l) in &self.online {
                writeln!(
                    out,
                    "{:<16}{:<20}{:>9.3}{:>13.4}",
                    k.name(),
                    c.name(),
                    l.detection_rate(),
                    l.false_alarm_rate
                )
                .unwrap();
            }
        }
        out
    }
}

/// Seeded halves of `data` by anomaly label.
pub fn halves(data: &Dataset, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let labels: Vec<bool> = data.sequences.iter().map(|s| s.is_anomalous()).collect();
    split_halves(&labels, seed)
}

/// Fits on one half and reports on the other.
pub fn evaluate(
    data: &Dataset,
    offline: Option<&[OfflineRecord]>,
    online: Option<&[OnlineRecord]>,
    seed: u64,
) -> Result<Report, PipelineError> {
    let (fit, test) = halves(data, seed);
    let offline = match offline {
        Some(records) => Some(evaluate_split(&offline_scored_set(records, data)?, &fit, &test)?),
        None => None,
    };
    let mut rows = Vec::new();
    if let Some(records) = online {
        let table = fit_online_thresholds(records, data, &fit)?;
        for (kind, th) in &table.entries {
            rows.push((*kind, th.criterion, online_localization(records, data, &test, *kind, th)?));
        }
    }
    Ok(Report { offline, online: rows })
}
