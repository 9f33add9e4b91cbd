use std::fmt::Write;

use super::{OfflineKind, OnlineFrame, ScoreError};

pub const OFFLINE_HEADER: &str = "sequence_id,score_kind,value";
pub const ONLINE_HEADER: &str = "sequence_id,t,bound,bound_smoothed,bound_diff,grad_magnitude";

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineRecord {
    pub sequence_id: String,
    pub kind: OfflineKind,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineRecord {
    pub sequence_id: String,
    pub frame: OnlineFrame,
}

pub fn offline_csv(records: &[OfflineRecord]) -> String {
    let mut out = format!("{OFFLINE_HEADER}\n");
    for r in records {
        writeln!(out, "{},{},{:?}", r.sequence_id, r.kind, r.value).unwrap();
    }
    out
}

pub fn online_csv(records: &[OnlineRecord]) -> String {
    let mut out = format!("{ONLINE_HEADER}\n");
    for r in records {
        let f = &r.frame;
        writeln!(out, "{},{},{:?},{:?},{:?},{:?}", r.sequence_id, f.t, f.bound, f.smoothed, f.diff, f.grad).unwrap();
    }
    out
}

fn rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>, ScoreError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(ScoreError::Parse { line: 1, message: format!("expected header '{header}'") }),
    }
    Ok(lines.filter(|(_, l)| !l.trim().is_empty()).map(|(n, l)| (n, l.split(',').map(str::trim).collect())))
}

fn number<T: std::str::FromStr>(field: &str, line: usize) -> Result<T, ScoreError> {
    field.parse().map_err(|_| ScoreError::Parse { line, message: format!("bad number '{field}'") })
}

fn width(fields: &[&str], n: usize, line: usize) -> Result<(), ScoreError> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(ScoreError::Parse { line, message: format!("expected {n} fields, got {}", fields.len()) })
    }
}

pub fn parse_offline_csv(text: &str) -> Result<Vec<OfflineRecord>, ScoreError> {
    rows(text, OFFLINE_HEADER)?
        .map(|(line, f)| {
            width(&f, 3, line)?;
            let kind = f[1].parse().map_err(|e: ScoreError| ScoreError::Parse { line, message: e.to_string() })?;
            Ok(OfflineRecord { sequence_id: f[0].to_string(), kind, value: number(f[2], line)? })
        })
        .collect()
}

pub fn parse_online_csv(text: &str) -> Result<Vec<OnlineRecord>, ScoreError> {
    rows(text, ONLINE_HEADER)?
        .map(|(line, f)| {
            width(&f, 6, line)?;
            Ok(OnlineRecord {
                sequence_id: f[0].to_string(),
                frame: OnlineFrame {
                    t: number(f[1], line)?,
                    bound: number(f[2], line)?,
                    smoothed: number(f[3], line)?,
                    diff: number(f[4], line)?,
                    grad: number(f[5], line)?,
                },
            })
        })
        .collect()
}
