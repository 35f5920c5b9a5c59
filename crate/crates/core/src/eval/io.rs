//! JSON-lines datasets and CSV score tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::scoring::{Metric, ScoreRow};
use super::{EvalError, TrajectoryRecord};

/// Parses one record per non-blank line; errors name the 1-based line number.
pub fn read_dataset_str(text: &str) -> Result<Vec<TrajectoryRecord>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<TrajectoryRecord>, EvalError> {
    read_dataset_str(&fs::read_to_string(path)?)
}

/// Writes one compact JSON record per line. Floats use the shortest text that parses
/// back to the same value, so a reread dataset is bit-identical.
pub fn write_records(path: &Path, records: &[TrajectoryRecord]) -> Result<(), EvalError> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| EvalError::Invalid(e.to_string()))?;
        out.push(b'\n');
    }
    write_file(path, &out)
}

pub fn write_dataset(path: &Path, dataset: &super::Dataset) -> Result<(), EvalError> {
    write_records(path, &dataset.records)
}

/// Creates parent directories as needed.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), EvalError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub const SCORE_HEADER: &str = "scenario,traj_id,frame,metric,value,label";

fn check_field(s: &str) -> Result<&str, EvalError> {
    if s.contains([',', '"', '\n', '\r']) {
        return Err(EvalError::Invalid(format!(
            "{s:?} cannot be written to CSV unquoted"
        )));
    }
    Ok(s)
}

pub fn format_score_row(r: &ScoreRow) -> Result<String, EvalError> {
    Ok(format!(
        "{},{},{},{},{},{}\n",
        check_field(&r.scenario)?,
        check_field(&r.traj_id)?,
        r.frame,
        r.metric,
        r.value,
        u8::from(r.label)
    ))
}

/// Parses a score table written by [`format_score_row`]. A final line without its
/// newline is treated as an interrupted write and ignored.
pub fn parse_score_csv(text: &str) -> Result<Vec<ScoreRow>, EvalError> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut rows = Vec::new();
    for (i, line) in complete.lines().enumerate() {
        let err = |msg: String| EvalError::Parse { line: i + 1, msg };
        if line.trim().is_empty() || (i == 0 && line == SCORE_HEADER) {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        rows.push(ScoreRow {
            scenario: f[0].to_string(),
            traj_id: f[1].to_string(),
            frame: f[2].parse().map_err(|e| err(format!("frame: {e}")))?,
            metric: f[3].parse::<Metric>().map_err(err)?,
            value: f[4].parse().map_err(|e| err(format!("value: {e}")))?,
            label: match f[5] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("label must be 0 or 1, got {other:?}"))),
            },
        });
    }
    Ok(rows)
}
