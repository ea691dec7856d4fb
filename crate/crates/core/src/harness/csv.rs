use std::fmt::Write as _;
use std::str::FromStr;

use super::{Summary, TrialReport};
use crate::error::{Error, Result};

pub const TRIALS_HEADER: &str =
    "trial,map,strategy,seed,start_x,start_y,start_heading,success,path_length,final_ratio,decisions,error";
pub const CURVES_HEADER: &str = "trial,decision,path_length,explored_ratio";
pub const TRAJECTORIES_HEADER: &str = "trial,point,x,y,decision";
pub const DECISIONS_HEADER: &str =
    "trial,decision,x,y,heading,frontier_x,frontier_y,cloud_points,frontier_points,status";
pub const SUMMARY_HEADER: &str = "strategy,trials,succeeded,failed,mean,min,variance";

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Keeps free text inside one unquoted field.
fn field(s: &str) -> String {
    s.replace([',', '\n', '\r', '"'], " ")
}

pub fn write_trials_csv(report: &TrialReport) -> String {
    let mut out = format!("{TRIALS_HEADER}\n");
    for r in &report.records {
        let _ = write!(out, "{},{},{},{},", r.trial, field(&r.map), report.strategy, r.seed);
        let _ = match &r.outcome {
            Ok(m) => writeln!(
                out,
                "{:.6},{:.6},{:.6},{},{:.6},{:.6},{},",
                m.start.x,
                m.start.y,
                m.start.heading,
                m.success,
                m.path_length_at_done,
                m.final_ratio,
                m.decisions.len()
            ),
            Err(e) => writeln!(out, ",,,false,,,,{}", field(e)),
        };
    }
    out
}

pub fn write_curves_csv(report: &TrialReport) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    for r in &report.records {
        if let Ok(m) = &r.outcome {
            for (i, p) in m.curve.iter().enumerate() {
                let _ = writeln!(out, "{},{},{:.6},{:.6}", r.trial, i, p.path_length, p.explored_ratio);
            }
        }
    }
    out
}

pub fn write_trajectories_csv(report: &TrialReport) -> String {
    let mut out = format!("{TRAJECTORIES_HEADER}\n");
    for r in &report.records {
        if let Ok(m) = &r.outcome {
            for (i, ((x, y), d)) in m.trajectory.iter().zip(m.trajectory_decisions()).enumerate() {
                let _ = writeln!(out, "{},{},{:.6},{:.6},{}", r.trial, i, x, y, d);
            }
        }
    }
    out
}

pub fn write_decisions_csv(report: &TrialReport) -> String {
    let mut out = format!("{DECISIONS_HEADER}\n");
    for r in &report.records {
        if let Ok(m) = &r.outcome {
            for (i, d) in m.decisions.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{:.6},{:.6},{},{},{},{},{:?}",
                    r.trial,
                    i,
                    d.pose.x,
                    d.pose.y,
                    d.pose.heading,
                    d.frontier.x,
                    d.frontier.y,
                    d.cloud_points,
                    d.frontier_points,
                    d.status
                );
            }
        }
    }
    out
}

pub fn write_summary_csv(rows: &[Summary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.strategy,
            s.trials,
            s.succeeded,
            s.failed,
            opt(s.mean),
            opt(s.min),
            opt(s.variance)
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub map: String,
    pub strategy: String,
    pub seed: u64,
    /// `(x, y, heading)`; absent when the episode could not start.
    pub start: Option<(f64, f64, f64)>,
    pub success: bool,
    pub path_length: Option<f64>,
    pub final_ratio: Option<f64>,
    pub decisions: Option<usize>,
    pub error: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRow {
    pub trial: usize,
    pub decision: usize,
    pub path_length: f64,
    pub explored_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub trial: usize,
    pub point: usize,
    pub x: f64,
    pub y: f64,
    pub decision: usize,
}

struct Row<'a> {
    record: &'a ::csv::StringRecord,
    header: &'a [&'a str],
}

impl Row<'_> {
    fn raw(&self, i: usize) -> &str {
        self.record.get(i).unwrap_or_default()
    }

    fn get<T: FromStr>(&self, i: usize) -> std::result::Result<T, String> {
        let s = self.raw(i);
        s.parse()
            .map_err(|_| format!("column `{}`: cannot parse {s:?}", self.header[i]))
    }

    fn maybe<T: FromStr>(&self, i: usize) -> std::result::Result<Option<T>, String> {
        if self.raw(i).is_empty() {
            Ok(None)
        } else {
            self.get(i).map(Some)
        }
    }
}

/// Parses a headed CSV with exactly `header`'s columns. Rows are numbered
/// from 1 at the header line.
fn parse_rows<T>(
    text: &str,
    header: &str,
    f: impl Fn(&Row) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let columns: Vec<&str> = header.split(',').collect();
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let got = reader.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    if got.iter().ne(columns.iter().copied()) {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let row = record.position().map_or(row, |p| p.line() as usize);
        if record.len() != columns.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", columns.len(), record.len()),
            });
        }
        let parsed = f(&Row {
            record: &record,
            header: &columns,
        })
        .map_err(|message| Error::Parse { row, message })?;
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 1,
            message: "no data rows after the header".into(),
        });
    }
    Ok(rows)
}

pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRow>> {
    parse_rows(text, TRIALS_HEADER, |r| {
        let start = match (r.maybe(4)?, r.maybe(5)?, r.maybe(6)?) {
            (Some(x), Some(y), Some(h)) => Some((x, y, h)),
            (None, None, None) => None,
            _ => return Err("start pose is partially missing".into()),
        };
        Ok(TrialRow {
            trial: r.get(0)?,
            map: r.raw(1).to_owned(),
            strategy: r.raw(2).to_owned(),
            seed: r.get(3)?,
            start,
            success: r.get(7)?,
            path_length: r.maybe(8)?,
            final_ratio: r.maybe(9)?,
            decisions: r.maybe(10)?,
            error: r.raw(11).to_owned(),
        })
    })
}

pub fn parse_curves_csv(text: &str) -> Result<Vec<CurveRow>> {
    parse_rows(text, CURVES_HEADER, |r| {
        let row = CurveRow {
            trial: r.get(0)?,
            decision: r.get(1)?,
            path_length: r.get(2)?,
            explored_ratio: r.get(3)?,
        };
        if !(row.path_length.is_finite() && row.explored_ratio.is_finite()) {
            return Err("non-finite value".into());
        }
        Ok(row)
    })
}

pub fn parse_trajectories_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    parse_rows(text, TRAJECTORIES_HEADER, |r| {
        Ok(TrajectoryRow {
            trial: r.get(0)?,
            point: r.get(1)?,
            x: r.get(2)?,
            y: r.get(3)?,
            decision: r.get(4)?,
        })
    })
}
