//! Side-by-side comparison of completed runs.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::runner::METRICS_FILE;

/// Read `metrics.json` from a run directory, or the file itself.
pub fn load_metrics(path: &Path) -> Result<Metrics> {
    let file = if path.is_dir() {
        path.join(METRICS_FILE)
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: file,
        message: e.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub metric: &'static str,
    pub values: Vec<Option<f64>>,
    /// Value over the first run's value
    pub ratios: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub runs: Vec<String>,
    pub rows: Vec<Row>,
}

fn ratio(v: Option<f64>, base: Option<f64>) -> Option<f64> {
    match (v, base) {
        (Some(v), Some(b)) if v == b => Some(1.0),
        (Some(v), Some(b)) if b != 0.0 => Some(v / b),
        _ => None,
    }
}

type Extract = fn(&Metrics) -> Option<f64>;

const ROWS: [(&str, Extract); 15] = [
    ("rms_z1", |m| Some(m.rms_z1)),
    ("max_abs_z1", |m| Some(m.max_abs_z1)),
    ("rms_z3", |m| Some(m.rms_z3)),
    ("e_h1_convergence", |m| m.e_h1_convergence),
    ("e_h3_convergence", |m| m.e_h3_convergence),
    ("decay_rate", |m| m.decay_rate),
    ("terminal_ratio", |m| Some(m.terminal_ratio)),
    ("saturation_duty", |m| Some(m.saturation_duty)),
    ("last_saturation", |m| m.last_saturation),
    ("peak_steer_raw", |m| Some(m.peak_steer_raw)),
    ("max_steer", |m| Some(m.max_steer)),
    ("z2_estimation_error", |m| Some(m.post_transient.z2)),
    ("dl_estimation_error", |m| Some(m.post_transient.dl)),
    ("z4_estimation_error", |m| Some(m.post_transient.z4)),
    ("dpsi_estimation_error", |m| Some(m.post_transient.dpsi)),
];

/// Compare at least two runs against the first. Runs with different step
/// or horizon are refused unless `allow_mismatch` is set.
pub fn compare(runs: &[(String, Metrics)], allow_mismatch: bool) -> Result<Comparison> {
    if runs.len() < 2 {
        return Err(Error::Usage(format!(
            "report needs at least two runs, got {}",
            runs.len()
        )));
    }
    let base = &runs[0].1;
    if !allow_mismatch {
        for (label, m) in &runs[1..] {
            if m.dt != base.dt || m.horizon != base.horizon {
                return Err(Error::invalid(
                    "report",
                    format!(
                        "`{label}` has dt {} and horizon {} but `{}` has dt {} and horizon {}; allow the mismatch explicitly to compare anyway",
                        m.dt, m.horizon, runs[0].0, base.dt, base.horizon
                    ),
                ));
            }
        }
    }
    let rows = ROWS
        .iter()
        .map(|(metric, get)| {
            let values: Vec<Option<f64>> = runs.iter().map(|(_, m)| get(m)).collect();
            let ratios = values.iter().map(|&v| ratio(v, values[0])).collect();
            Row {
                metric,
                values,
                ratios,
            }
        })
        .collect();
    Ok(Comparison {
        runs: runs.iter().map(|(l, _)| l.clone()).collect(),
        rows,
    })
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Plain-text table: one value column per run, then one ratio column
    /// per non-baseline run.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
        let fmt_ratio = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        let mut header = vec!["metric".to_string()];
        header.extend(self.runs.iter().cloned());
        header.extend(
            self.runs[1..]
                .iter()
                .map(|r| format!("{r}/{}", self.runs[0])),
        );
        let mut table = vec![header];
        for row in &self.rows {
            let mut line = vec![row.metric.to_string()];
            line.extend(row.values.iter().map(|&v| fmt(v)));
            line.extend(row.ratios[1..].iter().map(|&v| fmt_ratio(v)));
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, line) in table.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| {
                    if c == 0 {
                        format!("{s:<w$}")
                    } else {
                        format!("{s:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        out
    }
}
