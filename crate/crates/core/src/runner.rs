//! Batch execution: scenario sources, sweeps, artifacts and checks.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{metrics, Metrics};
use crate::plots::{run_charts, PLOT_FILES};
use crate::scenario::{Checks, Scenario, PRESETS};
use crate::sim::run_scenario;

pub const LOG_FILE: &str = "log.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ScenarioSource {
    Preset(String),
    File(PathBuf),
}

impl ScenarioSource {
    /// A preset name unless a file of that name exists.
    pub fn parse(arg: &str) -> Self {
        let path = PathBuf::from(arg);
        if PRESETS.contains(&arg) && !path.exists() {
            ScenarioSource::Preset(arg.to_string())
        } else {
            ScenarioSource::File(path)
        }
    }

    pub fn load(&self) -> Result<Scenario> {
        match self {
            ScenarioSource::Preset(name) => Scenario::preset(name),
            ScenarioSource::File(path) => Scenario::load(path),
        }
    }
}

/// One swept parameter and its values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// Parse `name=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (param, list) = spec
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("sweep `{spec}` must look like name=v1,v2,...")))?;
        let values = list
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Usage(format!("sweep `{param}`: `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        let axis = SweepAxis {
            param: param.trim().to_string(),
            values,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.param.is_empty() {
            return Err(Error::Usage("sweep parameter name is empty".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Usage(format!(
                "sweep `{}` has no values",
                self.param
            )));
        }
        // reject unknown names before anything runs
        Scenario::default().set_param(&self.param, self.values[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenarios: Vec<ScenarioSource>,
    pub out_dir: PathBuf,
    pub sweeps: Vec<SweepAxis>,
    pub plots: bool,
    /// Overrides every scenario's noise seed
    pub seed: Option<u64>,
    /// Worker threads; all available cores if absent
    pub jobs: Option<usize>,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Usage("no scenarios given".into()));
        }
        for s in &self.scenarios {
            if let ScenarioSource::File(p) = s {
                if !p.is_file() {
                    return Err(Error::io(
                        p,
                        std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            "scenario file not found",
                        ),
                    ));
                }
            }
        }
        for axis in &self.sweeps {
            axis.validate()?;
        }
        if self.jobs == Some(0) {
            return Err(Error::Usage("jobs must be at least 1".into()));
        }
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let probe = self.out_dir.join(".write_probe");
        fs::write(&probe, b"").map_err(|e| Error::io(&self.out_dir, e))?;
        let _ = fs::remove_file(&probe);
        Ok(())
    }
}

/// A fully resolved scenario with its artifact name.
#[derive(Clone, Debug)]
pub struct RunPoint {
    pub name: String,
    pub sweep: Vec<(String, f64)>,
    pub scenario: Scenario,
}

/// Cartesian product of the sweep axes over every scenario, in manifest
/// order with the last axis varying fastest.
pub fn expand(manifest: &RunManifest) -> Result<Vec<RunPoint>> {
    let mut combos: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in &manifest.sweeps {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                axis.values.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.push((axis.param.clone(), v));
                    c
                })
            })
            .collect();
    }
    let mut points = Vec::new();
    for src in &manifest.scenarios {
        let base = src.load()?;
        for combo in &combos {
            let mut s = base.clone();
            if let Some(seed) = manifest.seed {
                s.sim.seed = seed;
            }
            let mut name = s.name.clone();
            for (param, v) in combo {
                s.set_param(param, *v)?;
                name.push_str(&format!("__{param}={v}"));
            }
            s.name = name.clone();
            s.validate()?;
            if points.iter().any(|p: &RunPoint| p.name == name) {
                return Err(Error::Usage(format!("duplicate run name `{name}`")));
            }
            points.push(RunPoint {
                name,
                sweep: combo.clone(),
                scenario: s,
            });
        }
    }
    Ok(points)
}

/// Names of the checks a run failed. NaN metrics fail.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn failed_checks(checks: &Checks, m: &Metrics) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(lim) = checks.max_rms_z1 {
        if !(m.rms_z1 <= lim) {
            out.push(format!("rms_z1 {:.4e} > {lim}", m.rms_z1));
        }
    }
    if let Some(lim) = checks.max_convergence_time {
        for (name, c) in [("e_h1", m.e_h1_convergence), ("e_h3", m.e_h3_convergence)] {
            match c {
                Some(c) if c <= lim => {}
                Some(c) => out.push(format!("{name} convergence {c} s > {lim} s")),
                None => out.push(format!("{name} never converged")),
            }
        }
    }
    if let Some(lim) = checks.max_terminal_ratio {
        if !(m.terminal_ratio <= lim) {
            out.push(format!("terminal ratio {:.3e} > {lim}", m.terminal_ratio));
        }
    }
    if let Some(lim) = checks.max_saturation_time {
        if let Some(t) = m.last_saturation.filter(|&t| t > lim) {
            out.push(format!("saturated at {t} s, after {lim} s"));
        }
    }
    if checks.require_decay && !m.decay_rate.is_some_and(|r| r < 0.0) {
        out.push(format!("no exponential decay (slope {:?})", m.decay_rate));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PointOutcome {
    pub name: String,
    pub dir: PathBuf,
    pub sweep: Vec<(String, f64)>,
    pub abort_reason: Option<String>,
    pub failed_checks: Vec<String>,
    pub metrics: Metrics,
}

impl PointOutcome {
    pub fn ok(&self) -> bool {
        self.abort_reason.is_none() && self.failed_checks.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub points: Vec<PointOutcome>,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.points.iter().all(PointOutcome::ok)
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Run one point and write its artifacts into `dir`.
pub fn run_point(point: &RunPoint, dir: &Path, plots: bool) -> Result<PointOutcome> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let s = &point.scenario;
    write(&dir.join(SCENARIO_FILE), s.to_toml_string()?)?;
    let log = run_scenario(s)?;
    log.write_csv(&dir.join(LOG_FILE))?;
    let m = metrics(&log, &s.metrics)?;
    write(&dir.join(METRICS_FILE), serde_json::to_string_pretty(&m)?)?;
    if plots {
        for (file, svg) in PLOT_FILES.iter().zip(run_charts(&log)) {
            write(&dir.join(file), svg)?;
        }
    }
    Ok(PointOutcome {
        name: point.name.clone(),
        dir: dir.to_path_buf(),
        sweep: point.sweep.clone(),
        abort_reason: log
            .abort
            .as_ref()
            .map(|a| format!("t = {} s: {}", a.t, a.reason)),
        failed_checks: failed_checks(&s.checks, &m),
        metrics: m,
    })
}

/// Validate the manifest, run every point on a bounded pool and write the
/// per-run artifacts plus a summary.
pub fn execute(manifest: &RunManifest) -> Result<RunSummary> {
    manifest.validate()?;
    let points = expand(manifest)?;
    let threads = manifest
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .min(points.len())
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    let results: Vec<Result<PointOutcome>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| run_point(p, &manifest.out_dir.join(&p.name), manifest.plots))
            .collect()
    });
    let summary = RunSummary {
        points: results.into_iter().collect::<Result<_>>()?,
    };
    write(
        &manifest.out_dir.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&summary)?,
    )?;
    write_summary_csv(&manifest.out_dir.join(SUMMARY_CSV), &summary)?;
    Ok(summary)
}

fn write_summary_csv(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "name",
        "status",
        "rms_z1",
        "max_abs_z1",
        "e_h1_convergence",
        "e_h3_convergence",
        "decay_rate",
        "terminal_ratio",
        "saturation_duty",
        "z2_estimation_error",
        "dl_estimation_error",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for p in &summary.points {
        let m = &p.metrics;
        let status = if p.abort_reason.is_some() {
            "aborted"
        } else if p.failed_checks.is_empty() {
            "ok"
        } else {
            "check_failed"
        };
        w.write_record([
            p.name.clone(),
            status.into(),
            m.rms_z1.to_string(),
            m.max_abs_z1.to_string(),
            opt(m.e_h1_convergence),
            opt(m.e_h3_convergence),
            opt(m.decay_rate),
            m.terminal_ratio.to_string(),
            m.saturation_duty.to_string(),
            m.post_transient.z2.to_string(),
            m.post_transient.dl.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
