//! Summary statistics of a simulation log.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::MetricSettings;
use crate::sim::SimLog;

pub fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// First time after which `|e|` stays within `band * |e(0)|` for the rest
/// of the record. `None` if the final sample is still outside the band.
pub fn convergence_time(t: &[f64], e: &[f64], band: f64) -> Option<f64> {
    let first = *e.first()?;
    let limit = band * first.abs();
    match e.iter().rposition(|x| x.abs() > limit) {
        None => Some(t[0]),
        Some(i) if i + 1 == e.len() => None,
        Some(i) => Some(t[i + 1]),
    }
}

/// Least-squares slope of `y` against `t`. `None` with fewer than three points.
pub fn fit_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let n = t.len();
    if n < 3 {
        return None;
    }
    let mt = t.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        sxy += (a - mt) * (b - my);
        sxx += (a - mt) * (a - mt);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Largest post-transient estimation errors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimationErrors {
    pub z2: f64,
    pub dl: f64,
    pub z4: f64,
    pub dpsi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub dt: f64,
    pub horizon: f64,
    pub aborted: bool,
    pub abort_time: Option<f64>,
    pub rms_z1: f64,
    pub max_abs_z1: f64,
    pub rms_z3: f64,
    /// Time for `|e_h1|` to settle within the band; `None` if it never does
    pub e_h1_convergence: Option<f64>,
    pub e_h3_convergence: Option<f64>,
    /// Slope of `ln |z|` over the post-transient window, 1/s
    pub decay_rate: Option<f64>,
    /// `|z|` at the last sample over `|z|` at the first
    pub terminal_ratio: f64,
    /// Fraction of steps whose command was clamped
    pub saturation_duty: f64,
    pub last_saturation: Option<f64>,
    pub peak_steer_raw: f64,
    pub max_steer: f64,
    pub post_transient: EstimationErrors,
}

pub fn metrics(log: &SimLog, settings: &MetricSettings) -> Result<Metrics> {
    let recs = &log.records;
    if recs.is_empty() {
        return Err(Error::invalid("log", "no records"));
    }
    let t = log.column(|r| r.t);
    let z1 = log.column(|r| r.z1);
    let z3 = log.column(|r| r.z3);

    let (mut tt, mut ly) = (Vec::new(), Vec::new());
    for r in recs.iter().filter(|r| r.t >= settings.transient) {
        let n = r.errors().norm();
        if n > settings.norm_floor {
            tt.push(r.t);
            ly.push(n.ln());
        }
    }

    let n0 = recs[0].errors().norm();
    let n1 = recs[recs.len() - 1].errors().norm();
    let terminal_ratio = if n0 > 0.0 {
        n1 / n0
    } else if n1 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    let mut post = EstimationErrors::default();
    for r in recs.iter().filter(|r| r.t >= settings.transient) {
        post.z2 = post.z2.max((r.z2 - r.z2_hat).abs());
        post.dl = post.dl.max((r.dl - r.dl_hat).abs());
        post.z4 = post.z4.max((r.z4 - r.z4_hat).abs());
        post.dpsi = post.dpsi.max((r.dpsi - r.dpsi_hat).abs());
    }

    let sat = &log.saturation;
    Ok(Metrics {
        scenario: log.scenario.clone(),
        dt: log.dt,
        horizon: log.horizon,
        aborted: log.abort.is_some(),
        abort_time: log.abort.as_ref().map(|a| a.t),
        rms_z1: rms(&z1),
        max_abs_z1: max_abs(&z1),
        rms_z3: rms(&z3),
        e_h1_convergence: convergence_time(&t, &log.column(|r| r.e_h1), settings.band),
        e_h3_convergence: convergence_time(&t, &log.column(|r| r.e_h3), settings.band),
        decay_rate: fit_slope(&tt, &ly),
        terminal_ratio,
        saturation_duty: if sat.steps > 0 {
            sat.saturated_steps as f64 / sat.steps as f64
        } else {
            0.0
        },
        last_saturation: sat.last_time,
        peak_steer_raw: sat.peak_raw,
        max_steer: max_abs(&log.column(|r| r.steer)),
        post_transient: post,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_signal() {
        let v = vec![2.5; 100];
        assert_relative_eq!(rms(&v), 2.5, max_relative = 1e-15);
        assert_eq!(max_abs(&v), 2.5);
    }

    #[test]
    fn zero_signal_converges_immediately() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let e = vec![0.0; 50];
        assert_eq!(rms(&e), 0.0);
        assert_eq!(convergence_time(&t, &e, 0.05), Some(0.0));
    }

    #[test]
    fn sine_rms_tends_to_amplitude_over_root_two() {
        let a = 1.7;
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            // one period, left-endpoint samples
            let v: Vec<f64> = (0..n)
                .map(|k| a * (std::f64::consts::TAU * k as f64 * dt + 0.3).sin())
                .collect();
            (rms(&v) - a / 2f64.sqrt()).abs()
        };
        assert!(err(1000) < 1e-12);
        // a partial period converges as the grid refines
        let partial = |n: usize| {
            let dt = 1.37 / n as f64;
            let v: Vec<f64> = (0..n).map(|k| a * (10.0 * k as f64 * dt).sin()).collect();
            rms(&v)
        };
        let exact = {
            let tt: f64 = 1.37;
            (a * a * (0.5 - (20.0 * tt).sin() / (40.0 * tt))).sqrt()
        };
        assert!((partial(1_000_000) - exact).abs() < (partial(1000) - exact).abs());
        assert!((partial(1_000_000) - exact).abs() < 1e-5);
    }

    #[test]
    fn convergence_time_uses_permanent_entry() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let e = [1.0, 0.5, 0.01, 0.2, 0.04, 0.03, 0.0, 0.01, 0.0, 0.0];
        assert_eq!(convergence_time(&t, &e, 0.05), Some(4.0));
        let late = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9];
        assert_eq!(convergence_time(&t, &late, 0.05), None);
    }

    #[test]
    fn slope_of_exponential() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| (3.0 * (-1.3 * t).exp()).ln()).collect();
        assert_relative_eq!(fit_slope(&t, &y).unwrap(), -1.3, max_relative = 1e-12);
        assert_eq!(fit_slope(&t[..2], &y[..2]), None);
    }

    proptest! {
        #[test]
        fn convergence_time_is_within_record(e in proptest::collection::vec(-1.0f64..1.0, 1..200)) {
            let t: Vec<f64> = (0..e.len()).map(|k| k as f64 * 0.01).collect();
            if let Some(c) = convergence_time(&t, &e, 0.05) {
                prop_assert!(c <= *t.last().unwrap());
                let limit = 0.05 * e[0].abs();
                for (ti, ei) in t.iter().zip(&e) {
                    if *ti >= c { prop_assert!(ei.abs() <= limit); }
                }
            }
        }
    }
}
