//! Declarative run description, TOML loading and the shipped presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::error_model::UncertaintySpec;
use crate::observer::{ObserverGains, ObserverState};
use crate::profile::{Profile, Segment};
use crate::vehicle::{RoadConditions, VehicleParams, MIN_SPEED};

pub const PRESETS: [&str; 3] = ["flat_lot", "inclined_road", "banked_speedway"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Path curvature over time, 1/m
    pub curvature: Profile,
    /// Comfort bound on `|curvature| * speed^2`, m/s^2
    pub max_lateral_accel: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            curvature: Profile::constant(0.0),
            max_lateral_accel: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverInit {
    #[default]
    Zero,
    /// True errors, and disturbances evaluated with zero steering.
    Truth,
    Explicit(ObserverState),
}

/// Initial tracking errors; the plant is placed relative to the reference
/// pose at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConditions {
    pub z1: f64,
    pub z3: f64,
    /// Body lateral velocity, m/s
    pub vy: f64,
    /// Yaw rate error, rad/s
    pub z4: f64,
    pub observer: ObserverInit,
}

impl Default for InitialConditions {
    fn default() -> Self {
        InitialConditions {
            z1: 0.0,
            z3: 0.0,
            vy: 0.0,
            z4: 0.0,
            observer: ObserverInit::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    /// Estimates from the observers
    #[default]
    Observer,
    /// True errors and disturbances
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub horizon: f64,
    /// Log every n-th step
    pub log_interval: usize,
    pub feedback: FeedbackSource,
    /// Zero-order-hold rate for the control law; continuous if absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_rate_hz: Option<f64>,
    /// Sample-and-hold rate for the measured errors; continuous if absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement_rate_hz: Option<f64>,
    /// Standard deviation of additive noise on the measured (z1, z3)
    pub noise_std: [f64; 2],
    pub seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            dt: 1e-3,
            horizon: 60.0,
            log_interval: 1,
            feedback: FeedbackSource::Observer,
            control_rate_hz: None,
            measurement_rate_hz: None,
            noise_std: [0.0, 0.0],
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    /// Start of the post-transient window, s
    pub transient: f64,
    /// Convergence band as a fraction of the initial estimation error
    pub band: f64,
    /// Error norms below this are ignored by the decay fit
    pub norm_floor: f64,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            transient: 2.0,
            band: 0.05,
            norm_floor: 1e-9,
        }
    }
}

/// Assertions evaluated after a run; a failed check makes the CLI exit
/// with a nonzero status.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rms_z1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_convergence_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_terminal_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_saturation_time: Option<f64>,
    pub require_decay: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Longitudinal speed, m/s
    pub speed: f64,
    pub vehicle: VehicleParams,
    pub uncertainty: UncertaintySpec,
    pub reference: ReferenceSpec,
    pub road: RoadConditions,
    pub initial: InitialConditions,
    pub controller: ControllerParams,
    pub observer: ObserverGains,
    pub sim: SimSettings,
    pub metrics: MetricSettings,
    pub checks: Checks,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "scenario".into(),
            speed: 10.0,
            vehicle: VehicleParams::default(),
            uncertainty: UncertaintySpec::default(),
            reference: ReferenceSpec::default(),
            road: RoadConditions::default(),
            initial: InitialConditions::default(),
            controller: ControllerParams::default(),
            observer: ObserverGains::default(),
            sim: SimSettings::default(),
            metrics: MetricSettings::default(),
            checks: Checks::default(),
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {v}")))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed.is_finite() && self.speed >= MIN_SPEED) {
            return Err(Error::invalid(
                "speed",
                format!(
                    "{} m/s is below the minimum speed v_min = {MIN_SPEED} m/s",
                    self.speed
                ),
            ));
        }
        self.vehicle.validate()?;
        self.uncertainty.validate()?;
        self.uncertainty.apply(&self.vehicle).validate()?;
        self.road.validate()?;
        self.controller.validate()?;
        ObserverGains::new(
            self.observer.lateral,
            self.observer.yaw,
            self.observer.epsilon,
        )?;

        let s = &self.sim;
        if !(s.dt.is_finite() && s.dt > 0.0) {
            return Err(Error::invalid(
                "sim.dt",
                format!("must be positive, got {}", s.dt),
            ));
        }
        let dt_max = self.observer.epsilon / 5.0;
        if s.dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "sim.dt",
                format!(
                    "dt = {} exceeds epsilon/5 = {dt_max}; the observer would be under-resolved",
                    s.dt
                ),
            ));
        }
        if !(s.horizon.is_finite() && s.horizon >= 1.0) {
            return Err(Error::invalid(
                "sim.horizon",
                format!("must be at least 1 s, got {}", s.horizon),
            ));
        }
        let steps = (s.horizon / s.dt).round();
        if (steps * s.dt - s.horizon).abs() > 1e-9 * s.horizon {
            return Err(Error::invalid(
                "sim.horizon",
                format!("must be a whole number of steps of dt = {}", s.dt),
            ));
        }
        if s.log_interval == 0 {
            return Err(Error::invalid("sim.log_interval", "must be at least 1"));
        }
        for (name, rate) in [
            ("sim.control_rate_hz", s.control_rate_hz),
            ("sim.measurement_rate_hz", s.measurement_rate_hz),
        ] {
            if let Some(r) = rate {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::invalid(name, format!("must be positive, got {r}")));
                }
            }
        }
        if s.noise_std.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "sim.noise_std",
                "must be non-negative and finite",
            ));
        }
        for (name, h) in [
            ("reference.curvature", self.reference.curvature.horizon()),
            ("road.bank", self.road.bank.horizon()),
        ] {
            if h < s.horizon {
                return Err(Error::invalid(
                    name,
                    format!("profile ends at {h} s, before the horizon {} s", s.horizon),
                ));
            }
        }
        let a = self.reference.curvature.max_abs() * self.speed * self.speed;
        if a > self.reference.max_lateral_accel {
            return Err(Error::invalid(
                "reference.curvature",
                format!(
                    "|curvature| * speed^2 reaches {a:.3} m/s^2, above max_lateral_accel = {}",
                    self.reference.max_lateral_accel
                ),
            ));
        }
        let i = &self.initial;
        for (name, v) in [
            ("initial.z1", i.z1),
            ("initial.z3", i.z3),
            ("initial.vy", i.vy),
            ("initial.z4", i.z4),
        ] {
            finite(name, v)?;
        }
        if i.z3.abs() >= std::f64::consts::PI {
            return Err(Error::invalid("initial.z3", "must lie in (-pi, pi)"));
        }
        if let ObserverInit::Explicit(o) = i.observer {
            if !o.is_finite() {
                return Err(Error::invalid("initial.observer", "must be finite"));
            }
        }
        let m = &self.metrics;
        if !(m.band > 0.0 && m.band < 1.0) {
            return Err(Error::invalid("metrics.band", "must lie in (0, 1)"));
        }
        if !(m.transient >= 0.0 && m.transient.is_finite()) {
            return Err(Error::invalid("metrics.transient", "must be non-negative"));
        }
        if !(m.norm_floor >= 0.0 && m.norm_floor.is_finite()) {
            return Err(Error::invalid("metrics.norm_floor", "must be non-negative"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.sim.horizon / self.sim.dt).round() as usize
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    /// Fully resolved form, suitable for writing next to run artifacts.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("scenario", e.to_string()))
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "flat_lot" => Ok(flat_lot()),
            "inclined_road" => Ok(inclined_road()),
            "banked_speedway" => Ok(banked_speedway()),
            other => Err(Error::invalid(
                "preset",
                format!("unknown preset `{other}`, expected one of {PRESETS:?}"),
            )),
        }
    }

    /// Mirror image: curvature, banking, initial offsets and any explicit
    /// observer state negated.
    pub fn mirrored(&self) -> Self {
        let mut s = self.clone();
        s.reference.curvature = self.reference.curvature.negated();
        s.road.bank = self.road.bank.negated();
        s.initial.z1 = -self.initial.z1;
        s.initial.z3 = -self.initial.z3;
        s.initial.vy = -self.initial.vy;
        s.initial.z4 = -self.initial.z4;
        if let ObserverInit::Explicit(o) = self.initial.observer {
            let n = o.to_array().map(|v| -v);
            s.initial.observer = ObserverInit::Explicit(ObserverState::from_slice(&n));
        }
        s
    }

    /// Set a parameter by dotted name, for sweeps.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "speed" => self.speed = value,
            "epsilon" | "observer.epsilon" => self.observer.epsilon = value,
            "dt" | "sim.dt" => self.sim.dt = value,
            "horizon" | "sim.horizon" => self.sim.horizon = value,
            "bank" | "road.bank" => self.road.bank = Profile::constant(value),
            "seed" | "sim.seed" => self.sim.seed = value as u64,
            "initial.z1" => self.initial.z1 = value,
            "initial.z3" => self.initial.z3 = value,
            "controller.eta1" => self.controller.eta1 = value,
            "controller.eta2" => self.controller.eta2 = value,
            "controller.tau" => self.controller.tau = value,
            "controller.k3" => self.controller.k3 = value,
            "controller.k4" => self.controller.k4 = value,
            "controller.steer_max" => self.controller.steer_max = value,
            "uncertainty.mass" => self.uncertainty.mass = value,
            "uncertainty.iz" => self.uncertainty.iz = value,
            "uncertainty.cf" => self.uncertainty.cf = value,
            "uncertainty.cr" => self.uncertainty.cr = value,
            "vehicle.mu" => self.vehicle.mu = value,
            other => {
                return Err(Error::invalid(
                    "sweep.param",
                    format!("`{other}` is not a sweepable parameter"),
                ))
            }
        }
        Ok(())
    }
}

fn base(name: &str, speed: f64) -> Scenario {
    Scenario {
        name: name.into(),
        speed,
        vehicle: VehicleParams {
            steering_ratio: 16.0,
            ..Default::default()
        },
        initial: InitialConditions {
            z1: 0.5,
            z3: 0.05,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn settle(before: f64) -> Segment {
    Segment::Constant {
        duration: before,
        value: 0.0,
    }
}

fn open_end() -> Segment {
    Segment::Constant {
        duration: f64::INFINITY,
        value: 0.0,
    }
}

fn profile(segments: Vec<Segment>) -> Profile {
    Profile::new(segments).expect("preset profile is valid")
}

/// Flat lot: one S-curve at 10 mph.
fn flat_lot() -> Scenario {
    let mut s = base("flat_lot", 4.4704);
    s.reference.curvature = profile(vec![
        settle(2.0),
        Segment::Sine {
            duration: 20.0,
            amplitude: 0.04,
            period: 20.0,
            offset: 0.0,
            phase: 0.0,
        },
        open_end(),
    ]);
    s
}

/// Gentle curve at 15 mph while the road banks to 3 degrees and back.
fn inclined_road() -> Scenario {
    let mut s = base("inclined_road", 6.7056);
    let bank = 3f64.to_radians();
    s.reference.curvature = profile(vec![
        settle(2.0),
        Segment::Sine {
            duration: 24.0,
            amplitude: 0.02,
            period: 24.0,
            offset: 0.0,
            phase: 0.0,
        },
        open_end(),
    ]);
    s.road.bank = profile(vec![
        settle(2.0),
        Segment::Ramp {
            duration: 5.0,
            from: 0.0,
            to: bank,
        },
        Segment::Constant {
            duration: 20.0,
            value: bank,
        },
        Segment::Ramp {
            duration: 5.0,
            from: bank,
            to: 0.0,
        },
        open_end(),
    ]);
    s
}

/// Constant-radius banked turn at 20 mph, banking up to 8 degrees.
fn banked_speedway() -> Scenario {
    let mut s = base("banked_speedway", 8.9408);
    let bank = 8f64.to_radians();
    let k = 0.01;
    s.reference.curvature = profile(vec![
        settle(2.0),
        Segment::Ramp {
            duration: 4.0,
            from: 0.0,
            to: k,
        },
        Segment::Constant {
            duration: 20.0,
            value: k,
        },
        Segment::Ramp {
            duration: 4.0,
            from: k,
            to: 0.0,
        },
        open_end(),
    ]);
    s.road.bank = profile(vec![
        settle(2.0),
        Segment::Ramp {
            duration: 4.0,
            from: 0.0,
            to: bank,
        },
        Segment::Constant {
            duration: 20.0,
            value: bank,
        },
        Segment::Ramp {
            duration: 4.0,
            from: bank,
            to: 0.0,
        },
        open_end(),
    ]);
    s
}
