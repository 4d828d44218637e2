//! Nonlinear bicycle plant with Dugoff lateral tire forces and road banking.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Profile;

/// Slowest longitudinal speed accepted anywhere a slip angle is formed.
pub const MIN_SPEED: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axle {
    Front,
    Rear,
}

impl fmt::Display for Axle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axle::Front => "front",
            Axle::Rear => "rear",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Yaw inertia, kg m^2
    pub iz: f64,
    /// CG to front axle, m
    pub lf: f64,
    /// CG to rear axle, m
    pub lr: f64,
    /// Nominal per-tire cornering stiffness used by the controller model, N/rad
    pub cf: f64,
    pub cr: f64,
    /// Axle cornering stiffness used by the Dugoff tire, N/rad
    pub cf_true: f64,
    pub cr_true: f64,
    /// Longitudinal tire stiffness, N
    pub cx: f64,
    /// Tire-road friction coefficient
    pub mu: f64,
    /// Vertical tire load, N
    pub fz: f64,
    pub g: f64,
    /// Handwheel to road-wheel ratio. The steering command is divided by
    /// this before it reaches the tires.
    pub steering_ratio: f64,
    /// Largest exact slip angle magnitude the tire model accepts, rad.
    pub slip_cap: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let mass = 1800.0;
        let g = 9.81;
        VehicleParams {
            mass,
            iz: 3270.0,
            lf: 1.2,
            lr: 1.65,
            cf: 60_000.0,
            cr: 60_000.0,
            cf_true: 120_000.0,
            cr_true: 120_000.0,
            cx: 100_000.0,
            mu: 0.9,
            fz: mass * g / 4.0,
            g,
            steering_ratio: 1.0,
            slip_cap: 85f64.to_radians(),
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("iz", self.iz),
            ("lf", self.lf),
            ("lr", self.lr),
            ("cf", self.cf),
            ("cr", self.cr),
            ("cf_true", self.cf_true),
            ("cr_true", self.cr_true),
            ("cx", self.cx),
            ("mu", self.mu),
            ("fz", self.fz),
            ("g", self.g),
            ("steering_ratio", self.steering_ratio),
            ("slip_cap", self.slip_cap),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    format!("vehicle.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if self.mu > 1.5 {
            return Err(Error::invalid(
                "vehicle.mu",
                format!("must lie in (0, 1.5], got {}", self.mu),
            ));
        }
        if self.slip_cap >= FRAC_PI_2 {
            return Err(Error::invalid(
                "vehicle.slip_cap",
                format!("must be below pi/2, got {}", self.slip_cap),
            ));
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Road-wheel angle produced by a steering command.
    pub fn wheel_angle(&self, steer: f64) -> f64 {
        steer / self.steering_ratio
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Body-frame lateral velocity, m/s
    pub vy: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    /// Longitudinal velocity, held constant during a run
    pub vx: f64,
    /// World position of the CG, m
    pub x: f64,
    pub y: f64,
}

impl PlantState {
    pub fn check(&self) -> Result<()> {
        let all = [self.vy, self.yaw, self.yaw_rate, self.vx, self.x, self.y];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant state"));
        }
        if self.vx < MIN_SPEED {
            return Err(Error::SpeedBelowMinimum {
                vx: self.vx,
                min: MIN_SPEED,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadConditions {
    /// Banking angle over time, rad
    pub bank: Profile,
    /// Longitudinal slip ratio
    pub slip_ratio: f64,
}

impl Default for RoadConditions {
    fn default() -> Self {
        RoadConditions {
            bank: Profile::constant(0.0),
            slip_ratio: 0.0,
        }
    }
}

impl RoadConditions {
    pub fn validate(&self) -> Result<()> {
        let m = self.bank.max_abs();
        if m >= FRAC_PI_2 {
            return Err(Error::invalid(
                "road.bank",
                format!("|bank| must stay below pi/2, profile reaches {m}"),
            ));
        }
        if !(self.slip_ratio.is_finite() && self.slip_ratio > -1.0) {
            return Err(Error::invalid(
                "road.slip_ratio",
                format!("must be greater than -1, got {}", self.slip_ratio),
            ));
        }
        Ok(())
    }

    pub fn sample(&self, t: f64) -> Result<RoadSample> {
        Ok(RoadSample {
            bank: self.bank.value(t)?,
            slip_ratio: self.slip_ratio,
        })
    }
}

/// Road state at a single instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RoadSample {
    pub bank: f64,
    pub slip_ratio: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SlipAngles {
    pub front: f64,
    pub rear: f64,
    pub front_linear: f64,
    pub rear_linear: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TireOutput {
    pub slip: SlipAngles,
    pub gamma_front: f64,
    pub gamma_rear: f64,
    /// Dugoff lateral force, N
    pub force_front: f64,
    pub force_rear: f64,
    /// Linear force from the nominal stiffness, N
    pub nominal_front: f64,
    pub nominal_rear: f64,
    /// Dugoff minus nominal, N
    pub perturbation_front: f64,
    pub perturbation_rear: f64,
}

/// Exact and small-angle tire slip angles for a road-wheel angle `wheel`.
pub fn slip_angles(state: &PlantState, wheel: f64, params: &VehicleParams) -> Result<SlipAngles> {
    if state.vx < MIN_SPEED {
        return Err(Error::SpeedBelowMinimum {
            vx: state.vx,
            min: MIN_SPEED,
        });
    }
    let qf = (state.vy + params.lf * state.yaw_rate) / state.vx;
    let qr = (state.vy - params.lr * state.yaw_rate) / state.vx;
    let s = SlipAngles {
        front: wheel - qf.atan(),
        rear: -qr.atan(),
        front_linear: wheel - qf,
        rear_linear: -qr,
    };
    for (axle, angle) in [(Axle::Front, s.front), (Axle::Rear, s.rear)] {
        if !angle.is_finite() {
            return Err(Error::NonFinite("slip angle"));
        }
        if angle.abs() >= FRAC_PI_2 {
            return Err(Error::SlipDomain {
                axle,
                angle,
                limit: FRAC_PI_2,
            });
        }
    }
    Ok(s)
}

/// Dugoff friction shaping: `(2 - g) g` below one, saturated at one above.
pub fn dugoff_shaping(gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::NegativeShaping(gamma));
    }
    Ok(if gamma < 1.0 {
        (2.0 - gamma) * gamma
    } else {
        1.0
    })
}

fn dugoff_gamma(tan_slip: f64, road: &RoadSample, p: &VehicleParams) -> f64 {
    let cy = p.cf_true + p.cr_true;
    let denom = 2.0 * (p.cx * road.slip_ratio).hypot(cy * tan_slip);
    let num = p.mu * (1.0 + road.slip_ratio) * p.fz;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        num / denom
    }
}

pub fn tire_lateral_forces(
    state: &PlantState,
    wheel: f64,
    road: &RoadSample,
    params: &VehicleParams,
) -> Result<TireOutput> {
    let slip = slip_angles(state, wheel, params)?;
    for (axle, angle) in [(Axle::Front, slip.front), (Axle::Rear, slip.rear)] {
        if angle.abs() > params.slip_cap {
            return Err(Error::SlipDomain {
                axle,
                angle,
                limit: params.slip_cap,
            });
        }
    }
    let tf = slip.front.tan();
    let tr = slip.rear.tan();
    let gamma_front = dugoff_gamma(tf, road, params);
    let gamma_rear = dugoff_gamma(tr, road, params);
    let scale = 1.0 + road.slip_ratio;
    let force_front = params.cf_true * tf * dugoff_shaping(gamma_front)? / scale;
    let force_rear = params.cr_true * tr * dugoff_shaping(gamma_rear)? / scale;
    let nominal_front = 2.0 * params.cf * slip.front_linear;
    let nominal_rear = 2.0 * params.cr * slip.rear_linear;
    Ok(TireOutput {
        slip,
        gamma_front,
        gamma_rear,
        force_front,
        force_rear,
        nominal_front,
        nominal_rear,
        perturbation_front: force_front - nominal_front,
        perturbation_rear: force_rear - nominal_rear,
    })
}

/// Lateral and yaw accelerations produced by given axle forces.
pub fn body_accelerations(
    state: &PlantState,
    force_front: f64,
    force_rear: f64,
    bank: f64,
    params: &VehicleParams,
) -> (f64, f64) {
    let vy_dot = (force_front + force_rear) / params.mass + params.g * bank.sin()
        - state.vx * state.yaw_rate;
    let yaw_accel = (params.lf * force_front - params.lr * force_rear) / params.iz;
    (vy_dot, yaw_accel)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlantDerivative {
    pub vy_dot: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
    pub x_dot: f64,
    pub y_dot: f64,
    pub tires: TireOutput,
}

/// Time derivative of the plant for a road-wheel angle `wheel`.
pub fn plant_derivative(
    state: &PlantState,
    wheel: f64,
    road: &RoadSample,
    params: &VehicleParams,
) -> Result<PlantDerivative> {
    if !wheel.is_finite() {
        return Err(Error::NonFinite("steering angle"));
    }
    let tires = tire_lateral_forces(state, wheel, road, params)?;
    let (vy_dot, yaw_accel) = body_accelerations(
        state,
        tires.force_front,
        tires.force_rear,
        road.bank,
        params,
    );
    let (s, c) = state.yaw.sin_cos();
    Ok(PlantDerivative {
        vy_dot,
        yaw_rate: state.yaw_rate,
        yaw_accel,
        x_dot: state.vx * c - state.vy * s,
        y_dot: state.vx * s + state.vy * c,
        tires,
    })
}
