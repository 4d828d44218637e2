//! Cascaded cancellation steering law driven by estimated errors and
//! disturbances.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_model::{Disturbances, NominalCoefficients};
use crate::reference::ErrorState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Lateral position gain
    pub eta1: f64,
    /// Lateral rate gain
    pub eta2: f64,
    /// Time-scale factor on the lateral loop, in (0, 1]
    pub tau: f64,
    /// Heading tracking gain
    pub k3: f64,
    /// Yaw rate gain
    pub k4: f64,
    /// Steering command magnitude limit, rad
    pub steer_max: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            eta1: 400.0,
            eta2: 40.0,
            tau: 0.1,
            k3: 200.0,
            k4: 20.0,
            steer_max: 2.7 * PI,
        }
    }
}

impl ControllerParams {
    /// Gain set reported for the test vehicle. Far too stiff for a fixed-step
    /// simulation of the plant; kept for reference and for algebraic checks.
    pub fn published() -> Self {
        ControllerParams {
            eta1: 2_835_000.0,
            eta2: 31_500.0,
            tau: 0.1,
            k3: 350_000.0,
            k4: 250_000.0,
            steer_max: 2.7 * PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("steer_max", self.steer_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    format!("controller.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(
                "controller.tau",
                format!("must lie in (0, 1], got {}", self.tau),
            ));
        }
        Ok(())
    }
}

/// Every intermediate quantity of one evaluation of the control law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ControlTrace {
    pub nu_h: f64,
    pub z3_des: f64,
    pub u_d: f64,
    pub u: f64,
    pub steer_raw: f64,
    pub steer: f64,
    pub saturated: bool,
}

/// Clamp to `[-limit, limit]`, reporting whether clamping happened.
pub fn saturate(x: f64, limit: f64) -> (f64, bool) {
    if x > limit {
        (limit, true)
    } else if x < -limit {
        (-limit, true)
    } else {
        (x, false)
    }
}

/// Lateral virtual control and the heading reference that balances it.
pub fn virtual_controls(
    z: &ErrorState,
    d: &Disturbances,
    c: &NominalCoefficients,
    cp: &ControllerParams,
) -> Result<(f64, f64)> {
    if c.alpha3 == 0.0 || !c.alpha3.is_finite() {
        return Err(Error::SingularVirtualControl(c.alpha3));
    }
    let nu_h = -cp.tau * cp.tau * cp.eta1 * z.z1 - cp.tau * cp.eta2 * z.z2;
    let r = c.input_ratio;
    let z3_des = (-c.alpha2 * z.z2 - c.alpha4 * z.z4 + r * d.lateral - d.yaw - r * nu_h) / c.alpha3;
    Ok((nu_h, z3_des))
}

/// Lateral rate the law would impose if the heading error were `z3` and
/// the heading loop input were zero. Equals `nu_h` at the returned `z3_des`.
pub fn balanced_lateral_input(
    z: &ErrorState,
    z3: f64,
    d: &Disturbances,
    c: &NominalCoefficients,
) -> f64 {
    let r = c.input_ratio;
    (-c.alpha2 * z.z2 - c.alpha3 * z3 - c.alpha4 * z.z4 + r * d.lateral - d.yaw) / r
}

/// Heading loop input `u_d` and lateral loop input `u`.
pub fn auxiliary_controls(
    z: &ErrorState,
    z3_des: f64,
    d: &Disturbances,
    c: &NominalCoefficients,
    cp: &ControllerParams,
) -> (f64, f64) {
    let u_d = -cp.k3 * (z.z3 - z3_des) - cp.k4 * z.z4;
    let r = c.input_ratio;
    let u =
        (-c.alpha2 * z.z2 - c.alpha3 * z.z3 - c.alpha4 * z.z4 + r * d.lateral - d.yaw + u_d) / r;
    (u_d, u)
}

/// Raw and saturated steering command.
pub fn steering_command(
    z: &ErrorState,
    lateral_disturbance: f64,
    u: f64,
    c: &NominalCoefficients,
    cp: &ControllerParams,
) -> (f64, f64, bool) {
    let raw = (-c.a22 * z.z2 - c.a23 * z.z3 - c.a24 * z.z4 - lateral_disturbance + u) / c.b21;
    let (steer, saturated) = saturate(raw, cp.steer_max);
    (raw, steer, saturated)
}

/// Full control law on estimated errors and disturbances.
pub fn control_law(
    z: &ErrorState,
    d: &Disturbances,
    c: &NominalCoefficients,
    cp: &ControllerParams,
) -> Result<ControlTrace> {
    let (nu_h, z3_des) = virtual_controls(z, d, c, cp)?;
    let (u_d, u) = auxiliary_controls(z, z3_des, d, c, cp);
    let (steer_raw, steer, saturated) = steering_command(z, d.lateral, u, c, cp);
    if !steer_raw.is_finite() {
        return Err(Error::NonFinite("steering command"));
    }
    Ok(ControlTrace {
        nu_h,
        z3_des,
        u_d,
        u,
        steer_raw,
        steer,
        saturated,
    })
}
