//! Nominal error-dynamics coefficients, parametric uncertainty and the
//! lumped disturbances recovered from plant truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::ErrorState;
use crate::vehicle::{VehicleParams, MIN_SPEED};

/// Coefficients of the nominal error model
///
/// ```text
/// z2' = a22 z2 + a23 z3 + a24 z4 + b21 steer + D_l
/// z4' = a42 z2 + a43 z3 + a44 z4 + b41 steer + D_psi
/// ```
///
/// The input gains are per unit steering command, so they include the
/// steering ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NominalCoefficients {
    pub a22: f64,
    pub a23: f64,
    pub a24: f64,
    pub a42: f64,
    pub a43: f64,
    pub a44: f64,
    pub b21: f64,
    pub b41: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    /// `vx + a24`
    pub alpha: f64,
    /// `b41 / b21`
    pub input_ratio: f64,
}

impl NominalCoefficients {
    pub fn new(p: &VehicleParams, vx: f64) -> Result<Self> {
        Self::from_stiffness(p.mass, p.iz, p.lf, p.lr, p.cf, p.cr, p.steering_ratio, vx)
    }

    /// Coefficients the nominal model would have if its parameters were
    /// the plant's: effective per-tire stiffness is half the axle value.
    pub fn of_plant(p: &VehicleParams, vx: f64) -> Result<Self> {
        Self::from_stiffness(
            p.mass,
            p.iz,
            p.lf,
            p.lr,
            0.5 * p.cf_true,
            0.5 * p.cr_true,
            p.steering_ratio,
            vx,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn from_stiffness(
        m: f64,
        iz: f64,
        lf: f64,
        lr: f64,
        cf: f64,
        cr: f64,
        ratio: f64,
        vx: f64,
    ) -> Result<Self> {
        if !(vx >= MIN_SPEED && vx.is_finite()) {
            return Err(Error::SpeedBelowMinimum { vx, min: MIN_SPEED });
        }
        let a22 = -(2.0 * cf + 2.0 * cr) / (m * vx);
        let a23 = -vx * a22;
        let a24 = -(2.0 * cf * lf - 2.0 * cr * lr) / (m * vx);
        let a42 = -(2.0 * lf * cf - 2.0 * lr * cr) / (iz * vx);
        let a43 = -vx * a42;
        let a44 = -(2.0 * cf * lf * lf + 2.0 * cr * lr * lr) / (iz * vx);
        let b21 = 2.0 * cf / m / ratio;
        let b41 = 2.0 * cf * lf / iz / ratio;
        let r = b41 / b21;
        let c = NominalCoefficients {
            a22,
            a23,
            a24,
            a42,
            a43,
            a44,
            b21,
            b41,
            alpha2: a42 - a22 * r,
            alpha3: a43 - a23 * r,
            alpha4: a44 - a24 * r,
            alpha: vx + a24,
            input_ratio: r,
        };
        if c.alpha3 == 0.0 || !c.alpha3.is_finite() {
            return Err(Error::SingularVirtualControl(c.alpha3));
        }
        Ok(c)
    }

    /// Nominal lateral flow without the disturbance.
    pub fn lateral_flow(&self, z: &ErrorState, steer: f64) -> f64 {
        self.a22 * z.z2 + self.a23 * z.z3 + self.a24 * z.z4 + self.b21 * steer
    }

    /// Nominal yaw flow without the disturbance.
    pub fn yaw_flow(&self, z: &ErrorState, steer: f64) -> f64 {
        self.a42 * z.z2 + self.a43 * z.z3 + self.a44 * z.z4 + self.b41 * steer
    }

    /// Element-wise difference `self - other` over the model entries.
    pub fn delta(&self, other: &NominalCoefficients) -> CoefficientDelta {
        CoefficientDelta {
            a22: self.a22 - other.a22,
            a23: self.a23 - other.a23,
            a24: self.a24 - other.a24,
            a42: self.a42 - other.a42,
            a43: self.a43 - other.a43,
            a44: self.a44 - other.a44,
            b21: self.b21 - other.b21,
            b41: self.b41 - other.b41,
        }
    }
}

/// Additive deviation of the plant's error-model entries from nominal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CoefficientDelta {
    pub a22: f64,
    pub a23: f64,
    pub a24: f64,
    pub a42: f64,
    pub a43: f64,
    pub a44: f64,
    pub b21: f64,
    pub b41: f64,
}

/// Relative deviation of the plant from the vehicle parameter set.
/// `0.1` means the plant value is 10% above the configured one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintySpec {
    pub mass: f64,
    pub iz: f64,
    pub cf: f64,
    pub cr: f64,
}

/// Width of the default robustness band.
pub const ROBUST_BAND: f64 = 0.2;

impl UncertaintySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("iz", self.iz),
            ("cf", self.cf),
            ("cr", self.cr),
        ] {
            if !(v.is_finite() && v > -1.0) {
                return Err(Error::invalid(
                    format!("uncertainty.{name}"),
                    format!("relative deviation must exceed -1, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        *self == UncertaintySpec::default()
    }

    /// Plant parameters: mass, inertia and tire stiffness scaled.
    pub fn apply(&self, p: &VehicleParams) -> VehicleParams {
        VehicleParams {
            mass: p.mass * (1.0 + self.mass),
            iz: p.iz * (1.0 + self.iz),
            cf_true: p.cf_true * (1.0 + self.cf),
            cr_true: p.cr_true * (1.0 + self.cr),
            ..p.clone()
        }
    }

    /// Deviation of the plant's error model from the nominal one.
    pub fn coefficient_deltas(&self, p: &VehicleParams, vx: f64) -> Result<CoefficientDelta> {
        let plant = NominalCoefficients::of_plant(&self.apply(p), vx)?;
        let nominal = NominalCoefficients::new(p, vx)?;
        Ok(plant.delta(&nominal))
    }

    /// The sixteen corners of a symmetric band of relative width `band`.
    pub fn corners(band: f64) -> Vec<UncertaintySpec> {
        (0..16)
            .map(|bits: u32| {
                let s = |i: u32| if bits >> i & 1 == 1 { band } else { -band };
                UncertaintySpec {
                    mass: s(0),
                    iz: s(1),
                    cf: s(2),
                    cr: s(3),
                }
            })
            .collect()
    }
}

/// Lumped lateral and yaw disturbances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Disturbances {
    pub lateral: f64,
    pub yaw: f64,
}

/// Disturbances as the residual of the true error rates against the
/// nominal model, so the perturbed error model holds by construction.
pub fn disturbance_residual(
    z: &ErrorState,
    z2_dot: f64,
    z4_dot: f64,
    steer: f64,
    c: &NominalCoefficients,
) -> Disturbances {
    Disturbances {
        lateral: z2_dot - c.lateral_flow(z, steer),
        yaw: z4_dot - c.yaw_flow(z, steer),
    }
}
