//! Two third-order extended high-gain observers: one for the lateral
//! offset channel and one for the heading channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_model::NominalCoefficients;

/// Routh-Hurwitz test for `s^3 + c1 s^2 + c2 s + c3`.
pub fn hurwitz_check(c1: f64, c2: f64, c3: f64) -> bool {
    c1 > 0.0 && c2 > 0.0 && c3 > 0.0 && c1 * c2 > c3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGains")]
pub struct ObserverGains {
    /// Lateral channel gains (h1, h2, h3)
    pub lateral: [f64; 3],
    /// Heading channel gains (g1, g2, g3)
    pub yaw: [f64; 3],
    pub epsilon: f64,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGains {
    lateral: [f64; 3],
    yaw: [f64; 3],
    epsilon: f64,
}

impl Default for RawGains {
    fn default() -> Self {
        let d = ObserverGains::default();
        RawGains {
            lateral: d.lateral,
            yaw: d.yaw,
            epsilon: d.epsilon,
        }
    }
}

impl TryFrom<RawGains> for ObserverGains {
    type Error = Error;

    fn try_from(r: RawGains) -> Result<Self> {
        ObserverGains::new(r.lateral, r.yaw, r.epsilon)
    }
}

impl Default for ObserverGains {
    fn default() -> Self {
        ObserverGains {
            lateral: [2.0, 1.0, 0.5],
            yaw: [2.0, 1.0, 0.5],
            epsilon: 0.005,
        }
    }
}

impl ObserverGains {
    pub fn new(lateral: [f64; 3], yaw: [f64; 3], epsilon: f64) -> Result<Self> {
        for (name, c) in [("observer.lateral", lateral), ("observer.yaw", yaw)] {
            if !hurwitz_check(c[0], c[1], c[2]) {
                return Err(Error::invalid(
                    name,
                    format!("s^3 + {} s^2 + {} s + {} is not Hurwitz", c[0], c[1], c[2]),
                ));
            }
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::invalid(
                "observer.epsilon",
                format!("must lie in (0, 1], got {epsilon}"),
            ));
        }
        Ok(ObserverGains {
            lateral,
            yaw,
            epsilon,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        ObserverGains::new(self.lateral, self.yaw, epsilon)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverState {
    pub z1: f64,
    pub z2: f64,
    /// Lateral disturbance estimate
    pub dl: f64,
    pub z3: f64,
    pub z4: f64,
    /// Yaw disturbance estimate
    pub dpsi: f64,
}

impl ObserverState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.z1, self.z2, self.dl, self.z3, self.z4, self.dpsi]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        ObserverState {
            z1: v[0],
            z2: v[1],
            dl: v[2],
            z3: v[3],
            z4: v[4],
            dpsi: v[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Observer vector field given measured `(z1, z3)` and the applied steering
/// command. The result uses [`ObserverState`] as a container for rates.
pub fn ehgo_derivative(
    obs: &ObserverState,
    measured: (f64, f64),
    steer: f64,
    c: &NominalCoefficients,
    gains: &ObserverGains,
) -> ObserverState {
    let e = gains.epsilon;
    let (e2, e3) = (e * e, e * e * e);
    let [h1, h2, h3] = gains.lateral;
    let [g1, g2, g3] = gains.yaw;
    let lat = measured.0 - obs.z1;
    let head = measured.1 - obs.z3;
    ObserverState {
        z1: obs.z2 + h1 / e * lat,
        z2: c.a22 * obs.z2
            + c.a23 * obs.z3
            + c.a24 * obs.z4
            + c.b21 * steer
            + obs.dl
            + h2 / e2 * lat,
        dl: h3 / e3 * lat,
        z3: obs.z4 + g1 / e * head,
        z4: c.a42 * obs.z2
            + c.a43 * obs.z3
            + c.a44 * obs.z4
            + c.b41 * steer
            + obs.dpsi
            + g2 / e2 * head,
        dpsi: g3 / e3 * head,
    }
}
