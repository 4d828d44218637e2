//! Desired trajectory from a curvature profile and projection of the plant
//! pose into path-relative tracking errors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::profile::Profile;
use crate::vehicle::{PlantDerivative, PlantState, MIN_SPEED};

/// Path curvature over time, 1/m.
pub type CurvatureProfile = Profile;

/// Heading kinematics of the reference at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ReferenceState {
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
    pub lat_accel: f64,
    /// World position of the reference point, m
    pub x: f64,
    pub y: f64,
}

fn check_speed(vx: f64) -> Result<()> {
    if vx < MIN_SPEED || !vx.is_finite() {
        return Err(Error::SpeedBelowMinimum { vx, min: MIN_SPEED });
    }
    Ok(())
}

/// Heading, yaw rate, yaw acceleration and lateral acceleration of the
/// reference. The pose fields are left at zero; see [`reference_state`].
pub fn reference_heading(profile: &CurvatureProfile, t: f64, vx: f64) -> Result<ReferenceState> {
    check_speed(vx)?;
    let k = profile.sample(t)?;
    Ok(ReferenceState {
        yaw: k.integral * vx,
        yaw_rate: k.value * vx,
        yaw_accel: k.slope * vx,
        lat_accel: k.value * vx * vx,
        x: 0.0,
        y: 0.0,
    })
}

/// Rate of the reference pose.
pub fn reference_pose_rate(profile: &CurvatureProfile, t: f64, vx: f64) -> Result<[f64; 2]> {
    let yaw = profile.integral(t)? * vx;
    Ok([vx * yaw.cos(), vx * yaw.sin()])
}

/// Full reference state, with the pose integrated from the origin by RK4
/// at step `dt` (a shorter final step lands exactly on `t`).
pub fn reference_state(
    profile: &CurvatureProfile,
    t: f64,
    vx: f64,
    dt: f64,
) -> Result<ReferenceState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let mut r = reference_heading(profile, t, vx)?;
    let mut pose = [0.0, 0.0];
    let mut time = 0.0;
    let steps = (t / dt).floor() as u64;
    let f = |s: f64, _: &[f64; 2]| {
        // t is inside the horizon, so every stage time is too
        reference_pose_rate(profile, s.min(t), vx).expect("stage time inside horizon")
    };
    for k in 0..steps {
        time = k as f64 * dt;
        pose = rk4_step(&f, time, &pose, dt);
        time += dt;
    }
    let rest = t - time;
    if rest > 0.0 {
        pose = rk4_step(&f, time, &pose, rest);
    }
    r.x = pose[0];
    r.y = pose[1];
    Ok(r)
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorState {
    /// Signed lateral offset from the path, positive to the left, m
    pub z1: f64,
    /// Rate of `z1`, m/s
    pub z2: f64,
    /// Heading error, rad
    pub z3: f64,
    /// Yaw rate error, rad/s
    pub z4: f64,
}

impl ErrorState {
    pub fn norm(&self) -> f64 {
        (self.z1 * self.z1 + self.z2 * self.z2 + self.z3 * self.z3 + self.z4 * self.z4).sqrt()
    }
}

/// Tracking errors together with the along-track offset of the plant
/// from the time-indexed reference point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tracking {
    pub z: ErrorState,
    /// Along-track offset, m
    pub along: f64,
}

/// Project the plant into path-relative errors.
///
/// `z2` is the exact time derivative of the geometric lateral offset. For
/// small heading errors and zero along-track offset it reduces to
/// [`linear_lateral_rate`].
pub fn tracking_errors(plant: &PlantState, reference: &ReferenceState) -> Result<Tracking> {
    let (sd, cd) = reference.yaw.sin_cos();
    let dx = plant.x - reference.x;
    let dy = plant.y - reference.y;
    let z1 = -sd * dx + cd * dy;
    let along = cd * dx + sd * dy;
    let z3 = wrap_angle(plant.yaw - reference.yaw);
    let (s3, c3) = z3.sin_cos();
    let z2 = plant.vx * s3 + plant.vy * c3 - reference.yaw_rate * along;
    let z4 = plant.yaw_rate - reference.yaw_rate;
    let t = Tracking {
        z: ErrorState { z1, z2, z3, z4 },
        along,
    };
    if [z1, z2, z3, z4, along].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tracking errors"));
    }
    Ok(t)
}

/// Small-angle lateral error rate `vy + vx * z3`.
pub fn linear_lateral_rate(vy: f64, vx: f64, z3: f64) -> f64 {
    vy + vx * z3
}

/// True rates of `z2` and `z4` given the plant derivative at the same instant.
pub fn error_rates(
    plant: &PlantState,
    deriv: &PlantDerivative,
    reference: &ReferenceState,
    tracking: &Tracking,
) -> (f64, f64) {
    let z = &tracking.z;
    let (s3, c3) = z.z3.sin_cos();
    let along_rate = reference.yaw_rate * z.z1 + plant.vx * c3 - plant.vy * s3 - plant.vx;
    let z2_dot = plant.vx * c3 * z.z4 + deriv.vy_dot * c3
        - plant.vy * s3 * z.z4
        - reference.yaw_accel * tracking.along
        - reference.yaw_rate * along_rate;
    let z4_dot = deriv.yaw_accel - reference.yaw_accel;
    (z2_dot, z4_dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Segment;
    use crate::vehicle::{plant_derivative, RoadSample, VehicleParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn straight_path_is_trivial() {
        let p = Profile::constant(0.0);
        for &t in &[0.0, 1.0, 17.5] {
            let r = reference_heading(&p, t, 10.0).unwrap();
            assert_eq!((r.yaw, r.yaw_rate, r.lat_accel), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn constant_curvature_rates() {
        let p = Profile::constant(0.01);
        let r = reference_heading(&p, 3.0, 10.0).unwrap();
        assert_relative_eq!(r.yaw_rate, 0.1, max_relative = 1e-15);
        assert_relative_eq!(r.lat_accel, 1.0, max_relative = 1e-15);
        assert_relative_eq!(r.yaw, 0.3, max_relative = 1e-14);
        assert_eq!(r.yaw_accel, 0.0);
    }

    #[test]
    fn constant_curvature_traces_circle() {
        let k = 0.05;
        let vx = 8.0;
        let p = Profile::constant(k);
        let center = (0.0, 1.0 / k);
        for &t in &[1.0, 5.3, 12.0] {
            let r = reference_state(&p, t, vx, 1e-3).unwrap();
            let radius = (r.x - center.0).hypot(r.y - center.1);
            assert_relative_eq!(radius, 1.0 / k, max_relative = 1e-10);
            assert_relative_eq!(r.x, (k * vx * t).sin() / k, epsilon = 1e-9);
            assert_relative_eq!(r.y, (1.0 - (k * vx * t).cos()) / k, epsilon = 1e-9);
        }
    }

    #[test]
    fn out_of_horizon() {
        let p = Profile::new(vec![Segment::Constant {
            duration: 1.0,
            value: 0.0,
        }])
        .unwrap();
        assert!(reference_heading(&p, 2.0, 5.0).is_err());
    }

    fn plant(x: f64, y: f64, yaw: f64, vy: f64, yaw_rate: f64, vx: f64) -> PlantState {
        PlantState {
            vy,
            yaw,
            yaw_rate,
            vx,
            x,
            y,
        }
    }

    #[test]
    fn perfect_tracking() {
        let r = ReferenceState {
            yaw: 0.4,
            yaw_rate: 0.1,
            x: 3.0,
            y: -2.0,
            ..Default::default()
        };
        let t = tracking_errors(&plant(3.0, -2.0, 0.4, 0.0, 0.1, 10.0), &r).unwrap();
        assert_eq!(t.z, ErrorState::default());
    }

    #[test]
    fn left_offset_on_straight_path() {
        let r = ReferenceState::default();
        let t = tracking_errors(&plant(0.0, 0.5, 0.0, 0.0, 0.0, 10.0), &r).unwrap();
        assert_eq!(t.z.z1, 0.5);
        assert_eq!(t.z.z3, 0.0);
    }

    #[test]
    fn heading_offset_rate() {
        let r = ReferenceState::default();
        let t = tracking_errors(&plant(0.0, 0.0, 0.1, 0.0, 0.0, 10.0), &r).unwrap();
        assert_relative_eq!(t.z.z3, 0.1);
        assert_relative_eq!(t.z.z2, 10.0 * 0.1f64.sin());
        assert_relative_eq!(linear_lateral_rate(0.0, 10.0, t.z.z3), 1.0);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0);
        assert_relative_eq!(wrap_angle(0.1 + 4.0 * PI), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn error_rates_match_finite_difference() {
        // Move plant and reference a short time forward and difference z.
        let params = VehicleParams::default();
        let vx = 7.0;
        let p = Profile::new(vec![Segment::Sine {
            duration: f64::INFINITY,
            amplitude: 0.03,
            period: 6.0,
            offset: 0.01,
            phase: 0.3,
        }])
        .unwrap();
        let t0 = 1.3;
        let r0 = reference_state(&p, t0, vx, 1e-4).unwrap();
        let s0 = plant(r0.x + 0.4, r0.y - 0.2, r0.yaw + 0.07, 0.3, 0.12, vx);
        let wheel = 0.02;
        let d = plant_derivative(&s0, wheel, &RoadSample::default(), &params).unwrap();
        let tr = tracking_errors(&s0, &r0).unwrap();
        let (z2_dot, z4_dot) = error_rates(&s0, &d, &r0, &tr);

        let h = 1e-5;
        let at = |sign: f64| {
            let t = t0 + sign * h;
            let mut r = reference_heading(&p, t, vx).unwrap();
            // first-order motion is enough: the central difference cancels curvature
            let rate = reference_pose_rate(&p, t0, vx).unwrap();
            r.x = r0.x + sign * h * rate[0];
            r.y = r0.y + sign * h * rate[1];
            let s = plant(
                s0.x + sign * h * d.x_dot,
                s0.y + sign * h * d.y_dot,
                s0.yaw + sign * h * d.yaw_rate,
                s0.vy + sign * h * d.vy_dot,
                s0.yaw_rate + sign * h * d.yaw_accel,
                vx,
            );
            tracking_errors(&s, &r).unwrap().z
        };
        let (a, b) = (at(1.0), at(-1.0));
        assert_relative_eq!((a.z1 - b.z1) / (2.0 * h), tr.z.z2, epsilon = 1e-6);
        assert_relative_eq!((a.z3 - b.z3) / (2.0 * h), tr.z.z4, epsilon = 1e-6);
        assert_relative_eq!((a.z2 - b.z2) / (2.0 * h), z2_dot, epsilon = 1e-6);
        assert_relative_eq!((a.z4 - b.z4) / (2.0 * h), z4_dot, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn yaw_rate_recovers_curvature(
            amp in -0.05f64..0.05,
            period in 1.0f64..20.0,
            t in 0.0f64..30.0,
            vx in MIN_SPEED..30.0,
        ) {
            let p = Profile::new(vec![
                Segment::Ramp { duration: 2.0, from: 0.0, to: amp },
                Segment::Sine { duration: f64::INFINITY, amplitude: amp, period, offset: 0.0, phase: 0.0 },
            ]).unwrap();
            let r = reference_heading(&p, t, vx).unwrap();
            prop_assert!((r.yaw_rate / vx - p.value(t).unwrap()).abs() <= 1e-15);
        }

        #[test]
        fn mirrored_pose_negates_errors(
            x in -5.0f64..5.0, y in -5.0f64..5.0, yaw in -1.0f64..1.0,
            ryaw in -1.0f64..1.0, rx in -5.0f64..5.0, ry in -5.0f64..5.0,
        ) {
            let r = ReferenceState { yaw: ryaw, x: rx, y: ry, ..Default::default() };
            let rm = ReferenceState { yaw: -ryaw, x: rx, y: -ry, ..Default::default() };
            let a = tracking_errors(&plant(x, y, yaw, 0.0, 0.0, 5.0), &r).unwrap().z;
            let b = tracking_errors(&plant(x, -y, -yaw, 0.0, 0.0, 5.0), &rm).unwrap().z;
            prop_assert!((a.z1 + b.z1).abs() < 1e-12);
            prop_assert!((a.z3 + b.z3).abs() < 1e-12);
        }

        #[test]
        fn heading_error_continuous_across_seam(base in -0.01f64..0.01) {
            // Reference yaw near pi, plant yaw crossing pi: z3 stays small.
            let r = ReferenceState { yaw: PI - 0.005, ..Default::default() };
            let a = tracking_errors(&plant(0.0, 0.0, PI - 0.005 + base, 0.0, 0.0, 5.0), &r).unwrap();
            let b = tracking_errors(&plant(0.0, 0.0, -PI - 0.005 + base + 1e-6, 0.0, 0.0, 5.0), &r).unwrap();
            prop_assert!((a.z.z3 - b.z.z3).abs() < 1e-5);
        }
    }
}
