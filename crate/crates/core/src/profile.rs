//! Piecewise time profiles built from constant, ramp and sinusoid segments.
//!
//! Each segment is evaluated analytically, so value, slope and running
//! integral are exact at every time. Profiles are used for the path
//! curvature and for the road banking angle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Constant {
        duration: f64,
        value: f64,
    },
    Ramp {
        duration: f64,
        from: f64,
        to: f64,
    },
    /// `offset + amplitude * sin(2*pi*tau/period + phase)` with `tau` measured
    /// from the start of the segment.
    Sine {
        duration: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Constant { duration, .. }
            | Segment::Ramp { duration, .. }
            | Segment::Sine { duration, .. } => duration,
        }
    }

    fn value(&self, tau: f64) -> f64 {
        match *self {
            Segment::Constant { value, .. } => value,
            Segment::Ramp { duration, from, to } => from + (to - from) * tau / duration,
            Segment::Sine {
                amplitude,
                period,
                offset,
                phase,
                ..
            } => offset + amplitude * (TAU * tau / period + phase).sin(),
        }
    }

    fn slope(&self, tau: f64) -> f64 {
        match *self {
            Segment::Constant { .. } => 0.0,
            Segment::Ramp { duration, from, to } => (to - from) / duration,
            Segment::Sine {
                amplitude,
                period,
                phase,
                ..
            } => amplitude * TAU / period * (TAU * tau / period + phase).cos(),
        }
    }

    fn integral(&self, tau: f64) -> f64 {
        match *self {
            Segment::Constant { value, .. } => value * tau,
            Segment::Ramp { duration, from, to } => {
                from * tau + 0.5 * (to - from) * tau * tau / duration
            }
            Segment::Sine {
                amplitude,
                period,
                offset,
                phase,
                ..
            } => {
                let w = TAU / period;
                offset * tau - amplitude / w * ((w * tau + phase).cos() - phase.cos())
            }
        }
    }

    /// Upper bound on |value| over the segment.
    fn bound(&self) -> f64 {
        match *self {
            Segment::Constant { value, .. } => value.abs(),
            Segment::Ramp { from, to, .. } => from.abs().max(to.abs()),
            Segment::Sine {
                amplitude, offset, ..
            } => offset.abs() + amplitude.abs(),
        }
    }

    fn negated(&self) -> Segment {
        match *self {
            Segment::Constant { duration, value } => Segment::Constant {
                duration,
                value: -value,
            },
            Segment::Ramp { duration, from, to } => Segment::Ramp {
                duration,
                from: -from,
                to: -to,
            },
            Segment::Sine {
                duration,
                amplitude,
                period,
                offset,
                phase,
            } => Segment::Sine {
                duration,
                amplitude: -amplitude,
                period,
                offset: -offset,
                phase,
            },
        }
    }

    fn check(&self, index: usize, last: bool) -> Result<()> {
        let d = self.duration();
        let name = format!("segment[{index}].duration");
        if d.is_nan() || d <= 0.0 {
            return Err(Error::invalid(name, format!("must be positive, got {d}")));
        }
        if d.is_infinite() && !last {
            return Err(Error::invalid(
                name,
                "only the last segment may have an infinite duration",
            ));
        }
        let finite = match *self {
            Segment::Constant { value, .. } => value.is_finite(),
            Segment::Ramp { from, to, .. } => from.is_finite() && to.is_finite() && d.is_finite(),
            Segment::Sine {
                amplitude,
                period,
                offset,
                phase,
                ..
            } => {
                if !(period.is_finite() && period > 0.0) {
                    return Err(Error::invalid(
                        format!("segment[{index}].period"),
                        format!("must be positive and finite, got {period}"),
                    ));
                }
                amplitude.is_finite() && offset.is_finite() && phase.is_finite()
            }
        };
        if !finite {
            return Err(Error::invalid(
                format!("segment[{index}]"),
                "parameters must be finite (a ramp also needs a finite duration)",
            ));
        }
        Ok(())
    }
}

/// A sequence of segments laid end to end starting at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct Profile {
    segments: Vec<Segment>,
    starts: Vec<f64>,
    integrals: Vec<f64>,
}

impl Profile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("profile", "needs at least one segment"));
        }
        let n = segments.len();
        let mut starts = Vec::with_capacity(n);
        let mut integrals = Vec::with_capacity(n);
        let (mut t, mut acc) = (0.0, 0.0);
        for (i, seg) in segments.iter().enumerate() {
            seg.check(i, i + 1 == n)?;
            starts.push(t);
            integrals.push(acc);
            if i + 1 < n {
                acc += seg.integral(seg.duration());
                t += seg.duration();
            }
        }
        Ok(Profile {
            segments,
            starts,
            integrals,
        })
    }

    /// A single constant segment that never ends.
    pub fn constant(value: f64) -> Self {
        Profile::new(vec![Segment::Constant {
            duration: f64::INFINITY,
            value,
        }])
        .expect("constant profile is valid")
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn horizon(&self) -> f64 {
        let last = self.segments.len() - 1;
        self.starts[last] + self.segments[last].duration()
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::OutOfHorizon { t, horizon });
        }
        // Right-continuous: a breakpoint belongs to the segment it starts.
        let idx = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        Ok((idx, t - self.starts[idx]))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let (i, tau) = self.locate(t)?;
        Ok(self.segments[i].value(tau))
    }

    pub fn slope(&self, t: f64) -> Result<f64> {
        let (i, tau) = self.locate(t)?;
        Ok(self.segments[i].slope(tau))
    }

    /// Integral of the profile from 0 to `t`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        let (i, tau) = self.locate(t)?;
        Ok(self.integrals[i] + self.segments[i].integral(tau))
    }

    /// Value, slope and integral in one lookup.
    pub fn sample(&self, t: f64) -> Result<ProfileSample> {
        let (i, tau) = self.locate(t)?;
        let seg = &self.segments[i];
        Ok(ProfileSample {
            value: seg.value(tau),
            slope: seg.slope(tau),
            integral: self.integrals[i] + seg.integral(tau),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.segments.iter().map(Segment::bound).fold(0.0, f64::max)
    }

    pub fn negated(&self) -> Profile {
        Profile::new(self.segments.iter().map(Segment::negated).collect())
            .expect("negating a valid profile keeps it valid")
    }

    /// Times at which a new segment starts (excluding 0).
    pub fn breakpoints(&self) -> &[f64] {
        &self.starts[1..]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileSample {
    pub value: f64,
    pub slope: f64,
    pub integral: f64,
}

impl TryFrom<Vec<Segment>> for Profile {
    type Error = Error;

    fn try_from(segments: Vec<Segment>) -> Result<Self> {
        Profile::new(segments)
    }
}

impl From<Profile> for Vec<Segment> {
    fn from(p: Profile) -> Self {
        p.segments
    }
}

impl Default for Profile {
    fn default() -> Self {
        Profile::constant(0.0)
    }
}
