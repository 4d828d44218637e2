//! Fixed-step closed-loop integration of plant, reference pose and observers.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::controller::{control_law, virtual_controls, ControlTrace, ControllerParams};
use crate::error::{Error, Result};
use crate::error_model::{disturbance_residual, Disturbances, NominalCoefficients};
use crate::observer::{ehgo_derivative, ObserverGains, ObserverState};
use crate::ode::{rk4_step, try_rk4_step};
use crate::reference::{
    error_rates, reference_heading, tracking_errors, ErrorState, ReferenceState, Tracking,
};
use crate::scenario::{FeedbackSource, ObserverInit, Scenario};
use crate::vehicle::{plant_derivative, PlantDerivative, PlantState, RoadSample, VehicleParams};

/// Composite state: plant (vy, yaw, yaw rate, x, y), reference pose
/// (x, y) and the six observer states.
pub const STATE_LEN: usize = 13;
pub type CompositeState = [f64; STATE_LEN];

const VY: usize = 0;
const YAW: usize = 1;
const YAW_RATE: usize = 2;
const X: usize = 3;
const Y: usize = 4;
const REF_X: usize = 5;
const REF_Y: usize = 6;
const OBS: usize = 7;

/// One logged sample. Field order is the CSV column order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub ref_x: f64,
    pub ref_y: f64,
    pub ref_yaw: f64,
    pub ref_yaw_rate: f64,
    pub ref_yaw_accel: f64,
    pub curvature: f64,
    pub bank: f64,
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub z4: f64,
    pub along: f64,
    pub z1_hat: f64,
    pub z2_hat: f64,
    pub dl_hat: f64,
    pub z3_hat: f64,
    pub z4_hat: f64,
    pub dpsi_hat: f64,
    pub dl: f64,
    pub dpsi: f64,
    pub e_h1: f64,
    pub e_h3: f64,
    pub nu_h: f64,
    pub z3_des: f64,
    pub u_d: f64,
    pub u: f64,
    pub steer_raw: f64,
    pub steer: f64,
    pub saturated: bool,
    pub slip_front: f64,
    pub slip_rear: f64,
}

impl Record {
    pub fn errors(&self) -> ErrorState {
        ErrorState {
            z1: self.z1,
            z2: self.z2,
            z3: self.z3,
            z4: self.z4,
        }
    }
}

/// Where a run stopped early and why.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Abort {
    pub t: f64,
    pub reason: String,
    pub plant: PlantState,
}

/// Saturation statistics over every evaluation of the control law,
/// including the intermediate Runge-Kutta stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SaturationStats {
    pub evaluations: u64,
    pub saturated_evaluations: u64,
    /// Steps whose start-of-step command was clamped
    pub saturated_steps: u64,
    pub steps: u64,
    pub first_time: Option<f64>,
    pub last_time: Option<f64>,
    pub peak_raw: f64,
}

impl SaturationStats {
    fn note(&mut self, t: f64, trace: &ControlTrace) {
        self.evaluations += 1;
        self.peak_raw = self.peak_raw.max(trace.steer_raw.abs());
        if trace.saturated {
            self.saturated_evaluations += 1;
            self.first_time.get_or_insert(t);
            self.last_time = Some(self.last_time.map_or(t, |l: f64| l.max(t)));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimLog {
    pub scenario: String,
    pub dt: f64,
    pub horizon: f64,
    pub log_interval: usize,
    pub records: Vec<Record>,
    pub saturation: SaturationStats,
    pub abort: Option<Abort>,
}

impl SimLog {
    pub fn aborted(&self) -> bool {
        self.abort.is_some()
    }

    /// Spacing of the logged time grid.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.log_interval as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn column(&self, f: impl Fn(&Record) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }
}

/// Everything computed from the composite state at one instant.
#[derive(Clone, Copy, Debug)]
struct Eval {
    rate: CompositeState,
    plant: PlantState,
    reference: ReferenceState,
    tracking: Tracking,
    observer: ObserverState,
    truth: Disturbances,
    trace: ControlTrace,
    road: RoadSample,
    curvature: f64,
    deriv: PlantDerivative,
}

#[derive(Clone, Copy, Debug, Default)]
struct Held {
    measured: Option<(f64, f64)>,
    control: Option<ControlTrace>,
    noise: (f64, f64),
}

/// Closed-loop model of one scenario.
pub struct ClosedLoop<'a> {
    scenario: &'a Scenario,
    nominal: NominalCoefficients,
    plant_params: VehicleParams,
    gains: ObserverGains,
    controller: ControllerParams,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(ClosedLoop {
            scenario,
            nominal: NominalCoefficients::new(&scenario.vehicle, scenario.speed)?,
            plant_params: scenario.uncertainty.apply(&scenario.vehicle),
            gains: scenario.observer,
            controller: scenario.controller,
        })
    }

    pub fn nominal(&self) -> &NominalCoefficients {
        &self.nominal
    }

    fn plant(&self, x: &CompositeState) -> PlantState {
        PlantState {
            vy: x[VY],
            yaw: x[YAW],
            yaw_rate: x[YAW_RATE],
            vx: self.scenario.speed,
            x: x[X],
            y: x[Y],
        }
    }

    /// Initial composite state: the plant is offset from the reference
    /// pose at the origin by the configured errors.
    pub fn initial_state(&self) -> Result<CompositeState> {
        let s = self.scenario;
        let i = &s.initial;
        let r0 = reference_heading(&s.reference.curvature, 0.0, s.speed)?;
        let (sd, cd) = r0.yaw.sin_cos();
        let mut x = [0.0; STATE_LEN];
        x[VY] = i.vy;
        x[YAW] = r0.yaw + i.z3;
        x[YAW_RATE] = r0.yaw_rate + i.z4;
        x[X] = -sd * i.z1;
        x[Y] = cd * i.z1;
        let obs = match i.observer {
            ObserverInit::Zero => ObserverState::default(),
            ObserverInit::Explicit(o) => o,
            ObserverInit::Truth => {
                let plant = self.plant(&x);
                let tracking = tracking_errors(&plant, &r0)?;
                let road = s.road.sample(0.0)?;
                let (d, _) = self.true_disturbance(&plant, &r0, &tracking, &road, 0.0)?;
                let z = tracking.z;
                ObserverState {
                    z1: z.z1,
                    z2: z.z2,
                    dl: d.lateral,
                    z3: z.z3,
                    z4: z.z4,
                    dpsi: d.yaw,
                }
            }
        };
        x[OBS..].copy_from_slice(&obs.to_array());
        Ok(x)
    }

    fn true_disturbance(
        &self,
        plant: &PlantState,
        reference: &ReferenceState,
        tracking: &Tracking,
        road: &RoadSample,
        steer: f64,
    ) -> Result<(Disturbances, PlantDerivative)> {
        let wheel = self.plant_params.wheel_angle(steer);
        let deriv = plant_derivative(plant, wheel, road, &self.plant_params)?;
        let (z2_dot, z4_dot) = error_rates(plant, &deriv, reference, tracking);
        let d = disturbance_residual(&tracking.z, z2_dot, z4_dot, steer, &self.nominal);
        Ok((d, deriv))
    }

    /// Control law on true errors and disturbances. The disturbance depends
    /// on the applied steering, so the command is found by a secant solve.
    fn exact_control(
        &self,
        plant: &PlantState,
        reference: &ReferenceState,
        tracking: &Tracking,
        road: &RoadSample,
    ) -> Result<ControlTrace> {
        let residual = |steer: f64| -> Result<(f64, ControlTrace)> {
            let (d, _) = self.true_disturbance(plant, reference, tracking, road, steer)?;
            let trace = control_law(&tracking.z, &d, &self.nominal, &self.controller)?;
            Ok((trace.steer - steer, trace))
        };
        // The fixed point lies inside the saturation limits, where the
        // residual changes sign; Illinois false position on that bracket.
        let limit = self.controller.steer_max;
        let tol = 1e-13 * limit.max(1.0);
        let (g0, t0) = residual(0.0)?;
        if g0.abs() <= tol {
            return Ok(t0);
        }
        let (mut lo, mut glo, mut hi, mut ghi) = if g0 > 0.0 {
            let (g, _) = residual(limit)?;
            (0.0, g0, limit, g)
        } else {
            let (g, _) = residual(-limit)?;
            (-limit, g, 0.0, g0)
        };
        let mut side = 0i8;
        for _ in 0..200 {
            let c = if glo != ghi {
                (lo * ghi - hi * glo) / (ghi - glo)
            } else {
                0.5 * (lo + hi)
            };
            let (gc, tc) = residual(c)?;
            if gc.abs() <= tol || hi - lo <= tol {
                return Ok(tc);
            }
            if (gc > 0.0) == (glo > 0.0) {
                lo = c;
                glo = gc;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            } else {
                hi = c;
                ghi = gc;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            }
        }
        Err(Error::invalid(
            "sim.feedback",
            "exact feedback: steering fixed point did not converge",
        ))
    }

    fn evaluate(&self, t: f64, x: &CompositeState, held: &Held) -> Result<Eval> {
        let s = self.scenario;
        let plant = self.plant(x);
        let k = s.reference.curvature.sample(t)?;
        let mut reference = reference_heading(&s.reference.curvature, t, s.speed)?;
        reference.x = x[REF_X];
        reference.y = x[REF_Y];
        let tracking = tracking_errors(&plant, &reference)?;
        let road = s.road.sample(t)?;
        let observer = ObserverState::from_slice(&x[OBS..]);
        let z = tracking.z;
        let measured = held
            .measured
            .unwrap_or((z.z1 + held.noise.0, z.z3 + held.noise.1));

        let trace = match held.control {
            Some(c) => c,
            None => match s.sim.feedback {
                FeedbackSource::Observer => {
                    let est = ErrorState {
                        z1: observer.z1,
                        z2: observer.z2,
                        z3: observer.z3,
                        z4: observer.z4,
                    };
                    let d = Disturbances {
                        lateral: observer.dl,
                        yaw: observer.dpsi,
                    };
                    control_law(&est, &d, &self.nominal, &self.controller)?
                }
                FeedbackSource::Exact => {
                    self.exact_control(&plant, &reference, &tracking, &road)?
                }
            },
        };

        let (truth, deriv) =
            self.true_disturbance(&plant, &reference, &tracking, &road, trace.steer)?;
        let obs_rate =
            ehgo_derivative(&observer, measured, trace.steer, &self.nominal, &self.gains);

        let mut rate = [0.0; STATE_LEN];
        rate[VY] = deriv.vy_dot;
        rate[YAW] = deriv.yaw_rate;
        rate[YAW_RATE] = deriv.yaw_accel;
        rate[X] = deriv.x_dot;
        rate[Y] = deriv.y_dot;
        let (sd, cd) = reference.yaw.sin_cos();
        rate[REF_X] = s.speed * cd;
        rate[REF_Y] = s.speed * sd;
        rate[OBS..].copy_from_slice(&obs_rate.to_array());
        if rate.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state derivative"));
        }
        Ok(Eval {
            rate,
            plant,
            reference,
            tracking,
            observer,
            truth,
            trace,
            road,
            curvature: k.value,
            deriv,
        })
    }

    fn record(t: f64, e: &Eval) -> Record {
        let z = e.tracking.z;
        let o = e.observer;
        Record {
            t,
            x: e.plant.x,
            y: e.plant.y,
            yaw: e.plant.yaw,
            vy: e.plant.vy,
            yaw_rate: e.plant.yaw_rate,
            ref_x: e.reference.x,
            ref_y: e.reference.y,
            ref_yaw: e.reference.yaw,
            ref_yaw_rate: e.reference.yaw_rate,
            ref_yaw_accel: e.reference.yaw_accel,
            curvature: e.curvature,
            bank: e.road.bank,
            z1: z.z1,
            z2: z.z2,
            z3: z.z3,
            z4: z.z4,
            along: e.tracking.along,
            z1_hat: o.z1,
            z2_hat: o.z2,
            dl_hat: o.dl,
            z3_hat: o.z3,
            z4_hat: o.z4,
            dpsi_hat: o.dpsi,
            dl: e.truth.lateral,
            dpsi: e.truth.yaw,
            e_h1: z.z1 - o.z1,
            e_h3: z.z3 - o.z3,
            nu_h: e.trace.nu_h,
            z3_des: e.trace.z3_des,
            u_d: e.trace.u_d,
            u: e.trace.u,
            steer_raw: e.trace.steer_raw,
            steer: e.trace.steer,
            saturated: e.trace.saturated,
            slip_front: e.deriv.tires.slip.front,
            slip_rear: e.deriv.tires.slip.rear,
        }
    }

    /// Run the scenario over its full horizon.
    pub fn run(&self) -> Result<SimLog> {
        let s = self.scenario;
        let dt = s.sim.dt;
        let steps = s.steps();
        let mut log = SimLog {
            scenario: s.name.clone(),
            dt,
            horizon: s.sim.horizon,
            log_interval: s.sim.log_interval,
            records: Vec::with_capacity(steps / s.sim.log_interval + 2),
            saturation: SaturationStats::default(),
            abort: None,
        };
        let mut x = self.initial_state()?;
        let mut held = Held::default();
        let mut rng = ChaCha8Rng::seed_from_u64(s.sim.seed);
        let noise = [
            Normal::new(0.0, s.sim.noise_std[0])
                .map_err(|e| Error::invalid("sim.noise_std", e.to_string()))?,
            Normal::new(0.0, s.sim.noise_std[1])
                .map_err(|e| Error::invalid("sim.noise_std", e.to_string()))?,
        ];
        let noisy = s.sim.noise_std.iter().any(|&v| v > 0.0);
        let meas_period = s.sim.measurement_rate_hz.map(|r| 1.0 / r);
        let ctrl_period = s.sim.control_rate_hz.map(|r| 1.0 / r);
        let (mut next_meas, mut next_ctrl) = (0.0f64, 0.0f64);
        let tick_slack = 1e-9 * dt;

        for k in 0..=steps {
            let t = k as f64 * dt;
            let outcome = (|| -> Result<Option<CompositeState>> {
                if noisy && meas_period.is_none() {
                    held.noise = (noise[0].sample(&mut rng), noise[1].sample(&mut rng));
                }
                if let Some(p) = meas_period {
                    if t + tick_slack >= next_meas {
                        if noisy {
                            held.noise = (noise[0].sample(&mut rng), noise[1].sample(&mut rng));
                        }
                        held.measured = None;
                        let e = self.evaluate(
                            t,
                            &x,
                            &Held {
                                control: held.control,
                                ..held
                            },
                        )?;
                        let z = e.tracking.z;
                        held.measured = Some((z.z1 + held.noise.0, z.z3 + held.noise.1));
                        while next_meas <= t + tick_slack {
                            next_meas += p;
                        }
                    }
                }
                if let Some(p) = ctrl_period {
                    if t + tick_slack >= next_ctrl {
                        let e = self.evaluate(
                            t,
                            &x,
                            &Held {
                                control: None,
                                ..held
                            },
                        )?;
                        held.control = Some(e.trace);
                        while next_ctrl <= t + tick_slack {
                            next_ctrl += p;
                        }
                    }
                }
                let e0 = self.evaluate(t, &x, &held)?;
                log.saturation.note(t, &e0.trace);
                log.saturation.steps += 1;
                if e0.trace.saturated {
                    log.saturation.saturated_steps += 1;
                }
                if k % s.sim.log_interval == 0 || k == steps {
                    log.records.push(Self::record(t, &e0));
                }
                if k == steps {
                    return Ok(None);
                }
                let mut first = Some(e0.rate);
                let mut stage = |ts: f64, xs: &CompositeState| -> Result<CompositeState> {
                    if let Some(r) = first.take() {
                        return Ok(r);
                    }
                    let e = self.evaluate(ts, xs, &held)?;
                    log.saturation.note(ts, &e.trace);
                    Ok(e.rate)
                };
                let next = try_rk4_step(&mut stage, t, &x, dt)?;
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("composite state"));
                }
                Ok(Some(next))
            })();
            match outcome {
                Ok(Some(next)) => x = next,
                Ok(None) => break,
                Err(err) => {
                    log.abort = Some(Abort {
                        t,
                        reason: err.to_string(),
                        plant: self.plant(&x),
                    });
                    break;
                }
            }
        }
        Ok(log)
    }
}

/// Validate and run a scenario.
pub fn run_scenario(s: &Scenario) -> Result<SimLog> {
    ClosedLoop::new(s)?.run()
}

/// Lateral loop under exact feedback with the heading error held on its
/// balancing reference and zero yaw-rate error. Integrates
/// `z1' = z2`, `z2' = nominal flow + D_l` with the library's steering
/// command and returns `(t, z1, z2)` samples on the step grid.
pub fn balanced_lateral_response(
    c: &NominalCoefficients,
    cp: &ControllerParams,
    initial: (f64, f64),
    disturbance: &dyn Fn(f64) -> Disturbances,
    dt: f64,
    horizon: f64,
) -> Result<Vec<[f64; 3]>> {
    let steps = (horizon / dt).round() as usize;
    let field = |t: f64, x: &[f64; 2]| -> Result<[f64; 2]> {
        let d = disturbance(t);
        let mut z = ErrorState {
            z1: x[0],
            z2: x[1],
            z3: 0.0,
            z4: 0.0,
        };
        let (_, z3_des) = virtual_controls(&z, &d, c, cp)?;
        z.z3 = z3_des;
        let trace = control_law(&z, &d, c, cp)?;
        Ok([x[1], c.lateral_flow(&z, trace.steer) + d.lateral])
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = [initial.0, initial.1];
    out.push([0.0, x[0], x[1]]);
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut f = field;
        x = try_rk4_step(&mut f, t, &x, dt)?;
        out.push([(k + 1) as f64 * dt, x[0], x[1]]);
    }
    Ok(out)
}

/// Integrate an arbitrary fixed-size system with RK4 from `t0`, returning
/// the state after `steps` steps.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    x0: [f64; N],
    t0: f64,
    dt: f64,
    steps: usize,
) -> [f64; N] {
    let mut x = x0;
    for k in 0..steps {
        x = rk4_step(&f, t0 + k as f64 * dt, &x, dt);
    }
    x
}
