//! Python bindings. Structured values cross the boundary as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use ::lateral_ehgo as core;
use core::controller::ControllerParams;
use core::error_model::{Disturbances, NominalCoefficients};
use core::observer::{ObserverGains, ObserverState};
use core::reference::ErrorState;
use core::runner::{execute, RunManifest, ScenarioSource, SweepAxis};
use core::scenario::PRESETS;
use core::sim::{Record, SimLog};
use core::vehicle::{PlantState, RoadSample, VehicleParams};

create_exception!(lateral_ehgo, SimulationError, PyValueError);

fn err(e: core::Error) -> PyErr {
    SimulationError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn vehicle_or_default(vehicle: Option<&Bound<'_, PyAny>>) -> PyResult<VehicleParams> {
    let p = match vehicle {
        Some(v) => from_py(v)?,
        None => VehicleParams::default(),
    };
    p.validate().map_err(err)?;
    Ok(p)
}

fn controller_or_default(controller: Option<&Bound<'_, PyAny>>) -> PyResult<ControllerParams> {
    let c = match controller {
        Some(v) => from_py(v)?,
        None => ControllerParams::default(),
    };
    c.validate().map_err(err)?;
    Ok(c)
}

/// A closed-loop scenario.
#[pyclass(name = "Scenario", module = "lateral_ehgo")]
struct PyScenario {
    inner: core::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        core::Scenario::preset(name)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        core::Scenario::from_toml_str(text, std::path::Path::new("<string>"))
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        core::Scenario::load(&path)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    /// Set a parameter by dotted name, as accepted by sweeps.
    fn set_param(&mut self, name: &str, value: f64) -> PyResult<()> {
        self.inner.set_param(name, value).map_err(err)
    }

    fn mirrored(&self) -> Self {
        Self {
            inner: self.inner.mirrored(),
        }
    }

    fn run(&self, py: Python<'_>) -> PyResult<PySimLog> {
        let s = self.inner.clone();
        let log = py.detach(move || core::run_scenario(&s)).map_err(err)?;
        Ok(PySimLog {
            inner: log,
            settings: self.inner.metrics,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[setter]
    fn set_name(&mut self, name: String) {
        self.inner.name = name;
    }

    #[getter]
    fn speed(&self) -> f64 {
        self.inner.speed
    }

    #[setter]
    fn set_speed(&mut self, v: f64) {
        self.inner.speed = v;
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.observer.epsilon
    }

    #[setter]
    fn set_epsilon(&mut self, v: f64) {
        self.inner.observer.epsilon = v;
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.sim.dt
    }

    #[setter]
    fn set_dt(&mut self, v: f64) {
        self.inner.sim.dt = v;
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.sim.horizon
    }

    #[setter]
    fn set_horizon(&mut self, v: f64) {
        self.inner.sim.horizon = v;
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, speed={}, epsilon={}, dt={}, horizon={})",
            self.inner.name,
            self.inner.speed,
            self.inner.observer.epsilon,
            self.inner.sim.dt,
            self.inner.sim.horizon
        )
    }
}

/// Result of a run: logged samples plus saturation and abort information.
#[pyclass(name = "SimLog", module = "lateral_ehgo")]
struct PySimLog {
    inner: SimLog,
    settings: core::scenario::MetricSettings,
}

fn record_field(r: &Record, name: &str) -> Option<f64> {
    Some(match name {
        "t" => r.t,
        "x" => r.x,
        "y" => r.y,
        "yaw" => r.yaw,
        "vy" => r.vy,
        "yaw_rate" => r.yaw_rate,
        "ref_x" => r.ref_x,
        "ref_y" => r.ref_y,
        "ref_yaw" => r.ref_yaw,
        "ref_yaw_rate" => r.ref_yaw_rate,
        "ref_yaw_accel" => r.ref_yaw_accel,
        "curvature" => r.curvature,
        "bank" => r.bank,
        "z1" => r.z1,
        "z2" => r.z2,
        "z3" => r.z3,
        "z4" => r.z4,
        "along" => r.along,
        "z1_hat" => r.z1_hat,
        "z2_hat" => r.z2_hat,
        "dl_hat" => r.dl_hat,
        "z3_hat" => r.z3_hat,
        "z4_hat" => r.z4_hat,
        "dpsi_hat" => r.dpsi_hat,
        "dl" => r.dl,
        "dpsi" => r.dpsi,
        "e_h1" => r.e_h1,
        "e_h3" => r.e_h3,
        "nu_h" => r.nu_h,
        "z3_des" => r.z3_des,
        "u_d" => r.u_d,
        "u" => r.u,
        "steer_raw" => r.steer_raw,
        "steer" => r.steer,
        "saturated" => f64::from(u8::from(r.saturated)),
        "slip_front" => r.slip_front,
        "slip_rear" => r.slip_rear,
        _ => return None,
    })
}

#[pymethods]
impl PySimLog {
    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    /// One logged column as a list of floats.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        if record_field(&Record::default(), name).is_none() {
            return Err(PyKeyError::new_err(name.to_string()));
        }
        Ok(self
            .inner
            .records
            .iter()
            .map(|r| record_field(r, name).unwrap_or(f64::NAN))
            .collect())
    }

    fn record<'py>(&self, py: Python<'py>, index: isize) -> PyResult<Bound<'py, PyAny>> {
        let n = self.inner.records.len() as isize;
        let i = if index < 0 { n + index } else { index };
        if !(0..n).contains(&i) {
            return Err(pyo3::exceptions::PyIndexError::new_err(
                "record index out of range",
            ));
        }
        to_py(py, &self.inner.records[i as usize])
    }

    #[getter]
    fn aborted(&self) -> bool {
        self.inner.aborted()
    }

    #[getter]
    fn abort_reason(&self) -> Option<String> {
        self.inner.abort.as_ref().map(|a| a.reason.clone())
    }

    #[getter]
    fn abort_time(&self) -> Option<f64> {
        self.inner.abort.as_ref().map(|a| a.t)
    }

    #[getter]
    fn saturation<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.saturation)
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let m = core::metrics(&self.inner, &self.settings).map_err(err)?;
        to_py(py, &m)
    }

    fn write_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).map_err(err)
    }
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    PRESETS.to_vec()
}

#[pyfunction]
fn run_scenario(py: Python<'_>, scenario: &PyScenario) -> PyResult<PySimLog> {
    scenario.run(py)
}

#[pyfunction]
fn dugoff_shaping(gamma: f64) -> PyResult<f64> {
    core::vehicle::dugoff_shaping(gamma).map_err(err)
}

/// Tire forces for a body state and road-wheel angle.
#[pyfunction]
#[pyo3(signature = (vy, yaw_rate, vx, wheel_angle, slip_ratio = 0.0, vehicle = None))]
fn tire_forces<'py>(
    py: Python<'py>,
    vy: f64,
    yaw_rate: f64,
    vx: f64,
    wheel_angle: f64,
    slip_ratio: f64,
    vehicle: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = vehicle_or_default(vehicle)?;
    let state = PlantState {
        vy,
        yaw_rate,
        vx,
        ..Default::default()
    };
    let road = RoadSample {
        bank: 0.0,
        slip_ratio,
    };
    let out = core::tire_lateral_forces(&state, wheel_angle, &road, &p).map_err(err)?;
    to_py(py, &out)
}

#[pyfunction]
#[pyo3(signature = (speed, vehicle = None))]
fn nominal_coefficients<'py>(
    py: Python<'py>,
    speed: f64,
    vehicle: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = vehicle_or_default(vehicle)?;
    to_py(py, &NominalCoefficients::new(&p, speed).map_err(err)?)
}

/// Steering law on errors `(z1, z2, z3, z4)` and disturbances `(lateral, yaw)`.
#[pyfunction]
#[pyo3(signature = (errors, disturbances, speed, controller = None, vehicle = None))]
fn control_law<'py>(
    py: Python<'py>,
    errors: [f64; 4],
    disturbances: [f64; 2],
    speed: f64,
    controller: Option<&Bound<'py, PyAny>>,
    vehicle: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let c = NominalCoefficients::new(&vehicle_or_default(vehicle)?, speed).map_err(err)?;
    let cp = controller_or_default(controller)?;
    let z = ErrorState {
        z1: errors[0],
        z2: errors[1],
        z3: errors[2],
        z4: errors[3],
    };
    let d = Disturbances {
        lateral: disturbances[0],
        yaw: disturbances[1],
    };
    to_py(py, &core::control_law(&z, &d, &c, &cp).map_err(err)?)
}

/// Observer right-hand side for state `(z1, z2, dl, z3, z4, dpsi)`.
#[pyfunction]
#[pyo3(signature = (state, measured, steer, speed, epsilon = 0.005, vehicle = None))]
fn observer_derivative(
    state: [f64; 6],
    measured: (f64, f64),
    steer: f64,
    speed: f64,
    epsilon: f64,
    vehicle: Option<&Bound<'_, PyAny>>,
) -> PyResult<[f64; 6]> {
    let c = NominalCoefficients::new(&vehicle_or_default(vehicle)?, speed).map_err(err)?;
    let gains = ObserverGains::default()
        .with_epsilon(epsilon)
        .map_err(err)?;
    let d = core::ehgo_derivative(
        &ObserverState::from_slice(&state),
        measured,
        steer,
        &c,
        &gains,
    );
    Ok(d.to_array())
}

/// Run scenarios (preset names or TOML paths) with optional sweeps and
/// write artifacts under `out_dir`. Returns the run summary.
#[pyfunction]
#[pyo3(signature = (scenarios, out_dir, sweeps = Vec::new(), plots = true, seed = None, jobs = None))]
fn run_batch<'py>(
    py: Python<'py>,
    scenarios: Vec<String>,
    out_dir: std::path::PathBuf,
    sweeps: Vec<String>,
    plots: bool,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let manifest = RunManifest {
        scenarios: scenarios.iter().map(|s| ScenarioSource::parse(s)).collect(),
        out_dir,
        sweeps: sweeps
            .iter()
            .map(|s| SweepAxis::parse(s))
            .collect::<Result<_, _>>()
            .map_err(err)?,
        plots,
        seed,
        jobs,
    };
    let summary = py.detach(|| execute(&manifest)).map_err(err)?;
    to_py(py, &summary)
}

/// Compare metrics dicts (label, metrics) against the first.
#[pyfunction]
#[pyo3(signature = (runs, allow_mismatch = false))]
fn compare<'py>(
    py: Python<'py>,
    runs: Vec<(String, Bound<'py, PyAny>)>,
    allow_mismatch: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let runs = runs
        .iter()
        .map(|(l, m)| Ok((l.clone(), from_py(m)?)))
        .collect::<PyResult<Vec<_>>>()?;
    to_py(py, &core::compare(&runs, allow_mismatch).map_err(err)?)
}

#[pymodule]
fn lateral_ehgo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PySimLog>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(dugoff_shaping, m)?)?;
    m.add_function(wrap_pyfunction!(tire_forces, m)?)?;
    m.add_function(wrap_pyfunction!(nominal_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(control_law, m)?)?;
    m.add_function(wrap_pyfunction!(observer_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(run_batch, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
