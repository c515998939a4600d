//! Python module `pushfit_py`: trials, filtering, simulation, segmentation,
//! control-law fitting and statistics.
//!
//! Structured results (fits, segmentations, statistics) come back as plain
//! dictionaries.

use std::path::PathBuf;

use pushfit::fitlaw::{self, ControlLawSpec, Metric, PolyDerivative};
use pushfit::segment::{self, ClassifierParams};
use pushfit::signal::{self, FilterSpec};
use pushfit::simulate::{self, ArchetypeParams, GainSchedule, GainSet, Impulse, SimOptions};
use pushfit::stats::{self, StableRegion};
use pushfit::trialdata::{self, ReferenceState, StartMode, StrategyTag, TreadmillLog};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pythonize::pythonize;

create_exception!(pushfit_py, PushfitError, PyValueError);

fn err(e: impl std::fmt::Display) -> PyErr {
    PushfitError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    pythonize(py, value).map_err(err)
}

pub fn parse_tag(name: &str) -> Result<StrategyTag, String> {
    name.parse()
        .map_err(|e: trialdata::TrialError| e.to_string())
}

/// Builds a spec from a law name such as `"PD"` and a metric name.
pub fn make_spec(
    law: &str,
    metric: &str,
    lambda: f64,
    chain_rule: bool,
) -> Result<ControlLawSpec, String> {
    let metric: Metric = metric
        .parse()
        .map_err(|e: fitlaw::FitError| e.to_string())?;
    let poly = if chain_rule {
        PolyDerivative::ChainRule
    } else {
        PolyDerivative::ErrorRatePowers
    };
    ControlLawSpec::parse(law, metric, lambda)
        .map(|s| s.with_poly_derivative(poly))
        .map_err(|e| e.to_string())
}

/// A timestamped one-dimensional CoM trajectory.
#[pyclass(name = "Trial", module = "pushfit_py")]
#[derive(Clone)]
pub struct PyTrial {
    pub inner: trialdata::Trial,
}

#[pymethods]
impl PyTrial {
    #[new]
    #[pyo3(signature = (id, time, position, velocity=None, acceleration=None, mass=70.0, strategy=None, start_mode=None, abandoned=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        id: String,
        time: Vec<f64>,
        position: Vec<f64>,
        velocity: Option<Vec<f64>>,
        acceleration: Option<Vec<f64>>,
        mass: f64,
        strategy: Option<&str>,
        start_mode: Option<&str>,
        abandoned: bool,
    ) -> PyResult<Self> {
        let mut inner =
            trialdata::Trial::new(id, time, position, velocity, acceleration, mass).map_err(err)?;
        inner.strategy = strategy.map(parse_tag).transpose().map_err(err)?;
        if let Some(mode) = start_mode {
            inner.start_mode = mode.parse::<StartMode>().map_err(err)?;
        }
        inner.abandoned = abandoned;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn time(&self) -> Vec<f64> {
        self.inner.time().to_vec()
    }

    #[getter]
    fn position(&self) -> Vec<f64> {
        self.inner.position().to_vec()
    }

    #[getter]
    fn velocity(&self) -> Option<Vec<f64>> {
        self.inner.velocity().map(<[f64]>::to_vec)
    }

    #[getter]
    fn acceleration(&self) -> Option<Vec<f64>> {
        self.inner.acceleration().map(<[f64]>::to_vec)
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn strategy(&self) -> Option<&'static str> {
        self.inner.strategy.map(StrategyTag::as_str)
    }

    #[setter]
    fn set_strategy(&mut self, tag: Option<&str>) -> PyResult<()> {
        self.inner.strategy = tag.map(parse_tag).transpose().map_err(err)?;
        Ok(())
    }

    #[getter]
    fn start_mode(&self) -> &'static str {
        self.inner.start_mode.as_str()
    }

    #[getter]
    fn abandoned(&self) -> bool {
        self.inner.abandoned
    }

    #[getter]
    fn origin_offset(&self) -> Option<f64> {
        self.inner.origin_offset
    }

    /// Last sample as `(p_star, v_star)`.
    fn reference(&self) -> PyResult<(f64, f64)> {
        let r = trialdata::reference_state(&self.inner).map_err(err)?;
        Ok((r.p_star, r.v_star))
    }

    fn slice(&self, start: usize, end: usize) -> PyResult<Self> {
        self.inner
            .slice(start, end)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_csv(&self) -> String {
        trialdata::trial_to_csv(&self.inner)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        trialdata::save_trial(&self.inner, &path).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (path, sidecar=None))]
    fn load(path: PathBuf, sidecar: Option<PathBuf>) -> PyResult<Self> {
        trialdata::load_trial(&path, sidecar.as_deref())
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trial(id={:?}, samples={}, dt={}, strategy={})",
            self.inner.id,
            self.inner.len(),
            self.inner.dt(),
            self.strategy().unwrap_or("None")
        )
    }
}

fn filter_spec(sample_rate_hz: f64, order: usize, cutoff_hz: f64, zero_phase: bool) -> FilterSpec {
    FilterSpec {
        order,
        cutoff_hz,
        sample_rate_hz,
        zero_phase,
    }
}

/// Butterworth low-pass of `xs`.
#[pyfunction]
#[pyo3(signature = (xs, sample_rate_hz, order=4, cutoff_hz=30.0, zero_phase=true))]
fn butterworth_lowpass(
    xs: Vec<f64>,
    sample_rate_hz: f64,
    order: usize,
    cutoff_hz: f64,
    zero_phase: bool,
) -> PyResult<Vec<f64>> {
    signal::butterworth_lowpass(
        &xs,
        &filter_spec(sample_rate_hz, order, cutoff_hz, zero_phase),
    )
    .map_err(err)
}

/// Central-difference derivative with second-order one-sided ends.
#[pyfunction]
fn differentiate(xs: Vec<f64>, dt: f64) -> PyResult<Vec<f64>> {
    signal::differentiate(&xs, dt).map_err(err)
}

/// Velocity and acceleration from position, optionally low-passed first.
#[pyfunction]
#[pyo3(signature = (trial, filter=true, order=4, cutoff_hz=30.0, zero_phase=true))]
fn derive_kinematics(
    trial: &PyTrial,
    filter: bool,
    order: usize,
    cutoff_hz: f64,
    zero_phase: bool,
) -> PyResult<PyTrial> {
    let spec = filter_spec(1.0 / trial.inner.dt(), order, cutoff_hz, zero_phase);
    signal::derive_kinematics(&trial.inner, filter.then_some(&spec))
        .map(|inner| PyTrial { inner })
        .map_err(err)
}

/// Cuts the trial at the first sample where the belt has stopped.
#[pyfunction]
fn trim_to_push(trial: &PyTrial, belt_time: Vec<f64>, belt_speed: Vec<f64>) -> PyResult<PyTrial> {
    let log = TreadmillLog::new(belt_time, belt_speed).map_err(err)?;
    signal::trim_to_push(&trial.inner, &log)
        .map(|inner| PyTrial { inner })
        .map_err(err)
}

#[pyfunction]
fn shift_origin(trial: &PyTrial) -> PyResult<PyTrial> {
    signal::shift_origin(&trial.inner)
        .map(|inner| PyTrial { inner })
        .map_err(err)
}

/// Point mass under a constant PID law towards `(p_star, v_star)`.
/// `impulses` are `(time, delta_v)` pairs.
#[pyfunction]
#[pyo3(signature = (q0, v0, kp, kd, ki=0.0, duration=3.0, dt=1e-3, record_every=10, mass=70.0, p_star=0.0, v_star=0.0, impulses=vec![], id="sim".to_string()))]
#[allow(clippy::too_many_arguments)]
fn simulate_pid(
    q0: f64,
    v0: f64,
    kp: f64,
    kd: f64,
    ki: f64,
    duration: f64,
    dt: f64,
    record_every: usize,
    mass: f64,
    p_star: f64,
    v_star: f64,
    impulses: Vec<(f64, f64)>,
    id: String,
) -> PyResult<PyTrial> {
    let schedule = GainSchedule::constant(
        GainSet::pid(kp, ki, kd),
        ReferenceState::new(p_star, v_star),
    );
    let opts = SimOptions {
        duration,
        dt,
        record_every,
        mass,
        id,
    };
    let kicks: Vec<Impulse> = impulses
        .into_iter()
        .map(|(time, delta_v)| Impulse { time, delta_v })
        .collect();
    simulate::simulate_trial(q0, v0, &schedule, &opts, &kicks)
        .map(|inner| PyTrial { inner })
        .map_err(err)
}

/// Seeded archetype trial of `strategy` and its ground truth.
#[pyfunction]
fn synth_archetype<'py>(
    py: Python<'py>,
    strategy: &str,
    seed: u64,
) -> PyResult<(PyTrial, Bound<'py, PyAny>)> {
    let tag = parse_tag(strategy).map_err(err)?;
    let arc = simulate::synth_archetype(tag, seed, &ArchetypeParams::default()).map_err(err)?;
    Ok((PyTrial { inner: arc.trial }, to_py(py, &arc.truth)?))
}

#[pyfunction]
#[pyo3(name = "segment")]
fn segment_trial<'py>(py: Python<'py>, trial: &PyTrial) -> PyResult<Bound<'py, PyAny>> {
    let seg = segment::segment(&trial.inner).map_err(err)?;
    to_py(py, &seg)
}

#[pyfunction]
fn classify_strategy(trial: &PyTrial) -> PyResult<&'static str> {
    segment::classify_strategy(&trial.inner, &ClassifierParams::default())
        .map(StrategyTag::as_str)
        .map_err(err)
}

/// Fits `law` (e.g. `"PD"`) with `metric` to the whole trial.
#[pyfunction]
#[pyo3(signature = (trial, law="PD", metric="linear", lam=fitlaw::DEFAULT_LAMBDA, chain_rule=true))]
fn fit_trial<'py>(
    py: Python<'py>,
    trial: &PyTrial,
    law: &str,
    metric: &str,
    lam: f64,
    chain_rule: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = make_spec(law, metric, lam, chain_rule).map_err(err)?;
    let fit = fitlaw::fit_trial(&trial.inner, &spec).map_err(err)?;
    to_py(py, &fit)
}

/// Segments the trial by its strategy tag and fits every phase.
#[pyfunction]
#[pyo3(signature = (trial, law="PD", metric="linear", lam=fitlaw::DEFAULT_LAMBDA, chain_rule=true))]
fn fit_segments<'py>(
    py: Python<'py>,
    trial: &PyTrial,
    law: &str,
    metric: &str,
    lam: f64,
    chain_rule: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = make_spec(law, metric, lam, chain_rule).map_err(err)?;
    let seg = segment::segment(&trial.inner).map_err(err)?;
    let fit = fitlaw::fit_segments(&trial.inner, &seg, &spec).map_err(err)?;
    to_py(py, &fit)
}

#[pyfunction]
fn r_squared(predicted: Vec<f64>, observed: Vec<f64>) -> PyResult<f64> {
    fitlaw::r_squared(&predicted, &observed).map_err(err)
}

#[pyfunction]
fn rms_error(predicted: Vec<f64>, observed: Vec<f64>) -> PyResult<f64> {
    fitlaw::rms_error(&predicted, &observed).map_err(err)
}

#[pyfunction]
fn mean_abs_dev(xs: Vec<f64>) -> Option<f64> {
    stats::mean_abs_dev(&xs)
}

#[pyfunction]
fn median(xs: Vec<f64>) -> Option<f64> {
    stats::median(&xs)
}

#[pyfunction]
fn median_abs_dev(xs: Vec<f64>) -> Option<f64> {
    stats::median_abs_dev(&xs)
}

#[pyfunction]
#[pyo3(signature = (p, v, slope=-3.0, half_width=0.3))]
fn in_stable_region(p: f64, v: f64, slope: f64, half_width: f64) -> bool {
    stats::in_stable_region(p, v, &StableRegion { slope, half_width })
}

/// Median initial states per strategy and start cohort.
#[pyfunction]
fn selection_stats<'py>(py: Python<'py>, trials: Vec<PyTrial>) -> PyResult<Bound<'py, PyAny>> {
    let sel = stats::selection_stats(trials.iter().map(|t| &t.inner), &StableRegion::default())
        .map_err(err)?;
    to_py(py, &sel)
}

#[pymodule]
fn pushfit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PushfitError", m.py().get_type::<PushfitError>())?;
    m.add_class::<PyTrial>()?;
    m.add_function(wrap_pyfunction!(butterworth_lowpass, m)?)?;
    m.add_function(wrap_pyfunction!(differentiate, m)?)?;
    m.add_function(wrap_pyfunction!(derive_kinematics, m)?)?;
    m.add_function(wrap_pyfunction!(trim_to_push, m)?)?;
    m.add_function(wrap_pyfunction!(shift_origin, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_pid, m)?)?;
    m.add_function(wrap_pyfunction!(synth_archetype, m)?)?;
    m.add_function(wrap_pyfunction!(segment_trial, m)?)?;
    m.add_function(wrap_pyfunction!(classify_strategy, m)?)?;
    m.add_function(wrap_pyfunction!(fit_trial, m)?)?;
    m.add_function(wrap_pyfunction!(fit_segments, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(rms_error, m)?)?;
    m.add_function(wrap_pyfunction!(mean_abs_dev, m)?)?;
    m.add_function(wrap_pyfunction!(median, m)?)?;
    m.add_function(wrap_pyfunction!(median_abs_dev, m)?)?;
    m.add_function(wrap_pyfunction!(in_stable_region, m)?)?;
    m.add_function(wrap_pyfunction!(selection_stats, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        assert_eq!(parse_tag("toe-to-step").unwrap(), StrategyTag::ToeToStep);
        assert!(parse_tag("hop").is_err());
        let spec = make_spec("pd", "polynomial", 0.01, true).unwrap();
        assert_eq!(spec.label(), "PD/polynomial");
        assert_eq!(spec.column_names().len(), 8);
        assert!(make_spec("PID", "exponential", 0.01, true).is_err());
        assert!(make_spec("PD", "cubic", 0.01, true).is_err());
    }
}
