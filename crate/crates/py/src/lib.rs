//! Python bindings for `v2g-ca-core`.
//!
//! Time indices and particle ids are 1-based, as in the Rust API. Action
//! events cross the boundary as `(particle_id, k, "shift" | "discharge")`
//! tuples.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use v2g_ca_core as core;
use v2g_ca_core::metrics::{self, trajectory_xy};
use v2g_ca_core::persistence;

fn to_py(err: core::Error) -> PyErr {
    match err {
        core::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn kind_name(kind: core::ActionKind) -> &'static str {
    match kind {
        core::ActionKind::Shift => "shift",
        core::ActionKind::Discharge => "discharge",
    }
}

fn parse_kind(kind: &str) -> PyResult<core::ActionKind> {
    match kind {
        "shift" => Ok(core::ActionKind::Shift),
        "discharge" => Ok(core::ActionKind::Discharge),
        other => Err(PyValueError::new_err(format!("unknown action kind {other:?}"))),
    }
}

type EventTuple = (usize, usize, &'static str);

fn event_tuple(e: &core::ActionEvent) -> EventTuple {
    (e.particle_id, e.time, kind_name(e.kind))
}

#[pyclass(name = "Population", module = "v2g_ca", skip_from_py_object)]
#[derive(Clone)]
pub struct PyPopulation {
    inner: core::Population,
}

#[pymethods]
impl PyPopulation {
    #[staticmethod]
    fn generate(n: usize, density: f64, horizon: usize, seed: u64) -> PyResult<Self> {
        core::Population::generate(n, density, horizon, seed)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_schedules(schedules: Vec<Vec<i8>>, bids: Vec<f64>) -> PyResult<Self> {
        core::Population::from_schedules(schedules, bids)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn aggregate(&self) -> Vec<i64> {
        self.inner.aggregate().to_vec()
    }

    #[getter]
    fn bids(&self) -> Vec<f64> {
        self.inner.particles().iter().map(|p| p.bid()).collect()
    }

    fn demand(&self, particle_id: usize) -> PyResult<Vec<i8>> {
        self.inner
            .particle(particle_id)
            .map(|p| p.demand().to_vec())
            .map_err(to_py)
    }

    fn aggregate_load(&self, k: usize) -> PyResult<i64> {
        self.inner.aggregate_load(k).map_err(to_py)
    }

    fn recompute_aggregate(&self) -> Vec<i64> {
        self.inner.recompute_aggregate()
    }

    fn merit_order(&self) -> Vec<usize> {
        self.inner.merit_order()
    }

    fn apply_shift(&mut self, particle_id: usize, k: usize) -> PyResult<EventTuple> {
        self.inner
            .apply_shift(particle_id, k)
            .map(|e| event_tuple(&e))
            .map_err(to_py)
    }

    #[pyo3(signature = (particle_id, k, require_prior_charge = false))]
    fn apply_discharge(
        &mut self,
        particle_id: usize,
        k: usize,
        require_prior_charge: bool,
    ) -> PyResult<EventTuple> {
        self.inner
            .apply_discharge(particle_id, k, require_prior_charge)
            .map(|e| event_tuple(&e))
            .map_err(to_py)
    }

    fn copy(&self) -> Self {
        self.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Population(n={}, horizon={})",
            self.inner.len(),
            self.inner.horizon()
        )
    }
}

#[pyclass(name = "TargetProfile", module = "v2g_ca", skip_from_py_object, frozen)]
#[derive(Clone)]
pub struct PyTargetProfile {
    inner: core::TargetProfile,
}

#[pymethods]
impl PyTargetProfile {
    #[new]
    #[pyo3(signature = (values, mean_load = None))]
    fn new(values: Vec<f64>, mean_load: Option<f64>) -> PyResult<Self> {
        let mean = mean_load
            .unwrap_or_else(|| values.iter().sum::<f64>() / values.len().max(1) as f64);
        core::TargetProfile::new(values, mean)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn triangular(
        mean_load: f64,
        magnitude_fraction: f64,
        dip_start: usize,
        dip_end: usize,
        horizon: usize,
    ) -> PyResult<Self> {
        core::triangular_target(mean_load, magnitude_fraction, dip_start, dip_end, horizon)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn constant(level: f64, horizon: usize) -> PyResult<Self> {
        core::constant_target(level, horizon)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        core::target_from_file(path)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn mean_load(&self) -> f64 {
        self.inner.mean_load()
    }

    fn __len__(&self) -> usize {
        self.inner.horizon()
    }
}

#[pyclass(name = "ControlConfig", module = "v2g_ca", skip_from_py_object, frozen)]
#[derive(Clone)]
pub struct PyControlConfig {
    inner: core::ControlConfig,
}

#[pymethods]
impl PyControlConfig {
    #[new]
    #[pyo3(signature = (mode = "price", v2g = false, require_prior_charge = false, max_discharges = None, seed = 0))]
    fn new(
        mode: &str,
        v2g: bool,
        require_prior_charge: bool,
        max_discharges: Option<u32>,
        seed: u64,
    ) -> PyResult<Self> {
        let mode = mode.parse::<core::ControlMode>().map_err(to_py)?;
        if max_discharges == Some(0) {
            return Err(PyValueError::new_err("max_discharges must be positive"));
        }
        Ok(Self {
            inner: core::ControlConfig {
                mode,
                v2g_enabled: v2g,
                require_prior_charge,
                max_discharges_per_particle: max_discharges,
                seed,
            },
        })
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            core::ControlMode::Direct => "direct",
            core::ControlMode::Price => "price",
        }
    }

    #[getter]
    fn v2g(&self) -> bool {
        self.inner.v2g_enabled
    }
}

#[pyclass(name = "StepReport", module = "v2g_ca", frozen)]
pub struct PyStepReport {
    #[pyo3(get)]
    k: usize,
    #[pyo3(get)]
    actions: Vec<EventTuple>,
    #[pyo3(get)]
    calls: usize,
    #[pyo3(get)]
    clearing_price: Option<f64>,
    #[pyo3(get)]
    next_bid: Option<f64>,
    #[pyo3(get)]
    final_load: i64,
}

#[pyclass(name = "Summary", module = "v2g_ca", frozen, get_all)]
pub struct PySummary {
    total_shifts: usize,
    total_discharges: usize,
    discharge_ratio: f64,
    max_calls: usize,
    peak_responses: usize,
    tracking_error: f64,
    loop_area: f64,
}

impl From<core::Summary> for PySummary {
    fn from(s: core::Summary) -> Self {
        Self {
            total_shifts: s.total_shifts,
            total_discharges: s.total_discharges,
            discharge_ratio: s.discharge_ratio,
            max_calls: s.max_calls,
            peak_responses: s.peak_responses,
            tracking_error: s.tracking_error,
            loop_area: s.loop_area,
        }
    }
}

#[pyclass(name = "SimResult", module = "v2g_ca", frozen)]
pub struct PySimResult {
    inner: core::SimResult,
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn p_series(&self) -> Vec<i64> {
        self.inner.p_series.clone()
    }

    #[getter]
    fn p_initial_series(&self) -> Vec<i64> {
        self.inner.p_initial_series.clone()
    }

    #[getter]
    fn v_series(&self) -> Vec<usize> {
        self.inner.v_series.clone()
    }

    #[getter]
    fn w_series(&self) -> Vec<usize> {
        self.inner.w_series.clone()
    }

    #[getter]
    fn calls_series(&self) -> Vec<usize> {
        self.inner.calls_series.clone()
    }

    #[getter]
    fn clearing_series(&self) -> Vec<Option<f64>> {
        self.inner.clearing_series.clone()
    }

    #[getter]
    fn events(&self) -> Vec<EventTuple> {
        self.inner.events.iter().map(event_tuple).collect()
    }

    #[getter]
    fn initial_population(&self) -> PyPopulation {
        PyPopulation {
            inner: self.inner.initial_population.clone(),
        }
    }

    #[getter]
    fn final_population(&self) -> PyPopulation {
        PyPopulation {
            inner: self.inner.final_population.clone(),
        }
    }

    /// `(responses, calls)` per period.
    fn trajectory(&self) -> Vec<(usize, usize)> {
        metrics::trajectory(&self.inner)
            .into_iter()
            .map(|p| (p.responses, p.calls))
            .collect()
    }

    fn summary(&self) -> PySummary {
        core::summarize(&self.inner).into()
    }

    /// Rows in merit order, one list of booleans per particle.
    fn lattice(&self, kind: &str) -> PyResult<Vec<Vec<bool>>> {
        let lattice = core::action_lattice(&self.inner, parse_kind(kind)?);
        Ok((0..lattice.rows())
            .map(|r| (1..=lattice.horizon).map(|k| lattice.get(r, k)).collect())
            .collect())
    }

    fn calls_at_response_level(&self, level: f64) -> Option<f64> {
        core::calls_at_response_level(&self.inner, level)
    }

    fn wavefront_concentration(&self) -> f64 {
        let shift = core::action_lattice(&self.inner, core::ActionKind::Shift);
        let discharge = core::action_lattice(&self.inner, core::ActionKind::Discharge);
        core::wavefront_concentration(&shift, &discharge)
    }

    /// Raises `ValueError` describing the first broken invariant.
    fn check_consistency(&self) -> PyResult<()> {
        self.inner
            .check_consistency()
            .map_err(PyValueError::new_err)
    }

    fn export_series_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        core::export_series_csv(&self.inner, path).map_err(to_py)
    }

    fn export_bundle_json(&self, path: std::path::PathBuf) -> PyResult<()> {
        let bundle = core::RunBundle::new(self.inner.clone());
        core::export_bundle_json(&bundle, path).map_err(to_py)
    }

    #[staticmethod]
    fn import_bundle_json(path: std::path::PathBuf) -> PyResult<Self> {
        core::import_bundle_json(path)
            .map(|b| Self { inner: b.result })
            .map_err(to_py)
    }
}

#[pyfunction]
fn step(
    population: &mut PyPopulation,
    target: &PyTargetProfile,
    k: usize,
    config: &PyControlConfig,
) -> PyResult<PyStepReport> {
    let r = core::step(&mut population.inner, &target.inner, k, &config.inner).map_err(to_py)?;
    Ok(PyStepReport {
        k: r.k,
        actions: r.actions.iter().map(event_tuple).collect(),
        calls: r.calls,
        clearing_price: r.clearing_price,
        next_bid: r.next_bid,
        final_load: r.final_load,
    })
}

#[pyfunction]
fn run(
    population: &PyPopulation,
    target: &PyTargetProfile,
    config: &PyControlConfig,
) -> PyResult<PySimResult> {
    core::run(&population.inner, &target.inner, &config.inner)
        .map(|inner| PySimResult { inner })
        .map_err(to_py)
}

/// `(without_v2g, with_v2g)` results for the same population.
#[pyfunction]
fn compare_modes(
    population: &PyPopulation,
    target: &PyTargetProfile,
    config: &PyControlConfig,
) -> PyResult<(PySimResult, PySimResult)> {
    let (a, b) =
        core::compare_modes(&population.inner, &target.inner, &config.inner).map_err(to_py)?;
    Ok((PySimResult { inner: a }, PySimResult { inner: b }))
}

#[pyfunction]
fn loop_area(points: Vec<(f64, f64)>) -> f64 {
    core::loop_area(&points)
}

#[pyfunction]
fn trajectory_area(result: &PySimResult) -> f64 {
    core::loop_area(&trajectory_xy(&metrics::trajectory(&result.inner)))
}

#[pyfunction]
fn emit_figures(
    without_v2g: &PySimResult,
    with_v2g: &PySimResult,
    out_dir: std::path::PathBuf,
) -> PyResult<Vec<std::path::PathBuf>> {
    persistence::emit_figures(&without_v2g.inner, &with_v2g.inner, out_dir).map_err(to_py)
}

#[pymodule]
fn v2g_ca(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPopulation>()?;
    m.add_class::<PyTargetProfile>()?;
    m.add_class::<PyControlConfig>()?;
    m.add_class::<PyStepReport>()?;
    m.add_class::<PySummary>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(step, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(compare_modes, m)?)?;
    m.add_function(wrap_pyfunction!(loop_area, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory_area, m)?)?;
    m.add_function(wrap_pyfunction!(emit_figures, m)?)?;
    m.add("SCHEMA_VERSION", persistence::SCHEMA_VERSION)?;
    Ok(())
}
