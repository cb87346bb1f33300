use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rismux::geometry::{self, PathLossParams, Position, RisGeometry};
use rismux::metrics::{self, FrameConfig};
use rismux::ris::{self, ProjectionSettings};
use rismux::scenario::{self, Resolved};

fn value_error(e: rismux::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Unit-modulus RIS configuration, stored as phases `theta_n` with
/// coefficients `exp(-j theta_n)`.
#[pyclass(name = "RisConfiguration", frozen)]
struct PyRisConfiguration {
    inner: ris::RisConfiguration,
}

#[pymethods]
impl PyRisConfiguration {
    #[new]
    fn new(phases: Vec<f64>) -> Self {
        Self {
            inner: ris::RisConfiguration::from_phases(phases),
        }
    }

    #[getter]
    fn phases(&self) -> Vec<f64> {
        self.inner.phases().to_vec()
    }

    fn coefficients(&self) -> Vec<Complex64> {
        self.inner.coefficients()
    }

    /// `|g^H psi|`.
    fn gain(&self, g: Vec<Complex64>) -> PyResult<f64> {
        metrics::effective_gain(&g, &self.inner)
            .map(f64::sqrt)
            .map_err(value_error)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("RisConfiguration(n={})", self.inner.len())
    }
}

fn wrap(inner: ris::RisConfiguration) -> PyRisConfiguration {
    PyRisConfiguration { inner }
}

#[pyclass(name = "Partition", frozen, get_all)]
struct PyPartition {
    in_phase: Vec<usize>,
    antiphase: Vec<usize>,
    split: usize,
    residual: f64,
}

impl From<ris::PartitionResult> for PyPartition {
    fn from(p: ris::PartitionResult) -> Self {
        Self {
            in_phase: p.in_phase,
            antiphase: p.antiphase,
            split: p.split,
            residual: p.residual,
        }
    }
}

#[pyclass(name = "NullingOutcome", frozen, get_all)]
struct PyNullingOutcome {
    configuration: Py<PyRisConfiguration>,
    residual: f64,
    iterations: usize,
    converged: bool,
    degenerate_elements: usize,
}

/// A resolved scenario: defaults, optional preset, TOML text and
/// `key=value` overrides, merged in that order.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    resolved: Resolved,
    preset: Option<String>,
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (toml=None, preset=None, overrides=Vec::new()))]
    fn new(toml: Option<&str>, preset: Option<String>, overrides: Vec<String>) -> PyResult<Self> {
        let resolved =
            scenario::resolve_layers(preset.as_deref(), toml, &overrides).map_err(value_error)?;
        Ok(Self { resolved, preset })
    }

    #[getter]
    fn trials(&self) -> u64 {
        self.resolved.config.trials
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.resolved.config.seed
    }

    #[getter]
    fn preset(&self) -> Option<String> {
        self.preset.clone()
    }

    fn to_toml(&self) -> String {
        self.resolved.file.to_toml()
    }

    /// Runs the scenario and returns one dict per results-table row.
    #[pyo3(signature = (workers=1))]
    fn run<'py>(&self, py: Python<'py>, workers: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let out = py
            .detach(|| scenario::execute(&self.resolved, workers.max(1)))
            .map_err(value_error)?;
        out.rows
            .into_iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("sweep_param", r.sweep_param)?;
                d.set_item("sweep_value", r.sweep_value)?;
                d.set_item("scheme", r.scheme)?;
                d.set_item("metric", r.metric)?;
                d.set_item("estimate", r.estimate)?;
                d.set_item("ci_low", r.ci_low)?;
                d.set_item("ci_high", r.ci_high)?;
                d.set_item("n", r.n)?;
                d.set_item("seed", r.seed)?;
                d.set_item("in_convergence_rate", r.in_convergence_rate)?;
                d.set_item("in_mean_iterations", r.in_mean_iterations)?;
                d.set_item("pr_mean_relative_residual", r.pr_mean_relative_residual)?;
                d.set_item("trial_errors", r.trial_errors)?;
                Ok(d)
            })
            .collect()
    }

    /// Runs the scenario and returns the CSV text.
    #[pyo3(signature = (workers=1))]
    fn run_csv(&self, py: Python<'_>, workers: usize) -> PyResult<String> {
        let out = py
            .detach(|| scenario::execute(&self.resolved, workers.max(1)))
            .map_err(value_error)?;
        let mut buf = Vec::new();
        scenario::write_csv(&out.rows, &mut buf)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[pyfunction]
#[pyo3(signature = (num_elements, wavelength=0.1))]
fn far_field_distance(num_elements: usize, wavelength: f64) -> f64 {
    geometry::far_field_distance(num_elements, wavelength)
}

#[pyfunction]
#[pyo3(signature = (num_elements, wavelength=0.1))]
fn element_positions(num_elements: usize, wavelength: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let g = RisGeometry::new(num_elements, wavelength).map_err(value_error)?;
    Ok(geometry::element_positions(&g)
        .iter()
        .map(|p| (p.x, p.y, p.z))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (node, num_elements, wavelength=0.1, exponent=3.67, ref_gain=1.0, ref_distance=1.0))]
fn los_channel(
    node: (f64, f64, f64),
    num_elements: usize,
    wavelength: f64,
    exponent: f64,
    ref_gain: f64,
    ref_distance: f64,
) -> PyResult<Vec<Complex64>> {
    let g = RisGeometry::new(num_elements, wavelength).map_err(value_error)?;
    let pl = PathLossParams {
        ref_gain,
        ref_distance,
        exponent,
    };
    pl.validate().map_err(value_error)?;
    geometry::los_channel(&Position::new(node.0, node.1, node.2), &g, &pl).map_err(value_error)
}

#[pyfunction]
fn cascaded_channel(h_bs: Vec<Complex64>, h_ue: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    geometry::cascaded_channel(&h_bs, &h_ue).map_err(value_error)
}

#[pyfunction]
fn coherent_beamformer(g: Vec<Complex64>) -> PyRisConfiguration {
    wrap(ris::coherent_beamformer(&g))
}

#[pyfunction]
fn phasor_rotation(g: Vec<Complex64>) -> (PyRisConfiguration, PyPartition) {
    let (config, partition) = ris::phasor_rotation(&g);
    (wrap(config), partition.into())
}

#[pyfunction]
fn brute_force_partition(g: Vec<Complex64>) -> PyResult<PyPartition> {
    ris::brute_force_partition(&g)
        .map(Into::into)
        .map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (g, seed=0, tolerance=1e-6, max_iterations=1000))]
fn interference_nulling(
    py: Python<'_>,
    g: Vec<Complex64>,
    seed: u64,
    tolerance: f64,
    max_iterations: usize,
) -> PyResult<PyNullingOutcome> {
    let initial = ris::random_configuration(g.len(), &mut ChaCha8Rng::seed_from_u64(seed));
    let settings = ProjectionSettings::new(tolerance, max_iterations, initial);
    let out = ris::interference_nulling(&g, &settings).map_err(value_error)?;
    Ok(PyNullingOutcome {
        configuration: Py::new(py, wrap(out.configuration))?,
        residual: out.residual,
        iterations: out.iterations,
        converged: out.converged,
        degenerate_elements: out.degenerate_elements,
    })
}

#[pyfunction]
#[pyo3(signature = (n, seed=0))]
fn random_configuration(n: usize, seed: u64) -> PyRisConfiguration {
    wrap(ris::random_configuration(
        n,
        &mut ChaCha8Rng::seed_from_u64(seed),
    ))
}

fn frame(
    total: u32,
    urllc: u32,
    preamble: u32,
    switching: u32,
    slot_duration: f64,
    processing_delay: f64,
) -> PyResult<FrameConfig> {
    let f = FrameConfig {
        total,
        urllc,
        preamble,
        switching,
        slot_duration,
        processing_delay,
        ..FrameConfig::default()
    };
    f.validate().map_err(value_error)?;
    Ok(f)
}

#[pyfunction]
#[pyo3(signature = (total=20, urllc=2, preamble=1, switching=1))]
fn xi_fraction(total: u32, urllc: u32, preamble: u32, switching: u32) -> PyResult<f64> {
    let f = frame(total, urllc, preamble, switching, 0.125e-3, 0.0)?;
    Ok(metrics::xi_fraction(&f))
}

#[pyfunction]
#[pyo3(signature = (urllc=2, preamble=1, switching=1, slot_duration=0.125e-3, processing_delay=0.0))]
fn urllc_latency(
    urllc: u32,
    preamble: u32,
    switching: u32,
    slot_duration: f64,
    processing_delay: f64,
) -> PyResult<f64> {
    let f = frame(
        20.max(urllc + preamble + 2 * switching),
        urllc,
        preamble,
        switching,
        slot_duration,
        processing_delay,
    )?;
    Ok(metrics::urllc_latency(&f))
}

#[pymodule]
#[pyo3(name = "rismux")]
fn rismux_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("PRESETS", scenario::PRESETS.to_vec())?;
    m.add_class::<PyRisConfiguration>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PyNullingOutcome>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(far_field_distance, m)?)?;
    m.add_function(wrap_pyfunction!(element_positions, m)?)?;
    m.add_function(wrap_pyfunction!(los_channel, m)?)?;
    m.add_function(wrap_pyfunction!(cascaded_channel, m)?)?;
    m.add_function(wrap_pyfunction!(coherent_beamformer, m)?)?;
    m.add_function(wrap_pyfunction!(phasor_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_partition, m)?)?;
    m.add_function(wrap_pyfunction!(interference_nulling, m)?)?;
    m.add_function(wrap_pyfunction!(random_configuration, m)?)?;
    m.add_function(wrap_pyfunction!(xi_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(urllc_latency, m)?)?;
    Ok(())
}
