//! Python bindings. Vectors and matrices cross the boundary as lists.

use std::collections::BTreeMap;

use flex_core::{self as core, FlexError, ModulationMode};
use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: FlexError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<ModulationMode> {
    mode.parse().map_err(py_err)
}

fn rows<T: Copy + Into<f64>>(a: &Array2<T>) -> Vec<Vec<f64>> {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|&x| x.into()).collect())
        .collect()
}

/// Temporal rotary configuration.
#[pyclass(name = "RopeSpec", from_py_object)]
#[derive(Clone)]
struct PyRopeSpec {
    inner: core::RopeSpec,
}

#[pymethods]
impl PyRopeSpec {
    #[new]
    #[pyo3(signature = (d_f=16, base=10000.0, l_train=21, alpha=0.1, beta=2.5))]
    fn new(d_f: usize, base: f64, l_train: usize, alpha: f64, beta: f64) -> PyResult<Self> {
        let inner = core::RopeSpec {
            d_f,
            base,
            l_train,
            alpha,
            beta,
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn d_f(&self) -> usize {
        self.inner.d_f
    }

    #[getter]
    fn base(&self) -> f64 {
        self.inner.base
    }

    #[getter]
    fn l_train(&self) -> usize {
        self.inner.l_train
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "RopeSpec(d_f={}, base={}, l_train={}, alpha={}, beta={})",
            s.d_f, s.base, s.l_train, s.alpha, s.beta
        )
    }
}

#[pyfunction]
fn plane_frequencies(spec: &PyRopeSpec) -> PyResult<Vec<f64>> {
    core::plane_frequencies(&spec.inner).map_err(py_err)
}

/// Returns `(scale, frequencies)` for inference length `target_len`.
#[pyfunction]
fn modulated_frequencies(spec: &PyRopeSpec, target_len: usize) -> PyResult<(f64, Vec<f64>)> {
    core::modulated_frequencies(&spec.inner, target_len).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (exposure_r, alpha=0.1, beta=2.5))]
fn gate(exposure_r: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    core::gate(exposure_r, alpha, beta).map_err(py_err)
}

#[pyfunction]
fn apply_rotary(
    vec: Vec<f64>,
    spec: &PyRopeSpec,
    mode: &str,
    n: u64,
    target_len: usize,
) -> PyResult<Vec<f64>> {
    core::apply_rotary(&vec, &spec.inner, parse_mode(mode)?, n, target_len).map_err(py_err)
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn relative_logit(
    q: Vec<f64>,
    k: Vec<f64>,
    n_q: u64,
    n_k: u64,
    spec: &PyRopeSpec,
    mode: &str,
    target_len: usize,
) -> PyResult<f64> {
    core::relative_logit(&q, &k, n_q, n_k, &spec.inner, parse_mode(mode)?, target_len)
        .map_err(py_err)
}

#[pyfunction]
fn phase_step_report(spec: &PyRopeSpec, mode: &str, target_len: usize) -> PyResult<Vec<f64>> {
    core::phase_step_report(&spec.inner, parse_mode(mode)?, target_len).map_err(py_err)
}

/// One `f x d` antiphase noise chunk from generation stream `stream`.
#[pyfunction]
#[pyo3(signature = (rho, f, d, seed, stream=0))]
fn sample_chunk(rho: f64, f: usize, d: usize, seed: u64, stream: u64) -> PyResult<Vec<Vec<f64>>> {
    let params = core::AnsParams { rho, f, d, seed };
    let mut rng = core::RngStream::new(seed, stream);
    Ok(rows(
        &core::sample_chunk(&params, &mut rng)
            .map_err(py_err)?
            .frames,
    ))
}

#[pyfunction]
fn analytic_energy(rho: f64, f: usize, d: usize) -> PyResult<f64> {
    core::analytic_energy(&core::AnsParams { rho, f, d, seed: 0 }).map_err(py_err)
}

#[pyfunction]
fn analytic_psd(rho: f64, omega: f64) -> PyResult<f64> {
    core::analytic_psd(rho, omega).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (rho, quadrature_points=1024))]
fn parseval_energy(rho: f64, quadrature_points: usize) -> PyResult<f64> {
    core::parseval_energy(rho, quadrature_points).map_err(py_err)
}

/// Sink-pinned rolling window; frames are `(global_index, payload)` pairs.
#[pyclass(name = "KvWindow")]
struct PyKvWindow {
    inner: core::KvWindow,
}

#[pymethods]
impl PyKvWindow {
    #[new]
    fn new(window_w: usize, chunk_f: usize, sink_n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: core::KvWindow::new(window_w, chunk_f, sink_n).map_err(py_err)?,
        })
    }

    fn push_chunk(&mut self, frames: Vec<(usize, Vec<f32>)>) -> PyResult<()> {
        let entries = frames
            .into_iter()
            .map(|(i, p)| core::FrameEntry::new(i, p))
            .collect();
        self.inner.push_chunk(entries).map_err(py_err)
    }

    fn context_indices(&self) -> Vec<usize> {
        self.inner.context_indices()
    }

    fn context(&self) -> Vec<(usize, Vec<f32>)> {
        self.inner
            .context()
            .into_iter()
            .map(|e| (e.global_index, e.payload))
            .collect()
    }

    #[getter]
    fn next_index(&self) -> usize {
        self.inner.next_index()
    }

    #[getter]
    fn context_capacity(&self) -> usize {
        self.inner.context_capacity()
    }
}

/// Output of [`generate`].
#[pyclass(name = "GenerationTrace", get_all)]
struct PyTrace {
    frames: Vec<Vec<f64>>,
    contexts: Vec<Vec<usize>>,
    drift: Vec<Option<f64>>,
    metrics: BTreeMap<String, f64>,
}

/// Toy chunk-wise generation with the default pipeline and the given overrides.
#[pyfunction]
#[pyo3(signature = (mode="flex", rho=-1.0, seed=0, target_len=84, model_seed=0, spec=None))]
fn generate(
    mode: &str,
    rho: f64,
    seed: u64,
    target_len: usize,
    model_seed: u64,
    spec: Option<PyRopeSpec>,
) -> PyResult<PyTrace> {
    let mut cfg = core::PipelineConfig {
        mode: parse_mode(mode)?,
        target_len,
        model_seed,
        ..Default::default()
    };
    cfg.ans.rho = rho;
    cfg.ans.seed = seed;
    if let Some(s) = spec {
        cfg.rope = s.inner;
        cfg.ans.d = s.inner.d_f;
    }
    let trace = core::generate(&cfg).map_err(py_err)?;
    Ok(PyTrace {
        frames: rows(&trace.frames),
        contexts: trace.per_step_contexts,
        drift: trace.drift_curve,
        metrics: trace.metrics,
    })
}

#[pymodule]
fn flex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRopeSpec>()?;
    m.add_class::<PyKvWindow>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(plane_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(modulated_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(gate, m)?)?;
    m.add_function(wrap_pyfunction!(apply_rotary, m)?)?;
    m.add_function(wrap_pyfunction!(relative_logit, m)?)?;
    m.add_function(wrap_pyfunction!(phase_step_report, m)?)?;
    m.add_function(wrap_pyfunction!(sample_chunk, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_energy, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_psd, m)?)?;
    m.add_function(wrap_pyfunction!(parseval_energy, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
