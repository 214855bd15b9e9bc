//! Python bindings: corpus generation and splitting, the TF-IDF vectorizer,
//! link emulation, the training function entry point and whole scenario runs.

use std::borrow::Cow;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use edgetrain_core::corpus::{self, encode_request, SplitSpec};
use edgetrain_core::netlink::{self, LinkSpec};
use edgetrain_core::runner::{self, ScenarioConfig, ScenarioResult};
use edgetrain_core::seed;
use edgetrain_core::textml::{self, CvConfig};
use edgetrain_core::Error;

fn value_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textml::tokenize(text)
}

#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: corpus::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (n_docs, vocab_size, noise=0.15, seed=42))]
    fn synthetic(n_docs: usize, vocab_size: usize, noise: f64, seed: u64) -> PyResult<Self> {
        let inner = corpus::generate_synthetic(n_docs, vocab_size, noise, seed).map_err(value_err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn load_csv(path: &str) -> PyResult<Self> {
        let inner = corpus::load_csv(path).map_err(value_err)?;
        Ok(PyDataset { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn source(&self) -> &str {
        self.inner.source()
    }

    /// `(id, text, label)` tuples.
    fn records(&self) -> Vec<(usize, String, &'static str)> {
        self.inner
            .records()
            .iter()
            .map(|r| (r.id, r.text.clone(), r.label.as_str()))
            .collect()
    }

    /// Returns `(test_ids, [shard_ids, ...])`.
    fn split(&self, test_fraction: f64, train_shards: Vec<f64>, seed: u64) -> PyResult<(Vec<usize>, Vec<Vec<usize>>)> {
        let spec = SplitSpec {
            test_fraction,
            train_shards,
            seed,
        };
        let parts = corpus::split(&self.inner, &spec).map_err(value_err)?;
        let ids = |rs: &[corpus::DocumentRecord]| rs.iter().map(|r| r.id).collect::<Vec<_>>();
        Ok((ids(&parts.test), parts.shards.iter().map(|s| ids(s)).collect()))
    }

    /// Training request payload for the records `ids`, using the default grid.
    #[pyo3(signature = (ids, folds=5, seed=0))]
    fn encode_request(&self, ids: Vec<usize>, folds: usize, seed: u64) -> PyResult<Cow<'static, [u8]>> {
        let records = self.inner.records();
        let shard = ids
            .iter()
            .map(|&i| {
                records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| PyValueError::new_err(format!("no record with id {i}")))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let cv = CvConfig {
            folds,
            seed,
            ..CvConfig::default()
        };
        Ok(Cow::Owned(encode_request(&shard, &cv).map_err(value_err)?))
    }
}

#[pyclass(name = "TfIdf", frozen)]
struct PyTfIdf {
    inner: textml::TfIdfModel,
}

#[pymethods]
impl PyTfIdf {
    #[staticmethod]
    fn fit(corpus: Vec<Vec<String>>) -> PyResult<Self> {
        let inner = textml::TfIdfModel::fit(&corpus).map_err(value_err)?;
        Ok(PyTfIdf { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn idf(&self, token: &str) -> Option<f64> {
        self.inner.idf(token)
    }

    /// Sparse `(term_index, weight)` pairs, L2-normalized.
    fn transform(&self, tokens: Vec<String>) -> Vec<(usize, f64)> {
        self.inner.transform(&tokens).entries().to_vec()
    }
}

#[pyclass(name = "Link", frozen)]
struct PyLink {
    inner: netlink::LinkProfile,
}

#[pymethods]
impl PyLink {
    #[new]
    #[pyo3(signature = (delay_ms, jitter_ms, loss_pct, bandwidth_mbps, mtu_payload=1448))]
    fn new(delay_ms: f64, jitter_ms: f64, loss_pct: f64, bandwidth_mbps: f64, mtu_payload: usize) -> PyResult<Self> {
        let spec = LinkSpec {
            delay_ms,
            jitter_ms,
            loss_pct,
            bandwidth_mbps,
            mtu_payload,
        };
        Ok(PyLink {
            inner: spec.to_profile().map_err(value_err)?,
        })
    }

    fn sample_delay(&self, seed: u64) -> f64 {
        netlink::sample_delay(&self.inner, &mut seed::rng(seed))
    }

    /// `(duration_s, packets_sent, packets_lost)`.
    fn transfer_time(&self, payload_bytes: usize, seed: u64) -> (f64, usize, usize) {
        let out = netlink::transfer_time(&self.inner, payload_bytes, &mut seed::rng(seed));
        (out.duration, out.packets_sent, out.packets_lost)
    }

    fn round_trip(&self, request_bytes: usize, response_bytes: usize, compute_seconds: f64, seed: u64) -> PyResult<f64> {
        if compute_seconds < 0.0 {
            return Err(PyValueError::new_err("compute_seconds must be >= 0"));
        }
        Ok(netlink::round_trip(
            &self.inner,
            request_bytes,
            response_bytes,
            compute_seconds,
            &mut seed::rng(seed),
        ))
    }
}

/// Runs the training function on raw request bytes; returns `(status, body)`.
#[pyfunction]
fn handle_training_request(py: Python<'_>, request: &[u8]) -> (u16, Cow<'static, [u8]>) {
    let owned = request.to_vec();
    let out = py.detach(move || textml::handle_training_request(&owned));
    (out.status, Cow::Owned(out.body))
}

/// Executes a scenario given as JSON text and returns the result as JSON text.
#[pyfunction]
#[pyo3(signature = (config_json, repetitions=None))]
fn run_scenario(py: Python<'_>, config_json: &str, repetitions: Option<usize>) -> PyResult<String> {
    let mut config = ScenarioConfig::from_json(config_json).map_err(value_err)?;
    if let Some(reps) = repetitions {
        config.repetitions = reps;
        config.validate().map_err(value_err)?;
    }
    let result = py
        .detach(move || runner::run_scenario(&config))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(String::from_utf8(result.to_json()).expect("json is utf-8"))
}

/// Loads a scenario file (relative CSV paths resolve against it) as JSON text.
#[pyfunction]
fn load_scenario(path: &str) -> PyResult<String> {
    let config = ScenarioConfig::load(path).map_err(value_err)?;
    Ok(serde_json::to_string(&config).expect("config serializes"))
}

/// Comparison report (JSON text) of result `a` against baseline `b`.
#[pyfunction]
fn compare(a_json: &str, b_json: &str) -> PyResult<String> {
    let a = ScenarioResult::from_json(a_json.as_bytes()).map_err(value_err)?;
    let b = ScenarioResult::from_json(b_json.as_bytes()).map_err(value_err)?;
    let report = runner::compare(&a, &b).map_err(value_err)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

#[pymodule]
fn edgetrain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(handle_training_request, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(load_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTfIdf>()?;
    m.add_class::<PyLink>()?;
    Ok(())
}
