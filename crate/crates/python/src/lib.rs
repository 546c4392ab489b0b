//! Python bindings: hull membership, projection, the exact oracle, synthetic
//! data and the train/test analysis pipeline.

use std::path::PathBuf;

use hullaudit_core::harness::{self, SyntheticDistribution};
use hullaudit_core::ingest::infer_schema;
use hullaudit_core::report::{to_json_line, to_json_pretty};
use hullaudit_core::{hull, oracle, MembershipVerdict, Projection, ScalingMode, Schema, Variant};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "SolverConfig", from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    inner: hull::SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (gap_tolerance=1e-10, membership_tolerance=1e-6, max_iterations=None, variant="away_step_fw"))]
    fn new(
        gap_tolerance: f64,
        membership_tolerance: f64,
        max_iterations: Option<usize>,
        variant: &str,
    ) -> PyResult<Self> {
        let inner = hull::SolverConfig {
            gap_tolerance,
            membership_tolerance,
            max_iterations,
            variant: variant.parse::<Variant>().map_err(value_error)?,
            seed: 0,
        };
        inner.validate().map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn gap_tolerance(&self) -> f64 {
        self.inner.gap_tolerance
    }

    #[getter]
    fn membership_tolerance(&self) -> f64 {
        self.inner.membership_tolerance
    }

    #[getter]
    fn max_iterations(&self) -> Option<usize> {
        self.inner.max_iterations
    }

    #[getter]
    fn variant(&self) -> String {
        match self.inner.variant {
            Variant::VanillaFw => "vanilla_fw".into(),
            Variant::AwayStepFw => "away_step_fw".into(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "SolverConfig(gap_tolerance={:e}, membership_tolerance={:e}, max_iterations={:?}, variant='{}')",
            self.inner.gap_tolerance,
            self.inner.membership_tolerance,
            self.inner.max_iterations,
            self.variant()
        )
    }
}

fn config_or_default(config: Option<&PySolverConfig>) -> hull::SolverConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

fn projection_dict<'py>(py: Python<'py>, p: &Projection) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("weights", p.weights.clone())?;
    d.set_item("projected_point", p.projected_point.clone())?;
    d.set_item("residual", p.residual.clone())?;
    d.set_item("distance", p.distance)?;
    d.set_item("final_gap", p.final_gap)?;
    d.set_item("iterations", p.iterations)?;
    d.set_item("converged", p.converged)?;
    Ok(d)
}

fn verdict_dict<'py>(py: Python<'py>, v: &MembershipVerdict) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("status", v.status.to_string())?;
    d.set_item("projection", projection_dict(py, &v.projection)?)?;
    match &v.certificate {
        Some(c) => {
            let cert = PyDict::new(py);
            cert.set_item("normal", c.normal.clone())?;
            cert.set_item("margin", c.margin)?;
            cert.set_item("support_row", c.support_row)?;
            d.set_item("certificate", cert)?;
        }
        None => d.set_item("certificate", py.None())?,
    }
    d.set_item("tolerance", v.tolerance)?;
    Ok(d)
}

/// The convex hull of a fixed set of rows.
#[pyclass(name = "Hull")]
struct PyHull {
    points: hull::PointSet,
}

#[pymethods]
impl PyHull {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            points: hull::PointSet::from_rows(&rows).map_err(value_error)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.points.len()
    }

    #[getter]
    fn d(&self) -> usize {
        self.points.dim()
    }

    fn fingerprint(&self) -> String {
        self.points.fingerprint()
    }

    #[pyo3(signature = (q, config=None))]
    fn project<'py>(
        &self,
        py: Python<'py>,
        q: Vec<f64>,
        config: Option<PySolverConfig>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config_or_default(config.as_ref());
        let p = py
            .detach(|| hull::project(&self.points, &q, &cfg))
            .map_err(value_error)?;
        projection_dict(py, &p)
    }

    #[pyo3(signature = (q, config=None))]
    fn classify<'py>(
        &self,
        py: Python<'py>,
        q: Vec<f64>,
        config: Option<PySolverConfig>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config_or_default(config.as_ref());
        let v = py
            .detach(|| hull::classify(&self.points, &q, &cfg))
            .map_err(value_error)?;
        verdict_dict(py, &v)
    }

    /// Classifies each query; raises on the first query that fails.
    #[pyo3(signature = (queries, config=None))]
    fn batch_classify<'py>(
        &self,
        py: Python<'py>,
        queries: Vec<Vec<f64>>,
        config: Option<PySolverConfig>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let cfg = config_or_default(config.as_ref());
        let verdicts = py.detach(|| hull::batch_classify(&self.points, &queries, &cfg));
        verdicts
            .into_iter()
            .map(|v| verdict_dict(py, &v.map_err(value_error)?))
            .collect()
    }
}

/// Exact distance to the hull of at most 12 points in at most 4 dimensions.
#[pyfunction]
fn exact_membership<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    q: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = oracle::exact_membership(&points, &q).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("inside", r.inside)?;
    d.set_item("exact_distance", r.exact_distance)?;
    d.set_item("support", r.support)?;
    d.set_item("barycentric", r.barycentric)?;
    Ok(d)
}

/// Rows of a seeded synthetic table (`gaussian` or `uniform_box`).
#[pyfunction]
#[pyo3(signature = (n, d, distribution="uniform_box", seed=0))]
fn make_synthetic(n: usize, d: usize, distribution: &str, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let dist: SyntheticDistribution = distribution.parse().map_err(value_error)?;
    let table = harness::make_synthetic(n, d, dist, seed).map_err(value_error)?;
    let cols: Vec<&[f64]> = (0..d)
        .map(|j| table.numeric_column(j).expect("synthetic columns are numeric"))
        .collect();
    Ok((0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Runs the train/test pipeline on two delimited files. Returns the reports
/// as JSON lines and the cohort summary as a JSON document.
#[pyfunction]
#[pyo3(signature = (train, test, schema=None, scaling="minmax", config=None, significance=0.05))]
fn run_analysis(
    py: Python<'_>,
    train: PathBuf,
    test: PathBuf,
    schema: Option<PathBuf>,
    scaling: &str,
    config: Option<PySolverConfig>,
    significance: f64,
) -> PyResult<(Vec<String>, String)> {
    let scaling: ScalingMode = scaling.parse().map_err(value_error)?;
    let cfg = config_or_default(config.as_ref());
    py.detach(|| {
        let schema = match schema {
            Some(path) => Schema::from_path(path).map_err(value_error)?,
            None => infer_schema(&train).map_err(value_error)?.schema,
        };
        let train = hullaudit_core::load_table(&train, &schema).map_err(value_error)?;
        let test = hullaudit_core::load_table(&test, &schema).map_err(value_error)?;
        let a = harness::run_analysis(&train, &test, &cfg, scaling, significance)
            .map_err(value_error)?;
        let reports = a.reports.iter().map(to_json_line).collect();
        Ok((reports, to_json_pretty(&a.summary)))
    })
}

#[pymodule]
fn hullaudit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyHull>()?;
    m.add_function(wrap_pyfunction!(exact_membership, m)?)?;
    m.add_function(wrap_pyfunction!(make_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(run_analysis, m)?)?;
    Ok(())
}
