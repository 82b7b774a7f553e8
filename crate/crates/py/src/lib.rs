//! Python bindings: tensors, free flows, ensembles, simulation, and the main checks.
//!
//! Couplings are passed as `{"01": 0.5, ...}` dicts keyed by bitmask strings.
//! Matrices are lists of rows; complex entries map to Python `complex`.

use std::collections::BTreeMap;
use std::path::Path;

use lohe_core::diagnostics::{self, classify_poles, ClassifyOptions};
use lohe_core::dynamics::{self, centroid};
use lohe_core::freeflow::{self, DEFAULT_SSP_TIMES, DEFAULT_SSP_TOL};
use lohe_core::harness::{run_scenario as run_config, verdict_name, ScenarioConfig};
use lohe_core::models::{self, Reduction, ReductionKind};
use lohe_core::reshape;
use lohe_core::rng::{random_skew_hermitian, random_unit_tensor, scenario_rng};
use lohe_core::tensor::contract_cubic as naive_cubic;
use lohe_core::{
    CouplingIndex, CouplingSet, DiagnosticsRecord, EnsembleState, FreeFlowOp, MatC, MultiShape,
    SimParams, TensorC, C64,
};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(lohe, LoheError, PyException);

fn err(e: lohe_core::LoheError) -> PyErr {
    LoheError::new_err(e.to_string())
}

fn shape(dims: Vec<usize>) -> PyResult<MultiShape> {
    MultiShape::new(dims).map_err(err)
}

fn index(key: &str) -> PyResult<CouplingIndex> {
    CouplingIndex::parse(key).map_err(err)
}

fn couplings(rank: usize, map: &BTreeMap<String, f64>) -> PyResult<CouplingSet> {
    CouplingSet::from_key_map(rank, map).map_err(err)
}

fn matrix(rows: Vec<Vec<C64>>) -> PyResult<MatC> {
    MatC::from_rows(&rows).map_err(err)
}

fn rows(m: &MatC) -> Vec<Vec<C64>> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect())
        .collect()
}

#[pyclass(name = "Tensor", module = "lohe", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTensor {
    inner: TensorC,
}

#[pymethods]
impl PyTensor {
    /// Entries are first-index-fastest.
    #[new]
    fn new(dims: Vec<usize>, entries: Vec<C64>) -> PyResult<Self> {
        let inner = TensorC::from_vec(&shape(dims)?, entries).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn random_unit(dims: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: random_unit_tensor(&shape(dims)?, &mut scenario_rng(seed)),
        })
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.shape().dims().to_vec()
    }

    #[getter]
    fn entries(&self) -> Vec<C64> {
        self.inner.entries().to_vec()
    }

    fn norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    /// Rows of the matricization for coupling `key`.
    fn matricize(&self, key: &str) -> PyResult<Vec<Vec<C64>>> {
        let p = reshape::plan(self.inner.shape(), index(key)?).map_err(err)?;
        Ok(rows(&reshape::matricize(&self.inner, &p).map_err(err)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(dims={:?}, norm={:.6})", self.inner.shape().dims(), self.norm())
    }
}

#[pyclass(name = "FreeFlow", module = "lohe", frozen)]
struct PyFreeFlow {
    inner: FreeFlowOp,
}

#[pymethods]
impl PyFreeFlow {
    #[staticmethod]
    fn zero(dims: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: FreeFlowOp::zero(&shape(dims)?),
        })
    }

    #[staticmethod]
    fn kuramoto(nu: f64) -> PyResult<Self> {
        Ok(Self {
            inner: FreeFlowOp::kuramoto(nu).map_err(err)?,
        })
    }

    /// Real skew-symmetric `omega`.
    #[staticmethod]
    fn sphere(omega: Vec<Vec<C64>>) -> PyResult<Self> {
        Ok(Self {
            inner: FreeFlowOp::sphere(&matrix(omega)?).map_err(err)?,
        })
    }

    /// Hermitian `h`; the flow is `T ↦ −iHT`.
    #[staticmethod]
    fn lohe_matrix(h: Vec<Vec<C64>>) -> PyResult<Self> {
        Ok(Self {
            inner: FreeFlowOp::lohe_matrix(&matrix(h)?).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_matrix(dims: Vec<usize>, m: Vec<Vec<C64>>) -> PyResult<Self> {
        Ok(Self {
            inner: FreeFlowOp::from_matrix(&shape(dims)?, matrix(m)?).map_err(err)?,
        })
    }

    #[staticmethod]
    fn random(dims: Vec<usize>, scale: f64, seed: u64) -> PyResult<Self> {
        let s = shape(dims)?;
        let m = random_skew_hermitian(s.size(), scale, &mut scenario_rng(seed));
        Ok(Self {
            inner: FreeFlowOp::from_matrix(&s, m).map_err(err)?,
        })
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.shape().dims().to_vec()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<C64>> {
        rows(self.inner.matrix())
    }

    fn exp(&self, t: f64) -> PyResult<Vec<Vec<C64>>> {
        Ok(rows(&freeflow::tensor_exp(&self.inner, t).map_err(err)?))
    }

    fn apply(&self, t: PyRef<'_, PyTensor>) -> PyResult<PyTensor> {
        Ok(PyTensor {
            inner: self.inner.apply(&t.inner).map_err(err)?,
        })
    }
}

#[pyclass(name = "Ensemble", module = "lohe", frozen)]
struct PyEnsemble {
    inner: EnsembleState,
}

#[pymethods]
impl PyEnsemble {
    #[new]
    fn new(tensors: Vec<PyRef<'_, PyTensor>>) -> PyResult<Self> {
        let ts = tensors.iter().map(|t| t.inner.clone()).collect();
        Ok(Self {
            inner: EnsembleState::new(ts, 0.0).map_err(err)?,
        })
    }

    #[staticmethod]
    fn random(dims: Vec<usize>, n: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: dynamics::random_ensemble(&shape(dims)?, n, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn clustered(dims: Vec<usize>, n: usize, spread: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: dynamics::clustered_ensemble(&shape(dims)?, n, spread, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn bipolar(dims: Vec<usize>, n: usize, n_plus: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: dynamics::bipolar_ensemble(&shape(dims)?, n, n_plus, seed).map_err(err)?,
        })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.shape().dims().to_vec()
    }

    #[getter]
    fn tensors(&self) -> Vec<PyTensor> {
        self.inner
            .tensors()
            .iter()
            .map(|t| PyTensor { inner: t.clone() })
            .collect()
    }

    fn centroid(&self) -> PyTensor {
        PyTensor {
            inner: centroid(&self.inner),
        }
    }

    fn order_parameter(&self) -> f64 {
        diagnostics::order_parameter(&self.inner)
    }

    fn variance(&self) -> f64 {
        diagnostics::variance(&self.inner)
    }

    fn max_radius(&self) -> f64 {
        diagnostics::max_radius(&self.inner)
    }

    /// `(dV/dt, {key: (1/N) Σ‖commutator‖²})`.
    fn dissipation(&self, couplings: BTreeMap<String, f64>) -> PyResult<(f64, BTreeMap<String, f64>)> {
        let c = self::couplings(self.inner.shape().rank(), &couplings)?;
        let d = diagnostics::dissipation(&self.inner, &c).map_err(err)?;
        Ok((d.total, d.per_coupling.iter().map(|(i, v)| (i.key(), *v)).collect()))
    }

    #[pyo3(signature = (couplings, free_flow=None))]
    fn rhs(
        &self,
        couplings: BTreeMap<String, f64>,
        free_flow: Option<PyRef<'_, PyFreeFlow>>,
    ) -> PyResult<Vec<PyTensor>> {
        let p = params(&self.inner, &couplings, free_flow)?;
        Ok(dynamics::rhs(&self.inner, &p)
            .map_err(err)?
            .into_iter()
            .map(|inner| PyTensor { inner })
            .collect())
    }

    fn classify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let pa = classify_poles(&self.inner, ClassifyOptions::default()).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("verdict", verdict_name(pa.verdict))?;
        d.set_item("a", pa.a.clone())?;
        d.set_item("r_inf", pa.r_inf)?;
        d.set_item("r_gap", pa.r_gap)?;
        d.set_item("max_residual", pa.max_residual())?;
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Ensemble(n={}, dims={:?}, t={})",
            self.inner.len(),
            self.inner.shape().dims(),
            self.inner.time()
        )
    }
}

fn params(
    s: &EnsembleState,
    map: &BTreeMap<String, f64>,
    free_flow: Option<PyRef<'_, PyFreeFlow>>,
) -> PyResult<SimParams> {
    let mut p = SimParams::new(couplings(s.shape().rank(), map)?);
    if let Some(a) = free_flow {
        p = p.with_free_flow(a.inner.clone());
    }
    Ok(p)
}

#[pyclass(name = "Trajectory", module = "lohe", frozen)]
struct PyTrajectory {
    records: Vec<DiagnosticsRecord>,
    final_state: EnsembleState,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn final_state(&self) -> PyEnsemble {
        PyEnsemble {
            inner: self.final_state.clone(),
        }
    }

    /// Diagnostics columns keyed as in the CSV output.
    fn columns(&self) -> BTreeMap<&'static str, Vec<f64>> {
        let col = |f: fn(&DiagnosticsRecord) -> f64| self.records.iter().map(f).collect();
        BTreeMap::from([
            ("t", col(|r| r.t)),
            ("R", col(|r| r.r)),
            ("V", col(|r| r.v)),
            ("Dmax", col(|r| r.dmax)),
            ("F", col(|r| r.f)),
            ("diss_total", col(|r| r.diss_total)),
            ("diss_residual", col(|r| r.diss_residual)),
            ("norm_drift_max", col(|r| r.norm_drift_max)),
        ])
    }

    fn __len__(&self) -> usize {
        self.records.len()
    }
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (ensemble, couplings, free_flow=None, dt=1e-3, horizon=1.0, stride=1, renormalize=false))]
fn simulate(
    py: Python<'_>,
    ensemble: PyRef<'_, PyEnsemble>,
    couplings: BTreeMap<String, f64>,
    free_flow: Option<PyRef<'_, PyFreeFlow>>,
    dt: f64,
    horizon: f64,
    stride: usize,
    renormalize: bool,
) -> PyResult<PyTrajectory> {
    let p = params(&ensemble.inner, &couplings, free_flow)?
        .with_dt(dt)
        .with_horizon(horizon)
        .with_stride(stride)
        .with_renormalize(renormalize);
    let init = ensemble.inner.clone();
    let traj = py
        .detach(|| dynamics::simulate(&init, &p, &mut []))
        .map_err(err)?;
    Ok(PyTrajectory {
        records: traj.records,
        final_state: traj.final_state,
    })
}

#[pyfunction]
fn cubic_fast(a: PyRef<'_, PyTensor>, b: PyRef<'_, PyTensor>, c: PyRef<'_, PyTensor>, key: &str) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: reshape::cubic_fast(&a.inner, &b.inner, &c.inner, index(key)?).map_err(err)?,
    })
}

#[pyfunction]
fn contract_cubic(
    a: PyRef<'_, PyTensor>,
    b: PyRef<'_, PyTensor>,
    c: PyRef<'_, PyTensor>,
    key: &str,
) -> PyResult<PyTensor> {
    Ok(PyTensor {
        inner: naive_cubic(&a.inner, &b.inner, &c.inner, index(key)?).map_err(err)?,
    })
}

/// `{key: max residual}` over the sample times, plus `"pass"`.
#[pyfunction]
#[pyo3(signature = (free_flow, couplings, times=None, tol=DEFAULT_SSP_TOL))]
fn ssp_check<'py>(
    py: Python<'py>,
    free_flow: PyRef<'_, PyFreeFlow>,
    couplings: BTreeMap<String, f64>,
    times: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = self::couplings(free_flow.inner.rank(), &couplings)?;
    let times = times.unwrap_or_else(|| DEFAULT_SSP_TIMES.to_vec());
    let report = freeflow::ssp_check(&free_flow.inner, &c, &times, tol).map_err(err)?;
    let residuals = PyDict::new(py);
    for e in &report.entries {
        residuals.set_item(e.index.key(), e.max_residual)?;
    }
    let d = PyDict::new(py);
    d.set_item("residuals", residuals)?;
    d.set_item("pass", report.all_pass())?;
    Ok(d)
}

/// Max deviation between a low-rank model and its tensor embedding, for a seeded preset.
#[pyfunction]
#[pyo3(signature = (kind, kappa=1.0, seed=0, horizon=10.0, dt=1e-3))]
fn cross_validate(py: Python<'_>, kind: &str, kappa: f64, seed: u64, horizon: f64, dt: f64) -> PyResult<f64> {
    let kind = ReductionKind::parse(kind).map_err(err)?;
    py.detach(|| {
        let (red, init) = Reduction::preset(kind, kappa, seed)?;
        models::cross_validate(&red, &init, horizon, dt)
    })
    .map_err(err)
}

/// Runs a scenario file and returns its verdict as a JSON string.
#[pyfunction]
fn run_scenario(py: Python<'_>, config: &str) -> PyResult<String> {
    let path = Path::new(config);
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let cfg = ScenarioConfig::load(path).map_err(err)?;
    let (_, verdict) = py.detach(|| run_config(&cfg, &base)).map_err(err)?;
    serde_json::to_string(&verdict).map_err(|e| LoheError::new_err(e.to_string()))
}

#[pymodule]
fn lohe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LoheError", m.py().get_type::<LoheError>())?;
    m.add_class::<PyTensor>()?;
    m.add_class::<PyFreeFlow>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(cubic_fast, m)?)?;
    m.add_function(wrap_pyfunction!(contract_cubic, m)?)?;
    m.add_function(wrap_pyfunction!(ssp_check, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
