//! Python bindings for the reconstruction library.
//!
//! Exposes the system model, simulation, both reconstructors, the
//! observability audit and adversary synthesis as a `ssr` extension
//! module. Vectors and matrices cross the boundary as plain lists;
//! attack signals are given as precomputed per-step value lists.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use ssr_core as core;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!(
            "{what} rows have unequal lengths"
        )));
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &data))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|row| row.iter().copied().collect())
        .collect()
}

fn vector_list(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn sensor_set(v: Vec<usize>) -> PyResult<core::SensorSet> {
    core::SensorSet::new(v).map_err(err)
}

/// `x_{k+1} = A·x_k + B·u_k`, `y_k = C·x_k + a_k` with 1-based sensors.
#[pyclass(module = "ssr")]
#[derive(Clone)]
struct LinearSystem {
    inner: core::LinearSystem,
}

#[pymethods]
impl LinearSystem {
    #[new]
    #[pyo3(signature = (a, c, b=None))]
    fn new(a: Vec<Vec<f64>>, c: Vec<Vec<f64>>, b: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let a = to_matrix(&a, "a")?;
        let c = to_matrix(&c, "c")?;
        let b = match b {
            Some(rows) => to_matrix(&rows, "b")?,
            None => DMatrix::zeros(a.nrows(), 0),
        };
        Ok(LinearSystem {
            inner: core::LinearSystem::new(a, b, c).map_err(err)?,
        })
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn sensor_count(&self) -> usize {
        self.inner.sensor_count()
    }

    fn a(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.a())
    }

    fn b(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.b())
    }

    fn c(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.c())
    }

    fn __repr__(&self) -> String {
        format!(
            "LinearSystem(n={}, p={}, q={})",
            self.inner.state_dim(),
            self.inner.input_dim(),
            self.inner.sensor_count()
        )
    }
}

/// Attack values per step, supported on a fixed sensor set.
#[pyclass(module = "ssr")]
#[derive(Clone)]
struct AttackScenario {
    inner: core::AttackScenario,
}

#[pymethods]
impl AttackScenario {
    /// `steps[t]` is the full q-vector applied at step `start_step + t`;
    /// entries outside `gamma` must be zero.
    #[new]
    #[pyo3(signature = (gamma, steps, start_step=0))]
    fn new(gamma: Vec<usize>, steps: Vec<Vec<f64>>, start_step: usize) -> PyResult<Self> {
        let gamma = sensor_set(gamma)?;
        let steps: Vec<DVector<f64>> = steps.into_iter().map(DVector::from_vec).collect();
        Ok(AttackScenario {
            inner: core::AttackScenario::from_steps(gamma, start_step, steps).map_err(err)?,
        })
    }

    #[getter]
    fn gamma(&self) -> Vec<usize> {
        self.inner.gamma().as_slice().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("AttackScenario(gamma={:?})", self.gamma())
    }
}

/// What a reconstructor is allowed to see: outputs y_0…y_K, inputs
/// u_0…u_{K−1}.
#[pyclass(module = "ssr")]
#[derive(Clone)]
struct Measurements {
    inner: core::Measurements,
}

#[pymethods]
impl Measurements {
    #[new]
    #[pyo3(signature = (outputs, inputs=None))]
    fn new(outputs: Vec<Vec<f64>>, inputs: Option<Vec<Vec<f64>>>) -> Self {
        Measurements {
            inner: core::Measurements {
                outputs: outputs.into_iter().map(DVector::from_vec).collect(),
                inputs: inputs
                    .unwrap_or_default()
                    .into_iter()
                    .map(DVector::from_vec)
                    .collect(),
            },
        }
    }

    #[getter]
    fn outputs(&self) -> Vec<Vec<f64>> {
        self.inner.outputs.iter().map(vector_list).collect()
    }

    #[getter]
    fn inputs(&self) -> Vec<Vec<f64>> {
        self.inner.inputs.iter().map(vector_list).collect()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn __repr__(&self) -> String {
        format!("Measurements(horizon={})", self.inner.horizon())
    }
}

/// Simulated states and outputs over steps 0…K.
#[pyclass(module = "ssr")]
struct Trajectory {
    inner: core::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        self.inner.states.iter().map(vector_list).collect()
    }

    #[getter]
    fn inputs(&self) -> Vec<Vec<f64>> {
        self.inner.inputs.iter().map(vector_list).collect()
    }

    #[getter]
    fn clean_outputs(&self) -> Vec<Vec<f64>> {
        self.inner.clean_outputs.iter().map(vector_list).collect()
    }

    #[getter]
    fn measured_outputs(&self) -> Vec<Vec<f64>> {
        self.inner.measured_outputs.iter().map(vector_list).collect()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn measurements(&self) -> Measurements {
        Measurements {
            inner: self.inner.measurements(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Trajectory(horizon={})", self.inner.horizon())
    }
}

/// Inputs may be one constant vector or explicit per-step vectors.
#[derive(FromPyObject)]
enum InputArg {
    PerStep(Vec<Vec<f64>>),
    Constant(Vec<f64>),
}

#[pyfunction]
#[pyo3(signature = (system, x0, steps, inputs=None, attack=None))]
fn simulate(
    system: PyRef<'_, LinearSystem>,
    x0: Vec<f64>,
    steps: usize,
    inputs: Option<InputArg>,
    attack: Option<PyRef<'_, AttackScenario>>,
) -> PyResult<Trajectory> {
    let signal = match inputs {
        None => core::InputSignal::Zero,
        Some(InputArg::Constant(v)) => core::InputSignal::Constant(DVector::from_vec(v)),
        Some(InputArg::PerStep(rows)) => {
            core::InputSignal::Steps(rows.into_iter().map(DVector::from_vec).collect())
        }
    };
    let traj = core::simulate(
        &system.inner,
        &DVector::from_vec(x0),
        &signal,
        attack.as_ref().map(|a| &a.inner),
        steps,
    )
    .map_err(err)?;
    Ok(Trajectory { inner: traj })
}

/// One least-squares estimate for one deletion hypothesis.
#[pyclass(module = "ssr", get_all)]
struct Candidate {
    ordinal: u64,
    subset: Vec<usize>,
    estimate: Vec<f64>,
    solver_ok: bool,
}

#[pymethods]
impl Candidate {
    fn __repr__(&self) -> String {
        format!(
            "Candidate(ordinal={}, subset={:?}, solver_ok={})",
            self.ordinal, self.subset, self.solver_ok
        )
    }
}

#[pyfunction]
fn candidate_set(
    system: PyRef<'_, LinearSystem>,
    measurements: PyRef<'_, Measurements>,
    k: usize,
    r: usize,
    m: usize,
) -> PyResult<Vec<Candidate>> {
    let set = core::candidate_set(&system.inner, &measurements.inner, k, r, m).map_err(err)?;
    Ok(set
        .candidates
        .into_iter()
        .map(|c| Candidate {
            ordinal: c.ordinal,
            subset: c.subset.as_slice().to_vec(),
            estimate: vector_list(&c.estimate),
            solver_ok: c.solver_ok,
        })
        .collect())
}

/// Verdict plus method diagnostics. `estimate` is set only for a unique
/// outcome; estimates refer to the state at step `k − r + 1`.
#[pyclass(module = "ssr")]
struct ReconstructionReport {
    inner: core::ReconstructionReport,
}

#[pymethods]
impl ReconstructionReport {
    #[getter]
    fn outcome(&self) -> &'static str {
        match self.inner.outcome {
            core::Outcome::Unique(_) => "unique",
            core::Outcome::Ambiguous(_) => "ambiguous",
            core::Outcome::Infeasible => "infeasible",
        }
    }

    #[getter]
    fn estimate(&self) -> Option<Vec<f64>> {
        match &self.inner.outcome {
            core::Outcome::Unique(x) => Some(vector_list(x)),
            _ => None,
        }
    }

    /// Competing values: one entry when unique, several when ambiguous.
    #[getter]
    fn representatives(&self) -> Vec<Vec<f64>> {
        match &self.inner.outcome {
            core::Outcome::Unique(x) => vec![vector_list(x)],
            core::Outcome::Ambiguous(xs) => xs.iter().map(vector_list).collect(),
            core::Outcome::Infeasible => Vec::new(),
        }
    }

    #[getter]
    fn method(&self) -> &'static str {
        match self.inner.method {
            core::Method::Sesvs { .. } => "sesvs",
            core::Method::Sesgc { .. } => "sesgc",
        }
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r
    }

    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new_bound(py);
        match &self.inner.diagnostics {
            core::Diagnostics::Sesvs {
                clusters,
                threshold,
                windows_tried,
                excluded,
            } => {
                d.set_item("kind", "sesvs")?;
                d.set_item("threshold", threshold)?;
                d.set_item("windows_tried", windows_tried)?;
                d.set_item("excluded", excluded)?;
                let cl: Vec<Bound<'py, PyDict>> = clusters
                    .iter()
                    .map(|c| {
                        let e = PyDict::new_bound(py);
                        e.set_item("ordinals", &c.ordinals)?;
                        e.set_item("representative", vector_list(&c.representative))?;
                        e.set_item("spread", c.spread)?;
                        Ok(e)
                    })
                    .collect::<PyResult<_>>()?;
                d.set_item("clusters", cl)?;
            }
            core::Diagnostics::Sesgc {
                surviving,
                residual_tol,
                excluded,
            } => {
                d.set_item("kind", "sesgc")?;
                d.set_item("surviving", surviving)?;
                d.set_item("residual_tol", residual_tol)?;
                d.set_item("excluded", excluded)?;
            }
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "ReconstructionReport({}, {}, k={}, r={})",
            self.method(),
            self.outcome(),
            self.inner.k,
            self.inner.r
        )
    }
}

#[pyfunction]
#[pyo3(signature = (system, measurements, k, s, tau=1, r=None, fallback=true,
                    eq_tol_abs=1e-6, eq_tol_rel=1e-8))]
#[allow(clippy::too_many_arguments)]
fn sesvs_reconstruct(
    system: PyRef<'_, LinearSystem>,
    measurements: PyRef<'_, Measurements>,
    k: usize,
    s: usize,
    tau: usize,
    r: Option<usize>,
    fallback: bool,
    eq_tol_abs: f64,
    eq_tol_rel: f64,
) -> PyResult<ReconstructionReport> {
    let opts = core::SesvsOptions {
        tau,
        r,
        eq_tol: core::EqTol {
            abs: eq_tol_abs,
            rel: eq_tol_rel,
        },
        fallback,
    };
    let report =
        core::sesvs_reconstruct(&system.inner, &measurements.inner, k, s, &opts).map_err(err)?;
    Ok(ReconstructionReport { inner: report })
}

#[pyfunction]
#[pyo3(signature = (system, measurements, k, s, r=None, residual_tol=0.1, max_rounds=None,
                    fallback=false, eq_tol_abs=1e-6, eq_tol_rel=1e-8))]
#[allow(clippy::too_many_arguments)]
fn sesgc_reconstruct(
    system: PyRef<'_, LinearSystem>,
    measurements: PyRef<'_, Measurements>,
    k: usize,
    s: usize,
    r: Option<usize>,
    residual_tol: f64,
    max_rounds: Option<usize>,
    fallback: bool,
    eq_tol_abs: f64,
    eq_tol_rel: f64,
) -> PyResult<ReconstructionReport> {
    let opts = core::SesgcOptions {
        r,
        residual_tol,
        max_rounds,
        eq_tol: core::EqTol {
            abs: eq_tol_abs,
            rel: eq_tol_rel,
        },
        fallback,
    };
    let report =
        core::sesgc_reconstruct(&system.inner, &measurements.inner, k, s, &opts).map_err(err)?;
    Ok(ReconstructionReport { inner: report })
}

/// Redundancy audit for size-`s` deletions.
#[pyclass(module = "ssr")]
struct ObservabilityReport {
    inner: core::ObservabilityReport,
}

#[pymethods]
impl ObservabilityReport {
    #[getter]
    fn s(&self) -> usize {
        self.inner.s
    }

    /// Largest s' such that every size-s' deletion stays observable.
    #[getter]
    fn s_max(&self) -> Option<usize> {
        self.inner.s_max
    }

    /// Max over deletions of the minimal full-rank window; None when some
    /// deletion never reaches full rank.
    #[getter]
    fn lower_bound_b(&self) -> Option<usize> {
        self.inner.lower_bound_b
    }

    /// `(deleted sensors, minimal full-rank window or None)` pairs.
    #[getter]
    fn subset_bounds(&self) -> Vec<(Vec<usize>, Option<usize>)> {
        self.inner
            .per_subset_min_r
            .iter()
            .map(|(set, min_r)| (set.as_slice().to_vec(), *min_r))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "ObservabilityReport(s={}, s_max={:?}, lower_bound_b={:?})",
            self.inner.s, self.inner.s_max, self.inner.lower_bound_b
        )
    }
}

#[pyfunction]
fn observability_report(
    system: PyRef<'_, LinearSystem>,
    s: usize,
) -> PyResult<ObservabilityReport> {
    Ok(ObservabilityReport {
        inner: core::observability_report(&system.inner, s).map_err(err)?,
    })
}

#[pyfunction]
fn is_s_sparse_observable(system: PyRef<'_, LinearSystem>, s: usize) -> PyResult<bool> {
    core::is_s_sparse_observable(&system.inner, s).map_err(err)
}

#[pyfunction]
fn sparse_observable_lower_bound(system: PyRef<'_, LinearSystem>, s: usize) -> PyResult<usize> {
    core::sparse_observable_lower_bound(&system.inner, s).map_err(err)
}

#[pyfunction]
fn min_r_for_full_rank(
    system: PyRef<'_, LinearSystem>,
    subset: Vec<usize>,
) -> PyResult<Option<usize>> {
    Ok(core::min_r_for_full_rank(&system.inner, &sensor_set(subset)?))
}

#[pyfunction]
fn enumerate_subsets(q: usize, m: usize) -> PyResult<Vec<Vec<usize>>> {
    Ok(core::enumerate_subsets(q, m)
        .map_err(err)?
        .into_iter()
        .map(|sub| sub.set.as_slice().to_vec())
        .collect())
}

#[pyfunction]
fn sesvs_guarantee_holds(q: usize, s: usize, tau: usize) -> PyResult<bool> {
    core::sesvs_guarantee_holds(q, s, tau).map_err(err)
}

#[pyfunction]
fn choose(p: usize, k: usize) -> u64 {
    core::choose(p, k)
}

/// A concrete attack that makes a reconstructor ambiguous, plus the
/// hypotheses it fools and their common reported bias.
#[pyclass(module = "ssr")]
struct DefeatCertificate {
    inner: core::DefeatCertificate,
}

#[pymethods]
impl DefeatCertificate {
    #[getter]
    fn target(&self) -> &'static str {
        match self.inner.target {
            core::DefeatTarget::Sesvs { .. } => "sesvs",
            core::DefeatTarget::Sesgc { .. } => "sesgc",
        }
    }

    #[getter]
    fn tau(&self) -> Option<usize> {
        match self.inner.target {
            core::DefeatTarget::Sesvs { tau } => Some(tau),
            _ => None,
        }
    }

    #[getter]
    fn rounds(&self) -> Option<usize> {
        match self.inner.target {
            core::DefeatTarget::Sesgc { rounds } => Some(rounds),
            _ => None,
        }
    }

    #[getter]
    fn true_gamma(&self) -> Vec<usize> {
        self.inner.true_gamma.as_slice().to_vec()
    }

    #[getter]
    fn subsets(&self) -> Vec<Vec<usize>> {
        self.inner
            .subsets
            .iter()
            .map(|s| s.as_slice().to_vec())
            .collect()
    }

    #[getter]
    fn bias(&self) -> Vec<f64> {
        vector_list(&self.inner.bias)
    }

    #[getter]
    fn step_attacks(&self) -> Vec<Vec<f64>> {
        self.inner.step_attacks.iter().map(vector_list).collect()
    }

    #[getter]
    fn start_step(&self) -> usize {
        self.inner.start_step
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r
    }

    /// The certificate as a replayable attack.
    fn scenario(&self) -> PyResult<AttackScenario> {
        Ok(AttackScenario {
            inner: self.inner.scenario().map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "DefeatCertificate({}, gamma={:?}, k={}, r={})",
            self.target(),
            self.true_gamma(),
            self.inner.k,
            self.inner.r
        )
    }
}

#[pyfunction]
#[pyo3(signature = (system, gamma, k, r, tau=1))]
fn synthesize_sesvs_defeat(
    system: PyRef<'_, LinearSystem>,
    gamma: Vec<usize>,
    k: usize,
    r: usize,
    tau: usize,
) -> PyResult<Option<DefeatCertificate>> {
    Ok(
        core::synthesize_sesvs_defeat(&system.inner, &sensor_set(gamma)?, k, r, tau)
            .map_err(err)?
            .map(|inner| DefeatCertificate { inner }),
    )
}

#[pyfunction]
#[pyo3(signature = (system, gamma, k, r, rounds=1))]
fn synthesize_sesgc_defeat(
    system: PyRef<'_, LinearSystem>,
    gamma: Vec<usize>,
    k: usize,
    r: usize,
    rounds: usize,
) -> PyResult<Option<DefeatCertificate>> {
    Ok(
        core::synthesize_sesgc_defeat(&system.inner, &sensor_set(gamma)?, k, r, rounds)
            .map_err(err)?
            .map(|inner| DefeatCertificate { inner }),
    )
}

#[pyfunction]
fn check_sesvs_defeat(
    system: PyRef<'_, LinearSystem>,
    certificate: PyRef<'_, DefeatCertificate>,
) -> PyResult<bool> {
    core::check_sesvs_defeat(&system.inner, &certificate.inner).map_err(err)
}

#[pyfunction]
fn check_sesgc_defeat(
    system: PyRef<'_, LinearSystem>,
    certificate: PyRef<'_, DefeatCertificate>,
) -> PyResult<bool> {
    core::check_sesgc_defeat(&system.inner, &certificate.inner).map_err(err)
}

#[pymodule]
fn ssr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LinearSystem>()?;
    m.add_class::<AttackScenario>()?;
    m.add_class::<Measurements>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Candidate>()?;
    m.add_class::<ReconstructionReport>()?;
    m.add_class::<ObservabilityReport>()?;
    m.add_class::<DefeatCertificate>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(candidate_set, m)?)?;
    m.add_function(wrap_pyfunction!(sesvs_reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(sesgc_reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(observability_report, m)?)?;
    m.add_function(wrap_pyfunction!(is_s_sparse_observable, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_observable_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(min_r_for_full_rank, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_subsets, m)?)?;
    m.add_function(wrap_pyfunction!(sesvs_guarantee_holds, m)?)?;
    m.add_function(wrap_pyfunction!(choose, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_sesvs_defeat, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_sesgc_defeat, m)?)?;
    m.add_function(wrap_pyfunction!(check_sesvs_defeat, m)?)?;
    m.add_function(wrap_pyfunction!(check_sesgc_defeat, m)?)?;
    Ok(())
}
