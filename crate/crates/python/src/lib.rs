//! Python bindings for the zerolab engines.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use zerolab::delay::{self, DelayProblem as CoreDelay};
use zerolab::generator::{extract_coefficients_with, GeneratorEstimate as CoreEstimate, ParabolicSemigroup, ProbeOptions, TransportSemigroup};
use zerolab::harness::{self, RunConfig, WitnessFamily};
use zerolab::parabolic::{self, ParabolicProblem as CoreParabolic};
use zerolab::transport::{self, TransportProblem as CoreTransport};
use zerolab::{
    BoundarySpec, CoefficientField, Functional, GridFunction, History, Recording, Tolerance, Trajectory as CoreTrajectory,
};

fn err(e: zerolab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A float is a constant field, a list is sampled on the uniform grid,
/// a string is the JSON form (`{"kind": "sinusoid", ...}`).
fn field(obj: &Bound<'_, PyAny>) -> PyResult<CoefficientField> {
    if let Ok(v) = obj.extract::<f64>() {
        return Ok(CoefficientField::constant(v));
    }
    if let Ok(s) = obj.extract::<String>() {
        return serde_json::from_str(&s).map_err(json_err);
    }
    let values: Vec<f64> = obj.extract()?;
    Ok(CoefficientField::sampled(GridFunction::new(values).map_err(err)?))
}

fn tolerance(eps_rel: f64) -> PyResult<Tolerance> {
    Tolerance::new(eps_rel).map_err(err)
}

fn functional(name: &str) -> PyResult<Functional> {
    name.parse().map_err(err)
}

fn recording(every: usize, eps_rel: f64) -> PyResult<Recording> {
    Ok(Recording::every(every).with_tol(tolerance(eps_rel)?))
}

/// Returns `(z, degenerate)` for a sample vector.
#[pyfunction]
#[pyo3(signature = (values, eps_rel = 1e-9))]
fn zero_number(values: Vec<f64>, eps_rel: f64) -> PyResult<(usize, bool)> {
    let c = zerolab::zero_number(&values[..], tolerance(eps_rel)?);
    Ok((c.z, c.degenerate))
}

#[pyfunction]
#[pyo3(signature = (values, eps_rel = 1e-9))]
fn v_minus(values: Vec<f64>, eps_rel: f64) -> PyResult<usize> {
    Ok(zerolab::v_minus(&values[..], tolerance(eps_rel)?))
}

#[pyfunction]
#[pyo3(signature = (values, eps_rel = 1e-9))]
fn v_plus(values: Vec<f64>, eps_rel: f64) -> PyResult<usize> {
    Ok(zerolab::v_plus(&values[..], tolerance(eps_rel)?))
}

/// Recorded series of a run.
#[pyclass(frozen, module = "zerolab")]
struct Trajectory {
    inner: CoreTrajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn z(&self) -> Vec<usize> {
        self.inner.z_series.clone()
    }

    #[getter]
    fn v_minus(&self) -> Vec<usize> {
        self.inner.v_minus_series.clone()
    }

    #[getter]
    fn v_plus(&self) -> Vec<usize> {
        self.inner.v_plus_series.clone()
    }

    #[getter]
    fn sup_norm(&self) -> Vec<f64> {
        self.inner.sup_norms.clone()
    }

    #[getter]
    fn degenerate(&self) -> Vec<bool> {
        self.inner.degenerate_mask.clone()
    }

    /// Returns `(pass, violation_count, masked_count)`.
    #[pyo3(signature = (functional = "z"))]
    fn check(&self, functional: &str) -> PyResult<(bool, usize, usize)> {
        let r = zerolab::check_monotone(&self.inner, self::functional(functional)?);
        Ok((r.pass, r.violations.len(), r.masked_count))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Trajectory {
            inner: CoreTrajectory::from_csv(text).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// `u_t = a u_xx + b u_x + c u` on `[0, 1]` with Neumann conditions.
#[pyclass(frozen, module = "zerolab")]
struct ParabolicProblem {
    inner: CoreParabolic,
}

#[pymethods]
impl ParabolicProblem {
    #[new]
    #[pyo3(signature = (a = None, b = None, c = None))]
    fn new(a: Option<&Bound<'_, PyAny>>, b: Option<&Bound<'_, PyAny>>, c: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let get = |o: Option<&Bound<'_, PyAny>>, default: f64| match o {
            Some(o) => field(o),
            None => Ok(CoefficientField::constant(default)),
        };
        Ok(ParabolicProblem {
            inner: CoreParabolic::new(get(a, 1.0)?, get(b, 0.0)?, get(c, 0.0)?, BoundarySpec::Neumann),
        })
    }

    /// One implicit Euler step.
    fn step(&self, u: Vec<f64>, dt: f64) -> PyResult<Vec<f64>> {
        let u = GridFunction::new(u).map_err(err)?;
        let op = parabolic::assemble(&self.inner, u.n(), dt).map_err(err)?;
        Ok(parabolic::step(&u, &op).map_err(err)?.into_values())
    }

    /// Dense step matrix `I - dt L` on `n` points.
    fn step_matrix(&self, n: usize, dt: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(parabolic::assemble(&self.inner, n, dt).map_err(err)?.to_dense())
    }

    #[pyo3(signature = (u0, t_final, dt, record_every = 1, eps_rel = 1e-9))]
    fn simulate(&self, u0: Vec<f64>, t_final: f64, dt: f64, record_every: usize, eps_rel: f64) -> PyResult<Trajectory> {
        let u0 = GridFunction::new(u0).map_err(err)?;
        let rec = recording(record_every, eps_rel)?;
        Ok(Trajectory {
            inner: parabolic::simulate(&self.inner, &u0, t_final, dt, &rec).map_err(err)?,
        })
    }

    /// Generator estimate `(x, alpha, beta, gamma)` from the discrete semigroup.
    #[pyo3(signature = (n = 257, t_small = 1e-7, width = 0.2, stride = 1))]
    fn probe_generator(&self, n: usize, t_small: f64, width: f64, stride: usize) -> PyResult<GeneratorEstimate> {
        let sg = ParabolicSemigroup::new(self.inner.clone(), n);
        probe(&sg, t_small, width, stride)
    }
}

/// `x'(t) = -p x(t - r) + q x(t)`.
#[pyclass(frozen, module = "zerolab")]
struct DelayProblem {
    inner: CoreDelay,
    r: f64,
}

#[pymethods]
impl DelayProblem {
    #[new]
    #[pyo3(signature = (p, q = 0.0, r = 1.0))]
    fn new(p: f64, q: f64, r: f64) -> Self {
        DelayProblem {
            inner: CoreDelay::linear(p, q),
            r,
        }
    }

    /// History samples on `[-r, 0]`, oldest first; the step is `r / (len - 1)`.
    #[pyo3(signature = (history, t_final, record_every = 1, eps_rel = 1e-9))]
    fn simulate(&self, history: Vec<f64>, t_final: f64, record_every: usize, eps_rel: f64) -> PyResult<Trajectory> {
        let h = History::new(history, self.r).map_err(err)?;
        let rec = recording(record_every, eps_rel)?;
        Ok(Trajectory {
            inner: delay::simulate(&self.inner, &h, t_final, &rec).map_err(err)?,
        })
    }

    /// Returns `(trajectory, x(t) at every step)`.
    #[pyo3(signature = (history, t_final, record_every = 1, eps_rel = 1e-9))]
    fn simulate_with_trace(
        &self,
        history: Vec<f64>,
        t_final: f64,
        record_every: usize,
        eps_rel: f64,
    ) -> PyResult<(Trajectory, Vec<f64>)> {
        let h = History::new(history, self.r).map_err(err)?;
        let rec = recording(record_every, eps_rel)?;
        let (traj, trace, _) = delay::simulate_with_trace(&self.inner, &h, t_final, &rec).map_err(err)?;
        Ok((Trajectory { inner: traj }, trace))
    }
}

/// `u_t = b u_x + c u` on `[0, 1]` with delayed boundary feedback.
#[pyclass(frozen, module = "zerolab")]
struct TransportProblem {
    inner: CoreTransport,
}

#[pymethods]
impl TransportProblem {
    #[new]
    #[pyo3(signature = (b = None, c = None, a_coef = -1.0, alpha_tilde = 0.0))]
    fn new(b: Option<&Bound<'_, PyAny>>, c: Option<&Bound<'_, PyAny>>, a_coef: f64, alpha_tilde: f64) -> PyResult<Self> {
        let b = b.map(field).transpose()?.unwrap_or(CoefficientField::constant(1.0));
        let c = c.map(field).transpose()?.unwrap_or(CoefficientField::constant(0.0));
        Ok(TransportProblem {
            inner: CoreTransport::new(b, c, a_coef, alpha_tilde),
        })
    }

    /// Transit time `r = ∫ 1/b`.
    #[pyo3(signature = (n = 257))]
    fn delay(&self, n: usize) -> PyResult<f64> {
        Ok(self.inner.characteristics(n).map_err(err)?.r())
    }

    /// Maps a history on `[-r, 0]` to a profile on the `n`-point grid.
    fn apply_h(&self, history: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
        let cmap = self.inner.characteristics(n).map_err(err)?;
        let h = History::new(history, cmap.r()).map_err(err)?;
        Ok(transport::apply_h(&h, &self.inner, &cmap).map_err(err)?.into_values())
    }

    fn apply_h_inv(&self, profile: Vec<f64>) -> PyResult<Vec<f64>> {
        let phi = GridFunction::new(profile).map_err(err)?;
        let cmap = self.inner.characteristics(phi.n()).map_err(err)?;
        Ok(transport::apply_h_inv(&phi, &self.inner, &cmap).map_err(err)?.values().to_vec())
    }

    /// Returns `(trajectory, trace times, boundary trace)`.
    #[pyo3(signature = (phi0, t_final, dt, record_every = 1, eps_rel = 1e-9))]
    fn evolve(
        &self,
        phi0: Vec<f64>,
        t_final: f64,
        dt: f64,
        record_every: usize,
        eps_rel: f64,
    ) -> PyResult<(Trajectory, Vec<f64>, Vec<f64>)> {
        let phi = GridFunction::new(phi0).map_err(err)?;
        let cmap = self.inner.characteristics(phi.n()).map_err(err)?;
        let rec = recording(record_every, eps_rel)?;
        let ev = transport::evolve(&self.inner, &phi, t_final, dt, &cmap, &rec).map_err(err)?;
        Ok((Trajectory { inner: ev.trajectory }, ev.trace_times, ev.trace))
    }

    #[pyo3(signature = (n = 257, t_small = 1e-7, width = 0.2, stride = 1))]
    fn probe_generator(&self, n: usize, t_small: f64, width: f64, stride: usize) -> PyResult<GeneratorEstimate> {
        let sg = TransportSemigroup::new(self.inner.clone(), n).map_err(err)?;
        probe(&sg, t_small, width, stride)
    }
}

/// Recovered `alpha`, `beta`, `gamma` at the probe points.
#[pyclass(frozen, module = "zerolab")]
struct GeneratorEstimate {
    inner: CoreEstimate,
}

#[pymethods]
impl GeneratorEstimate {
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha.clone()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }

    #[getter]
    fn gamma(&self) -> Vec<f64> {
        self.inner.gamma.clone()
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    fn min_alpha(&self) -> f64 {
        self.inner.min_alpha()
    }

    fn summary_json(&self) -> PyResult<String> {
        self.inner.summary_json().map_err(err)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

fn probe<S: zerolab::generator::Semigroup>(sg: &S, t_small: f64, width: f64, stride: usize) -> PyResult<GeneratorEstimate> {
    let opts = ProbeOptions {
        width,
        stride,
        ..ProbeOptions::default()
    };
    Ok(GeneratorEstimate {
        inner: extract_coefficients_with(sg, t_small, &opts).map_err(err)?,
    })
}

/// Runs a campaign from its JSON configuration; returns the JSON report.
#[pyfunction]
fn run_campaign(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config_json).map_err(err)?;
    let report = py.detach(|| harness::run_campaign(&cfg)).map_err(err)?;
    report.to_json().map_err(err)
}

/// `family` is `"positive-delay"`, `"negative-delay"` or a JSON family.
#[pyfunction]
#[pyo3(signature = (family = "positive-delay", budget = 500, seed = 0))]
fn witness_search(py: Python<'_>, family: &str, budget: usize, seed: u64) -> PyResult<String> {
    let fam = match family {
        "positive-delay" => WitnessFamily::positive_feedback_delay(),
        "negative-delay" => WitnessFamily::negative_feedback_delay(),
        text => serde_json::from_str(text).map_err(json_err)?,
    };
    let report = py.detach(|| harness::witness_search(&fam, budget, seed)).map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(json_err)
}

#[pymodule]
#[pyo3(name = "zerolab")]
fn zerolab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(zero_number, m)?)?;
    m.add_function(wrap_pyfunction!(v_minus, m)?)?;
    m.add_function(wrap_pyfunction!(v_plus, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(witness_search, m)?)?;
    m.add_class::<Trajectory>()?;
    m.add_class::<ParabolicProblem>()?;
    m.add_class::<DelayProblem>()?;
    m.add_class::<TransportProblem>()?;
    m.add_class::<GeneratorEstimate>()?;
    Ok(())
}
