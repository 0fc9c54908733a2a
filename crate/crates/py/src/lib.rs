//! Python bindings: the model pair, the sine eigenbasis, scenarios, the
//! integrator and the bound-certification pipeline, each wrapped thinly.
//! Reports cross the boundary as JSON strings so Python sees the exact same
//! schema the CLI writes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use netflow_waves::energy;
use netflow_waves::nonlinearity::{self, NonlinearModel, PowerFamily, ProbeSpec, SourceKind};
use netflow_waves::scenario::{parse_scenario_str, Overrides};
use netflow_waves::solver;
use netflow_waves::spectral::{ModalVector, SpectralBasis};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// The model pair (f, g) with its antiderivatives and hypothesis checkers.
#[pyclass(frozen)]
struct Model {
    inner: NonlinearModel,
    p: f64,
}

#[pymethods]
impl Model {
    /// f = 1, g = 0.
    #[staticmethod]
    fn linear() -> Model {
        Model {
            inner: NonlinearModel::linear(),
            p: 4.0,
        }
    }

    /// The builtin family f(r) = k0|r|^(p-2) - k1|r|^p1 + k2 with a named
    /// source: zero | power | sin | sin-minus-r | linear.
    #[staticmethod]
    #[pyo3(signature = (k0, k1=0.0, k2=0.0, p=4.0, p1=0.0, source="zero", scale=1.0, p0=2.0, force=false))]
    #[allow(clippy::too_many_arguments)]
    fn power_family(
        k0: f64,
        k1: f64,
        k2: f64,
        p: f64,
        p1: f64,
        source: &str,
        scale: f64,
        p0: f64,
        force: bool,
    ) -> PyResult<Model> {
        let family = PowerFamily { k0, k1, k2, p, p1 };
        let source = match source {
            "zero" => SourceKind::Zero,
            "power" => SourceKind::Power {
                scale,
                exponent: p0,
            },
            "sin" => SourceKind::Sin { scale },
            "sin-minus-r" => SourceKind::SinMinusLinear { scale },
            "linear" => SourceKind::Linear { scale },
            other => return Err(value_err(format!("unknown source kind \"{other}\""))),
        };
        let inner = if force {
            NonlinearModel::power_family_unchecked(family, source)
        } else {
            NonlinearModel::power_family(family, source).map_err(value_err)?
        };
        Ok(Model { inner, p })
    }

    fn f(&self, r: f64) -> f64 {
        self.inner.f(r)
    }

    fn g(&self, r: f64) -> f64 {
        self.inner.g(r)
    }

    /// F(r) = integral of f from 0 to r.
    fn flux_potential(&self, r: f64) -> PyResult<f64> {
        self.inner.flux_potential(r).map_err(value_err)
    }

    /// G(r) = integral of F from 0 to r.
    fn energy_density(&self, r: f64) -> PyResult<f64> {
        self.inner.energy_density(r).map_err(value_err)
    }

    /// All four hypothesis checks as a JSON report.
    #[pyo3(signature = (probe_range=10.0, probe_count=4096))]
    fn check_json(&self, probe_range: f64, probe_count: usize) -> PyResult<String> {
        let probe = ProbeSpec::new(probe_range, probe_count);
        let report = serde_json::json!({
            "growth": nonlinearity::check_growth(&self.inner, self.p, probe).map_err(runtime_err)?,
            "lipschitz": nonlinearity::check_lipschitz(&self.inner, probe),
            "monotone_flux": nonlinearity::check_monotone_flux(&self.inner, probe).map_err(runtime_err)?,
            "source_domination": nonlinearity::check_source_domination(&self.inner, probe).map_err(runtime_err)?,
        });
        Ok(report.to_string())
    }
}

/// Dirichlet sine eigenbasis of the negative Laplacian on (0, l_dom).
#[pyclass(frozen)]
struct Basis {
    inner: SpectralBasis,
}

#[pymethods]
impl Basis {
    #[new]
    #[pyo3(signature = (l_dom, m, n_quad=0))]
    fn new(l_dom: f64, m: usize, n_quad: usize) -> PyResult<Basis> {
        let n_quad = if n_quad == 0 { 4 * m } else { n_quad };
        Ok(Basis {
            inner: SpectralBasis::new(l_dom, m, n_quad).map_err(value_err)?,
        })
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    fn project(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.project(&values).map_err(value_err)?.0)
    }

    fn synthesize(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner
            .synthesize(&ModalVector(coeffs))
            .map_err(value_err)
    }

    fn inverse_laplacian(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .inverse_laplacian(&ModalVector(coeffs))
            .map_err(value_err)?
            .0)
    }

    fn l2_norm_sq(&self, coeffs: Vec<f64>) -> f64 {
        self.inner.l2_norm_sq(&ModalVector(coeffs))
    }

    /// ||grad v||^2 for the potential v = (-Laplacian)^{-1} u.
    fn potential_grad_sq(&self, coeffs: Vec<f64>) -> f64 {
        self.inner.potential_grad_sq(&ModalVector(coeffs))
    }

    fn lp_norm(&self, coeffs: Vec<f64>, p: f64) -> PyResult<f64> {
        self.inner.lp_norm(&ModalVector(coeffs), p).map_err(value_err)
    }
}

/// A fully validated run configuration, parsed from scenario TOML.
#[pyclass(frozen)]
struct Scenario {
    resolved: netflow_waves::scenario::ResolvedScenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    #[pyo3(signature = (text, force=false))]
    fn from_toml(text: &str, force: bool) -> PyResult<Scenario> {
        let overrides = Overrides {
            force,
            ..Overrides::default()
        };
        Ok(Scenario {
            resolved: parse_scenario_str(text, &overrides).map_err(value_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, force=false))]
    fn from_file(path: &str, force: bool) -> PyResult<Scenario> {
        let text = std::fs::read_to_string(path).map_err(value_err)?;
        Self::from_toml(&text, force)
    }

    #[getter]
    fn m(&self) -> usize {
        self.resolved.scenario.m
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.resolved.scenario.dt
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.resolved.scenario.t_final
    }

    #[getter]
    fn l_dom(&self) -> f64 {
        self.resolved.scenario.l_dom
    }
}

/// Sampled modal states plus the termination status.
#[pyclass(frozen)]
struct Trajectory {
    inner: solver::Trajectory,
}

#[pymethods]
impl Trajectory {
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    fn status(&self) -> String {
        match self.inner.status {
            solver::Termination::Completed => "completed".into(),
            solver::Termination::BlowUp { t } => format!("blow-up at t = {t}"),
            solver::Termination::StepFailure { t } => format!("step failure at t = {t}"),
        }
    }

    fn is_completed(&self) -> bool {
        self.inner.status.is_completed()
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    /// (t, a, a_dot) of sample i.
    fn sample(&self, i: usize) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
        let s = self
            .inner
            .samples
            .get(i)
            .ok_or_else(|| value_err(format!("sample index {i} out of range")))?;
        Ok((s.t, s.a.0.clone(), s.a_dot.0.clone()))
    }
}

/// Integrate a scenario.
#[pyfunction]
fn integrate(scenario: &Scenario) -> PyResult<Trajectory> {
    Ok(Trajectory {
        inner: solver::integrate(&scenario.resolved.scenario).map_err(runtime_err)?,
    })
}

/// Energy ledger columns of a trajectory: {"t", "E", "Phi", "gradvt2", "H"}.
#[pyfunction]
fn energy_ledger(
    scenario: &Scenario,
    trajectory: &Trajectory,
) -> PyResult<std::collections::HashMap<String, Vec<f64>>> {
    let scn = &scenario.resolved.scenario;
    let basis = scn.basis().map_err(runtime_err)?;
    let led = energy::ledger(&trajectory.inner, &basis, &scn.model).map_err(runtime_err)?;
    let mut out = std::collections::HashMap::new();
    out.insert("t".into(), led.times);
    out.insert("E".into(), led.energy);
    out.insert("Phi".into(), led.stored);
    out.insert("gradvt2".into(), led.grad_vt_sq);
    out.insert("H".into(), led.hamiltonian);
    out.insert("source_power".into(), led.source_power);
    Ok(out)
}

/// Full certification pipeline (checks, derived constants, envelopes, ball)
/// as a JSON report.
#[pyfunction]
fn certify_json(scenario: &Scenario) -> PyResult<String> {
    let rs = &scenario.resolved;
    let scn = &rs.scenario;
    let basis = scn.basis().map_err(runtime_err)?;
    let p = rs.model_desc.family.p;
    let growth = nonlinearity::check_growth(&scn.model, p, rs.bounds.probe).map_err(runtime_err)?;
    let domination =
        nonlinearity::check_source_domination(&scn.model, rs.bounds.probe).map_err(runtime_err)?;
    let init = solver::init_state(scn, &basis).map_err(runtime_err)?;
    let params = energy::derive_bound_params(
        &scn.model,
        &basis,
        &init,
        scn.t_final,
        &growth,
        &domination,
        rs.bounds.l_factor,
    )
    .map_err(runtime_err)?;
    let traj = solver::integrate(scn).map_err(runtime_err)?;
    let mut led = energy::ledger(&traj, &basis, &scn.model).map_err(runtime_err)?;
    energy::attach_envelopes(&mut led, &params);
    let bounds = energy::check_bounds(&led, &params);
    let ball = energy::check_ball(&traj, &basis, &params).map_err(runtime_err)?;
    let conservation = scn
        .model
        .source_is_zero()
        .then(|| energy::check_conservation(&led, rs.bounds.drift_tol));
    let report = serde_json::json!({
        "params": params,
        "bounds": bounds,
        "ball": ball,
        "conservation": conservation,
        "growth": growth,
        "source_domination": domination,
    });
    Ok(report.to_string())
}

#[pymodule]
fn netflow_waves_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Basis>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(energy_ledger, m)?)?;
    m.add_function(wrap_pyfunction!(certify_json, m)?)?;
    Ok(())
}
