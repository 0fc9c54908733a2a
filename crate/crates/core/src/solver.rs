//! The modal second-order system obtained by projecting the wave equation
//! onto the sine eigenbasis:
//!
//! ```text
//! a_j'' = -λ_j · ⟨F(u), w_j⟩ + ⟨g(u), w_j⟩,    u = Σ a_j w_j
//! ```
//!
//! The acceleration depends on positions only, so a velocity-Verlet step is
//! symplectic for the zero-source Hamiltonian case; a classical RK4 step on
//! the first-order system is available for accuracy comparisons. Blow-ups
//! and failed evaluations terminate integration with a diagnosable status
//! instead of an error.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::NonlinearModel;
use crate::spectral::{ModalVector, SpectralBasis, SpectralError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("scenario invalid: {0}")]
    BadScenario(String),
    #[error("the potential-form integration needs a zero source term")]
    PotentialFormNeedsZeroSource,
}

/// Time, modal coefficients and their time derivatives: the full discrete
/// unknown.
#[derive(Clone, Debug)]
pub struct GalerkinState {
    pub t: f64,
    pub a: ModalVector,
    pub a_dot: ModalVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Verlet,
    Rk4,
}

impl std::fmt::Display for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Integrator::Verlet => write!(f, "verlet"),
            Integrator::Rk4 => write!(f, "rk4"),
        }
    }
}

/// One term c·sin(k·x) of an initial-data expression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub wavenumber: f64,
}

/// Initial data, either as modal coefficients or a finite sine sum; both can
/// be evaluated pointwise, which the finite-difference reference needs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum InitialData {
    Zero,
    /// Coefficients of w_1, w_2, ... (may exceed the scenario's m).
    Modal(Vec<f64>),
    SineSum(Vec<SineTerm>),
}

impl InitialData {
    pub fn eval(&self, x: f64, l_dom: f64) -> f64 {
        match self {
            InitialData::Zero => 0.0,
            InitialData::Modal(coeffs) => {
                let norm = (2.0 / l_dom).sqrt();
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * norm * ((j + 1) as f64 * PI * x / l_dom).sin())
                    .sum()
            }
            InitialData::SineSum(terms) => terms
                .iter()
                .map(|t| t.amplitude * (t.wavenumber * x).sin())
                .sum(),
        }
    }

    /// Modal coefficients with respect to the basis: direct for modal data
    /// within range, grid projection otherwise.
    pub fn project(&self, basis: &SpectralBasis) -> Result<ModalVector, SpectralError> {
        match self {
            InitialData::Zero => Ok(ModalVector::zeros(basis.mode_count())),
            InitialData::Modal(coeffs) if coeffs.len() <= basis.mode_count() => {
                let mut a = vec![0.0; basis.mode_count()];
                a[..coeffs.len()].copy_from_slice(coeffs);
                Ok(ModalVector(a))
            }
            _ => {
                let values: Vec<f64> = basis
                    .nodes()
                    .iter()
                    .map(|&x| self.eval(x, basis.l_dom()))
                    .collect();
                basis.project(&values)
            }
        }
    }

    pub fn max_abs_amplitude(&self) -> f64 {
        match self {
            InitialData::Zero => 0.0,
            InitialData::Modal(c) => c.iter().fold(0.0, |m, v| m.max(v.abs())),
            InitialData::SineSum(t) => t.iter().map(|t| t.amplitude.abs()).sum(),
        }
    }
}

/// Everything one integration run needs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: NonlinearModel,
    pub l_dom: f64,
    pub m: usize,
    pub n_quad: usize,
    pub u0: InitialData,
    pub u1: InitialData,
    pub t_final: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub sample_every: usize,
    pub blowup_threshold: f64,
}

impl Scenario {
    /// Default step targeting the fastest linear mode of the basis.
    pub fn default_dt(l_dom: f64, m: usize) -> f64 {
        1e-3 * (l_dom / PI) / (m as f64).sqrt()
    }

    pub fn basis(&self) -> Result<SpectralBasis, SpectralError> {
        SpectralBasis::new(self.l_dom, self.m, self.n_quad)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(SolverError::BadScenario(format!(
                "time.dt must be > 0 (got {})",
                self.dt
            )));
        }
        if !self.t_final.is_finite() || self.t_final <= 0.0 {
            return Err(SolverError::BadScenario(format!(
                "time.t_final must be > 0 (got {})",
                self.t_final
            )));
        }
        if self.sample_every == 0 {
            return Err(SolverError::BadScenario(
                "time.sample_every must be >= 1".into(),
            ));
        }
        if !self.blowup_threshold.is_finite() || self.blowup_threshold <= 0.0 {
            return Err(SolverError::BadScenario(
                "time.blowup_threshold must be > 0".into(),
            ));
        }
        for (name, data) in [("u0", &self.u0), ("u1", &self.u1)] {
            let amp = data.max_abs_amplitude().max(1.0);
            for x in [0.0, self.l_dom] {
                let v = data.eval(x, self.l_dom);
                if v.abs() > 1e-4 * amp {
                    return Err(SolverError::BadScenario(format!(
                        "data.{name} does not vanish at x = {x} (value {v:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    BlowUp { t: f64 },
    StepFailure { t: f64 },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

/// Sampled states at the requested cadence plus the termination status.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<GalerkinState>,
    pub status: Termination,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// Projected initial state at t = 0.
pub fn init_state(scenario: &Scenario, basis: &SpectralBasis) -> Result<GalerkinState, SolverError> {
    Ok(GalerkinState {
        t: 0.0,
        a: scenario.u0.project(basis)?,
        a_dot: scenario.u1.project(basis)?,
    })
}

/// Modal acceleration: −λ_j·⟨F(u), w_j⟩ + ⟨g(u), w_j⟩. Velocity-independent.
pub fn acceleration(
    basis: &SpectralBasis,
    model: &NonlinearModel,
    a: &ModalVector,
) -> Result<ModalVector, SpectralError> {
    let flux_hat = basis.apply_map(a, |r| model.flux_potential(r).unwrap_or(f64::NAN))?;
    let mut acc: Vec<f64> = flux_hat
        .as_slice()
        .iter()
        .zip(basis.eigenvalues())
        .map(|(fh, l)| -l * fh)
        .collect();
    if !model.source_is_zero() {
        let src_hat = basis.apply_map(a, |r| model.g(r))?;
        for (acc_j, s) in acc.iter_mut().zip(src_hat.as_slice()) {
            *acc_j += s;
        }
    }
    Ok(ModalVector(acc))
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

/// One explicit step. Verlet is the standard velocity form (valid because
/// the acceleration does not depend on velocities); RK4 acts on the
/// first-order system (a, a_dot).
pub fn step(
    state: &GalerkinState,
    basis: &SpectralBasis,
    model: &NonlinearModel,
    dt: f64,
    integrator: Integrator,
) -> Result<GalerkinState, SpectralError> {
    match integrator {
        Integrator::Verlet => {
            let acc0 = acceleration(basis, model, &state.a)?;
            let mut a = state.a.0.clone();
            let mut v = state.a_dot.0.clone();
            axpy(&mut v, 0.5 * dt, &acc0.0);
            axpy(&mut a, dt, &v);
            let a_new = ModalVector(a);
            let acc1 = acceleration(basis, model, &a_new)?;
            axpy(&mut v, 0.5 * dt, &acc1.0);
            Ok(GalerkinState {
                t: state.t + dt,
                a: a_new,
                a_dot: ModalVector(v),
            })
        }
        Integrator::Rk4 => {
            let k1a = &state.a_dot.0;
            let k1v = acceleration(basis, model, &state.a)?;

            let mut a2 = state.a.0.clone();
            axpy(&mut a2, 0.5 * dt, k1a);
            let mut v2 = state.a_dot.0.clone();
            axpy(&mut v2, 0.5 * dt, &k1v.0);
            let k2v = acceleration(basis, model, &ModalVector(a2.clone()))?;

            let mut a3 = state.a.0.clone();
            axpy(&mut a3, 0.5 * dt, &v2);
            let mut v3 = state.a_dot.0.clone();
            axpy(&mut v3, 0.5 * dt, &k2v.0);
            let k3v = acceleration(basis, model, &ModalVector(a3.clone()))?;

            let mut a4 = state.a.0.clone();
            axpy(&mut a4, dt, &v3);
            let mut v4 = state.a_dot.0.clone();
            axpy(&mut v4, dt, &k3v.0);
            let k4v = acceleration(basis, model, &ModalVector(a4.clone()))?;

            // a' stages: k1a = v, k2a = v2, k3a = v3, k4a = v4
            let mut a = state.a.0.clone();
            let mut v = state.a_dot.0.clone();
            for j in 0..a.len() {
                a[j] += dt / 6.0 * (k1a[j] + 2.0 * v2[j] + 2.0 * v3[j] + v4[j]);
                v[j] += dt / 6.0 * (k1v.0[j] + 2.0 * k2v.0[j] + 2.0 * k3v.0[j] + k4v.0[j]);
            }
            Ok(GalerkinState {
                t: state.t + dt,
                a: ModalVector(a),
                a_dot: ModalVector(v),
            })
        }
    }
}

enum Drive {
    Field,
    Potential,
}

type Accel<'a> = dyn Fn(&ModalVector) -> Result<ModalVector, SpectralError> + 'a;

/// Advance (state, cached force) by one step in place.
fn advance(
    state: &mut GalerkinState,
    force: &mut ModalVector,
    dt: f64,
    integrator: Integrator,
    accel: &Accel<'_>,
) -> Result<(), SpectralError> {
    match integrator {
        Integrator::Verlet => {
            axpy(&mut state.a_dot.0, 0.5 * dt, &force.0);
            axpy(&mut state.a.0, dt, &state.a_dot.0);
            *force = accel(&state.a)?;
            axpy(&mut state.a_dot.0, 0.5 * dt, &force.0);
        }
        Integrator::Rk4 => {
            let k1v = force.clone();
            let k1a = state.a_dot.0.clone();

            let mut a2 = state.a.0.clone();
            axpy(&mut a2, 0.5 * dt, &k1a);
            let mut v2 = state.a_dot.0.clone();
            axpy(&mut v2, 0.5 * dt, &k1v.0);
            let k2v = accel(&ModalVector(a2))?;

            let mut a3 = state.a.0.clone();
            axpy(&mut a3, 0.5 * dt, &v2);
            let mut v3 = state.a_dot.0.clone();
            axpy(&mut v3, 0.5 * dt, &k2v.0);
            let k3v = accel(&ModalVector(a3))?;

            let mut a4 = state.a.0.clone();
            axpy(&mut a4, dt, &v3);
            let mut v4 = state.a_dot.0.clone();
            axpy(&mut v4, dt, &k3v.0);
            let k4v = accel(&ModalVector(a4))?;

            // a-stages are k1a = a_dot, v2, v3, v4
            for j in 0..state.a.len() {
                state.a.0[j] += dt / 6.0 * (k1a[j] + 2.0 * v2[j] + 2.0 * v3[j] + v4[j]);
                state.a_dot.0[j] +=
                    dt / 6.0 * (k1v.0[j] + 2.0 * k2v.0[j] + 2.0 * k3v.0[j] + k4v.0[j]);
            }
            *force = accel(&state.a)?;
        }
    }
    Ok(())
}

fn integrate_inner(scenario: &Scenario, drive: Drive) -> Result<Trajectory, SolverError> {
    scenario.validate()?;
    let basis = scenario.basis()?;
    let model = &scenario.model;
    let mut state = init_state(scenario, &basis)?;
    if matches!(drive, Drive::Potential) {
        if !model.source_is_zero() {
            return Err(SolverError::PotentialFormNeedsZeroSource);
        }
        state.a = basis.inverse_laplacian(&state.a)?;
        state.a_dot = basis.inverse_laplacian(&state.a_dot)?;
    }
    // In potential coordinates b = (−Δ)⁻¹ a the acceleration is
    // b'' = −⟨F(−Δ b), w_j⟩, one eigenvalue scaling away from the field form.
    let accel = |a: &ModalVector| -> Result<ModalVector, SpectralError> {
        match drive {
            Drive::Field => acceleration(&basis, model, a),
            Drive::Potential => {
                let u = basis.negative_laplacian(a)?;
                let flux_hat = basis.apply_map(&u, |r| model.flux_potential(r).unwrap_or(f64::NAN))?;
                Ok(ModalVector(flux_hat.0.iter().map(|v| -v).collect()))
            }
        }
    };

    let n_steps = scenario.step_count();
    let mut samples = Vec::with_capacity(n_steps / scenario.sample_every + 2);
    samples.push(state.clone());
    let mut status = Termination::Completed;

    // Cache the force so Verlet costs one evaluation per step.
    let mut force = match accel(&state.a) {
        Ok(f) => f,
        Err(_) => {
            return Ok(Trajectory {
                samples,
                status: Termination::StepFailure { t: 0.0 },
            })
        }
    };

    for i in 1..=n_steps {
        let t = i as f64 * scenario.dt;
        let step_result = advance(
            &mut state,
            &mut force,
            scenario.dt,
            scenario.integrator,
            &accel,
        );
        state.t = t;

        if step_result.is_err() || !state.a.is_finite() || !state.a_dot.is_finite() {
            status = Termination::StepFailure { t };
            break;
        }
        if state.a.max_abs() > scenario.blowup_threshold {
            status = Termination::BlowUp { t };
            samples.push(state.clone());
            break;
        }
        if i % scenario.sample_every == 0 || i == n_steps {
            samples.push(state.clone());
        }
    }

    Ok(Trajectory { samples, status })
}

/// Integrate the modal system from t = 0 to t_final, sampling every
/// `sample_every` steps. Blow-up and step failure are recorded statuses.
pub fn integrate(scenario: &Scenario) -> Result<Trajectory, SolverError> {
    integrate_inner(scenario, Drive::Field)
}

/// Integrate the equivalent potential-form system b'' = −⟨F(−Δ b), w⟩ with
/// b = (−Δ)⁻¹u; returns the trajectory in potential coordinates. Requires a
/// zero source.
pub fn integrate_potential_form(scenario: &Scenario) -> Result<Trajectory, SolverError> {
    integrate_inner(scenario, Drive::Potential)
}

/// Map a potential-form trajectory back to field coordinates (u = −Δv).
pub fn potential_to_field(
    trajectory: &Trajectory,
    basis: &SpectralBasis,
) -> Result<Trajectory, SpectralError> {
    let samples = trajectory
        .samples
        .iter()
        .map(|s| {
            Ok(GalerkinState {
                t: s.t,
                a: basis.negative_laplacian(&s.a)?,
                a_dot: basis.negative_laplacian(&s.a_dot)?,
            })
        })
        .collect::<Result<Vec<_>, SpectralError>>()?;
    Ok(Trajectory {
        samples,
        status: trajectory.status,
    })
}

/// Max-over-time L² distance between two trajectories sampled on the same
/// time grid (shorter one wins if a run terminated early).
pub fn max_l2_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let n = a.samples.len().min(b.samples.len());
    let mut worst = 0.0f64;
    for i in 0..n {
        let (sa, sb) = (&a.samples[i], &b.samples[i]);
        let (short, long) = if sa.a.len() <= sb.a.len() {
            (&sa.a, &sb.a)
        } else {
            (&sb.a, &sa.a)
        };
        let mut d2 = 0.0;
        for j in 0..long.len() {
            let lo = if j < short.len() { short[j] } else { 0.0 };
            let diff = long[j] - lo;
            d2 += diff * diff;
        }
        worst = worst.max(d2.sqrt());
    }
    worst
}
