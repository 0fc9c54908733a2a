//! Energy functionals along trajectories and the derived a priori bounds.
//!
//! Pairing the equation against the potential v = (−Δ)⁻¹u gives the exact
//! balance dH/dt = ⟨g(u), v_t⟩ for H = ½‖∇v_t‖² + Φ(u), where
//! Φ(u) = ∫ G(u(x)) dx is the stored energy. Every envelope below is an
//! explicit-constant consequence of that balance plus the fitted hypothesis
//! constants, and is re-verified samplewise on computed trajectories:
//!
//! - Gronwall envelope: ‖∇v_t‖² + 2Φ ≤ K₀·e^{ct}, c = 1/λ₁ + d₁/2.
//! - Velocity envelope: ‖∇v_t‖²(t) ≤ (1/d̃)[e^{d̃t}(1+d̃) − 1]·K₀ − 2Φ(t).
//! - Comparison ODE: E(t) = ‖∇v‖² stays below y' = y − c_p·y^r + C₁e^{d̃t} − C₂.
//! - Bernoulli envelope: the closed form obtained after capping the forcing
//!   at its horizon value, positive on the whole horizon.
//! - Ball radius: ‖∇v‖_2 + ‖∇v‖_p stays inside an explicit R_T.

use serde::Serialize;
use thiserror::Error;

use crate::nonlinearity::{ConditionReport, Hypothesis, ModelError, NonlinearModel};
use crate::quadrature::gauss_legendre_unit;
use crate::solver::{acceleration, GalerkinState, Trajectory};
use crate::spectral::{ModalVector, SpectralBasis, SpectralError};

/// Gauss-Legendre node count for the s-quadrature route of the stored energy.
pub const S_QUAD_NODES: usize = 16;
/// Relative agreement demanded between the two stored-energy routes.
pub const STORED_ENERGY_AGREEMENT: f64 = 1e-8;

/// Mixed absolute/relative slack for envelope comparisons: envelopes grow
/// exponentially, so a pure relative tolerance would be meaningless at t = 0.
pub fn bound_tolerance(bound: f64) -> f64 {
    1e-9 + 1e-6 * bound.abs()
}

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("stored-energy routes disagree: grid quadrature {grid:e} vs s-quadrature {s_quadrature:e} (signals aliasing or quadrature misconfiguration)")]
    StoredEnergyDisagreement { grid: f64, s_quadrature: f64 },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("bound parameters need a satisfied {0:?} report with fitted constants")]
    MissingConstants(Hypothesis),
    #[error("bound parameters need p > 2, got {0}")]
    BadExponent(f64),
}

/// Both routes to Φ(u): grid quadrature of G(u(x)), and Gauss-Legendre in s
/// of ⟨F(s·u), u⟩ evaluated through the modal projection.
#[derive(Clone, Copy, Debug)]
pub struct StoredEnergy {
    pub grid: f64,
    pub s_quadrature: f64,
}

impl StoredEnergy {
    pub fn value(&self) -> f64 {
        self.grid
    }
}

/// Φ(u) with the built-in dual-route agreement check.
pub fn stored_energy(
    basis: &SpectralBasis,
    model: &NonlinearModel,
    a: &ModalVector,
) -> Result<StoredEnergy, EnergyError> {
    let values = basis.synthesize(a)?;
    let mut grid = 0.0;
    for &u in &values {
        grid += model.energy_density(u)?;
    }
    grid *= basis.quadrature_weight();

    let (nodes, weights) = gauss_legendre_unit(S_QUAD_NODES);
    let mut s_quadrature = 0.0;
    for (&s, &w) in nodes.iter().zip(&weights) {
        let scaled = ModalVector(a.0.iter().map(|c| c * s).collect());
        let flux_hat = basis.apply_map(&scaled, |r| model.flux_potential(r).unwrap_or(f64::NAN))?;
        let pairing: f64 = flux_hat.0.iter().zip(&a.0).map(|(f, c)| f * c).sum();
        s_quadrature += w * pairing;
    }

    if (grid - s_quadrature).abs() > STORED_ENERGY_AGREEMENT * grid.abs().max(1.0) {
        return Err(EnergyError::StoredEnergyDisagreement {
            grid,
            s_quadrature,
        });
    }
    Ok(StoredEnergy {
        grid,
        s_quadrature,
    })
}

/// H = ½‖∇v_t‖² + Φ(u) for one state.
pub fn hamiltonian(
    basis: &SpectralBasis,
    model: &NonlinearModel,
    state: &GalerkinState,
) -> Result<f64, EnergyError> {
    let phi = stored_energy(basis, model, &state.a)?.value();
    Ok(0.5 * basis.potential_grad_sq(&state.a_dot) + phi)
}

/// Per-sample energy quantities, plus the envelopes they must stay under
/// once bound parameters are attached.
#[derive(Clone, Debug, Default)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    /// Φ(u), grid route.
    pub stored: Vec<f64>,
    /// Φ(u), s-quadrature route.
    pub stored_alt: Vec<f64>,
    /// ‖∇v_t‖²
    pub grad_vt_sq: Vec<f64>,
    /// E = ‖∇v‖²
    pub energy: Vec<f64>,
    /// H = ½‖∇v_t‖² + Φ
    pub hamiltonian: Vec<f64>,
    /// ⟨g(u), v_t⟩
    pub source_power: Vec<f64>,
    pub env_gronwall: Option<Vec<f64>>,
    pub env_velocity: Option<Vec<f64>>,
    pub env_bernoulli: Option<Vec<f64>>,
    pub comparison: Option<Vec<f64>>,
}

impl EnergyLedger {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Fill the physical columns of the ledger.
pub fn ledger(
    trajectory: &Trajectory,
    basis: &SpectralBasis,
    model: &NonlinearModel,
) -> Result<EnergyLedger, EnergyError> {
    if trajectory.samples.is_empty() {
        return Err(EnergyError::EmptyTrajectory);
    }
    let mut led = EnergyLedger::default();
    let source_zero = model.source_is_zero();
    for state in &trajectory.samples {
        let phi = stored_energy(basis, model, &state.a)?;
        let grad_vt = basis.potential_grad_sq(&state.a_dot);
        led.times.push(state.t);
        led.stored.push(phi.grid);
        led.stored_alt.push(phi.s_quadrature);
        led.grad_vt_sq.push(grad_vt);
        led.energy.push(basis.potential_grad_sq(&state.a));
        led.hamiltonian.push(0.5 * grad_vt + phi.grid);
        let power = if source_zero {
            0.0
        } else {
            let src_hat = basis.apply_map(&state.a, |r| model.g(r))?;
            src_hat
                .0
                .iter()
                .zip(&state.a_dot.0)
                .zip(basis.eigenvalues())
                .map(|((g, v), l)| g * v / l)
                .sum()
        };
        led.source_power.push(power);
    }
    Ok(led)
}

// ---------------------------------------------------------------------------
// Bound parameters
// ---------------------------------------------------------------------------

/// Every constant the envelope checks need, derived from the fitted
/// hypothesis constants with explicit Poincaré/Hölder factors.
#[derive(Clone, Debug, Serialize)]
pub struct BoundParams {
    /// Gronwall rate c = 1/λ₁ + d₁/2.
    pub c_rate: f64,
    /// Gronwall offset (zero: the inequality chain is homogeneous).
    pub d_hat: f64,
    /// Velocity-envelope rate d̃ = max(1/λ₁, d₁).
    pub d_tilde: f64,
    /// K₀ = ‖∇v₁‖² + 2Φ(u₀).
    pub k0: f64,
    /// E₀ = ‖∇v₀‖².
    pub e0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Coefficient of E^r in the comparison ODE:
    /// c_p = (2·b₀/p)·|Ω|^{1−p/2}·λ₁^{p/2}.
    pub c_poly: f64,
    /// r = p/2 > 1.
    pub exponent_r: f64,
    pub l_factor: f64,
    /// Horizon-capped forcing C = max(C₁e^{d̃T} − C₂, floor).
    pub forcing_cap: f64,
    /// Bernoulli smallness constant; None when the grid search found no
    /// feasible value (bound checks that need it are then skipped).
    pub epsilon: Option<f64>,
    /// Ball radius bound for ‖∇v‖₂ + ‖∇v‖_p over [0, T].
    pub ball_radius: f64,
    pub horizon: f64,
    pub p: f64,
    pub b0: f64,
    pub d1: f64,
    pub lambda1: f64,
    pub domain_len: f64,
}

fn constants_of(report: &ConditionReport, which: Hypothesis) -> Result<(), EnergyError> {
    if report.hypothesis != which || !report.satisfied {
        return Err(EnergyError::MissingConstants(which));
    }
    Ok(())
}

/// Derive every envelope constant from the basis, the initial state, and the
/// fitted growth/domination reports.
pub fn derive_bound_params(
    model: &NonlinearModel,
    basis: &SpectralBasis,
    init: &GalerkinState,
    t_final: f64,
    growth: &ConditionReport,
    domination: &ConditionReport,
    l_factor: f64,
) -> Result<BoundParams, EnergyError> {
    constants_of(growth, Hypothesis::Growth)?;
    constants_of(domination, Hypothesis::SourceDomination)?;
    let b0 = growth.b0.ok_or(EnergyError::MissingConstants(Hypothesis::Growth))?;
    let p = growth
        .exponent
        .ok_or(EnergyError::MissingConstants(Hypothesis::Growth))?;
    let d1 = domination
        .d1
        .ok_or(EnergyError::MissingConstants(Hypothesis::SourceDomination))?;
    if !p.is_finite() || p <= 2.0 {
        return Err(EnergyError::BadExponent(p));
    }

    let lambda1 = basis.lambda_min();
    let domain_len = basis.l_dom();
    let phi0 = stored_energy(basis, model, &init.a)?.value();
    let k0 = basis.potential_grad_sq(&init.a_dot) + 2.0 * phi0;
    let e0 = basis.potential_grad_sq(&init.a);

    let c_rate = 1.0 / lambda1 + 0.5 * d1;
    let d_tilde = (1.0 / lambda1).max(d1);
    let c1 = (1.0 + d_tilde) * k0 / d_tilde;
    let c2 = k0 / d_tilde;
    // Chain: 2Φ ≥ (2b₀/p)‖u‖_p^p, ‖u‖_p ≥ |Ω|^{1/p−1/2}‖u‖₂,
    // ‖u‖₂ = ‖Δv‖₂ ≥ √λ₁·‖∇v‖₂.
    let c_poly = (2.0 * b0 / p) * domain_len.powf(1.0 - p / 2.0) * lambda1.powf(p / 2.0);
    let exponent_r = p / 2.0;
    let forcing_cap = (c1 * (d_tilde * t_final).exp() - c2).max(1e-12);
    // Grid-searched feasibility, additionally capped at (l−1)/(l^r C^r);
    // shrinking a feasible ε keeps it feasible and only loosens the envelope.
    let smallness_cap =
        (l_factor - 1.0) / (l_factor.powf(exponent_r) * forcing_cap.powf(exponent_r));
    let epsilon =
        search_epsilon(c_poly, forcing_cap, l_factor, exponent_r, e0).map(|e| e.min(smallness_cap));

    // Ball radius: the Bernoulli envelope caps ‖∇v‖₂²; the velocity-envelope
    // prefactor caps 2Φ and through the growth constant the Lp mass,
    // and ‖∇v‖_∞ ≤ √(l/3)·‖u‖₂ turns that into a gradient-Lp cap.
    let psi_max = (1.0 / d_tilde) * ((d_tilde * t_final).exp() * (1.0 + d_tilde) - 1.0) * k0;
    let l2_part = match epsilon {
        Some(eps) => {
            let mut worst = 0.0f64;
            for i in 0..=512 {
                let t = t_final * i as f64 / 512.0;
                worst = worst.max(bernoulli_envelope_with(
                    e0,
                    eps,
                    l_factor,
                    forcing_cap,
                    exponent_r,
                    t,
                ));
            }
            worst
        }
        // Fallback via Poincaré + Hölder on the velocity-envelope cap.
        None => domain_len.powf(1.0 - 2.0 / p) / lambda1 * (p * psi_max / (2.0 * b0)).powf(2.0 / p),
    };
    let lp_part = domain_len / 3.0f64.sqrt() * (p * psi_max / (2.0 * b0)).powf(1.0 / p);
    let ball_radius = l2_part.max(0.0).sqrt() + lp_part;

    Ok(BoundParams {
        c_rate,
        d_hat: 0.0,
        d_tilde,
        k0,
        e0,
        c1,
        c2,
        c_poly,
        exponent_r,
        l_factor,
        forcing_cap,
        epsilon,
        ball_radius,
        horizon: t_final,
        p,
        b0,
        d1,
        lambda1,
        domain_len,
    })
}

/// Largest grid value of ε with ε(y + lC)^r ≤ c_p·y^r + (l−1)C on a probe
/// set of y values; the regrouped Bernoulli inequality needs exactly this.
fn search_epsilon(c_poly: f64, cap: f64, l_factor: f64, r: f64, e0: f64) -> Option<f64> {
    let scale = e0.max(cap).max(1.0);
    let mut probe = vec![0.0];
    for i in 0..=512 {
        probe.push(scale * 1e-9 * (1e18f64).powf(i as f64 / 512.0));
    }
    let feasible = |eps: f64| {
        probe.iter().all(|&y| {
            let lhs = eps * (y + l_factor * cap).powf(r);
            let rhs = c_poly * y.powf(r) + (l_factor - 1.0) * cap;
            lhs <= rhs
        })
    };
    for k in (0..64).rev() {
        let eps = c_poly * 1e-12f64.powf(1.0 - k as f64 / 63.0);
        if feasible(eps) {
            return Some(eps);
        }
    }
    None
}

/// Exponential envelope on ‖∇v_t‖² + 2Φ: e^{ct}K₀ + (d̂/c)(e^{ct} − 1).
pub fn gronwall_envelope(params: &BoundParams, t: f64) -> f64 {
    let e = (params.c_rate * t).exp();
    e * params.k0 + params.d_hat / params.c_rate * (e - 1.0)
}

/// Right side of the velocity envelope at time t, given Φ(t).
pub fn velocity_envelope(params: &BoundParams, t: f64, stored_t: f64) -> f64 {
    let d = params.d_tilde;
    (1.0 / d) * ((d * t).exp() * (1.0 + d) - 1.0) * params.k0 - 2.0 * stored_t
}

fn bernoulli_envelope_with(e0: f64, eps: f64, l_factor: f64, cap: f64, r: f64, t: f64) -> f64 {
    let z0 = e0 + l_factor * cap;
    let denom = (1.0 + eps * z0.powf(r - 1.0) * (((r - 1.0) * t).exp() - 1.0)).powf(1.0 / (r - 1.0));
    t.exp() * z0 / denom - l_factor * cap
}

/// Closed-form envelope on E(t) after capping the forcing at its horizon
/// value. None when no feasible ε exists.
pub fn bernoulli_envelope(params: &BoundParams, t: f64) -> Option<f64> {
    params.epsilon.map(|eps| {
        bernoulli_envelope_with(
            params.e0,
            eps,
            params.l_factor,
            params.forcing_cap,
            params.exponent_r,
            t,
        )
    })
}

/// RK4 solution of the comparison ODE y' = y − c_p·y^r + C₁e^{d̃t} − C₂ on
/// the given sample times (substepped so accuracy is cadence-independent).
pub fn comparison_solution(params: &BoundParams, y0: f64, times: &[f64]) -> Vec<f64> {
    assert!(y0 >= 0.0, "comparison ODE needs y0 >= 0");
    assert!(
        params.exponent_r > 1.0,
        "comparison ODE needs r > 1 (got {})",
        params.exponent_r
    );
    let rhs = |t: f64, y: f64| {
        let y = y.max(0.0);
        y - params.c_poly * y.powf(params.exponent_r) + params.c1 * (params.d_tilde * t).exp()
            - params.c2
    };
    let mut out = Vec::with_capacity(times.len());
    if times.is_empty() {
        return out;
    }
    let mut t = times[0];
    let mut y = y0;
    out.push(y);
    for &target in &times[1..] {
        let span = target - t;
        let n_sub = (span / 1e-3).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;
        for k in 0..n_sub {
            let tk = t + k as f64 * h;
            let k1 = rhs(tk, y);
            let k2 = rhs(tk + 0.5 * h, y + 0.5 * h * k1);
            let k3 = rhs(tk + 0.5 * h, y + 0.5 * h * k2);
            let k4 = rhs(tk + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t = target;
        out.push(y);
    }
    out
}

/// Attach envelope columns to a ledger.
pub fn attach_envelopes(ledger: &mut EnergyLedger, params: &BoundParams) {
    let times = ledger.times.clone();
    ledger.env_gronwall = Some(times.iter().map(|&t| gronwall_envelope(params, t)).collect());
    ledger.env_velocity = Some(
        times
            .iter()
            .zip(&ledger.stored)
            .map(|(&t, &phi)| velocity_envelope(params, t, phi))
            .collect(),
    );
    ledger.env_bernoulli = params
        .epsilon
        .map(|_| times.iter().map(|&t| bernoulli_envelope(params, t).unwrap()).collect());
    ledger.comparison = Some(comparison_solution(params, ledger.energy[0], &times));
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

/// One samplewise comparison of a ledger column against its envelope.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    /// min over samples of (bound − value); negative means violation.
    pub worst_margin: f64,
    pub worst_time: f64,
}

impl BoundCheck {
    fn skipped(name: &str) -> Self {
        BoundCheck {
            name: name.into(),
            passed: true,
            skipped: true,
            worst_margin: f64::INFINITY,
            worst_time: 0.0,
        }
    }

    fn from_series(name: &str, times: &[f64], values: &[f64], bounds: &[f64]) -> Self {
        let mut worst_margin = f64::INFINITY;
        let mut worst_time = 0.0;
        let mut passed = true;
        for ((&t, &v), &b) in times.iter().zip(values).zip(bounds) {
            let margin = b - v;
            if margin < worst_margin {
                worst_margin = margin;
                worst_time = t;
            }
            if v > b + bound_tolerance(b) {
                passed = false;
            }
        }
        BoundCheck {
            name: name.into(),
            passed,
            skipped: false,
            worst_margin,
            worst_time,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConservationReport {
    /// max_t |H(t) − H(0)| / max(H(0), floor)
    pub drift: f64,
    pub passed: bool,
    pub tolerance: f64,
}

/// Relative Hamiltonian drift; meaningful for zero-source runs.
pub fn check_conservation(ledger: &EnergyLedger, tolerance: f64) -> ConservationReport {
    let h0 = ledger.hamiltonian[0];
    let denom = h0.abs().max(1e-30);
    let drift = ledger
        .hamiltonian
        .iter()
        .map(|h| (h - h0).abs() / denom)
        .fold(0.0, f64::max);
    ConservationReport {
        drift,
        passed: drift <= tolerance,
        tolerance,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BallReport {
    pub observed_radius: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Max over samples of the potential's combined norm ‖∇v‖₂ + ‖∇v‖_p.
pub fn observed_ball_radius(
    trajectory: &Trajectory,
    basis: &SpectralBasis,
    p: f64,
) -> Result<f64, EnergyError> {
    let mut observed: f64 = 0.0;
    for s in &trajectory.samples {
        let v = basis.inverse_laplacian(&s.a)?;
        let grad_l2 = basis.grad_norm_sq(&v).sqrt();
        let grad_lp = basis.gradient_lp_norm(&v, p)?;
        observed = observed.max(grad_l2 + grad_lp);
    }
    Ok(observed)
}

/// Observed max over samples of ‖∇v‖₂ + ‖∇v‖_p against the derived radius.
pub fn check_ball(
    trajectory: &Trajectory,
    basis: &SpectralBasis,
    params: &BoundParams,
) -> Result<BallReport, EnergyError> {
    let observed = observed_ball_radius(trajectory, basis, params.p)?;
    Ok(BallReport {
        observed_radius: observed,
        bound: params.ball_radius,
        passed: observed <= params.ball_radius + bound_tolerance(params.ball_radius),
    })
}

/// All envelope checks for one ledger.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub checks: Vec<BoundCheck>,
    pub epsilon_feasible: bool,
    pub all_passed: bool,
}

pub fn check_bounds(ledger: &EnergyLedger, params: &BoundParams) -> BoundsReport {
    let times = &ledger.times;
    let mut checks = Vec::new();

    // ‖∇v_t‖² + 2Φ against the exponential envelope.
    let pair: Vec<f64> = ledger
        .grad_vt_sq
        .iter()
        .zip(&ledger.stored)
        .map(|(g, p)| g + 2.0 * p)
        .collect();
    let env: Vec<f64> = times.iter().map(|&t| gronwall_envelope(params, t)).collect();
    checks.push(BoundCheck::from_series("gronwall", times, &pair, &env));

    let env_v: Vec<f64> = times
        .iter()
        .zip(&ledger.stored)
        .map(|(&t, &phi)| velocity_envelope(params, t, phi))
        .collect();
    checks.push(BoundCheck::from_series(
        "velocity",
        times,
        &ledger.grad_vt_sq,
        &env_v,
    ));

    let comparison = comparison_solution(params, ledger.energy[0], times);
    checks.push(BoundCheck::from_series(
        "comparison",
        times,
        &ledger.energy,
        &comparison,
    ));

    match params.epsilon {
        Some(_) => {
            let env_b: Vec<f64> = times
                .iter()
                .map(|&t| bernoulli_envelope(params, t).unwrap())
                .collect();
            checks.push(BoundCheck::from_series(
                "bernoulli",
                times,
                &ledger.energy,
                &env_b,
            ));
            // the envelope itself must stay positive on the horizon; at
            // t = 0 it equals E₀ exactly, so zero data sits on the boundary
            let mut worst = f64::INFINITY;
            let mut worst_t = 0.0;
            for (&t, &e) in times.iter().zip(&env_b) {
                if e < worst {
                    worst = e;
                    worst_t = t;
                }
            }
            let slack = 1e-12 * (1.0 + params.l_factor * params.forcing_cap);
            checks.push(BoundCheck {
                name: "bernoulli-positivity".into(),
                passed: worst >= -slack,
                skipped: false,
                worst_margin: worst,
                worst_time: worst_t,
            });
        }
        None => {
            checks.push(BoundCheck::skipped("bernoulli"));
            checks.push(BoundCheck::skipped("bernoulli-positivity"));
        }
    }

    let all_passed = checks.iter().all(|c| c.passed);
    BoundsReport {
        checks,
        epsilon_feasible: params.epsilon.is_some(),
        all_passed,
    }
}

// ---------------------------------------------------------------------------
// Pairing identity
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    /// max over samples of |lhs − rhs| / max_t |lhs|
    pub max_rel_mismatch: f64,
}

/// The time-integrated pairing identity
/// ⟨∇v_t, ∇v⟩(t) = ∫₀ᵗ⟨v_ss, u⟩ ds + ∫₀ᵗ‖∇v_s‖² ds + ⟨∇v₁, ∇v₀⟩,
/// with v_ss reconstructed from the acceleration rather than differenced.
pub fn pairing_identity_check(
    trajectory: &Trajectory,
    basis: &SpectralBasis,
    model: &NonlinearModel,
) -> Result<PairingReport, EnergyError> {
    if trajectory.samples.is_empty() {
        return Err(EnergyError::EmptyTrajectory);
    }
    let lambda = basis.eigenvalues();
    let mut lhs = Vec::with_capacity(trajectory.samples.len());
    let mut integrand = Vec::with_capacity(trajectory.samples.len());
    for s in &trajectory.samples {
        let pair: f64 = s
            .a_dot
            .0
            .iter()
            .zip(&s.a.0)
            .zip(lambda)
            .map(|((ad, a), l)| ad * a / l)
            .sum();
        lhs.push(pair);
        let acc = acceleration(basis, model, &s.a)?;
        // ⟨v_ss, u⟩ = Σ (a''_j/λ_j)·a_j
        let vss_u: f64 = acc
            .0
            .iter()
            .zip(&s.a.0)
            .zip(lambda)
            .map(|((acc, a), l)| acc * a / l)
            .sum();
        let grad_vs: f64 = s
            .a_dot
            .0
            .iter()
            .zip(lambda)
            .map(|(ad, l)| ad * ad / l)
            .sum();
        integrand.push(vss_u + grad_vs);
    }
    let scale = lhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut running = lhs[0];
    let mut worst = 0.0f64;
    for i in 1..lhs.len() {
        let dt = trajectory.samples[i].t - trajectory.samples[i - 1].t;
        running += 0.5 * dt * (integrand[i - 1] + integrand[i]);
        worst = worst.max((lhs[i] - running).abs() / scale);
    }
    Ok(PairingReport {
        max_rel_mismatch: worst,
    })
}
