//! The model pair (f, g), its antiderivatives, and numeric checkers for the
//! structural hypotheses the solver and the energy bounds rest on.
//!
//! `F(r) = ∫₀^r f(s) ds` is the flux potential and `G(r) = ∫₀^r F(σ) dσ` the
//! stored-energy density; the builtin power family carries closed forms for
//! both, custom closures fall back to adaptive quadrature.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{adaptive_simpson, QuadratureError};

/// Absolute tolerance for antiderivative quadrature.
pub const QUAD_ABS_TOL: f64 = 1e-12;
/// Relative tolerance for antiderivative quadrature.
pub const QUAD_REL_TOL: f64 = 1e-10;
/// Below this, a signed monotonicity defect is treated as rounding.
pub const MONOTONE_TOL: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("power family needs k0 >= 0, k1 >= 0, k2 >= 0, p > 2 and 0 <= p1 < p - 2 (got k0={k0}, k1={k1}, k2={k2}, p={p}, p1={p1})")]
    BadFamilyParams {
        k0: f64,
        k1: f64,
        k2: f64,
        p: f64,
        p1: f64,
    },
    #[error("flux coefficient f is negative on the probe range (min f = {min_f:e} at r = {at}); the flux potential would not be monotone")]
    NegativeFlux { min_f: f64, at: f64 },
    #[error("evaluating the flux potential at r = {at}: {source}")]
    Quadrature {
        at: f64,
        #[source]
        source: QuadratureError,
    },
    #[error("non-finite model value at r = {at}")]
    NonFinite { at: f64 },
}

/// Parameters of the builtin flux family f(r) = k0·|r|^(p-2) − k1·|r|^p1 + k2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFamily {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub p: f64,
    pub p1: f64,
}

/// |a|^e with the integer-exponent fast path (the solver evaluates these at
/// every grid point of every step).
#[inline]
fn pow_abs(a: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e.fract() == 0.0 && e.abs() <= 32.0 {
        a.powi(e as i32)
    } else {
        a.powf(e)
    }
}

impl PowerFamily {
    pub fn f(&self, r: f64) -> f64 {
        let a = r.abs();
        let mut v = self.k0 * pow_abs(a, self.p - 2.0) + self.k2;
        if self.k1 != 0.0 {
            v -= self.k1 * pow_abs(a, self.p1);
        }
        v
    }

    /// Closed-form F(r) = ∫₀^r f.
    pub fn flux_potential(&self, r: f64) -> f64 {
        let a = r.abs();
        let mut v = self.k0 * pow_abs(a, self.p - 2.0) * r / (self.p - 1.0) + self.k2 * r;
        if self.k1 != 0.0 {
            v -= self.k1 * pow_abs(a, self.p1) * r / (self.p1 + 1.0);
        }
        v
    }

    /// Closed-form G(r) = ∫₀^r F.
    pub fn energy_density(&self, r: f64) -> f64 {
        let a = r.abs();
        let mut v =
            self.k0 * pow_abs(a, self.p) / (self.p * (self.p - 1.0)) + self.k2 * r * r / 2.0;
        if self.k1 != 0.0 {
            v -= self.k1 * pow_abs(a, self.p1 + 2.0) / ((self.p1 + 1.0) * (self.p1 + 2.0));
        }
        v
    }

    fn validate(&self) -> Result<(), ModelError> {
        let ok = self.k0 >= 0.0
            && self.k1 >= 0.0
            && self.k2 >= 0.0
            && self.p > 2.0
            && self.p1 >= 0.0
            && self.p1 < self.p - 2.0
            && [self.k0, self.k1, self.k2, self.p, self.p1]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(ModelError::BadFamilyParams {
                k0: self.k0,
                k1: self.k1,
                k2: self.k2,
                p: self.p,
                p1: self.p1,
            })
        }
    }
}

/// Named source terms available to scenario files. Custom closures go
/// through [`NonlinearModel::custom`] instead.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SourceKind {
    Zero,
    /// g(r) = scale·|r|^exponent
    Power { scale: f64, exponent: f64 },
    /// g(r) = scale·sin(r)
    Sin { scale: f64 },
    /// g(r) = scale·(sin(r) − r): Lipschitz and dominated by the quartic
    /// stored energy, the combination the velocity/decay envelopes need.
    SinMinusLinear { scale: f64 },
    /// g(r) = scale·r
    Linear { scale: f64 },
}

impl SourceKind {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            SourceKind::Zero => 0.0,
            SourceKind::Power { scale, exponent } => scale * r.abs().powf(exponent),
            SourceKind::Sin { scale } => scale * r.sin(),
            SourceKind::SinMinusLinear { scale } => scale * (r.sin() - r),
            SourceKind::Linear { scale } => scale * r,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            SourceKind::Zero => true,
            SourceKind::Power { scale, .. }
            | SourceKind::Sin { scale }
            | SourceKind::SinMinusLinear { scale }
            | SourceKind::Linear { scale } => scale == 0.0,
        }
    }
}

#[derive(Clone)]
pub enum ModelKind {
    PowerFamily {
        family: PowerFamily,
        source: SourceKind,
    },
    Custom,
}

/// The model functions f (flux coefficient) and g (source), immutable and
/// shareable across threads.
#[derive(Clone)]
pub struct NonlinearModel {
    f: ScalarFn,
    g: ScalarFn,
    /// Caller-supplied closed form for F, when available.
    f_pot: Option<ScalarFn>,
    kind: ModelKind,
    source_zero: bool,
}

impl std::fmt::Debug for NonlinearModel {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            ModelKind::PowerFamily { family, source } => fm
                .debug_struct("NonlinearModel")
                .field("family", family)
                .field("source", source)
                .finish(),
            ModelKind::Custom => fm.debug_struct("NonlinearModel").field("kind", &"custom").finish(),
        }
    }
}

impl NonlinearModel {
    /// Builtin family with the named source. Rejects parameter sets whose f
    /// takes negative values on the default probe range, since the flux
    /// potential would lose monotonicity.
    pub fn power_family(family: PowerFamily, source: SourceKind) -> Result<Self, ModelError> {
        family.validate()?;
        let probe = ProbeSpec::default();
        let mut min_f = f64::INFINITY;
        let mut at = 0.0;
        for r in probe.points() {
            let v = family.f(r);
            if !v.is_finite() {
                return Err(ModelError::NonFinite { at: r });
            }
            if v < min_f {
                min_f = v;
                at = r;
            }
        }
        if min_f < -MONOTONE_TOL {
            return Err(ModelError::NegativeFlux { min_f, at });
        }
        Ok(Self::power_family_unchecked(family, source))
    }

    /// Builtin family without the nonnegativity screen; blow-ups become
    /// runtime statuses instead of construction errors.
    pub fn power_family_unchecked(family: PowerFamily, source: SourceKind) -> Self {
        let fam = family;
        let src = source;
        NonlinearModel {
            f: Arc::new(move |r| fam.f(r)),
            g: Arc::new(move |r| src.eval(r)),
            f_pot: None,
            kind: ModelKind::PowerFamily {
                family,
                source,
            },
            source_zero: source.is_zero(),
        }
    }

    /// A linear wave model: f ≡ 1, g ≡ 0.
    pub fn linear() -> Self {
        Self::power_family_unchecked(
            PowerFamily {
                k0: 0.0,
                k1: 0.0,
                k2: 1.0,
                p: 4.0,
                p1: 0.0,
            },
            SourceKind::Zero,
        )
    }

    /// Custom closures; F and G fall back to adaptive quadrature.
    pub fn custom(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let source_zero = (0..64).all(|i| g(-8.0 + 0.25 * i as f64) == 0.0);
        NonlinearModel {
            f: Arc::new(f),
            g: Arc::new(g),
            f_pot: None,
            kind: ModelKind::Custom,
            source_zero,
        }
    }

    /// Custom closures with a trusted closed form for F.
    pub fn custom_with_potential(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        flux_potential: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let mut model = Self::custom(f, g);
        model.f_pot = Some(Arc::new(flux_potential));
        model
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn f(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn g(&self, r: f64) -> f64 {
        (self.g)(r)
    }

    pub fn source_is_zero(&self) -> bool {
        self.source_zero
    }

    /// F(r) = ∫₀^r f(s) ds. Closed form for the builtin family, adaptive
    /// quadrature otherwise; F(0) = 0 exactly either way.
    pub fn flux_potential(&self, r: f64) -> Result<f64, ModelError> {
        if !r.is_finite() {
            return Err(ModelError::NonFinite { at: r });
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            ModelKind::PowerFamily { family, .. } => Ok(family.flux_potential(r)),
            ModelKind::Custom => {
                if let Some(fp) = &self.f_pot {
                    return Ok(fp(r));
                }
                adaptive_simpson(self.f.as_ref(), 0.0, r, QUAD_ABS_TOL, QUAD_REL_TOL)
                    .map_err(|source| ModelError::Quadrature { at: r, source })
            }
        }
    }

    /// G(r) = ∫₀^r F(σ) dσ.
    pub fn energy_density(&self, r: f64) -> Result<f64, ModelError> {
        if !r.is_finite() {
            return Err(ModelError::NonFinite { at: r });
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            ModelKind::PowerFamily { family, .. } => Ok(family.energy_density(r)),
            ModelKind::Custom => {
                let inner = |s: f64| self.flux_potential(s).unwrap_or(f64::NAN);
                let v = adaptive_simpson(&inner, 0.0, r, QUAD_ABS_TOL, QUAD_REL_TOL)
                    .map_err(|source| ModelError::Quadrature { at: r, source })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ModelError::NonFinite { at: r })
                }
            }
        }
    }

    /// Rough polynomial degree of the pointwise maps the solver applies,
    /// used for the dealiasing warning threshold. None for custom closures.
    pub fn polynomial_degree_hint(&self) -> Option<f64> {
        match &self.kind {
            ModelKind::PowerFamily { family, source } => {
                let flux_deg = (family.p - 1.0).max(family.p1 + 1.0).max(1.0);
                let src_deg = match source {
                    SourceKind::Power { exponent, .. } => *exponent,
                    SourceKind::Linear { .. } => 1.0,
                    // transcendental sources have no finite degree; treat as cubic-ish
                    SourceKind::Sin { .. } | SourceKind::SinMinusLinear { .. } => 3.0,
                    SourceKind::Zero => 0.0,
                };
                Some(flux_deg.max(src_deg))
            }
            ModelKind::Custom => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Probe grids
// ---------------------------------------------------------------------------

/// Symmetric probe grid: half uniform, half log-spaced so both the origin and
/// the range ends are densely sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeSpec {
    pub radius: f64,
    pub count: usize,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            radius: 10.0,
            count: 4096,
        }
    }
}

impl ProbeSpec {
    pub fn new(radius: f64, count: usize) -> Self {
        ProbeSpec { radius, count }
    }

    /// Sorted, symmetric points including 0 and ±radius.
    pub fn points(&self) -> Vec<f64> {
        let half = (self.count / 2).max(8);
        let n_uniform = half / 2;
        let n_log = half - n_uniform;
        let mut pos = Vec::with_capacity(half + 1);
        for i in 1..=n_uniform {
            pos.push(self.radius * i as f64 / n_uniform as f64);
        }
        let log_min = self.radius * 1e-8;
        let ratio = (self.radius / log_min).ln();
        for i in 0..n_log {
            pos.push(log_min * (ratio * i as f64 / n_log as f64).exp());
        }
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pos.dedup();
        let mut out = Vec::with_capacity(2 * pos.len() + 1);
        for &r in pos.iter().rev() {
            out.push(-r);
        }
        out.push(0.0);
        out.extend(pos.iter().copied());
        out
    }

    fn scaled(&self, factor: f64) -> ProbeSpec {
        ProbeSpec {
            radius: self.radius * factor,
            count: self.count,
        }
    }
}

// ---------------------------------------------------------------------------
// Condition reports
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    /// |F(r)| ≤ a0·|r|^(p−1) + a1·|r| and F(r)·r ≥ b0·|r|^p + b1·r²
    Growth,
    /// |g(r) − g(s)| ≤ d0·|r − s|
    Lipschitz,
    /// (F(r) − F(s))·(r − s) ≥ 0
    MonotoneFlux,
    /// |g(r)|² ≤ d1·G(r)
    SourceDomination,
}

/// Outcome of one hypothesis check: whether it held on the probe set, the
/// fitted constants, and the worst point seen.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub hypothesis: Hypothesis,
    pub satisfied: bool,
    pub a0: Option<f64>,
    pub a1: Option<f64>,
    pub b0: Option<f64>,
    pub b1: Option<f64>,
    pub d0: Option<f64>,
    pub d1: Option<f64>,
    /// Exponent p the growth check ran with.
    pub exponent: Option<f64>,
    pub probe: ProbeSpec,
    pub worst_point: Option<f64>,
    /// Slack of the binding inequality at the worst point; negative when the
    /// hypothesis is violated there.
    pub worst_margin: Option<f64>,
}

impl ConditionReport {
    fn new(hypothesis: Hypothesis, probe: ProbeSpec) -> Self {
        ConditionReport {
            hypothesis,
            satisfied: false,
            a0: None,
            a1: None,
            b0: None,
            b1: None,
            d0: None,
            d1: None,
            exponent: None,
            probe,
            worst_point: None,
            worst_margin: None,
        }
    }
}

/// The a1/b1 companion-constant grid: zero plus dyadic values.
fn companion_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    for k in -6..=6 {
        g.push((k as f64).exp2());
    }
    g
}

fn verify_tol(scale: f64) -> f64 {
    1e-12 + 1e-12 * scale.abs()
}

/// Fit the growth constants of the flux potential: the smallest a0 (over the
/// a1 grid) with |F| ≤ a0·|r|^(p−1) + a1·|r|, and the largest b0 (over the b1
/// grid) with F·r ≥ b0·|r|^p + b1·r². Constants are fitted on the inner half
/// of the probe range and re-verified on the full range, so families that
/// only hold on a bounded set fail with a large-|r| witness.
pub fn check_growth(
    model: &NonlinearModel,
    p: f64,
    probe: ProbeSpec,
) -> Result<ConditionReport, ModelError> {
    assert!(p > 2.0, "growth check needs p > 2");
    let mut report = ConditionReport::new(Hypothesis::Growth, probe);
    report.exponent = Some(p);
    let points = probe.points();
    let f_vals: Vec<(f64, f64)> = points
        .iter()
        .map(|&r| model.flux_potential(r).map(|v| (r, v)))
        .collect::<Result<_, _>>()?;
    let inner: Vec<(f64, f64)> = f_vals
        .iter()
        .copied()
        .filter(|&(r, _)| r.abs() <= probe.radius * 0.5)
        .collect();

    // Upper bound |F| <= a0 |r|^{p-1} + a1 |r|.
    let mut best_upper: Option<(f64, f64)> = None;
    for &a1 in &companion_grid() {
        let mut a0 = 0.0f64;
        for &(r, fv) in &inner {
            if r != 0.0 {
                let need = (fv.abs() - a1 * r.abs()) / r.abs().powf(p - 1.0);
                a0 = a0.max(need);
            }
        }
        let a0 = a0.max(1e-12);
        let ok = f_vals.iter().all(|&(r, fv)| {
            let rhs = a0 * r.abs().powf(p - 1.0) + a1 * r.abs();
            fv.abs() <= rhs + verify_tol(rhs)
        });
        if ok {
            let better = match best_upper {
                None => true,
                Some((ba0, ba1)) => a0 + a1 < ba0 + ba1,
            };
            if better {
                best_upper = Some((a0, a1));
            }
        }
    }

    // Lower bound F·r >= b0 |r|^p + b1 r².
    let mut best_lower: Option<(f64, f64)> = None;
    for &b1 in &companion_grid() {
        let mut b0 = f64::INFINITY;
        for &(r, fv) in &inner {
            if r != 0.0 {
                let room = (fv * r - b1 * r * r) / r.abs().powf(p);
                b0 = b0.min(room);
            }
        }
        if !(b0 > 0.0 && b0.is_finite()) {
            continue;
        }
        let ok = f_vals.iter().all(|&(r, fv)| {
            let rhs = b0 * r.abs().powf(p) + b1 * r * r;
            fv * r >= rhs - verify_tol(rhs)
        });
        if ok {
            let better = match best_lower {
                None => true,
                Some((bb0, bb1)) => b0 + b1 > bb0 + bb1,
            };
            if better {
                best_lower = Some((b0, b1));
            }
        }
    }

    match (best_upper, best_lower) {
        (Some((a0, a1)), Some((b0, b1))) => {
            report.satisfied = true;
            report.a0 = Some(a0);
            report.a1 = Some(a1);
            report.b0 = Some(b0);
            report.b1 = Some(b1);
            // Worst slack of the binding (lower) inequality.
            let mut worst = f64::INFINITY;
            let mut at = 0.0;
            for &(r, fv) in &f_vals {
                let slack = fv * r - b0 * r.abs().powf(p) - b1 * r * r;
                if slack < worst {
                    worst = slack;
                    at = r;
                }
            }
            report.worst_point = Some(at);
            report.worst_margin = Some(worst);
        }
        (upper, lower) => {
            report.satisfied = false;
            if let Some((a0, a1)) = upper {
                report.a0 = Some(a0);
                report.a1 = Some(a1);
            }
            if lower.is_none() {
                // Witness: point with the least normalized sign mass, which
                // for asymptotically failing families sits at the range end.
                let mut worst = f64::INFINITY;
                let mut at = 0.0;
                for &(r, fv) in &f_vals {
                    if r != 0.0 {
                        let ratio = fv * r / r.abs().powf(p);
                        if ratio < worst {
                            worst = ratio;
                            at = r;
                        }
                    }
                }
                report.worst_point = Some(at);
                report.worst_margin = Some(worst);
            }
        }
    }
    Ok(report)
}

/// Probe pairs: consecutive points plus a few wide strides.
fn probe_pairs(points: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    const STRIDES: [usize; 3] = [1, 7, 61];
    STRIDES.iter().flat_map(move |&s| {
        (s..points.len()).map(move |i| (points[i - s], points[i]))
    })
}

fn lipschitz_estimate(model: &NonlinearModel, probe: ProbeSpec) -> (f64, f64) {
    let points = probe.points();
    let mut d0 = 0.0f64;
    let mut at = 0.0;
    for (r, s) in probe_pairs(&points) {
        if r == s {
            continue;
        }
        let slope = (model.g(r) - model.g(s)).abs() / (r - s).abs();
        if slope > d0 {
            d0 = slope;
            at = 0.5 * (r + s);
        }
    }
    (d0, at)
}

/// Estimate the Lipschitz constant of g over probe pairs; flag unboundedness
/// by doubling the range and watching the estimate grow.
pub fn check_lipschitz(model: &NonlinearModel, probe: ProbeSpec) -> ConditionReport {
    let mut report = ConditionReport::new(Hypothesis::Lipschitz, probe);
    let (d0, at) = lipschitz_estimate(model, probe);
    let (d0_wide, at_wide) = lipschitz_estimate(model, probe.scaled(2.0));
    // A genuinely Lipschitz g keeps the estimate flat under doubling; a
    // superlinear g grows it by about the doubling factor (exactly 2 for
    // g = r²), so the threshold sits below that.
    let unbounded = d0_wide > 1.8 * d0.max(1e-300);
    report.satisfied = !unbounded;
    report.d0 = Some(if unbounded { d0_wide } else { d0 });
    report.worst_point = Some(if unbounded { at_wide } else { at });
    report
}

/// Scalar monotonicity of the flux potential: (F(r) − F(s))(r − s) ≥ −tol on
/// probe pairs, equivalently min f ≥ −tol at probe points.
pub fn check_monotone_flux(
    model: &NonlinearModel,
    probe: ProbeSpec,
) -> Result<ConditionReport, ModelError> {
    let mut report = ConditionReport::new(Hypothesis::MonotoneFlux, probe);
    let points = probe.points();
    let f_vals: Vec<(f64, f64)> = points
        .iter()
        .map(|&r| model.flux_potential(r).map(|v| (r, v)))
        .collect::<Result<_, _>>()?;
    let mut worst = f64::INFINITY;
    let mut at = 0.0;
    const STRIDES: [usize; 3] = [1, 7, 61];
    for &s in &STRIDES {
        for i in s..f_vals.len() {
            let (r1, fr1) = f_vals[i - s];
            let (r0, fr0) = f_vals[i];
            let v = (fr1 - fr0) * (r1 - r0);
            if v < worst {
                worst = v;
                at = 0.5 * (r0 + r1);
            }
        }
    }
    report.satisfied = worst >= -MONOTONE_TOL;
    report.worst_point = Some(at);
    report.worst_margin = Some(worst);
    Ok(report)
}

/// Source domination |g(r)|² ≤ d1·G(r): fits d1 as the max ratio over probe
/// points, requiring g(0) = 0 and a finite limsup as r → 0.
pub fn check_source_domination(
    model: &NonlinearModel,
    probe: ProbeSpec,
) -> Result<ConditionReport, ModelError> {
    let mut report = ConditionReport::new(Hypothesis::SourceDomination, probe);
    let g0 = model.g(0.0);
    if g0.abs() > 1e-12 {
        report.satisfied = false;
        report.worst_point = Some(0.0);
        report.worst_margin = Some(-g0 * g0);
        return Ok(report);
    }
    if model.source_is_zero() {
        report.satisfied = true;
        report.d1 = Some(0.0);
        report.worst_margin = Some(0.0);
        return Ok(report);
    }
    let points = probe.points();
    let is_custom = matches!(model.kind, ModelKind::Custom);
    let mut ratios: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &r in &points {
        if r == 0.0 {
            continue;
        }
        let dens = model.energy_density(r)?;
        if dens <= 0.0 {
            report.satisfied = false;
            report.worst_point = Some(r);
            report.worst_margin = Some(dens);
            return Ok(report);
        }
        // Quadrature-backed G loses all relative accuracy once |G| is at the
        // absolute-tolerance floor; those points cannot carry a ratio.
        if is_custom && dens < 100.0 * QUAD_ABS_TOL {
            continue;
        }
        let gv = model.g(r);
        ratios.push((r, gv * gv / dens));
    }
    // Finite limsup at the origin: walk a dyadic ladder r = R·2^{-k} toward
    // zero and flag a ratio that keeps growing octave over octave.
    let mut ladder = Vec::new();
    for k in 0..=40 {
        let r = probe.radius * (-(k as f64)).exp2();
        let dens = model.energy_density(r)?;
        if dens <= 0.0 || (is_custom && dens < 100.0 * QUAD_ABS_TOL) {
            break;
        }
        let gv = model.g(r);
        ladder.push((r, gv * gv / dens));
    }
    if ladder.len() >= 16 {
        let tail = ladder[ladder.len() - 1].1;
        let mid = ladder[ladder.len() - 11].1;
        if tail > 100.0 * mid.max(1e-300) {
            report.satisfied = false;
            report.worst_point = Some(ladder[ladder.len() - 1].0);
            report.worst_margin = Some(-tail);
            return Ok(report);
        }
    }
    let (at, d1) = ratios
        .iter()
        .copied()
        .fold((0.0, 0.0), |acc, (r, q)| if q > acc.1 { (r, q) } else { acc });
    report.satisfied = true;
    report.d1 = Some(d1);
    report.worst_point = Some(at);
    report.worst_margin = Some(0.0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pure_power(k0: f64, p: f64) -> NonlinearModel {
        NonlinearModel::power_family(
            PowerFamily {
                k0,
                k1: 0.0,
                k2: 0.0,
                p,
                p1: 0.0,
            },
            SourceKind::Zero,
        )
        .unwrap()
    }

    #[test]
    fn flux_potential_constant_flux() {
        let m = NonlinearModel::custom(|_| 1.0, |_| 0.0);
        assert!((m.flux_potential(5.0).unwrap() - 5.0).abs() < 1e-11);
        assert_eq!(m.flux_potential(0.0).unwrap(), 0.0);
    }

    #[test]
    fn flux_potential_cubic() {
        let m = NonlinearModel::custom(|r| 3.0 * r * r, |_| 0.0);
        assert!((m.flux_potential(2.0).unwrap() - 8.0).abs() < 1e-10);
    }

    #[test]
    fn flux_potential_family_matches_quadrature_oracle() {
        // family k0=1, p=4: F(r) = r^3/3; independent quadrature of s^2
        let fam = pure_power(1.0, 4.0);
        let oracle = adaptive_simpson(&|s| s * s, 0.0, -2.0, 1e-13, 1e-11).unwrap();
        assert!((oracle - (-8.0 / 3.0)).abs() < 1e-11);
        let v = fam.flux_potential(-2.0).unwrap();
        assert!((v - oracle).abs() < 1e-10, "closed form {v} vs oracle {oracle}");
        // odd symmetry
        assert!((fam.flux_potential(2.0).unwrap() + v).abs() < 1e-14);
    }

    #[test]
    fn energy_density_examples() {
        let lin = NonlinearModel::custom(|_| 1.0, |_| 0.0);
        assert!((lin.energy_density(2.0).unwrap() - 2.0).abs() < 1e-10);
        let cubic = NonlinearModel::custom(|r| 3.0 * r * r, |_| 0.0);
        assert!((cubic.energy_density(1.0).unwrap() - 0.25).abs() < 1e-10);
        // nested quadrature oracle for the family closed form
        let fam = pure_power(1.0, 4.0);
        let f_of = |s: f64| s * s * s / 3.0;
        let oracle = adaptive_simpson(&f_of, 0.0, 3.0, 1e-13, 1e-11).unwrap();
        assert!((oracle - 6.75).abs() < 1e-10);
        assert!((fam.energy_density(3.0).unwrap() - oracle).abs() < 1e-10);
        assert_eq!(fam.energy_density(0.0).unwrap(), 0.0);
    }

    #[test]
    fn family_closed_form_matches_quadrature_path() {
        // spec invariant: closed-form F vs quadrature F within 1e-10 relative
        let fam = PowerFamily {
            k0: 2.0,
            k1: 0.0,
            k2: 0.5,
            p: 4.0,
            p1: 0.0,
        };
        let model = NonlinearModel::power_family(fam, SourceKind::Zero).unwrap();
        let quad = NonlinearModel::custom(move |r| fam.f(r), |_| 0.0);
        for i in 0..=40 {
            let r = -10.0 + 0.5 * i as f64;
            let a = model.flux_potential(r).unwrap();
            let b = quad.flux_potential(r).unwrap();
            assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                "mismatch at r={r}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn finite_difference_derivative_consistency() {
        let fam = PowerFamily {
            k0: 1.5,
            k1: 0.0,
            k2: 0.3,
            p: 4.0,
            p1: 0.0,
        };
        let model = NonlinearModel::power_family(fam, SourceKind::Zero).unwrap();
        for &r in &[-7.5f64, -2.0, -0.5, 0.25, 1.0, 4.0, 9.0] {
            let h = 1e-6 * r.abs().max(1.0);
            let df = (model.flux_potential(r + h).unwrap() - model.flux_potential(r - h).unwrap())
                / (2.0 * h);
            let f = model.f(r);
            assert!((df - f).abs() <= 1e-4 * f.abs().max(1.0), "F' vs f at {r}");
            let dg = (model.energy_density(r + h).unwrap() - model.energy_density(r - h).unwrap())
                / (2.0 * h);
            let fv = model.flux_potential(r).unwrap();
            assert!((dg - fv).abs() <= 1e-4 * fv.abs().max(1.0), "G' vs F at {r}");
        }
    }

    #[test]
    fn family_rejects_negative_flux() {
        let err = NonlinearModel::power_family(
            PowerFamily {
                k0: 1.0,
                k1: 10.0,
                k2: 1.0,
                p: 4.0,
                p1: 1.0,
            },
            SourceKind::Zero,
        );
        assert!(matches!(err, Err(ModelError::NegativeFlux { .. })));
    }

    #[test]
    fn growth_pure_power_fits_exact_constants() {
        let m = pure_power(1.0, 4.0);
        let rep = check_growth(&m, 4.0, ProbeSpec::default()).unwrap();
        assert!(rep.satisfied);
        assert!((rep.a0.unwrap() - 1.0 / 3.0).abs() < 1e-9, "a0 = {:?}", rep.a0);
        assert_eq!(rep.a1.unwrap(), 0.0);
        assert!((rep.b0.unwrap() - 1.0 / 3.0).abs() < 1e-9, "b0 = {:?}", rep.b0);
        assert_eq!(rep.b1.unwrap(), 0.0);
    }

    #[test]
    fn growth_constant_flux_fails_at_large_r() {
        // F(r) = r: r² can never dominate b0·r⁴ for all r; brute force over
        // the probe grid must catch it at the range ends.
        let m = NonlinearModel::custom(|_| 1.0, |_| 0.0);
        let rep = check_growth(&m, 4.0, ProbeSpec::default()).unwrap();
        assert!(!rep.satisfied);
        let witness = rep.worst_point.unwrap();
        assert!(witness.abs() > 5.0, "expected large-|r| witness, got {witness}");
    }

    #[test]
    fn growth_cubic_on_unit_range() {
        let m = NonlinearModel::custom(|r| 3.0 * r * r, |_| 0.0);
        let rep = check_growth(&m, 4.0, ProbeSpec::new(1.0, 4096)).unwrap();
        assert!(rep.satisfied);
        assert!((rep.b0.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(rep.b1.unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_examples() {
        let sin = NonlinearModel::custom(|_| 1.0, |r| r.sin());
        let rep = check_lipschitz(&sin, ProbeSpec::default());
        assert!(rep.satisfied);
        let d0 = rep.d0.unwrap();
        assert!((0.999..=1.001).contains(&d0), "d0 = {d0}");

        let lin = NonlinearModel::custom(|_| 1.0, |r| 2.0 * r);
        let rep = check_lipschitz(&lin, ProbeSpec::default());
        assert!(rep.satisfied);
        assert!((rep.d0.unwrap() - 2.0).abs() < 1e-9);

        let quad = NonlinearModel::custom(|_| 1.0, |r| r * r);
        let rep = check_lipschitz(&quad, ProbeSpec::default());
        assert!(!rep.satisfied, "unbounded slope must be flagged");
    }

    #[test]
    fn monotone_examples() {
        let cubic = NonlinearModel::custom(|r| 3.0 * r * r, |_| 0.0);
        assert!(check_monotone_flux(&cubic, ProbeSpec::default()).unwrap().satisfied);

        let negative = NonlinearModel::custom(|_| -1.0, |_| 0.0);
        let rep = check_monotone_flux(&negative, ProbeSpec::default()).unwrap();
        assert!(!rep.satisfied);
        assert!(rep.worst_margin.unwrap() < 0.0);
    }

    #[test]
    fn monotone_family_violation_sits_between_flux_roots() {
        // f(r) = |r|² − 10|r| + 1 is negative between its roots; locate them
        // independently by bisection and check the reported witness.
        let fam = PowerFamily {
            k0: 1.0,
            k1: 10.0,
            k2: 1.0,
            p: 4.0,
            p1: 1.0,
        };
        let model = NonlinearModel::power_family_unchecked(fam, SourceKind::Zero);
        let froot = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if fam.f(lo) * fam.f(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let r_lo = froot(1e-6, 1.0);
        let r_hi = froot(1.0, 12.0);
        assert!((fam.f(r_lo)).abs() < 1e-9 && (fam.f(r_hi)).abs() < 1e-9);

        let rep = check_monotone_flux(&model, ProbeSpec::default()).unwrap();
        assert!(!rep.satisfied);
        let witness = rep.worst_point.unwrap().abs();
        assert!(
            witness > r_lo && witness < r_hi,
            "witness {witness} outside ({r_lo}, {r_hi})"
        );
        // cross-check the two detection paths: pair products vs min f
        let min_f = ProbeSpec::default()
            .points()
            .iter()
            .map(|&r| model.f(r))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(rep.satisfied, min_f >= -MONOTONE_TOL);
    }

    #[test]
    fn monotone_cross_check_on_satisfied_model() {
        let m = pure_power(1.0, 4.0);
        let rep = check_monotone_flux(&m, ProbeSpec::default()).unwrap();
        let min_f = ProbeSpec::default()
            .points()
            .iter()
            .map(|&r| m.f(r))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(rep.satisfied, min_f >= -MONOTONE_TOL);
    }

    #[test]
    fn domination_examples() {
        let zero_src = pure_power(1.0, 4.0);
        let rep = check_source_domination(&zero_src, ProbeSpec::default()).unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.d1.unwrap(), 0.0);

        // f = 3r² gives G = r⁴/4; g = r² gives |g|²/G = 4 identically.
        let m = NonlinearModel::power_family(
            PowerFamily {
                k0: 3.0,
                k1: 0.0,
                k2: 0.0,
                p: 4.0,
                p1: 0.0,
            },
            SourceKind::Power {
                scale: 1.0,
                exponent: 2.0,
            },
        )
        .unwrap();
        let rep = check_source_domination(&m, ProbeSpec::default()).unwrap();
        assert!(rep.satisfied);
        assert!((rep.d1.unwrap() - 4.0).abs() < 1e-9, "d1 = {:?}", rep.d1);

        // g(0) != 0 diverges at the origin
        let bad = NonlinearModel::custom(|r| 3.0 * r * r, |_| 1.0);
        let rep = check_source_domination(&bad, ProbeSpec::default()).unwrap();
        assert!(!rep.satisfied);
        assert_eq!(rep.worst_point.unwrap(), 0.0);
    }

    #[test]
    fn domination_flags_divergent_origin_ratio() {
        // pure quartic G ~ r⁴/12 with g ~ r: ratio ~ 12/r² blows up at 0
        let m = NonlinearModel::power_family(
            PowerFamily {
                k0: 1.0,
                k1: 0.0,
                k2: 0.0,
                p: 4.0,
                p1: 0.0,
            },
            SourceKind::Linear { scale: 1.0 },
        )
        .unwrap();
        let rep = check_source_domination(&m, ProbeSpec::default()).unwrap();
        assert!(!rep.satisfied);
    }

    #[test]
    fn fitted_constants_reverify_everywhere() {
        // spec invariant: constants substituted back hold at every probe point
        let fam = PowerFamily {
            k0: 3.0,
            k1: 0.0,
            k2: 1.0,
            p: 4.0,
            p1: 0.0,
        };
        let m = NonlinearModel::power_family(fam, SourceKind::SinMinusLinear { scale: 1.0 })
            .unwrap();
        let probe = ProbeSpec::default();
        let growth = check_growth(&m, 4.0, probe).unwrap();
        assert!(growth.satisfied);
        let (a0, a1) = (growth.a0.unwrap(), growth.a1.unwrap());
        let (b0, b1) = (growth.b0.unwrap(), growth.b1.unwrap());
        let dom = check_source_domination(&m, probe).unwrap();
        assert!(dom.satisfied);
        let d1 = dom.d1.unwrap();
        for r in probe.points() {
            let fv = m.flux_potential(r).unwrap();
            let up = a0 * r.abs().powf(3.0) + a1 * r.abs();
            assert!(fv.abs() <= up + verify_tol(up), "upper bound fails at {r}");
            let low = b0 * r.abs().powf(4.0) + b1 * r * r;
            assert!(fv * r >= low - verify_tol(low), "lower bound fails at {r}");
            let g = m.g(r);
            let dens = m.energy_density(r).unwrap();
            assert!(
                g * g <= d1 * dens + verify_tol(d1 * dens),
                "domination fails at {r}"
            );
        }
    }

    #[test]
    fn probe_grid_shape() {
        let pts = ProbeSpec::default().points();
        assert!(pts.len() >= 1000);
        assert!(pts.contains(&0.0));
        assert_eq!(*pts.last().unwrap(), 10.0);
        assert_eq!(pts[0], -10.0);
        // symmetric
        for (a, b) in pts.iter().zip(pts.iter().rev()) {
            assert_eq!(*a, -*b);
        }
        // dyadic clustering near zero: smallest positive point is tiny
        let smallest = pts.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
        assert!(smallest < 1e-6);
    }
}
