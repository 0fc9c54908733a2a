//! Scenario files: a TOML format holding the model, domain, initial data,
//! time stepping, bound-check configuration and output options. Unknown keys
//! are rejected; omitted keys fall back to documented defaults that are
//! echoed into the run manifest.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::nonlinearity::{ModelError, NonlinearModel, PowerFamily, ProbeSpec, SourceKind};
use crate::solver::{InitialData, Integrator, Scenario, SineTerm};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario field {field}: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

// --------------------------------------------------------------------------
// Raw file schema
// --------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    model: ModelSection,
    #[serde(default)]
    domain: DomainSection,
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    time: TimeSection,
    #[serde(default)]
    bounds: BoundsSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    converge: ConvergeSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    /// Named preset ("linear", "cubic", "cubic-pure") or the explicit family.
    preset: Option<String>,
    family: Option<String>,
    k0: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
    p: Option<f64>,
    p1: Option<f64>,
    #[serde(default)]
    source: SourceSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    kind: Option<String>,
    scale: Option<f64>,
    p0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    l_dom: Option<f64>,
    m: Option<usize>,
    n_quad: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    u0: Option<String>,
    u1: Option<String>,
    u0_modal: Option<Vec<f64>>,
    u1_modal: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    t_final: Option<f64>,
    dt: Option<f64>,
    integrator: Option<String>,
    sample_every: Option<usize>,
    blowup_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsSection {
    probe_range: Option<f64>,
    probe_count: Option<usize>,
    l_factor: Option<f64>,
    drift_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergeSection {
    m_list: Option<Vec<usize>>,
    dt_list: Option<Vec<f64>>,
}

// --------------------------------------------------------------------------
// Resolved configuration
// --------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct ResolvedModel {
    pub family: PowerFamily,
    pub source: SourceKind,
    pub forced: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundsConfig {
    pub probe: ProbeSpec,
    pub l_factor: f64,
    pub drift_tol: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            probe: ProbeSpec::default(),
            l_factor: 2.0,
            drift_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ConvergeConfig {
    pub m_list: Vec<usize>,
    pub dt_list: Vec<f64>,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            m_list: vec![4, 8, 16, 32],
            dt_list: vec![2.5e-3, 5e-3, 1e-2],
        }
    }
}

/// A fully validated scenario plus the harness configuration around it.
#[derive(Clone, Debug)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub model_desc: ResolvedModel,
    pub bounds: BoundsConfig,
    pub converge: ConvergeConfig,
    pub out_dir: String,
    pub warnings: Vec<String>,
}

/// Overrides applied on top of the file (CLI flags).
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub modes: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub integrator: Option<Integrator>,
    /// Admit models whose flux coefficient goes negative.
    pub force: bool,
}

pub fn parse_scenario(path: &Path, overrides: &Overrides) -> Result<ResolvedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text, overrides)
}

pub fn parse_scenario_str(
    text: &str,
    overrides: &Overrides,
) -> Result<ResolvedScenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text)?;
    resolve(file, overrides)
}

fn named_family(name: &str) -> Option<(PowerFamily, SourceKind)> {
    let zero = SourceKind::Zero;
    match name {
        "linear" => Some((
            PowerFamily {
                k0: 0.0,
                k1: 0.0,
                k2: 1.0,
                p: 4.0,
                p1: 0.0,
            },
            zero,
        )),
        "cubic" => Some((
            PowerFamily {
                k0: 3.0,
                k1: 0.0,
                k2: 1.0,
                p: 4.0,
                p1: 0.0,
            },
            zero,
        )),
        "cubic-pure" => Some((
            PowerFamily {
                k0: 3.0,
                k1: 0.0,
                k2: 0.0,
                p: 4.0,
                p1: 0.0,
            },
            zero,
        )),
        _ => None,
    }
}

fn resolve_source(section: &SourceSection) -> Result<SourceKind, ScenarioError> {
    let scale = section.scale.unwrap_or(1.0);
    match section.kind.as_deref() {
        None | Some("zero") | Some("none") => Ok(SourceKind::Zero),
        Some("power") => Ok(SourceKind::Power {
            scale,
            exponent: section.p0.unwrap_or(2.0),
        }),
        Some("sin") => Ok(SourceKind::Sin { scale }),
        Some("sin-minus-r") => Ok(SourceKind::SinMinusLinear { scale }),
        Some("linear") => Ok(SourceKind::Linear { scale }),
        Some(other) => Err(invalid(
            "model.source.kind",
            format!("unknown source \"{other}\" (expected zero|power|sin|sin-minus-r|linear)"),
        )),
    }
}

fn resolve(file: ScenarioFile, overrides: &Overrides) -> Result<ResolvedScenario, ScenarioError> {
    let mut warnings = Vec::new();

    // model
    let (mut family, mut source) = match (&file.model.preset, &file.model.family) {
        (Some(name), _) => named_family(name)
            .ok_or_else(|| invalid("model.preset", format!("unknown preset \"{name}\"")))?,
        (None, Some(fam)) if fam == "power-family" => {
            let family = PowerFamily {
                k0: file.model.k0.unwrap_or(0.0),
                k1: file.model.k1.unwrap_or(0.0),
                k2: file.model.k2.unwrap_or(0.0),
                p: file.model.p.unwrap_or(4.0),
                p1: file.model.p1.unwrap_or(0.0),
            };
            (family, SourceKind::Zero)
        }
        (None, Some(other)) => {
            return Err(invalid(
                "model.family",
                format!("unknown family \"{other}\" (expected \"power-family\")"),
            ))
        }
        (None, None) => {
            return Err(invalid(
                "model",
                "needs either preset = \"...\" or family = \"power-family\"",
            ))
        }
    };
    if file.model.preset.is_some() {
        // presets fix the family; explicit numeric keys still override
        if let Some(k0) = file.model.k0 {
            family.k0 = k0;
        }
        if let Some(k1) = file.model.k1 {
            family.k1 = k1;
        }
        if let Some(k2) = file.model.k2 {
            family.k2 = k2;
        }
        if let Some(p) = file.model.p {
            family.p = p;
        }
        if let Some(p1) = file.model.p1 {
            family.p1 = p1;
        }
    }
    if file.model.source.kind.is_some() {
        source = resolve_source(&file.model.source)?;
    }
    let model = if overrides.force {
        NonlinearModel::power_family_unchecked(family, source)
    } else {
        NonlinearModel::power_family(family, source)?
    };

    // domain
    let l_dom = file.domain.l_dom.unwrap_or(1.0);
    if !l_dom.is_finite() || l_dom <= 0.0 {
        return Err(invalid("domain.l_dom", "must be > 0"));
    }
    let m = overrides.modes.or(file.domain.m).unwrap_or(32);
    if m < 1 {
        return Err(invalid("domain.m", "must be >= 1"));
    }
    let n_quad = if overrides.modes.is_some() {
        4 * m
    } else {
        file.domain.n_quad.unwrap_or(4 * m)
    };
    if n_quad < 2 * m {
        return Err(invalid(
            "domain.n_quad",
            format!("must be >= 2*m = {} (got {n_quad})", 2 * m),
        ));
    }
    if let Some(deg) = model.polynomial_degree_hint() {
        // alias-free projection of a degree-d image needs n_quad ≥ (d+1)m/2 + 1
        let needed = ((deg + 1.0) * m as f64 / 2.0 + 1.0).ceil();
        if (n_quad as f64) < needed {
            warnings.push(format!(
                "model polynomial degree ~{deg} needs n_quad >= {needed} for alias-free projection at m = {m} (got {n_quad}); energy diagnostics may be corrupted"
            ));
        }
    }

    // data
    let u0 = resolve_data("data.u0", &file.data.u0, &file.data.u0_modal, l_dom)?
        .unwrap_or(InitialData::Modal(vec![1.0]));
    let u1 = resolve_data("data.u1", &file.data.u1, &file.data.u1_modal, l_dom)?
        .unwrap_or(InitialData::Zero);

    // time
    let t_final = overrides.t_final.or(file.time.t_final).unwrap_or(1.0);
    if !t_final.is_finite() || t_final <= 0.0 {
        return Err(invalid("time.t_final", "must be > 0"));
    }
    let dt = overrides
        .dt
        .or(file.time.dt)
        .unwrap_or_else(|| Scenario::default_dt(l_dom, m));
    if !dt.is_finite() || dt <= 0.0 {
        return Err(invalid("time.dt", format!("must be > 0 (got {dt})")));
    }
    let integrator = match overrides.integrator {
        Some(i) => i,
        None => match file.time.integrator.as_deref() {
            None | Some("verlet") => Integrator::Verlet,
            Some("rk4") => Integrator::Rk4,
            Some(other) => {
                return Err(invalid(
                    "time.integrator",
                    format!("unknown integrator \"{other}\" (expected verlet|rk4)"),
                ))
            }
        },
    };
    let sample_every = file.time.sample_every.unwrap_or_else(|| {
        let steps = (t_final / dt).round().max(1.0);
        ((steps / 1000.0).ceil() as usize).max(1)
    });
    if sample_every == 0 {
        return Err(invalid("time.sample_every", "must be >= 1"));
    }
    let blowup_threshold = file.time.blowup_threshold.unwrap_or(1e8);
    if !blowup_threshold.is_finite() || blowup_threshold <= 0.0 {
        return Err(invalid("time.blowup_threshold", "must be > 0"));
    }

    let scenario = Scenario {
        model,
        l_dom,
        m,
        n_quad,
        u0,
        u1,
        t_final,
        dt,
        integrator,
        sample_every,
        blowup_threshold,
    };
    scenario
        .validate()
        .map_err(|e| invalid("scenario", e.to_string()))?;

    // bounds
    let bounds = BoundsConfig {
        probe: ProbeSpec::new(
            file.bounds.probe_range.unwrap_or(10.0),
            file.bounds.probe_count.unwrap_or(4096),
        ),
        l_factor: file.bounds.l_factor.unwrap_or(2.0),
        drift_tol: file.bounds.drift_tol.unwrap_or(1e-6),
    };
    if !bounds.l_factor.is_finite() || bounds.l_factor <= 1.0 {
        return Err(invalid("bounds.l_factor", "must be > 1"));
    }
    if bounds.probe.radius <= 0.0 || bounds.probe.count < 1000 {
        return Err(invalid(
            "bounds.probe_range/probe_count",
            "need probe_range > 0 and probe_count >= 1000",
        ));
    }

    let defaults = ConvergeConfig::default();
    let converge = ConvergeConfig {
        m_list: file.converge.m_list.unwrap_or(defaults.m_list),
        dt_list: file.converge.dt_list.unwrap_or(defaults.dt_list),
    };

    Ok(ResolvedScenario {
        scenario,
        model_desc: ResolvedModel {
            family,
            source,
            forced: overrides.force,
        },
        bounds,
        converge,
        out_dir: file.output.dir.unwrap_or_else(|| "out".into()),
        warnings,
    })
}

fn resolve_data(
    field: &str,
    expr: &Option<String>,
    modal: &Option<Vec<f64>>,
    l_dom: f64,
) -> Result<Option<InitialData>, ScenarioError> {
    match (expr, modal) {
        (Some(_), Some(_)) => Err(invalid(
            field,
            "give either an expression or modal coefficients, not both",
        )),
        (None, None) => Ok(None),
        (None, Some(coeffs)) => {
            if coeffs.iter().any(|v| !v.is_finite()) {
                return Err(invalid(field, "modal coefficients must be finite"));
            }
            Ok(Some(InitialData::Modal(coeffs.clone())))
        }
        (Some(text), None) => {
            let trimmed = text.trim();
            if trimmed.is_empty() || trimmed == "0" {
                return Ok(Some(InitialData::Zero));
            }
            let terms = parse_sine_sum(trimmed)
                .map_err(|message| invalid(field, message))?;
            // sanity: expressions must vanish at the boundary (within the
            // slack that tolerates decimal approximations of k·π/l)
            let data = InitialData::SineSum(terms);
            let amp = data.max_abs_amplitude().max(1.0);
            for x in [0.0, l_dom] {
                let v = data.eval(x, l_dom);
                if v.abs() > 1e-4 * amp {
                    return Err(invalid(
                        field,
                        format!("expression does not vanish at x = {x} (value {v:e}); wavenumbers must be near integer multiples of pi/l_dom"),
                    ));
                }
            }
            Ok(Some(data))
        }
    }
}

/// Grammar: expr := term (('+'|'-') term)*,
/// term := [number '*'] 'sin(' number '*x' ')'.
fn parse_sine_sum(text: &str) -> Result<Vec<SineTerm>, String> {
    let mut terms = Vec::new();
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut rest = cleaned.as_str();
    let mut sign = 1.0;
    if let Some(r) = rest.strip_prefix('-') {
        sign = -1.0;
        rest = r;
    } else if let Some(r) = rest.strip_prefix('+') {
        rest = r;
    }
    loop {
        let (term, tail) = parse_term(rest)?;
        terms.push(SineTerm {
            amplitude: sign * term.amplitude,
            wavenumber: term.wavenumber,
        });
        if tail.is_empty() {
            break;
        }
        if let Some(r) = tail.strip_prefix('+') {
            sign = 1.0;
            rest = r;
        } else if let Some(r) = tail.strip_prefix('-') {
            sign = -1.0;
            rest = r;
        } else {
            return Err(format!("expected '+' or '-' before \"{tail}\""));
        }
    }
    Ok(terms)
}

fn parse_term(text: &str) -> Result<(SineTerm, &str), String> {
    let (amplitude, rest) = if let Some(idx) = text.find("*sin(") {
        let amp: f64 = text[..idx]
            .parse()
            .map_err(|_| format!("bad amplitude \"{}\"", &text[..idx]))?;
        (amp, &text[idx + 1..])
    } else {
        (1.0, text)
    };
    let body = rest
        .strip_prefix("sin(")
        .ok_or_else(|| format!("expected sin(K*x) at \"{rest}\""))?;
    let close = body
        .find(')')
        .ok_or_else(|| "missing ')' in sin term".to_string())?;
    let inner = &body[..close];
    let k_text = inner
        .strip_suffix("*x")
        .ok_or_else(|| format!("expected K*x inside sin(...), got \"{inner}\""))?;
    let wavenumber: f64 = k_text
        .parse()
        .map_err(|_| format!("bad wavenumber \"{k_text}\""))?;
    Ok((
        SineTerm {
            amplitude,
            wavenumber,
        },
        &body[close + 1..],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ResolvedScenario, ScenarioError> {
        parse_scenario_str(text, &Overrides::default())
    }

    #[test]
    fn minimal_linear_preset_gets_defaults() {
        let rs = parse("[model]\npreset = \"linear\"\n").unwrap();
        assert_eq!(rs.scenario.m, 32);
        assert_eq!(rs.scenario.n_quad, 128);
        assert!(rs.scenario.model.source_is_zero());
        assert!((rs.scenario.model.f(3.7) - 1.0).abs() < 1e-15);
        assert_eq!(rs.scenario.t_final, 1.0);
        assert_eq!(rs.scenario.integrator, Integrator::Verlet);
        // default dt resolves the fastest mode
        let expect = Scenario::default_dt(1.0, 32);
        assert!((rs.scenario.dt - expect).abs() < 1e-18);
    }

    #[test]
    fn negative_dt_is_a_field_error() {
        let err = parse("[model]\npreset = \"linear\"\n[time]\ndt = -1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("time.dt"), "message was: {msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse("[model]\npreset = \"linear\"\nwhatever = 1\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
        let err2 = parse("[model]\npreset = \"linear\"\n[extra]\nx = 1\n").unwrap_err();
        assert!(matches!(err2, ScenarioError::Parse(_)));
    }

    #[test]
    fn sine_expression_is_projected() {
        let rs = parse(
            "[model]\npreset = \"linear\"\n[domain]\nm = 4\n[data]\nu0 = \"1.0*sin(3.14159*x)\"\n",
        )
        .unwrap();
        let basis = rs.scenario.basis().unwrap();
        let a = rs.scenario.u0.project(&basis).unwrap();
        assert!(
            (a[0] - 1.0 / 2.0f64.sqrt()).abs() < 1e-4,
            "a1 = {} should be ~1/sqrt(2)",
            a[0]
        );
    }

    #[test]
    fn sine_sum_parser_handles_signs_and_sums() {
        let terms = parse_sine_sum("0.5*sin(3.141592653589793*x)-0.25*sin(9.42477796076938*x)")
            .unwrap();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0].amplitude, 0.5);
        assert_eq!(terms[1].amplitude, -0.25);
        assert!(parse_sine_sum("sin(2*y)").is_err());
        assert!(parse_sine_sum("cos(2*x)").is_err());
    }

    #[test]
    fn non_vanishing_expression_rejected() {
        let err = parse("[model]\npreset = \"linear\"\n[data]\nu0 = \"1.0*sin(2.5*x)\"\n")
            .unwrap_err();
        assert!(err.to_string().contains("data.u0"));
    }

    #[test]
    fn non_monotone_family_needs_force() {
        let text = "[model]\nfamily = \"power-family\"\nk0 = 1.0\nk1 = 10.0\nk2 = 1.0\np = 4.0\np1 = 1.0\n";
        assert!(matches!(parse(text), Err(ScenarioError::Model(_))));
        let forced = parse_scenario_str(
            text,
            &Overrides {
                force: true,
                ..Overrides::default()
            },
        )
        .unwrap();
        assert!(forced.model_desc.forced);
    }

    #[test]
    fn source_section_resolves_named_kinds() {
        let rs = parse(
            "[model]\npreset = \"cubic\"\n[model.source]\nkind = \"sin-minus-r\"\nscale = 1.0\n",
        )
        .unwrap();
        assert!(!rs.scenario.model.source_is_zero());
        let g = rs.scenario.model.g(2.0);
        assert!((g - (2.0f64.sin() - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn overrides_replace_file_values() {
        let rs = parse_scenario_str(
            "[model]\npreset = \"linear\"\n[domain]\nm = 8\n[time]\ndt = 1e-3\n",
            &Overrides {
                modes: Some(16),
                dt: Some(5e-4),
                t_final: Some(2.0),
                integrator: Some(Integrator::Rk4),
                force: false,
            },
        )
        .unwrap();
        assert_eq!(rs.scenario.m, 16);
        assert_eq!(rs.scenario.n_quad, 64);
        assert_eq!(rs.scenario.dt, 5e-4);
        assert_eq!(rs.scenario.t_final, 2.0);
        assert_eq!(rs.scenario.integrator, Integrator::Rk4);
    }

    #[test]
    fn aliasing_warning_emitted_for_tight_grid() {
        let rs = parse("[model]\npreset = \"cubic\"\n[domain]\nm = 8\nn_quad = 16\n").unwrap();
        assert!(!rs.warnings.is_empty());
    }
}
