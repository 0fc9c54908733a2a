//! Command-line harness: `check`, `run`, `bounds`, `converge`.
//!
//! Exit codes: 0 success / all checks pass, 1 usage or configuration error,
//! 2 hypothesis or bound violation, 3 blow-up or step failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::energy::{
    attach_envelopes, check_bounds, check_conservation, derive_bound_params, ledger, BoundParams,
    BoundsReport,
};
use crate::nonlinearity::{
    check_growth, check_lipschitz, check_monotone_flux, check_source_domination, ConditionReport,
};
use crate::output::{atomic_write, convergence_csv, ledger_csv, trajectory_csv};
use crate::reference::convergence_study;
use crate::scenario::{parse_scenario, Overrides, ResolvedScenario};
use crate::solver::{init_state, integrate, Integrator, Termination};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VIOLATION: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "netflow-waves",
    about = "Spectral-Galerkin solver and bound-certification harness for 1D nonlinear wave equations",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the model hypotheses (growth, Lipschitz, monotonicity, domination)
    Check(CommonArgs),
    /// Integrate the scenario and write trajectory, ledger and manifest
    Run(CommonArgs),
    /// Integrate, then verify every derived energy bound samplewise
    Bounds(CommonArgs),
    /// Refinement study in mode count and time step
    Converge(CommonArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Scenario file (TOML)
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory (defaults to the scenario's output.dir)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Override domain.m (n_quad becomes 4m)
    #[arg(long)]
    pub modes: Option<usize>,
    /// Override time.dt
    #[arg(long)]
    pub dt: Option<f64>,
    /// Override time.t_final
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Override time.integrator
    #[arg(long, value_parser = parse_integrator)]
    pub integrator: Option<Integrator>,
    /// Admit models whose flux coefficient goes negative on the probe range
    #[arg(long)]
    pub force: bool,
}

fn parse_integrator(s: &str) -> Result<Integrator, String> {
    match s {
        "verlet" => Ok(Integrator::Verlet),
        "rk4" => Ok(Integrator::Rk4),
        other => Err(format!("unknown integrator \"{other}\" (expected verlet|rk4)")),
    }
}

#[derive(Serialize)]
struct ConditionSet {
    growth: ConditionReport,
    lipschitz: ConditionReport,
    monotone_flux: ConditionReport,
    source_domination: ConditionReport,
}

impl ConditionSet {
    fn all_satisfied(&self) -> bool {
        self.growth.satisfied
            && self.lipschitz.satisfied
            && self.monotone_flux.satisfied
            && self.source_domination.satisfied
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    resolved_scenario_toml: String,
    warnings: &'a [String],
    conditions: &'a ConditionSet,
    bound_params: Option<&'a BoundParams>,
    bound_params_note: Option<String>,
    termination: Termination,
    outputs: Vec<String>,
}

/// Regenerate a fully-explicit scenario file from the resolved configuration
/// so a manifest can reproduce the run byte-for-byte.
fn resolved_toml(rs: &ResolvedScenario) -> String {
    use std::fmt::Write;
    let f = crate::output::fmt_f64;
    let scn = &rs.scenario;
    let fam = &rs.model_desc.family;
    let mut out = String::new();
    let _ = writeln!(out, "[model]");
    let _ = writeln!(out, "family = \"power-family\"");
    let _ = writeln!(out, "k0 = {}", f(fam.k0));
    let _ = writeln!(out, "k1 = {}", f(fam.k1));
    let _ = writeln!(out, "k2 = {}", f(fam.k2));
    let _ = writeln!(out, "p = {}", f(fam.p));
    let _ = writeln!(out, "p1 = {}", f(fam.p1));
    use crate::nonlinearity::SourceKind::*;
    let (kind, scale, p0) = match rs.model_desc.source {
        Zero => ("zero", 0.0, None),
        Power { scale, exponent } => ("power", scale, Some(exponent)),
        Sin { scale } => ("sin", scale, None),
        SinMinusLinear { scale } => ("sin-minus-r", scale, None),
        Linear { scale } => ("linear", scale, None),
    };
    let _ = writeln!(out, "[model.source]");
    let _ = writeln!(out, "kind = \"{kind}\"");
    let _ = writeln!(out, "scale = {}", f(scale));
    if let Some(p0) = p0 {
        let _ = writeln!(out, "p0 = {}", f(p0));
    }
    let _ = writeln!(out, "[domain]");
    let _ = writeln!(out, "l_dom = {}", f(scn.l_dom));
    let _ = writeln!(out, "m = {}", scn.m);
    let _ = writeln!(out, "n_quad = {}", scn.n_quad);
    let _ = writeln!(out, "[data]");
    let data_line = |name: &str, data: &crate::solver::InitialData| -> String {
        match data {
            crate::solver::InitialData::Zero => format!("{name}_modal = []"),
            crate::solver::InitialData::Modal(c) => format!(
                "{name}_modal = [{}]",
                c.iter().map(|v| f(*v)).collect::<Vec<_>>().join(", ")
            ),
            crate::solver::InitialData::SineSum(terms) => {
                let expr = terms
                    .iter()
                    .map(|t| format!("{}*sin({}*x)", f(t.amplitude), f(t.wavenumber)))
                    .collect::<Vec<_>>()
                    .join("+");
                format!("{name} = \"{expr}\"")
            }
        }
    };
    let _ = writeln!(out, "{}", data_line("u0", &scn.u0));
    let _ = writeln!(out, "{}", data_line("u1", &scn.u1));
    let _ = writeln!(out, "[time]");
    let _ = writeln!(out, "t_final = {}", f(scn.t_final));
    let _ = writeln!(out, "dt = {}", f(scn.dt));
    let _ = writeln!(out, "integrator = \"{}\"", scn.integrator);
    let _ = writeln!(out, "sample_every = {}", scn.sample_every);
    let _ = writeln!(out, "blowup_threshold = {}", f(scn.blowup_threshold));
    let _ = writeln!(out, "[bounds]");
    let _ = writeln!(out, "probe_range = {}", f(rs.bounds.probe.radius));
    let _ = writeln!(out, "probe_count = {}", rs.bounds.probe.count);
    let _ = writeln!(out, "l_factor = {}", f(rs.bounds.l_factor));
    let _ = writeln!(out, "drift_tol = {}", f(rs.bounds.drift_tol));
    let _ = writeln!(out, "[output]");
    let _ = writeln!(out, "dir = \"{}\"", rs.out_dir);
    out
}

fn usage_error(message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    EXIT_USAGE
}

fn run_checks(rs: &ResolvedScenario) -> Result<ConditionSet, crate::nonlinearity::ModelError> {
    let model = &rs.scenario.model;
    let probe = rs.bounds.probe;
    let p = rs.model_desc.family.p;
    Ok(ConditionSet {
        growth: check_growth(model, p, probe)?,
        lipschitz: check_lipschitz(model, probe),
        monotone_flux: check_monotone_flux(model, probe)?,
        source_domination: check_source_domination(model, probe)?,
    })
}

fn condition_table(set: &ConditionSet) -> String {
    let mut out = String::new();
    let row = |name: &str, rep: &ConditionReport| -> String {
        let consts: Vec<String> = [
            ("a0", rep.a0),
            ("a1", rep.a1),
            ("b0", rep.b0),
            ("b1", rep.b1),
            ("d0", rep.d0),
            ("d1", rep.d1),
        ]
        .iter()
        .filter_map(|(n, v)| v.map(|v| format!("{n}={v:.6e}")))
        .collect();
        let worst = match (rep.worst_point, rep.worst_margin) {
            (Some(p), Some(m)) => format!("  worst r={p:.4e} margin={m:.4e}"),
            (Some(p), None) => format!("  worst r={p:.4e}"),
            _ => String::new(),
        };
        format!(
            "{name:<18} {}  [{}]{worst}\n",
            if rep.satisfied { "satisfied" } else { "VIOLATED " },
            consts.join(", ")
        )
    };
    out.push_str(&row("growth", &set.growth));
    out.push_str(&row("lipschitz", &set.lipschitz));
    out.push_str(&row("monotone-flux", &set.monotone_flux));
    out.push_str(&row("source-domination", &set.source_domination));
    out
}

fn bounds_table(report: &BoundsReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        let status = if c.skipped {
            "skipped"
        } else if c.passed {
            "pass"
        } else {
            "FAIL"
        };
        out.push_str(&format!(
            "{:<22} {status:<8} worst margin {:+.6e} at t = {:.6}\n",
            c.name, c.worst_margin, c.worst_time
        ));
    }
    out
}

struct Prepared {
    rs: ResolvedScenario,
    out_dir: PathBuf,
}

fn prepare(args: &CommonArgs) -> Result<Prepared, String> {
    let overrides = Overrides {
        modes: args.modes,
        dt: args.dt,
        t_final: args.t_final,
        integrator: args.integrator,
        force: args.force,
    };
    let rs = parse_scenario(&args.scenario, &overrides).map_err(|e| e.to_string())?;
    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&rs.out_dir));
    for w in &rs.warnings {
        eprintln!("warning: {w}");
    }
    Ok(Prepared { rs, out_dir })
}

pub fn run(cli: Cli) -> u8 {
    match cli.command {
        Command::Check(args) => cmd_check(&args),
        Command::Run(args) => cmd_run(&args, false),
        Command::Bounds(args) => cmd_run(&args, true),
        Command::Converge(args) => cmd_converge(&args),
    }
}

fn cmd_check(args: &CommonArgs) -> u8 {
    let prep = match prepare(args) {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    let set = match run_checks(&prep.rs) {
        Ok(s) => s,
        Err(e) => return usage_error(e),
    };
    print!("{}", condition_table(&set));
    let json = serde_json::to_string_pretty(&set).expect("reports serialize");
    let path = prep.out_dir.join("conditions.json");
    if let Err(e) = atomic_write(&path, json.as_bytes()) {
        return usage_error(format!("writing {}: {e}", path.display()));
    }
    println!("wrote {}", path.display());
    if set.all_satisfied() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}

fn cmd_run(args: &CommonArgs, verify_bounds: bool) -> u8 {
    let prep = match prepare(args) {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    let rs = &prep.rs;
    let set = match run_checks(rs) {
        Ok(s) => s,
        Err(e) => return usage_error(e),
    };

    let basis = match rs.scenario.basis() {
        Ok(b) => b,
        Err(e) => return usage_error(e),
    };
    let init = match init_state(&rs.scenario, &basis) {
        Ok(s) => s,
        Err(e) => return usage_error(e),
    };
    let (params, note): (Option<BoundParams>, Option<String>) = match derive_bound_params(
        &rs.scenario.model,
        &basis,
        &init,
        rs.scenario.t_final,
        &set.growth,
        &set.source_domination,
        rs.bounds.l_factor,
    ) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let trajectory = match integrate(&rs.scenario) {
        Ok(t) => t,
        Err(e) => return usage_error(e),
    };
    let mut led = match ledger(&trajectory, &basis, &rs.scenario.model) {
        Ok(l) => l,
        Err(e) => return usage_error(e),
    };
    if let Some(p) = &params {
        attach_envelopes(&mut led, p);
    }

    let mut outputs = Vec::new();
    let mut write = |name: &str, text: &str| -> Result<(), String> {
        let path = prep.out_dir.join(name);
        atomic_write(&path, text.as_bytes())
            .map_err(|e| format!("writing {}: {e}", path.display()))?;
        outputs.push(path.display().to_string());
        Ok(())
    };
    if let Err(e) = write("trajectory.csv", &trajectory_csv(&trajectory)) {
        return usage_error(e);
    }
    if let Err(e) = write("ledger.csv", &ledger_csv(&led)) {
        return usage_error(e);
    }

    let mut exit = EXIT_OK;
    if verify_bounds {
        match &params {
            Some(p) => {
                let report = check_bounds(&led, p);
                let ball = match crate::energy::check_ball(&trajectory, &basis, p) {
                    Ok(b) => b,
                    Err(e) => return usage_error(e),
                };
                let conservation = rs
                    .scenario
                    .model
                    .source_is_zero()
                    .then(|| check_conservation(&led, rs.bounds.drift_tol));
                #[derive(Serialize)]
                struct FullReport<'a> {
                    bounds: &'a BoundsReport,
                    ball: &'a crate::energy::BallReport,
                    conservation: Option<&'a crate::energy::ConservationReport>,
                }
                let full = FullReport {
                    bounds: &report,
                    ball: &ball,
                    conservation: conservation.as_ref(),
                };
                let json = serde_json::to_string_pretty(&full).expect("report serializes");
                if let Err(e) = write("bounds_report.json", &json) {
                    return usage_error(e);
                }
                print!("{}", bounds_table(&report));
                println!(
                    "{:<22} {:<8} observed {:.6e} bound {:.6e}",
                    "ball",
                    if ball.passed { "pass" } else { "FAIL" },
                    ball.observed_radius,
                    ball.bound
                );
                let mut ok = report.all_passed && ball.passed;
                if let Some(c) = &conservation {
                    println!(
                        "{:<22} {:<8} drift {:.6e} (tol {:.1e})",
                        "conservation",
                        if c.passed { "pass" } else { "FAIL" },
                        c.drift,
                        c.tolerance
                    );
                    ok &= c.passed;
                }
                if !ok {
                    exit = EXIT_VIOLATION;
                }
            }
            None => {
                eprintln!(
                    "bound verification skipped: {}",
                    note.as_deref().unwrap_or("parameters unavailable")
                );
                exit = EXIT_VIOLATION;
            }
        }
    }

    let manifest = Manifest {
        tool: "netflow-waves",
        version: env!("CARGO_PKG_VERSION"),
        resolved_scenario_toml: resolved_toml(rs),
        warnings: &rs.warnings,
        conditions: &set,
        bound_params: params.as_ref(),
        bound_params_note: note,
        termination: trajectory.status,
        outputs: outputs.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = prep.out_dir.join("manifest.json");
    if let Err(e) = atomic_write(&path, json.as_bytes()) {
        return usage_error(e);
    }
    println!("wrote {}", path.display());

    match trajectory.status {
        Termination::Completed => exit,
        Termination::BlowUp { t } => {
            eprintln!("run terminated: blow-up at t = {t}");
            EXIT_DIVERGED
        }
        Termination::StepFailure { t } => {
            eprintln!("run terminated: step failure at t = {t}");
            EXIT_DIVERGED
        }
    }
}

fn cmd_converge(args: &CommonArgs) -> u8 {
    let prep = match prepare(args) {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    let rs = &prep.rs;
    let table = match convergence_study(&rs.scenario, &rs.converge.m_list, &rs.converge.dt_list) {
        Ok(t) => t,
        Err(e) => return usage_error(e),
    };
    let csv = convergence_csv(&table);
    print!("{csv}");
    let path = prep.out_dir.join("convergence.csv");
    if let Err(e) = atomic_write(&path, csv.as_bytes()) {
        return usage_error(format!("writing {}: {e}", path.display()));
    }
    println!("wrote {}", path.display());
    if table.any_flagged() {
        eprintln!("warning: non-monotone refinement rows flagged (under-resolution or aliasing)");
    }
    EXIT_OK
}
