//! Deterministic, atomically-written CSV/JSON artifacts. Floats print with
//! 17 significant digits so downstream diffs round-trip losslessly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::energy::EnergyLedger;
use crate::reference::ConvergenceTable;
use crate::solver::Trajectory;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write through a temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp-partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Trajectory CSV: t, a_1..a_m, adot_1..adot_m.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let m = trajectory
        .samples
        .first()
        .map(|s| s.a.len())
        .unwrap_or(0);
    let mut out = String::new();
    out.push('t');
    for j in 1..=m {
        let _ = write!(out, ",a_{j}");
    }
    for j in 1..=m {
        let _ = write!(out, ",adot_{j}");
    }
    out.push('\n');
    for s in &trajectory.samples {
        out.push_str(&fmt_f64(s.t));
        for v in s.a.as_slice() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        for v in s.a_dot.as_slice() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Ledger CSV: t, E, Phi, gradvt2, H plus whichever envelope columns exist.
pub fn ledger_csv(ledger: &EnergyLedger) -> String {
    let mut out = String::from("t,E,Phi,gradvt2,H,source_power");
    if ledger.env_gronwall.is_some() {
        out.push_str(",env_gronwall");
    }
    if ledger.env_velocity.is_some() {
        out.push_str(",env_velocity");
    }
    if ledger.env_bernoulli.is_some() {
        out.push_str(",env_bernoulli");
    }
    if ledger.comparison.is_some() {
        out.push_str(",comparison_y");
    }
    out.push('\n');
    for i in 0..ledger.len() {
        let mut row = vec![
            fmt_f64(ledger.times[i]),
            fmt_f64(ledger.energy[i]),
            fmt_f64(ledger.stored[i]),
            fmt_f64(ledger.grad_vt_sq[i]),
            fmt_f64(ledger.hamiltonian[i]),
            fmt_f64(ledger.source_power[i]),
        ];
        if let Some(env) = &ledger.env_gronwall {
            row.push(fmt_f64(env[i]));
        }
        if let Some(env) = &ledger.env_velocity {
            row.push(fmt_f64(env[i]));
        }
        if let Some(env) = &ledger.env_bernoulli {
            row.push(fmt_f64(env[i]));
        }
        if let Some(env) = &ledger.comparison {
            row.push(fmt_f64(env[i]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Convergence CSV: one row per refinement pair.
pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("study,coarse,fine,max_l2_diff,flagged\n");
    for r in &table.mode_rows {
        let _ = writeln!(
            out,
            "modes,{},{},{},{}",
            r.m_coarse,
            r.m_fine,
            fmt_f64(r.max_l2_diff),
            r.flagged
        );
    }
    for r in &table.step_rows {
        let _ = writeln!(
            out,
            "dt,{},{},{},{}",
            fmt_f64(r.dt_coarse),
            fmt_f64(r.dt_fine),
            fmt_f64(r.max_l2_diff),
            r.flagged
        );
    }
    out
}
