//! Independent cross-validation: exact solutions of the linear problem, a
//! second-order finite-difference method-of-lines solver on a fine nodal
//! grid, and convergence studies in mode count and time step.
//!
//! The FD scheme discretizes the conservative form (F(u))_xx directly, so it
//! shares no code path (and no integrator default) with the spectral solver.

use serde::Serialize;
use thiserror::Error;

use crate::solver::{GalerkinState, Scenario, SolverError, Termination, Trajectory};
use crate::spectral::{ModalVector, SpectralBasis, SpectralError};

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("finite-difference grid needs at least 16 nodes, got {0}")]
    GridTooCoarse(usize),
    #[error("refinement lists must be ascending and non-empty")]
    BadRefinementList,
    #[error("time step {dt} does not divide the common sample interval {interval}")]
    IncommensurateDt { dt: f64, interval: f64 },
}

/// Exact modal state of the linear problem (f ≡ 1, g ≡ 0): each mode is a
/// harmonic oscillator a_j(t) = a_j(0)cos(√λ_j t) + ȧ_j(0)sin(√λ_j t)/√λ_j.
pub fn exact_linear_state(basis: &SpectralBasis, init: &GalerkinState, t: f64) -> GalerkinState {
    let mut a = Vec::with_capacity(init.a.len());
    let mut a_dot = Vec::with_capacity(init.a.len());
    for (j, &lambda) in basis.eigenvalues().iter().enumerate() {
        let w = lambda.sqrt();
        let (s, c) = (w * t).sin_cos();
        a.push(init.a[j] * c + init.a_dot[j] * s / w);
        a_dot.push(-init.a[j] * w * s + init.a_dot[j] * c);
    }
    GalerkinState {
        t,
        a: ModalVector(a),
        a_dot: ModalVector(a_dot),
    }
}

/// Nodal grid of the finite-difference reference.
#[derive(Clone, Debug)]
pub struct FdGrid {
    pub n_fd: usize,
    pub h: f64,
    /// Interior nodes; boundary values are pinned to zero.
    pub xs: Vec<f64>,
}

/// Sampled nodal states of the finite-difference run.
#[derive(Clone, Debug)]
pub struct FdTrajectory {
    pub grid: FdGrid,
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
    pub status: Termination,
}

/// Method-of-lines reference solve: u_tt,i = [F(u_{i+1}) − 2F(u_i) +
/// F(u_{i−1})]/h² + g(u_i) with RK4 time stepping and the scenario's dt and
/// sampling cadence.
pub fn fd_reference_solve(scenario: &Scenario, n_fd: usize) -> Result<FdTrajectory, ReferenceError> {
    if n_fd < 16 {
        return Err(ReferenceError::GridTooCoarse(n_fd));
    }
    scenario.validate()?;
    let h = scenario.l_dom / n_fd as f64;
    let xs: Vec<f64> = (1..n_fd).map(|i| i as f64 * h).collect();
    let grid = FdGrid { n_fd, h, xs };
    let n = grid.xs.len();
    let model = &scenario.model;

    let mut u: Vec<f64> = grid
        .xs
        .iter()
        .map(|&x| scenario.u0.eval(x, scenario.l_dom))
        .collect();
    let mut ut: Vec<f64> = grid
        .xs
        .iter()
        .map(|&x| scenario.u1.eval(x, scenario.l_dom))
        .collect();

    let inv_h2 = 1.0 / (h * h);
    let rhs = |u: &[f64], out: &mut Vec<f64>| {
        out.clear();
        let flux: Vec<f64> = u
            .iter()
            .map(|&v| model.flux_potential(v).unwrap_or(f64::NAN))
            .collect();
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { flux[i - 1] };
            let right = if i + 1 == n { 0.0 } else { flux[i + 1] };
            let mut acc = (right - 2.0 * flux[i] + left) * inv_h2;
            if !model.source_is_zero() {
                acc += model.g(u[i]);
            }
            out.push(acc);
        }
    };

    let n_steps = scenario.step_count();
    let dt = scenario.dt;
    let mut times = vec![0.0];
    let mut frames = vec![u.clone()];
    let mut status = Termination::Completed;
    let mut k1 = Vec::with_capacity(n);
    let mut k2 = Vec::with_capacity(n);
    let mut k3 = Vec::with_capacity(n);
    let mut k4 = Vec::with_capacity(n);
    let mut stage = vec![0.0; n];

    for i in 1..=n_steps {
        let t = i as f64 * dt;
        rhs(&u, &mut k1);
        for j in 0..n {
            stage[j] = u[j] + 0.5 * dt * ut[j];
        }
        // RK4 on the first-order system (u, ut): position stages reuse the
        // velocity stages, which for this velocity-independent rhs are
        // v2 = ut + dt/2·k1, v3 = ut + dt/2·k2, v4 = ut + dt·k3.
        rhs(&stage, &mut k2);
        for j in 0..n {
            stage[j] = u[j] + 0.5 * dt * (ut[j] + 0.5 * dt * k1[j]);
        }
        rhs(&stage, &mut k3);
        for j in 0..n {
            stage[j] = u[j] + dt * (ut[j] + 0.5 * dt * k2[j]);
        }
        rhs(&stage, &mut k4);

        let mut bad = false;
        let mut max_abs = 0.0f64;
        for j in 0..n {
            let v2 = ut[j] + 0.5 * dt * k1[j];
            let v3 = ut[j] + 0.5 * dt * k2[j];
            let v4 = ut[j] + dt * k3[j];
            u[j] += dt / 6.0 * (ut[j] + 2.0 * v2 + 2.0 * v3 + v4);
            ut[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            if !u[j].is_finite() || !ut[j].is_finite() {
                bad = true;
            }
            max_abs = max_abs.max(u[j].abs());
        }
        if bad {
            status = Termination::StepFailure { t };
            break;
        }
        if max_abs > scenario.blowup_threshold {
            status = Termination::BlowUp { t };
            times.push(t);
            frames.push(u.clone());
            break;
        }
        if i % scenario.sample_every == 0 || i == n_steps {
            times.push(t);
            frames.push(u.clone());
        }
    }

    Ok(FdTrajectory {
        grid,
        times,
        frames,
        status,
    })
}

/// Max-over-time nodal L² distance between a spectral trajectory (evaluated
/// at the FD nodes) and the FD reference, over the common sample times.
pub fn cross_solver_divergence(
    trajectory: &Trajectory,
    basis: &SpectralBasis,
    fd: &FdTrajectory,
) -> Result<f64, ReferenceError> {
    let n = trajectory.samples.len().min(fd.frames.len());
    let mut worst = 0.0f64;
    for i in 0..n {
        let spectral = basis.synthesize_at(&trajectory.samples[i].a, &fd.grid.xs)?;
        let mut d2 = 0.0;
        for (s, f) in spectral.iter().zip(&fd.frames[i]) {
            let d = s - f;
            d2 += d * d;
        }
        worst = worst.max((fd.grid.h * d2).sqrt());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeRefinementRow {
    pub m_coarse: usize,
    pub m_fine: usize,
    pub max_l2_diff: f64,
    /// Set when this row fails to improve on the previous one.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRefinementRow {
    pub dt_coarse: f64,
    pub dt_fine: f64,
    pub max_l2_diff: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub mode_rows: Vec<ModeRefinementRow>,
    pub step_rows: Vec<StepRefinementRow>,
}

impl ConvergenceTable {
    pub fn any_flagged(&self) -> bool {
        self.mode_rows.iter().any(|r| r.flagged) || self.step_rows.iter().any(|r| r.flagged)
    }

    /// Richardson ratios of consecutive step-refinement rows.
    pub fn step_ratios(&self) -> Vec<f64> {
        self.step_rows
            .windows(2)
            .map(|w| w[0].max_l2_diff / w[1].max_l2_diff)
            .collect()
    }
}

fn run_with(scenario: &Scenario, m: usize, dt: f64, sample_every: usize) -> Result<Trajectory, SolverError> {
    let scn = Scenario {
        m,
        n_quad: 4 * m,
        dt,
        sample_every,
        ..scenario.clone()
    };
    crate::solver::integrate(&scn)
}

fn max_threads() -> usize {
    std::env::var("NETFLOW_WAVES_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|v| v.get())
                .unwrap_or(1)
        })
}

/// Run the refinement chains: consecutive max-over-time L² differences in m
/// (fixed dt) and in dt (fixed m). Rows that fail to decrease are flagged,
/// not errors. Runs fan out over at most `NETFLOW_WAVES_THREADS` workers.
pub fn convergence_study(
    scenario: &Scenario,
    m_list: &[usize],
    dt_list: &[f64],
) -> Result<ConvergenceTable, ReferenceError> {
    if m_list.is_empty() && dt_list.is_empty() {
        return Err(ReferenceError::BadRefinementList);
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ReferenceError::BadRefinementList);
    }
    if dt_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ReferenceError::BadRefinementList);
    }

    // Common sample interval for the dt study: the coarsest step must be an
    // integer multiple of every finer one.
    let step_runs: Vec<(f64, usize)> = if dt_list.is_empty() {
        Vec::new()
    } else {
        let interval_steps = ((scenario.t_final / dt_list.last().unwrap()) / 100.0)
            .ceil()
            .max(1.0);
        let interval = interval_steps * dt_list.last().unwrap();
        dt_list
            .iter()
            .rev()
            .map(|&dt| {
                let ratio = interval / dt;
                if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                    return Err(ReferenceError::IncommensurateDt { dt, interval });
                }
                Ok((dt, ratio.round() as usize))
            })
            .collect::<Result<Vec<_>, _>>()?
    };

    enum Job {
        Mode(usize),
        Step(f64, usize),
    }
    let mut jobs: Vec<Job> = m_list.iter().map(|&m| Job::Mode(m)).collect();
    jobs.extend(step_runs.iter().map(|&(dt, se)| Job::Step(dt, se)));

    let mut results: Vec<Option<Result<Trajectory, SolverError>>> =
        (0..jobs.len()).map(|_| None).collect();
    let workers = max_threads().min(jobs.len()).max(1);
    let mut slots: Vec<(&Job, &mut Option<Result<Trajectory, SolverError>>)> =
        jobs.iter().zip(results.iter_mut()).collect();
    let chunk = slots.len().div_ceil(workers);
    std::thread::scope(|scope| {
        for batch in slots.chunks_mut(chunk) {
            scope.spawn(move || {
                for (job, slot) in batch.iter_mut() {
                    **slot = Some(match job {
                        Job::Mode(m) => {
                            run_with(scenario, *m, scenario.dt, scenario.sample_every)
                        }
                        Job::Step(dt, se) => run_with(scenario, scenario.m, *dt, *se),
                    });
                }
            });
        }
    });
    drop(slots);
    let mut trajectories = Vec::with_capacity(results.len());
    for r in results {
        trajectories.push(r.expect("worker filled every slot")?);
    }
    let (mode_trajs, step_trajs) = trajectories.split_at(m_list.len());

    let mut mode_rows = Vec::new();
    let mut prev_diff = f64::INFINITY;
    for (k, pair) in mode_trajs.windows(2).enumerate() {
        let diff = crate::solver::max_l2_distance(&pair[0], &pair[1]);
        let flagged = diff >= prev_diff;
        mode_rows.push(ModeRefinementRow {
            m_coarse: m_list[k],
            m_fine: m_list[k + 1],
            max_l2_diff: diff,
            flagged,
        });
        prev_diff = diff;
    }

    let mut step_rows = Vec::new();
    let mut prev_diff = f64::INFINITY;
    for (k, pair) in step_trajs.windows(2).enumerate() {
        let diff = crate::solver::max_l2_distance(&pair[0], &pair[1]);
        let flagged = diff >= prev_diff;
        step_rows.push(StepRefinementRow {
            dt_coarse: step_runs[k].0,
            dt_fine: step_runs[k + 1].0,
            max_l2_diff: diff,
            flagged,
        });
        prev_diff = diff;
    }

    Ok(ConvergenceTable {
        mode_rows,
        step_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{NonlinearModel, PowerFamily, SourceKind};
    use crate::solver::{init_state, integrate, InitialData, Integrator};
    use std::f64::consts::PI;

    fn linear_scenario() -> Scenario {
        Scenario {
            model: NonlinearModel::linear(),
            l_dom: 1.0,
            m: 8,
            n_quad: 32,
            u0: InitialData::Modal(vec![1.0]),
            u1: InitialData::Zero,
            t_final: 1.0,
            dt: 1e-4,
            integrator: Integrator::Rk4,
            sample_every: 100,
            blowup_threshold: 1e8,
        }
    }

    #[test]
    fn exact_linear_solution_values() {
        let scn = linear_scenario();
        let basis = scn.basis().unwrap();
        let init = init_state(&scn, &basis).unwrap();
        let at1 = exact_linear_state(&basis, &init, 1.0);
        assert!((at1.a[0] + 1.0).abs() < 1e-14);
        let at0 = exact_linear_state(&basis, &init, 0.0);
        assert_eq!(at0.a.as_slice(), init.a.as_slice());

        // velocity data: u(t) = sin(√λ₁ t)/√λ₁ · w₁
        let init_v = GalerkinState {
            t: 0.0,
            a: ModalVector::zeros(8),
            a_dot: {
                let mut v = ModalVector::zeros(8);
                v.0[0] = 1.0;
                v
            },
        };
        let s = exact_linear_state(&basis, &init_v, 0.5);
        assert!((s.a[0] - (PI * 0.5).sin() / PI).abs() < 1e-14);
    }

    #[test]
    fn fd_matches_exact_linear_solution_second_order() {
        let scn = linear_scenario();
        let basis = scn.basis().unwrap();
        let init = init_state(&scn, &basis).unwrap();

        let error_at = |n_fd: usize| {
            let fd = fd_reference_solve(&scn, n_fd).unwrap();
            let mut worst = 0.0f64;
            for (i, &t) in fd.times.iter().enumerate() {
                let exact = exact_linear_state(&basis, &init, t);
                let vals = basis.synthesize_at(&exact.a, &fd.grid.xs).unwrap();
                let d2: f64 = vals
                    .iter()
                    .zip(&fd.frames[i])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                worst = worst.max((fd.grid.h * d2).sqrt());
            }
            worst
        };
        let e512 = error_at(512);
        assert!(e512 < 1e-4, "FD error at N=512: {e512}");
        let e256 = error_at(256);
        let order = (e256 / e512).log2();
        assert!(
            (1.8..=2.2).contains(&order),
            "spatial order {order} (e256={e256:e}, e512={e512:e})"
        );
    }

    #[test]
    fn fd_zero_data_stays_zero() {
        let scn = Scenario {
            u0: InitialData::Zero,
            u1: InitialData::Zero,
            t_final: 0.2,
            dt: 1e-3,
            ..linear_scenario()
        };
        let fd = fd_reference_solve(&scn, 64).unwrap();
        assert!(fd.status.is_completed());
        assert!(fd
            .frames
            .iter()
            .all(|f| f.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn fd_grid_too_coarse_rejected() {
        let scn = linear_scenario();
        assert!(matches!(
            fd_reference_solve(&scn, 8),
            Err(ReferenceError::GridTooCoarse(8))
        ));
    }

    #[test]
    fn cross_solver_agreement_cubic() {
        let model = NonlinearModel::power_family(
            PowerFamily {
                k0: 3.0,
                k1: 0.0,
                k2: 1.0,
                p: 4.0,
                p1: 0.0,
            },
            SourceKind::Zero,
        )
        .unwrap();
        let scn = Scenario {
            model,
            l_dom: 1.0,
            m: 32,
            n_quad: 128,
            u0: InitialData::Modal(vec![0.5]),
            u1: InitialData::Zero,
            t_final: 0.5,
            dt: 2e-4,
            integrator: Integrator::Verlet,
            sample_every: 250,
            blowup_threshold: 1e8,
        };
        let traj = integrate(&scn).unwrap();
        let basis = scn.basis().unwrap();
        let fd = fd_reference_solve(&scn, 512).unwrap();
        let div = cross_solver_divergence(&traj, &basis, &fd).unwrap();
        assert!(div < 1e-3, "cross-solver divergence {div}");
    }

    #[test]
    fn convergence_study_linear_single_mode() {
        // one active mode: refinements in m change nothing beyond rounding
        let scn = Scenario {
            t_final: 0.25,
            dt: 1e-3,
            sample_every: 50,
            ..linear_scenario()
        };
        let table = convergence_study(&scn, &[4, 8], &[]).unwrap();
        assert_eq!(table.mode_rows.len(), 1);
        assert!(table.mode_rows[0].max_l2_diff < 1e-12);
    }

    #[test]
    fn convergence_study_rk4_ratio_is_fourth_order() {
        let scn = Scenario {
            sample_every: 10,
            ..linear_scenario()
        };
        let table = convergence_study(&scn, &[], &[2.5e-3, 5e-3, 1e-2]).unwrap();
        assert_eq!(table.step_rows.len(), 2);
        let ratios = table.step_ratios();
        assert!(
            (12.0..=20.0).contains(&ratios[0]),
            "rk4 Richardson ratio {} (rows {:?})",
            ratios[0],
            table.step_rows
        );
    }

    #[test]
    fn convergence_study_rejects_unsorted_lists() {
        let scn = linear_scenario();
        assert!(convergence_study(&scn, &[8, 4], &[]).is_err());
        assert!(convergence_study(&scn, &[], &[]).is_err());
    }
}
