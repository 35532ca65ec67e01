//! Executes a [`RunConfig`]: builds the case, marches to a steady state and
//! writes the convergence log, snapshots and run metadata.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use thiserror::Error;

use crate::cases::CaseError;
use crate::config::RunConfig;
use crate::euler::State;
use crate::limiter::Scheme;
use crate::mesh::Mesh;
use crate::output::{write_convergence_csv, write_vtk};
use crate::solver::{run_to_steady_with, ConvergenceRecord, Discretization, OmegaMode, SolverError, SteadyRun, SteadyStatus};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: SteadyStatus,
    pub steps: usize,
    pub final_residual: f64,
    /// Steps of the low-order start-up phase, if any.
    pub low_order_steps: Option<usize>,
    pub output_dir: PathBuf,
}

impl RunSummary {
    pub fn converged(&self) -> bool {
        self.status == SteadyStatus::Converged
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    case: &'a str,
    scheme: &'a str,
    gamma: f64,
    nodes: usize,
    triangles: usize,
    cfl_target: f64,
    cfl_warmup: f64,
    omega: String,
    steady_tol: f64,
    stop_tol: f64,
    linear_tol: f64,
    linear_max_iter: usize,
    max_newton_iters: usize,
    max_pseudo_steps: usize,
    low_order_start: bool,
    status: String,
    steps: usize,
    final_residual: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DriverError + '_ {
    move |source| DriverError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), DriverError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn march(
    disc: &Discretization,
    mesh: &Mesh,
    u0: &[State],
    cfg: &RunConfig,
    tag: &str,
) -> Result<SteadyRun, DriverError> {
    let dir = &cfg.output.dir;
    let every = cfg.output.every;
    let mut io_error = None;
    let mut on_record = |r: &ConvergenceRecord, u: &[State]| {
        info!(
            "[{tag}] step {:>5}  dt {:.3e}  r {:.3e}  omega {:.2}  newton {}  linear {}",
            r.step, r.dt, r.residual, r.omega, r.newton_iters, r.linear_iters
        );
        if every > 0 && r.step > 0 && r.step.is_multiple_of(every) && io_error.is_none() {
            let path = dir.join(format!("{tag}_{:06}.vtk", r.step));
            if let Err(e) = write_file(&path, |w| write_vtk(w, mesh, u, &disc.gas, tag)) {
                io_error = Some(e);
            }
        }
    };
    let mut run = run_to_steady_with(disc, u0, &cfg.solver, &mut on_record, &mut |_| {})?;
    if let Some(e) = io_error {
        return Err(e);
    }
    if cfg.output.deterministic {
        run.records.iter_mut().for_each(|r| r.wall_ms = 0.0);
    }
    let csv = dir.join(format!("{tag}_convergence.csv"));
    write_file(&csv, |w| write_convergence_csv(w, &run.records))?;
    Ok(run)
}

/// Runs the configured case; non-convergence is reported in the summary,
/// not as an error.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary, DriverError> {
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (mesh, disc) = cfg.case.discretize(cfg.gas, cfg.scheme)?;
    info!(
        "case {}: {} nodes, {} triangles, scheme {}",
        cfg.case.name,
        mesh.num_vertices(),
        mesh.triangles.len(),
        cfg.scheme.name()
    );
    let mut u0 = cfg.case.initial_state(mesh.num_vertices(), &cfg.gas)?;
    let mut low_order_steps = None;
    if cfg.low_order_start && cfg.scheme != Scheme::LowOrder {
        let lo = Discretization { scheme: Scheme::LowOrder, ..disc.clone() };
        let run = march(&lo, &mesh, &u0, cfg, "low_order")?;
        low_order_steps = Some(run.steps());
        if !run.converged() {
            log::warn!("low-order start-up ended with {:?}", run.status);
        }
        u0 = run.u;
    }
    let run = march(&disc, &mesh, &u0, cfg, cfg.scheme.name())?;
    let final_residual = run.records.last().map_or(f64::NAN, |r| r.residual);
    let vtk = dir.join("solution.vtk");
    write_file(&vtk, |w| write_vtk(w, &mesh, &run.u, &disc.gas, &cfg.case.name))?;
    let s = &cfg.solver;
    let meta = Metadata {
        case: &cfg.case.name,
        scheme: cfg.scheme.name(),
        gamma: cfg.gas.gamma(),
        nodes: mesh.num_vertices(),
        triangles: mesh.triangles.len(),
        cfl_target: s.cfl_target,
        cfl_warmup: s.cfl_warmup,
        omega: match s.omega {
            OmegaMode::Fixed(w) => format!("{w}"),
            OmegaMode::Adaptive { k, omega0 } => format!("adaptive(k={k}, omega0={omega0})"),
        },
        steady_tol: s.steady_tol,
        stop_tol: s.stop_tol(),
        linear_tol: s.linear.tol_rel,
        linear_max_iter: s.linear.max_iter,
        max_newton_iters: s.max_newton_iters,
        max_pseudo_steps: s.max_pseudo_steps,
        low_order_start: low_order_steps.is_some(),
        status: format!("{:?}", run.status),
        steps: run.steps(),
        final_residual,
    };
    let meta_path = dir.join("run.toml");
    let text = toml::to_string(&meta).expect("metadata serializes");
    write_file(&meta_path, |w| w.write_all(text.as_bytes()))?;
    let steps = run.steps();
    Ok(RunSummary { status: run.status, steps, final_residual, low_order_steps, output_dir: dir.clone() })
}
