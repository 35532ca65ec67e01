//! Pseudo-time stepping to steady state.
//!
//! Each pseudo-time step solves `M_L u = M_L u^n + dt [R_L(u) + F*(u)]` by
//! deferred correction with the low-order Jacobian, stops as soon as the
//! iterate is admissible, and then underrelaxes `u^{n+1} = u^n + omega du`.

use std::time::Instant;

use thiserror::Error;

use crate::assembly::DiscreteOperators;
use crate::euler::{GasModel, State};
use crate::limiter::{antidiffusion_from_parts, LimiterError, Scheme};
use crate::linalg::{assemble_jacobian, solve, BlockSparseMatrix, LinalgError, LinearSolverSettings};
use crate::low_order::{
    accumulate_boundary, edge_coefficients_with_fluxes, nodal_fluxes, residual_from_parts, BoundaryAccumulation,
    BoundaryConditions, EdgeCoefficients, LowOrderError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    LowOrder(#[from] LowOrderError),
    #[error(transparent)]
    Limiter(#[from] LimiterError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("all graph viscosities vanish, no time step can be derived")]
    AllZeroViscosity,
    #[error("no admissible Newton iterate after {halvings} time step halvings (last dt = {dt:e})")]
    NewtonFailed { halvings: usize, dt: f64 },
    #[error("fixed-point increments stopped contracting after {iterations} iterations")]
    NonContractive { iterations: usize },
    #[error("fixed-point iterate is inadmissible at node {node}")]
    InadmissibleIterate { node: usize },
    #[error("node {node} has rho = {rho}, p = {p}; entropy variables undefined")]
    NonPositiveThermodynamicState { node: usize, rho: f64, p: f64 },
    #[error("accepted state is inadmissible at node {node}")]
    IdpViolation { node: usize },
    #[error("invalid solver setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

/// Spatial discretization of one problem.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub ops: DiscreteOperators,
    pub bcs: BoundaryConditions,
    pub gas: GasModel,
    pub scheme: Scheme,
}

/// Everything derived from one state that the solver needs.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub edge: EdgeCoefficients,
    pub boundary: BoundaryAccumulation,
    pub r_low: Vec<State>,
    pub antidiffusion: Vec<State>,
}

impl Evaluation {
    /// `R*_inf = R_L + F*`.
    pub fn steady_residual(&self) -> Vec<State> {
        self.r_low.iter().zip(&self.antidiffusion).map(|(a, b)| a + b).collect()
    }
}

impl Discretization {
    pub fn new(ops: DiscreteOperators, bcs: BoundaryConditions, gas: GasModel, scheme: Scheme) -> Self {
        Self { ops, bcs, gas, scheme }
    }

    pub fn num_nodes(&self) -> usize {
        self.ops.num_nodes()
    }

    /// Evaluates the scheme at `u`. Densities must be positive; slightly
    /// negative pressures of intermediate iterates are tolerated.
    pub fn evaluate(&self, u: &[State]) -> Result<Evaluation, SolverError> {
        let fluxes = nodal_fluxes(u, &self.gas)?;
        let edge = edge_coefficients_with_fluxes(u, &fluxes, &self.ops, &self.gas)?;
        let boundary = accumulate_boundary(u, &self.ops, &self.bcs, &self.gas)?;
        let r_low = residual_from_parts(u, &fluxes, &edge, &boundary.b_tilde, &self.ops);
        let antidiffusion = antidiffusion_from_parts(self.scheme, u, &r_low, &edge, &self.ops)?;
        Ok(Evaluation { edge, boundary, r_low, antidiffusion })
    }

    pub fn steady_residual(&self, u: &[State]) -> Result<Vec<State>, SolverError> {
        Ok(self.evaluate(u)?.steady_residual())
    }

    /// `R*_dt(u) = M_L (u^n - u) + dt [R_L(u) + F*(u)]`.
    pub fn step_residual(&self, u: &[State], u_n: &[State], dt: f64) -> Result<Vec<State>, SolverError> {
        let ev = self.evaluate(u)?;
        Ok(step_residual_from(&self.ops, &ev, u, u_n, dt))
    }

    /// `R*_dt(u) = M_L u^n - J_L(u) u + dt [F*(u) + b(u^)]`.
    pub fn step_residual_matrix_form(&self, u: &[State], u_n: &[State], dt: f64) -> Result<Vec<State>, SolverError> {
        let ev = self.evaluate(u)?;
        let jac = self.jacobian(u, &ev, dt);
        let ju = jac.matvec(u);
        Ok((0..u.len())
            .map(|i| u_n[i] * self.ops.lumped[i] - ju[i] + (ev.antidiffusion[i] + ev.boundary.b_hat[i]) * dt)
            .collect())
    }

    pub fn jacobian(&self, u: &[State], ev: &Evaluation, dt: f64) -> BlockSparseMatrix {
        assemble_jacobian(u, &self.ops, &ev.edge, &ev.boundary.block, dt, &self.gas)
    }

    /// `r(u) = ||M_L^{-1} R*_inf(u)||` in the discrete L2 norm, summed over components.
    pub fn steady_residual_norm(&self, u: &[State]) -> Result<f64, SolverError> {
        Ok(residual_norm(&self.ops, &self.evaluate(u)?.steady_residual()))
    }

    /// `||R*_eta(u)||` with `(R*_eta)_i = v(u_i) . (M_L^{-1} R*_inf)_i`.
    pub fn entropy_residual_norm(&self, u: &[State]) -> Result<f64, SolverError> {
        let ev = self.evaluate(u)?;
        entropy_residual_norm_from(&self.ops, &self.gas, u, &ev.steady_residual())
    }

    pub fn is_admissible(&self, u: &[State], slack: f64) -> Result<(), usize> {
        match u.iter().position(|s| !self.gas.is_admissible(s, slack)) {
            Some(node) => Err(node),
            None => Ok(()),
        }
    }
}

fn step_residual_from(ops: &DiscreteOperators, ev: &Evaluation, u: &[State], u_n: &[State], dt: f64) -> Vec<State> {
    (0..u.len())
        .map(|i| (u_n[i] - u[i]) * ops.lumped[i] + (ev.r_low[i] + ev.antidiffusion[i]) * dt)
        .collect()
}

/// `sqrt(w^T M_C w)` for a nodal scalar field.
pub fn discrete_l2_norm(ops: &DiscreteOperators, w: &[f64]) -> f64 {
    let p = &ops.pattern;
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        let row: f64 = p.row(i).map(|k| ops.mass[k] * w[p.col_idx[k]]).sum();
        acc += wi * row;
    }
    acc.max(0.0).sqrt()
}

/// Discrete L2 norm of `M_L^{-1} r`, with the squared norms of the four
/// components added.
pub fn residual_norm(ops: &DiscreteOperators, r: &[State]) -> f64 {
    (0..4)
        .map(|c| {
            let w: Vec<f64> = r.iter().zip(&ops.lumped).map(|(x, m)| x[c] / m).collect();
            discrete_l2_norm(ops, &w).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn entropy_residual_norm_from(
    ops: &DiscreteOperators,
    gas: &GasModel,
    u: &[State],
    r: &[State],
) -> Result<f64, SolverError> {
    let w = u
        .iter()
        .zip(r)
        .zip(&ops.lumped)
        .enumerate()
        .map(|(node, ((ui, ri), m))| {
            let p = gas.pressure_unchecked(ui);
            if !(ui[0] > 0.0 && p > 0.0) {
                return Err(SolverError::NonPositiveThermodynamicState { node, rho: ui[0], p });
            }
            let v = gas
                .entropy_variables(ui)
                .map_err(|_| SolverError::NonPositiveThermodynamicState { node, rho: ui[0], p })?;
            Ok(v.dot(&(ri / *m)))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(discrete_l2_norm(ops, &w))
}

/// `dt = cfl / max_i [(2 / m_i) sum_j d_ij]`.
pub fn compute_dt(edge: &EdgeCoefficients, ops: &DiscreteOperators, cfl: f64) -> Result<f64, SolverError> {
    let rate = edge
        .d_sum
        .iter()
        .zip(&ops.lumped)
        .map(|(d, m)| 2.0 * d / m)
        .fold(0.0, f64::max);
    if !(rate > 0.0) {
        return Err(SolverError::AllZeroViscosity);
    }
    Ok(cfl / rate)
}

/// Largest `dt` with `(2 dt / m_i) sum_j (2 lambda + eps) max(|c_ij|, |c_ji|) <= 1`
/// where `lambda` is the global maximum wave speed. The fixed-point map of
/// [`psi_s_iterate`] is a contraction for any smaller step.
pub fn contraction_dt_bound(edge: &EdgeCoefficients, ops: &DiscreteOperators, eps: f64) -> Result<f64, SolverError> {
    let lambda = edge
        .lambda_ij
        .iter()
        .chain(&edge.lambda_ji)
        .copied()
        .fold(0.0, f64::max);
    let mut sums = vec![0.0; ops.num_nodes()];
    for e in &ops.edges {
        let c = ops.cvec[e.ij].norm().max(ops.cvec[e.ji].norm());
        sums[e.i] += c;
        sums[e.j] += c;
    }
    let rate = sums
        .iter()
        .zip(&ops.lumped)
        .map(|(s, m)| 2.0 * (2.0 * lambda + eps) * s / m)
        .fold(0.0, f64::max);
    if !(rate > 0.0) {
        return Err(SolverError::AllZeroViscosity);
    }
    Ok(1.0 / rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaMode {
    Fixed(f64),
    Adaptive { k: usize, omega0: f64 },
}

impl Default for OmegaMode {
    fn default() -> Self {
        OmegaMode::Adaptive { k: 3, omega0: 0.5 }
    }
}

/// `{omega0 + (k - 1)(1 - omega0)/(K - 1) : k = 1..K}` in ascending order.
pub fn omega_candidates(k: usize, omega0: f64) -> Vec<f64> {
    (0..k).map(|j| omega0 + j as f64 * (1.0 - omega0) / (k - 1) as f64).collect()
}

/// When the Newton loop of one pseudo-time step exits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// As soon as the iterate is admissible.
    Idp,
    /// When `max |du| <= tol * max |u|` and the iterate is admissible.
    Converged { tol: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl_target: f64,
    pub cfl_warmup: f64,
    pub warmup_exit_ratio: f64,
    pub omega: OmegaMode,
    pub steady_tol: f64,
    pub hard_tol: f64,
    /// Stop at `hard_tol` instead of `steady_tol`.
    pub deep_convergence: bool,
    pub max_pseudo_steps: usize,
    pub max_newton_iters: usize,
    pub freeze_jacobian_after_first: bool,
    pub idp_slack: f64,
    pub max_dt_halvings: usize,
    pub divergence_factor: f64,
    pub stopping: StoppingRule,
    pub linear: LinearSolverSettings,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl_target: 1e4,
            cfl_warmup: 10.0,
            warmup_exit_ratio: 0.1,
            omega: OmegaMode::default(),
            steady_tol: 1e-8,
            hard_tol: 1e-13,
            deep_convergence: false,
            max_pseudo_steps: 5000,
            max_newton_iters: 20,
            freeze_jacobian_after_first: false,
            idp_slack: 0.0,
            max_dt_halvings: 5,
            divergence_factor: 1e6,
            stopping: StoppingRule::Idp,
            linear: LinearSolverSettings::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |field: &'static str, reason: &str| Err(SolverError::InvalidConfig { field, reason: reason.into() });
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.cfl_target) {
            return bad("cfl_target", "must be positive");
        }
        if !positive(self.cfl_warmup) {
            return bad("cfl_warmup", "must be positive");
        }
        if !(self.warmup_exit_ratio > 0.0 && self.warmup_exit_ratio < 1.0) {
            return bad("warmup_exit_ratio", "must lie in (0, 1)");
        }
        match self.omega {
            OmegaMode::Fixed(w) if !(w > 0.0 && w <= 1.0) => return bad("omega", "must lie in (0, 1]"),
            OmegaMode::Adaptive { k, .. } if k < 2 => return bad("omega_k", "must be at least 2"),
            OmegaMode::Adaptive { omega0, .. } if !(omega0 > 0.0 && omega0 < 1.0) => {
                return bad("omega0", "must lie in (0, 1)")
            }
            _ => {}
        }
        if !positive(self.steady_tol) {
            return bad("steady_tol", "must be positive");
        }
        if !positive(self.hard_tol) {
            return bad("hard_tol", "must be positive");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters", "must be at least 1");
        }
        if !(self.idp_slack >= 0.0) {
            return bad("idp_slack", "must be nonnegative");
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence_factor", "must exceed 1");
        }
        if !positive(self.linear.tol_rel) || self.linear.max_iter == 0 {
            return bad("linear_tol", "tolerance must be positive and max_iter at least 1");
        }
        if let StoppingRule::Converged { tol } = self.stopping {
            if !positive(tol) {
                return bad("stopping", "tolerance must be positive");
            }
        }
        Ok(())
    }

    pub fn stop_tol(&self) -> f64 {
        if self.deep_convergence {
            self.hard_tol
        } else {
            self.steady_tol
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<State>,
    pub iterations: usize,
    pub linear_iterations: usize,
    /// Time step actually used after halvings.
    pub dt: f64,
    pub halvings: usize,
}

/// One backward Euler pseudo-time step by deferred correction. `observer`
/// sees every iterate `u^(k)`, `k >= 1`.
pub fn newton_step(
    disc: &Discretization,
    u_n: &[State],
    dt: f64,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(usize, &[State]),
) -> Result<NewtonOutcome, SolverError> {
    let ev_n = disc.evaluate(u_n)?;
    newton_step_from(disc, u_n, &ev_n, dt, cfg, observer)
}

fn newton_step_from(
    disc: &Discretization,
    u_n: &[State],
    ev_n: &Evaluation,
    dt: f64,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(usize, &[State]),
) -> Result<NewtonOutcome, SolverError> {
    let scale = u_n.iter().map(|s| s.amax()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut dt = dt;
    let mut linear_iterations = 0;
    for halvings in 0..=cfg.max_dt_halvings {
        let mut u = u_n.to_vec();
        let mut ev = ev_n.clone();
        let mut jac: Option<BlockSparseMatrix> = None;
        for k in 0..cfg.max_newton_iters {
            let rhs = step_residual_from(&disc.ops, &ev, &u, u_n, dt);
            if jac.is_none() || !cfg.freeze_jacobian_after_first {
                jac = Some(disc.jacobian(&u, &ev, dt));
            }
            let zeros = vec![State::zeros(); u.len()];
            let (du, rep) = solve(jac.as_ref().expect("assembled above"), &rhs, &zeros, &cfg.linear)?;
            linear_iterations += rep.iterations;
            if !rep.converged {
                log::debug!("linear solve not converged: {rep:?}");
            }
            let mut inc = 0.0f64;
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += di;
                inc = inc.max(di.amax());
            }
            observer(k + 1, &u);
            let admissible = disc.is_admissible(&u, cfg.idp_slack).is_ok();
            let done = match cfg.stopping {
                StoppingRule::Idp => admissible,
                StoppingRule::Converged { tol } => admissible && inc <= tol * scale,
            };
            if done {
                return Ok(NewtonOutcome { u, iterations: k + 1, linear_iterations, dt, halvings });
            }
            if !inc.is_finite() {
                break;
            }
            ev = match disc.evaluate(&u) {
                Ok(ev) => ev,
                Err(e) => {
                    log::debug!("iterate {k} cannot be evaluated: {e}");
                    break;
                }
            };
        }
        if halvings < cfg.max_dt_halvings {
            log::info!("no admissible iterate at dt = {dt:e}, halving");
            dt *= 0.5;
        }
    }
    Err(SolverError::NewtonFailed { halvings: cfg.max_dt_halvings, dt })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiOutcome {
    pub u: Vec<State>,
    pub iterations: usize,
    /// Successive max-norm increment ratios.
    pub ratios: Vec<f64>,
}

/// Fixed-point iteration
/// `u_i <- (s u_i^n + u_i + (s dt / m_i)[R_L + F*]_i) / (1 + s)` started at `u^n`.
/// Stops when the max-norm increment falls below `tol * max |u^n|`.
pub fn psi_s_iterate(
    disc: &Discretization,
    u_n: &[State],
    s: f64,
    dt: f64,
    tol: f64,
    max_iter: usize,
    observer: &mut dyn FnMut(usize, &[State]),
) -> Result<PsiOutcome, SolverError> {
    let scale = u_n.iter().map(|x| x.amax()).fold(0.0, f64::max);
    let mut u = u_n.to_vec();
    let mut ratios = Vec::new();
    let mut prev = f64::NAN;
    let mut growing = 0;
    for it in 1..=max_iter {
        let r = disc.steady_residual(&u)?;
        let mut inc = 0.0f64;
        let next: Vec<State> = (0..u.len())
            .map(|i| (u_n[i] * s + u[i] + r[i] * (s * dt / disc.ops.lumped[i])) / (1.0 + s))
            .collect();
        for (a, b) in next.iter().zip(&u) {
            inc = inc.max((a - b).amax());
        }
        u = next;
        observer(it, &u);
        if let Err(node) = disc.is_admissible(&u, 0.0) {
            return Err(SolverError::InadmissibleIterate { node });
        }
        if inc <= tol * scale {
            return Ok(PsiOutcome { u, iterations: it, ratios });
        }
        if prev > 0.0 {
            let ratio = inc / prev;
            ratios.push(ratio);
            growing = if ratio >= 1.0 { growing + 1 } else { 0 };
            if growing >= 50 {
                return Err(SolverError::NonContractive { iterations: it });
            }
        }
        prev = inc;
    }
    Err(SolverError::NonContractive { iterations: max_iter })
}

/// Picks the candidate minimizing the entropy-residual norm of
/// `u^n + omega du`; ties go to the largest candidate. Also returns the norms.
pub fn choose_omega(
    disc: &Discretization,
    u_n: &[State],
    du: &[State],
    candidates: &[f64],
) -> Result<(f64, Vec<f64>), SolverError> {
    let mut best = (f64::NAN, f64::INFINITY);
    let mut norms = Vec::with_capacity(candidates.len());
    for &w in candidates {
        let trial: Vec<State> = u_n.iter().zip(du).map(|(a, b)| a + b * w).collect();
        let norm = disc.entropy_residual_norm(&trial)?;
        norms.push(norm);
        if norm < best.1 || (norm == best.1 && w > best.0) || best.0.is_nan() {
            best = (w, norm);
        }
    }
    Ok((best.0, norms))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub step: usize,
    pub dt: f64,
    pub residual: f64,
    pub entropy_residual: f64,
    pub omega: f64,
    pub newton_iters: usize,
    pub linear_iters: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SteadyStatus {
    Converged,
    MaxStepsExceeded,
    Diverged,
    Failed(SolverError),
}

#[derive(Debug, Clone)]
pub struct SteadyRun {
    pub u: Vec<State>,
    pub records: Vec<ConvergenceRecord>,
    pub status: SteadyStatus,
}

impl SteadyRun {
    pub fn converged(&self) -> bool {
        self.status == SteadyStatus::Converged
    }

    /// Pseudo-time steps taken.
    pub fn steps(&self) -> usize {
        self.records.last().map_or(0, |r| r.step)
    }
}

pub fn run_to_steady(disc: &Discretization, u0: &[State], cfg: &SolverConfig) -> Result<SteadyRun, SolverError> {
    run_to_steady_with(disc, u0, cfg, &mut |_, _| {}, &mut |_| {})
}

/// Like [`run_to_steady`]; `on_record` sees each record with the accepted
/// state and `on_iterate` every Newton iterate.
pub fn run_to_steady_with(
    disc: &Discretization,
    u0: &[State],
    cfg: &SolverConfig,
    on_record: &mut dyn FnMut(&ConvergenceRecord, &[State]),
    on_iterate: &mut dyn FnMut(&[State]),
) -> Result<SteadyRun, SolverError> {
    cfg.validate()?;
    if let Err(node) = disc.is_admissible(u0, cfg.idp_slack) {
        return Err(SolverError::IdpViolation { node });
    }
    let tol = cfg.stop_tol();
    let started = Instant::now();
    let mut u = u0.to_vec();
    let mut ev = disc.evaluate(&u)?;
    let mut r = ev.steady_residual();
    let r0 = residual_norm(&disc.ops, &r);
    let first = ConvergenceRecord {
        step: 0,
        dt: 0.0,
        residual: r0,
        entropy_residual: entropy_residual_norm_from(&disc.ops, &disc.gas, &u, &r)?,
        omega: 1.0,
        newton_iters: 0,
        linear_iters: 0,
        wall_ms: 0.0,
    };
    on_record(&first, &u);
    let mut records = vec![first];
    let finish = |u, records, status| Ok(SteadyRun { u, records, status });
    if r0 < tol {
        return finish(u, records, SteadyStatus::Converged);
    }
    let mut warming = cfg.cfl_target > cfg.cfl_warmup;
    let mut r_min = r0;
    let mut r_cur = r0;
    for step in 1..=cfg.max_pseudo_steps {
        if warming && r_cur < cfg.warmup_exit_ratio * r0 {
            warming = false;
            log::info!("warm-up finished after {} steps", step - 1);
        }
        let cfl = if warming { cfg.cfl_warmup } else { cfg.cfl_target };
        let dt = compute_dt(&ev.edge, &disc.ops, cfl)?;
        let outcome = match newton_step_from(disc, &u, &ev, dt, cfg, &mut |_, it| on_iterate(it)) {
            Ok(o) => o,
            Err(e) => return finish(u, records, SteadyStatus::Failed(e)),
        };
        let du: Vec<State> = outcome.u.iter().zip(&u).map(|(a, b)| a - b).collect();
        let omega = match cfg.omega {
            OmegaMode::Fixed(w) => w,
            OmegaMode::Adaptive { k, omega0 } => match choose_omega(disc, &u, &du, &omega_candidates(k, omega0)) {
                Ok((w, _)) => w,
                Err(e) => return finish(u, records, SteadyStatus::Failed(e)),
            },
        };
        let next: Vec<State> = u.iter().zip(&du).map(|(a, b)| a + b * omega).collect();
        if let Err(node) = disc.is_admissible(&next, cfg.idp_slack) {
            return finish(u, records, SteadyStatus::Failed(SolverError::IdpViolation { node }));
        }
        u = next;
        ev = match disc.evaluate(&u) {
            Ok(ev) => ev,
            Err(e) => return finish(u, records, SteadyStatus::Failed(e)),
        };
        r = ev.steady_residual();
        r_cur = residual_norm(&disc.ops, &r);
        let entropy_residual = entropy_residual_norm_from(&disc.ops, &disc.gas, &u, &r).unwrap_or(f64::NAN);
        let rec = ConvergenceRecord {
            step,
            dt: outcome.dt,
            residual: r_cur,
            entropy_residual,
            omega,
            newton_iters: outcome.iterations,
            linear_iters: outcome.linear_iterations,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        on_record(&rec, &u);
        records.push(rec);
        log::debug!("step {step}: r = {r_cur:e}, omega = {omega}, newton = {}", outcome.iterations);
        if !r_cur.is_finite() || r_cur > cfg.divergence_factor * r_min {
            return finish(u, records, SteadyStatus::Diverged);
        }
        r_min = r_min.min(r_cur);
        if r_cur < tol {
            return finish(u, records, SteadyStatus::Converged);
        }
    }
    finish(u, records, SteadyStatus::MaxStepsExceeded)
}
