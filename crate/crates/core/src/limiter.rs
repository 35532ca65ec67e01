//! Sequential monolithic convex limiting.
//!
//! Limited bar states use the convention `ubar*_ij = ubar_ij + f*_ij / (2 d_ij)`
//! and `ubar*_ji = ubar_ji - f*_ij / (2 d_ij)`. Fluxes are stored once per
//! undirected edge in the `i -> j` orientation of [`Edge`], so `f*_ji = -f*_ij`
//! and `alpha_ji = alpha_ij` hold by construction.

use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{DiscreteOperators, Edge};
use crate::euler::{GasModel, State};
use crate::low_order::{
    accumulate_boundary, edge_coefficients_with_fluxes, nodal_fluxes, residual_from_parts, BoundaryConditions,
    EdgeCoefficients, LowOrderError,
};

/// Edges whose viscosity falls below this fraction of the largest one keep
/// their low-order bar states.
pub const VISCOSITY_GUARD: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimiterError {
    #[error(transparent)]
    LowOrder(#[from] LowOrderError),
    #[error("bar densities sum to {0}, cannot form the averaged specific quantity")]
    DegenerateBarDensity(f64),
}

/// How the antidiffusive correction `F*` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// `F* = 0`.
    LowOrder,
    /// Limited target fluxes.
    #[default]
    Mcl,
    /// Raw target fluxes with `alpha = 1` (not invariant-domain preserving).
    Unlimited,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::LowOrder => "low_order",
            Scheme::Mcl => "mcl",
            Scheme::Unlimited => "unlimited",
        }
    }
}

/// Data of one undirected pair needed by the limiter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBars {
    pub d: f64,
    pub ij: State,
    pub ji: State,
}

/// Local bounds of node `i`. Index 0 is the density, indices 1..=3 are
/// `v1`, `v2` and the specific total energy `E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBounds {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl LocalBounds {
    fn empty() -> Self {
        Self { min: [f64::INFINITY; 4], max: [f64::NEG_INFINITY; 4] }
    }

    fn include(&mut self, q: &[f64; 4]) {
        for k in 0..4 {
            self.min[k] = self.min[k].min(q[k]);
            self.max[k] = self.max[k].max(q[k]);
        }
    }
}

/// `(rho, v1, v2, E)` of a state with positive density.
fn specific(u: &State) -> [f64; 4] {
    [u[0], u[1] / u[0], u[2] / u[0], u[3] / u[0]]
}

/// Density and `phibar_ij = ((rho phi)bar_ij + (rho phi)bar_ji) / (rhobar_ij + rhobar_ji)`.
pub fn averaged_specific(pair: &PairBars) -> Result<[f64; 4], LimiterError> {
    let rho = pair.ij[0] + pair.ji[0];
    if !(rho > 0.0) {
        return Err(LimiterError::DegenerateBarDensity(rho));
    }
    Ok([
        pair.ij[0],
        (pair.ij[1] + pair.ji[1]) / rho,
        (pair.ij[2] + pair.ji[2]) / rho,
        (pair.ij[3] + pair.ji[3]) / rho,
    ])
}

/// `udot_i = (R_L)_i / m_i`.
pub fn low_order_time_derivatives(
    u: &[State],
    ops: &DiscreteOperators,
    bcs: &BoundaryConditions,
    gas: &GasModel,
) -> Result<Vec<State>, LimiterError> {
    let r = crate::low_order::low_order_residual(u, ops, bcs, gas)?;
    Ok(r.iter().zip(&ops.lumped).map(|(ri, mi)| ri / *mi).collect())
}

/// `f_ij = m_ij (udot_i - udot_j) + d_ij (u_i - u_j)` per undirected edge.
pub fn target_fluxes(u: &[State], udot: &[State], ops: &DiscreteOperators, edge: &EdgeCoefficients) -> Vec<State> {
    ops.edges
        .par_iter()
        .zip(edge.d.par_iter())
        .map(|(e, d)| (udot[e.i] - udot[e.j]) * ops.mass[e.ij] + (u[e.i] - u[e.j]) * *d)
        .collect()
}

/// Local bounds over `{q_j : j in N_i} ∪ {qbar_ij : j in N_i*}` where `q` is
/// `(rho, v1, v2, E)` and `qbar_ij = (rhobar_ij, phibar_ij)`.
pub fn node_bounds(u: &[State], edge: &EdgeCoefficients, ops: &DiscreteOperators) -> Result<Vec<LocalBounds>, LimiterError> {
    let mut b: Vec<LocalBounds> = u
        .iter()
        .map(|ui| {
            let mut lb = LocalBounds::empty();
            lb.include(&specific(ui));
            lb
        })
        .collect();
    for (k, e) in ops.edges.iter().enumerate() {
        let (qi, qj) = (specific(&u[e.i]), specific(&u[e.j]));
        b[e.i].include(&qj);
        b[e.j].include(&qi);
        if edge.d[k] > 0.0 {
            let pair = PairBars { d: edge.d[k], ij: edge.bar_ij[k], ji: edge.bar_ji[k] };
            let mut avg = averaged_specific(&pair)?;
            b[e.i].include(&avg);
            avg[0] = pair.ji[0];
            b[e.j].include(&avg);
        }
    }
    Ok(b)
}

/// Density limiter keeping `rhobar*_ij` in `[rho_i^min, rho_i^max]` and
/// `rhobar*_ji` in `[rho_j^min, rho_j^max]`.
pub fn limit_density(f: f64, pair: &PairBars, bi: &LocalBounds, bj: &LocalBounds) -> f64 {
    let d2 = 2.0 * pair.d;
    if f > 0.0 {
        f.min(d2 * (bi.max[0] - pair.ij[0]).min(pair.ji[0] - bj.min[0]))
    } else {
        f.max(d2 * (bi.min[0] - pair.ij[0]).max(pair.ji[0] - bj.max[0]))
    }
}

/// Product-rule limiter for component `k in 1..=3` given the already limited
/// density flux.
pub fn limit_product(
    k: usize,
    f: f64,
    f_rho: f64,
    pair: &PairBars,
    bi: &LocalBounds,
    bj: &LocalBounds,
) -> Result<f64, LimiterError> {
    let d2 = 2.0 * pair.d;
    let phi = averaged_specific(pair)?[k];
    let rho_ij = pair.ij[0] + f_rho / d2;
    let rho_ji = pair.ji[0] - f_rho / d2;
    let shift = d2 * (pair.ij[k] - rho_ij * phi);
    let g = f + shift;
    let g_star = if g > 0.0 {
        let g_max = (d2 * rho_ij * (bi.max[k] - phi)).min(d2 * rho_ji * (phi - bj.min[k]));
        g.min(g_max)
    } else {
        let g_min = (d2 * rho_ij * (bi.min[k] - phi)).max(d2 * rho_ji * (phi - bj.max[k]));
        g.max(g_min)
    };
    Ok(g_star - shift)
}

/// `P_ij(alpha)` and `Q_ij` of the pressure constraint for the `ij` bar state.
pub fn pressure_quadratic(f: &State, d: f64, bar: &State, alpha: f64) -> (f64, f64) {
    let d2 = 2.0 * d;
    let fm2 = f[1] * f[1] + f[2] * f[2];
    let p = alpha * alpha * (0.5 * fm2 - f[3] * f[0])
        + d2 * alpha * (bar[1] * f[1] + bar[2] * f[2] - bar[0] * f[3] - bar[3] * f[0]);
    let q = d2 * d2 * (bar[0] * bar[3] - 0.5 * (bar[1] * bar[1] + bar[2] * bar[2]));
    (p, q)
}

/// Symmetric pressure fix for the prelimited flux `f*`.
pub fn pressure_fix(f: &State, pair: &PairBars) -> f64 {
    let d2 = 2.0 * pair.d;
    let (_, q_ij) = pressure_quadratic(f, pair.d, &pair.ij, 0.0);
    let (_, q_ji) = pressure_quadratic(&-f, pair.d, &pair.ji, 0.0);
    let q = q_ij.min(q_ji);
    let norm_m = |s: &State| (s[1] * s[1] + s[2] * s[2]).sqrt();
    let fm = norm_m(f);
    let r_max = d2
        * (norm_m(&pair.ij).max(norm_m(&pair.ji)) * fm
            + pair.ij[0].max(pair.ji[0]) * f[3].abs()
            + pair.ij[3].max(pair.ji[3]) * f[0].abs())
        + (0.5 * fm * fm - f[3] * f[0]).max(0.0);
    if r_max > q {
        // q < 0 only for inadmissible low-order bar states
        (q / r_max).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Full sequential pipeline on one pair: density, `v1`, `v2`, `E`, pressure.
pub fn limit_pair(f: &State, pair: &PairBars, bi: &LocalBounds, bj: &LocalBounds) -> Result<(State, f64), LimiterError> {
    let mut fs = State::zeros();
    fs[0] = limit_density(f[0], pair, bi, bj);
    for k in 1..4 {
        fs[k] = limit_product(k, f[k], fs[0], pair, bi, bj)?;
    }
    let alpha = pressure_fix(&fs, pair);
    Ok((fs, alpha))
}

/// Prelimited fluxes, correction factors and the bounds they were limited to.
#[derive(Debug, Clone)]
pub struct LimitedFluxes {
    pub fstar: Vec<State>,
    pub alpha: Vec<f64>,
    pub bounds: Vec<LocalBounds>,
}

impl LimitedFluxes {
    /// `alpha_ij f*_ij` in the orientation `from -> to` of edge `e`.
    pub fn directed(&self, k: usize, e: &Edge, from: usize) -> State {
        let f = self.fstar[k] * self.alpha[k];
        if from == e.i {
            f
        } else {
            -f
        }
    }
}

pub fn limit_fluxes(
    u: &[State],
    target: &[State],
    edge: &EdgeCoefficients,
    ops: &DiscreteOperators,
) -> Result<LimitedFluxes, LimiterError> {
    let bounds = node_bounds(u, edge, ops)?;
    let d_max = edge.d.iter().copied().fold(0.0, f64::max);
    let limited: Vec<(State, f64)> = ops
        .edges
        .par_iter()
        .enumerate()
        .map(|(k, e)| {
            let pair = PairBars { d: edge.d[k], ij: edge.bar_ij[k], ji: edge.bar_ji[k] };
            if !(pair.d > VISCOSITY_GUARD * d_max) || !(pair.ij[0] + pair.ji[0] > 0.0) {
                return Ok((State::zeros(), 0.0));
            }
            limit_pair(&target[k], &pair, &bounds[e.i], &bounds[e.j])
        })
        .collect::<Result<_, LimiterError>>()?;
    let (fstar, alpha) = limited.into_iter().unzip();
    Ok(LimitedFluxes { fstar, alpha, bounds })
}

/// `F*_i = sum_j alpha_ij f*_ij` from per-edge fluxes already scaled by alpha.
pub fn scatter_edge_fluxes(flux: impl Iterator<Item = State>, ops: &DiscreteOperators) -> Vec<State> {
    let mut out = vec![State::zeros(); ops.num_nodes()];
    for (f, e) in flux.zip(&ops.edges) {
        out[e.i] += f;
        out[e.j] -= f;
    }
    out
}

/// `F*` from precomputed low-order data; `r_low` is `R_L(u)`.
pub(crate) fn antidiffusion_from_parts(
    scheme: Scheme,
    u: &[State],
    r_low: &[State],
    edge: &EdgeCoefficients,
    ops: &DiscreteOperators,
) -> Result<Vec<State>, LimiterError> {
    if scheme == Scheme::LowOrder {
        return Ok(vec![State::zeros(); ops.num_nodes()]);
    }
    let udot: Vec<State> = r_low.iter().zip(&ops.lumped).map(|(r, m)| r / *m).collect();
    let target = target_fluxes(u, &udot, ops, edge);
    if scheme == Scheme::Unlimited {
        return Ok(scatter_edge_fluxes(target.into_iter(), ops));
    }
    let lim = limit_fluxes(u, &target, edge, ops)?;
    Ok(scatter_edge_fluxes(lim.fstar.iter().zip(&lim.alpha).map(|(f, a)| f * *a), ops))
}

/// Corrected antidiffusion `F*` of the monolithic convex limiting scheme.
pub fn corrected_antidiffusion(
    u: &[State],
    ops: &DiscreteOperators,
    bcs: &BoundaryConditions,
    gas: &GasModel,
) -> Result<Vec<State>, LimiterError> {
    let fluxes = nodal_fluxes(u, gas)?;
    let edge = edge_coefficients_with_fluxes(u, &fluxes, ops, gas)?;
    let bnd = accumulate_boundary(u, ops, bcs, gas)?;
    let r_low = residual_from_parts(u, &fluxes, &edge, &bnd.b_tilde, ops);
    antidiffusion_from_parts(Scheme::Mcl, u, &r_low, &edge, ops)
}
