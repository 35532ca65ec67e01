//! Invariant-domain-preserving low-order semi-discretization.
//!
//! The residual of node `i` is
//! `b~_i + sum_j [d_ij (u_j - u_i) - (f_j - f_i) . c_ij] = b~_i + sum_j 2 d_ij (ubar_ij - u_i)`
//! with Rusanov graph viscosity `d_ij` and weakly imposed boundary conditions
//! through a local Lax-Friedrichs flux.

use std::collections::BTreeMap;

use nalgebra::{Matrix4, Vector2};
use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::DiscreteOperators;
use crate::euler::{Conserved, EulerError, Flux, GasModel, State};
use crate::mesh::PatchId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowOrderError {
    #[error(transparent)]
    Euler(#[from] EulerError),
    #[error("zero graph viscosity on edge ({i}, {j}) with nonzero c_ij")]
    ZeroViscosityEdge { i: usize, j: usize },
    #[error("node {node}: density {rho} is not positive")]
    NonPositiveDensity { node: usize, rho: f64 },
    #[error("no boundary condition for patch {0}")]
    MissingBoundaryCondition(PatchId),
    #[error("external state is not admissible: {0:?}")]
    InadmissibleExternalState([f64; 4]),
}

/// Weakly imposed boundary condition on one patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// Free stream / subsonic inflow: the external state is the stored state.
    Farfield(State),
    /// External state equals the internal state.
    SupersonicOutlet,
    /// Mirror the normal momentum.
    ReflectingWall,
    /// Keep density and velocity, prescribe the pressure.
    SubsonicOutletPressure(f64),
}

impl BoundaryCondition {
    /// Transformation matrix `B^` with `u^ = B^ u`, if the external state is
    /// a linear function of the internal one.
    pub fn transformation(&self, n: &Vector2<f64>) -> Option<Matrix4<f64>> {
        match self {
            BoundaryCondition::SupersonicOutlet => Some(Matrix4::identity()),
            BoundaryCondition::ReflectingWall => {
                let (n1, n2) = (n.x, n.y);
                Some(Matrix4::new(
                    1.0,
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                    1.0 - 2.0 * n1 * n1,
                    -2.0 * n1 * n2,
                    0.0,
                    0.0,
                    -2.0 * n2 * n1,
                    1.0 - 2.0 * n2 * n2,
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                    1.0,
                ))
            }
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BoundaryCondition::Farfield(_) => "farfield",
            BoundaryCondition::SupersonicOutlet => "supersonic_outlet",
            BoundaryCondition::ReflectingWall => "wall",
            BoundaryCondition::SubsonicOutletPressure(_) => "pressure_outlet",
        }
    }
}

/// Patch id -> boundary condition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions(pub BTreeMap<PatchId, BoundaryCondition>);

impl BoundaryConditions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, patch: PatchId, bc: BoundaryCondition) -> Self {
        self.0.insert(patch, bc);
        self
    }

    pub fn get(&self, patch: PatchId) -> Result<&BoundaryCondition, LowOrderError> {
        self.0.get(&patch).ok_or(LowOrderError::MissingBoundaryCondition(patch))
    }
}

/// External state `u^_i` of a weakly imposed boundary condition.
pub fn external_state(
    bc: &BoundaryCondition,
    u: &State,
    n: &Vector2<f64>,
    gas: &GasModel,
) -> Result<State, LowOrderError> {
    let ext = match bc {
        BoundaryCondition::Farfield(s) => *s,
        BoundaryCondition::SupersonicOutlet => *u,
        BoundaryCondition::ReflectingWall => {
            let m = u.momentum();
            let mr = m - n * (2.0 * m.dot(n));
            State::new(u[0], mr.x, mr.y, u[3])
        }
        BoundaryCondition::SubsonicOutletPressure(p_out) => {
            if !(u.rho() > 0.0) {
                return Err(EulerError::NonPositiveDensity(u.rho()).into());
            }
            let kinetic = 0.5 * u.momentum().norm_squared() / u.rho();
            State::new(u[0], u[1], u[2], p_out / (gas.gamma() - 1.0) + kinetic)
        }
    };
    if !gas.is_admissible(&ext, 0.0) || !(ext.rho() > 0.0) {
        return Err(LowOrderError::InadmissibleExternalState([ext[0], ext[1], ext[2], ext[3]]));
    }
    Ok(ext)
}

/// Boundary integral of one boundary edge at one node and its algebraic
/// splitting `b_tilde = block * u + b_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTerm {
    pub b_tilde: State,
    pub block: Matrix4<f64>,
    pub b_hat: State,
}

pub fn boundary_term(
    u: &State,
    bc: &BoundaryCondition,
    weight: f64,
    n: &Vector2<f64>,
    gas: &GasModel,
) -> Result<BoundaryTerm, LowOrderError> {
    if !(u.rho() > 0.0) || !u.iter().all(|x| x.is_finite()) {
        return Err(EulerError::NonPositiveDensity(u.rho()).into());
    }
    let ext = external_state(bc, u, n, gas)?;
    let lambda = gas
        .max_wave_speed_unchecked(u, n)
        .max(gas.max_wave_speed_unchecked(&ext, n));
    let fu = gas.flux_unchecked(u) * n;
    let fe = gas.flux_unchecked(&ext) * n;
    let b_tilde = ((fu - fe) * 0.5 + (ext - u) * (0.5 * lambda)) * weight;
    let a_u = gas.directional_jacobian_unchecked(u, n);
    let term = match bc.transformation(n) {
        Some(bt) => {
            let a_e = gas.directional_jacobian_unchecked(&ext, n);
            let block = ((a_u - a_e * bt) * 0.5 + (bt - Matrix4::identity()) * (0.5 * lambda)) * weight;
            BoundaryTerm { b_tilde, block, b_hat: State::zeros() }
        }
        None => {
            let block = (a_u * 0.5 - Matrix4::identity() * (0.5 * lambda)) * weight;
            let b_hat = (ext * (0.5 * lambda) - fe * 0.5) * weight;
            BoundaryTerm { b_tilde, block, b_hat }
        }
    };
    Ok(term)
}

/// Per-node sums of all boundary terms.
#[derive(Debug, Clone)]
pub struct BoundaryAccumulation {
    pub b_tilde: Vec<State>,
    pub block: Vec<Matrix4<f64>>,
    pub b_hat: Vec<State>,
}

pub fn accumulate_boundary(
    u: &[State],
    ops: &DiscreteOperators,
    bcs: &BoundaryConditions,
    gas: &GasModel,
) -> Result<BoundaryAccumulation, LowOrderError> {
    let n = ops.num_nodes();
    let mut acc = BoundaryAccumulation {
        b_tilde: vec![State::zeros(); n],
        block: vec![Matrix4::zeros(); n],
        b_hat: vec![State::zeros(); n],
    };
    for bw in &ops.boundary {
        let bc = bcs.get(bw.patch)?;
        let t = boundary_term(&u[bw.node], bc, bw.weight, &bw.normal, gas)?;
        acc.b_tilde[bw.node] += t.b_tilde;
        acc.block[bw.node] += t.block;
        acc.b_hat[bw.node] += t.b_hat;
    }
    Ok(acc)
}

/// Graph viscosity, wave speeds and bar states on every undirected edge.
#[derive(Debug, Clone)]
pub struct EdgeCoefficients {
    /// `d_ij = d_ji` per edge (in `ops.edges` order).
    pub d: Vec<f64>,
    pub lambda_ij: Vec<f64>,
    pub lambda_ji: Vec<f64>,
    pub bar_ij: Vec<State>,
    pub bar_ji: Vec<State>,
    /// `sum_{j != i} d_ij`, i.e. `-d_ii`.
    pub d_sum: Vec<f64>,
}

impl EdgeCoefficients {
    pub fn d_diag(&self, i: usize) -> f64 {
        -self.d_sum[i]
    }
}

/// Nodal fluxes; requires positive density (negative pressures are tolerated
/// so that intermediate iterates can be evaluated).
pub fn nodal_fluxes(u: &[State], gas: &GasModel) -> Result<Vec<Flux>, LowOrderError> {
    u.iter()
        .enumerate()
        .map(|(node, s)| {
            if !(s.rho() > 0.0) || !s.iter().all(|x| x.is_finite()) {
                Err(LowOrderError::NonPositiveDensity { node, rho: s.rho() })
            } else {
                Ok(gas.flux_unchecked(s))
            }
        })
        .collect()
}

/// Bar state `(u_i + u_j)/2 - (f_j - f_i) . c_ij / (2 d_ij)`.
#[inline]
pub fn bar_state(ui: &State, uj: &State, fi: &Flux, fj: &Flux, c_ij: &Vector2<f64>, d: f64) -> State {
    (ui + uj) * 0.5 - (fj - fi) * c_ij / (2.0 * d)
}

pub fn compute_edge_coefficients(
    u: &[State],
    ops: &DiscreteOperators,
    gas: &GasModel,
) -> Result<EdgeCoefficients, LowOrderError> {
    let fluxes = nodal_fluxes(u, gas)?;
    edge_coefficients_with_fluxes(u, &fluxes, ops, gas)
}

pub(crate) fn edge_coefficients_with_fluxes(
    u: &[State],
    fluxes: &[Flux],
    ops: &DiscreteOperators,
    gas: &GasModel,
) -> Result<EdgeCoefficients, LowOrderError> {
    let per_edge: Vec<(f64, f64, f64, State, State)> = ops
        .edges
        .par_iter()
        .map(|e| {
            let (ui, uj) = (&u[e.i], &u[e.j]);
            let (cij, cji) = (ops.cvec[e.ij], ops.cvec[e.ji]);
            let speed = |c: &Vector2<f64>| {
                let len = c.norm();
                if len == 0.0 {
                    return (0.0, 0.0);
                }
                let n = c / len;
                let lam = gas
                    .max_wave_speed_unchecked(ui, &n)
                    .max(gas.max_wave_speed_unchecked(uj, &n));
                (lam, lam * len)
            };
            let (lij, dij) = speed(&cij);
            let (lji, dji) = speed(&cji);
            let d = dij.max(dji);
            if !(d > 0.0) {
                if cij.norm() > 0.0 || cji.norm() > 0.0 {
                    return Err(LowOrderError::ZeroViscosityEdge { i: e.i, j: e.j });
                }
                let avg = (ui + uj) * 0.5;
                return Ok((0.0, lij, lji, avg, avg));
            }
            let bij = bar_state(ui, uj, &fluxes[e.i], &fluxes[e.j], &cij, d);
            let bji = bar_state(uj, ui, &fluxes[e.j], &fluxes[e.i], &cji, d);
            Ok((d, lij, lji, bij, bji))
        })
        .collect::<Result<_, _>>()?;

    let n_edges = ops.edges.len();
    let mut ec = EdgeCoefficients {
        d: Vec::with_capacity(n_edges),
        lambda_ij: Vec::with_capacity(n_edges),
        lambda_ji: Vec::with_capacity(n_edges),
        bar_ij: Vec::with_capacity(n_edges),
        bar_ji: Vec::with_capacity(n_edges),
        d_sum: vec![0.0; ops.num_nodes()],
    };
    for (e, (d, lij, lji, bij, bji)) in ops.edges.iter().zip(per_edge) {
        ec.d.push(d);
        ec.lambda_ij.push(lij);
        ec.lambda_ji.push(lji);
        ec.bar_ij.push(bij);
        ec.bar_ji.push(bji);
        ec.d_sum[e.i] += d;
        ec.d_sum[e.j] += d;
    }
    Ok(ec)
}

/// Low-order residual from precomputed pieces:
/// `b~_i + sum_j [d_ij (u_j - u_i) - (f_j - f_i) . c_ij]`.
pub(crate) fn residual_from_parts(
    u: &[State],
    fluxes: &[Flux],
    edge: &EdgeCoefficients,
    b_tilde: &[State],
    ops: &DiscreteOperators,
) -> Vec<State> {
    let mut r = b_tilde.to_vec();
    for (k, e) in ops.edges.iter().enumerate() {
        let diff = u[e.j] - u[e.i];
        let df = fluxes[e.j] - fluxes[e.i];
        let d = edge.d[k];
        r[e.i] += diff * d - df * ops.cvec[e.ij];
        r[e.j] += -diff * d + df * ops.cvec[e.ji];
    }
    r
}

pub fn low_order_residual(
    u: &[State],
    ops: &DiscreteOperators,
    bcs: &BoundaryConditions,
    gas: &GasModel,
) -> Result<Vec<State>, LowOrderError> {
    let fluxes = nodal_fluxes(u, gas)?;
    let edge = edge_coefficients_with_fluxes(u, &fluxes, ops, gas)?;
    let bnd = accumulate_boundary(u, ops, bcs, gas)?;
    Ok(residual_from_parts(u, &fluxes, &edge, &bnd.b_tilde, ops))
}

/// The same residual written with bar states: `b~_i + sum_j 2 d_ij (ubar_ij - u_i)`.
pub fn low_order_residual_bar_form(
    u: &[State],
    ops: &DiscreteOperators,
    bcs: &BoundaryConditions,
    gas: &GasModel,
) -> Result<Vec<State>, LowOrderError> {
    let edge = compute_edge_coefficients(u, ops, gas)?;
    let bnd = accumulate_boundary(u, ops, bcs, gas)?;
    let mut r = bnd.b_tilde;
    for (k, e) in ops.edges.iter().enumerate() {
        let d2 = 2.0 * edge.d[k];
        r[e.i] += (edge.bar_ij[k] - u[e.i]) * d2;
        r[e.j] += (edge.bar_ji[k] - u[e.j]) * d2;
    }
    Ok(r)
}
