//! Block-CSR matrices with 4x4 blocks, the low-order Jacobian and a
//! right-preconditioned BiCGSTAB solver.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix4};
use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{DiscreteOperators, SparsityPattern};
use crate::euler::{GasModel, State};
use crate::low_order::EdgeCoefficients;

pub type Block = Matrix4<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("diagonal block of row {0} is singular")]
    SingularDiagonalBlock(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseMatrix {
    pub pattern: Arc<SparsityPattern>,
    pub blocks: Vec<Block>,
}

impl BlockSparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        Self { pattern, blocks: vec![Block::zeros(); nnz] }
    }

    /// Block-diagonal matrix on the given pattern.
    pub fn block_diagonal(pattern: Arc<SparsityPattern>, diag: &[Block]) -> Self {
        let mut m = Self::zeros(pattern);
        for (i, b) in diag.iter().enumerate() {
            let k = m.pattern.diag[i];
            m.blocks[k] = *b;
        }
        m
    }

    pub fn num_rows(&self) -> usize {
        self.pattern.num_rows()
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&Block> {
        self.pattern.find(i, j).map(|k| &self.blocks[k])
    }

    pub fn matvec(&self, x: &[State]) -> Vec<State> {
        let p = &self.pattern;
        (0..self.num_rows())
            .into_par_iter()
            .map(|i| {
                let mut acc = State::zeros();
                for k in p.row(i) {
                    acc += self.blocks[k] * x[p.col_idx[k]];
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.num_rows();
        let mut d = DMatrix::zeros(4 * n, 4 * n);
        for i in 0..n {
            for k in self.pattern.row(i) {
                let j = self.pattern.col_idx[k];
                d.fixed_view_mut::<4, 4>(4 * i, 4 * j).copy_from(&self.blocks[k]);
            }
        }
        d
    }
}

/// Edge index of every CSR entry (`usize::MAX` on the diagonal).
fn entry_edges(ops: &DiscreteOperators) -> Vec<usize> {
    let mut out = vec![usize::MAX; ops.pattern.nnz()];
    for (k, e) in ops.edges.iter().enumerate() {
        out[e.ij] = k;
        out[e.ji] = k;
    }
    out
}

/// `J_L = M_L + dt [A - B - D]` with `A_ij = c_ij . A(u_j)`, `D_ij = d_ij I`
/// and the block-diagonal boundary matrix `B` given per node.
pub fn assemble_jacobian(
    u: &[State],
    ops: &DiscreteOperators,
    edge: &EdgeCoefficients,
    boundary_blocks: &[Block],
    dt: f64,
    gas: &GasModel,
) -> BlockSparseMatrix {
    let pair = |s: &State| gas.flux_jacobians_unchecked(s);
    let jac: Vec<_> = u.par_iter().map(pair).collect();
    let edges = entry_edges(ops);
    let p = &ops.pattern;
    let rows: Vec<Vec<Block>> = (0..ops.num_nodes())
        .into_par_iter()
        .map(|i| {
            p.row(i)
                .map(|k| {
                    let j = p.col_idx[k];
                    let a = jac[j].directional(&ops.cvec[k]);
                    if j == i {
                        Block::identity() * ops.lumped[i]
                            + (a - boundary_blocks[i] + Block::identity() * edge.d_sum[i]) * dt
                    } else {
                        (a - Block::identity() * edge.d[edges[k]]) * dt
                    }
                })
                .collect()
        })
        .collect();
    BlockSparseMatrix { pattern: ops.pattern.clone(), blocks: rows.into_iter().flatten().collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    Ilu0,
    BlockJacobi,
}

/// Block ILU(0) factors on the matrix pattern, or inverse diagonal blocks.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    pattern: Arc<SparsityPattern>,
    /// ILU(0): strict lower part holds L, upper part U; empty for block-Jacobi.
    factors: Vec<Block>,
    diag_inv: Vec<Block>,
}

impl Preconditioner {
    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn block_jacobi(mat: &BlockSparseMatrix) -> Result<Self, LinalgError> {
        let diag_inv = (0..mat.num_rows())
            .map(|i| {
                mat.blocks[mat.pattern.diag[i]]
                    .try_inverse()
                    .ok_or(LinalgError::SingularDiagonalBlock(i))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { kind: PreconditionerKind::BlockJacobi, pattern: mat.pattern.clone(), factors: Vec::new(), diag_inv })
    }

    pub fn ilu0(mat: &BlockSparseMatrix) -> Result<Self, LinalgError> {
        let p = &mat.pattern;
        let n = p.num_rows();
        let mut a = mat.blocks.clone();
        let mut diag_inv = vec![Block::zeros(); n];
        for i in 0..n {
            let row = p.row(i);
            for kk in row.clone() {
                let k = p.col_idx[kk];
                if k >= i {
                    break;
                }
                let lik = a[kk] * diag_inv[k];
                a[kk] = lik;
                for jj in (kk + 1)..row.end {
                    let j = p.col_idx[jj];
                    if let Some(kj) = p.find(k, j) {
                        let akj = a[kj];
                        a[jj] -= lik * akj;
                    }
                }
            }
            diag_inv[i] = a[p.diag[i]].try_inverse().ok_or(LinalgError::SingularDiagonalBlock(i))?;
        }
        Ok(Self { kind: PreconditionerKind::Ilu0, pattern: mat.pattern.clone(), factors: a, diag_inv })
    }

    pub fn apply(&self, r: &[State]) -> Vec<State> {
        match self.kind {
            PreconditionerKind::BlockJacobi => r.par_iter().zip(&self.diag_inv).map(|(x, d)| d * x).collect(),
            PreconditionerKind::Ilu0 => {
                let p = &self.pattern;
                let n = p.num_rows();
                let mut y = r.to_vec();
                for i in 0..n {
                    let mut acc = y[i];
                    for k in p.row(i) {
                        let j = p.col_idx[k];
                        if j >= i {
                            break;
                        }
                        acc -= self.factors[k] * y[j];
                    }
                    y[i] = acc;
                }
                for i in (0..n).rev() {
                    let mut acc = y[i];
                    for k in (p.diag[i] + 1)..p.row(i).end {
                        acc -= self.factors[k] * y[p.col_idx[k]];
                    }
                    y[i] = self.diag_inv[i] * acc;
                }
                y
            }
        }
    }
}

/// ILU(0), falling back to block-Jacobi on a singular pivot.
pub fn build_preconditioner(mat: &BlockSparseMatrix) -> Result<Preconditioner, LinalgError> {
    match Preconditioner::ilu0(mat) {
        Ok(p) => Ok(p),
        Err(e) => {
            log::warn!("ILU(0) failed ({e}), using block-Jacobi");
            Preconditioner::block_jacobi(mat)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub breakdown: bool,
    pub preconditioner: PreconditionerKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolverSettings {
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for LinearSolverSettings {
    fn default() -> Self {
        Self { tol_rel: 1e-8, max_iter: 500 }
    }
}

fn dot(a: &[State], b: &[State]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &[State]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [State], a: f64, x: &[State]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += xi * a);
}

fn residual(mat: &BlockSparseMatrix, rhs: &[State], x: &[State]) -> Vec<State> {
    mat.matvec(x).iter().zip(rhs).map(|(ax, b)| b - ax).collect()
}

enum Outcome {
    Converged,
    Breakdown,
    MaxIter,
}

fn bicgstab(
    mat: &BlockSparseMatrix,
    rhs: &[State],
    x: &mut [State],
    prec: &Preconditioner,
    target: f64,
    max_iter: usize,
    iterations: &mut usize,
) -> Outcome {
    let mut r = residual(mat, rhs, x);
    if norm(&r) <= target {
        return Outcome::Converged;
    }
    let r_hat = r.clone();
    let n = r.len();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![State::zeros(); n];
    let mut p = vec![State::zeros(); n];
    while *iterations < max_iter {
        *iterations += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Outcome::Breakdown;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + (p[i] - v[i] * omega) * beta;
        }
        let p_hat = prec.apply(&p);
        v = mat.matvec(&p_hat);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Outcome::Breakdown;
        }
        alpha = rho / rv;
        let mut s = r.clone();
        axpy(&mut s, -alpha, &v);
        axpy(x, alpha, &p_hat);
        if norm(&s) <= target {
            return Outcome::Converged;
        }
        let s_hat = prec.apply(&s);
        let t = mat.matvec(&s_hat);
        let tt = dot(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            return Outcome::Breakdown;
        }
        omega = dot(&t, &s) / tt;
        axpy(x, omega, &s_hat);
        r = s;
        axpy(&mut r, -omega, &t);
        if norm(&r) <= target {
            return Outcome::Converged;
        }
        if omega == 0.0 {
            return Outcome::Breakdown;
        }
    }
    Outcome::MaxIter
}

/// Solves `mat x = rhs` starting from `x0`. Never fails: the report says
/// whether the tolerance was met. On breakdown the iteration restarts once
/// from the current iterate with block-Jacobi preconditioning.
pub fn solve(
    mat: &BlockSparseMatrix,
    rhs: &[State],
    x0: &[State],
    settings: &LinearSolverSettings,
) -> Result<(Vec<State>, LinearSolveReport), LinalgError> {
    let n = mat.num_rows();
    for len in [rhs.len(), x0.len()] {
        if len != n {
            return Err(LinalgError::DimensionMismatch { expected: n, got: len });
        }
    }
    let b_norm = norm(rhs);
    let mut x = x0.to_vec();
    let mut report = LinearSolveReport {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        breakdown: false,
        preconditioner: PreconditionerKind::Ilu0,
    };
    if b_norm == 0.0 {
        x.iter_mut().for_each(|xi| *xi = State::zeros());
        return Ok((x, report));
    }
    let target = settings.tol_rel * b_norm;
    let prec = build_preconditioner(mat)?;
    report.preconditioner = prec.kind();
    let mut outcome = bicgstab(mat, rhs, &mut x, &prec, target, settings.max_iter, &mut report.iterations);
    if matches!(outcome, Outcome::Breakdown) {
        report.breakdown = true;
        if !x.iter().all(|s| s.iter().all(|v| v.is_finite())) {
            x = x0.to_vec();
        }
        let jac = Preconditioner::block_jacobi(mat)?;
        report.preconditioner = PreconditionerKind::BlockJacobi;
        outcome = bicgstab(mat, rhs, &mut x, &jac, target, settings.max_iter, &mut report.iterations);
    }
    report.relative_residual = norm(&residual(mat, rhs, &x)) / b_norm;
    report.converged = matches!(outcome, Outcome::Converged) && report.relative_residual <= settings.tol_rel * 1.0001;
    if matches!(outcome, Outcome::Converged) {
        report.breakdown = false;
    }
    Ok((x, report))
}
