//! Mesh-dependent discrete operators of the P1 continuous Galerkin method:
//! consistent and lumped mass, the `c_ij` edge vectors and boundary weights.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::Vector2;
use thiserror::Error;

use crate::mesh::{Mesh, PatchId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("triangle {0} has non-positive area {1}")]
    DegenerateTriangle(usize, f64),
    #[error("inconsistent periodic pairing: {0}")]
    InconsistentPairing(String),
}

/// CSR sparsity of the nodal stencils, diagonal included, columns sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    /// Position of the diagonal entry of each row.
    pub diag: Vec<usize>,
}

impl SparsityPattern {
    /// Builds the pattern from per-row column lists (diagonal added if missing).
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut diag = Vec::with_capacity(rows.len());
        row_ptr.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(i);
            row.sort_unstable();
            row.dedup();
            let start = col_idx.len();
            let d = row.binary_search(&i).expect("diagonal present");
            diag.push(start + d);
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        Self { row_ptr, col_idx, diag }
    }

    pub fn num_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Sorted stencil `N_i` (including `i`).
    pub fn stencil(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row(i)]
    }

    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }
}

/// An undirected stencil pair `i < j` with the CSR positions of `(i,j)` and `(j,i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub ij: usize,
    pub ji: usize,
}

/// Contribution of one boundary edge to one of its end nodes:
/// `weight = int_e phi_i ds` with the edge's outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryWeight {
    pub node: usize,
    pub weight: f64,
    pub normal: Vector2<f64>,
    pub patch: PatchId,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub pattern: Arc<SparsityPattern>,
    /// Consistent mass `m_ij` per CSR entry.
    pub mass: Vec<f64>,
    /// `c_ij = int phi_i grad phi_j` per CSR entry.
    pub cvec: Vec<Vector2<f64>>,
    /// Lumped mass `m_i`.
    pub lumped: Vec<f64>,
    pub edges: Vec<Edge>,
    pub boundary: Vec<BoundaryWeight>,
}

impl DiscreteOperators {
    pub fn num_nodes(&self) -> usize {
        self.lumped.len()
    }

    pub fn stencil(&self, i: usize) -> &[usize] {
        self.pattern.stencil(i)
    }

    pub fn mass_entry(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.mass[k])
    }

    pub fn c(&self, i: usize, j: usize) -> Vector2<f64> {
        self.pattern.find(i, j).map_or(Vector2::zeros(), |k| self.cvec[k])
    }

    /// Boundary weights grouped by node (in storage order).
    pub fn boundary_of(&self, i: usize) -> impl Iterator<Item = &BoundaryWeight> {
        self.boundary.iter().filter(move |b| b.node == i)
    }

    fn from_entries(
        n: usize,
        entries: BTreeMap<(usize, usize), (f64, Vector2<f64>)>,
        boundary: Vec<BoundaryWeight>,
    ) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(i, j) in entries.keys() {
            rows[i].push(j);
        }
        let pattern = SparsityPattern::from_rows(rows);
        let mut mass = vec![0.0; pattern.nnz()];
        let mut cvec = vec![Vector2::zeros(); pattern.nnz()];
        for (&(i, j), &(m, c)) in &entries {
            let k = pattern.find(i, j).expect("entry in pattern");
            mass[k] = m;
            cvec[k] = c;
        }
        let lumped = (0..n).map(|i| pattern.row(i).map(|k| mass[k]).sum()).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for k in pattern.row(i) {
                let j = pattern.col_idx[k];
                if j > i {
                    let ji = pattern.find(j, i).expect("symmetric sparsity");
                    edges.push(Edge { i, j, ij: k, ji });
                }
            }
        }
        Self { pattern: Arc::new(pattern), mass, cvec, lumped, edges, boundary }
    }
}

/// Exact P1 integrals on every triangle plus edgewise boundary weights.
pub fn assemble(mesh: &Mesh) -> Result<DiscreteOperators, AssemblyError> {
    let mut entries: BTreeMap<(usize, usize), (f64, Vector2<f64>)> = BTreeMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            return Err(AssemblyError::DegenerateTriangle(t, area));
        }
        let p = tri.map(|v| mesh.vertices[v]);
        // grad phi_a = rot(p_{a+2} - p_{a+1}) / (2|K|) for a counterclockwise triangle
        let grads: [Vector2<f64>; 3] = std::array::from_fn(|a| {
            let e = p[(a + 2) % 3] - p[(a + 1) % 3];
            Vector2::new(-e.y, e.x) / (2.0 * area)
        });
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                let entry = entries.entry((tri[a], tri[b])).or_insert((0.0, Vector2::zeros()));
                entry.0 += m;
                entry.1 += grads[b] * (area / 3.0);
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let w = 0.5 * mesh.edge_length(e);
        let normal = mesh.edge_normal(e);
        for &node in &e.nodes {
            boundary.push(BoundaryWeight { node, weight: w, normal, patch: e.patch });
        }
    }
    Ok(DiscreteOperators::from_entries(mesh.num_vertices(), entries, boundary))
}

/// Merges rows and columns of identified nodes (`pairing[v]` is the merged
/// index of vertex `v`) and drops all boundary data.
pub fn apply_periodic(ops: &DiscreteOperators, pairing: &[usize]) -> Result<DiscreteOperators, AssemblyError> {
    if pairing.len() != ops.num_nodes() {
        return Err(AssemblyError::InconsistentPairing(format!(
            "pairing has {} entries for {} nodes",
            pairing.len(),
            ops.num_nodes()
        )));
    }
    let n = pairing.iter().copied().max().map_or(0, |m| m + 1);
    let mut hit = vec![false; n];
    for &p in pairing {
        hit[p] = true;
    }
    if let Some(missing) = hit.iter().position(|h| !h) {
        return Err(AssemblyError::InconsistentPairing(format!("merged index {missing} is unused")));
    }
    let mut entries: BTreeMap<(usize, usize), (f64, Vector2<f64>)> = BTreeMap::new();
    for i in 0..ops.num_nodes() {
        for k in ops.pattern.row(i) {
            let j = ops.pattern.col_idx[k];
            let (pi, pj) = (pairing[i], pairing[j]);
            if i != j && pi == pj {
                return Err(AssemblyError::InconsistentPairing(format!(
                    "neighbours {i} and {j} are identified with each other"
                )));
            }
            let entry = entries.entry((pi, pj)).or_insert((0.0, Vector2::zeros()));
            entry.0 += ops.mass[k];
            entry.1 += ops.cvec[k];
        }
    }
    Ok(DiscreteOperators::from_entries(n, entries, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_channel, generate_periodic_strip, BoundaryEdge, GeometryMap, Point};

    fn reference_triangle() -> Mesh {
        Mesh {
            vertices: vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![
                BoundaryEdge { nodes: [0, 1], patch: 1 },
                BoundaryEdge { nodes: [1, 2], patch: 1 },
                BoundaryEdge { nodes: [2, 0], patch: 1 },
            ],
            patch_names: Default::default(),
        }
    }

    #[test]
    fn reference_element_integrals() {
        // symbolic integration on the unit right triangle
        let ops = assemble(&reference_triangle()).unwrap();
        assert!((ops.mass_entry(0, 0) - 1.0 / 12.0).abs() < 1e-16);
        assert!((ops.mass_entry(0, 1) - 1.0 / 24.0).abs() < 1e-16);
        assert!((ops.lumped[0] - 1.0 / 6.0).abs() < 1e-16);
        let c01 = ops.c(0, 1);
        assert!((c01 - Vector2::new(1.0 / 6.0, 0.0)).norm() < 1e-16);
        let c02 = ops.c(0, 2);
        assert!((c02 - Vector2::new(0.0, 1.0 / 6.0)).norm() < 1e-16);
        assert_eq!(ops.edges.len(), 3);
    }

    #[test]
    fn lumped_mass_sums_to_area() {
        let mesh = generate_channel(7, 4, (-1.0, 1.0), &GeometryMap::gamm()).unwrap();
        let ops = assemble(&mesh).unwrap();
        let total: f64 = ops.lumped.iter().sum();
        assert!((total - mesh.total_area()).abs() < 1e-13);
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let mut m = reference_triangle();
        m.triangles[0] = [0, 2, 1];
        assert!(matches!(assemble(&m), Err(AssemblyError::DegenerateTriangle(0, _))));
    }

    #[test]
    fn periodic_merge() {
        let p = generate_periodic_strip(4, 4, (1.0, 1.0)).unwrap();
        let ops = assemble(&p.mesh).unwrap();
        let merged = apply_periodic(&ops, &p.pairing).unwrap();
        assert_eq!(merged.num_nodes(), 16);
        assert!(merged.boundary.is_empty());
        let before: f64 = ops.lumped.iter().sum();
        let after: f64 = merged.lumped.iter().sum();
        assert!((before - after).abs() < 1e-14);
        for i in 0..merged.num_nodes() {
            let s: Vector2<f64> = merged.pattern.row(i).map(|k| merged.cvec[k]).sum();
            assert!(s.norm() < 1e-14);
            // closed surface: column sums vanish too
            let col: Vector2<f64> = merged.stencil(i).iter().map(|&j| merged.c(j, i)).sum();
            assert!(col.norm() < 1e-14);
        }
        assert!(apply_periodic(&ops, &p.pairing[1..]).is_err());
    }

    #[test]
    fn torus_stencils_are_translates() {
        let p = generate_periodic_strip(4, 4, (1.0, 1.0)).unwrap();
        let ops = apply_periodic(&assemble(&p.mesh).unwrap(), &p.pairing).unwrap();
        let offsets = |i: usize| {
            let (x, y) = ((i % 4) as i64, (i / 4) as i64);
            let mut v: Vec<(i64, i64)> = ops
                .stencil(i)
                .iter()
                .map(|&j| (((j % 4) as i64 - x).rem_euclid(4), ((j / 4) as i64 - y).rem_euclid(4)))
                .collect();
            v.sort_unstable();
            v
        };
        for i in 1..16 {
            assert_eq!(offsets(i), offsets(0));
        }
        assert_eq!(offsets(0).len(), 7);
    }
}
