//! Triangular meshes: representation, Gmsh MSH 2.2 ASCII I/O and generators
//! for mapped channels, periodic strips and O-type grids.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use nalgebra::Vector2;
use thiserror::Error;

pub type Point = Vector2<f64>;
pub type PatchId = i32;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported MSH version {0} (only 2.2 ASCII is read)")]
    UnsupportedVersion(String),
    #[error("unsupported element type {elm_type} (element {id})")]
    UnsupportedElementType { id: usize, elm_type: u32 },
    #[error("boundary line {0:?} is not an edge of any triangle")]
    DanglingBoundaryEdge([usize; 2]),
    #[error("boundary edge {0:?} has no physical tag")]
    UntaggedBoundaryEdge([usize; 2]),
    #[error("malformed MSH file at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid mesh size: {0}")]
    InvalidSize(String),
}

/// A boundary segment; `nodes` are ordered so that the owning triangle lies
/// to the left, making `(dy, -dx)` the outward direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub patch: PatchId,
}

#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub patch_names: BTreeMap<PatchId, String>,
}

fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        (self.vertices[e.nodes[1]] - self.vertices[e.nodes[0]]).norm()
    }

    /// Unit outward normal of a boundary edge.
    pub fn edge_normal(&self, e: &BoundaryEdge) -> Vector2<f64> {
        let d = self.vertices[e.nodes[1]] - self.vertices[e.nodes[0]];
        Vector2::new(d.y, -d.x) / d.norm()
    }

    pub fn patch_id(&self, name: &str) -> Option<PatchId> {
        self.patch_names.iter().find(|(_, n)| n.as_str() == name).map(|(id, _)| *id)
    }

    /// Patch ids that actually occur on boundary edges.
    pub fn used_patches(&self) -> Vec<PatchId> {
        let mut ids: Vec<_> = self.boundary_edges.iter().map(|e| e.patch).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Makes every triangle counterclockwise. Returns the number of flipped triangles.
    pub fn orient_counterclockwise(&mut self) -> usize {
        let mut flipped = 0;
        for t in 0..self.triangles.len() {
            if self.triangle_area(t) < 0.0 {
                self.triangles[t].swap(1, 2);
                flipped += 1;
            }
        }
        flipped
    }

    /// Directed edges of all triangles mapped to their owning triangle.
    fn directed_edges(&self) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::with_capacity(3 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        map
    }

    /// Edges owned by exactly one triangle, oriented counterclockwise with
    /// respect to their owner.
    pub fn geometric_boundary(&self) -> Vec<[usize; 2]> {
        let directed = self.directed_edges();
        let mut out: Vec<[usize; 2]> = directed
            .keys()
            .filter(|(a, b)| !directed.contains_key(&(*b, *a)))
            .map(|(a, b)| [*a, *b])
            .collect();
        out.sort_unstable();
        out
    }

    /// Structural checks: positive areas, each boundary edge owned by exactly
    /// one triangle, and every geometric boundary edge tagged.
    pub fn validate(&self) -> Result<(), MeshError> {
        for t in 0..self.triangles.len() {
            if !(self.triangle_area(t) > 0.0) {
                return Err(MeshError::DegenerateGeometry(format!(
                    "triangle {t} has non-positive area {}",
                    self.triangle_area(t)
                )));
            }
        }
        let directed = self.directed_edges();
        let mut tagged = std::collections::HashSet::new();
        for e in &self.boundary_edges {
            let [a, b] = e.nodes;
            if !directed.contains_key(&(a, b)) || directed.contains_key(&(b, a)) {
                return Err(MeshError::DanglingBoundaryEdge(e.nodes));
            }
            tagged.insert((a, b));
        }
        for [a, b] in self.geometric_boundary() {
            if !tagged.contains(&(a, b)) {
                return Err(MeshError::UntaggedBoundaryEdge([a, b]));
            }
        }
        Ok(())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

/// Reads a Gmsh MSH 2.2 ASCII mesh with 2-node lines (boundary) and 3-node
/// triangles. Point elements (type 15) are skipped.
pub fn read_gmsh<R: BufRead>(reader: R) -> Result<Mesh, MeshError> {
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let mut pos = 0usize;
    let mut mesh = Mesh::default();
    let mut node_index: HashMap<usize, usize> = HashMap::new();
    let mut raw_lines: Vec<([usize; 2], PatchId)> = Vec::new();
    let mut seen_format = false;

    let next = |pos: &mut usize| -> Result<(usize, &str), MeshError> {
        while *pos < lines.len() {
            let l = lines[*pos].trim();
            *pos += 1;
            if !l.is_empty() {
                return Ok((*pos, l));
            }
        }
        Err(parse_err(lines.len(), "unexpected end of file"))
    };

    while pos < lines.len() {
        let header = lines[pos].trim().to_string();
        pos += 1;
        match header.as_str() {
            "" => continue,
            "$MeshFormat" => {
                let (ln, l) = next(&mut pos)?;
                let mut it = l.split_whitespace();
                let version = it.next().unwrap_or("").to_string();
                let file_type = it.next().unwrap_or("");
                if version != "2.2" && version != "2" {
                    return Err(MeshError::UnsupportedVersion(version));
                }
                if file_type != "0" {
                    return Err(parse_err(ln, "binary MSH files are not supported"));
                }
                seen_format = true;
            }
            "$PhysicalNames" => {
                let (ln, l) = next(&mut pos)?;
                let n: usize = l.parse().map_err(|_| parse_err(ln, "bad physical name count"))?;
                for _ in 0..n {
                    let (ln, l) = next(&mut pos)?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let _dim = it.next();
                    let tag: PatchId = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err(ln, "bad physical tag"))?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    mesh.patch_names.insert(tag, name);
                }
            }
            "$Nodes" => {
                let (ln, l) = next(&mut pos)?;
                let n: usize = l.parse().map_err(|_| parse_err(ln, "bad node count"))?;
                mesh.vertices.reserve(n);
                for _ in 0..n {
                    let (ln, l) = next(&mut pos)?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(parse_err(ln, "node line needs id x y [z]"));
                    }
                    let id: usize = f[0].parse().map_err(|_| parse_err(ln, "bad node id"))?;
                    let x: f64 = f[1].parse().map_err(|_| parse_err(ln, "bad x coordinate"))?;
                    let y: f64 = f[2].parse().map_err(|_| parse_err(ln, "bad y coordinate"))?;
                    node_index.insert(id, mesh.vertices.len());
                    mesh.vertices.push(Point::new(x, y));
                }
            }
            "$Elements" => {
                let (ln, l) = next(&mut pos)?;
                let n: usize = l.parse().map_err(|_| parse_err(ln, "bad element count"))?;
                for _ in 0..n {
                    let (ln, l) = next(&mut pos)?;
                    let f: Vec<usize> = l
                        .split_whitespace()
                        .map(|s| s.parse::<i64>().map(|v| v as usize))
                        .collect::<Result<_, _>>()
                        .map_err(|_| parse_err(ln, "bad element line"))?;
                    if f.len() < 3 {
                        return Err(parse_err(ln, "element line too short"));
                    }
                    let (id, elm_type, ntags) = (f[0], f[1] as u32, f[2]);
                    let tags = f.get(3..3 + ntags).ok_or_else(|| parse_err(ln, "missing tags"))?;
                    let nodes = &f[3 + ntags..];
                    let map = |k: usize| -> Result<usize, MeshError> {
                        node_index
                            .get(&nodes[k])
                            .copied()
                            .ok_or_else(|| parse_err(ln, format!("unknown node {}", nodes[k])))
                    };
                    match elm_type {
                        15 => {}
                        1 => {
                            if nodes.len() != 2 {
                                return Err(parse_err(ln, "line element needs 2 nodes"));
                            }
                            let tag = tags.first().map(|t| *t as PatchId).unwrap_or(0);
                            raw_lines.push(([map(0)?, map(1)?], tag));
                        }
                        2 => {
                            if nodes.len() != 3 {
                                return Err(parse_err(ln, "triangle element needs 3 nodes"));
                            }
                            mesh.triangles.push([map(0)?, map(1)?, map(2)?]);
                        }
                        _ => return Err(MeshError::UnsupportedElementType { id, elm_type }),
                    }
                }
            }
            other if other.starts_with("$End") => {}
            other if other.starts_with('$') => {
                // unknown section: skip to its end marker
                let end = format!("$End{}", &other[1..]);
                while pos < lines.len() && lines[pos].trim() != end {
                    pos += 1;
                }
            }
            _ => {}
        }
    }
    if !seen_format {
        return Err(MeshError::UnsupportedVersion("missing $MeshFormat".into()));
    }

    mesh.orient_counterclockwise();
    let directed = mesh.directed_edges();
    for ([a, b], patch) in raw_lines {
        let nodes = if directed.contains_key(&(a, b)) && !directed.contains_key(&(b, a)) {
            [a, b]
        } else if directed.contains_key(&(b, a)) && !directed.contains_key(&(a, b)) {
            [b, a]
        } else {
            return Err(MeshError::DanglingBoundaryEdge([a, b]));
        };
        mesh.boundary_edges.push(BoundaryEdge { nodes, patch });
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Serializes a mesh as MSH 2.2 ASCII. Coordinates use the shortest
/// representation that round-trips exactly.
pub fn write_gmsh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    if !mesh.patch_names.is_empty() {
        let _ = writeln!(s, "$PhysicalNames\n{}", mesh.patch_names.len());
        for (id, name) in &mesh.patch_names {
            let _ = writeln!(s, "1 {id} \"{name}\"");
        }
        s.push_str("$EndPhysicalNames\n");
    }
    let _ = writeln!(s, "$Nodes\n{}", mesh.vertices.len());
    for (k, v) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(s, "{} {:?} {:?} 0", k + 1, v.x, v.y);
    }
    s.push_str("$EndNodes\n");
    let n_el = mesh.boundary_edges.len() + mesh.triangles.len();
    let _ = writeln!(s, "$Elements\n{n_el}");
    let mut id = 1;
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "{id} 1 2 {} {} {} {}", e.patch, e.patch, e.nodes[0] + 1, e.nodes[1] + 1);
        id += 1;
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{id} 2 2 0 0 {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

pub const PATCH_INLET: PatchId = 1;
pub const PATCH_OUTLET: PatchId = 2;
pub const PATCH_LOWER_WALL: PatchId = 3;
pub const PATCH_UPPER_WALL: PatchId = 4;

/// Lower and upper wall curves `y = lower(x)`, `y = upper(x)` of a mapped channel.
#[derive(Clone, Copy)]
pub struct GeometryMap {
    pub lower_wall: fn(f64) -> f64,
    pub upper_wall: fn(f64) -> f64,
}

impl std::fmt::Debug for GeometryMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeometryMap").finish_non_exhaustive()
    }
}

fn zero(_: f64) -> f64 {
    0.0
}

fn one(_: f64) -> f64 {
    1.0
}

/// Circular-arc bump of the GAMM channel on `[-0.5, 0.5]`, flat elsewhere.
pub fn gamm_lower_wall(x: f64) -> f64 {
    if x.abs() <= 0.5 {
        (1.69 - x * x).sqrt() - 1.2
    } else {
        0.0
    }
}

/// Upper wall of the converging-diverging nozzle; the lower wall is its mirror image.
pub fn nozzle_upper_wall(x: f64) -> f64 {
    if x > 0.0 && x <= 4.0 {
        ((std::f64::consts::FRAC_PI_2 * x).cos() + 3.0) / 4.0
    } else {
        1.0
    }
}

pub fn nozzle_lower_wall(x: f64) -> f64 {
    -nozzle_upper_wall(x)
}

impl GeometryMap {
    pub fn unit_strip() -> Self {
        Self { lower_wall: zero, upper_wall: one }
    }

    pub fn gamm() -> Self {
        Self { lower_wall: gamm_lower_wall, upper_wall: one }
    }

    pub fn nozzle() -> Self {
        Self { lower_wall: nozzle_lower_wall, upper_wall: nozzle_upper_wall }
    }
}

fn channel_patch_names() -> BTreeMap<PatchId, String> {
    BTreeMap::from([
        (PATCH_INLET, "inlet".to_string()),
        (PATCH_OUTLET, "outlet".to_string()),
        (PATCH_LOWER_WALL, "lower_wall".to_string()),
        (PATCH_UPPER_WALL, "upper_wall".to_string()),
    ])
}

/// Structured `(nx+1) x (ny+1)` grid between the wall curves of `gmap`, each
/// quad split into two triangles along alternating diagonals.
pub fn generate_channel(
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    gmap: &GeometryMap,
) -> Result<Mesh, MeshError> {
    structured_channel(nx, ny, x_range, gmap, true)
}

fn structured_channel(
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    gmap: &GeometryMap,
    alternate: bool,
) -> Result<Mesh, MeshError> {
    if nx < 1 || ny < 1 {
        return Err(MeshError::InvalidSize(format!("nx = {nx}, ny = {ny}")));
    }
    let (x0, x1) = x_range;
    if !(x1 > x0) {
        return Err(MeshError::DegenerateGeometry(format!("empty x range [{x0}, {x1}]")));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            let (lo, hi) = ((gmap.lower_wall)(x), (gmap.upper_wall)(x));
            if !(hi > lo) {
                return Err(MeshError::DegenerateGeometry(format!(
                    "walls cross at x = {x}: lower {lo}, upper {hi}"
                )));
            }
            let s = j as f64 / ny as f64;
            vertices.push(Point::new(x, lo + s * (hi - lo)));
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if !alternate || (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], patch: PATCH_LOWER_WALL });
        boundary_edges.push(BoundaryEdge { nodes: [id(i + 1, ny), id(i, ny)], patch: PATCH_UPPER_WALL });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge { nodes: [id(nx, j), id(nx, j + 1)], patch: PATCH_OUTLET });
        boundary_edges.push(BoundaryEdge { nodes: [id(0, j + 1), id(0, j)], patch: PATCH_INLET });
    }
    let mesh = Mesh { vertices, triangles, boundary_edges, patch_names: channel_patch_names() };
    mesh.validate()?;
    Ok(mesh)
}

/// A rectangle mesh together with the identification of opposite sides.
#[derive(Debug, Clone)]
pub struct PeriodicMesh {
    pub mesh: Mesh,
    /// Mesh vertex -> unique (merged) node index.
    pub pairing: Vec<usize>,
    pub num_unique: usize,
}

/// Rectangle `[0, lx] x [0, ly]` with `nx x ny` cells whose opposite sides
/// are identified (a discrete torus). All cells are split along the same
/// diagonal, so every merged stencil is a translate of every other.
pub fn generate_periodic_strip(nx: usize, ny: usize, lengths: (f64, f64)) -> Result<PeriodicMesh, MeshError> {
    if nx < 2 || ny < 2 {
        return Err(MeshError::InvalidSize(format!("periodic strip needs nx, ny >= 2 (got {nx}, {ny})")));
    }
    let (lx, ly) = lengths;
    if !(lx > 0.0 && ly > 0.0) {
        return Err(MeshError::DegenerateGeometry(format!("lengths {lx} x {ly}")));
    }
    let mut mesh = structured_channel(nx, ny, (0.0, lx), &GeometryMap::unit_strip(), false)?;
    for v in &mut mesh.vertices {
        v.y *= ly;
    }
    let pairing = (0..mesh.vertices.len())
        .map(|k| {
            let (i, j) = (k % (nx + 1), k / (nx + 1));
            (j % ny) * nx + (i % nx)
        })
        .collect();
    Ok(PeriodicMesh { mesh, pairing, num_unique: nx * ny })
}

/// Grid between a closed inner curve and an outer curve, both parameterized
/// by `t` in `[0, 1)` (`closed = true`) or `[0, 1]` (open sector). Radial
/// spacing grows geometrically with `ratio`.
///
/// Patches: `inner_patch` on the inner curve, `outer_patch` on the outer one,
/// and for open sectors `side_patch` on both radial sides.
#[allow(clippy::too_many_arguments)]
pub fn generate_o_grid(
    inner: &dyn Fn(f64) -> Point,
    outer: &dyn Fn(f64) -> Point,
    n_around: usize,
    n_radial: usize,
    ratio: f64,
    closed: bool,
    patches: (PatchId, PatchId, PatchId),
    patch_names: BTreeMap<PatchId, String>,
) -> Result<Mesh, MeshError> {
    if n_around < 3 || n_radial < 1 {
        return Err(MeshError::InvalidSize(format!("n_around = {n_around}, n_radial = {n_radial}")));
    }
    let (inner_patch, outer_patch, side_patch) = patches;
    let n_t = if closed { n_around } else { n_around + 1 };
    let total: f64 = (0..n_radial).map(|k| ratio.powi(k as i32)).sum();
    let mut radial = vec![0.0; n_radial + 1];
    for k in 1..=n_radial {
        radial[k] = radial[k - 1] + ratio.powi(k as i32 - 1) / total;
    }
    radial[n_radial] = 1.0;
    let mut vertices = Vec::with_capacity(n_t * (n_radial + 1));
    for s in &radial {
        for it in 0..n_t {
            let t = it as f64 / n_around as f64;
            let (a, b) = (inner(t), outer(t));
            vertices.push(a + (b - a) * *s);
        }
    }
    let id = |it: usize, k: usize| k * n_t + (it % n_t);
    let mut triangles = Vec::new();
    for k in 0..n_radial {
        for it in 0..n_around {
            let (a, b, c, d) = (id(it, k), id(it + 1, k), id(it + 1, k + 1), id(it, k + 1));
            if (it + k) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut boundary_edges = Vec::new();
    for it in 0..n_around {
        boundary_edges.push(BoundaryEdge { nodes: [id(it, 0), id(it + 1, 0)], patch: inner_patch });
        boundary_edges.push(BoundaryEdge {
            nodes: [id(it + 1, n_radial), id(it, n_radial)],
            patch: outer_patch,
        });
    }
    if !closed {
        for k in 0..n_radial {
            boundary_edges.push(BoundaryEdge { nodes: [id(0, k + 1), id(0, k)], patch: side_patch });
            boundary_edges.push(BoundaryEdge { nodes: [id(n_around, k), id(n_around, k + 1)], patch: side_patch });
        }
    }
    let mut mesh = Mesh { vertices, triangles, boundary_edges, patch_names };
    let flipped = mesh.orient_counterclockwise();
    if flipped == mesh.triangles.len() {
        // the parameterization runs clockwise: every boundary edge is reversed too
        for e in &mut mesh.boundary_edges {
            e.nodes.swap(0, 1);
        }
    } else if flipped > 0 {
        return Err(MeshError::DegenerateGeometry(format!("{flipped} folded cells in O-grid")));
    }
    mesh.validate()?;
    Ok(mesh)
}
