//! Built-in benchmark problems.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use nalgebra::Vector2;
use thiserror::Error;

use crate::assembly::{assemble, AssemblyError};
use crate::euler::{EulerError, GasModel, State};
use crate::limiter::Scheme;
use crate::low_order::{BoundaryCondition, BoundaryConditions};
use crate::mesh::{
    generate_channel, generate_o_grid, read_gmsh, GeometryMap, Mesh, MeshError, PatchId, Point, PATCH_INLET,
    PATCH_LOWER_WALL, PATCH_OUTLET, PATCH_UPPER_WALL,
};
use crate::solver::Discretization;

pub const CASE_NAMES: [&str; 7] = [
    "gamm",
    "nozzle_subsonic",
    "nozzle_transonic_shock",
    "nozzle_transonic_supout",
    "naca_subsonic",
    "naca_transonic",
    "bowshock",
];

/// Trailing-edge abscissa where the NACA 0012 polynomial closes.
pub const NACA_CHORD: f64 = 1.00893;
pub const NACA_FARFIELD_RADIUS: f64 = 10.0;

pub const PATCH_FARFIELD: PatchId = 1;
pub const PATCH_WALL: PatchId = 3;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("unknown case `{0}`; expected one of {names}", names = CASE_NAMES.join(", "))]
    UnknownCase(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Euler(#[from] EulerError),
    #[error("cannot open mesh {path}: {source}")]
    MeshFile { path: PathBuf, source: std::io::Error },
    #[error("mesh patch {0} has no boundary condition")]
    UnmappedPatch(PatchId),
}

/// Channel geometries with a structured generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Gamm,
    Nozzle,
}

impl Channel {
    pub fn x_range(&self) -> (f64, f64) {
        match self {
            Channel::Gamm => (-1.0, 1.0),
            Channel::Nozzle => (-2.0, 8.0),
        }
    }

    pub fn geometry(&self) -> GeometryMap {
        match self {
            Channel::Gamm => GeometryMap::gamm(),
            Channel::Nozzle => GeometryMap::nozzle(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Channel { channel: Channel, nx: usize, ny: usize },
    /// O-grid around the airfoil out to the far-field circle.
    NacaOGrid { n_around: usize, n_radial: usize },
    /// Grid between the half-cylinder and an elliptic inflow boundary.
    BowShockGrid { n_around: usize, n_radial: usize },
    File(PathBuf),
}

impl MeshSource {
    pub fn build(&self) -> Result<Mesh, CaseError> {
        match self {
            MeshSource::Channel { channel, nx, ny } => {
                Ok(generate_channel(*nx, *ny, channel.x_range(), &channel.geometry())?)
            }
            MeshSource::NacaOGrid { n_around, n_radial } => naca_o_grid(*n_around, *n_radial),
            MeshSource::BowShockGrid { n_around, n_radial } => bow_shock_grid(*n_around, *n_radial),
            MeshSource::File(path) => {
                let f = File::open(path).map_err(|source| CaseError::MeshFile { path: path.clone(), source })?;
                Ok(read_gmsh(BufReader::new(f))?)
            }
        }
    }

    /// Overrides the resolution of generated meshes.
    pub fn with_resolution(self, nx: Option<usize>, ny: Option<usize>) -> Self {
        match self {
            MeshSource::Channel { channel, nx: x, ny: y } => {
                MeshSource::Channel { channel, nx: nx.unwrap_or(x), ny: ny.unwrap_or(y) }
            }
            MeshSource::NacaOGrid { n_around, n_radial } => {
                MeshSource::NacaOGrid { n_around: nx.unwrap_or(n_around), n_radial: ny.unwrap_or(n_radial) }
            }
            MeshSource::BowShockGrid { n_around, n_radial } => {
                MeshSource::BowShockGrid { n_around: nx.unwrap_or(n_around), n_radial: ny.unwrap_or(n_radial) }
            }
            file => file,
        }
    }
}

/// Free-stream data `(rho, p, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeStream {
    pub rho: f64,
    pub p: f64,
    pub v: Vector2<f64>,
}

impl FreeStream {
    /// `rho = 1`, `p = 1/gamma` (unit sound speed), `|v| = mach`, rotated by
    /// the angle of attack.
    pub fn standard(mach: f64, alpha_deg: f64, gas: &GasModel) -> Self {
        let a = alpha_deg.to_radians();
        Self { rho: 1.0, p: 1.0 / gas.gamma(), v: Vector2::new(a.cos(), a.sin()) * mach }
    }

    pub fn state(&self, gas: &GasModel) -> Result<State, EulerError> {
        gas.primitive_to_conserved(self.rho, self.v, self.p)
    }
}

/// Boundary condition kinds before the free-stream state is bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcKind {
    Farfield,
    SupersonicOutlet,
    Wall,
    PressureOutlet(f64),
}

impl BcKind {
    pub fn bind(&self, free_stream: State) -> BoundaryCondition {
        match *self {
            BcKind::Farfield => BoundaryCondition::Farfield(free_stream),
            BcKind::SupersonicOutlet => BoundaryCondition::SupersonicOutlet,
            BcKind::Wall => BoundaryCondition::ReflectingWall,
            BcKind::PressureOutlet(p) => BoundaryCondition::SubsonicOutletPressure(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub name: String,
    pub mesh: MeshSource,
    pub patches: BTreeMap<PatchId, BcKind>,
    pub free_stream: FreeStream,
    pub cfl_target: f64,
    pub cfl_warmup: f64,
    pub notes: &'static str,
}

impl BenchmarkCase {
    pub fn boundary_conditions(&self, gas: &GasModel) -> Result<BoundaryConditions, CaseError> {
        let fs = self.free_stream.state(gas)?;
        Ok(BoundaryConditions(self.patches.iter().map(|(p, k)| (*p, k.bind(fs))).collect()))
    }

    /// Builds the mesh and the discretization; every boundary patch of the
    /// mesh must carry a condition.
    pub fn discretize(&self, gas: GasModel, scheme: Scheme) -> Result<(Mesh, Discretization), CaseError> {
        let mesh = self.mesh.build()?;
        if let Some(p) = mesh.used_patches().into_iter().find(|p| !self.patches.contains_key(p)) {
            return Err(CaseError::UnmappedPatch(p));
        }
        let ops = assemble(&mesh)?;
        let bcs = self.boundary_conditions(&gas)?;
        Ok((mesh, Discretization::new(ops, bcs, gas, scheme)))
    }

    /// Free stream extended into the domain.
    pub fn initial_state(&self, n: usize, gas: &GasModel) -> Result<Vec<State>, CaseError> {
        Ok(vec![self.free_stream.state(gas)?; n])
    }
}

fn channel_patches(outlet: BcKind) -> BTreeMap<PatchId, BcKind> {
    BTreeMap::from([
        (PATCH_INLET, BcKind::Farfield),
        (PATCH_OUTLET, outlet),
        (PATCH_LOWER_WALL, BcKind::Wall),
        (PATCH_UPPER_WALL, BcKind::Wall),
    ])
}

pub fn builtin(name: &str) -> Result<BenchmarkCase, CaseError> {
    let gas = GasModel::default();
    let gamma = gas.gamma();
    let nozzle = |nx, ny| MeshSource::Channel { channel: Channel::Nozzle, nx, ny };
    let case = |mesh, patches, free_stream, notes| BenchmarkCase {
        name: name.to_string(),
        mesh,
        patches,
        free_stream,
        cfl_target: 1e4,
        cfl_warmup: 10.0,
        notes,
    };
    let external = BTreeMap::from([(PATCH_FARFIELD, BcKind::Farfield), (PATCH_WALL, BcKind::Wall)]);
    match name {
        "gamm" => Ok(case(
            MeshSource::Channel { channel: Channel::Gamm, nx: 60, ny: 20 },
            channel_patches(BcKind::PressureOutlet(1.0 / gamma)),
            FreeStream::standard(0.67, 0.0, &gas),
            "GAMM channel, circular-arc bump, subsonic outlet at free-stream pressure",
        )),
        "nozzle_subsonic" => Ok(case(
            nozzle(100, 20),
            channel_patches(BcKind::PressureOutlet(1.0 / gamma)),
            FreeStream::standard(0.2, 0.0, &gas),
            "converging-diverging nozzle, smooth subsonic flow",
        )),
        "nozzle_transonic_shock" => Ok(case(
            nozzle(100, 20),
            channel_patches(BcKind::PressureOutlet(2.0 / 3.0)),
            FreeStream { rho: 1.0, p: 1.0, v: Vector2::new(gamma.sqrt() * 0.3, 0.0) },
            "converging-diverging nozzle, transonic flow with a shock, outlet pressure 2/3",
        )),
        "nozzle_transonic_supout" => Ok(case(
            nozzle(100, 20),
            channel_patches(BcKind::SupersonicOutlet),
            FreeStream::standard(0.8, 0.0, &gas),
            "converging-diverging nozzle, transonic flow with a supersonic outlet",
        )),
        "naca_subsonic" => Ok(case(
            MeshSource::NacaOGrid { n_around: 128, n_radial: 40 },
            external,
            FreeStream::standard(0.5, 0.0, &gas),
            "NACA 0012 airfoil, M = 0.5, zero incidence",
        )),
        "naca_transonic" => Ok(case(
            MeshSource::NacaOGrid { n_around: 128, n_radial: 40 },
            external,
            FreeStream::standard(0.8, 1.25, &gas),
            "NACA 0012 airfoil, M = 0.8, 1.25 degrees incidence",
        )),
        "bowshock" => Ok(case(
            MeshSource::BowShockGrid { n_around: 80, n_radial: 60 },
            BTreeMap::from([
                (PATCH_INLET, BcKind::Farfield),
                (PATCH_OUTLET, BcKind::SupersonicOutlet),
                (PATCH_WALL, BcKind::Wall),
            ]),
            FreeStream::standard(20.0, 0.0, &gas),
            "Mach 20 flow around a half-cylinder of unit radius",
        )),
        other => Err(CaseError::UnknownCase(other.to_string())),
    }
}

/// NACA 0012 half thickness, closed at [`NACA_CHORD`].
pub fn naca0012_half_thickness(x: f64) -> f64 {
    let x = x.clamp(0.0, NACA_CHORD);
    0.6 * (0.2969 * x.sqrt() - 0.126 * x - 0.3516 * x * x + 0.2843 * x.powi(3) - 0.1015 * x.powi(4))
}

/// Airfoil contour, counterclockwise from the trailing edge over the upper
/// surface, with cosine clustering at both edges.
fn naca_contour(t: f64) -> Point {
    let x = 0.5 * NACA_CHORD * (1.0 + (TAU * t).cos());
    if t == 0.0 {
        return Point::new(NACA_CHORD, 0.0);
    }
    let y = naca0012_half_thickness(x);
    Point::new(x, if t <= 0.5 { y } else { -y })
}

pub fn naca_o_grid(n_around: usize, n_radial: usize) -> Result<Mesh, CaseError> {
    let outer = |t: f64| Point::new((TAU * t).cos(), (TAU * t).sin()) * NACA_FARFIELD_RADIUS;
    let names = BTreeMap::from([(PATCH_FARFIELD, "farfield".to_string()), (PATCH_WALL, "airfoil".to_string())]);
    Ok(generate_o_grid(
        &naca_contour,
        &outer,
        n_around,
        n_radial,
        1.12,
        true,
        (PATCH_WALL, PATCH_FARFIELD, PATCH_FARFIELD),
        names,
    )?)
}

/// Half-cylinder facing the flow; the inflow boundary is an ellipse with
/// semi-axes 2.5 (streamwise) and 5, the outflow boundary is the plane `x = 0`.
pub fn bow_shock_grid(n_around: usize, n_radial: usize) -> Result<Mesh, CaseError> {
    let angle = |t: f64| PI * (t - 0.5);
    let inner = |t: f64| Point::new(-angle(t).cos(), angle(t).sin());
    let outer = |t: f64| Point::new(-2.5 * angle(t).cos(), 5.0 * angle(t).sin());
    let names = BTreeMap::from([
        (PATCH_INLET, "inflow".to_string()),
        (PATCH_OUTLET, "outflow".to_string()),
        (PATCH_WALL, "cylinder".to_string()),
    ]);
    Ok(generate_o_grid(&inner, &outer, n_around, n_radial, 1.0, false, (PATCH_WALL, PATCH_INLET, PATCH_OUTLET), names)?)
}
