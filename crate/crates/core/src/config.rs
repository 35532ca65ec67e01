//! Run configuration files.
//!
//! ```toml
//! [case]
//! name = "gamm"          # a built-in case, or "custom"
//! nx = 60
//! ny = 20
//!
//! [solver]
//! cfl = 1e4
//! omega = "adaptive"     # or a number in (0, 1]
//!
//! [output]
//! dir = "out/gamm"
//! ```
//!
//! A custom case needs `mesh`, `mach` and a `patches` table mapping patch ids
//! or names to `farfield`, `wall`, `supersonic_outlet` or
//! `pressure_outlet=<p>`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;

use crate::cases::{builtin, BcKind, BenchmarkCase, CaseError, FreeStream, MeshSource};
use crate::euler::GasModel;
use crate::limiter::Scheme;
use crate::linalg::LinearSolverSettings;
use crate::solver::{OmegaMode, SolverConfig, SolverError, StoppingRule};

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "IDP_EULER_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error(transparent)]
    Case(#[from] CaseError),
}

impl ConfigError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Validation { field: field.to_string(), reason: reason.into() }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    case: RawCase,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    name: Option<String>,
    nx: Option<usize>,
    ny: Option<usize>,
    mesh: Option<PathBuf>,
    mach: Option<f64>,
    alpha: Option<f64>,
    density: Option<f64>,
    pressure: Option<f64>,
    patches: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    scheme: Option<String>,
    gamma: Option<f64>,
    cfl: Option<f64>,
    cfl_warmup: Option<f64>,
    warmup_exit_ratio: Option<f64>,
    omega: Option<toml::Value>,
    omega_k: Option<usize>,
    omega0: Option<f64>,
    steady_tol: Option<f64>,
    hard_tol: Option<f64>,
    deep_convergence: Option<bool>,
    max_pseudo_steps: Option<usize>,
    max_newton_iters: Option<usize>,
    freeze_jacobian: Option<bool>,
    idp_slack: Option<f64>,
    max_dt_halvings: Option<usize>,
    linear_tol: Option<f64>,
    linear_max_iter: Option<usize>,
    low_order_start: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    every: Option<usize>,
    deterministic: Option<bool>,
    threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write a VTK snapshot every `every` pseudo-time steps (0: final only).
    pub every: usize,
    /// Write zero wall times so repeated runs give identical logs.
    pub deterministic: bool,
    /// Worker threads (0: all cores).
    pub threads: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("output"), every: 0, deterministic: false, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: BenchmarkCase,
    pub scheme: Scheme,
    pub gas: GasModel,
    pub solver: SolverConfig,
    /// Converge the low-order scheme first and start the limited scheme from it.
    pub low_order_start: bool,
    pub output: OutputConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_bc(field: &str, s: &str) -> Result<BcKind, ConfigError> {
    let s = s.trim();
    match s {
        "farfield" => Ok(BcKind::Farfield),
        "wall" => Ok(BcKind::Wall),
        "supersonic_outlet" => Ok(BcKind::SupersonicOutlet),
        _ => match s.strip_prefix("pressure_outlet=") {
            Some(p) => match p.trim().parse::<f64>() {
                Ok(p) if p > 0.0 && p.is_finite() => Ok(BcKind::PressureOutlet(p)),
                _ => Err(ConfigError::invalid(field, "outlet pressure must be a positive number")),
            },
            None => Err(ConfigError::invalid(
                field,
                format!("unknown boundary condition `{s}` (farfield, wall, supersonic_outlet, pressure_outlet=<p>)"),
            )),
        },
    }
}

fn positive(field: &str, v: Option<f64>) -> Result<Option<f64>, ConfigError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(ConfigError::invalid(field, "must be positive and finite")),
        other => Ok(other),
    }
}

fn build_case(raw: RawCase) -> Result<BenchmarkCase, ConfigError> {
    let name = raw.name.unwrap_or_else(|| "gamm".to_string());
    let mut case = if name == "custom" {
        let mesh = raw.mesh.clone().ok_or_else(|| ConfigError::invalid("mesh", "a custom case needs a mesh file"))?;
        let mach = positive("mach", raw.mach)?.ok_or_else(|| ConfigError::invalid("mach", "required for a custom case"))?;
        let patches = raw
            .patches
            .clone()
            .ok_or_else(|| ConfigError::invalid("patches", "required for a custom case"))?;
        let gas = GasModel::default();
        BenchmarkCase {
            name,
            mesh: MeshSource::File(mesh),
            patches: custom_patches(&patches)?,
            free_stream: FreeStream::standard(mach, raw.alpha.unwrap_or(0.0), &gas),
            cfl_target: 1e4,
            cfl_warmup: 10.0,
            notes: "custom case",
        }
    } else {
        let mut c = builtin(&name).map_err(|_| ConfigError::invalid("name", format!("unknown case `{name}`")))?;
        if let Some(mesh) = raw.mesh.clone() {
            c.mesh = MeshSource::File(mesh);
        }
        if let Some(p) = &raw.patches {
            c.patches.extend(custom_patches(p)?);
        }
        if let Some(m) = positive("mach", raw.mach)? {
            let speed = c.free_stream.v.norm();
            let dir = if speed > 0.0 { c.free_stream.v / speed } else { nalgebra::Vector2::new(1.0, 0.0) };
            c.free_stream.v = dir * m * (GasModel::default().gamma() * c.free_stream.p / c.free_stream.rho).sqrt();
        }
        c
    };
    if let Some(a) = raw.alpha {
        if !a.is_finite() {
            return Err(ConfigError::invalid("alpha", "must be finite"));
        }
        let speed = case.free_stream.v.norm();
        let r = a.to_radians();
        case.free_stream.v = nalgebra::Vector2::new(r.cos(), r.sin()) * speed;
    }
    if let Some(rho) = positive("density", raw.density)? {
        case.free_stream.rho = rho;
    }
    if let Some(p) = positive("pressure", raw.pressure)? {
        case.free_stream.p = p;
    }
    for (field, v) in [("nx", raw.nx), ("ny", raw.ny)] {
        if v == Some(0) {
            return Err(ConfigError::invalid(field, "must be at least 1"));
        }
    }
    case.mesh = case.mesh.with_resolution(raw.nx, raw.ny);
    Ok(case)
}

fn custom_patches(raw: &BTreeMap<String, String>) -> Result<BTreeMap<i32, BcKind>, ConfigError> {
    raw.iter()
        .map(|(k, v)| {
            let field = format!("patches.{k}");
            let id = k
                .parse::<i32>()
                .map_err(|_| ConfigError::invalid(&field, "patch keys must be physical group ids"))?;
            Ok((id, parse_bc(&field, v)?))
        })
        .collect()
}

fn build_solver(raw: &RawSolver, case: &BenchmarkCase) -> Result<(SolverConfig, Scheme, GasModel, bool), ConfigError> {
    let d = SolverConfig::default();
    let scheme = match raw.scheme.as_deref() {
        None | Some("mcl") => Scheme::Mcl,
        Some("low_order") => Scheme::LowOrder,
        Some(other) => return Err(ConfigError::invalid("scheme", format!("`{other}` is not mcl or low_order"))),
    };
    let gas = match raw.gamma {
        None => GasModel::default(),
        Some(g) => GasModel::new(g).ok_or_else(|| ConfigError::invalid("gamma", "must exceed 1"))?,
    };
    let omega = match &raw.omega {
        None => OmegaMode::Adaptive { k: raw.omega_k.unwrap_or(3), omega0: raw.omega0.unwrap_or(0.5) },
        Some(toml::Value::String(s)) if s == "adaptive" => {
            OmegaMode::Adaptive { k: raw.omega_k.unwrap_or(3), omega0: raw.omega0.unwrap_or(0.5) }
        }
        Some(toml::Value::Float(w)) => OmegaMode::Fixed(*w),
        Some(toml::Value::Integer(w)) => OmegaMode::Fixed(*w as f64),
        Some(_) => return Err(ConfigError::invalid("omega", "expected \"adaptive\" or a number in (0, 1]")),
    };
    let cfg = SolverConfig {
        cfl_target: raw.cfl.unwrap_or(case.cfl_target),
        cfl_warmup: raw.cfl_warmup.unwrap_or(case.cfl_warmup),
        warmup_exit_ratio: raw.warmup_exit_ratio.unwrap_or(d.warmup_exit_ratio),
        omega,
        steady_tol: raw.steady_tol.unwrap_or(d.steady_tol),
        hard_tol: raw.hard_tol.unwrap_or(d.hard_tol),
        deep_convergence: raw.deep_convergence.unwrap_or(d.deep_convergence),
        max_pseudo_steps: raw.max_pseudo_steps.unwrap_or(d.max_pseudo_steps),
        max_newton_iters: raw.max_newton_iters.unwrap_or(d.max_newton_iters),
        freeze_jacobian_after_first: raw.freeze_jacobian.unwrap_or(d.freeze_jacobian_after_first),
        idp_slack: raw.idp_slack.unwrap_or(d.idp_slack),
        max_dt_halvings: raw.max_dt_halvings.unwrap_or(d.max_dt_halvings),
        divergence_factor: d.divergence_factor,
        stopping: StoppingRule::Idp,
        linear: LinearSolverSettings {
            tol_rel: raw.linear_tol.unwrap_or(d.linear.tol_rel),
            max_iter: raw.linear_max_iter.unwrap_or(d.linear.max_iter),
        },
    };
    cfg.validate().map_err(|e| match e {
        SolverError::InvalidConfig { field, reason } => ConfigError::invalid(field, reason),
        other => ConfigError::invalid("solver", other.to_string()),
    })?;
    Ok((cfg, scheme, gas, raw.low_order_start.unwrap_or(false)))
}

/// Parses and validates a configuration document, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let case = build_case(raw.case)?;
    let (solver, scheme, gas, low_order_start) = build_solver(&raw.solver, &case)?;
    case.free_stream
        .state(&gas)
        .map_err(|e| ConfigError::invalid("case", format!("free stream is not admissible: {e}")))?;
    let mut output = OutputConfig::default();
    if let Some(dir) = raw.output.dir {
        output.dir = dir;
    }
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            output.dir = PathBuf::from(dir);
        }
    }
    output.every = raw.output.every.unwrap_or(0);
    output.deterministic = raw.output.deterministic.unwrap_or(false);
    output.threads = raw.output.threads.unwrap_or(0);
    Ok(RunConfig { case, scheme, gas, solver, low_order_start, output })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_solver_section_gives_defaults() {
        let c = parse_config("[case]\nname = \"gamm\"\n[solver]\n").unwrap();
        assert_eq!(c.solver.cfl_target, 1e4);
        assert_eq!(c.solver.omega, OmegaMode::Adaptive { k: 3, omega0: 0.5 });
        assert_eq!(c.solver.steady_tol, 1e-8);
        assert_eq!(c.scheme, Scheme::Mcl);
        assert_eq!(c.case.mesh, MeshSource::Channel { channel: crate::cases::Channel::Gamm, nx: 60, ny: 20 });
    }

    #[test]
    fn omega_out_of_range_names_field() {
        let e = parse_config("[solver]\nomega = 1.5\n").unwrap_err();
        assert_eq!(e.field(), Some("omega"));
    }

    #[test]
    fn large_cfl_accepted() {
        let c = parse_config("[solver]\ncfl = 1e5\n").unwrap();
        assert_eq!(c.solver.cfl_target, 1e5);
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = parse_config("[case]\nname = \"gamm\"\n\n[solver\ncfl = 3\n").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 4, .. }), "{e:?}");
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse_config("[solver]\ncfll = 3\n").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 2, .. }), "{e:?}");
    }

    #[test]
    fn custom_case_needs_mesh_and_parses_patches() {
        assert_eq!(parse_config("[case]\nname = \"custom\"\nmach = 0.5\n").unwrap_err().field(), Some("mesh"));
        let c = parse_config(
            "[case]\nname = \"custom\"\nmesh = \"m.msh\"\nmach = 0.5\nalpha = 2.0\n\
             [case.patches]\n1 = \"farfield\"\n2 = \"pressure_outlet=0.5\"\n3 = \"wall\"\n",
        )
        .unwrap();
        assert_eq!(c.case.patches[&2], BcKind::PressureOutlet(0.5));
        assert!((c.case.free_stream.v.norm() - 0.5).abs() < 1e-15);
        let e = parse_config("[case]\nname = \"custom\"\nmesh = \"m.msh\"\nmach = 0.5\n[case.patches]\n1 = \"inflow\"\n")
            .unwrap_err();
        assert_eq!(e.field(), Some("patches.1"));
    }

    #[test]
    fn fixed_omega_and_low_order_scheme() {
        let c = parse_config("[solver]\nomega = 0.9\nscheme = \"low_order\"\n[case]\nname = \"nozzle_subsonic\"\nnx = 40\n")
            .unwrap();
        assert_eq!(c.solver.omega, OmegaMode::Fixed(0.9));
        assert_eq!(c.scheme, Scheme::LowOrder);
        assert!(matches!(c.case.mesh, MeshSource::Channel { nx: 40, ny: 20, .. }));
        assert_eq!(parse_config("[case]\nname = \"moon\"\n").unwrap_err().field(), Some("name"));
    }
}
