use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idp_euler::cases::{builtin, MeshSource, CASE_NAMES};
use idp_euler::checks::run_all;
use idp_euler::config::{parse_config, OutputConfig, RunConfig, OUTPUT_DIR_ENV};
use idp_euler::driver::{execute, RunSummary};
use idp_euler::euler::GasModel;
use idp_euler::limiter::Scheme;
use idp_euler::mesh::read_gmsh;
use idp_euler::solver::{OmegaMode, SolverConfig};

const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "idp-euler", version, about = "Steady compressible Euler solver with implicit convex limiting")]
struct Cli {
    /// Worker threads (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArgs {
    /// One of the built-in case names, or `list`.
    name: String,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Read the mesh from a Gmsh file instead of generating it.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Fixed underrelaxation factor; adaptive when omitted.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value = "mcl", value_parser = ["mcl", "low_order"])]
    scheme: String,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Converge to the hard tolerance instead of the default one.
    #[arg(long)]
    deep: bool,
    /// Start the limited scheme from the converged low-order solution.
    #[arg(long)]
    low_order_start: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write a VTK snapshot every N steps.
    #[arg(long, default_value_t = 0)]
    every: usize,
    /// Zero the wall-clock column so logs are reproducible.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the case described by a TOML configuration file.
    Run { config: PathBuf },
    /// Run a built-in benchmark case.
    Case(CaseArgs),
    /// Run the randomized invariant checks.
    Check {
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Print statistics of a Gmsh mesh file.
    MeshInfo { path: PathBuf },
}

fn case_config(args: &CaseArgs) -> Result<RunConfig, String> {
    let mut case = builtin(&args.name).map_err(|e| e.to_string())?;
    if let Some(m) = &args.mesh {
        case.mesh = MeshSource::File(m.clone());
    }
    case.mesh = case.mesh.with_resolution(args.nx, args.ny);
    let mut solver =
        SolverConfig { cfl_target: args.cfl.unwrap_or(case.cfl_target), cfl_warmup: case.cfl_warmup, ..Default::default() };
    if let Some(w) = args.omega {
        solver.omega = OmegaMode::Fixed(w);
    }
    if let Some(n) = args.max_steps {
        solver.max_pseudo_steps = n;
    }
    solver.deep_convergence = args.deep;
    solver.validate().map_err(|e| e.to_string())?;
    let scheme = if args.scheme == "low_order" { Scheme::LowOrder } else { Scheme::Mcl };
    let mut output = OutputConfig { every: args.every, deterministic: args.deterministic, ..OutputConfig::default() };
    output.dir = match (std::env::var(OUTPUT_DIR_ENV).ok().filter(|s| !s.is_empty()), &args.output) {
        (Some(env), _) => PathBuf::from(env),
        (None, Some(dir)) => dir.clone(),
        (None, None) => PathBuf::from("output").join(&args.name),
    };
    Ok(RunConfig { case, scheme, gas: GasModel::default(), solver, low_order_start: args.low_order_start, output })
}

fn report(summary: &RunSummary) -> ExitCode {
    println!(
        "status {:?}, {} steps, residual {:.3e}, output in {}",
        summary.status,
        summary.steps,
        summary.final_residual,
        summary.output_dir.display()
    );
    if summary.converged() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { config } => {
            let text = fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            let cfg = parse_config(&text).map_err(|e| format!("{}: {e}", config.display()))?;
            set_threads(cfg.output.threads.max(cli.threads))?;
            Ok(report(&execute(&cfg).map_err(|e| e.to_string())?))
        }
        Command::Case(args) => {
            if args.name == "list" {
                for n in CASE_NAMES {
                    println!("{n:<24}{}", builtin(n).map(|c| c.notes).unwrap_or(""));
                }
                return Ok(ExitCode::SUCCESS);
            }
            set_threads(cli.threads)?;
            let cfg = case_config(&args)?;
            Ok(report(&execute(&cfg).map_err(|e| e.to_string())?))
        }
        Command::Check { count, seed } => {
            set_threads(cli.threads)?;
            let reports = run_all(count, seed);
            for r in &reports {
                println!(
                    "[{}] {} ({} cases, worst {:.3e})",
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.name,
                    r.cases,
                    r.worst
                );
            }
            Ok(if reports.iter().all(|r| r.passed()) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::MeshInfo { path } => {
            let file = fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mesh = read_gmsh(BufReader::new(file)).map_err(|e| e.to_string())?;
            let areas: Vec<f64> = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).collect();
            println!("vertices   {}", mesh.num_vertices());
            println!("triangles  {}", mesh.triangles.len());
            println!("area       {:.12e}", mesh.total_area());
            println!(
                "cell area  min {:.3e}  max {:.3e}",
                areas.iter().copied().fold(f64::INFINITY, f64::min),
                areas.iter().copied().fold(0.0, f64::max)
            );
            for p in mesh.used_patches() {
                let n = mesh.boundary_edges.iter().filter(|e| e.patch == p).count();
                let name = mesh.patch_names.get(&p).map_or("", String::as_str);
                println!("patch {p:<4} {name:<16} {n} edges");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn set_threads(n: usize) -> Result<(), String> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
