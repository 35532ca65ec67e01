//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use idp_euler::assembly::{apply_periodic, assemble, DiscreteOperators};
use idp_euler::cases::builtin;
use idp_euler::euler::{GasModel, State};
use idp_euler::limiter::{
    limit_density, limit_fluxes, limit_pair, low_order_time_derivatives, pressure_fix, target_fluxes, LocalBounds,
    PairBars, Scheme,
};
use idp_euler::linalg::LinearSolverSettings;
use idp_euler::low_order::{bar_state, compute_edge_coefficients, BoundaryConditions};
use idp_euler::mesh::generate_periodic_strip;
use idp_euler::solver::{
    choose_omega, compute_dt, contraction_dt_bound, newton_step, omega_candidates, psi_s_iterate, run_to_steady_with,
    Discretization, OmegaMode, SolverConfig, SteadyRun, StoppingRule,
};
use nalgebra::{Matrix4, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = 1.4;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn pressure(u: &State) -> f64 {
    (GAMMA - 1.0) * (u[3] - 0.5 * (u[1] * u[1] + u[2] * u[2]) / u[0])
}

fn conserved(rho: f64, vx: f64, vy: f64, p: f64) -> State {
    State::new(rho, rho * vx, rho * vy, p / (GAMMA - 1.0) + 0.5 * rho * (vx * vx + vy * vy))
}

fn random_state(rng: &mut ChaCha8Rng) -> State {
    conserved(rng.gen_range(0.05..20.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(0.01..20.0))
}

fn moderate_state(rng: &mut ChaCha8Rng) -> State {
    conserved(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0))
}

fn unit(rng: &mut ChaCha8Rng) -> Vector2<f64> {
    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    Vector2::new(a.cos(), a.sin())
}

fn torus(n: usize, scheme: Scheme) -> Discretization {
    let p = generate_periodic_strip(n, n, (1.0, 1.0)).expect("periodic grid");
    let ops = apply_periodic(&assemble(&p.mesh).expect("assembly"), &p.pairing).expect("pairing");
    Discretization::new(ops, BoundaryConditions::new(), GasModel::default(), scheme)
}

fn specific(u: &State) -> [f64; 4] {
    [u[0], u[1] / u[0], u[2] / u[0], u[3] / u[0]]
}

/// Flux of the 2D Euler equations written out directly.
fn euler_flux(u: &State) -> (State, State) {
    let (rho, vx, vy) = (u[0], u[1] / u[0], u[2] / u[0]);
    let p = pressure(u);
    (
        State::new(rho * vx, rho * vx * vx + p, rho * vx * vy, (u[3] + p) * vx),
        State::new(rho * vy, rho * vx * vy, rho * vy * vy + p, (u[3] + p) * vy),
    )
}

fn c1_homogeneity() -> Outcome {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_h, mut worst_e) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let u = random_state(&mut rng);
        let jac = gas.flux_jacobians_unchecked(&u);
        let (f1, f2) = euler_flux(&u);
        let fnorm = (f1.norm_squared() + f2.norm_squared()).sqrt();
        worst_h = worst_h.max(((jac.a1 * u - f1).norm() + (jac.a2 * u - f2).norm()) / fnorm);

        let n = unit(&mut rng);
        let an: Matrix4<f64> = jac.directional(&n);
        let mut eig: Vec<f64> = an.complex_eigenvalues().iter().map(|z| z.re).collect();
        let imag = an.complex_eigenvalues().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        eig.sort_by(f64::total_cmp);
        let vn = (u[1] * n.x + u[2] * n.y) / u[0];
        let c = (GAMMA * pressure(&u) / u[0]).sqrt();
        let expected = [vn - c, vn, vn, vn + c];
        let err = eig.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(imag, f64::max);
        worst_e = worst_e.max(err / (vn.abs() + c).max(1.0));
    }
    outcome(
        worst_h <= 1e-12 && worst_e <= 1e-8,
        format!("homogeneity rel. error {worst_h:.2e} (<= 1e-12), eigenvalue error {worst_e:.2e} (<= 1e-8)"),
    )
}

fn rusanov(ui: &State, uj: &State, n: &Vector2<f64>) -> f64 {
    let speed = |u: &State| ((u[1] * n.x + u[2] * n.y) / u[0]).abs() + (GAMMA * pressure(u) / u[0]).sqrt();
    speed(ui).max(speed(uj))
}

fn c2_bar_states() -> Outcome {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_p, mut worst_formula) = (0.0f64, 0.0f64);
    let mut min_rho = f64::INFINITY;
    for _ in 0..100_000 {
        let (ui, uj) = (random_state(&mut rng), random_state(&mut rng));
        let c = unit(&mut rng) * rng.gen_range(1e-3..2.0);
        let d = rusanov(&ui, &uj, &(c / c.norm())) * c.norm();
        let (fi, fj) = (gas.flux_unchecked(&ui), gas.flux_unchecked(&uj));
        let bar = bar_state(&ui, &uj, &fi, &fj, &c, d);
        let (gi, gj) = (euler_flux(&ui), euler_flux(&uj));
        let expected = (ui + uj) * 0.5 - ((gj.0 - gi.0) * c.x + (gj.1 - gi.1) * c.y) / (2.0 * d);
        worst_formula = worst_formula.max((bar - expected).amax() / expected.amax());
        min_rho = min_rho.min(bar[0]);
        worst_p = worst_p.max(-pressure(&bar) / bar[3].abs().max(f64::MIN_POSITIVE));
    }
    outcome(
        min_rho > 0.0 && worst_p <= 1e-12 && worst_formula <= 1e-13,
        format!("min density {min_rho:.2e}, worst -p/scale {worst_p:.2e} (<= 1e-12), formula mismatch {worst_formula:.2e}"),
    )
}

fn bounds_of(points: &[[f64; 4]]) -> LocalBounds {
    let mut b = LocalBounds { min: [f64::INFINITY; 4], max: [f64::NEG_INFINITY; 4] };
    for q in points {
        for k in 0..4 {
            b.min[k] = b.min[k].min(q[k]);
            b.max[k] = b.max[k].max(q[k]);
        }
    }
    b
}

/// Relative amount by which `x` leaves `[lo, hi]`.
fn excess(x: f64, lo: f64, hi: f64) -> f64 {
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    ((lo - x).max(x - hi)).max(0.0) / scale
}

/// Random pair with local bounds built from the two states, the bar average
/// and one extra random neighbour per side.
fn random_limiter_input(rng: &mut ChaCha8Rng, gas: &GasModel) -> (PairBars, LocalBounds, LocalBounds, State) {
    let (ui, uj) = (random_state(rng), random_state(rng));
    let c = unit(rng) * rng.gen_range(0.01..1.0);
    let d = rusanov(&ui, &uj, &(c / c.norm())) * c.norm();
    let (fi, fj) = (gas.flux_unchecked(&ui), gas.flux_unchecked(&uj));
    let pair = PairBars { d, ij: bar_state(&ui, &uj, &fi, &fj, &c, d), ji: bar_state(&uj, &ui, &fj, &fi, &(-c), d) };
    let rho = pair.ij[0] + pair.ji[0];
    let phi = |k: usize| (pair.ij[k] + pair.ji[k]) / rho;
    let avg_i = [pair.ij[0], phi(1), phi(2), phi(3)];
    let avg_j = [pair.ji[0], phi(1), phi(2), phi(3)];
    let bi = bounds_of(&[specific(&ui), specific(&uj), avg_i, specific(&random_state(rng))]);
    let bj = bounds_of(&[specific(&uj), specific(&ui), avg_j, specific(&random_state(rng))]);
    let scale = 10f64.powf(rng.gen_range(-3.0..2.0)) * d * ui.amax().max(uj.amax());
    let f = State::from_fn(|_, _| rng.gen_range(-1.0..1.0)) * scale;
    (pair, bi, bj, f)
}

fn c3_limiter_dmp() -> Outcome {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let tol = 1e-12;
    let (mut rho_viol, mut phi_viol) = (0usize, 0usize);
    let (mut worst_rho, mut worst_phi) = (0.0f64, 0.0f64);
    // density limiter alone
    for _ in 0..10_000 {
        let (pair, bi, bj, f) = random_limiter_input(&mut rng, &gas);
        let fr = limit_density(f[0], &pair, &bi, &bj);
        let d2 = 2.0 * pair.d;
        let e = excess(pair.ij[0] + fr / d2, bi.min[0], bi.max[0]).max(excess(pair.ji[0] - fr / d2, bj.min[0], bj.max[0]));
        worst_rho = worst_rho.max(e);
        rho_viol += usize::from(e > tol);
    }
    // full sequential limiter: product bounds of v1, v2, E
    for _ in 0..10_000 {
        let (pair, bi, bj, f) = random_limiter_input(&mut rng, &gas);
        let (fs, _) = limit_pair(&f, &pair, &bi, &bj).expect("positive bar densities");
        let d2 = 2.0 * pair.d;
        let (si, sj) = (specific(&(pair.ij + fs / d2)), specific(&(pair.ji - fs / d2)));
        let mut e = 0.0f64;
        for k in 1..4 {
            e = e.max(excess(si[k], bi.min[k], bi.max[k])).max(excess(sj[k], bj.min[k], bj.max[k]));
        }
        worst_phi = worst_phi.max(e);
        phi_viol += usize::from(e > tol);
    }
    // edge fluxes on a mesh: bounds from neighbours and bar states, exact antisymmetry
    let disc = torus(8, Scheme::Mcl);
    let ops = &disc.ops;
    let mut antisym_fail = 0usize;
    let mut mesh_viol = 0usize;
    let mut mesh_edges = 0usize;
    while mesh_edges < 10_000 {
        let u: Vec<State> = (0..ops.num_nodes()).map(|_| random_state(&mut rng)).collect();
        let edge = compute_edge_coefficients(&u, ops, &gas).expect("admissible field");
        let target = if mesh_edges.is_multiple_of(2) {
            let udot = low_order_time_derivatives(&u, ops, &disc.bcs, &gas).expect("admissible field");
            target_fluxes(&u, &udot, ops, &edge)
        } else {
            edge.d.iter().map(|d| State::from_fn(|_, _| rng.gen_range(-10.0..10.0)) * *d).collect()
        };
        let lim = limit_fluxes(&u, &target, &edge, ops).expect("limiter");
        let b = independent_bounds(&u, &edge, ops);
        for (k, e) in ops.edges.iter().enumerate() {
            mesh_edges += 1;
            let (fij, fji) = (lim.directed(k, e, e.i), lim.directed(k, e, e.j));
            if fij.iter().zip(fji.iter()).any(|(a, b)| a.to_bits() != (-b).to_bits()) {
                antisym_fail += 1;
            }
            let d2 = 2.0 * edge.d[k];
            let (si, sj) = (specific(&(edge.bar_ij[k] + lim.fstar[k] / d2)), specific(&(edge.bar_ji[k] - lim.fstar[k] / d2)));
            let mut ex = 0.0f64;
            for c in 0..4 {
                ex = ex.max(excess(si[c], b[e.i].min[c], b[e.i].max[c])).max(excess(sj[c], b[e.j].min[c], b[e.j].max[c]));
            }
            mesh_viol += usize::from(ex > tol);
        }
    }
    outcome(
        rho_viol == 0 && phi_viol == 0 && mesh_viol == 0 && antisym_fail == 0,
        format!(
            "density violations {rho_viol}/10000 (worst {worst_rho:.1e}), product violations {phi_viol}/10000 \
             (worst {worst_phi:.1e}), mesh edges {mesh_edges} with {mesh_viol} violations, antisymmetry failures {antisym_fail}"
        ),
    )
}

fn independent_bounds(
    u: &[State],
    edge: &idp_euler::low_order::EdgeCoefficients,
    ops: &DiscreteOperators,
) -> Vec<LocalBounds> {
    let mut pts: Vec<Vec<[f64; 4]>> = u.iter().map(|x| vec![specific(x)]).collect();
    for (k, e) in ops.edges.iter().enumerate() {
        pts[e.i].push(specific(&u[e.j]));
        pts[e.j].push(specific(&u[e.i]));
        let (a, b) = (edge.bar_ij[k], edge.bar_ji[k]);
        let rho = a[0] + b[0];
        let phi = [(a[1] + b[1]) / rho, (a[2] + b[2]) / rho, (a[3] + b[3]) / rho];
        pts[e.i].push([a[0], phi[0], phi[1], phi[2]]);
        pts[e.j].push([b[0], phi[0], phi[1], phi[2]]);
    }
    pts.iter().map(|p| bounds_of(p)).collect()
}

/// `P_ij(alpha)` and `Q_ij` as printed, for the bar state `bar` and flux `f`.
fn printed_p_q(f: &State, d: f64, bar: &State, alpha: f64) -> (f64, f64) {
    let fm2 = f[1] * f[1] + f[2] * f[2];
    let p = (0.5 * fm2 - f[3] * f[0]) * alpha * alpha
        + 2.0 * d * (bar[1] * f[1] + bar[2] * f[2] - bar[0] * f[3] - bar[3] * f[0]) * alpha;
    let bm2 = bar[1] * bar[1] + bar[2] * bar[2];
    let q = (2.0 * d) * (2.0 * d) * bar[0] * (bar[3] - bm2 / (2.0 * bar[0]));
    (p, q)
}

fn c4_pressure_fix() -> Outcome {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst_p, mut worst_pq) = (0.0f64, 0.0f64);
    let mut bad = 0usize;
    for _ in 0..10_000 {
        let (pair, bi, bj, f) = random_limiter_input(&mut rng, &gas);
        let (fs, alpha) = limit_pair(&f, &pair, &bi, &bj).expect("positive bar densities");
        let a2 = pressure_fix(&fs, &pair);
        let mut ok = alpha == a2 && (0.0..=1.0).contains(&alpha);
        for (bar, g) in [(pair.ij, fs), (pair.ji, -fs)] {
            let star = bar + g * (alpha / (2.0 * pair.d));
            let e = -pressure(&star) / star[3].abs().max(f64::MIN_POSITIVE);
            worst_p = worst_p.max(e);
            let (p, q) = printed_p_q(&g, pair.d, &bar, alpha);
            let r = (p - q) / ((2.0 * pair.d).powi(2) * bar[0] * bar[3]);
            worst_pq = worst_pq.max(r);
            ok &= e <= 1e-12 && r <= 1e-12;
        }
        bad += usize::from(!ok);
    }
    outcome(
        bad == 0,
        format!("{bad}/10000 failures, worst -p/scale {worst_p:.2e}, worst (P - Q)/scale {worst_pq:.2e}"),
    )
}

fn c5_conservation() -> Outcome {
    let disc = torus(8, Scheme::Mcl);
    let total = |v: &[State]| v.iter().zip(&disc.ops.lumped).fold(State::zeros(), |s, (x, m)| s + x * *m);
    let mut worst = 0.0f64;
    let mut iterates = 0usize;
    // once with the admissibility stopping rule, once iterating Newton to convergence
    for (seed, stopping) in [(505, StoppingRule::Idp), (506, StoppingRule::Converged { tol: 1e-10 })] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u: Vec<State> = (0..disc.num_nodes()).map(|_| moderate_state(&mut rng)).collect();
        let scale = u.iter().zip(&disc.ops.lumped).fold(State::zeros(), |s, (x, m)| s + x.abs() * *m);
        let t0 = total(&u);
        let cfg = SolverConfig {
            stopping,
            max_newton_iters: 500,
            linear: LinearSolverSettings { tol_rel: 1e-13, max_iter: 2000 },
            ..SolverConfig::default()
        };
        for step in 0..20 {
            let dt = match disc.evaluate(&u).map_err(|e| e.to_string()).and_then(|ev| {
                compute_dt(&ev.edge, &disc.ops, 100.0).map_err(|e| e.to_string())
            }) {
                Ok(dt) => dt,
                Err(e) => return outcome(false, format!("step {step}: {e}")),
            };
            let mut observe = |_: usize, v: &[State]| {
                iterates += 1;
                let t = total(v);
                for k in 0..4 {
                    worst = worst.max((t[k] - t0[k]).abs() / scale[k]);
                }
            };
            match newton_step(&disc, &u, dt, &cfg, &mut observe) {
                Ok(out) => u = out.u,
                Err(e) => return outcome(false, format!("step {step}: {e}")),
            }
        }
    }
    outcome(
        worst <= 1e-11,
        format!("{iterates} Newton iterates over 2 x 20 steps, worst relative drift {worst:.2e} (<= 1e-11)"),
    )
}

fn c6_psi_contraction() -> Outcome {
    let disc = torus(8, Scheme::Mcl);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u: Vec<State> = (0..disc.num_nodes())
        .map(|_| {
            let rho = rng.gen_range(0.5..2.0);
            let v = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            conserved(rho, v.x, v.y, rng.gen_range(0.5..2.0))
        })
        .collect();
    let ev = disc.evaluate(&u).expect("admissible data");
    let dt = 0.9 * contraction_dt_bound(&ev.edge, &disc.ops, 0.0).expect("nonzero viscosity");
    let mut inadmissible = 0usize;
    let mut check = |_: usize, v: &[State]| {
        inadmissible += v.iter().filter(|x| !(x[0] > 0.0 && pressure(x) > 0.0)).count();
    };
    let psi = match psi_s_iterate(&disc, &u, 1.0, dt, 1e-13, 10_000, &mut check) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("fixed-point iteration failed: {e}")),
    };
    let max_ratio = psi.ratios.iter().copied().fold(0.0, f64::max);
    let cfg = SolverConfig {
        stopping: StoppingRule::Converged { tol: 1e-14 },
        max_newton_iters: 200,
        linear: LinearSolverSettings { tol_rel: 1e-14, max_iter: 1000 },
        ..SolverConfig::default()
    };
    let dc = match newton_step(&disc, &u, dt, &cfg, &mut |_, _| {}) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("deferred correction failed: {e}")),
    };
    let diff = psi.u.iter().zip(&dc.u).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    outcome(
        max_ratio < 1.0 && inadmissible == 0 && diff <= 1e-10,
        format!(
            "{} nodes, {} iterations, max ratio {max_ratio:.3}, inadmissible iterates {inadmissible}, \
             difference to deferred correction ({} iterations) {diff:.2e} (<= 1e-10)",
            disc.num_nodes(),
            psi.iterations,
            dc.iterations
        ),
    )
}

fn gamm_run(cfl: f64, max_steps: usize, inadmissible: &mut usize) -> Result<SteadyRun, String> {
    let case = builtin("gamm").map_err(|e| e.to_string())?;
    let gas = GasModel::default();
    let (_, disc) = case.discretize(gas, Scheme::Mcl).map_err(|e| e.to_string())?;
    let u0 = case.initial_state(disc.num_nodes(), &gas).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { cfl_target: cfl, max_pseudo_steps: max_steps, ..SolverConfig::default() };
    let mut check = |_: &idp_euler::solver::ConvergenceRecord, u: &[State]| {
        *inadmissible += u.iter().filter(|x| !(x[0] > 0.0 && pressure(x) > 0.0)).count();
    };
    run_to_steady_with(&disc, &u0, &cfg, &mut check, &mut |_| {}).map_err(|e| e.to_string())
}

fn c7_c8_gamm() -> (Outcome, Outcome) {
    let mut results = Vec::new();
    for cfl in [1e4, 1e2, 1.0] {
        let mut bad = 0usize;
        let run = gamm_run(cfl, 2000, &mut bad);
        results.push((cfl, run, bad));
    }
    let c7 = {
        let mut ok = true;
        let mut parts = Vec::new();
        for (cfl, run, bad) in &results {
            match run {
                Ok(r) => {
                    ok &= *bad == 0 && r.records.len() > 1;
                    parts.push(format!("CFL {cfl:e}: {} states, {bad} inadmissible nodes", r.records.len()));
                }
                Err(e) => {
                    ok = false;
                    parts.push(format!("CFL {cfl:e}: error {e}"));
                }
            }
        }
        outcome(ok, parts.join("; "))
    };
    let c8 = match (&results[0].1, &results[2].1) {
        (Ok(fast), Ok(slow)) => {
            let r = fast.records.last().map_or(f64::NAN, |x| x.residual);
            let slow_steps = if slow.converged() { slow.steps() } else { usize::MAX };
            outcome(
                fast.converged() && r < 1e-8 && fast.steps() <= 2000 && fast.steps() < slow_steps,
                format!(
                    "CFL 1e4: {:?} in {} steps (r = {r:.2e}); CFL 1: {:?} after {} steps",
                    fast.status,
                    fast.steps(),
                    slow.status,
                    slow.steps()
                ),
            )
        }
        (a, b) => outcome(false, format!("runs failed: {:?} / {:?}", a.as_ref().err(), b.as_ref().err())),
    };
    (c7, c8)
}

fn entropy_vars(u: &State) -> [f64; 4] {
    let p = pressure(u);
    let rho = u[0];
    let s = (p / rho.powf(GAMMA)).ln();
    let v2 = (u[1] * u[1] + u[2] * u[2]) / (rho * rho);
    [(GAMMA - s) / (GAMMA - 1.0) - rho * v2 / (2.0 * p), u[1] / p, u[2] / p, -rho / p]
}

fn independent_entropy_norm(disc: &Discretization, u: &[State]) -> Result<f64, String> {
    let r = disc.steady_residual(u).map_err(|e| e.to_string())?;
    let w: Vec<f64> = (0..u.len())
        .map(|i| {
            let v = entropy_vars(&u[i]);
            (0..4).map(|k| v[k] * r[i][k]).sum::<f64>() / disc.ops.lumped[i]
        })
        .collect();
    let p = &disc.ops.pattern;
    let mut acc = 0.0;
    for i in 0..u.len() {
        for k in p.row(i) {
            acc += w[i] * disc.ops.mass[k] * w[p.col_idx[k]];
        }
    }
    Ok(acc.max(0.0).sqrt())
}

fn c9_omega() -> Outcome {
    let cands = omega_candidates(3, 0.5);
    let exact = cands == vec![0.5, 0.75, 1.0];
    let mut case = builtin("gamm").expect("builtin case");
    case.mesh = case.mesh.with_resolution(Some(12), Some(4));
    let gas = GasModel::default();
    let (_, disc) = case.discretize(gas, Scheme::Mcl).expect("discretization");
    let base = case.initial_state(disc.num_nodes(), &gas).expect("free stream");
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut mismatch, mut near_ties, mut worst_norm) = (0usize, 0usize, 0.0f64);
    for _ in 0..1000 {
        let u_n: Vec<State> = base
            .iter()
            .map(|b| {
                let q = specific(b);
                let s: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let (rho, vx, vy) = (q[0] * (1.0 + 0.1 * s[0]), q[1] * (1.0 + 0.2 * s[1]), q[2] + 0.05 * s[2]);
                conserved(rho, vx, vy, pressure(b) * (1.0 + 0.1 * s[3]))
            })
            .collect();
        let amp = 10f64.powf(rng.gen_range(-3.0..-1.0));
        let du: Vec<State> = u_n.iter().map(|x| x.map(|c| c * amp * rng.gen_range(-1.0..1.0))).collect();
        let (w, norms) = match choose_omega(&disc, &u_n, &du, &cands) {
            Ok(x) => x,
            Err(e) => return outcome(false, format!("choose_omega failed: {e}")),
        };
        let mine: Vec<f64> = cands
            .iter()
            .map(|w| {
                let t: Vec<State> = u_n.iter().zip(&du).map(|(a, b)| a + b * *w).collect();
                independent_entropy_norm(&disc, &t).expect("admissible trial")
            })
            .collect();
        for (a, b) in norms.iter().zip(&mine) {
            worst_norm = worst_norm.max((a - b).abs() / b.max(f64::MIN_POSITIVE));
        }
        // brute force: smallest norm, largest omega among exact ties
        let mut best = 0;
        for k in 1..cands.len() {
            if mine[k] <= mine[best] {
                best = k;
            }
        }
        if cands[best] != w {
            let gap = (mine[best] - mine[cands.iter().position(|c| *c == w).unwrap()]).abs();
            if gap <= 1e-12 * mine[best] {
                near_ties += 1;
            } else {
                mismatch += 1;
            }
        }
    }
    outcome(
        exact && mismatch == 0 && worst_norm <= 1e-10,
        format!(
            "candidates {cands:?}, {mismatch}/1000 mismatches ({near_ties} within round-off), norm agreement {worst_norm:.1e}"
        ),
    )
}

fn c10_nozzle() -> Outcome {
    let case = builtin("nozzle_subsonic").expect("builtin case");
    let gas = GasModel::default();
    let (mesh, disc) = case.discretize(gas, Scheme::Mcl).expect("discretization");
    let u0 = case.initial_state(disc.num_nodes(), &gas).expect("free stream");
    let run = |omega: OmegaMode, steps: usize| {
        let cfg = SolverConfig { omega, max_pseudo_steps: steps, ..SolverConfig::default() };
        run_to_steady_with(&disc, &u0, &cfg, &mut |_, _| {}, &mut |_| {})
    };
    let fixed = run(OmegaMode::Fixed(0.9), 3000);
    let adaptive = run(OmegaMode::Adaptive { k: 3, omega0: 0.5 }, 3000);
    match (fixed, adaptive) {
        (Ok(f), Ok(a)) => {
            let rf = f.records.last().map_or(f64::NAN, |x| x.residual);
            let ra = a.records.last().map_or(f64::NAN, |x| x.residual);
            outcome(
                !f.converged() && a.converged() && ra < 1e-8,
                format!(
                    "{} nodes; omega 0.9: {:?} at r = {rf:.2e} after {} steps; adaptive: {:?} at r = {ra:.2e} after {} steps",
                    mesh.num_vertices(),
                    f.status,
                    f.steps(),
                    a.status,
                    a.steps()
                ),
            )
        }
        // an error in the fixed-omega run counts as divergence
        (Err(e), Ok(a)) => outcome(a.converged(), format!("omega 0.9 failed ({e}); adaptive {:?} after {} steps", a.status, a.steps())),
        (_, Err(e)) => outcome(false, format!("adaptive run failed: {e}")),
    }
}

fn c11_entropy_gradient() -> Outcome {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut ratios = Vec::with_capacity(1000);
    let mut worst_rel = 0.0f64;
    for _ in 0..1000 {
        let u = random_state(&mut rng);
        let v = gas.entropy_variables(&u).expect("admissible");
        let mine = entropy_vars(&u);
        for k in 0..4 {
            worst_rel = worst_rel.max((v[k] - mine[k]).abs() / mine[k].abs().max(1.0));
        }
        let eta = |x: &State| gas.entropy(x).expect("admissible");
        let e0 = eta(&u);
        let h0 = 1e-3 * pressure(&u).min(u[0]) / (1.0 + (u[1] * u[1] + u[2] * u[2]) / (u[0] * u[0]));
        let err = |h: f64| -> f64 {
            (0..4)
                .map(|k| {
                    let mut up = u;
                    up[k] += h;
                    ((eta(&up) - e0) / h - v[k]).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        };
        ratios.push(err(h0) / err(h0 / 2.0));
    }
    ratios.sort_by(f64::total_cmp);
    let (lo, med, hi) = (ratios[0], ratios[ratios.len() / 2], ratios[ratios.len() - 1]);
    outcome(
        worst_rel <= 1e-12 && lo > 1.8 && hi < 2.2,
        format!(
            "analytic vs. closed form {worst_rel:.1e}; forward-difference error ratio for h -> h/2: \
             min {lo:.4}, median {med:.4}, max {hi:.4} (first order: 2)"
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, t: Instant, o: Outcome| {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2} {name}: {} ({:.1} s)", o.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!o.passed);
    };
    let t = Instant::now();
    report(1, "flux homogeneity and eigenvalues", t, c1_homogeneity());
    let t = Instant::now();
    report(2, "bar states are admissible", t, c2_bar_states());
    let t = Instant::now();
    report(3, "limiter local bounds", t, c3_limiter_dmp());
    let t = Instant::now();
    report(4, "pressure fix", t, c4_pressure_fix());
    let t = Instant::now();
    report(5, "conservation of Newton iterates", t, c5_conservation());
    let t = Instant::now();
    report(6, "fixed-point contraction and agreement", t, c6_psi_contraction());
    let t = Instant::now();
    let (c7, c8) = c7_c8_gamm();
    report(7, "admissible pseudo-time stepping (GAMM)", t, c7);
    report(8, "steady convergence (GAMM)", t, c8);
    let t = Instant::now();
    report(9, "underrelaxation choice", t, c9_omega());
    let t = Instant::now();
    report(10, "subsonic nozzle, fixed vs adaptive omega", t, c10_nozzle());
    let t = Instant::now();
    report(11, "entropy-variable gradient", t, c11_entropy_gradient());
    if failed == 0 {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
