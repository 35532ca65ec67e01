//! Randomized self-checks of the core invariants, run by `idp-euler check`.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{apply_periodic, assemble};
use crate::euler::{GasModel, State};
use crate::limiter::{limit_pair, pressure_quadratic, LocalBounds, PairBars, Scheme};
use crate::low_order::{bar_state, BoundaryConditions};
use crate::mesh::generate_periodic_strip;
use crate::solver::{compute_dt, newton_step, Discretization, SolverConfig, StoppingRule};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest violation seen, in the check's own units.
    pub worst: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    report: CheckReport,
    tol: f64,
}

impl Tally {
    fn new(name: &'static str, tol: f64) -> Self {
        Self { report: CheckReport { name, cases: 0, failures: 0, worst: 0.0 }, tol }
    }

    fn record(&mut self, violation: f64) {
        self.report.cases += 1;
        if !(violation <= self.tol) {
            self.report.failures += 1;
        }
        if violation.is_nan() || violation > self.report.worst {
            self.report.worst = violation;
        }
    }
}

pub fn random_state(rng: &mut impl Rng, gas: &GasModel) -> State {
    let rho = rng.gen_range(0.1..10.0);
    let v = Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let p = rng.gen_range(0.1..10.0);
    gas.primitive_to_conserved(rho, v, p).expect("positive density and pressure")
}

fn random_pair(rng: &mut impl Rng, gas: &GasModel) -> (State, State, PairBars) {
    let ui = random_state(rng, gas);
    let uj = random_state(rng, gas);
    let c = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let n = c / c.norm();
    let d = gas.rusanov_speed(&ui, &uj, &n).expect("admissible") * c.norm();
    let (fi, fj) = (gas.flux_unchecked(&ui), gas.flux_unchecked(&uj));
    let pair = PairBars { d, ij: bar_state(&ui, &uj, &fi, &fj, &c, d), ji: bar_state(&uj, &ui, &fj, &fi, &(-c), d) };
    (ui, uj, pair)
}

fn specific(u: &State) -> [f64; 4] {
    [u[0], u[1] / u[0], u[2] / u[0], u[3] / u[0]]
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

/// Relative error of `f(u) n` against `A_n(u) u`.
pub fn check_flux_homogeneity(count: usize, seed: u64) -> CheckReport {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("flux homogeneity f(u) = A(u) u", 1e-12);
    for _ in 0..count {
        let u = random_state(&mut rng, &gas);
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let n = Vector2::new(angle.cos(), angle.sin());
        let direct = gas.flux_unchecked(&u) * n;
        let via = gas.directional_jacobian_unchecked(&u, &n) * u;
        t.record((direct - via).amax() / direct.amax().max(1.0));
    }
    t.report
}

/// Bar states of admissible pairs have positive density and pressure.
pub fn check_bar_states(count: usize, seed: u64) -> CheckReport {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("bar states admissible", 0.0);
    for _ in 0..count {
        let (_, _, pair) = random_pair(&mut rng, &gas);
        for b in [pair.ij, pair.ji] {
            let ok = b[0] > 0.0 && gas.pressure(&b).is_ok_and(|p| p > 0.0);
            t.record(if ok { 0.0 } else { 1.0 });
        }
    }
    t.report
}

/// Limited bar states respect the local bounds, and the pressure-corrected
/// flux keeps the pressure nonnegative.
pub fn check_limiter(count: usize, seed: u64) -> CheckReport {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("limiter local bounds and pressure", 1e-10);
    for _ in 0..count {
        let (ui, uj, pair) = random_pair(&mut rng, &gas);
        let avg = {
            let rho = pair.ij[0] + pair.ji[0];
            [0.0, (pair.ij[1] + pair.ji[1]) / rho, (pair.ij[2] + pair.ji[2]) / rho, (pair.ij[3] + pair.ji[3]) / rho]
        };
        let extra_i = specific(&random_state(&mut rng, &gas));
        let extra_j = specific(&random_state(&mut rng, &gas));
        let (mut ai, mut aj) = (avg, avg);
        ai[0] = pair.ij[0];
        aj[0] = pair.ji[0];
        let bi = bounds_of(&[specific(&ui), specific(&uj), ai, extra_i]);
        let bj = bounds_of(&[specific(&uj), specific(&ui), aj, extra_j]);
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let f = State::from_fn(|_, _| rng.gen_range(-1.0..1.0)) * scale * pair.d;
        let Ok((fs, alpha)) = limit_pair(&f, &pair, &bi, &bj) else {
            t.record(f64::INFINITY);
            continue;
        };
        let d2 = 2.0 * pair.d;
        let mut worst = 0.0f64;
        for (bar, sign, b) in [(pair.ij, 1.0, &bi), (pair.ji, -1.0, &bj)] {
            let star = bar + fs * (sign / d2);
            let q = specific(&star);
            for k in 0..4 {
                let width = (b.max[k] - b.min[k]).abs().max(b.max[k].abs()).max(1.0);
                worst = worst.max((b.min[k] - q[k]) / width).max((q[k] - b.max[k]) / width);
            }
            let (p, qq) = pressure_quadratic(&(fs * sign), pair.d, &bar, alpha);
            worst = worst.max((p - qq) / (d2 * d2 * bar[0] * bar[3]));
            let fixed = bar + fs * (sign * alpha / d2);
            worst = worst.max(-gas.pressure_unchecked(&fixed) / bar[3]);
        }
        t.record(worst);
    }
    t.report
}

/// Central finite differences of the entropy match the entropy variables.
pub fn check_entropy_variables(count: usize, seed: u64) -> CheckReport {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("entropy variables = d eta / du", 1e-6);
    for _ in 0..count {
        let u = random_state(&mut rng, &gas);
        let v = gas.entropy_variables(&u).expect("admissible");
        let p = gas.pressure_unchecked(&u);
        let speed2 = (u[1] * u[1] + u[2] * u[2]) / (u[0] * u[0]);
        // the pressure reacts to du with weights up to |v|^2
        let h = 1e-4 * p.min(u[0]) / (1.0 + speed2);
        let mut err = 0.0f64;
        for k in 0..4 {
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let fd = (gas.entropy(&up).unwrap() - gas.entropy(&dn).unwrap()) / (2.0 * h);
            err = err.max((fd - v[k]).abs() / v.amax().max(1.0));
        }
        t.record(err);
    }
    t.report
}

/// One implicit step on a periodic grid conserves `sum_i m_i u_i`.
pub fn check_conservation(seed: u64) -> CheckReport {
    let gas = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("periodic implicit step conserves mass-weighted sums", 1e-10);
    let strip = generate_periodic_strip(6, 6, (1.0, 1.0)).expect("valid grid");
    let ops = apply_periodic(&assemble(&strip.mesh).expect("valid mesh"), &strip.pairing).expect("valid pairing");
    let disc = Discretization::new(ops, BoundaryConditions::new(), gas, Scheme::Mcl);
    let u_n: Vec<State> = (0..disc.num_nodes()).map(|_| random_state(&mut rng, &gas)).collect();
    let total = |u: &[State]| u.iter().zip(&disc.ops.lumped).fold(State::zeros(), |s, (x, m)| s + x * *m);
    let before = total(&u_n);
    let mut cfg = SolverConfig { stopping: StoppingRule::Converged { tol: 1e-10 }, ..SolverConfig::default() };
    cfg.linear.tol_rel = 1e-13;
    cfg.linear.max_iter = 2000;
    let dt = disc.evaluate(&u_n).and_then(|ev| compute_dt(&ev.edge, &disc.ops, 10.0));
    let step = dt.and_then(|dt| newton_step(&disc, &u_n, dt, &cfg, &mut |_, _| {}));
    match step {
        Ok(out) => t.record((total(&out.u) - before).amax() / before.amax()),
        Err(_) => t.record(f64::INFINITY),
    }
    t.report
}

/// All suites with `count` random cases each.
pub fn run_all(count: usize, seed: u64) -> Vec<CheckReport> {
    vec![
        check_flux_homogeneity(count, seed),
        check_bar_states(count, seed.wrapping_add(1)),
        check_limiter(count, seed.wrapping_add(2)),
        check_entropy_variables(count, seed.wrapping_add(3)),
        check_conservation(seed.wrapping_add(4)),
    ]
}
