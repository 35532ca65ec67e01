//! Pointwise physics of the 2D compressible Euler equations for an ideal gas.
//!
//! Conserved states are stored as `Vector4<f64>` in the order
//! `(rho, rho*v1, rho*v2, rho*E)`; the [`Conserved`] trait gives named access.

use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector4};
use thiserror::Error;

/// Conserved nodal state `(rho, rho v1, rho v2, rho E)`.
pub type State = Vector4<f64>;
/// Flux tensor: column `k` is the flux in coordinate direction `k`.
pub type Flux = Matrix4x2<f64>;

/// Tolerance on `| |n| - 1 |` for directional operations.
pub const UNIT_NORMAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EulerError {
    #[error("non-finite input state {0:?}")]
    NonFiniteInput([f64; 4]),
    #[error("vacuum state carries momentum {0:?}")]
    VacuumWithMomentum([f64; 4]),
    #[error("non-positive density {0}")]
    NonPositiveDensity(f64),
    #[error("negative pressure {0}")]
    NegativePressure(f64),
    #[error("normal vector is not of unit length (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("state is not admissible: rho = {rho}, p = {p}")]
    InadmissibleState { rho: f64, p: f64 },
    #[error("entropy needs rho > 0 and p > 0 (rho = {rho}, p = {p})")]
    NonPositiveThermodynamicState { rho: f64, p: f64 },
}

/// Named accessors for a conserved state vector.
pub trait Conserved {
    fn rho(&self) -> f64;
    fn momentum(&self) -> Vector2<f64>;
    fn energy(&self) -> f64;

    /// Velocity `rho v / rho`. Only meaningful for `rho > 0`.
    fn velocity(&self) -> Vector2<f64> {
        self.momentum() / self.rho()
    }
}

impl Conserved for State {
    #[inline]
    fn rho(&self) -> f64 {
        self[0]
    }

    #[inline]
    fn momentum(&self) -> Vector2<f64> {
        Vector2::new(self[1], self[2])
    }

    #[inline]
    fn energy(&self) -> f64 {
        self[3]
    }
}

/// Ideal gas with adiabatic constant `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasModel {
    gamma: f64,
}

impl Default for GasModel {
    fn default() -> Self {
        Self { gamma: 1.4 }
    }
}

fn check_finite(u: &State) -> Result<(), EulerError> {
    if u.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EulerError::NonFiniteInput([u[0], u[1], u[2], u[3]]))
    }
}

fn check_unit(n: &Vector2<f64>) -> Result<(), EulerError> {
    let len = n.norm();
    if (len - 1.0).abs() > UNIT_NORMAL_TOL {
        Err(EulerError::NonUnitNormal(len))
    } else {
        Ok(())
    }
}

impl GasModel {
    /// Returns `None` unless `gamma > 1`.
    pub fn new(gamma: f64) -> Option<Self> {
        (gamma > 1.0 && gamma.is_finite()).then_some(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `(gamma - 1) / 2`
    pub fn b1(&self) -> f64 {
        0.5 * (self.gamma - 1.0)
    }

    /// `(gamma - 3) / 2`
    pub fn b2(&self) -> f64 {
        0.5 * (self.gamma - 3.0)
    }

    /// Pressure from the ideal-gas equation of state.
    ///
    /// At `rho = 0` the kinetic term is dropped, which is only defined for a
    /// state without momentum.
    pub fn pressure(&self, u: &State) -> Result<f64, EulerError> {
        check_finite(u)?;
        if u.rho() == 0.0 {
            if u[1] != 0.0 || u[2] != 0.0 {
                return Err(EulerError::VacuumWithMomentum([u[0], u[1], u[2], u[3]]));
            }
            return Ok((self.gamma - 1.0) * u.energy());
        }
        Ok(self.pressure_unchecked(u))
    }

    /// Equation of state without input validation. Requires `rho != 0`.
    #[inline]
    pub fn pressure_unchecked(&self, u: &State) -> f64 {
        (self.gamma - 1.0) * (u[3] - 0.5 * (u[1] * u[1] + u[2] * u[2]) / u[0])
    }

    /// Speed of sound `sqrt(gamma p / rho)`; negative pressures are clipped to zero.
    #[inline]
    pub fn sound_speed_unchecked(&self, u: &State) -> f64 {
        (self.gamma * self.pressure_unchecked(u).max(0.0) / u[0]).sqrt()
    }

    pub fn primitive_to_conserved(
        &self,
        rho: f64,
        v: Vector2<f64>,
        p: f64,
    ) -> Result<State, EulerError> {
        if !(rho > 0.0) {
            return Err(EulerError::NonPositiveDensity(rho));
        }
        if !(p >= 0.0) {
            return Err(EulerError::NegativePressure(p));
        }
        let ener = p / (self.gamma - 1.0) + 0.5 * rho * v.norm_squared();
        Ok(State::new(rho, rho * v.x, rho * v.y, ener))
    }

    /// Returns `(rho, v, p)`.
    pub fn conserved_to_primitive(&self, u: &State) -> Result<(f64, Vector2<f64>, f64), EulerError> {
        check_finite(u)?;
        if !(u.rho() > 0.0) {
            return Err(EulerError::NonPositiveDensity(u.rho()));
        }
        Ok((u.rho(), u.velocity(), self.pressure_unchecked(u)))
    }

    /// `rho >= -slack` and `p >= -slack`.
    pub fn is_admissible(&self, u: &State, slack: f64) -> bool {
        if !u.iter().all(|x| x.is_finite()) || u.rho() < -slack {
            return false;
        }
        match self.pressure(u) {
            Ok(p) => p >= -slack,
            // rho in [-slack, 0) with momentum: the kinetic term is unbounded
            Err(_) => false,
        }
    }

    fn require_admissible(&self, u: &State) -> Result<f64, EulerError> {
        let p = self.pressure(u)?;
        if u.rho() < 0.0 || p < 0.0 {
            return Err(EulerError::InadmissibleState { rho: u.rho(), p });
        }
        Ok(p)
    }

    /// Flux tensor `f(u) = (f1(u), f2(u))`.
    pub fn flux(&self, u: &State) -> Result<Flux, EulerError> {
        let p = self.require_admissible(u)?;
        if u.rho() == 0.0 {
            // vacuum without momentum: only the pressure term survives
            return Ok(Flux::new(0.0, 0.0, p, 0.0, 0.0, p, 0.0, 0.0));
        }
        Ok(self.flux_with_pressure(u, p))
    }

    /// Flux evaluation without admissibility checks. Requires `rho != 0`.
    #[inline]
    pub fn flux_unchecked(&self, u: &State) -> Flux {
        self.flux_with_pressure(u, self.pressure_unchecked(u))
    }

    #[inline]
    fn flux_with_pressure(&self, u: &State, p: f64) -> Flux {
        let v1 = u[1] / u[0];
        let v2 = u[2] / u[0];
        let h = u[3] + p;
        Flux::new(
            u[1],
            u[2],
            u[1] * v1 + p,
            u[1] * v2,
            u[2] * v1,
            u[2] * v2 + p,
            h * v1,
            h * v2,
        )
    }

    /// Flux Jacobians `A1 = df1/du`, `A2 = df2/du`.
    pub fn flux_jacobians(&self, u: &State) -> Result<FluxJacobianPair, EulerError> {
        check_finite(u)?;
        if !(u.rho() > 0.0) {
            return Err(EulerError::NonPositiveDensity(u.rho()));
        }
        Ok(self.flux_jacobians_unchecked(u))
    }

    pub fn flux_jacobians_unchecked(&self, u: &State) -> FluxJacobianPair {
        FluxJacobianPair {
            a1: self.directional_jacobian_unchecked(u, &Vector2::new(1.0, 0.0)),
            a2: self.directional_jacobian_unchecked(u, &Vector2::new(0.0, 1.0)),
        }
    }

    /// `n . A(u) = n1 A1(u) + n2 A2(u)`, assembled directly.
    pub fn directional_jacobian(&self, u: &State, n: &Vector2<f64>) -> Result<Matrix4<f64>, EulerError> {
        check_unit(n)?;
        check_finite(u)?;
        if !(u.rho() > 0.0) {
            return Err(EulerError::NonPositiveDensity(u.rho()));
        }
        Ok(self.directional_jacobian_unchecked(u, n))
    }

    /// `n . A(u)` for an arbitrary (not necessarily unit) vector `n`.
    pub fn directional_jacobian_unchecked(&self, u: &State, n: &Vector2<f64>) -> Matrix4<f64> {
        let g = self.gamma;
        let (b1, b2) = (self.b1(), self.b2());
        let v1 = u[1] / u[0];
        let v2 = u[2] / u[0];
        let e = u[3] / u[0];
        let p = self.pressure_unchecked(u);
        let h = e + p / u[0];
        let q2 = v1 * v1 + v2 * v2;
        let (n1, n2) = (n.x, n.y);

        let a1 = Matrix4::new(
            0.0,
            1.0,
            0.0,
            0.0,
            b2 * v1 * v1 + b1 * v2 * v2,
            (3.0 - g) * v1,
            (1.0 - g) * v2,
            g - 1.0,
            -v1 * v2,
            v2,
            v1,
            0.0,
            b1 * q2 * v1 - h * v1,
            h - (g - 1.0) * v1 * v1,
            (1.0 - g) * v1 * v2,
            g * v1,
        );
        let a2 = Matrix4::new(
            0.0,
            0.0,
            1.0,
            0.0,
            -v1 * v2,
            v2,
            v1,
            0.0,
            b2 * v2 * v2 + b1 * v1 * v1,
            (1.0 - g) * v1,
            (3.0 - g) * v2,
            g - 1.0,
            b1 * q2 * v2 - h * v2,
            (1.0 - g) * v1 * v2,
            h - (g - 1.0) * v2 * v2,
            g * v2,
        );
        a1 * n1 + a2 * n2
    }

    /// Eigenvalues of `n . A(u)` in ascending order: `v.n - c, v.n, v.n, v.n + c`.
    pub fn eigen_speeds(&self, u: &State, n: &Vector2<f64>) -> Result<[f64; 4], EulerError> {
        check_unit(n)?;
        let (rho, v, p) = self.conserved_to_primitive(u)?;
        if p < 0.0 {
            return Err(EulerError::NegativePressure(p));
        }
        let c = (self.gamma * p / rho).sqrt();
        let vn = v.dot(n);
        Ok([vn - c, vn, vn, vn + c])
    }

    /// Spectral radius `|v.n| + c` of `n . A(u)`.
    pub fn max_wave_speed(&self, u: &State, n: &Vector2<f64>) -> Result<f64, EulerError> {
        let s = self.eigen_speeds(u, n)?;
        Ok(s[0].abs().max(s[3].abs()))
    }

    /// `|v.n| + c` without validation. Requires `rho > 0`.
    #[inline]
    pub fn max_wave_speed_unchecked(&self, u: &State, n: &Vector2<f64>) -> f64 {
        let vn = (u[1] * n.x + u[2] * n.y) / u[0];
        vn.abs() + self.sound_speed_unchecked(u)
    }

    /// Rusanov speed `max{|v_i.n| + c_i, |v_j.n| + c_j}`.
    pub fn rusanov_speed(&self, ui: &State, uj: &State, n: &Vector2<f64>) -> Result<f64, EulerError> {
        check_unit(n)?;
        for u in [ui, uj] {
            let p = self.require_admissible(u)?;
            if !(u.rho() > 0.0) {
                return Err(EulerError::InadmissibleState { rho: u.rho(), p });
            }
        }
        Ok(self
            .max_wave_speed_unchecked(ui, n)
            .max(self.max_wave_speed_unchecked(uj, n)))
    }

    /// Mathematical entropy `eta = -rho s / (gamma - 1)` with `s = log(p rho^-gamma)`.
    pub fn entropy(&self, u: &State) -> Result<f64, EulerError> {
        let (rho, p) = self.thermo_positive(u)?;
        let s = p.ln() - self.gamma * rho.ln();
        Ok(-rho * s / (self.gamma - 1.0))
    }

    /// Entropy variables `v(u) = eta'(u)`.
    pub fn entropy_variables(&self, u: &State) -> Result<Vector4<f64>, EulerError> {
        let (rho, p) = self.thermo_positive(u)?;
        let g = self.gamma;
        let s = p.ln() - g * rho.ln();
        let beta = rho / p;
        let v1 = u[1] / rho;
        let v2 = u[2] / rho;
        Ok(Vector4::new(
            (g - s) / (g - 1.0) - 0.5 * beta * (v1 * v1 + v2 * v2),
            beta * v1,
            beta * v2,
            -beta,
        ))
    }

    fn thermo_positive(&self, u: &State) -> Result<(f64, f64), EulerError> {
        check_finite(u)?;
        let rho = u.rho();
        let p = if rho > 0.0 { self.pressure_unchecked(u) } else { f64::NAN };
        if !(rho > 0.0 && p > 0.0) {
            return Err(EulerError::NonPositiveThermodynamicState { rho, p });
        }
        Ok((rho, p))
    }

    /// Local Mach number `|v| / c`.
    pub fn mach(&self, u: &State) -> Result<f64, EulerError> {
        let (rho, v, p) = self.conserved_to_primitive(u)?;
        if p <= 0.0 {
            return Err(EulerError::NonPositiveThermodynamicState { rho, p });
        }
        Ok(v.norm() / (self.gamma * p / rho).sqrt())
    }
}

/// The two Cartesian flux Jacobians of the 2D Euler flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxJacobianPair {
    pub a1: Matrix4<f64>,
    pub a2: Matrix4<f64>,
}

impl FluxJacobianPair {
    pub fn directional(&self, n: &Vector2<f64>) -> Matrix4<f64> {
        self.a1 * n.x + self.a2 * n.y
    }
}
