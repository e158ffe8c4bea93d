//! Closed-form reference solutions: the freely spreading Gaussian and the
//! harmonic-oscillator coherent state.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::entropy::Snapshot;
use crate::grid::{Grid1D, PhysicalParams, RealField};
use crate::madelung::DensityFields;

/// Free Gaussian packet with initial width `sigma0`, centre `x0` and mean
/// wavenumber `k0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianOracle {
    pub sigma0: f64,
    pub x0: f64,
    pub k0: f64,
    pub params: PhysicalParams,
}

impl GaussianOracle {
    pub fn new(sigma0: f64, x0: f64, k0: f64, params: PhysicalParams) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma0 must be positive, got {sigma0}")));
        }
        Ok(Self { sigma0, x0, k0, params })
    }

    /// Dimensionless spreading time `ħt/(2mσ0²)`.
    fn tau(&self, t: f64) -> f64 {
        self.params.hbar * t / (2.0 * self.params.mass * self.sigma0 * self.sigma0)
    }

    pub fn width_sqr(&self, t: f64) -> f64 {
        let tau = self.tau(t);
        self.sigma0 * self.sigma0 * (1.0 + tau * tau)
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 + self.params.hbar * self.k0 * t / self.params.mass
    }

    /// `σ'(t)/σ(t)`.
    pub fn spreading_rate(&self, t: f64) -> f64 {
        let tau = self.tau(t);
        let dtau = self.params.hbar / (2.0 * self.params.mass * self.sigma0 * self.sigma0);
        tau * dtau / (1.0 + tau * tau)
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        let s2 = self.width_sqr(t);
        let d = x - self.center(t);
        (-d * d / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt()
    }

    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        self.params.hbar * self.k0 / self.params.mass + (x - self.center(t)) * self.spreading_rate(t)
    }

    /// `I(t) = ½ ln(2πe σ²(t)) + 1`.
    pub fn entropy(&self, t: f64) -> f64 {
        0.5 * (2.0 * PI * E * self.width_sqr(t)).ln() + 1.0
    }

    /// `dI/dt = σ'/σ`.
    pub fn entropy_rate(&self, t: f64) -> f64 {
        self.spreading_rate(t)
    }

    pub fn fields(&self, grid: Grid1D, t: f64, reg_floor: f64) -> Result<Snapshot> {
        analytic_snapshot(grid, t, reg_floor, |x| self.density(x, t), |x| self.velocity(x, t))
    }
}

/// Harmonic-oscillator coherent state about `center`, released at rest from
/// `center + amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentOracle {
    pub omega: f64,
    pub amplitude: f64,
    pub center: f64,
    pub params: PhysicalParams,
}

impl CoherentOracle {
    pub fn new(omega: f64, amplitude: f64, center: f64, params: PhysicalParams) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        Ok(Self { omega, amplitude, center, params })
    }

    /// Fixed `σ² = ħ/(2mω)`.
    pub fn width_sqr(&self) -> f64 {
        self.params.hbar / (2.0 * self.params.mass * self.omega)
    }

    pub fn position(&self, t: f64) -> f64 {
        self.center + self.amplitude * (self.omega * t).cos()
    }

    /// Uniform velocity `-aω sin ωt`.
    pub fn speed(&self, t: f64) -> f64 {
        -self.amplitude * self.omega * (self.omega * t).sin()
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        let s2 = self.width_sqr();
        let d = x - self.position(t);
        (-d * d / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt()
    }

    pub fn entropy(&self) -> f64 {
        0.5 * (2.0 * PI * E * self.width_sqr()).ln() + 1.0
    }

    pub fn entropy_rate(&self, _t: f64) -> f64 {
        0.0
    }

    pub fn fields(&self, grid: Grid1D, t: f64, reg_floor: f64) -> Result<Snapshot> {
        let v = self.speed(t);
        analytic_snapshot(grid, t, reg_floor, |x| self.density(x, t), |_| v)
    }
}

fn analytic_snapshot(
    grid: Grid1D,
    t: f64,
    reg_floor: f64,
    rho: impl Fn(f64) -> f64,
    v: impl Fn(f64) -> f64,
) -> Result<Snapshot> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("oracle time must be finite, got {t}")));
    }
    let rho = RealField::from_fn(grid, rho)?;
    let v = RealField::from_fn(grid, v)?;
    Snapshot::new(DensityFields::from_density_velocity(rho, v, reg_floor, t)?, reg_floor)
}

/// `ε = ħ t_c / (m L_c²)`.
pub fn classical_parameter(params: &PhysicalParams, t_c: f64, l_c: f64) -> f64 {
    params.hbar * t_c / (params.mass * l_c * l_c)
}
