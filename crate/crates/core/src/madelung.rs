//! Hydrodynamic fields of `ψ = √ρ e^{iS/ħ}`: density, probability current,
//! velocity `v = j/ρ = ∂x S/m` and the unwrapped phase `S`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DerivativeScheme, Grid1D, RealField};
use crate::propagator::WaveFunction;

pub const DEFAULT_REG_FLOOR: f64 = 1e-12;

/// Density, current and velocity of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFields {
    pub rho: RealField,
    pub current: RealField,
    pub velocity: RealField,
    /// Points where `ρ < reg_floor` and the velocity was set to zero.
    pub floored: usize,
    pub t: f64,
}

impl DensityFields {
    pub fn from_wavefunction(wf: &WaveFunction, reg_floor: f64) -> Self {
        let rho = density(wf);
        let current = current(wf);
        let (velocity, floored) = velocity_from(&rho, &current, reg_floor);
        Self { rho, current, velocity, floored, t: wf.t }
    }

    /// Builds the fields from a density and a velocity, flooring `v` below
    /// `reg_floor` the same way the wavefunction path does.
    pub fn from_density_velocity(rho: RealField, velocity: RealField, reg_floor: f64, t: f64) -> Result<Self> {
        let mut floored = 0;
        let v = rho.zip_with(&velocity, |r, v| if r < reg_floor { 0.0 } else { v })?;
        for &r in rho.values() {
            if r < reg_floor {
                floored += 1;
            }
        }
        let current = rho.zip_with(&velocity, |r, v| r * v)?;
        Ok(Self { rho, current, velocity: v, floored, t })
    }

    pub fn grid(&self) -> &Grid1D {
        self.rho.grid()
    }
}

/// `ρ = |ψ|²`.
pub fn density(wf: &WaveFunction) -> RealField {
    let values = wf.psi.values().iter().map(|z| z.norm_sqr()).collect();
    RealField::new(*wf.grid(), values).expect("density of a finite field")
}

/// `j = (ħ/m) Im(ψ* ∂x ψ)` with a spectral derivative.
pub fn current(wf: &WaveFunction) -> RealField {
    let d = wf.psi.derivative(DerivativeScheme::Spectral);
    let scale = wf.params.hbar / wf.params.mass;
    let values = wf
        .psi
        .values()
        .iter()
        .zip(d.values())
        .map(|(z, dz)| scale * (z.conj() * dz).im)
        .collect();
    RealField::new(*wf.grid(), values).expect("current of a finite field")
}

/// `v = j/ρ` where `ρ ≥ reg_floor`, zero elsewhere. Also returns the number
/// of floored points.
pub fn velocity(wf: &WaveFunction, reg_floor: f64) -> (RealField, usize) {
    velocity_from(&density(wf), &current(wf), reg_floor)
}

fn velocity_from(rho: &RealField, current: &RealField, reg_floor: f64) -> (RealField, usize) {
    let mut floored = 0;
    let values = rho
        .values()
        .iter()
        .zip(current.values())
        .map(|(&r, &j)| {
            if r < reg_floor {
                floored += 1;
                0.0
            } else {
                j / r
            }
        })
        .collect();
    (RealField::new(*rho.grid(), values).expect("finite velocity"), floored)
}

/// `(ħ/2im) ∂x Log(ψ/ψ*)` evaluated as `(ħ/2im)(∂xψ/ψ - ∂xψ*/ψ*)`, zero below
/// the floor. Equal to `v` wherever the density is resolved.
pub fn log_ratio_velocity(wf: &WaveFunction, reg_floor: f64) -> RealField {
    let d = wf.psi.derivative(DerivativeScheme::Spectral);
    let prefactor = Complex64::new(0.0, -wf.params.hbar / (2.0 * wf.params.mass));
    let values = wf
        .psi
        .values()
        .iter()
        .zip(d.values())
        .map(|(z, dz)| {
            if z.norm_sqr() < reg_floor {
                0.0
            } else {
                (prefactor * (dz / z - dz.conj() / z.conj())).re
            }
        })
        .collect();
    RealField::new(*wf.grid(), values).expect("finite velocity")
}

/// Phase `S = ħ arg ψ` unwrapped along the connected support around the
/// density peak.
#[derive(Debug, Clone, PartialEq)]
pub struct UnwrappedPhase {
    /// Zero outside the support.
    pub phase: RealField,
    /// Grid index where the support starts (may wrap past `n - 1`).
    pub start: usize,
    pub len: usize,
}

impl UnwrappedPhase {
    /// Grid indices of the support, in order of increasing unwrapped position.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.phase.grid().len();
        (0..self.len).map(move |i| (self.start + i) % n)
    }

    /// Central-difference `∂x S / m` at interior support points, as
    /// `(index, value)` pairs.
    pub fn velocity(&self, mass: f64) -> Vec<(usize, f64)> {
        let idx: Vec<usize> = self.support().collect();
        let s = self.phase.values();
        let dx = self.phase.grid().dx();
        idx.windows(3)
            .map(|w| (w[1], (s[w[2]] - s[w[0]]) / (2.0 * dx * mass)))
            .collect()
    }
}

pub fn phase_unwrap(wf: &WaveFunction, reg_floor: f64) -> Result<UnwrappedPhase> {
    let grid = *wf.grid();
    let n = grid.len();
    let psi = wf.psi.values();
    let above = |i: usize| psi[i].norm_sqr() > reg_floor;
    let peak = (0..n)
        .max_by(|&a, &b| psi[a].norm_sqr().total_cmp(&psi[b].norm_sqr()))
        .expect("non-empty grid");
    if !above(peak) {
        return Err(Error::PhaseNotUnwrappable);
    }
    let (start, len) = if (0..n).all(above) {
        // Full support: cut the loop opposite the peak.
        ((peak + n / 2) % n + 1, n)
    } else {
        let mut left = 0;
        while above((peak + n - left - 1) % n) {
            left += 1;
        }
        let mut right = 0;
        while above((peak + right + 1) % n) {
            right += 1;
        }
        ((peak + n - left) % n, left + right + 1)
    };
    let start = start % n;
    let support: Vec<usize> = (0..len).map(|i| (start + i) % n).collect();
    if (0..n).filter(|&i| above(i)).count() != len {
        return Err(Error::PhaseNotUnwrappable);
    }

    let hbar = wf.params.hbar;
    let mut unwrapped = vec![0.0; n];
    let peak_pos = support.iter().position(|&i| i == peak).expect("peak in support");
    let peak_arg = psi[peak].arg().rem_euclid(2.0 * PI);
    unwrapped[peak] = peak_arg;
    let wrap = |d: f64| d - 2.0 * PI * (d / (2.0 * PI)).round();
    for w in peak_pos + 1..len {
        let (prev, cur) = (support[w - 1], support[w]);
        unwrapped[cur] = unwrapped[prev] + wrap((psi[cur] * psi[prev].conj()).arg());
    }
    for w in (0..peak_pos).rev() {
        let (next, cur) = (support[w + 1], support[w]);
        unwrapped[cur] = unwrapped[next] + wrap((psi[cur] * psi[next].conj()).arg());
    }
    let phase = RealField::new(grid, unwrapped.into_iter().map(|a| hbar * a).collect())?;
    Ok(UnwrappedPhase { phase, start, len })
}
