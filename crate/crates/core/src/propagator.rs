//! Strang split-step Fourier propagation of the 1-D Schrödinger equation
//! `iħ ∂ψ/∂t = -(ħ²/2m) ∂²ψ/∂x² + V(x) ψ` on a periodic grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::grid::{fft_pair, ComplexField, DerivativeScheme, Grid1D, PhysicalParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Free,
    Harmonic { omega: f64, center: f64 },
    GaussianBarrier { height: f64, width: f64, center: f64 },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::Free => Ok(()),
            Potential::Harmonic { omega, center } => {
                if !(omega > 0.0 && omega.is_finite()) || !center.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "harmonic potential needs omega > 0, got {omega}"
                    )));
                }
                Ok(())
            }
            Potential::GaussianBarrier { height, width, center } => {
                if !(width > 0.0 && width.is_finite()) || !height.is_finite() || !center.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "barrier needs width > 0, got {width}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: f64, mass: f64) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega, center } => 0.5 * mass * omega * omega * (x - center).powi(2),
            Potential::GaussianBarrier { height, width, center } => {
                height * (-(x - center).powi(2) / (2.0 * width * width)).exp()
            }
        }
    }
}

/// Wavefunction snapshot with its grid, constants and time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub params: PhysicalParams,
    pub psi: ComplexField,
    pub t: f64,
}

impl WaveFunction {
    pub fn new(params: PhysicalParams, psi: ComplexField, t: f64) -> Self {
        Self { params, psi, t }
    }

    pub fn grid(&self) -> &Grid1D {
        self.psi.grid()
    }

    pub fn norm(&self) -> f64 {
        self.psi.norm_sqr()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        let scale = 1.0 / norm.sqrt();
        self.psi.values_mut().iter_mut().for_each(|z| *z *= scale);
        Ok(self)
    }

    /// Complex conjugate; runs the dynamics backwards in time.
    pub fn conjugate(&self) -> Self {
        let values = self.psi.values().iter().map(|z| z.conj()).collect();
        Self {
            params: self.params,
            psi: ComplexField::new(*self.grid(), values).expect("conjugate of a finite field"),
            t: self.t,
        }
    }

    /// Multiplies by `e^{i k x}`.
    pub fn boosted(&self, k: f64) -> Self {
        let grid = *self.grid();
        let values = self
            .psi
            .values()
            .iter()
            .enumerate()
            .map(|(i, z)| z * Complex64::from_polar(1.0, k * grid.x(i)))
            .collect();
        Self {
            params: self.params,
            psi: ComplexField::new(grid, values).expect("boost of a finite field"),
            t: self.t,
        }
    }

    /// `⟨x⟩` and `⟨x²⟩ - ⟨x⟩²` by quadrature.
    pub fn position_moments(&self) -> (f64, f64) {
        let grid = self.grid();
        let dx = grid.dx();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, z) in self.psi.values().iter().enumerate() {
            let x = grid.x(i);
            let rho = z.norm_sqr();
            m1 += x * rho;
            m2 += x * x * rho;
        }
        let norm = self.norm();
        let mean = m1 * dx / norm;
        (mean, m2 * dx / norm - mean * mean)
    }

    /// `⟨p⟩ = ∫ ψ* (-iħ ∂x) ψ dx`.
    pub fn mean_momentum(&self) -> f64 {
        let d = self.psi.derivative(DerivativeScheme::Spectral);
        let dx = self.grid().dx();
        let s: f64 = self
            .psi
            .values()
            .iter()
            .zip(d.values())
            .map(|(z, dz)| (z.conj() * dz).im)
            .sum();
        self.params.hbar * s * dx / self.norm()
    }

    /// `⟨H⟩` with the kinetic term evaluated spectrally.
    pub fn energy(&self, potential: &Potential) -> f64 {
        let grid = *self.grid();
        let d = self.psi.derivative(DerivativeScheme::Spectral);
        let PhysicalParams { hbar, mass } = self.params;
        let kinetic: f64 = d.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * hbar * hbar / (2.0 * mass);
        let pot: f64 = self
            .psi
            .values()
            .iter()
            .enumerate()
            .map(|(i, z)| potential.value(grid.x(i), mass) * z.norm_sqr())
            .sum();
        (kinetic + pot) * grid.dx() / self.norm()
    }
}

/// Normalized Gaussian packet `(2πσ0²)^{-1/4} exp(-(x-x0)²/(4σ0²) + i k0 x)`,
/// renormalized on the grid.
pub fn init_gaussian(
    grid: Grid1D,
    params: PhysicalParams,
    sigma0: f64,
    x0: f64,
    k0: f64,
) -> Result<WaveFunction> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) || !x0.is_finite() || !k0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gaussian needs finite sigma0 > 0, x0 and k0 (sigma0 = {sigma0})"
        )));
    }
    let limit = 3.0 * grid.dx();
    if sigma0 <= limit {
        return Err(Error::GridTooCoarse { sigma0, limit });
    }
    let half_width = 0.5 * grid.length();
    if 4.0 * sigma0 >= half_width {
        return Err(Error::DomainTooNarrow { extent: 4.0 * sigma0, half_width });
    }
    let amp = (2.0 * PI * sigma0 * sigma0).powf(-0.25);
    let psi = ComplexField::from_fn(grid, |x| {
        let d = x - x0;
        Complex64::from_polar(amp * (-d * d / (4.0 * sigma0 * sigma0)).exp(), k0 * x)
    })?;
    WaveFunction::new(params, psi, 0.0).normalized()
}

/// Harmonic-oscillator coherent state: ground-state width `ħ/(2mω)` displaced
/// by `amplitude` from `center`, at rest.
pub fn init_coherent(
    grid: Grid1D,
    params: PhysicalParams,
    omega: f64,
    amplitude: f64,
    center: f64,
) -> Result<WaveFunction> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("coherent state needs omega > 0, got {omega}")));
    }
    let sigma0 = (params.hbar / (2.0 * params.mass * omega)).sqrt();
    init_gaussian(grid, params, sigma0, center + amplitude, 0.0)
}

/// Kinetic phase accumulated per step by the fastest grid mode.
pub fn kinetic_phase(grid: &Grid1D, params: &PhysicalParams, dt: f64) -> f64 {
    dt.abs() * params.hbar * grid.k_max().powi(2) / (2.0 * params.mass)
}

pub fn check_time_step(grid: &Grid1D, params: &PhysicalParams, dt: f64) -> Result<()> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidParameter(format!("dt must be finite and nonzero, got {dt}")));
    }
    let phase = kinetic_phase(grid, params, dt);
    if phase >= PI {
        return Err(Error::TimeStepTooLarge { phase });
    }
    Ok(())
}

/// Precomputed phase factors for one `(grid, params, potential, dt)`.
///
/// A negative `dt` runs the exact inverse of the forward step.
pub struct Propagator {
    grid: Grid1D,
    params: PhysicalParams,
    dt: f64,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: Grid1D, params: PhysicalParams, potential: &Potential, dt: f64) -> Result<Self> {
        potential.validate()?;
        check_time_step(&grid, &params, dt)?;
        let PhysicalParams { hbar, mass } = params;
        let half_potential = grid
            .points()
            .into_iter()
            .map(|x| Complex64::from_polar(1.0, -potential.value(x, mass) * dt / (2.0 * hbar)))
            .collect();
        let kinetic = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex64::from_polar(1.0, -hbar * k * k * dt / (2.0 * mass)))
            .collect();
        let (fwd, inv) = fft_pair(grid.len());
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Ok(Self {
            grid,
            params,
            dt,
            half_potential,
            kinetic,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn check(&self, wf: &WaveFunction) -> Result<()> {
        if *wf.grid() != self.grid || wf.params != self.params {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Advances `wf` in place by one step.
    pub fn apply(&mut self, wf: &mut WaveFunction) -> Result<()> {
        self.check(wf)?;
        let n = self.grid.len() as f64;
        let psi = wf.psi.values_mut();
        for (z, p) in psi.iter_mut().zip(&self.half_potential) {
            *z *= p;
        }
        self.fwd.process_with_scratch(psi, &mut self.scratch);
        for (z, p) in psi.iter_mut().zip(&self.kinetic) {
            *z *= p / n;
        }
        self.inv.process_with_scratch(psi, &mut self.scratch);
        for (z, p) in psi.iter_mut().zip(&self.half_potential) {
            *z *= p;
        }
        wf.t += self.dt;
        Ok(())
    }
}

/// One Strang step `e^{-iVdt/2ħ} e^{-iTdt/ħ} e^{-iVdt/2ħ}`.
pub fn step(wf: &WaveFunction, potential: &Potential, dt: f64) -> Result<WaveFunction> {
    let mut prop = Propagator::new(*wf.grid(), wf.params, potential, dt)?;
    let mut out = wf.clone();
    prop.apply(&mut out)?;
    Ok(out)
}

/// Applies `n_steps` steps. `observer(step_index, state)` runs after every
/// `stride`-th step (stride 0 disables it).
pub fn evolve<F>(
    wf: &WaveFunction,
    potential: &Potential,
    dt: f64,
    n_steps: usize,
    stride: usize,
    mut observer: F,
) -> Result<WaveFunction>
where
    F: FnMut(usize, &WaveFunction),
{
    if n_steps == 0 {
        return Ok(wf.clone());
    }
    let mut prop = Propagator::new(*wf.grid(), wf.params, potential, dt)?;
    let mut out = wf.clone();
    for i in 1..=n_steps {
        prop.apply(&mut out)?;
        if stride > 0 && i % stride == 0 {
            observer(i, &out);
        }
    }
    Ok(out)
}
