//! Uniform periodic grid, real and complex sample fields, quadrature and
//! spatial derivatives.
//!
//! All spectral operations use the symmetric wavenumber layout
//! `κ_k = 2πk/L` for `k < n/2` and `2π(k-n)/L` above, with the Nyquist mode
//! dropped from odd-order operations (derivative, antiderivative).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest allowed grid size.
pub const MIN_POINTS: usize = 16;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Unnormalized forward transform in place.
pub(crate) fn forward(buf: &mut [Complex64]) {
    let (fwd, _) = fft_pair(buf.len());
    fwd.process(buf);
}

/// Inverse transform in place, including the `1/n` factor.
pub(crate) fn inverse(buf: &mut [Complex64]) {
    let (_, inv) = fft_pair(buf.len());
    inv.process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
}

/// Uniform periodic grid on `[x_min, x_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max})"
            )));
        }
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid(format!("n = {n} is below {MIN_POINTS}")));
        }
        if !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {n} must be a power of two")));
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn periodic(&self) -> bool {
        true
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / self.length();
        (0..self.n)
            .map(|k| {
                if k < self.n / 2 {
                    k as f64 * dk
                } else {
                    (k as f64 - self.n as f64) * dk
                }
            })
            .collect()
    }

    /// Largest resolved wavenumber magnitude, `π/dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }
}

/// Physical constants in natural units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub mass: f64,
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { hbar, mass })
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeScheme {
    #[default]
    Spectral,
    Central2,
}

fn check_finite<I: IntoIterator<Item = f64>>(values: I) -> Result<()> {
    for (index, value) in values.into_iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
    }
    Ok(())
}

/// Real samples on a grid. Entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        check_finite(values.iter().copied())?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Applies `f` pointwise, re-checking finiteness.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Self::new(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Periodic rectangle rule, `dx * Σ f_k`.
    pub fn integrate(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    /// Continuous L2 norm `sqrt(∫ f² dx)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn derivative(&self, scheme: DerivativeScheme) -> RealField {
        let values = match scheme {
            DerivativeScheme::Spectral => {
                let mut buf = self.spectrum();
                apply_derivative(&self.grid, &mut buf);
                inverse(&mut buf);
                buf.iter().map(|z| z.re).collect()
            }
            DerivativeScheme::Central2 => central2(&self.values, self.grid.dx()),
        };
        RealField { grid: self.grid, values }
    }

    /// Running integral `F(x_k) = ∫_{x_min}^{x_k} f`, spectrally accurate for
    /// smooth periodic data. Returns `n + 1` values, the last at `x_max`.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut buf = self.spectrum();
        let mean = buf[0].re / n as f64;
        buf[0] = Complex64::new(0.0, 0.0);
        buf[n / 2] = Complex64::new(0.0, 0.0);
        for (z, k) in buf.iter_mut().zip(self.grid.wavenumbers()) {
            if k != 0.0 {
                *z /= Complex64::new(0.0, k);
            }
        }
        inverse(&mut buf);
        let offset = buf[0].re;
        let mut out: Vec<f64> = buf
            .iter()
            .enumerate()
            .map(|(k, z)| z.re - offset + mean * k as f64 * self.grid.dx())
            .collect();
        out.push(mean * self.grid.length());
        out
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn interpolate(&self, x: f64) -> f64 {
        let series = FourierSeries::new(self);
        series.value(x)
    }

    /// `∫_a^b f dx` through the spectral antiderivative. `a` and `b` need not
    /// be grid points.
    pub fn integrate_between(&self, a: f64, b: f64) -> f64 {
        let series = FourierSeries::new(self);
        series.antiderivative(b) - series.antiderivative(a)
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        forward(&mut buf);
        buf
    }
}

/// Normalized Fourier coefficients of a real field for point evaluation.
struct FourierSeries {
    x_min: f64,
    coeffs: Vec<(f64, Complex64)>,
    mean: f64,
    nyquist: (f64, f64),
}

impl FourierSeries {
    fn new(field: &RealField) -> Self {
        let n = field.grid.len();
        let mut buf = field.spectrum();
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        let k = field.grid.wavenumbers();
        let coeffs = (1..n).filter(|&i| i != n / 2).map(|i| (k[i], buf[i])).collect();
        Self {
            x_min: field.grid.x_min(),
            coeffs,
            mean: buf[0].re,
            nyquist: (k[n / 2].abs(), buf[n / 2].re),
        }
    }

    fn value(&self, x: f64) -> f64 {
        let s = x - self.x_min;
        let mut acc = self.mean + self.nyquist.1 * (self.nyquist.0 * s).cos();
        for &(k, c) in &self.coeffs {
            acc += (c * Complex64::from_polar(1.0, k * s)).re;
        }
        acc
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let s = x - self.x_min;
        let mut acc = self.mean * s;
        for &(k, c) in &self.coeffs {
            acc += (c * Complex64::from_polar(1.0, k * s) / Complex64::new(0.0, k)).re;
        }
        acc
    }
}

fn apply_derivative(grid: &Grid1D, buf: &mut [Complex64]) {
    let n = buf.len();
    for (z, k) in buf.iter_mut().zip(grid.wavenumbers()) {
        *z *= Complex64::new(0.0, k);
    }
    buf[n / 2] = Complex64::new(0.0, 0.0);
}

fn central2<T>(values: &[T], dx: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = values.len();
    let scale = 0.5 / dx;
    (0..n)
        .map(|k| (values[(k + 1) % n] - values[(k + n - 1) % n]) * scale)
        .collect()
}

/// Complex samples on a grid. Entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        for (index, z) in values.iter().enumerate() {
            if !z.re.is_finite() {
                return Err(Error::NonFinite { index, value: z.re });
            }
            if !z.im.is_finite() {
                return Err(Error::NonFinite { index, value: z.im });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `∫ |f|² dx` by the rectangle rule.
    pub fn norm_sqr(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn derivative(&self, scheme: DerivativeScheme) -> ComplexField {
        let values = match scheme {
            DerivativeScheme::Spectral => {
                let mut buf = self.values.clone();
                forward(&mut buf);
                apply_derivative(&self.grid, &mut buf);
                inverse(&mut buf);
                buf
            }
            DerivativeScheme::Central2 => central2(&self.values, self.grid.dx()),
        };
        ComplexField { grid: self.grid, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn unit(n: usize) -> Grid1D {
        Grid1D::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 1000).is_err());
        assert!(Grid1D::new(0.0, 1.0, 8).is_err());
        assert!(Grid1D::new(1.0, 1.0, 64).is_err());
        let g = Grid1D::new(-20.0, 20.0, 1024).unwrap();
        assert_eq!(g.dx(), 40.0 / 1024.0);
        assert_eq!(g.x(0), -20.0);
        assert!((g.x(1023) - (20.0 - g.dx())).abs() < 1e-12);
        let k = g.wavenumbers();
        assert_eq!(k[0], 0.0);
        assert!(k[512] < 0.0);
        assert!((k[512].abs() - g.k_max()).abs() < 1e-9);
    }

    #[test]
    fn physical_params_must_be_positive() {
        assert!(PhysicalParams::new(0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, -1.0).is_err());
        assert_eq!(PhysicalParams::default(), PhysicalParams::new(1.0, 1.0).unwrap());
    }

    #[test]
    fn integrate_constants() {
        let f = RealField::from_fn(unit(64), |_| 1.0).unwrap();
        assert_eq!(f.integrate(), 1.0);
        let g = Grid1D::new(0.0, 2.0, 64).unwrap();
        let f = RealField::from_fn(g, |_| 0.5).unwrap();
        assert_eq!(f.integrate(), 1.0);
    }

    #[test]
    fn integrate_sin_squared() {
        let f = RealField::from_fn(unit(64), |x| (TAU * x).sin().powi(2)).unwrap();
        assert!((f.integrate() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let g = unit(16);
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(matches!(RealField::new(g, v), Err(Error::NonFinite { index: 3, .. })));
        let mut c = vec![Complex64::new(0.0, 0.0); 16];
        c[5] = Complex64::new(0.0, f64::INFINITY);
        assert!(matches!(ComplexField::new(g, c), Err(Error::NonFinite { index: 5, .. })));
        assert!(matches!(
            RealField::new(g, vec![0.0; 15]),
            Err(Error::LengthMismatch { expected: 16, got: 15 })
        ));
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let f = RealField::from_fn(unit(64), |_| 3.25).unwrap();
        for scheme in [DerivativeScheme::Spectral, DerivativeScheme::Central2] {
            assert!(f.derivative(scheme).max_abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let g = unit(64);
        let f = RealField::from_fn(g, |x| (TAU * x).sin()).unwrap();
        let d = f.derivative(DerivativeScheme::Spectral);
        for (k, v) in d.values().iter().enumerate() {
            assert!((v - TAU * (TAU * g.x(k)).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn central_derivative_error_bound() {
        let g = unit(64);
        let f = RealField::from_fn(g, |x| (TAU * x).sin()).unwrap();
        let d = f.derivative(DerivativeScheme::Central2);
        let err = d
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - TAU * (TAU * g.x(k)).cos()).abs())
            .fold(0.0, f64::max);
        let bound = TAU.powi(3) * g.dx().powi(2) / 6.0;
        assert!(err <= bound * (1.0 + 1e-9), "err {err} bound {bound}");
        assert!(err < 0.013);
    }

    #[test]
    fn complex_derivative_of_plane_wave() {
        let g = unit(32);
        let k = 3.0 * TAU;
        let f = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, k * x)).unwrap();
        let d = f.derivative(DerivativeScheme::Spectral);
        for (a, b) in d.values().iter().zip(f.values()) {
            assert!((a - Complex64::new(0.0, k) * b).norm() < 1e-11);
        }
    }

    #[test]
    fn cumulative_integral_of_gaussian() {
        let g = Grid1D::new(-12.8, 12.8, 1024).unwrap();
        let f = RealField::from_fn(g, |x| (-x * x / 2.0).exp() / TAU.sqrt()).unwrap();
        let cum = f.cumulative_integral();
        assert_eq!(cum.len(), 1025);
        assert!(cum[0].abs() < 1e-15);
        assert!((cum[512] - 0.5).abs() < 1e-12);
        assert!((cum[1024] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_between_off_grid() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let f = RealField::from_fn(g, |x| (TAU * x).cos()).unwrap();
        // ∫_a^b cos(2πx) = (sin 2πb - sin 2πa)/2π
        let (a, b) = (0.123, 0.789);
        let exact = ((TAU * b).sin() - (TAU * a).sin()) / TAU;
        assert!((f.integrate_between(a, b) - exact).abs() < 1e-14);
        assert!((f.interpolate(0.4321) - (TAU * 0.4321).cos()).abs() < 1e-13);
    }
}
