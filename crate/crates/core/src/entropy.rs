//! Information density `ρ_I = -ρ(ln ρ - 1)`, the entropy `I = ∫ ρ_I dx`,
//! binned Shannon entropy, and the residuals of the entropy balance laws.
//!
//! Logarithms are natural throughout. Points with `ρ < reg_floor` contribute
//! `ρ_I = 0` (the `ρ ln ρ → 0` limit) and are masked out of residual norms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DerivativeScheme, Grid1D, RealField};
use crate::madelung::DensityFields;

/// Normalization slack accepted by [`info_entropy`].
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Leading-order binning defect `Δq² J / 24` (J the Fisher information)
/// above which a bin width is reported as unresolved.
pub const UNRESOLVED_DEFECT: f64 = 8e-3;

const RESIDUAL_EPS: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct InfoDensityField {
    pub rho_i: RealField,
    /// `I = ∫ ρ_I dx`.
    pub entropy: f64,
    pub t: f64,
}

impl InfoDensityField {
    pub fn from_density(rho: &RealField, reg_floor: f64, t: f64) -> Result<Self> {
        let rho_i = info_density(rho, reg_floor)?;
        let entropy = rho_i.integrate();
        Ok(Self { rho_i, entropy, t })
    }
}

/// Density fields and information density at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub fields: DensityFields,
    pub info: InfoDensityField,
}

impl Snapshot {
    pub fn new(fields: DensityFields, reg_floor: f64) -> Result<Self> {
        let info = InfoDensityField::from_density(&fields.rho, reg_floor, fields.t)?;
        Ok(Self { fields, info })
    }

    pub fn t(&self) -> f64 {
        self.fields.t
    }

    pub fn grid(&self) -> &Grid1D {
        self.fields.grid()
    }
}

fn check_nonnegative(rho: &RealField) -> Result<()> {
    match rho.values().iter().position(|&r| r < 0.0) {
        Some(index) => Err(Error::NegativeDensity { index, value: rho.values()[index] }),
        None => Ok(()),
    }
}

fn info_point(r: f64, reg_floor: f64) -> f64 {
    if r < reg_floor || r == 0.0 {
        0.0
    } else {
        -r * (r.ln() - 1.0)
    }
}

/// Pointwise `-ρ(ln ρ - 1)`, zero where `ρ < reg_floor`.
pub fn info_density(rho: &RealField, reg_floor: f64) -> Result<RealField> {
    check_nonnegative(rho)?;
    rho.map(|r| info_point(r, reg_floor))
}

/// `I = ∫ -ρ(ln ρ - 1) dx` for a normalized density.
pub fn info_entropy(rho: &RealField, reg_floor: f64) -> Result<f64> {
    let norm = rho.integrate();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm });
    }
    Ok(info_density(rho, reg_floor)?.integrate())
}

/// Standard differential entropy `-∫ ρ ln ρ dx` with `0 ln 0 = 0`.
pub fn differential_entropy(rho: &RealField) -> Result<f64> {
    check_nonnegative(rho)?;
    Ok(rho.map(|r| if r > 0.0 { -r * r.ln() } else { 0.0 })?.integrate())
}

fn points_per_bin(grid: &Grid1D, bin_width: f64) -> Result<usize> {
    let invalid = |reason: &str| Error::InvalidBinWidth { bin_width, reason: reason.to_string() };
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(invalid("must be positive"));
    }
    let ratio = bin_width / grid.dx();
    let per_bin = ratio.round();
    if per_bin < 1.0 || (ratio - per_bin).abs() > 1e-9 * ratio {
        return Err(invalid("not an integer multiple of dx"));
    }
    let per_bin = per_bin as usize;
    if !grid.len().is_multiple_of(per_bin) {
        return Err(invalid("bins do not tile the domain"));
    }
    Ok(per_bin)
}

/// Bin probabilities `p_i = ∫_bin ρ dx`, using the spectral running integral
/// so each bin is integrated to the accuracy of the global quadrature.
pub fn bin_probabilities(rho: &RealField, bin_width: f64) -> Result<Vec<f64>> {
    check_nonnegative(rho)?;
    let per_bin = points_per_bin(rho.grid(), bin_width)?;
    let cum = rho.cumulative_integral();
    Ok(cum.iter().step_by(per_bin).collect::<Vec<_>>().windows(2).map(|w| w[1] - w[0]).collect())
}

/// `-Σ p_i ln p_i` over bins of width `bin_width`, with `0 ln 0 = 0`.
pub fn binned_entropy(rho: &RealField, bin_width: f64) -> Result<f64> {
    Ok(bin_probabilities(rho, bin_width)?
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// Fisher information `∫ (∂x ρ)² / ρ dx` over points above the floor.
pub fn fisher_information(rho: &RealField, reg_floor: f64) -> f64 {
    let d = rho.derivative(DerivativeScheme::Spectral);
    rho.grid().dx()
        * rho
            .values()
            .iter()
            .zip(d.values())
            .filter(|(&r, _)| r >= reg_floor)
            .map(|(r, d)| d * d / r)
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinningRow {
    pub bin_width: f64,
    pub binned: f64,
    /// `binned + ln Δq`, which tends to `I - 1` as `Δq → 0`.
    pub binned_plus_log: f64,
    /// `I - 1`, the standard differential entropy.
    pub target: f64,
    /// The continuum information entropy `I` itself.
    pub info_entropy: f64,
    pub defect: f64,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinningStudy {
    /// Sorted by increasing bin width.
    pub rows: Vec<BinningRow>,
    /// `log2(defect(2Δq)/defect(Δq))` between consecutive resolved rows.
    pub orders: Vec<f64>,
}

impl BinningStudy {
    pub fn min_order(&self) -> Option<f64> {
        self.orders.iter().copied().reduce(f64::min)
    }
}

pub fn binning_limit_study(rho: &RealField, bin_widths: &[f64], reg_floor: f64) -> Result<BinningStudy> {
    let info = info_entropy(rho, reg_floor)?;
    let target = info - 1.0;
    let fisher = fisher_information(rho, reg_floor);
    let mut widths = bin_widths.to_vec();
    widths.sort_by(f64::total_cmp);
    let rows = widths
        .into_iter()
        .map(|w| {
            let binned = binned_entropy(rho, w)?;
            let binned_plus_log = binned + w.ln();
            Ok(BinningRow {
                bin_width: w,
                binned,
                binned_plus_log,
                target,
                info_entropy: info,
                defect: (binned_plus_log - target).abs(),
                resolved: w * w * fisher / 24.0 <= UNRESOLVED_DEFECT,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let orders = rows
        .windows(2)
        .filter(|p| p[0].resolved && p[1].resolved)
        .map(|p| (p[1].defect / p[0].defect).ln() / (p[1].bin_width / p[0].bin_width).ln())
        .collect();
    Ok(BinningStudy { rows, orders })
}

/// L2 and L∞ norms of a residual field, plus the L2 norm relative to the
/// size of `∂t ρ_I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub l2: f64,
    pub linf: f64,
    pub relative_l2: f64,
}

fn masked_norms(residual: &[f64], mask: &[bool], scale: &[f64], dx: f64) -> ResidualNorms {
    let (mut sq, mut linf, mut scale_sq) = (0.0, 0.0_f64, 0.0);
    for ((r, &m), s) in residual.iter().zip(mask).zip(scale) {
        if m {
            sq += r * r;
            linf = linf.max(r.abs());
            scale_sq += s * s;
        }
    }
    let l2 = (sq * dx).sqrt();
    ResidualNorms { l2, linf, relative_l2: l2 / (scale_sq * dx).sqrt().max(RESIDUAL_EPS) }
}

fn same_grid(fields: &[&RealField]) -> Result<Grid1D> {
    let g = *fields[0].grid();
    if fields.iter().any(|f| *f.grid() != g) {
        return Err(Error::GridMismatch);
    }
    Ok(g)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Chain-rule residual `∂t ρ_I + (∂t ρ) ln ρ` with centered time differences
/// over snapshots `dt` apart, masked below the floor.
pub fn rate_identity_residual(
    prev: &RealField,
    cur: &RealField,
    next: &RealField,
    dt: f64,
    reg_floor: f64,
) -> Result<ResidualNorms> {
    check_dt(dt)?;
    let grid = same_grid(&[prev, cur, next])?;
    let ri_prev = info_density(prev, reg_floor)?;
    let ri_next = info_density(next, reg_floor)?;
    let h = 0.5 / dt;
    let n = grid.len();
    let mut residual = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut mask = vec![false; n];
    for k in 0..n {
        let (rp, rc, rn) = (prev.values()[k], cur.values()[k], next.values()[k]);
        if rp < reg_floor || rc < reg_floor || rn < reg_floor {
            continue;
        }
        let dri = (ri_next.values()[k] - ri_prev.values()[k]) * h;
        let drho = (rn - rp) * h;
        residual[k] = dri + drho * rc.ln();
        scale[k] = dri;
        mask[k] = true;
    }
    Ok(masked_norms(&residual, &mask, &scale, grid.dx()))
}

/// Local balance residual `∂t ρ_I + ∂x[(ρ_I - ρ) v] + v ∂x ρ` at the middle
/// snapshot, with a centered time difference and spectral `∂x`.
pub fn balance_residual(prev: &Snapshot, cur: &Snapshot, next: &Snapshot, dt: f64) -> Result<ResidualNorms> {
    check_dt(dt)?;
    let grid = same_grid(&[&prev.info.rho_i, &cur.info.rho_i, &next.info.rho_i, &cur.fields.velocity])?;
    let rho = &cur.fields.rho;
    let v = &cur.fields.velocity;
    let flux = cur.info.rho_i.zip_with(rho, |ri, r| ri - r)?.zip_with(v, |a, v| a * v)?;
    let div_flux = flux.derivative(DerivativeScheme::Spectral);
    let drho = rho.derivative(DerivativeScheme::Spectral);
    let h = 0.5 / dt;
    let n = grid.len();
    let mut residual = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mask: Vec<bool> = (0..n).map(|_| true).collect();
    for k in 0..n {
        let dri = (next.info.rho_i.values()[k] - prev.info.rho_i.values()[k]) * h;
        residual[k] = dri + div_flux.values()[k] + v.values()[k] * drho.values()[k];
        scale[k] = dri;
    }
    Ok(masked_norms(&residual, &mask, &scale, grid.dx()))
}

/// Integration region for the integral balance law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Region {
    Full,
    Interval { a: f64, b: f64 },
}

impl Region {
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        if let Region::Interval { a, b } = *self {
            if !(a < b) || a < grid.x_min() || b > grid.x_max() {
                return Err(Error::InvalidParameter(format!(
                    "subvolume [{a}, {b}] must be a non-empty interval inside [{}, {})",
                    grid.x_min(),
                    grid.x_max()
                )));
            }
        }
        Ok(())
    }
}

/// Region integrals at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSample {
    pub t: f64,
    /// `∫_region ρ_I dx`.
    pub entropy: f64,
    /// `-∫_region v ∂x ρ dx`.
    pub volume_term: f64,
    /// `[(ρ_I - ρ) v]_b - [(ρ_I - ρ) v]_a`; zero for the full periodic domain.
    pub boundary_flux: f64,
}

pub fn rate_sample(snapshot: &Snapshot, region: Region) -> Result<RateSample> {
    let fields = &snapshot.fields;
    let v = &fields.velocity;
    let v_drho = v.zip_with(&fields.rho.derivative(DerivativeScheme::Spectral), |v, d| v * d)?;
    let (entropy, volume_term, boundary_flux) = match region {
        Region::Full => (snapshot.info.entropy, -v_drho.integrate(), 0.0),
        Region::Interval { a, b } => {
            region.validate(fields.grid())?;
            let flux = snapshot.info.rho_i.zip_with(&fields.rho, |ri, r| ri - r)?.zip_with(v, |f, v| f * v)?;
            (
                snapshot.info.rho_i.integrate_between(a, b),
                -v_drho.integrate_between(a, b),
                flux.interpolate(b) - flux.interpolate(a),
            )
        }
    };
    Ok(RateSample { t: snapshot.t(), entropy, volume_term, boundary_flux })
}

/// Terms of the integral entropy balance at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceReport {
    pub t: f64,
    /// Centered difference of the region entropy.
    pub didt_fd: f64,
    /// `-∫_region v ∂x ρ dx`.
    pub rhs_eq16: f64,
    pub boundary_flux: f64,
    /// `-boundary_flux + rhs_eq16`.
    pub rhs_eq15: f64,
}

impl BalanceReport {
    pub fn mismatch(&self) -> f64 {
        self.didt_fd - self.rhs_eq15
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCheck {
    pub reports: Vec<BalanceReport>,
    pub warnings: Vec<String>,
}

impl RateCheck {
    pub fn max_abs_mismatch(&self) -> f64 {
        self.reports.iter().map(|r| r.mismatch().abs()).fold(0.0, f64::max)
    }

    /// Largest mismatch relative to the largest `|rhs_eq15|`, floored at
    /// `floor`.
    pub fn relative_mismatch(&self, floor: f64) -> f64 {
        let scale = self.reports.iter().map(|r| r.rhs_eq15.abs()).fold(floor, f64::max);
        self.max_abs_mismatch() / scale
    }
}

/// Evaluates the integral balance at every interior sample of a uniformly
/// spaced series. The first and last samples only supply neighbours.
pub fn entropy_rate_check(samples: &[RateSample]) -> Result<RateCheck> {
    if samples.len() < 3 {
        return Err(Error::Series(format!("need at least 3 samples, got {}", samples.len())));
    }
    let h = samples[1].t - samples[0].t;
    if !(h > 0.0) {
        return Err(Error::Series("sample times must increase".into()));
    }
    for w in samples.windows(2) {
        let step = w[1].t - w[0].t;
        if (step - h).abs() > 1e-9 * h.max(w[1].t.abs()) {
            return Err(Error::Series(format!("non-uniform stride near t = {}", w[0].t)));
        }
    }
    let mut warnings = Vec::new();
    let reports = samples
        .windows(3)
        .map(|w| {
            let first = w[2].entropy - w[0].entropy;
            let second = w[2].entropy - 2.0 * w[1].entropy + w[0].entropy;
            if second.abs() > first.abs() && second.abs() > 1e-12 {
                warnings.push(format!(
                    "t = {}: entropy curvature dominates its slope; stride {h} may under-sample I(t)",
                    w[1].t
                ));
            }
            let rhs = w[1].volume_term;
            BalanceReport {
                t: w[1].t,
                didt_fd: first / (2.0 * h),
                rhs_eq16: rhs,
                boundary_flux: w[1].boundary_flux,
                rhs_eq15: -w[1].boundary_flux + rhs,
            }
        })
        .collect();
    Ok(RateCheck { reports, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of(x: f64, dead_band: f64) -> Self {
        if x.abs() < dead_band {
            Sign::Zero
        } else if x > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignSample {
    pub t: f64,
    pub entropy_rate: Sign,
    pub gradient_term: Sign,
    /// `None` inside the dead band.
    pub agree: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignWitness {
    pub samples: Vec<SignSample>,
    /// Fraction of samples outside the dead band whose signs agree; 1.0 when
    /// every sample lies inside it.
    pub fraction: f64,
}

pub const SIGN_DEAD_BAND: f64 = 1e-8;

/// Compares `sgn(dI/dt)` with `sgn(-∫ v ∂x ρ)` sample by sample.
pub fn sign_witness(reports: &[BalanceReport], dead_band: f64) -> SignWitness {
    let samples: Vec<SignSample> = reports
        .iter()
        .map(|r| {
            let entropy_rate = Sign::of(r.didt_fd, dead_band);
            let gradient_term = Sign::of(r.rhs_eq16, dead_band);
            let agree = (r.didt_fd.abs() >= dead_band).then(|| entropy_rate == gradient_term);
            SignSample { t: r.t, entropy_rate, gradient_term, agree }
        })
        .collect();
    let decided: Vec<bool> = samples.iter().filter_map(|s| s.agree).collect();
    let fraction = if decided.is_empty() {
        1.0
    } else {
        decided.iter().filter(|&&a| a).count() as f64 / decided.len() as f64
    };
    SignWitness { samples, fraction }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    const FLOOR: f64 = 1e-12;

    fn gaussian(grid: Grid1D, sigma: f64) -> RealField {
        RealField::from_fn(grid, |x| (-x * x / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).sqrt())
            .unwrap()
    }

    fn scalar(r: f64) -> f64 {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        info_density(&RealField::from_fn(g, |_| r).unwrap(), 0.0).unwrap().values()[0]
    }

    #[test]
    fn info_density_points() {
        assert_eq!(scalar(1.0), 1.0);
        assert!(scalar(E).abs() < 1e-15);
        assert!(scalar(1e-300) < 1e-296);
        assert_eq!(scalar(0.0), 0.0);
    }

    #[test]
    fn negative_density_rejected() {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        let mut v = vec![1.0; 16];
        v[4] = -1e-3;
        let rho = RealField::new(g, v).unwrap();
        assert!(matches!(info_density(&rho, FLOOR), Err(Error::NegativeDensity { index: 4, .. })));
    }

    #[test]
    fn uniform_entropies() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let rho = RealField::from_fn(g, |_| 1.0).unwrap();
        assert_eq!(info_entropy(&rho, FLOOR).unwrap(), 1.0);
        let g = Grid1D::new(0.0, 2.0, 64).unwrap();
        let rho = RealField::from_fn(g, |_| 0.5).unwrap();
        let i = info_entropy(&rho, FLOOR).unwrap();
        assert!((i - (2f64.ln() + 1.0)).abs() < 1e-14);
        assert!((i - 1.6931).abs() < 1e-4);
    }

    #[test]
    fn unnormalized_rejected() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let rho = RealField::from_fn(g, |_| 1.1).unwrap();
        match info_entropy(&rho, FLOOR) {
            Err(Error::NotNormalized { norm }) => assert!((norm - 1.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gaussian_entropy() {
        let g = Grid1D::new(-20.0, 20.0, 2048).unwrap();
        let rho = gaussian(g, 1.0);
        let i = info_entropy(&rho, FLOOR).unwrap();
        let exact = 0.5 * (2.0 * PI * E).ln() + 1.0;
        assert!((exact - 2.41894).abs() < 1e-5);
        assert!((i - exact).abs() < 1e-6);
        let h = differential_entropy(&rho).unwrap();
        assert!((i - (h + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn binned_uniform() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let rho = RealField::from_fn(g, |_| 1.0).unwrap();
        for bins in [1usize, 2, 4, 8, 16, 32, 64] {
            let b = binned_entropy(&rho, 1.0 / bins as f64).unwrap();
            assert!((b - (bins as f64).ln()).abs() < 1e-12, "{bins}: {b}");
        }
        assert!(binned_entropy(&rho, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bin_width_must_tile() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let rho = RealField::from_fn(g, |_| 1.0).unwrap();
        assert!(matches!(binned_entropy(&rho, 0.01), Err(Error::InvalidBinWidth { .. })));
        assert!(matches!(binned_entropy(&rho, 3.0 / 64.0), Err(Error::InvalidBinWidth { .. })));
        assert!(matches!(binned_entropy(&rho, -0.5), Err(Error::InvalidBinWidth { .. })));
    }

    /// Per-bin probabilities from the normal CDF, independent of the grid
    /// quadrature.
    fn erf_binned(sigma: f64, lo: f64, hi: f64, width: f64) -> f64 {
        let bins = ((hi - lo) / width).round() as usize;
        (0..bins)
            .map(|i| {
                let a = lo + i as f64 * width;
                normal_cdf((a + width) / sigma) - normal_cdf(a / sigma)
            })
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    fn normal_cdf(z: f64) -> f64 {
        // composite Simpson on [-40, z]
        let lo = -40.0;
        if z <= lo {
            return 0.0;
        }
        let m = 20_000;
        let h = (z - lo) / m as f64;
        let f = |x: f64| (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
        let mut s = f(lo) + f(z);
        for i in 1..m {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn binned_gaussian_matches_cdf_oracle() {
        let g = Grid1D::new(-12.8, 12.8, 2048).unwrap();
        let rho = gaussian(g, 1.0);
        let b = binned_entropy(&rho, 0.1).unwrap();
        let oracle = erf_binned(1.0, -12.8, 12.8, 0.1);
        assert!((b - oracle).abs() < 1e-9, "{b} vs {oracle}");
        let h = 0.5 * (2.0 * PI * E).ln();
        assert!((b + 0.1f64.ln() - h).abs() < 5e-4);
    }

    #[test]
    fn binning_study_uniform_is_exact() {
        let g = Grid1D::new(0.0, 1.0, 64).unwrap();
        let rho = RealField::from_fn(g, |_| 1.0).unwrap();
        let study = binning_limit_study(&rho, &[0.25, 0.125, 0.5], FLOOR).unwrap();
        let widths: Vec<f64> = study.rows.iter().map(|r| r.bin_width).collect();
        assert_eq!(widths, vec![0.125, 0.25, 0.5]);
        for r in &study.rows {
            assert!(r.binned_plus_log.abs() < 1e-12);
            assert!(r.target.abs() < 1e-12);
            assert!(r.resolved);
        }
    }

    #[test]
    fn binning_study_gaussian_order() {
        let g = Grid1D::new(-12.8, 12.8, 2048).unwrap();
        let rho = gaussian(g, 1.0);
        let study = binning_limit_study(&rho, &[0.4, 0.2, 0.1], FLOOR).unwrap();
        assert!(study.rows.iter().all(|r| r.resolved));
        for w in study.rows.windows(2) {
            assert!(w[1].defect / w[0].defect >= 3.5);
        }
        assert!(study.min_order().unwrap() >= 1.8);
    }

    #[test]
    fn narrow_gaussian_flagged_unresolved() {
        let g = Grid1D::new(-12.8, 12.8, 2048).unwrap();
        let wide = binning_limit_study(&gaussian(g, 1.0), &[0.1], FLOOR).unwrap();
        let narrow = binning_limit_study(&gaussian(g, 0.2), &[0.1], FLOOR).unwrap();
        assert!(!narrow.rows[0].resolved);
        assert!(narrow.rows[0].defect > 10.0 * wide.rows[0].defect);
    }

    #[test]
    fn stationary_rate_identity_vanishes() {
        let g = Grid1D::new(-20.0, 20.0, 512).unwrap();
        let rho = gaussian(g, 1.0);
        let r = rate_identity_residual(&rho, &rho, &rho, 1e-3, FLOOR).unwrap();
        assert!(r.l2 < 1e-12 && r.linf < 1e-12);
        let other = Grid1D::new(-10.0, 10.0, 512).unwrap();
        assert_eq!(
            rate_identity_residual(&rho, &gaussian(other, 1.0), &rho, 1e-3, FLOOR),
            Err(Error::GridMismatch)
        );
    }

    #[test]
    fn sign_witness_dead_band() {
        let mk = |didt: f64, rhs: f64| BalanceReport { t: 0.0, didt_fd: didt, rhs_eq16: rhs, boundary_flux: 0.0, rhs_eq15: rhs };
        let w = sign_witness(&[mk(1e-3, 2e-3), mk(-1e-3, -1e-3), mk(1e-10, -1e-10)], SIGN_DEAD_BAND);
        assert_eq!(w.fraction, 1.0);
        assert_eq!(w.samples[2].agree, None);
        let w = sign_witness(&[mk(1e-3, 2e-3), mk(-1e-3, 1e-3)], SIGN_DEAD_BAND);
        assert_eq!(w.fraction, 0.5);
        assert_eq!(sign_witness(&[mk(0.0, 0.0)], SIGN_DEAD_BAND).fraction, 1.0);
    }

    #[test]
    fn rate_check_rejects_short_or_uneven_series() {
        let s = |t: f64| RateSample { t, entropy: t, volume_term: 1.0, boundary_flux: 0.0 };
        assert!(entropy_rate_check(&[s(0.0), s(1.0)]).is_err());
        assert!(entropy_rate_check(&[s(0.0), s(1.0), s(2.5)]).is_err());
        let check = entropy_rate_check(&[s(0.0), s(0.5), s(1.0), s(1.5)]).unwrap();
        assert_eq!(check.reports.len(), 2);
        assert!(check.max_abs_mismatch() < 1e-15);
        assert!(check.warnings.is_empty());
    }

    #[test]
    fn region_validation() {
        let g = Grid1D::new(-20.0, 20.0, 512).unwrap();
        assert!(Region::Interval { a: -2.0, b: 2.0 }.validate(&g).is_ok());
        assert!(Region::Interval { a: 2.0, b: -2.0 }.validate(&g).is_err());
        assert!(Region::Interval { a: -30.0, b: 2.0 }.validate(&g).is_err());
    }
}
