//! Classical-limit sweep over `ε = ħ t_c / (m L_c²)`.
//!
//! ε is varied through ħ alone. The time step is rescaled per row so that
//! the kinetic phase per step of the fastest grid mode is the same for every
//! ε, and each row is an independent run.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{InitialState, RunConfig, Tolerances};
use crate::entropy::Region;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, PhysicalParams};
use crate::madelung::DEFAULT_REG_FLOOR;
use crate::propagator::Potential;
use crate::run::simulate;

/// Seam density above which a row is treated as having outrun the domain.
/// Propagated densities carry a roundoff floor near 1e-28, so tighter limits
/// would reject well-resolved runs.
pub const SEAM_LIMIT: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub grid: Grid1D,
    pub mass: f64,
    /// Initial packet width, the characteristic length `L_c`.
    pub sigma0: f64,
    /// Run duration, the characteristic time `t_c`.
    pub t_c: f64,
    /// Strictly descending.
    pub epsilons: Vec<f64>,
    pub potential: Potential,
    /// `dt ħ k_max² / 2m` per step; must lie below π.
    pub kinetic_phase: f64,
    /// Time between samples; must divide `t_c`.
    pub observe_interval: f64,
    pub reg_floor: f64,
    pub expected_exponent: f64,
    pub tol_exponent: f64,
    /// Bound on each row's relative `dI/dt` vs `-∫ v ∂x ρ` mismatch.
    pub tol_rate: f64,
}

impl SweepSpec {
    pub fn defaults(grid: Grid1D, sigma0: f64, t_c: f64, epsilons: Vec<f64>) -> Self {
        Self {
            grid,
            mass: 1.0,
            sigma0,
            t_c,
            epsilons,
            potential: Potential::Free,
            kinetic_phase: 1.0,
            observe_interval: 0.02,
            reg_floor: DEFAULT_REG_FLOOR,
            expected_exponent: 2.0,
            tol_exponent: 0.1,
            tol_rate: 1e-3,
        }
    }

    pub fn validate_epsilons(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidParameter("epsilons must not be empty".into()));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidParameter("every epsilon must be positive".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("epsilons must be strictly descending".into()));
        }
        Ok(())
    }

    fn samples(&self) -> f64 {
        self.t_c / self.observe_interval
    }

    pub fn validate_timing(&self) -> Result<()> {
        let samples = self.samples();
        if samples < 1.0 || (samples - samples.round()).abs() > 1e-9 * samples {
            return Err(Error::InvalidParameter(format!(
                "observe_interval {} must divide t_c {}",
                self.observe_interval, self.t_c
            )));
        }
        Ok(())
    }

    pub fn hbar_for(&self, epsilon: f64) -> f64 {
        epsilon * self.mass * self.sigma0 * self.sigma0 / self.t_c
    }

    /// Run configuration realizing one ε.
    pub fn run_config(&self, epsilon: f64) -> Result<RunConfig> {
        let params = PhysicalParams::new(self.hbar_for(epsilon), self.mass)?;
        let dt_max = self.kinetic_phase * 2.0 * self.mass / (params.hbar * self.grid.k_max().powi(2));
        let stride = (self.observe_interval / dt_max).ceil().max(1.0) as usize;
        let dt = self.observe_interval / stride as f64;
        let n_steps = self.samples().round() as usize * stride;
        Ok(RunConfig {
            grid: self.grid,
            params,
            state: InitialState::Gaussian { sigma0: self.sigma0, x0: 0.0, k0: 0.0 },
            potential: self.potential,
            dt,
            t_final: self.t_c,
            n_steps,
            observe_stride: stride,
            reg_floor: self.reg_floor,
            region: Region::Full,
            tolerances: Tolerances { rate: self.tol_rate, ..Tolerances::default() },
            snapshots: false,
        })
    }

    /// `ΔI = ½ ln(1 + ε²/4)` for the free Gaussian with `L_c = σ0`.
    pub fn closed_form_delta(&self, epsilon: f64) -> Option<f64> {
        matches!(self.potential, Potential::Free).then(|| 0.5 * (1.0 + epsilon * epsilon / 4.0).ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub hbar: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub delta_entropy: f64,
    pub delta_entropy_closed_form: Option<f64>,
    pub max_residual13_linf: f64,
    pub rate_mismatch_rel: f64,
    pub sign_fraction: f64,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    /// In input order, i.e. descending ε.
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln ΔI` against `ln ε` over successful rows.
    pub exponent: Option<f64>,
    pub max_rate_mismatch_rel: f64,
    pub min_sign_fraction: f64,
    pub passed: bool,
}

fn run_row(spec: &SweepSpec, epsilon: f64) -> SweepRow {
    let mut row = SweepRow {
        epsilon,
        hbar: spec.hbar_for(epsilon),
        dt: f64::NAN,
        n_steps: 0,
        delta_entropy: f64::NAN,
        delta_entropy_closed_form: spec.closed_form_delta(epsilon),
        max_residual13_linf: f64::NAN,
        rate_mismatch_rel: f64::NAN,
        sign_fraction: f64::NAN,
        error: None,
    };
    let outcome = spec.run_config(epsilon).and_then(|config| {
        row.dt = config.dt;
        row.n_steps = config.n_steps;
        simulate(&config)
    });
    match outcome {
        Ok(report) => {
            let s = report.summary;
            if s.max_seam_density > SEAM_LIMIT {
                row.error = Some(Error::SeamDensity { density: s.max_seam_density }.to_string());
            }
            row.delta_entropy = s.delta_entropy;
            row.max_residual13_linf = s.max_residual13_linf;
            row.rate_mismatch_rel = s.rate_mismatch_rel;
            row.sign_fraction = s.sign_witness_fraction.unwrap_or(f64::NAN);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs every ε (concurrently, up to `threads` workers; 0 picks the default)
/// and assembles the report in descending ε.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> Result<SweepReport> {
    spec.validate_epsilons()?;
    spec.validate_timing()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| spec.epsilons.par_iter().map(|&e| run_row(spec, e)).collect());

    let good: Vec<&SweepRow> = rows.iter().filter(|r| r.ok()).collect();
    let exponent = fit_power_law(
        &good.iter().map(|r| r.epsilon).collect::<Vec<_>>(),
        &good.iter().map(|r| r.delta_entropy).collect::<Vec<_>>(),
    );
    let max_rate_mismatch_rel = good.iter().map(|r| r.rate_mismatch_rel).fold(0.0, f64::max);
    let min_sign_fraction = good.iter().map(|r| r.sign_fraction).fold(1.0, f64::min);
    let passed = !good.is_empty()
        && exponent.is_some_and(|p| (p - spec.expected_exponent).abs() <= spec.tol_exponent)
        && max_rate_mismatch_rel <= spec.tol_rate
        && min_sign_fraction >= 1.0;
    Ok(SweepReport { rows, exponent, max_rate_mismatch_rel, min_sign_fraction, passed })
}
