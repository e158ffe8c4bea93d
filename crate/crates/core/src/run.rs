//! Drives a configured run and collects the per-sample diagnostics.
//!
//! Frames are visited in increasing step index from `-stride` to
//! `n_steps + stride`. Samples sit at multiples of the stride; the local
//! residuals at a sample use the frames one propagator step either side, and
//! `dI/dt` uses the neighbouring samples. States before `t = 0` come from
//! running the propagator backwards.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Write};

use serde::Serialize;

use crate::config::{InitialState, RunConfig};
use crate::entropy::{
    balance_residual, entropy_rate_check, rate_identity_residual, rate_sample, sign_witness, RateSample,
    Region, ResidualNorms, Snapshot, SIGN_DEAD_BAND,
};
use crate::error::{Error, Result};
use crate::grid::RealField;
use crate::madelung::DensityFields;
use crate::oracle::{CoherentOracle, GaussianOracle};
use crate::propagator::{init_coherent, init_gaussian, Potential, Propagator, WaveFunction};

/// Column order of `series.csv`.
pub const SERIES_COLUMNS: [&str; 11] = [
    "t",
    "norm",
    "I",
    "dIdt_fd",
    "rhs_eq16",
    "boundary_flux",
    "rhs_eq15",
    "residual13_l2",
    "residual13_linf",
    "residual9_l2",
    "floored_points",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub norm: f64,
    /// Entropy of the analysis region (the full domain unless a subvolume is set).
    pub entropy: f64,
    pub didt_fd: f64,
    pub rhs_eq16: f64,
    pub boundary_flux: f64,
    pub rhs_eq15: f64,
    pub residual13: ResidualNorms,
    pub residual9: ResidualNorms,
    pub floored_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `"<="` or `">="`.
    pub comparison: String,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, comparison: "<=".into(), passed: value <= tolerance }
    }

    fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, comparison: ">=".into(), passed: value >= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub samples: usize,
    pub final_t: f64,
    /// Full-domain entropy at `t = 0` and at the end of the run.
    pub initial_entropy: f64,
    pub final_entropy: f64,
    pub delta_entropy: f64,
    pub norm_drift: f64,
    pub max_residual13_l2: f64,
    pub max_residual13_linf: f64,
    pub max_residual13_relative: f64,
    pub max_residual9_l2: f64,
    pub rate_mismatch_abs: f64,
    pub rate_mismatch_rel: f64,
    /// Present for full-domain runs.
    pub sign_witness_fraction: Option<f64>,
    pub max_floored_points: usize,
    pub max_seam_density: f64,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Field dump at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub index: usize,
    pub t: f64,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<SeriesRow>,
    pub summary: RunSummary,
    pub dumps: Vec<FieldDump>,
}

struct Frame {
    index: i64,
    snapshot: Snapshot,
    norm: f64,
    seam: f64,
}

trait FrameSource {
    /// Emits frames for every wanted index in `lo..=hi`, in increasing order.
    fn visit(
        &mut self,
        lo: i64,
        hi: i64,
        want: &dyn Fn(i64) -> bool,
        sink: &mut dyn FnMut(Frame) -> Result<()>,
    ) -> Result<()>;
}

fn seam_density(rho: &RealField) -> f64 {
    let v = rho.values();
    v[0].max(v[v.len() - 1])
}

struct Simulation<'a> {
    config: &'a RunConfig,
    initial: WaveFunction,
}

impl Simulation<'_> {
    fn frame(&self, index: i64, wf: &WaveFunction) -> Result<Frame> {
        let mut fields = DensityFields::from_wavefunction(wf, self.config.reg_floor);
        fields.t = index as f64 * self.config.dt;
        let norm = fields.rho.integrate();
        let seam = seam_density(&fields.rho);
        Ok(Frame { index, snapshot: Snapshot::new(fields, self.config.reg_floor)?, norm, seam })
    }
}

impl FrameSource for Simulation<'_> {
    fn visit(
        &mut self,
        lo: i64,
        hi: i64,
        want: &dyn Fn(i64) -> bool,
        sink: &mut dyn FnMut(Frame) -> Result<()>,
    ) -> Result<()> {
        let c = self.config;
        let mut backward = Propagator::new(c.grid, c.params, &c.potential, -c.dt)?;
        let mut wf = self.initial.clone();
        let mut early = Vec::new();
        for i in (lo..0).rev() {
            backward.apply(&mut wf)?;
            if want(i) {
                early.push(self.frame(i, &wf)?);
            }
        }
        for frame in early.into_iter().rev() {
            sink(frame)?;
        }
        let mut forward = Propagator::new(c.grid, c.params, &c.potential, c.dt)?;
        let mut wf = self.initial.clone();
        for i in 0..=hi {
            if want(i) {
                sink(self.frame(i, &wf)?)?;
            }
            if i < hi {
                forward.apply(&mut wf)?;
            }
        }
        Ok(())
    }
}

enum Analytic {
    Gaussian(GaussianOracle),
    Coherent(CoherentOracle),
}

struct OracleSource<'a> {
    config: &'a RunConfig,
    oracle: Analytic,
}

impl FrameSource for OracleSource<'_> {
    fn visit(
        &mut self,
        lo: i64,
        hi: i64,
        want: &dyn Fn(i64) -> bool,
        sink: &mut dyn FnMut(Frame) -> Result<()>,
    ) -> Result<()> {
        let c = self.config;
        for i in (lo..=hi).filter(|&i| want(i)) {
            let t = i as f64 * c.dt;
            let snapshot = match &self.oracle {
                Analytic::Gaussian(o) => o.fields(c.grid, t, c.reg_floor)?,
                Analytic::Coherent(o) => o.fields(c.grid, t, c.reg_floor)?,
            };
            let norm = snapshot.fields.rho.integrate();
            let seam = seam_density(&snapshot.fields.rho);
            sink(Frame { index: i, snapshot, norm, seam })?;
        }
        Ok(())
    }
}

fn harmonic_center(potential: &Potential) -> f64 {
    match *potential {
        Potential::Harmonic { center, .. } => center,
        _ => 0.0,
    }
}

pub fn initial_state(config: &RunConfig) -> Result<WaveFunction> {
    match config.state {
        InitialState::Gaussian { sigma0, x0, k0 } => init_gaussian(config.grid, config.params, sigma0, x0, k0),
        InitialState::Coherent { omega, amplitude } => {
            init_coherent(config.grid, config.params, omega, amplitude, harmonic_center(&config.potential))
        }
    }
}

/// Propagates the configured state and evaluates every diagnostic.
pub fn simulate(config: &RunConfig) -> Result<RunReport> {
    let mut source = Simulation { config, initial: initial_state(config)? };
    collect(config, &mut source)
}

/// Evaluates the same diagnostics on the closed-form fields.
pub fn oracle_run(config: &RunConfig) -> Result<RunReport> {
    let oracle = match (config.state, config.potential) {
        (InitialState::Gaussian { sigma0, x0, k0 }, Potential::Free) => {
            Analytic::Gaussian(GaussianOracle::new(sigma0, x0, k0, config.params)?)
        }
        (InitialState::Coherent { omega, amplitude }, Potential::Harmonic { omega: w, center }) if w == omega => {
            Analytic::Coherent(CoherentOracle::new(omega, amplitude, center, config.params)?)
        }
        _ => {
            return Err(Error::InvalidParameter(
                "no closed form: oracle runs need a free gaussian or a coherent state in its own harmonic well".into(),
            ))
        }
    };
    collect(config, &mut OracleSource { config, oracle })
}

#[derive(Default)]
struct SampleData {
    rate: Option<RateSample>,
    full_entropy: f64,
    norm: f64,
    floored: usize,
    seam: f64,
    residuals: Option<(ResidualNorms, ResidualNorms)>,
}

fn collect(config: &RunConfig, source: &mut dyn FrameSource) -> Result<RunReport> {
    let stride = config.observe_stride as i64;
    let n = config.n_steps as i64;
    if stride < 1 || n % stride != 0 {
        return Err(Error::InvalidParameter(format!(
            "observe_stride {stride} must be positive and divide the step count {n}"
        )));
    }
    config.region.validate(&config.grid)?;
    let is_sample = |i: i64| i.rem_euclid(stride) == 0;
    let is_observed = |i: i64| is_sample(i) && (0..=n).contains(&i);
    let want = |i: i64| is_sample(i) || is_observed(i - 1) || is_observed(i + 1);

    let mut data: BTreeMap<i64, SampleData> = BTreeMap::new();
    let mut window: VecDeque<Frame> = VecDeque::with_capacity(3);
    let mut dumps = Vec::new();
    let mut sink = |frame: Frame| -> Result<()> {
        if is_sample(frame.index) {
            let entry = data.entry(frame.index).or_default();
            entry.rate = Some(rate_sample(&frame.snapshot, config.region)?);
            entry.full_entropy = frame.snapshot.info.entropy;
            entry.norm = frame.norm;
            entry.floored = frame.snapshot.fields.floored;
            entry.seam = frame.seam;
            if config.snapshots && is_observed(frame.index) {
                dumps.push(FieldDump {
                    index: (frame.index / stride) as usize,
                    t: frame.snapshot.t(),
                    snapshot: frame.snapshot.clone(),
                });
            }
        }
        if window.len() == 3 {
            window.pop_front();
        }
        window.push_back(frame);
        if window.len() == 3 {
            let (a, b, c) = (&window[0], &window[1], &window[2]);
            if is_observed(b.index) && a.index + 1 == b.index && b.index + 1 == c.index {
                let r13 = balance_residual(&a.snapshot, &b.snapshot, &c.snapshot, config.dt)?;
                let r9 = rate_identity_residual(
                    &a.snapshot.fields.rho,
                    &b.snapshot.fields.rho,
                    &c.snapshot.fields.rho,
                    config.dt,
                    config.reg_floor,
                )?;
                data.entry(b.index).or_default().residuals = Some((r13, r9));
            }
        }
        Ok(())
    };
    source.visit(-stride, n + stride, &want, &mut sink)?;

    let samples: Vec<RateSample> = data
        .values()
        .map(|d| d.rate.ok_or_else(|| Error::Series("missing sample".into())))
        .collect::<Result<_>>()?;
    let check = entropy_rate_check(&samples)?;
    let observed: Vec<(&i64, &SampleData)> = data.iter().filter(|(&i, _)| is_observed(i)).collect();
    if observed.len() != check.reports.len() {
        return Err(Error::Series(format!(
            "expected {} balance reports, got {}",
            observed.len(),
            check.reports.len()
        )));
    }

    let mut rows = Vec::with_capacity(observed.len());
    for ((_, d), report) in observed.iter().zip(&check.reports) {
        let (residual13, residual9) = d
            .residuals
            .ok_or_else(|| Error::Series(format!("missing residual window at t = {}", report.t)))?;
        rows.push(SeriesRow {
            t: report.t,
            norm: d.norm,
            entropy: d.rate.map_or(f64::NAN, |r| r.entropy),
            didt_fd: report.didt_fd,
            rhs_eq16: report.rhs_eq16,
            boundary_flux: report.boundary_flux,
            rhs_eq15: report.rhs_eq15,
            residual13,
            residual9,
            floored_points: d.floored,
        });
    }

    let first = observed.first().map(|(_, d)| *d).expect("at least the t = 0 sample");
    let last = observed.last().map(|(_, d)| *d).expect("at least the t = 0 sample");
    let max = |f: &dyn Fn(&SeriesRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let norm_drift = observed.iter().map(|(_, d)| (d.norm - first.norm).abs()).fold(0.0, f64::max);
    let rate_mismatch_rel = check.relative_mismatch(SIGN_DEAD_BAND);
    let sign_fraction = matches!(config.region, Region::Full).then(|| sign_witness(&check.reports, SIGN_DEAD_BAND).fraction);
    let mut warnings = check.warnings.clone();
    // A grid point crossing the floor switches its ρ_I on or off, so I moves
    // in steps of this size and the centred difference inherits them.
    let floor_quantum = config.reg_floor * (1.0 - config.reg_floor.ln()) * config.grid.dx()
        / (2.0 * stride as f64 * config.dt);
    let rate_mismatch_abs = check.max_abs_mismatch();
    if rate_mismatch_abs > 0.0 && rate_mismatch_abs <= 2.0 * floor_quantum {
        warnings.push(format!(
            "rate mismatch {rate_mismatch_abs:.3e} is at the floor-crossing level {floor_quantum:.3e}; \
             lower reg_floor or widen observe_stride"
        ));
    }

    let tol = config.tolerances;
    let mut checks = vec![
        Check::at_most("norm_drift", norm_drift, tol.norm),
        Check::at_most("rate_mismatch_rel", rate_mismatch_rel, tol.rate),
    ];
    if let Some(f) = sign_fraction {
        checks.push(Check::at_least("sign_witness_fraction", f, tol.sign));
    }
    let passed = checks.iter().all(|c| c.passed);

    let summary = RunSummary {
        samples: rows.len(),
        final_t: rows.last().map_or(0.0, |r| r.t),
        initial_entropy: first.full_entropy,
        final_entropy: last.full_entropy,
        delta_entropy: last.full_entropy - first.full_entropy,
        norm_drift,
        max_residual13_l2: max(&|r| r.residual13.l2),
        max_residual13_linf: max(&|r| r.residual13.linf),
        max_residual13_relative: max(&|r| r.residual13.relative_l2),
        max_residual9_l2: max(&|r| r.residual9.l2),
        rate_mismatch_abs,
        rate_mismatch_rel,
        sign_witness_fraction: sign_fraction,
        max_floored_points: rows.iter().map(|r| r.floored_points).max().unwrap_or(0),
        max_seam_density: observed.iter().map(|(_, d)| d.seam).fold(0.0, f64::max),
        warnings,
        checks,
        passed,
    };
    Ok(RunReport { rows, summary, dumps })
}

/// 17 significant digits.
pub fn fmt_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_series_csv<W: Write>(rows: &[SeriesRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", SERIES_COLUMNS.join(","))?;
    for r in rows {
        let nums = [
            r.t,
            r.norm,
            r.entropy,
            r.didt_fd,
            r.rhs_eq16,
            r.boundary_flux,
            r.rhs_eq15,
            r.residual13.l2,
            r.residual13.linf,
            r.residual9.l2,
        ];
        let fields: Vec<String> = nums.iter().map(|&x| fmt_number(x)).collect();
        writeln!(out, "{},{}", fields.join(","), r.floored_points)?;
    }
    Ok(())
}

pub fn write_field_csv<W: Write>(dump: &FieldDump, mut out: W) -> io::Result<()> {
    writeln!(out, "x,rho,current,velocity,rho_I")?;
    let f = &dump.snapshot.fields;
    let grid = f.grid();
    for k in 0..grid.len() {
        let row = [
            grid.x(k),
            f.rho.values()[k],
            f.current.values()[k],
            f.velocity.values()[k],
            dump.snapshot.info.rho_i.values()[k],
        ];
        let fields: Vec<String> = row.iter().map(|&x| fmt_number(x)).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
