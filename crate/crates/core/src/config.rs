//! Line-oriented `key = value` configuration files with `#` comments.
//!
//! Every error carries the 1-based line it refers to. Missing required keys
//! are reported against the line just past the end of the file.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::climit::SweepSpec;
use crate::entropy::Region;
use crate::grid::{Grid1D, PhysicalParams};
use crate::madelung::DEFAULT_REG_FLOOR;
use crate::propagator::{check_time_step, init_coherent, init_gaussian, Potential};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

type ConfigResult<T> = Result<T, ConfigError>;

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Raw parsed entries keyed by name.
#[derive(Debug, Clone)]
struct KeyValues {
    entries: BTreeMap<String, Entry>,
    end_line: usize,
}

impl KeyValues {
    fn parse(text: &str, allowed: &[&str]) -> ConfigResult<Self> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut end_line = 1;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            end_line = line + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::new(line, format!("expected `key = value`, got `{content}`")));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::new(line, "empty key"));
            }
            if !allowed.contains(&key) {
                return Err(ConfigError::new(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(ConfigError::new(line, format!("{key}: missing value")));
            }
            if let Some(prev) = entries.get(key) {
                return Err(ConfigError::new(
                    line,
                    format!("{key}: duplicate key (first set on line {})", prev.line),
                ));
            }
            entries.insert(key.to_string(), Entry { line, value: value.to_string() });
        }
        Ok(Self { entries, end_line })
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(self.end_line, |e| e.line)
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn parsed<T: FromStr>(&self, key: &str, kind: &str) -> ConfigResult<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                ConfigError::new(e.line, format!("{key}: expected {kind}, got `{}`", e.value))
            }),
        }
    }

    fn opt_f64(&self, key: &str) -> ConfigResult<Option<f64>> {
        match self.parsed::<f64>(key, "a number")? {
            Some(v) if !v.is_finite() => Err(ConfigError::new(self.line(key), format!("{key}: must be finite"))),
            other => Ok(other),
        }
    }

    fn f64(&self, key: &str) -> ConfigResult<f64> {
        self.opt_f64(key)?
            .ok_or_else(|| ConfigError::new(self.end_line, format!("missing required key `{key}`")))
    }

    fn f64_or(&self, key: &str, default: f64) -> ConfigResult<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str, value: f64) -> ConfigResult<f64> {
        if value > 0.0 {
            Ok(value)
        } else {
            Err(ConfigError::new(self.line(key), format!("{key} must be positive, got {value}")))
        }
    }

    fn usize(&self, key: &str) -> ConfigResult<Option<usize>> {
        self.parsed::<usize>(key, "a non-negative integer")
    }

    fn word(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn bool_or(&self, key: &str, default: bool) -> ConfigResult<bool> {
        Ok(self.parsed::<bool>(key, "true or false")?.unwrap_or(default))
    }

    fn list(&self, key: &str) -> ConfigResult<Option<Vec<f64>>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ConfigError::new(e.line, format!("{key}: expected a list of numbers, got `{s}`")))
            })
            .collect::<ConfigResult<Vec<_>>>()
            .map(Some)
    }
}

fn parse_grid(kv: &KeyValues) -> ConfigResult<Grid1D> {
    let x_min = kv.f64("x_min")?;
    let x_max = kv.f64("x_max")?;
    let n = kv
        .usize("n")?
        .ok_or_else(|| ConfigError::new(kv.end_line, "missing required key `n`"))?;
    if x_max <= x_min {
        return Err(ConfigError::new(kv.line("x_max"), format!("x_max must exceed x_min ({x_max} <= {x_min})")));
    }
    if !n.is_power_of_two() {
        return Err(ConfigError::new(kv.line("n"), format!("n must be a power of two, got {n}")));
    }
    Grid1D::new(x_min, x_max, n).map_err(|e| ConfigError::new(kv.line("n"), e.to_string()))
}

fn parse_params(kv: &KeyValues) -> ConfigResult<PhysicalParams> {
    let hbar = kv.f64_or("hbar", 1.0)?;
    let mass = kv.f64_or("mass", 1.0)?;
    kv.positive("hbar", hbar)?;
    kv.positive("mass", mass)?;
    Ok(PhysicalParams { hbar, mass })
}

fn parse_potential(kv: &KeyValues, default: Option<Potential>) -> ConfigResult<Potential> {
    let potential = match kv.word("potential") {
        None => return Ok(default.unwrap_or(Potential::Free)),
        Some("free") => Potential::Free,
        Some("harmonic") => Potential::Harmonic {
            omega: kv.positive("omega", kv.f64("omega")?)?,
            center: kv.f64_or("center", 0.0)?,
        },
        Some("barrier") => Potential::GaussianBarrier {
            height: kv.f64("barrier_height")?,
            width: kv.positive("barrier_width", kv.f64("barrier_width")?)?,
            center: kv.f64_or("barrier_center", 0.0)?,
        },
        Some(other) => {
            return Err(ConfigError::new(
                kv.line("potential"),
                format!("potential: expected free, harmonic or barrier, got `{other}`"),
            ))
        }
    };
    Ok(potential)
}

fn parse_reg_floor(kv: &KeyValues) -> ConfigResult<f64> {
    let floor = kv.f64_or("reg_floor", DEFAULT_REG_FLOOR)?;
    kv.positive("reg_floor", floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Gaussian { sigma0: f64, x0: f64, k0: f64 },
    Coherent { omega: f64, amplitude: f64 },
}

/// Tolerances behind the pass/fail exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Bound on `max |norm(t) - norm(0)|`.
    pub norm: f64,
    /// Bound on the relative mismatch between `dI/dt` and the balance right-hand side.
    pub rate: f64,
    /// Required sign-witness agreement fraction (full-domain runs only).
    pub sign: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { norm: 1e-10, rate: 1e-3, sign: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid1D,
    pub params: PhysicalParams,
    pub state: InitialState,
    pub potential: Potential,
    pub dt: f64,
    pub t_final: f64,
    pub n_steps: usize,
    pub observe_stride: usize,
    pub reg_floor: f64,
    pub region: Region,
    pub tolerances: Tolerances,
    pub snapshots: bool,
}

pub const DEFAULT_OBSERVE_STRIDE: usize = 10;

const RUN_KEYS: &[&str] = &[
    "x_min", "x_max", "n", "hbar", "mass", "state", "sigma0", "x0", "k0", "amplitude", "potential", "omega",
    "center", "barrier_height", "barrier_width", "barrier_center", "dt", "t_final", "observe_stride",
    "reg_floor", "subvolume", "tol_norm", "tol_rate", "tol_sign", "snapshots",
];

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> ConfigResult<RunConfig> {
    let kv = KeyValues::parse(text, RUN_KEYS)?;
    let grid = parse_grid(&kv)?;
    let params = parse_params(&kv)?;

    let state = match kv.word("state").unwrap_or("gaussian") {
        "gaussian" => {
            for key in ["amplitude"] {
                if kv.has(key) {
                    return Err(ConfigError::new(kv.line(key), format!("{key} only applies to state = coherent")));
                }
            }
            InitialState::Gaussian {
                sigma0: kv.positive("sigma0", kv.f64("sigma0")?)?,
                x0: kv.f64_or("x0", 0.0)?,
                k0: kv.f64_or("k0", 0.0)?,
            }
        }
        "coherent" => {
            for key in ["sigma0", "k0", "x0"] {
                if kv.has(key) {
                    return Err(ConfigError::new(kv.line(key), format!("{key} only applies to state = gaussian")));
                }
            }
            InitialState::Coherent {
                omega: kv.positive("omega", kv.f64("omega")?)?,
                amplitude: kv.f64_or("amplitude", 0.0)?,
            }
        }
        other => {
            return Err(ConfigError::new(
                kv.line("state"),
                format!("state: expected gaussian or coherent, got `{other}`"),
            ))
        }
    };

    let potential = match state {
        InitialState::Coherent { omega, .. } => {
            let default = Potential::Harmonic { omega, center: kv.f64_or("center", 0.0)? };
            let p = parse_potential(&kv, Some(default))?;
            if !matches!(p, Potential::Harmonic { .. }) {
                return Err(ConfigError::new(kv.line("potential"), "state = coherent requires potential = harmonic"));
            }
            p
        }
        InitialState::Gaussian { .. } => parse_potential(&kv, None)?,
    };

    // resolution checks on the initial state
    let init = match state {
        InitialState::Gaussian { sigma0, x0, k0 } => init_gaussian(grid, params, sigma0, x0, k0).map(|_| ()),
        InitialState::Coherent { omega, amplitude } => {
            let center = match potential {
                Potential::Harmonic { center, .. } => center,
                _ => 0.0,
            };
            init_coherent(grid, params, omega, amplitude, center).map(|_| ())
        }
    };
    if let Err(e) = init {
        let key = if kv.has("sigma0") { "sigma0" } else { "omega" };
        return Err(ConfigError::new(kv.line(key), e.to_string()));
    }

    let dt = kv.positive("dt", kv.f64("dt")?)?;
    check_time_step(&grid, &params, dt).map_err(|e| ConfigError::new(kv.line("dt"), e.to_string()))?;
    let t_final = kv.f64("t_final")?;
    if t_final < 0.0 {
        return Err(ConfigError::new(kv.line("t_final"), "t_final must be non-negative"));
    }
    let steps = t_final / dt;
    let n_steps = steps.round();
    if (steps - n_steps).abs() > 1e-9 * steps.max(1.0) {
        return Err(ConfigError::new(kv.line("t_final"), format!("t_final = {t_final} is not a multiple of dt = {dt}")));
    }
    let n_steps = n_steps as usize;
    let observe_stride = kv.usize("observe_stride")?.unwrap_or(DEFAULT_OBSERVE_STRIDE);
    if observe_stride == 0 {
        return Err(ConfigError::new(kv.line("observe_stride"), "observe_stride must be at least 1"));
    }
    if !n_steps.is_multiple_of(observe_stride) {
        return Err(ConfigError::new(
            kv.line("observe_stride"),
            format!("observe_stride = {observe_stride} must divide the step count {n_steps}"),
        ));
    }

    let region = match kv.list("subvolume")? {
        None => Region::Full,
        Some(v) if v.len() == 2 => {
            let r = Region::Interval { a: v[0], b: v[1] };
            r.validate(&grid).map_err(|e| ConfigError::new(kv.line("subvolume"), e.to_string()))?;
            r
        }
        Some(_) => return Err(ConfigError::new(kv.line("subvolume"), "subvolume: expected `a, b`")),
    };

    let defaults = Tolerances::default();
    let tolerances = Tolerances {
        norm: kv.positive("tol_norm", kv.f64_or("tol_norm", defaults.norm)?)?,
        rate: kv.positive("tol_rate", kv.f64_or("tol_rate", defaults.rate)?)?,
        sign: kv.f64_or("tol_sign", defaults.sign)?,
    };
    if !(0.0..=1.0).contains(&tolerances.sign) {
        return Err(ConfigError::new(kv.line("tol_sign"), "tol_sign must lie in [0, 1]"));
    }

    Ok(RunConfig {
        grid,
        params,
        state,
        potential,
        dt,
        t_final,
        n_steps,
        observe_stride,
        reg_floor: parse_reg_floor(&kv)?,
        region,
        tolerances,
        snapshots: kv.bool_or("snapshots", false)?,
    })
}

const SWEEP_KEYS: &[&str] = &[
    "x_min", "x_max", "n", "mass", "sigma0", "t_c", "epsilons", "kinetic_phase", "observe_interval", "reg_floor",
    "potential", "omega", "center", "barrier_height", "barrier_width", "barrier_center", "expected_exponent",
    "tol_exponent", "tol_rate",
];

pub fn parse_sweep_config(text: &str) -> ConfigResult<SweepSpec> {
    let kv = KeyValues::parse(text, SWEEP_KEYS)?;
    let grid = parse_grid(&kv)?;
    let mass = kv.positive("mass", kv.f64_or("mass", 1.0)?)?;
    let sigma0 = kv.positive("sigma0", kv.f64("sigma0")?)?;
    let t_c = kv.positive("t_c", kv.f64("t_c")?)?;
    let epsilons = kv
        .list("epsilons")?
        .ok_or_else(|| ConfigError::new(kv.end_line, "missing required key `epsilons`"))?;
    let defaults = SweepSpec::defaults(grid, sigma0, t_c, epsilons.clone());
    let spec = SweepSpec {
        mass,
        potential: parse_potential(&kv, None)?,
        kinetic_phase: kv.f64_or("kinetic_phase", defaults.kinetic_phase)?,
        observe_interval: kv.positive("observe_interval", kv.f64_or("observe_interval", defaults.observe_interval)?)?,
        reg_floor: parse_reg_floor(&kv)?,
        expected_exponent: kv.f64_or("expected_exponent", defaults.expected_exponent)?,
        tol_exponent: kv.positive("tol_exponent", kv.f64_or("tol_exponent", defaults.tol_exponent)?)?,
        tol_rate: kv.positive("tol_rate", kv.f64_or("tol_rate", defaults.tol_rate)?)?,
        ..defaults
    };
    if let Err(e) = spec.validate_epsilons() {
        return Err(ConfigError::new(kv.line("epsilons"), e.to_string()));
    }
    if !(spec.kinetic_phase > 0.0 && spec.kinetic_phase < std::f64::consts::PI) {
        return Err(ConfigError::new(
            kv.line("kinetic_phase"),
            format!("time step too large: kinetic_phase = {} must lie in (0, pi)", spec.kinetic_phase),
        ));
    }
    if let Err(e) = spec.validate_timing() {
        return Err(ConfigError::new(kv.line("observe_interval"), e.to_string()));
    }
    if let Err(e) = init_gaussian(grid, PhysicalParams { hbar: 1.0, mass }, sigma0, 0.0, 0.0) {
        return Err(ConfigError::new(kv.line("sigma0"), e.to_string()));
    }
    Ok(spec)
}

/// Binning-limit study of a Gaussian density.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningConfig {
    pub grid: Grid1D,
    pub sigma0: f64,
    pub x0: f64,
    pub bin_widths: Vec<f64>,
    pub reg_floor: f64,
    pub min_order: f64,
}

const BINNING_KEYS: &[&str] = &["x_min", "x_max", "n", "sigma0", "x0", "bin_widths", "reg_floor", "min_order"];

pub fn parse_binning_config(text: &str) -> ConfigResult<BinningConfig> {
    let kv = KeyValues::parse(text, BINNING_KEYS)?;
    let grid = parse_grid(&kv)?;
    let sigma0 = kv.positive("sigma0", kv.f64("sigma0")?)?;
    let x0 = kv.f64_or("x0", 0.0)?;
    if let Err(e) = init_gaussian(grid, PhysicalParams::default(), sigma0, x0, 0.0) {
        return Err(ConfigError::new(kv.line("sigma0"), e.to_string()));
    }
    let bin_widths = kv
        .list("bin_widths")?
        .ok_or_else(|| ConfigError::new(kv.end_line, "missing required key `bin_widths`"))?;
    if bin_widths.is_empty() {
        return Err(ConfigError::new(kv.line("bin_widths"), "bin_widths must not be empty"));
    }
    let probe = crate::grid::RealField::from_fn(grid, |_| 1.0 / grid.length())
        .map_err(|e| ConfigError::new(kv.line("bin_widths"), e.to_string()))?;
    for &w in &bin_widths {
        if let Err(e) = crate::entropy::bin_probabilities(&probe, w) {
            return Err(ConfigError::new(kv.line("bin_widths"), e.to_string()));
        }
    }
    Ok(BinningConfig {
        grid,
        sigma0,
        x0,
        bin_widths,
        reg_floor: parse_reg_floor(&kv)?,
        min_order: kv.f64_or("min_order", 1.8)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# free spreading packet
x_min = -20
x_max = 20
n = 512
sigma0 = 1.0
dt = 1e-3
t_final = 0.1
";

    #[test]
    fn minimal_config_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.params, PhysicalParams { hbar: 1.0, mass: 1.0 });
        assert_eq!(c.reg_floor, 1e-12);
        assert_eq!(c.observe_stride, 10);
        assert_eq!(c.n_steps, 100);
        assert_eq!(c.potential, Potential::Free);
        assert_eq!(c.region, Region::Full);
        assert_eq!(c.state, InitialState::Gaussian { sigma0: 1.0, x0: 0.0, k0: 0.0 });
        assert_eq!(c.tolerances, Tolerances::default());
        assert!(!c.snapshots);
    }

    #[test]
    fn n_must_be_power_of_two() {
        let text = MINIMAL.replace("n = 512", "n = 1000");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("n must be a power of two"), "{e}");
    }

    #[test]
    fn large_time_step_rejected() {
        let text = MINIMAL.replace("dt = 1e-3", "dt = 1.0").replace("t_final = 0.1", "t_final = 1.0");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, 6);
        assert!(e.to_string().starts_with("line 6: time step too large"), "{e}");
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse_config(&format!("{MINIMAL}colour = blue\n")).unwrap_err();
        assert_eq!(e.line, 8);
        assert!(e.message.contains("unknown key `colour`"));
    }

    #[test]
    fn syntax_and_type_errors_carry_lines() {
        let e = parse_config(&format!("{MINIMAL}hbar\n")).unwrap_err();
        assert_eq!(e.line, 8);
        let e = parse_config(&MINIMAL.replace("sigma0 = 1.0", "sigma0 = wide")).unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.message.contains("expected a number"));
        let e = parse_config(&format!("{MINIMAL}dt = 2e-3\n")).unwrap_err();
        assert_eq!(e.line, 8);
        assert!(e.message.contains("duplicate"));
    }

    #[test]
    fn missing_key_reports_end_of_file() {
        let e = parse_config(&MINIMAL.replace("dt = 1e-3\n", "")).unwrap_err();
        assert_eq!(e.line, 7);
        assert!(e.message.contains("missing required key `dt`"));
    }

    #[test]
    fn coarse_grid_rejected() {
        let e = parse_config(&MINIMAL.replace("sigma0 = 1.0", "sigma0 = 0.1")).unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.message.contains("grid too coarse"));
    }

    #[test]
    fn coherent_defaults_to_matching_harmonic() {
        let text = "x_min = -20\nx_max = 20\nn = 512\nstate = coherent\nomega = 1\namplitude = 1\ndt = 1e-3\nt_final = 0\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.potential, Potential::Harmonic { omega: 1.0, center: 0.0 });
        assert_eq!(c.n_steps, 0);
        let e = parse_config(&format!("{text}potential = free\n")).unwrap_err();
        assert_eq!(e.line, 9);
    }

    #[test]
    fn stride_must_divide_steps() {
        let e = parse_config(&format!("{MINIMAL}observe_stride = 7\n")).unwrap_err();
        assert_eq!(e.line, 8);
        let e = parse_config(&MINIMAL.replace("t_final = 0.1", "t_final = 0.1005")).unwrap_err();
        assert_eq!(e.line, 7);
    }

    #[test]
    fn subvolume_parsed_and_checked() {
        let c = parse_config(&format!("{MINIMAL}subvolume = -2, 2\n")).unwrap();
        assert_eq!(c.region, Region::Interval { a: -2.0, b: 2.0 });
        assert_eq!(parse_config(&format!("{MINIMAL}subvolume = 2, -2\n")).unwrap_err().line, 8);
        assert_eq!(parse_config(&format!("{MINIMAL}subvolume = 2\n")).unwrap_err().line, 8);
    }

    #[test]
    fn barrier_potential() {
        let text = format!("{MINIMAL}potential = barrier\nbarrier_height = 2\nbarrier_width = 0.5\nbarrier_center = 3\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.potential, Potential::GaussianBarrier { height: 2.0, width: 0.5, center: 3.0 });
        let e = parse_config(&text.replace("barrier_width = 0.5", "barrier_width = -1")).unwrap_err();
        assert_eq!(e.line, 10);
    }

    #[test]
    fn sweep_config() {
        let text = "x_min = -20\nx_max = 20\nn = 1024\nsigma0 = 1\nt_c = 2\nepsilons = 0.4, 0.2, 0.1, 0.05\n";
        let s = parse_sweep_config(text).unwrap();
        assert_eq!(s.epsilons, vec![0.4, 0.2, 0.1, 0.05]);
        let e = parse_sweep_config(&text.replace("0.4, 0.2", "0.2, 0.4")).unwrap_err();
        assert_eq!(e.line, 6);
        let e = parse_sweep_config(&format!("{text}kinetic_phase = 4\n")).unwrap_err();
        assert_eq!(e.line, 7);
        assert!(e.message.contains("time step too large"));
    }

    #[test]
    fn binning_config() {
        let text = "x_min = -12.8\nx_max = 12.8\nn = 2048\nsigma0 = 1\nbin_widths = 0.4, 0.2, 0.1\n";
        let b = parse_binning_config(text).unwrap();
        assert_eq!(b.bin_widths, vec![0.4, 0.2, 0.1]);
        let e = parse_binning_config(&text.replace("0.4, 0.2, 0.1", "0.4, 0.03")).unwrap_err();
        assert_eq!(e.line, 5);
    }
}
