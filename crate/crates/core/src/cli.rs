//! Subcommand bodies. Each returns whether its tolerance checks passed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::climit::{run_sweep, SweepReport};
use crate::config::{parse_binning_config, parse_config, parse_sweep_config, BinningConfig, ConfigError};
use crate::entropy::{binning_limit_study, BinningStudy};
use crate::grid::PhysicalParams;
use crate::madelung::density;
use crate::propagator::init_gaussian;
use crate::run::{fmt_number, oracle_run, simulate, write_field_csv, write_series_csv, RunReport};

/// Environment variable capping sweep parallelism (0 = automatic).
pub const THREADS_ENV: &str = "ENTROFLUX_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Run(#[from] crate::error::Error),
    #[error("{THREADS_ENV} must be a non-negative integer, got `{0}`")]
    Threads(String),
}

/// Process exit status: 0 pass, 1 usage/config/I/O error, 2 tolerance failure.
pub fn exit_code(outcome: &Result<bool, CliError>) -> u8 {
    match outcome {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(_) => 1,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn config_err(path: &Path) -> impl FnOnce(ConfigError) -> CliError + '_ {
    move |source| CliError::Config { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut out = create(path)?;
    f(&mut out).and_then(|_| out.flush()).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_with(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

fn write_run(report: &RunReport, out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_with(&out_dir.join("series.csv"), |out| write_series_csv(&report.rows, out))?;
    write_json(&out_dir.join("summary.json"), &report.summary)?;
    if !report.dumps.is_empty() {
        let dir = out_dir.join("snapshots");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for dump in &report.dumps {
            let path = dir.join(format!("field_{:06}.csv", dump.index));
            write_with(&path, |out| write_field_csv(dump, out))?;
        }
    }
    Ok(())
}

fn report_run(name: &str, report: &RunReport, quiet: bool) {
    if quiet {
        return;
    }
    let s = &report.summary;
    println!(
        "{name}: {} samples, I {:.8} -> {:.8}, norm drift {:.3e}, rate mismatch {:.3e}",
        s.samples, s.initial_entropy, s.final_entropy, s.norm_drift, s.rate_mismatch_rel
    );
    for w in &s.warnings {
        println!("warning: {w}");
    }
    for c in &s.checks {
        println!(
            "  {} {}: {:.6e} {} {:.6e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.comparison,
            c.tolerance
        );
    }
}

pub fn cmd_simulate(config: &Path, out_dir: &Path, quiet: bool) -> Result<bool, CliError> {
    let cfg = parse_config(&read_config(config)?).map_err(config_err(config))?;
    let report = simulate(&cfg)?;
    write_run(&report, out_dir)?;
    report_run("simulate", &report, quiet);
    Ok(report.summary.passed)
}

pub fn cmd_oracle(config: &Path, out_dir: &Path, quiet: bool) -> Result<bool, CliError> {
    let cfg = parse_config(&read_config(config)?).map_err(config_err(config))?;
    let report = oracle_run(&cfg)?;
    write_run(&report, out_dir)?;
    report_run("oracle", &report, quiet);
    Ok(report.summary.passed)
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| CliError::Threads(v)),
    }
}

pub fn write_sweep_csv<W: Write>(report: &SweepReport, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "epsilon,hbar,dt,n_steps,delta_I,delta_I_closed_form,max_residual13_linf,rate_mismatch_rel,sign_fraction,status"
    )?;
    let opt = |x: Option<f64>| x.map(fmt_number).unwrap_or_default();
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_number(r.epsilon),
            fmt_number(r.hbar),
            fmt_number(r.dt),
            r.n_steps,
            fmt_number(r.delta_entropy),
            opt(r.delta_entropy_closed_form),
            fmt_number(r.max_residual13_linf),
            fmt_number(r.rate_mismatch_rel),
            fmt_number(r.sign_fraction),
            r.error.as_deref().map_or("ok".to_string(), |e| format!("\"error: {}\"", e.replace('"', "'"))),
        )?;
    }
    Ok(())
}

pub fn cmd_sweep(config: &Path, out_dir: &Path, quiet: bool) -> Result<bool, CliError> {
    let spec = parse_sweep_config(&read_config(config)?).map_err(config_err(config))?;
    let threads = threads_from_env()?;
    let report = run_sweep(&spec, threads)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_with(&out_dir.join("sweep.csv"), |out| write_sweep_csv(&report, out))?;
    write_json(&out_dir.join("summary.json"), &report)?;
    if !quiet {
        for r in &report.rows {
            match &r.error {
                None => println!("eps {:<8} dI {:.6e} rate mismatch {:.3e}", r.epsilon, r.delta_entropy, r.rate_mismatch_rel),
                Some(e) => println!("eps {:<8} error: {e}", r.epsilon),
            }
        }
        match report.exponent {
            Some(p) => println!("fitted exponent {p:.4} (expected {} +/- {})", spec.expected_exponent, spec.tol_exponent),
            None => println!("fitted exponent unavailable"),
        }
        println!("{}", if report.passed { "PASS" } else { "FAIL" });
    }
    Ok(report.passed)
}

#[derive(Debug, Serialize)]
struct BinningSummary<'a> {
    study: &'a BinningStudy,
    min_order: Option<f64>,
    required_order: f64,
    passed: bool,
}

pub fn binning_study(cfg: &BinningConfig) -> crate::error::Result<BinningStudy> {
    let wf = init_gaussian(cfg.grid, PhysicalParams::default(), cfg.sigma0, cfg.x0, 0.0)?;
    binning_limit_study(&density(&wf), &cfg.bin_widths, cfg.reg_floor)
}

pub fn write_binning_csv<W: Write>(study: &BinningStudy, mut out: W) -> std::io::Result<()> {
    writeln!(out, "dq,binned,binned_plus_log_dq,target,I,defect,resolved")?;
    for r in &study.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_number(r.bin_width),
            fmt_number(r.binned),
            fmt_number(r.binned_plus_log),
            fmt_number(r.target),
            fmt_number(r.info_entropy),
            fmt_number(r.defect),
            if r.resolved { "resolved" } else { "unresolved" }
        )?;
    }
    Ok(())
}

pub fn cmd_binning(config: &Path, out_dir: &Path, quiet: bool) -> Result<bool, CliError> {
    let cfg = parse_binning_config(&read_config(config)?).map_err(config_err(config))?;
    let study = binning_study(&cfg)?;
    let min_order = study.min_order();
    let passed = min_order.is_none_or(|p| p >= cfg.min_order);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_with(&out_dir.join("binning.csv"), |out| write_binning_csv(&study, out))?;
    write_json(
        &out_dir.join("summary.json"),
        &BinningSummary { study: &study, min_order, required_order: cfg.min_order, passed },
    )?;
    if !quiet {
        for r in &study.rows {
            println!(
                "dq {:<6} defect {:.6e}{}",
                r.bin_width,
                r.defect,
                if r.resolved { "" } else { " (unresolved)" }
            );
        }
        if let Some(p) = min_order {
            println!("min order {p:.3} (required {})", cfg.min_order);
        }
    }
    Ok(passed)
}
