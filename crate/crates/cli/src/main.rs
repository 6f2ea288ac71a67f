//! `conedet` command-line driver.
//!
//! Exit codes: 0 success, 1 a configured check, a golden comparison or a
//! computation failed, 2 usage or configuration error.

use clap::{Args, Parser, Subcommand};
use conedet::config::{CheckOutcome, RunConfig, SurfaceKind};
use conedet::report::{self, ArtifactWriter};
use conedet::{conekernel, degeneration, heattrace, parametrix, renorm, spectrum, zetadet, Error};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conedet", version, about = "Determinants of the Laplacian on conically degenerating surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the configured surface.
    Spectrum(Common),
    /// Heat-trace samples and their short-time fit.
    Heattrace(Common),
    /// ζ(0), ζ′(0) and log det.
    Det(Common),
    /// Renormalized heat trace and zeta function of Z.
    Renorm(Common),
    /// Three-term parametrix report at one ε.
    Parametrix(Common),
    /// ε-sweep of log det against the predicted expansion.
    Sweep(Common),
    /// Exact cone heat kernel on the diagonal.
    Conekernel(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare every written file byte-for-byte with this directory.
    #[arg(long)]
    golden: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) | Error::Json(_) => Failure::Usage(e.to_string()),
            other => Failure::Failed(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    config_hash: String,
    result: Value,
    checks: Vec<CheckOutcome>,
    golden_mismatches: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(m)) => {
            eprintln!("failed: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let (name, common) = match &cli.command {
        Command::Spectrum(c) => ("spectrum", c),
        Command::Heattrace(c) => ("heattrace", c),
        Command::Det(c) => ("det", c),
        Command::Renorm(c) => ("renorm", c),
        Command::Parametrix(c) => ("parametrix", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Conekernel(c) => ("conekernel", c),
    };
    if !common.config.is_file() {
        return Err(Failure::Usage(format!("config file {} not found", common.config.display())));
    }
    let cfg = RunConfig::load(&common.config)?;
    let threads = cfg.output.workers.unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut w = ArtifactWriter::new(&out)?;
    let result = match cli.command {
        Command::Spectrum(_) => cmd_spectrum(&cfg, &mut w)?,
        Command::Heattrace(_) => cmd_heattrace(&cfg, &mut w)?,
        Command::Det(_) => cmd_det(&cfg, &mut w)?,
        Command::Renorm(_) => cmd_renorm(&cfg, &mut w)?,
        Command::Parametrix(_) => cmd_parametrix(&cfg, &mut w)?,
        Command::Sweep(_) => cmd_sweep(&cfg, &mut w)?,
        Command::Conekernel(_) => cmd_conekernel(&cfg, &mut w)?,
    };
    let checks: Vec<CheckOutcome> = cfg.checks.iter().map(|c| c.evaluate(&result)).collect();
    let golden_mismatches = match &common.golden {
        Some(g) => compare_golden(&w.written, g)?,
        None => Vec::new(),
    };
    let ok = checks.iter().all(|c| c.pass) && golden_mismatches.is_empty();
    let summary = Summary { command: name, config_hash: cfg.hash(), result, checks, golden_mismatches };
    w.json("summary.json", &summary)?;
    for c in &summary.checks {
        println!("{} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.path, c.message);
    }
    for m in &summary.golden_mismatches {
        println!("GOLDEN MISMATCH {m}");
    }
    println!("{name}: {} files in {} (config {})", w.written.len(), out.display(), &summary.config_hash[..12]);
    Ok(ok)
}

fn compare_golden(written: &[PathBuf], golden: &Path) -> Result<Vec<String>, Failure> {
    let mut bad = Vec::new();
    for p in written {
        let name = p.file_name().unwrap();
        let g = golden.join(name);
        if !g.is_file() {
            return Err(Failure::Usage(format!("golden file {} missing", g.display())));
        }
        if std::fs::read(p).map_err(Error::from)? != std::fs::read(&g).map_err(Error::from)? {
            bad.push(name.to_string_lossy().into_owned());
        }
    }
    Ok(bad)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::from(Error::from(e)))
}

#[derive(Serialize)]
struct EigenRow {
    lambda: f64,
    error: f64,
    mode: u32,
    radial_index: usize,
    multiplicity: u32,
}

fn spectrum_of(cfg: &RunConfig) -> Result<spectrum::SpectrumResult, Failure> {
    let s = cfg.surface.surface()?;
    let lam = cfg.spectrum.lambda_max;
    let mesh = spectrum::auto_mesh(&s, lam, cfg.spectrum.points_per_wavelength);
    Ok(spectrum::full_spectrum(&s, lam, mesh, &[])?)
}

fn cmd_spectrum(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, Failure> {
    let spec = spectrum_of(cfg)?;
    let rows: Vec<EigenRow> = spec
        .eigenvalues
        .iter()
        .map(|e| EigenRow { lambda: e.lambda, error: e.error, mode: e.mode, radial_index: e.radial_index, multiplicity: e.multiplicity })
        .collect();
    w.csv("spectrum.csv", &rows)?;
    let expanded = spec.expanded();
    let max_error = spec.eigenvalues.iter().map(|e| e.error).fold(0.0, f64::max);
    Ok(json!({
        "count": expanded.len(),
        "lowest": &expanded[..expanded.len().min(20)],
        "max_error": max_error,
        "area": spec.area,
        "cells": spec.mesh.cells,
        "m_max": spec.completeness.m_max,
        "surface_hash": spec.surface_hash,
    }))
}

fn cmd_heattrace(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, Failure> {
    let spec = spectrum_of(cfg)?;
    let h = &cfg.heattrace;
    let cert = heattrace::TailBoundCertificate::from_spectrum(&spec)?;
    let samples: Vec<heattrace::HeatTraceSample> = heattrace::log_grid(h.t_min, h.t_max, h.samples)
        .into_iter()
        .map(|t| heattrace::trace_from_spectrum(&spec, t, &cert, None))
        .collect::<conedet::Result<_>>()?;
    w.csv("heattrace.csv", &samples)?;
    let fit = heattrace::fit_short_time(&samples, h.basis)?;
    w.json("fit.json", &fit)?;
    Ok(json!({ "fit": to_value(&fit)?, "max_tail_bound": samples.iter().map(|s| s.tail_bound).fold(0.0, f64::max) }))
}

fn cmd_det(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, Failure> {
    let v = if cfg.det.route == "conformal" {
        to_value(&zetadet::conformal_log_det(&cfg.surface.profile()?)?)?
    } else {
        to_value(&zetadet::det_laplacian(&spectrum_of(cfg)?, &cfg.det.mellin)?)?
    };
    w.json("det.json", &v)?;
    Ok(v)
}

fn cmd_renorm(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, Failure> {
    if cfg.surface.kind != SurfaceKind::Z {
        return Err(Failure::Usage("renorm needs surface.kind = \"z\"".into()));
    }
    let zc = &cfg.renorm_zeta;
    let z = cfg.surface.z()?;
    let model = renorm::RenormModel::build(&z, zc.tau_min, zc.large_window.1, &cfg.renorm)?;
    let samples: Vec<renorm::RenormSample> = heattrace::log_grid(zc.tau_min, zc.large_window.1, zc.samples)
        .into_iter()
        .map(|t| model.eval(t))
        .collect::<conedet::Result<_>>()?;
    w.csv("renorm.csv", &samples)?;
    let rz = renorm::renorm_zeta(&model, zc)?;
    let f_inf = rz.large_fit.as_ref().map_or(0.0, |f| f.f_infty);
    let coeffs = renorm::expansion_coefficients(&conedet::geometry::CutoffFamily, z.gamma, 2, f_inf)?;
    let small = rz.small_fit.as_ref();
    let v = json!({
        "zeta": to_value(&rz)?,
        "coefficients": to_value(&coeffs)?,
        "c_gamma": model.c_gamma,
        "half_power_ratio": small.map(|f| (f.a(1) / f.a(0)).abs()),
    });
    w.json("renorm.json", &v)?;
    Ok(v)
}

fn cmd_parametrix(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, Failure> {
    let s = &cfg.surface;
    let g = conedet::geometry::glue(&s.omega0()?, &s.z()?, cfg.parametrix.epsilon)?;
    let rep = parametrix::parametrix_report(&g, &cfg.parametrix)?;
    w.csv("parametrix.csv", &rep.rows)?;
    let v = to_value(&rep)?;
    w.json("parametrix.json", &v)?;
    Ok(v)
}

fn cmd_sweep(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, Failure> {
    let res = degeneration::run_sweep(&cfg.sweep)?;
    report::write_sweep(&res, w)?;
    Ok(json!({
        "agrees": res.agrees,
        "comparisons": to_value(&res.comparisons)?,
        "fit": to_value(&res.fit)?,
        "prediction": to_value(&res.prediction)?,
        "excluded": to_value(&res.excluded)?,
        "log_det_spread": res.rows.iter().map(|r| r.log_det).fold(f64::NEG_INFINITY, f64::max)
            - res.rows.iter().map(|r| r.log_det).fold(f64::INFINITY, f64::min),
    }))
}

#[derive(Serialize)]
struct KernelRow {
    r: f64,
    cone: f64,
    plane: f64,
}

fn cmd_conekernel(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, Failure> {
    let c = &cfg.conekernel;
    let rows: Vec<KernelRow> = (0..c.points)
        .map(|i| {
            let r = c.r_min + (c.r_max - c.r_min) * i as f64 / (c.points.max(2) - 1) as f64;
            Ok(KernelRow { r, cone: conekernel::cone_diag(c.t, r, c.gamma)?, plane: conekernel::plane_diag(c.t)? })
        })
        .collect::<conedet::Result<_>>()?;
    w.csv("conekernel.csv", &rows)?;
    let plot: Vec<Vec<f64>> = rows.iter().map(|k| vec![k.r, k.cone, k.plane]).collect();
    w.plot("conekernel.dat", &["r", "cone", "plane"], &plot)?;
    Ok(json!({ "gamma": c.gamma, "t": c.t, "trace_excess": conekernel::cone_trace_excess(c.gamma)? }))
}
