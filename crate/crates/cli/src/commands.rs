//! Experiment runners behind each subcommand.

use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use synfreq::analysis::{asymmetry_metric, bloch_period_estimate, lorentzian_fit};
use synfreq::model::{dispersion_analytic, effective_flux};
use synfreq::protocols::{
    calibrate_swap, measure_band, run_experiment, swap_trace, DriveProgram, ExperimentConfig, ExperimentResult,
    Preparation, WavePacket,
};

use crate::config::{Command, ResolvedConfig};
use crate::error::{CliError, CliResult};
use crate::output::{heatmap, num, OutputDir, OutputEntry};

pub const TOOL_VERSION: &str = concat!("synfreq ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub defaults_applied: Vec<String>,
    pub outputs: Vec<OutputEntry>,
    /// Analysis failures that were recorded instead of aborting the run.
    pub errors: Vec<String>,
}

/// What one experiment produced besides its files.
struct Outcome {
    /// Headline number for sweep tables, e.g. the Bloch period.
    metric: Option<(&'static str, f64)>,
    errors: Vec<String>,
}

/// Run `config` into `out_dir`. Analysis failures are written to the
/// outputs and manifest first and then returned as a numerical error.
pub fn cmd_run(config: &ResolvedConfig, out_dir: &Path, jobs: usize) -> CliResult<RunManifest> {
    if config.command == Command::Sweep {
        return run_sweep(config, out_dir, jobs);
    }
    let (manifest, _) = run_single(config, out_dir)?;
    match manifest.errors.first() {
        Some(e) => Err(CliError::Numerical(e.clone())),
        None => Ok(manifest),
    }
}

fn run_single(config: &ResolvedConfig, out_dir: &Path) -> CliResult<(RunManifest, Outcome)> {
    let mut out = OutputDir::create(out_dir)?;
    info!("{} -> {}", config.command, out_dir.display());
    let outcome = match config.command {
        Command::Rabi => rabi(config, &mut out)?,
        Command::Walk => walk(config, &mut out)?,
        Command::Bloch => bloch(config, &mut out)?,
        Command::Band => band(config, &mut out)?,
        Command::Flux => flux(config, &mut out)?,
        Command::Unidir => unidir(config, &mut out)?,
        Command::Sweep => return Err(CliError::Usage("sweeps cannot be nested".into())),
    };
    let manifest = write_manifest(config, &mut out, outcome.errors.clone())?;
    Ok((manifest, outcome))
}

fn write_manifest(config: &ResolvedConfig, out: &mut OutputDir, errors: Vec<String>) -> CliResult<RunManifest> {
    let mut manifest = RunManifest {
        command: config.command.to_string(),
        config_digest: config.digest(),
        seed: config.experiment.seed,
        tool_version: TOOL_VERSION.to_string(),
        defaults_applied: config.defaults.clone(),
        outputs: Vec::new(),
        errors,
    };
    // the manifest lists itself
    let mut outputs = out.written.clone();
    outputs.push(OutputEntry { kind: "manifest".into(), path: "manifest.json".into() });
    manifest.outputs = outputs;
    out.json("manifest", "manifest.json", &manifest)?;
    Ok(manifest)
}

fn check_prep(config: &ResolvedConfig, want_site: bool) -> CliResult<()> {
    let is_site = matches!(config.experiment.prep, Preparation::SingleSite { .. });
    if is_site != want_site {
        let need = if want_site { "single_site" } else { "wave_packet" };
        return Err(CliError::Usage(format!("'{}' needs prep.kind = \"{need}\"", config.command)));
    }
    Ok(())
}

fn check_program(config: &ResolvedConfig, allowed: &[&str]) -> CliResult<()> {
    let name = match config.experiment.drive {
        DriveProgram::SingleTone { .. } => "single_tone",
        DriveProgram::DoubleTone { .. } => "double_tone",
        DriveProgram::Reversal { .. } => "reversal",
    };
    if !allowed.contains(&name) {
        return Err(CliError::Usage(format!(
            "'{}' does not run the {name} program (expected one of {allowed:?})",
            config.command
        )));
    }
    Ok(())
}

fn write_maps(config: &ResolvedConfig, out: &mut OutputDir, result: &ExperimentResult) -> CliResult<()> {
    out.populations("populations.csv", &result.map)?;
    if config.svg {
        let map = &result.map;
        let svg = heatmap(
            &format!("{} populations", config.command),
            "time (μs)",
            "mode",
            (map.modes.len(), map.times.len()),
            |r, c| map.p[(r, c)],
        );
        out.svg("populations.svg", svg)?;
    }
    Ok(())
}

fn wave_packet_block(config: &ExperimentConfig, wp: &WavePacket) -> Value {
    let sites: Vec<f64> = config.lattice.sites().map(|m| m as f64).collect();
    let fit = lorentzian_fit(&sites, &wp.state.mode_populations(), config.lattice.fsr());
    json!({
        "emission_time_us": wp.emission_time,
        "residual_p1": wp.residual_p1,
        "warning": wp.warning,
        "lorentzian": match fit {
            Ok(f) => json!({ "center_sites": f.center, "fwhm_MHz": f.fwhm, "peak": f.peak, "residual_rms": f.residual_rms }),
            Err(e) => json!({ "error": e.to_string() }),
        },
    })
}

fn run_and_write(
    config: &ResolvedConfig,
    out: &mut OutputDir,
    fit: &mut serde_json::Map<String, Value>,
) -> CliResult<ExperimentResult> {
    let result = run_experiment(&config.experiment)?;
    write_maps(config, out, &result)?;
    if let Some(wp) = &result.wave_packet {
        if let Some(w) = &wp.warning {
            warn!("{w}");
        }
        fit.insert("wave_packet".into(), wave_packet_block(&config.experiment, wp));
    }
    if let Some(cal) = &result.prep_swap {
        fit.insert("prep_swap".into(), json!(cal));
    }
    Ok(result)
}

fn max_column_sum(result: &ExperimentResult) -> f64 {
    (0..result.map.times.len()).map(|t| result.map.column(t).iter().sum::<f64>()).fold(0.0, f64::max)
}

fn rabi(config: &ResolvedConfig, out: &mut OutputDir) -> CliResult<Outcome> {
    check_prep(config, true)?;
    let cfg = &config.experiment;
    let Preparation::SingleSite { site } = cfg.prep else { unreachable!() };
    let cal = calibrate_swap(&cfg.lattice, &cfg.coupler, site, cfg.swap_model)?;
    let n = (cfg.total_time / cfg.readout.dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * cfg.readout.dt).collect();
    let trace = swap_trace(&cfg.lattice, &cfg.coupler, site, cfg.swap_model, &times)?;
    let rows: Vec<Vec<String>> =
        times.iter().zip(&trace).map(|(t, (p1, pm))| vec![num(*t), site.to_string(), num(*pm), num(*p1)]).collect();
    out.table("population_csv", "populations.csv", &["t_us", "mode", "population", "p1_readout"], &rows)?;
    if config.svg {
        let svg = heatmap("vacuum Rabi swap", "time (μs)", "qubit / mode", (2, times.len()), |r, c| {
            if r == 0 {
                trace[c].0
            } else {
                trace[c].1
            }
        });
        out.svg("populations.svg", svg)?;
    }
    let expected = 1.0 / (4.0 * cfg.coupler.kappa());
    out.json(
        "fit_json",
        "fit.json",
        &json!({
            "site": site,
            "kappa_MHz": cfg.coupler.kappa(),
            "swap_duration_us": cal.duration,
            "quarter_period_us": expected,
            "relative_offset": (cal.duration - expected) / expected,
            "mode_population": cal.mode_population,
            "residual_p1": cal.residual_p1,
        }),
    )?;
    Ok(Outcome { metric: Some(("swap_duration_us", cal.duration)), errors: vec![] })
}

fn walk(config: &ResolvedConfig, out: &mut OutputDir) -> CliResult<Outcome> {
    check_program(config, &["single_tone", "double_tone"])?;
    let mut fit = serde_json::Map::new();
    let result = run_and_write(config, out, &mut fit)?;
    let spread = result.map.spread_series()?;
    let com = result.map.center_of_mass_series()?;
    fit.insert("max_population_sum".into(), json!(max_column_sum(&result)));
    fit.insert("final_spread_sites".into(), json!(spread.last()));
    fit.insert("final_center_of_mass".into(), json!(com.last()));
    out.json("fit_json", "fit.json", &fit)?;
    Ok(Outcome { metric: Some(("final_spread_sites", *spread.last().unwrap_or(&0.0))), errors: vec![] })
}

fn bloch(config: &ResolvedConfig, out: &mut OutputDir) -> CliResult<Outcome> {
    check_program(config, &["single_tone"])?;
    let mut fit = serde_json::Map::new();
    let result = run_and_write(config, out, &mut fit)?;
    let detuning = config.experiment.drive.initial_detuning();
    // a single site breathes symmetrically, a packet moves as a whole
    let (observable, series) = match config.experiment.prep {
        Preparation::SingleSite { .. } => ("spread", result.map.spread_series()?),
        Preparation::WavePacket => ("center_of_mass", result.map.center_of_mass_series()?),
    };
    fit.insert("observable".into(), json!(observable));
    fit.insert("detuning_MHz".into(), json!(detuning));
    let mut errors = Vec::new();
    let mut metric = None;
    if detuning == 0.0 {
        errors.push("no tilt: period diverges".to_string());
        fit.insert("expected_period_us".into(), Value::Null);
    } else {
        fit.insert("expected_period_us".into(), json!(1.0 / detuning.abs()));
    }
    if errors.is_empty() {
        match bloch_period_estimate(&result.map.times, &series) {
            Ok(period) => metric = Some(("period_us", period)),
            Err(e) => errors.push(format!("period estimate failed: {e}")),
        }
    }
    fit.insert("period_us".into(), json!(metric.map(|m| m.1)));
    fit.insert("error".into(), json!(errors.first()));
    out.json("fit_json", "fit.json", &fit)?;
    Ok(Outcome { metric, errors })
}

/// RMS distance between the measured ridge and the infinite-chain band.
fn ridge_rms(config: &ExperimentConfig, ridge: &[(f64, f64)]) -> CliResult<f64> {
    let d = config.drive.initial_detuning();
    let tones = config.drive.tones_at(config.lattice.fsr(), d)?;
    let sum: f64 = ridge.iter().map(|(k, w)| (w - dispersion_analytic(&tones, *k)).powi(2)).sum();
    Ok((sum / ridge.len() as f64).sqrt())
}

fn write_band(config: &ResolvedConfig, out: &mut OutputDir, fit: &mut serde_json::Map<String, Value>) -> CliResult<()> {
    check_prep(config, true)?;
    let m = measure_band(&config.experiment)?;
    out.band("band.csv", &m.band)?;
    if config.svg {
        let b = &m.band;
        let svg =
            heatmap("band map", "k", "ω (MHz)", (b.omega_grid.len(), b.k_grid.len()), |r, c| b.intensity[(c, r)]);
        out.svg("band.svg", svg)?;
    }
    fit.insert("omega_step_MHz".into(), json!(m.band.omega_step()));
    fit.insert("ridge_rms_MHz".into(), json!(ridge_rms(&config.experiment, &m.band.ridge)?));
    fit.insert("ridge_asymmetry_MHz".into(), json!(m.band.ridge_asymmetry()));
    Ok(())
}

fn band(config: &ResolvedConfig, out: &mut OutputDir) -> CliResult<Outcome> {
    check_program(config, &["single_tone", "double_tone"])?;
    let mut fit = serde_json::Map::new();
    write_band(config, out, &mut fit)?;
    let metric = fit["ridge_rms_MHz"].as_f64().map(|v| ("ridge_rms_MHz", v));
    out.json("fit_json", "fit.json", &fit)?;
    Ok(Outcome { metric, errors: vec![] })
}

fn flux(config: &ResolvedConfig, out: &mut OutputDir) -> CliResult<Outcome> {
    check_program(config, &["double_tone"])?;
    check_prep(config, true)?;
    let DriveProgram::DoubleTone { phi1, phi2, .. } = config.experiment.drive else { unreachable!() };
    let mut fit = serde_json::Map::new();
    let result = run_and_write(config, out, &mut fit)?;
    let asym = asymmetry_metric(&result.map.modes, &result.map.p)?;
    let phi = effective_flux(phi1, phi2);
    fit.insert("flux_rad".into(), json!(phi.raw));
    fit.insert("flux_canonical_rad".into(), json!(phi.canonical));
    fit.insert("asymmetry".into(), json!(asym));
    write_band(config, out, &mut fit)?;
    out.json("fit_json", "fit.json", &fit)?;
    Ok(Outcome { metric: Some(("asymmetry", asym)), errors: vec![] })
}

fn unidir(config: &ResolvedConfig, out: &mut OutputDir) -> CliResult<Outcome> {
    check_program(config, &["reversal", "single_tone"])?;
    let mut fit = serde_json::Map::new();
    let result = run_and_write(config, out, &mut fit)?;
    let com = result.map.center_of_mass_series()?;
    let times = &result.map.times;
    let boundaries: Vec<f64> = match config.experiment.drive {
        DriveProgram::Reversal { half_period, .. } => {
            let n = (config.experiment.total_time / half_period + 1e-9).floor() as usize;
            (0..=n).map(|i| i as f64 * half_period).collect()
        }
        _ => vec![0.0, config.experiment.total_time],
    };
    let at = |t: f64| {
        let i = times.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs())).map(|(i, _)| i);
        com[i.unwrap_or(0)]
    };
    let displacement: Vec<f64> = boundaries.iter().map(|&t| at(t) - com[0]).collect();
    let drift = *displacement.last().unwrap_or(&0.0);
    let monotone = displacement.windows(2).all(|w| (w[1] - w[0]) * drift.signum() >= 0.0);
    fit.insert("boundary_times_us".into(), json!(boundaries));
    fit.insert("displacement_sites".into(), json!(displacement));
    fit.insert("drift_sites".into(), json!(drift));
    fit.insert("monotone".into(), json!(monotone));
    out.json("fit_json", "fit.json", &fit)?;
    Ok(Outcome { metric: Some(("drift_sites", drift)), errors: vec![] })
}

#[derive(Debug, Clone, Serialize)]
struct SweepPoint {
    index: usize,
    value: f64,
    dir: String,
    metric: Option<(&'static str, f64)>,
    error: Option<String>,
    outputs: Vec<OutputEntry>,
}

fn run_sweep(config: &ResolvedConfig, out_dir: &Path, jobs: usize) -> CliResult<RunManifest> {
    let spec = config.sweep.as_ref().ok_or_else(|| CliError::Usage("sweep needs a [sweep] section".into()))?;
    let points: Vec<ResolvedConfig> = spec
        .values
        .iter()
        .map(|&v| config.with_override(spec.experiment, &spec.parameter, v))
        .collect::<CliResult<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    // each point writes only inside its own directory
    let results: Vec<CliResult<SweepPoint>> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, point)| {
                let dir = format!("point_{i:03}");
                let value = spec.values[i];
                match run_single(point, &out_dir.join(&dir)) {
                    Ok((manifest, outcome)) => Ok(SweepPoint {
                        index: i,
                        value,
                        dir,
                        metric: outcome.metric,
                        error: outcome.errors.first().cloned(),
                        outputs: manifest.outputs,
                    }),
                    Err(CliError::Numerical(e)) => {
                        Ok(SweepPoint { index: i, value, dir, metric: None, error: Some(e), outputs: vec![] })
                    }
                    Err(e) => Err(e),
                }
            })
            .collect()
    });
    let points: Vec<SweepPoint> = results.into_iter().collect::<CliResult<_>>()?;

    let mut out = OutputDir::create(out_dir)?;
    for p in &points {
        for o in &p.outputs {
            out.written.push(OutputEntry { kind: o.kind.clone(), path: format!("{}/{}", p.dir, o.path) });
        }
    }
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.index.to_string(),
                num(p.value),
                p.dir.clone(),
                p.metric.map(|m| m.0.to_string()).unwrap_or_default(),
                p.metric.map(|m| num(m.1)).unwrap_or_default(),
                p.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    out.table("sweep_csv", "sweep.csv", &["point", &spec.parameter, "dir", "metric", "value", "error"], &rows)?;
    let errors = points.iter().filter_map(|p| p.error.as_ref().map(|e| format!("{}: {e}", p.dir))).collect();
    write_manifest(config, &mut out, errors)
}
