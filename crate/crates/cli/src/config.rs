//! TOML experiment configs resolved against per-command presets.
//!
//! Every key that ends up in the run is recorded in [`ResolvedConfig::values`];
//! keys that were filled from a preset are also listed in
//! [`ResolvedConfig::defaults`]. The digest is a SHA-256 over the canonical
//! (key-sorted) JSON of `values`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use synfreq::evolution::DecoherenceParams;
use synfreq::model::{CouplingScaling, ModeLattice, QubitCoupler};
use synfreq::protocols::{
    DriveProgram, EvolutionFrame, ExperimentConfig, Preparation, ReadoutGrid, SwapModel, DEFAULT_EMISSION_CAP,
    DEFAULT_G1, DEFAULT_G2, WAVE_PACKET_KAPPA, WEAK_KAPPA,
};
use toml::Table;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Rabi,
    Walk,
    Bloch,
    Band,
    Flux,
    Unidir,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 7] =
        [Command::Rabi, Command::Walk, Command::Bloch, Command::Band, Command::Flux, Command::Unidir, Command::Sweep];

    pub fn name(self) -> &'static str {
        match self {
            Command::Rabi => "rabi",
            Command::Walk => "walk",
            Command::Bloch => "bloch",
            Command::Band => "band",
            Command::Flux => "flux",
            Command::Unidir => "unidir",
            Command::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            CliError::Usage(format!("unknown experiment '{s}'{}", suggest(s, Command::ALL.map(|c| c.name()))))
        })
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("lattice", &["fsr", "omega0", "n_left", "n_right", "base_abs_index"]),
    ("coupler", &["omega_q", "kappa", "readout_kappa", "scaling", "swap_model"]),
    ("prep", &["kind", "site", "emission_cap"]),
    (
        "drive",
        &[
            "program",
            "order",
            "detuning",
            "freq",
            "strength",
            "phase",
            "phase_pi",
            "strength2",
            "phase2",
            "phase2_pi",
            "half_period",
        ],
    ),
    ("schedule", &["total_time", "dt", "modes", "frame"]),
    ("decoherence", &["enabled", "t1_mode", "t2_mode", "t1_qubit"]),
    ("output", &["svg", "shots", "seed"]),
    ("sweep", &["experiment", "parameter", "values"]),
];

fn suggest<'a>(name: &str, candidates: impl IntoIterator<Item = &'a str>) -> String {
    candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(name, c), c))
        .min()
        .map(|(_, c)| format!(" (did you mean '{c}'?)"))
        .unwrap_or_default()
}

fn check_keys(table: &Table) -> CliResult<()> {
    for (section, value) in table {
        let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| s == section) else {
            return Err(CliError::Config(format!(
                "unknown section [{section}]{}",
                suggest(section, SCHEMA.iter().map(|(s, _)| *s))
            )));
        };
        let Some(inner) = value.as_table() else {
            return Err(CliError::Config(format!("[{section}] must be a table")));
        };
        for key in inner.keys() {
            if !keys.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown key '{section}.{key}'{}",
                    suggest(key, keys.iter().copied())
                )));
            }
        }
    }
    Ok(())
}

/// Run parameters for sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub experiment: Command,
    /// Dotted key such as `drive.detuning`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub command: Command,
    pub experiment: ExperimentConfig,
    pub svg: bool,
    pub sweep: Option<SweepSpec>,
    /// Every resolved key, dotted.
    pub values: BTreeMap<String, Value>,
    /// Keys whose value came from a preset rather than the file.
    pub defaults: Vec<String>,
    source: Table,
}

impl ResolvedConfig {
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&self.values).expect("config values are plain JSON");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Re-resolve with one dotted numeric key overridden, for sweep points.
    pub fn with_override(&self, command: Command, key: &str, value: f64) -> CliResult<ResolvedConfig> {
        let mut table = self.source.clone();
        table.remove("sweep");
        set_dotted(&mut table, key, toml::Value::Float(value))?;
        resolve(table, command)
    }
}

fn set_dotted(table: &mut Table, key: &str, value: toml::Value) -> CliResult<()> {
    let (section, name) =
        key.split_once('.').ok_or_else(|| CliError::Config(format!("'{key}' is not a section.key name")))?;
    let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(Table::new()));
    let inner = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("[{section}] must be a table")))?;
    inner.insert(name.to_string(), value);
    check_keys(table)
}

/// Flags that override config values when given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub svg: bool,
    pub seed: Option<u64>,
    pub shots: Option<u32>,
}

pub fn parse_config(path: &Path, command: Command, overrides: &Overrides) -> CliResult<ResolvedConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, command, overrides)
}

pub fn parse_config_str(text: &str, command: Command, overrides: &Overrides) -> CliResult<ResolvedConfig> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    check_keys(&table)?;
    if overrides.svg {
        set_dotted(&mut table, "output.svg", toml::Value::Boolean(true))?;
    }
    if let Some(seed) = overrides.seed {
        set_dotted(&mut table, "output.seed", toml::Value::Integer(seed as i64))?;
    }
    if let Some(shots) = overrides.shots {
        set_dotted(&mut table, "output.shots", toml::Value::Integer(shots as i64))?;
    }
    resolve(table, command)
}

/// Per-command starting points; anything here can be overridden by the file.
struct Preset {
    prep_wave_packet: bool,
    program: &'static str,
    order: u32,
    detuning: f64,
    phase2: f64,
    total_time: f64,
    dt: f64,
    n_side: usize,
}

impl Preset {
    fn for_command(command: Command) -> Preset {
        let base = Preset {
            prep_wave_packet: false,
            program: "single_tone",
            order: 1,
            detuning: 0.0,
            phase2: PI,
            total_time: 2.0,
            dt: 0.05,
            n_side: 16,
        };
        match command {
            Command::Rabi => Preset { total_time: 1.5, dt: 0.01, ..base },
            Command::Walk | Command::Sweep => base,
            Command::Bloch => Preset { detuning: -0.2, total_time: 15.0, ..base },
            Command::Band => Preset { total_time: 10.0, ..base },
            Command::Flux => Preset { program: "double_tone", phase2: PI / 2.0, total_time: 5.0, ..base },
            Command::Unidir => Preset {
                prep_wave_packet: true,
                program: "reversal",
                detuning: -0.2,
                total_time: 10.0,
                n_side: 45,
                ..base
            },
        }
    }
}

struct Resolver {
    table: Table,
    values: BTreeMap<String, Value>,
    defaults: Vec<String>,
}

impl Resolver {
    fn raw(&self, section: &str, key: &str) -> Option<&toml::Value> {
        self.table.get(section).and_then(|s| s.as_table()).and_then(|s| s.get(key))
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.raw(section, key).is_some()
    }

    fn record(&mut self, section: &str, key: &str, value: Value, defaulted: bool) {
        let name = format!("{section}.{key}");
        if defaulted {
            self.defaults.push(format!("{name}={value}"));
        }
        self.values.insert(name, value);
    }

    fn type_error(section: &str, key: &str, want: &str) -> CliError {
        CliError::Config(format!("'{section}.{key}' must be {want}"))
    }

    fn f64(&mut self, section: &str, key: &str, default: f64) -> CliResult<f64> {
        let v = match self.raw(section, key) {
            None => {
                self.record(section, key, json!(default), true);
                return Ok(default);
            }
            Some(toml::Value::Float(x)) => *x,
            Some(toml::Value::Integer(i)) => *i as f64,
            Some(_) => return Err(Self::type_error(section, key, "a number")),
        };
        if !v.is_finite() {
            return Err(CliError::Config(format!("'{section}.{key}' must be finite")));
        }
        self.record(section, key, json!(v), false);
        Ok(v)
    }

    fn opt_f64(&mut self, section: &str, key: &str) -> CliResult<Option<f64>> {
        if self.has(section, key) {
            self.f64(section, key, 0.0).map(Some)
        } else {
            Ok(None)
        }
    }

    fn i64(&mut self, section: &str, key: &str, default: i64) -> CliResult<i64> {
        let v = match self.raw(section, key) {
            None => {
                self.record(section, key, json!(default), true);
                return Ok(default);
            }
            Some(toml::Value::Integer(i)) => *i,
            Some(_) => return Err(Self::type_error(section, key, "an integer")),
        };
        self.record(section, key, json!(v), false);
        Ok(v)
    }

    fn unsigned(&mut self, section: &str, key: &str, default: u64) -> CliResult<u64> {
        let v = self.i64(section, key, default as i64)?;
        u64::try_from(v).map_err(|_| CliError::Config(format!("'{section}.{key}' must be >= 0, got {v}")))
    }

    fn bool(&mut self, section: &str, key: &str, default: bool) -> CliResult<bool> {
        let v = match self.raw(section, key) {
            None => {
                self.record(section, key, json!(default), true);
                return Ok(default);
            }
            Some(toml::Value::Boolean(b)) => *b,
            Some(_) => return Err(Self::type_error(section, key, "true or false")),
        };
        self.record(section, key, json!(v), false);
        Ok(v)
    }

    fn choice(&mut self, section: &str, key: &str, default: &str, allowed: &[&str]) -> CliResult<String> {
        let v = match self.raw(section, key) {
            None => {
                self.record(section, key, json!(default), true);
                return Ok(default.to_string());
            }
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(Self::type_error(section, key, "a string")),
        };
        if !allowed.contains(&v.as_str()) {
            return Err(CliError::Config(format!(
                "'{section}.{key}' = '{v}' is not one of {allowed:?}{}",
                suggest(&v, allowed.iter().copied())
            )));
        }
        self.record(section, key, json!(v), false);
        Ok(v)
    }

    fn list<T>(
        &mut self,
        section: &str,
        key: &str,
        want: &str,
        item: impl Fn(&toml::Value) -> Option<T>,
    ) -> CliResult<Option<Vec<T>>>
    where
        T: serde::Serialize,
    {
        let Some(raw) = self.raw(section, key) else {
            return Ok(None);
        };
        let items = raw
            .as_array()
            .and_then(|a| a.iter().map(&item).collect::<Option<Vec<T>>>())
            .ok_or_else(|| Self::type_error(section, key, want))?;
        self.record(section, key, json!(items), false);
        Ok(Some(items))
    }

    /// Angle given either in radians (`name`) or in units of π (`name_pi`).
    fn phase(&mut self, name: &str, default: f64) -> CliResult<f64> {
        let pi_key = format!("{name}_pi");
        match (self.has("drive", name), self.has("drive", &pi_key)) {
            (true, true) => Err(CliError::Config(format!("give either drive.{name} or drive.{pi_key}, not both"))),
            (false, true) => Ok(self.f64("drive", &pi_key, 0.0)? * PI),
            _ => self.f64("drive", name, default),
        }
    }
}

fn resolve(table: Table, command: Command) -> CliResult<ResolvedConfig> {
    let mut r = Resolver { table, values: BTreeMap::new(), defaults: Vec::new() };

    let sweep = if command == Command::Sweep {
        let experiment: Command =
            r.choice("sweep", "experiment", "bloch", &["rabi", "walk", "bloch", "band", "flux", "unidir"])?.parse()?;
        let parameter = match r.raw("sweep", "parameter") {
            None => "drive.detuning".to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(Resolver::type_error("sweep", "parameter", "a string")),
        };
        r.record("sweep", "parameter", json!(parameter), !r.has("sweep", "parameter"));
        let values = r
            .list("sweep", "values", "a list of numbers", |v| {
                v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
            })?
            .ok_or_else(|| CliError::Config("sweep needs 'sweep.values'".into()))?;
        if values.is_empty() {
            return Err(CliError::Config("'sweep.values' is empty".into()));
        }
        Some(SweepSpec { experiment, parameter, values })
    } else {
        if r.table.contains_key("sweep") {
            return Err(CliError::Usage(format!("[sweep] section given to the '{command}' experiment")));
        }
        None
    };
    let preset = Preset::for_command(sweep.as_ref().map_or(command, |s| s.experiment));

    let fsr = r.f64("lattice", "fsr", 7.33)?;
    let omega0 = r.f64("lattice", "omega0", 4320.0)?;
    let n_left = r.unsigned("lattice", "n_left", preset.n_side as u64)? as usize;
    let n_right = r.unsigned("lattice", "n_right", preset.n_side as u64)? as usize;
    let base = r.i64("lattice", "base_abs_index", 592)?;
    let lattice = ModeLattice::new(base, n_left, n_right, omega0, fsr)?;

    let kind = r.choice(
        "prep",
        "kind",
        if preset.prep_wave_packet { "wave_packet" } else { "single_site" },
        &["single_site", "wave_packet"],
    )?;
    let prep = if kind == "wave_packet" {
        Preparation::WavePacket
    } else {
        Preparation::SingleSite { site: r.i64("prep", "site", 0)? }
    };
    let emission_cap = r.f64("prep", "emission_cap", DEFAULT_EMISSION_CAP)?;

    let default_kappa = if kind == "wave_packet" { WAVE_PACKET_KAPPA } else { WEAK_KAPPA };
    let omega_q = r.f64("coupler", "omega_q", omega0)?;
    let kappa = r.f64("coupler", "kappa", default_kappa)?;
    let readout_kappa = r.f64("coupler", "readout_kappa", WEAK_KAPPA)?;
    let scaling = match r.choice("coupler", "scaling", "flat", &["flat", "sqrt_omega"])?.as_str() {
        "sqrt_omega" => CouplingScaling::SqrtOmega,
        _ => CouplingScaling::Flat,
    };
    let swap_model = match r.choice("coupler", "swap_model", "dispersive", &["dispersive", "multimode"])?.as_str() {
        "multimode" => SwapModel::Multimode,
        _ => SwapModel::Dispersive,
    };
    let coupler = QubitCoupler::new(omega_q, kappa, scaling)?;

    let program = r.choice("drive", "program", preset.program, &["single_tone", "double_tone", "reversal"])?;
    let order = if program == "double_tone" { 1 } else { r.unsigned("drive", "order", preset.order as u64)? as u32 };
    if order == 0 {
        return Err(CliError::Config("'drive.order' must be >= 1".into()));
    }
    let detuning = match (r.has("drive", "detuning"), r.opt_f64("drive", "freq")?) {
        (true, Some(_)) => return Err(CliError::Config("give either drive.detuning or drive.freq, not both".into())),
        (false, Some(freq)) => {
            // the nearest-neighbour tone frequency fixes Δ = freq / l − fsr
            let d = freq / order as f64 - fsr;
            r.record("drive", "detuning", json!(d), false);
            d
        }
        _ => r.f64("drive", "detuning", preset.detuning)?,
    };
    let strength = r.f64("drive", "strength", DEFAULT_G1)?;
    let phase = r.phase("phase", PI)?;
    let drive = match program.as_str() {
        "double_tone" => DriveProgram::DoubleTone {
            detuning,
            g1: strength,
            phi1: phase,
            g2: r.f64("drive", "strength2", DEFAULT_G2)?,
            phi2: r.phase("phase2", preset.phase2)?,
        },
        "reversal" => DriveProgram::Reversal {
            order,
            detuning,
            strength,
            phase,
            half_period: r.f64("drive", "half_period", 2.5)?,
        },
        _ => DriveProgram::SingleTone { order, detuning, strength, phase },
    };
    for key in ["strength2", "phase2", "phase2_pi"] {
        if program != "double_tone" && r.has("drive", key) {
            return Err(CliError::Config(format!("'drive.{key}' only applies to the double_tone program")));
        }
    }
    if program != "reversal" && r.has("drive", "half_period") {
        return Err(CliError::Config("'drive.half_period' only applies to the reversal program".into()));
    }

    let total_time = r.f64("schedule", "total_time", preset.total_time)?;
    let dt = r.f64("schedule", "dt", preset.dt)?;
    let modes = r.list("schedule", "modes", "a list of integers", |v| v.as_integer())?.unwrap_or_default();
    if modes.is_empty() {
        r.record("schedule", "modes", json!("all"), !r.has("schedule", "modes"));
    }
    let frame = match r.choice("schedule", "frame", "rwa", &["rwa", "lab"])?.as_str() {
        "lab" => EvolutionFrame::Lab,
        _ => EvolutionFrame::Rwa,
    };

    let deco = DecoherenceParams {
        enabled: r.bool("decoherence", "enabled", false)?,
        t1_mode: r.f64("decoherence", "t1_mode", DecoherenceParams::CABLE_T1)?,
        t2_mode: r.f64("decoherence", "t2_mode", DecoherenceParams::CABLE_T2)?,
        t1_qubit: r.f64("decoherence", "t1_qubit", DecoherenceParams::DEFAULT_QUBIT_T1)?,
    };

    let svg = r.bool("output", "svg", false)?;
    let shots = u32::try_from(r.unsigned("output", "shots", 0)?)
        .map_err(|_| CliError::Config("'output.shots' is too large".into()))?;
    let seed = r.unsigned("output", "seed", 0)?;

    let experiment = ExperimentConfig {
        lattice,
        coupler,
        readout_kappa,
        prep,
        drive,
        total_time,
        readout: ReadoutGrid { dt, modes },
        deco,
        frame,
        swap_model,
        emission_cap,
        shots,
        seed,
    };
    experiment.validate()?;
    Ok(ResolvedConfig { command, experiment, svg, sweep, values: r.values, defaults: r.defaults, source: r.table })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, command: Command) -> CliResult<ResolvedConfig> {
        parse_config_str(text, command, &Overrides::default())
    }

    #[test]
    fn minimal_config_resolves_with_recorded_defaults() {
        let cfg = parse(
            "[lattice]\nfsr = 7.33\n[prep]\nkind = \"single_site\"\nsite = 0\n[drive]\nprogram = \"single_tone\"\norder = 1\ndetuning = -0.2\nstrength = 0.5\nphase_pi = 1.0\n",
            Command::Bloch,
        )
        .unwrap();
        assert_eq!(
            cfg.experiment.drive,
            DriveProgram::SingleTone { order: 1, detuning: -0.2, strength: 0.5, phase: PI }
        );
        assert!(cfg.defaults.iter().any(|d| d.starts_with("lattice.omega0=")));
        assert!(cfg.defaults.iter().any(|d| d.starts_with("coupler.kappa=0.36")));
        assert!(!cfg.defaults.iter().any(|d| d.starts_with("lattice.fsr=")));
    }

    #[test]
    fn negative_fsr_is_an_invariant_error() {
        let err = parse("[lattice]\nfsr = -1\n", Command::Walk).unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn tone_frequency_resolves_detuning() {
        let cfg = parse("[drive]\nfreq = 7.13\norder = 1\n", Command::Bloch).unwrap();
        assert!((cfg.experiment.drive.initial_detuning() + 0.2).abs() < 1e-12);
        assert!(parse("[drive]\nfreq = 7.13\ndetuning = 0.1\n", Command::Bloch).is_err());
    }

    #[test]
    fn unknown_key_names_nearest() {
        let err = parse("[drive]\ndetunning = 0.1\n", Command::Walk).unwrap_err().to_string();
        assert!(err.contains("drive.detunning") && err.contains("'detuning'"), "{err}");
        let err = parse("[lattise]\nfsr = 7.33\n", Command::Walk).unwrap_err().to_string();
        assert!(err.contains("'lattice'"), "{err}");
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = parse("[drive]\ndetuning = -0.2\n", Command::Bloch).unwrap();
        let b = parse("[drive]\ndetuning = -0.2\n", Command::Bloch).unwrap();
        let c = parse("[drive]\ndetuning = -0.3\n", Command::Bloch).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        // spelling a default out does not change the resolved config
        let d = parse("[drive]\ndetuning = -0.2\n[lattice]\nfsr = 7.33\n", Command::Bloch).unwrap();
        assert_eq!(a.digest(), d.digest());
    }

    #[test]
    fn overrides_and_sweep() {
        let o = Overrides { svg: true, seed: Some(9), shots: Some(100) };
        let cfg = parse_config_str("", Command::Walk, &o).unwrap();
        assert!(cfg.svg);
        assert_eq!((cfg.experiment.seed, cfg.experiment.shots), (9, 100));

        let cfg = parse("[sweep]\nvalues = [-0.3, 0.3]\n", Command::Sweep).unwrap();
        let spec = cfg.sweep.clone().unwrap();
        assert_eq!(spec.experiment, Command::Bloch);
        let point = cfg.with_override(spec.experiment, &spec.parameter, 0.3).unwrap();
        assert_eq!(point.experiment.drive.initial_detuning(), 0.3);
        assert!(parse("[sweep]\nvalues = [1.0]\n", Command::Walk).is_err());
        assert!(parse("[sweep]\nexperiment = \"bloch\"\n", Command::Sweep).is_err());
    }

    #[test]
    fn program_specific_keys_are_checked() {
        assert!(parse("[drive]\nstrength2 = 0.1\n", Command::Walk).is_err());
        assert!(parse("[drive]\nphase = 1.0\nphase_pi = 1.0\n", Command::Walk).is_err());
        let cfg = parse("[drive]\nprogram = \"double_tone\"\nphase2_pi = 0.5\n", Command::Flux).unwrap();
        assert!(
            matches!(cfg.experiment.drive, DriveProgram::DoubleTone { phi2, .. } if (phi2 - PI / 2.0).abs() < 1e-15)
        );
        assert!(parse("[schedule]\nmodes = [40]\n", Command::Walk).is_err());
    }
}
