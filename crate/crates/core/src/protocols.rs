//! Experiment recipes: photon preparation through the qubit, modulation
//! programs, reset, and mode-resolved readout.
//!
//! The photon is prepared in the lab frame (diagonal measured from mode 0).
//! The rotating frame of the modulation is anchored at the instant the drive
//! switches on, which is the end of preparation, so prepared amplitudes carry
//! over unchanged and drive phases are referenced to that instant.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{band_from_wavefunction, center_of_mass, spread, BandMap};
use crate::evolution::{reset_qubit, run_schedule, DecoherenceParams, Propagator, Schedule, Segment};
use crate::model::{build_lab_hamiltonian, DriveTone, ModeLattice, QubitCoupler};
use crate::{Error, Result, SingleExcitationState, C64};

/// Weak coupler setting that addresses one mode at a time.
pub const WEAK_KAPPA: f64 = 0.36;
/// Strong coupler setting for multimode wave-packet emission.
pub const WAVE_PACKET_KAPPA: f64 = 4.0;
pub const DEFAULT_EMISSION_CAP: f64 = 3.0;
/// Emission stops once the qubit population drops below this.
pub const EMISSION_STOP_P1: f64 = 0.01;
/// Residual qubit population at the cap above which a warning is attached.
pub const EMISSION_WARN_P1: f64 = 0.05;
pub const MIN_SWAP_FIDELITY: f64 = 0.95;
pub const DEFAULT_G1: f64 = 0.5;
pub const DEFAULT_G2: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preparation {
    SingleSite { site: i64 },
    WavePacket,
}

/// Modulation applied after preparation. Frequencies follow
/// `Ω_l = l (fsr + Δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "program", rename_all = "snake_case")]
pub enum DriveProgram {
    SingleTone {
        order: u32,
        detuning: f64,
        strength: f64,
        phase: f64,
    },
    /// Nearest and next-nearest neighbour tones at `Ω₁` and `2Ω₁`.
    DoubleTone {
        detuning: f64,
        g1: f64,
        phi1: f64,
        g2: f64,
        phi2: f64,
    },
    /// Single tone whose detuning flips sign every `half_period`, keeping the
    /// drive phase continuous.
    Reversal {
        order: u32,
        detuning: f64,
        strength: f64,
        phase: f64,
        half_period: f64,
    },
}

impl DriveProgram {
    /// Detuning at the start of the program.
    pub fn initial_detuning(&self) -> f64 {
        match *self {
            DriveProgram::SingleTone { detuning, .. }
            | DriveProgram::DoubleTone { detuning, .. }
            | DriveProgram::Reversal { detuning, .. } => detuning,
        }
    }

    /// Tones active while the detuning is `detuning`.
    pub fn tones_at(&self, fsr: f64, detuning: f64) -> Result<Vec<DriveTone>> {
        match *self {
            DriveProgram::SingleTone { order, strength, phase, .. }
            | DriveProgram::Reversal { order, strength, phase, .. } => {
                Ok(vec![DriveTone::resonant(order, fsr, detuning, strength, phase)?])
            }
            DriveProgram::DoubleTone { g1, phi1, g2, phi2, .. } => Ok(vec![
                DriveTone::resonant(1, fsr, detuning, g1, phi1)?,
                DriveTone::resonant(2, fsr, detuning, g2, phi2)?,
            ]),
        }
    }

    /// Piecewise-constant pieces `(duration, detuning)` covering `total`.
    pub fn pieces(&self, total: f64) -> Result<Vec<(f64, f64)>> {
        match *self {
            DriveProgram::Reversal { detuning, half_period, .. } => {
                if !(half_period.is_finite() && half_period > 0.0) {
                    return Err(Error::Config(format!("reversal half_period must be > 0, got {half_period}")));
                }
                let mut out = Vec::new();
                let mut t = 0.0;
                let mut sign = 1.0;
                while t < total - 1e-12 {
                    let d = half_period.min(total - t);
                    out.push((d, sign * detuning));
                    t += d;
                    sign = -sign;
                }
                Ok(out)
            }
            _ => Ok(vec![(total, self.initial_detuning())]),
        }
    }
}

/// Which generator drives the modulation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionFrame {
    /// Static rotating-frame lattice (fast, exact within the RWA).
    #[default]
    Rwa,
    /// Full time-dependent lab-frame modulation.
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutGrid {
    /// Spacing of readout times in μs.
    pub dt: f64,
    /// Modes to read out; empty means every mode.
    pub modes: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub lattice: ModeLattice,
    /// Coupler used for preparation. For single-site preparation the qubit
    /// is retuned onto the target mode.
    pub coupler: QubitCoupler,
    /// Weak coupling used by the readout swap.
    pub readout_kappa: f64,
    pub prep: Preparation,
    pub drive: DriveProgram,
    pub total_time: f64,
    pub readout: ReadoutGrid,
    pub deco: DecoherenceParams,
    pub frame: EvolutionFrame,
    /// Spectator treatment for single-site preparation and readout swaps.
    pub swap_model: SwapModel,
    pub emission_cap: f64,
    /// Projective shots per readout point; 0 reports the amplitude-level P₁.
    pub shots: u32,
    pub seed: u64,
}

impl ExperimentConfig {
    /// 33-mode lattice at 7.33 MHz spacing with the qubit on mode 0.
    pub fn standard(prep: Preparation, drive: DriveProgram, total_time: f64) -> Result<Self> {
        let lattice = ModeLattice::symmetric(16, 4320.0, 7.33)?;
        let kappa = match prep {
            Preparation::SingleSite { .. } => WEAK_KAPPA,
            Preparation::WavePacket => WAVE_PACKET_KAPPA,
        };
        let coupler = QubitCoupler::new(lattice.omega0(), kappa, Default::default())?;
        let cfg = Self {
            lattice,
            coupler,
            readout_kappa: WEAK_KAPPA,
            prep,
            drive,
            total_time,
            readout: ReadoutGrid { dt: 0.05, modes: Vec::new() },
            deco: DecoherenceParams::disabled(),
            frame: EvolutionFrame::Rwa,
            swap_model: SwapModel::Dispersive,
            emission_cap: DEFAULT_EMISSION_CAP,
            shots: 0,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(Error::Config(format!("total_time must be > 0, got {}", self.total_time)));
        }
        if !(self.readout.dt.is_finite() && self.readout.dt > 0.0) {
            return Err(Error::Config(format!("readout dt must be > 0, got {}", self.readout.dt)));
        }
        if !(self.readout_kappa.is_finite() && self.readout_kappa > 0.0) {
            return Err(Error::Config(format!("readout_kappa must be > 0, got {}", self.readout_kappa)));
        }
        if !(self.emission_cap.is_finite() && self.emission_cap > 0.0) {
            return Err(Error::Config(format!("emission_cap must be > 0, got {}", self.emission_cap)));
        }
        for &m in &self.readout.modes {
            if !self.lattice.contains(m) {
                return Err(Error::Config(format!(
                    "readout mode {m} outside lattice [{}, {}]",
                    self.lattice.min_site(),
                    self.lattice.max_site()
                )));
            }
        }
        if let Preparation::SingleSite { site } = self.prep {
            if !self.lattice.contains(site) {
                return Err(Error::Config(format!("preparation site {site} outside lattice")));
            }
        }
        self.deco.validate()?;
        self.drive.pieces(self.total_time)?;
        self.drive.tones_at(self.lattice.fsr(), self.drive.initial_detuning())?;
        Ok(())
    }

    pub fn readout_modes(&self) -> Vec<i64> {
        if self.readout.modes.is_empty() {
            self.lattice.sites().collect()
        } else {
            self.readout.modes.clone()
        }
    }

    fn readout_coupler(&self) -> Result<QubitCoupler> {
        self.coupler.with_kappa(self.readout_kappa)
    }
}

/// Outcome of the swap-time search for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapCalibration {
    pub site: i64,
    pub duration: f64,
    /// Qubit population left at `duration`.
    pub residual_p1: f64,
    /// Population transferred into the target mode.
    pub mode_population: f64,
}

/// How the weak-coupling swap treats modes other than the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SwapModel {
    /// Spectator modes enter only through their second-order shift of the
    /// qubit, `Σ κ_j² / (ω_q − ω_j)`. This is what a coupler ramp slow
    /// compared with `1/fsr` produces: the off-resonant admixture follows the
    /// coupling back to zero instead of being left behind.
    #[default]
    Dispersive,
    /// Square coupler pulse against every mode. Leaves `~(κ/fsr)²` of
    /// population in the neighbours of the target.
    Multimode,
}

/// Qubit-plus-modes generator with the qubit parked on `site`.
struct JcSystem {
    propagator: Propagator,
    target: usize,
}

impl JcSystem {
    fn new(lattice: &ModeLattice, coupler: &QubitCoupler, site: i64, model: SwapModel) -> Result<Self> {
        let tuned = coupler.tuned_to(lattice.mode_frequency(site)?)?;
        let mut h = build_lab_hamiltonian(lattice, &[], Some(&tuned), 0.0)?;
        let target = lattice.index_of(site)?;
        if model == SwapModel::Dispersive {
            let q = h.matrix[(0, 0)].re;
            let mut shift = 0.0;
            for j in (0..lattice.n_modes()).filter(|&j| j != target) {
                let c = h.matrix[(0, j + 1)];
                shift += c.norm_sqr() / (q - h.matrix[(j + 1, j + 1)].re);
                h.matrix[(0, j + 1)] = C64::new(0.0, 0.0);
                h.matrix[(j + 1, 0)] = C64::new(0.0, 0.0);
            }
            h.matrix[(0, 0)] += shift;
        }
        Ok(Self { propagator: Propagator::new(&h)?, target })
    }

    fn p1(&self, t: f64) -> f64 {
        self.propagator.survival(0, t)
    }

    fn calibrate(&self, lattice: &ModeLattice, kappa: f64) -> Result<SwapCalibration> {
        let site = lattice.site_of(self.target);
        if kappa <= 0.0 {
            return Err(Error::Protocol(format!("coupler kappa is {kappa}; no swap into mode {site} possible")));
        }
        let guess = 1.0 / (4.0 * kappa);
        let (lo, hi) = (0.5 * guess, 1.5 * guess);
        let n_scan = 400;
        let step = (hi - lo) / n_scan as f64;
        let best = (0..=n_scan)
            .map(|i| lo + i as f64 * step)
            .min_by(|a, b| self.p1(*a).total_cmp(&self.p1(*b)))
            .unwrap_or(guess);
        let duration = golden_min(|t| self.p1(t), (best - step).max(0.0), best + step, 1e-12);
        let mut s = SingleExcitationState::qubit_excited(lattice.n_modes());
        self.propagator.evolve(&mut s, duration)?;
        Ok(SwapCalibration {
            site,
            duration,
            residual_p1: s.qubit_population(),
            mode_population: s.c_modes[self.target].norm_sqr(),
        })
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Swap duration for `site` at coupling `kappa`: the first minimum of P₁
/// near `1/(4κ)`.
pub fn calibrate_swap(
    lattice: &ModeLattice,
    coupler: &QubitCoupler,
    site: i64,
    model: SwapModel,
) -> Result<SwapCalibration> {
    JcSystem::new(lattice, coupler, site, model)?.calibrate(lattice, coupler.kappa())
}

/// Qubit and target-mode populations `(P₁, p_m)` at each of `times` while
/// the excited qubit is coupled to mode `site`.
pub fn swap_trace(
    lattice: &ModeLattice,
    coupler: &QubitCoupler,
    site: i64,
    model: SwapModel,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let system = JcSystem::new(lattice, coupler, site, model)?;
    let start = SingleExcitationState::qubit_excited(lattice.n_modes());
    times
        .iter()
        .map(|&t| {
            let mut s = start.clone();
            system.propagator.evolve(&mut s, t)?;
            Ok((s.qubit_population(), s.c_modes[system.target].norm_sqr()))
        })
        .collect()
}

fn swap_in(
    config: &ExperimentConfig,
    site: i64,
    initial: SingleExcitationState,
) -> Result<(SingleExcitationState, SwapCalibration)> {
    let lattice = &config.lattice;
    let system = JcSystem::new(lattice, &config.coupler, site, config.swap_model)?;
    let cal = system.calibrate(lattice, config.coupler.kappa())?;
    let fidelity = cal.mode_population;
    if fidelity < MIN_SWAP_FIDELITY {
        return Err(Error::Protocol(format!(
            "swap into mode {site} reached {fidelity:.4} (residual P1 {:.4})",
            cal.residual_p1
        )));
    }
    let mut state = initial;
    system.propagator.evolve(&mut state, cal.duration)?;
    let state = reset_qubit(&state);
    Ok((state, cal))
}

/// Excite the qubit, swap it into mode `site` at the configured coupling,
/// then decouple and reset the qubit.
pub fn prepare_single_site(config: &ExperimentConfig, site: i64) -> Result<SingleExcitationState> {
    Ok(prepare_single_site_calibrated(config, site)?.0)
}

pub fn prepare_single_site_calibrated(
    config: &ExperimentConfig,
    site: i64,
) -> Result<(SingleExcitationState, SwapCalibration)> {
    swap_in(config, site, SingleExcitationState::qubit_excited(config.lattice.n_modes()))
}

/// Vacuum plus one photon in `site` with equal weight, made by putting the
/// qubit in `(|g⟩ + |e⟩)/√2` and swapping.
pub fn prepare_superposition(config: &ExperimentConfig, site: i64) -> Result<SingleExcitationState> {
    let mut s = SingleExcitationState::vacuum(config.lattice.n_modes());
    s.c_vac = C64::new(FRAC_1_SQRT_2, 0.0);
    s.c_q = C64::new(FRAC_1_SQRT_2, 0.0);
    Ok(swap_in(config, site, s)?.0)
}

#[derive(Debug, Clone)]
pub struct WavePacket {
    pub state: SingleExcitationState,
    /// How long the qubit was left coupled, μs.
    pub emission_time: f64,
    /// Qubit population at the end of emission, before reset.
    pub residual_p1: f64,
    pub warning: Option<String>,
}

/// Let the excited qubit emit into all modes at the configured (strong)
/// coupling until P₁ < 0.01 or the emission cap, then decouple and reset.
pub fn prepare_wave_packet(config: &ExperimentConfig) -> Result<WavePacket> {
    let lattice = &config.lattice;
    let coupler = &config.coupler;
    let h = build_lab_hamiltonian(lattice, &[], Some(coupler), 0.0)?;
    let propagator = Propagator::new(&h)?;
    let initial = SingleExcitationState::qubit_excited(lattice.n_modes());
    let p1 = |t: f64| propagator.survival(0, t);

    let cap = config.emission_cap;
    let step = 1e-3_f64.min(cap / 100.0);
    let n_steps = (cap / step).ceil() as usize;
    let mut emission_time = cap;
    let mut prev = 0.0;
    for i in 1..=n_steps {
        let t = (i as f64 * step).min(cap);
        if p1(t) < EMISSION_STOP_P1 {
            // bisect the crossing
            let (mut a, mut b) = (prev, t);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if p1(mid) < EMISSION_STOP_P1 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            emission_time = b;
            break;
        }
        prev = t;
    }

    let mut state = initial;
    propagator.evolve(&mut state, emission_time)?;
    let residual_p1 = state.qubit_population();
    let warning = (residual_p1 >= EMISSION_WARN_P1).then(|| {
        let msg = format!("emission cap {cap} μs reached with qubit population {residual_p1:.3}");
        warn!("{msg}");
        msg
    });
    let state = reset_qubit(&state);
    Ok(WavePacket { state, emission_time, residual_p1, warning })
}

/// Reverse-swap readout of every mode, with per-mode calibrated durations.
pub struct ModeReadout {
    sites: Vec<i64>,
    /// Qubit row of the swap propagator, restricted to the modes.
    rows: Vec<DVector<C64>>,
    pub calibrations: Vec<SwapCalibration>,
}

impl ModeReadout {
    pub fn new(lattice: &ModeLattice, coupler: &QubitCoupler, sites: &[i64], model: SwapModel) -> Result<Self> {
        let mut rows = Vec::with_capacity(sites.len());
        let mut calibrations = Vec::with_capacity(sites.len());
        for &m in sites {
            let system = JcSystem::new(lattice, coupler, m, model)?;
            let cal = system.calibrate(lattice, coupler.kappa())?;
            let full = system.propagator.matrix_row(0, cal.duration);
            rows.push(full.rows(1, lattice.n_modes()).into_owned());
            calibrations.push(cal);
        }
        Ok(Self { sites: sites.to_vec(), rows, calibrations })
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    /// P₁ after the reverse swap on the `i`-th configured mode. The qubit is
    /// reset first.
    pub fn p1(&self, state: &SingleExcitationState, i: usize) -> f64 {
        self.rows[i].iter().zip(state.c_modes.iter()).map(|(r, c)| r * c).sum::<C64>().norm_sqr()
    }
}

/// Swap mode `site` back into the reset qubit and return P₁.
pub fn readout_mode(config: &ExperimentConfig, state: &SingleExcitationState, site: i64) -> Result<f64> {
    let readout = ModeReadout::new(&config.lattice, &config.readout_coupler()?, &[site], config.swap_model)?;
    Ok(readout.p1(&reset_qubit(state), 0))
}

/// `(⟨X⟩, ⟨Y⟩) = 2 (Re, Im)(c_vac* c_m)`, scaled by the remaining vacuum
/// coherence.
pub fn measure_quadratures(state: &SingleExcitationState, index: usize) -> (f64, f64) {
    let z = state.c_vac.conj() * state.c_modes[index] * (2.0 * state.vacuum_coherence);
    (z.re, z.im)
}

/// Mode populations and simulated readout over a time grid. Matrices are
/// indexed `(mode, time)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMap {
    pub times: Vec<f64>,
    pub modes: Vec<i64>,
    pub p: DMatrix<f64>,
    pub p1_readout: DMatrix<f64>,
}

impl PopulationMap {
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.p.column(t).iter().copied().collect()
    }

    pub fn center_of_mass_series(&self) -> Result<Vec<f64>> {
        (0..self.times.len()).map(|t| center_of_mass(&self.modes, &self.column(t), true)).collect()
    }

    /// RMS distance from the initial center of mass at every time.
    pub fn spread_series(&self) -> Result<Vec<f64>> {
        let c0 = center_of_mass(&self.modes, &self.column(0), true)?;
        (0..self.times.len()).map(|t| spread(&self.modes, &self.column(t), c0)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub map: PopulationMap,
    /// Idealized amplitudes `C_m(t)` over every lattice mode.
    pub amplitudes: DMatrix<C64>,
    pub prep_swap: Option<SwapCalibration>,
    pub wave_packet: Option<WavePacket>,
    pub readout_calibrations: Vec<SwapCalibration>,
}

/// Modulation schedule for a program, starting right after preparation.
pub fn modulation_schedule(config: &ExperimentConfig) -> Result<Schedule> {
    let fsr = config.lattice.fsr();
    let mut segments = Vec::new();
    // lab tones are evaluated against schedule time, so a frequency step
    // needs a phase offset to keep each tone continuous
    let mut offsets: Vec<f64> = Vec::new();
    let mut previous: Option<Vec<DriveTone>> = None;
    let mut t = 0.0;
    for (i, (duration, detuning)) in config.drive.pieces(config.total_time)?.into_iter().enumerate() {
        let mut tones = config.drive.tones_at(fsr, detuning)?;
        let label = format!("modulation {i}");
        segments.push(match config.frame {
            EvolutionFrame::Rwa => Segment::rwa(duration, tones, detuning, label),
            EvolutionFrame::Lab => {
                offsets.resize(tones.len(), 0.0);
                if let Some(prev) = &previous {
                    for (j, (old, new)) in prev.iter().zip(&tones).enumerate() {
                        offsets[j] += TAU * (old.freq - new.freq) * t;
                    }
                }
                previous = Some(tones.clone());
                for (tone, off) in tones.iter_mut().zip(&offsets) {
                    tone.phase += off;
                }
                Segment::lab(duration, tones, None, label)
            }
        });
        t += duration;
    }
    Schedule::new(config.lattice.clone(), segments, config.readout.dt)
}

/// Prepare, modulate, reset and read out every configured mode at every
/// readout time.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (initial, prep_swap, wave_packet) = match config.prep {
        Preparation::SingleSite { site } => {
            let (s, cal) = prepare_single_site_calibrated(config, site)?;
            (s, Some(cal), None)
        }
        Preparation::WavePacket => {
            let wp = prepare_wave_packet(config)?;
            (wp.state.clone(), None, Some(wp))
        }
    };
    let schedule = modulation_schedule(config)?;
    let trajectory = run_schedule(&initial, &schedule, &config.deco)?;

    let modes = config.readout_modes();
    let indices: Vec<usize> = modes.iter().map(|&m| config.lattice.index_of(m)).collect::<Result<_>>()?;
    let readout = ModeReadout::new(&config.lattice, &config.readout_coupler()?, &modes, config.swap_model)?;
    let n_t = trajectory.len();
    let mut p = DMatrix::zeros(modes.len(), n_t);
    let mut p1 = DMatrix::zeros(modes.len(), n_t);
    let mut amplitudes = DMatrix::zeros(config.lattice.n_modes(), n_t);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (t, (_, state)) in trajectory.iter().enumerate() {
        let state = reset_qubit(state);
        amplitudes.set_column(t, &state.c_modes);
        for (i, &idx) in indices.iter().enumerate() {
            p[(i, t)] = state.c_modes[idx].norm_sqr();
            let ideal = readout.p1(&state, i);
            p1[(i, t)] = if config.shots == 0 {
                ideal
            } else {
                let hits = (0..config.shots).filter(|_| rng.random::<f64>() < ideal).count();
                hits as f64 / config.shots as f64
            };
        }
    }
    let times = trajectory.iter().map(|(t, _)| *t).collect();
    Ok(ExperimentResult {
        map: PopulationMap { times, modes, p, p1_readout: p1 },
        amplitudes,
        prep_swap,
        wave_packet,
        readout_calibrations: readout.calibrations,
    })
}

#[derive(Debug, Clone)]
pub struct BandMeasurement {
    pub band: BandMap,
    /// `C_m(t)` reconstructed from the quadratures, indexed `(mode, time)`.
    pub psi: DMatrix<C64>,
    pub times: Vec<f64>,
}

/// Quadrature-resolved band measurement: prepare a vacuum/photon
/// superposition on the configured site, evolve under the drive program and
/// transform the reconstructed `C_m(t)`.
pub fn measure_band(config: &ExperimentConfig) -> Result<BandMeasurement> {
    config.validate()?;
    let site = match config.prep {
        Preparation::SingleSite { site } => site,
        Preparation::WavePacket => {
            return Err(Error::Config("band measurement needs single-site preparation".into()));
        }
    };
    let initial = prepare_superposition(config, site)?;
    let c_vac = initial.c_vac;
    let trajectory = run_schedule(&initial, &modulation_schedule(config)?, &config.deco)?;
    let n = config.lattice.n_modes();
    let mut psi = DMatrix::zeros(n, trajectory.len());
    for (t, (_, state)) in trajectory.iter().enumerate() {
        for i in 0..n {
            let (x, y) = measure_quadratures(state, i);
            psi[(i, t)] = C64::new(x, y) / (2.0 * c_vac.conj());
        }
    }
    let times: Vec<f64> = trajectory.iter().map(|(t, _)| *t).collect();
    let band = band_from_wavefunction(&psi, &times)?;
    Ok(BandMeasurement { band, psi, times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn nn(detuning: f64) -> DriveProgram {
        DriveProgram::SingleTone { order: 1, detuning, strength: DEFAULT_G1, phase: PI }
    }

    fn config(prep: Preparation, drive: DriveProgram, total: f64) -> ExperimentConfig {
        ExperimentConfig::standard(prep, drive, total).unwrap()
    }

    #[test]
    fn single_site_swap_matches_rabi_time() {
        let cfg = config(Preparation::SingleSite { site: 0 }, nn(0.0), 1.0);
        let (state, cal) = prepare_single_site_calibrated(&cfg, 0).unwrap();
        assert!(state.mode_populations()[16] >= 0.99, "{cal:?}");
        assert!((cal.duration - 1.0 / (4.0 * 0.36)).abs() / (1.0 / 1.44) < 0.05, "{cal:?}");
        assert!(state.check_normalized(1e-9).is_ok());
    }

    #[test]
    fn dispersive_swap_leaves_spectators_empty() {
        let cfg = config(Preparation::SingleSite { site: 0 }, nn(0.0), 1.0);
        let state = prepare_single_site(&cfg, 0).unwrap();
        assert!(state.mode_populations()[16] > 1.0 - 1e-12);
        // off-centre sites see a net dispersive push and need a retuned swap
        let cal = calibrate_swap(&cfg.lattice, &cfg.coupler, 12, SwapModel::Dispersive).unwrap();
        assert!(cal.mode_population >= 0.99, "{cal:?}");
    }

    #[test]
    fn multimode_swap_leaks_into_neighbours() {
        let mut cfg = config(Preparation::SingleSite { site: 0 }, nn(0.0), 1.0);
        cfg.swap_model = SwapModel::Multimode;
        let p = prepare_single_site(&cfg, 0).unwrap().mode_populations();
        assert!(p[16] >= 0.99);
        let ratio = (0.36f64 / 7.33).powi(2);
        assert!(p[15] > 0.1 * ratio && p[15] < 10.0 * ratio, "{}", p[15]);
        assert!((p[15] - p[17]).abs() < 1e-12);
    }

    #[test]
    fn swap_trace_starts_on_qubit_and_ends_in_mode() {
        let cfg = config(Preparation::SingleSite { site: 0 }, nn(0.0), 1.0);
        let cal = calibrate_swap(&cfg.lattice, &cfg.coupler, 0, SwapModel::Dispersive).unwrap();
        let trace = swap_trace(&cfg.lattice, &cfg.coupler, 0, SwapModel::Dispersive, &[0.0, cal.duration]).unwrap();
        assert_eq!(trace[0], (1.0, 0.0));
        assert!(trace[1].1 > 0.999 && trace[1].0 < 1e-3);
    }

    #[test]
    fn zero_kappa_cannot_swap() {
        let mut cfg = config(Preparation::SingleSite { site: 0 }, nn(0.0), 1.0);
        cfg.coupler = cfg.coupler.with_kappa(0.0).unwrap();
        assert!(matches!(prepare_single_site(&cfg, 0), Err(Error::Protocol(_))));
    }

    #[test]
    fn readout_examples() {
        let cfg = config(Preparation::SingleSite { site: 0 }, nn(0.0), 1.0);
        let photon = SingleExcitationState::photon(33, 16 + 3);
        assert!(readout_mode(&cfg, &photon, 3).unwrap() >= 0.99);
        assert!(readout_mode(&cfg, &photon, 5).unwrap() < 0.01);
        let vac = SingleExcitationState::vacuum(33);
        assert_eq!(readout_mode(&cfg, &vac, 0).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_examples() {
        let mut s = SingleExcitationState::vacuum(3);
        s.c_vac = C64::new(FRAC_1_SQRT_2, 0.0);
        s.c_modes[1] = C64::new(FRAC_1_SQRT_2, 0.0);
        let (x, y) = measure_quadratures(&s, 1);
        assert!((x - 1.0).abs() < 1e-12 && y.abs() < 1e-12);
        s.c_modes[1] = C64::new(0.0, FRAC_1_SQRT_2);
        let (x, y) = measure_quadratures(&s, 1);
        assert!(x.abs() < 1e-12 && (y - 1.0).abs() < 1e-12);
        let p = SingleExcitationState::photon(3, 1);
        assert_eq!(measure_quadratures(&p, 1), (0.0, 0.0));
    }

    #[test]
    fn reversal_pieces_alternate() {
        let d = DriveProgram::Reversal { order: 1, detuning: -0.2, strength: 0.5, phase: PI, half_period: 2.5 };
        let pieces = d.pieces(6.0).unwrap();
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[0], (2.5, -0.2));
        assert_eq!(pieces[1], (2.5, 0.2));
        assert!((pieces[2].0 - 1.0).abs() < 1e-12 && pieces[2].1 == -0.2);
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(Preparation::SingleSite { site: 0 }, nn(0.0), 1.0);
        cfg.readout.modes = vec![20];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(ExperimentConfig::standard(Preparation::SingleSite { site: 0 }, nn(0.0), 0.0).is_err());
        assert!(ExperimentConfig::standard(Preparation::SingleSite { site: 17 }, nn(0.0), 1.0).is_err());
    }
}
