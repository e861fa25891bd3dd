//! Physical configuration and Hamiltonian construction.
//!
//! Basis ordering for every matrix built here: the qubit first (when a coupler
//! is present), then the modes from `-n_left` to `n_right`.

use std::f64::consts::{PI, TAU};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Upper end of the tunable coupler range in MHz. Values above are accepted
/// with a warning.
pub const KAPPA_RANGE_MAX: f64 = 7.4;

/// Allowed mismatch between `freq / order` and `fsr + detuning` when building
/// the rotating-frame Hamiltonian (1 kHz).
pub const RWA_TONE_TOLERANCE: f64 = 1e-3;

/// Finite set of cable modes relabeled around the mode nearest the qubit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeLattice {
    base_abs_index: i64,
    n_left: usize,
    n_right: usize,
    omega0: f64,
    fsr: f64,
}

impl ModeLattice {
    pub fn new(base_abs_index: i64, n_left: usize, n_right: usize, omega0: f64, fsr: f64) -> Result<Self> {
        if !(fsr.is_finite() && fsr > 0.0) {
            return Err(Error::Config(format!("lattice fsr must be > 0, got {fsr}")));
        }
        if !omega0.is_finite() {
            return Err(Error::Config(format!("lattice omega0 must be finite, got {omega0}")));
        }
        if n_left + n_right + 1 < 2 {
            return Err(Error::Config("lattice needs at least 2 modes (n_left + n_right + 1 >= 2)".into()));
        }
        Ok(Self { base_abs_index, n_left, n_right, omega0, fsr })
    }

    /// `2 * n_side + 1` modes centered on site 0 with the default even parity.
    pub fn symmetric(n_side: usize, omega0: f64, fsr: f64) -> Result<Self> {
        Self::new(592, n_side, n_side, omega0, fsr)
    }

    pub fn base_abs_index(&self) -> i64 {
        self.base_abs_index
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn fsr(&self) -> f64 {
        self.fsr
    }

    pub fn n_modes(&self) -> usize {
        self.n_left + self.n_right + 1
    }

    pub fn min_site(&self) -> i64 {
        -(self.n_left as i64)
    }

    pub fn max_site(&self) -> i64 {
        self.n_right as i64
    }

    /// Relative site labels in basis order.
    pub fn sites(&self) -> impl Iterator<Item = i64> + Clone {
        self.min_site()..=self.max_site()
    }

    pub fn contains(&self, m: i64) -> bool {
        (self.min_site()..=self.max_site()).contains(&m)
    }

    /// Position of site `m` in the mode block of a state vector.
    pub fn index_of(&self, m: i64) -> Result<usize> {
        if self.contains(m) {
            Ok((m - self.min_site()) as usize)
        } else {
            Err(Error::Domain(format!("mode index {m} outside [{}, {}]", self.min_site(), self.max_site())))
        }
    }

    pub fn site_of(&self, index: usize) -> i64 {
        self.min_site() + index as i64
    }

    /// Ordinary frequency of mode `m` in MHz.
    pub fn mode_frequency(&self, m: i64) -> Result<f64> {
        self.index_of(m)?;
        Ok(self.omega0 + m as f64 * self.fsr)
    }

    /// Absolute mode number of relative site `m`.
    pub fn absolute_index(&self, m: i64) -> i64 {
        m + self.base_abs_index
    }

    /// `(-1)^(absolute index)` of site `m`.
    pub fn parity_sign(&self, m: i64) -> f64 {
        if self.absolute_index(m).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// One parametric drive tone on the modulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTone {
    /// Hop distance `l` the tone is meant to bridge.
    pub order: u32,
    /// Drive frequency `Ω_l / 2π` in MHz.
    pub freq: f64,
    /// Drive phase in radians.
    pub phase: f64,
    /// Hopping strength `g_l / 2π` in MHz.
    pub strength: f64,
}

impl DriveTone {
    pub fn new(order: u32, freq: f64, phase: f64, strength: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("drive tone order must be >= 1".into()));
        }
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::Config(format!("drive strength must be >= 0, got {strength}")));
        }
        if !(freq.is_finite() && phase.is_finite()) {
            return Err(Error::Config("drive frequency and phase must be finite".into()));
        }
        Ok(Self { order, freq, phase, strength })
    }

    /// Tone at `order * (fsr + detuning)`.
    pub fn resonant(order: u32, fsr: f64, detuning: f64, strength: f64, phase: f64) -> Result<Self> {
        Self::new(order, order as f64 * (fsr + detuning), phase, strength)
    }

    /// Per-site detuning `freq / order - fsr` implied by this tone.
    pub fn detuning(&self, fsr: f64) -> f64 {
        let d = self.freq / self.order as f64 - fsr;
        if d.abs() > 0.1 * fsr {
            warn!("drive tone order {} detuning {d} MHz is not small against fsr {fsr} MHz", self.order);
        }
        d
    }

    /// Signed rotating-frame hopping amplitude `(-1)^l g e^{iφ}` in rad/μs.
    pub fn rwa_hopping(&self) -> C64 {
        let sign = if self.order.is_multiple_of(2) { 1.0 } else { -1.0 };
        C64::from_polar(sign * TAU * self.strength, self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingScaling {
    /// Same κ for every mode.
    #[default]
    Flat,
    /// `κ_m = κ sqrt(ω_m / ω_q)`.
    SqrtOmega,
}

/// Transmon and its tunable coupler to the cable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QubitCoupler {
    omega_q: f64,
    kappa: f64,
    scaling: CouplingScaling,
}

impl QubitCoupler {
    pub fn new(omega_q: f64, kappa: f64, scaling: CouplingScaling) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::Config(format!("coupler kappa must be >= 0, got {kappa}")));
        }
        if !(omega_q.is_finite() && omega_q > 0.0) {
            return Err(Error::Config(format!("qubit frequency must be > 0, got {omega_q}")));
        }
        if kappa > KAPPA_RANGE_MAX {
            warn!("coupler kappa {kappa} MHz exceeds the {KAPPA_RANGE_MAX} MHz tuning range");
        }
        Ok(Self { omega_q, kappa, scaling })
    }

    pub fn omega_q(&self) -> f64 {
        self.omega_q
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn scaling(&self) -> CouplingScaling {
        self.scaling
    }

    /// Same coupler with the qubit retuned to `omega_q`.
    pub fn tuned_to(&self, omega_q: f64) -> Result<Self> {
        Self::new(omega_q, self.kappa, self.scaling)
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(self.omega_q, kappa, self.scaling)
    }

    /// Coupling to a mode at ordinary frequency `omega_m`, in MHz.
    pub fn kappa_for(&self, omega_m: f64) -> f64 {
        match self.scaling {
            CouplingScaling::Flat => self.kappa,
            CouplingScaling::SqrtOmega => self.kappa * (omega_m / self.omega_q).sqrt(),
        }
    }
}

/// A normalized vector in the single-excitation subspace.
///
/// `p_lost` carries population removed by damping or qubit reset, so the
/// total `|c_vac|² + |c_q|² + Σ|c_m|² + p_lost` stays 1.
/// `vacuum_coherence` multiplies the vacuum–photon interference terms and
/// is where pure dephasing lands.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleExcitationState {
    pub c_vac: C64,
    pub c_q: C64,
    pub c_modes: DVector<C64>,
    pub p_lost: f64,
    pub vacuum_coherence: f64,
}

impl SingleExcitationState {
    pub fn vacuum(n_modes: usize) -> Self {
        Self {
            c_vac: C64::new(1.0, 0.0),
            c_q: C64::new(0.0, 0.0),
            c_modes: DVector::zeros(n_modes),
            p_lost: 0.0,
            vacuum_coherence: 1.0,
        }
    }

    pub fn qubit_excited(n_modes: usize) -> Self {
        Self { c_vac: C64::new(0.0, 0.0), c_q: C64::new(1.0, 0.0), ..Self::vacuum(n_modes) }
    }

    /// One photon in the mode at vector position `index`.
    pub fn photon(n_modes: usize, index: usize) -> Self {
        let mut s = Self { c_vac: C64::new(0.0, 0.0), ..Self::vacuum(n_modes) };
        s.c_modes[index] = C64::new(1.0, 0.0);
        s
    }

    pub fn n_modes(&self) -> usize {
        self.c_modes.len()
    }

    pub fn mode_populations(&self) -> Vec<f64> {
        self.c_modes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn photon_population(&self) -> f64 {
        self.c_modes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn qubit_population(&self) -> f64 {
        self.c_q.norm_sqr()
    }

    /// `|c_vac|² + |c_q|² + Σ|c_m|² + p_lost`.
    pub fn total_population(&self) -> f64 {
        self.c_vac.norm_sqr() + self.c_q.norm_sqr() + self.photon_population() + self.p_lost
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let err = (self.total_population() - 1.0).abs();
        if err <= tol {
            Ok(())
        } else {
            Err(Error::Numerical(format!("state normalization off by {err:.3e}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    Rotating,
}

/// Boundary condition of the mode chain. Physical cables are open; the ring
/// exists for checks against quasimomentum-resolved spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Ring,
}

/// Hermitian generator in rad/μs.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub matrix: DMatrix<C64>,
    pub frame: Frame,
    /// Whether row/column 0 is the qubit.
    pub has_qubit: bool,
}

impl HamiltonianMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.dimension() - usize::from(self.has_qubit)
    }

    /// `max |H - H†|` over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let h = &self.matrix;
        let n = h.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `max_i Σ_j |H_ij|`, an upper bound on the spectral radius.
    pub fn row_sum_norm(&self) -> f64 {
        self.matrix.row_iter().map(|r| r.iter().map(|c| c.norm()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Lab-frame generator split into its static part and the modulated
/// inter-mode pattern: `H(t) = H0 + f(t) S` with
/// `f(t) = Σ_l 2·2πg_l cos(Ω_l t + φ_l)` and `S_mn = (-1)^(m+n)` off the
/// diagonal of the mode block.
#[derive(Debug, Clone)]
pub struct LabHamiltonian {
    static_part: DMatrix<C64>,
    pattern: DMatrix<C64>,
    tones: Vec<DriveTone>,
    has_qubit: bool,
}

impl LabHamiltonian {
    pub fn new(lattice: &ModeLattice, tones: &[DriveTone], coupler: Option<&QubitCoupler>) -> Self {
        let offset = usize::from(coupler.is_some());
        let dim = lattice.n_modes() + offset;
        let reference = lattice.omega0();
        let mut static_part = DMatrix::<C64>::zeros(dim, dim);
        let mut pattern = DMatrix::<C64>::zeros(dim, dim);

        for (i, m) in lattice.sites().enumerate() {
            let f = lattice.omega0() + m as f64 * lattice.fsr();
            static_part[(i + offset, i + offset)] = C64::new(TAU * (f - reference), 0.0);
        }
        if let Some(c) = coupler {
            static_part[(0, 0)] = C64::new(TAU * (c.omega_q() - reference), 0.0);
            for (i, m) in lattice.sites().enumerate() {
                let f = lattice.omega0() + m as f64 * lattice.fsr();
                let k = C64::new(TAU * c.kappa_for(f), 0.0);
                static_part[(0, i + offset)] = k;
                static_part[(i + offset, 0)] = k;
            }
        }
        if !tones.is_empty() {
            for (i, m) in lattice.sites().enumerate() {
                for (j, n) in lattice.sites().enumerate() {
                    if i != j {
                        let s = lattice.parity_sign(m) * lattice.parity_sign(n);
                        pattern[(i + offset, j + offset)] = C64::new(s, 0.0);
                    }
                }
            }
        }
        Self { static_part, pattern, tones: tones.to_vec(), has_qubit: coupler.is_some() }
    }

    /// Scalar modulation envelope `Σ_l 2·2πg_l cos(Ω_l t + φ_l)` in rad/μs.
    pub fn envelope(&self, t: f64) -> f64 {
        self.tones.iter().map(|tone| 2.0 * TAU * tone.strength * (TAU * tone.freq * t + tone.phase).cos()).sum()
    }

    /// Bound on `||H(t)||` valid for all `t`.
    pub fn norm_bound(&self) -> f64 {
        let amp: f64 = self.tones.iter().map(|t| 2.0 * TAU * t.strength).sum();
        let n = self.static_part.nrows();
        (0..n)
            .map(|i| {
                let s: f64 = self.static_part.row(i).iter().map(|c| c.norm()).sum();
                let p: f64 = self.pattern.row(i).iter().map(|c| c.norm()).sum();
                s + amp * p
            })
            .fold(0.0, f64::max)
    }

    /// Largest ordinary frequency scale present, in MHz.
    pub fn max_frequency(&self) -> f64 {
        let diag = self.static_part.diagonal().iter().map(|c| c.norm() / TAU).fold(0.0, f64::max);
        self.tones.iter().map(|t| t.freq.abs()).fold(diag, f64::max)
    }

    pub fn has_qubit(&self) -> bool {
        self.has_qubit
    }

    /// No tone carries any strength, so the generator is static.
    pub fn envelope_is_zero(&self) -> bool {
        self.tones.iter().all(|t| t.strength == 0.0)
    }

    pub fn dimension(&self) -> usize {
        self.static_part.nrows()
    }

    pub fn at(&self, t: f64) -> HamiltonianMatrix {
        let f = self.envelope(t);
        let matrix =
            if f == 0.0 { self.static_part.clone() } else { &self.static_part + &self.pattern * C64::new(f, 0.0) };
        HamiltonianMatrix { matrix, frame: Frame::Lab, has_qubit: self.has_qubit }
    }
}

/// Lab-frame Hamiltonian at time `t` (μs). Diagonal energies are measured
/// from mode 0.
pub fn build_lab_hamiltonian(
    lattice: &ModeLattice,
    tones: &[DriveTone],
    coupler: Option<&QubitCoupler>,
    t: f64,
) -> Result<HamiltonianMatrix> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    Ok(LabHamiltonian::new(lattice, tones, coupler).at(t))
}

/// Time-independent rotating-frame Hamiltonian of the open chain.
pub fn build_rwa_hamiltonian(lattice: &ModeLattice, tones: &[DriveTone], detuning: f64) -> Result<HamiltonianMatrix> {
    build_rwa_hamiltonian_with_boundary(lattice, tones, detuning, Boundary::Open)
}

pub fn build_rwa_hamiltonian_with_boundary(
    lattice: &ModeLattice,
    tones: &[DriveTone],
    detuning: f64,
    boundary: Boundary,
) -> Result<HamiltonianMatrix> {
    let n = lattice.n_modes();
    for tone in tones {
        let mismatch = tone.freq / tone.order as f64 - (lattice.fsr() + detuning);
        if mismatch.abs() >= RWA_TONE_TOLERANCE {
            return Err(Error::Config(format!(
                "tone at {} MHz (order {}) is {mismatch:.6} MHz off the l(fsr + Δ) resonance for Δ = {detuning} MHz",
                tone.freq, tone.order
            )));
        }
        if boundary == Boundary::Ring && 2 * tone.order as usize >= n {
            return Err(Error::Domain(format!("ring of {n} sites too small for hop order {}", tone.order)));
        }
    }

    let mut h = DMatrix::<C64>::zeros(n, n);
    for (i, m) in lattice.sites().enumerate() {
        h[(i, i)] = C64::new(-(m as f64) * TAU * detuning, 0.0);
    }
    for tone in tones {
        let hop = tone.rwa_hopping();
        let l = tone.order as usize;
        for i in 0..n {
            let j = match boundary {
                Boundary::Open if i + l < n => i + l,
                Boundary::Open => continue,
                Boundary::Ring => (i + l) % n,
            };
            h[(i, j)] += hop;
            h[(j, i)] += hop.conj();
        }
    }
    Ok(HamiltonianMatrix { matrix: h, frame: Frame::Rotating, has_qubit: false })
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Plaquette flux of a nearest plus next-nearest neighbour drive pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeFlux {
    /// `2φ₁ - φ₂` as given.
    pub raw: f64,
    /// The same angle wrapped into `(-π, π]`.
    pub canonical: f64,
}

pub fn effective_flux(phi1: f64, phi2: f64) -> GaugeFlux {
    let raw = 2.0 * phi1 - phi2;
    GaugeFlux { raw, canonical: wrap_angle(raw) }
}

/// Band energy `Σ_l 2(-1)^l g_l cos(l k + φ_l)` in MHz of the untilted
/// infinite chain, for amplitudes `ψ_m ∝ e^{ikm}`.
pub fn dispersion_analytic(tones: &[DriveTone], k: f64) -> f64 {
    tones
        .iter()
        .map(|t| {
            let sign = if t.order % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign * t.strength * (t.order as f64 * k + t.phase).cos()
        })
        .sum()
}

/// `dE/dk` in MHz per radian, companion of [`dispersion_analytic`].
pub fn group_velocity(tones: &[DriveTone], k: f64) -> f64 {
    tones
        .iter()
        .map(|t| {
            let sign = if t.order % 2 == 0 { 1.0 } else { -1.0 };
            let l = t.order as f64;
            -2.0 * sign * t.strength * l * (l * k + t.phase).sin()
        })
        .sum()
}
