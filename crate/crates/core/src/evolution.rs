//! Time evolution in the single-excitation subspace.
//!
//! Static generators are exponentiated once through their eigendecomposition.
//! Time-dependent lab-frame generators use the exponential midpoint rule,
//! `ψ ← exp(-i H(t + dt/2) dt) ψ`, which is unitary at every step.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::model::{build_rwa_hamiltonian, DriveTone, HamiltonianMatrix, LabHamiltonian, ModeLattice, QubitCoupler};
use crate::{Error, Result, SingleExcitationState, C64};

/// Largest phase a single midpoint step may accumulate, `max|H| dt`.
pub const MAX_STEP_PHASE: f64 = 0.1;

/// Refuse to integrate anything that would need more steps than this.
pub const MAX_STEPS: usize = 20_000_000;

/// `exp(-i H t)` for a fixed Hermitian `H`, reusable for any `t`.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
    has_qubit: bool,
}

impl Propagator {
    pub fn new(h: &HamiltonianMatrix) -> Result<Self> {
        let eig = SymmetricEigen::new(h.matrix.clone());
        if eig.eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(Error::Numerical("eigendecomposition produced non-finite eigenvalues".into()));
        }
        Ok(Self { eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors, has_qubit: h.has_qubit })
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `exp(-i H t) v`.
    pub fn apply(&self, v: &DVector<C64>, t: f64) -> DVector<C64> {
        let mut coeffs = self.eigenvectors.ad_mul(v);
        for (c, e) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        &self.eigenvectors * coeffs
    }

    /// `|⟨k|row⟩|²` for every eigenvector `k`, aligned with `eigenvalues()`.
    pub fn weights(&self, row: usize) -> Vec<f64> {
        self.eigenvectors.row(row).iter().map(|v| v.norm_sqr()).collect()
    }

    /// Survival probability `|⟨row| exp(-i H t) |row⟩|²`.
    pub fn survival(&self, row: usize, t: f64) -> f64 {
        self.eigenvectors
            .row(row)
            .iter()
            .zip(self.eigenvalues.iter())
            .map(|(v, e)| C64::from_polar(v.norm_sqr(), -e * t))
            .sum::<C64>()
            .norm_sqr()
    }

    /// Row `row` of `exp(-i H t)`.
    pub fn matrix_row(&self, row: usize, t: f64) -> DVector<C64> {
        let n = self.dimension();
        let mut out = DVector::zeros(n);
        for (k, e) in self.eigenvalues.iter().enumerate() {
            let w = self.eigenvectors[(row, k)] * C64::from_polar(1.0, -e * t);
            for j in 0..n {
                out[j] += w * self.eigenvectors[(j, k)].conj();
            }
        }
        out
    }

    /// Evolve a state in place for time `t`.
    pub fn evolve(&self, state: &mut SingleExcitationState, t: f64) -> Result<()> {
        let v = pack(state, self.has_qubit, self.dimension())?;
        unpack(state, &self.apply(&v, t), self.has_qubit);
        Ok(())
    }
}

fn pack(state: &SingleExcitationState, has_qubit: bool, dim: usize) -> Result<DVector<C64>> {
    let expected = dim - usize::from(has_qubit);
    if state.n_modes() != expected {
        return Err(Error::DimensionMismatch { expected, found: state.n_modes() });
    }
    if has_qubit {
        let mut v = DVector::zeros(dim);
        v[0] = state.c_q;
        v.rows_mut(1, expected).copy_from(&state.c_modes);
        Ok(v)
    } else {
        Ok(state.c_modes.clone())
    }
}

fn unpack(state: &mut SingleExcitationState, v: &DVector<C64>, has_qubit: bool) {
    if has_qubit {
        state.c_q = v[0];
        let n = state.n_modes();
        state.c_modes.copy_from(&v.rows(1, n));
    } else {
        state.c_modes.copy_from(v);
    }
}

/// `exp(-i H duration) state`. The vacuum amplitude is untouched; when `H`
/// has no qubit row the qubit amplitude is left as is.
pub fn evolve_static(
    state: &SingleExcitationState,
    h: &HamiltonianMatrix,
    duration: f64,
) -> Result<SingleExcitationState> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::Domain(format!("duration must be >= 0, got {duration}")));
    }
    let mut out = state.clone();
    Propagator::new(h)?.evolve(&mut out, duration)?;
    Ok(out)
}

/// Default integration step: `min(1 / (50 f_max), duration / 100)`.
pub fn default_dt(lab: &LabHamiltonian, duration: f64) -> f64 {
    let f_max = lab.max_frequency();
    let by_freq = if f_max > 0.0 { 1.0 / (50.0 * f_max) } else { f64::INFINITY };
    by_freq.min(duration / 100.0)
}

/// Midpoint-rule evolution under the lab-frame generator over
/// `[t0, t0 + duration]`. `dt` is subdivided as needed so that every step
/// satisfies `max|H| dt < 0.1`.
pub fn evolve_time_dependent(
    state: &SingleExcitationState,
    lattice: &ModeLattice,
    tones: &[DriveTone],
    coupler: Option<&QubitCoupler>,
    t0: f64,
    duration: f64,
    dt: f64,
) -> Result<SingleExcitationState> {
    let lab = LabHamiltonian::new(lattice, tones, coupler);
    let mut out = state.clone();
    advance_lab(&mut out, &lab, t0, duration, dt)?;
    Ok(out)
}

fn advance_lab(state: &mut SingleExcitationState, lab: &LabHamiltonian, t0: f64, duration: f64, dt: f64) -> Result<()> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::Domain(format!("duration must be >= 0, got {duration}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
    }
    if duration == 0.0 {
        return Ok(());
    }
    if lab.envelope_is_zero() {
        return Propagator::new(&lab.at(t0))?.evolve(state, duration);
    }
    let steps = step_count(lab.norm_bound(), duration, dt)?;
    let h = duration / steps as f64;
    for k in 0..steps {
        let t_mid = t0 + (k as f64 + 0.5) * h;
        Propagator::new(&lab.at(t_mid))?.evolve(state, h)?;
    }
    Ok(())
}

fn step_count(norm: f64, duration: f64, dt: f64) -> Result<usize> {
    let by_dt = (duration / dt).ceil();
    let by_phase = (duration * norm / MAX_STEP_PHASE).ceil();
    let steps = by_dt.max(by_phase).max(1.0);
    if !steps.is_finite() || steps > MAX_STEPS as f64 {
        return Err(Error::Numerical(format!(
            "time-dependent step would need {steps:.3e} substeps (limit {MAX_STEPS})"
        )));
    }
    Ok(steps as usize)
}

/// Move all qubit population into `p_lost`.
pub fn reset_qubit(state: &SingleExcitationState) -> SingleExcitationState {
    let mut out = state.clone();
    out.p_lost += out.c_q.norm_sqr();
    out.c_q = C64::new(0.0, 0.0);
    out
}

/// Exponential damping of modes and qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceParams {
    pub t1_mode: f64,
    pub t2_mode: f64,
    pub t1_qubit: f64,
    pub enabled: bool,
}

impl Default for DecoherenceParams {
    fn default() -> Self {
        Self::disabled()
    }
}

impl DecoherenceParams {
    /// Measured cable coherence, T1 ≈ 29.1 μs and T2 ≈ 57.9 μs. The qubit T1
    /// is not part of that data set; 20 μs is a typical transmon value.
    pub const CABLE_T1: f64 = 29.1;
    pub const CABLE_T2: f64 = 57.9;
    pub const DEFAULT_QUBIT_T1: f64 = 20.0;

    pub fn disabled() -> Self {
        Self { t1_mode: Self::CABLE_T1, t2_mode: Self::CABLE_T2, t1_qubit: Self::DEFAULT_QUBIT_T1, enabled: false }
    }

    pub fn new(t1_mode: f64, t2_mode: f64, t1_qubit: f64) -> Result<Self> {
        let p = Self { t1_mode, t2_mode, t1_qubit, enabled: true };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        for (name, v) in [("t1_mode", self.t1_mode), ("t2_mode", self.t2_mode), ("t1_qubit", self.t1_qubit)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("decoherence {name} must be > 0 when enabled, got {v}")));
            }
        }
        if self.t2_mode > 2.0 * self.t1_mode {
            warn!("mode T2 {} μs exceeds 2 T1 = {} μs", self.t2_mode, 2.0 * self.t1_mode);
        }
        Ok(())
    }

    /// Pure dephasing rate `(1/T2 - 1/(2 T1))₊` in 1/μs.
    pub fn pure_dephasing_rate(&self) -> f64 {
        (1.0 / self.t2_mode - 0.5 / self.t1_mode).max(0.0)
    }

    /// Damp amplitudes over an interval `tau`. Removed population goes to
    /// `p_lost`; pure dephasing only reduces the vacuum coherence factor.
    pub fn apply(&self, state: &mut SingleExcitationState, tau: f64) {
        if !self.enabled || tau <= 0.0 {
            return;
        }
        let before = state.photon_population() + state.qubit_population();
        let mode_factor = (-tau / (2.0 * self.t1_mode)).exp();
        let qubit_factor = (-tau / (2.0 * self.t1_qubit)).exp();
        state.c_modes.iter_mut().for_each(|c| *c *= mode_factor);
        state.c_q *= qubit_factor;
        let after = state.photon_population() + state.qubit_population();
        state.p_lost += before - after;
        state.vacuum_coherence *= (-tau * self.pure_dephasing_rate()).exp();
    }
}

/// Generator active during one segment.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentKind {
    /// Static rotating-frame lattice with uniform tilt `-mΔ`.
    Rwa { tones: Vec<DriveTone>, detuning: f64 },
    /// Lab frame, optionally with the qubit coupled in.
    Lab { tones: Vec<DriveTone>, coupler: Option<QubitCoupler> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub kind: SegmentKind,
    pub label: String,
}

impl Segment {
    pub fn rwa(duration: f64, tones: Vec<DriveTone>, detuning: f64, label: impl Into<String>) -> Self {
        Self { duration, kind: SegmentKind::Rwa { tones, detuning }, label: label.into() }
    }

    pub fn lab(duration: f64, tones: Vec<DriveTone>, coupler: Option<QubitCoupler>, label: impl Into<String>) -> Self {
        Self { duration, kind: SegmentKind::Lab { tones, coupler }, label: label.into() }
    }
}

/// Piecewise-constant program on one lattice, sampled every `sample_dt`.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub lattice: ModeLattice,
    pub segments: Vec<Segment>,
    pub sample_dt: f64,
    /// Integration step for lab segments; `None` uses [`default_dt`].
    pub lab_dt: Option<f64>,
}

impl Schedule {
    pub fn new(lattice: ModeLattice, segments: Vec<Segment>, sample_dt: f64) -> Result<Self> {
        if !(sample_dt.is_finite() && sample_dt > 0.0) {
            return Err(Error::Config(format!("sample_dt must be > 0, got {sample_dt}")));
        }
        for s in &segments {
            if !(s.duration.is_finite() && s.duration >= 0.0) {
                return Err(Error::Config(format!("segment '{}' has negative duration {}", s.label, s.duration)));
            }
        }
        Ok(Self { lattice, segments, sample_dt, lab_dt: None })
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

pub type Trajectory = Vec<(f64, SingleExcitationState)>;

enum Stepper {
    Static(Propagator),
    Lab { lab: LabHamiltonian, dt: f64 },
}

impl Stepper {
    fn new(lattice: &ModeLattice, segment: &Segment, lab_dt: Option<f64>) -> Result<Self> {
        match &segment.kind {
            SegmentKind::Rwa { tones, detuning } => {
                Ok(Stepper::Static(Propagator::new(&build_rwa_hamiltonian(lattice, tones, *detuning)?)?))
            }
            SegmentKind::Lab { tones, coupler } => {
                let lab = LabHamiltonian::new(lattice, tones, coupler.as_ref());
                if lab.envelope_is_zero() {
                    Ok(Stepper::Static(Propagator::new(&lab.at(0.0))?))
                } else {
                    let dt = lab_dt.unwrap_or_else(|| default_dt(&lab, segment.duration));
                    Ok(Stepper::Lab { lab, dt })
                }
            }
        }
    }

    fn advance(&self, state: &mut SingleExcitationState, t: f64, tau: f64) -> Result<()> {
        match self {
            Stepper::Static(p) => p.evolve(state, tau),
            Stepper::Lab { lab, dt } => advance_lab(state, lab, t, tau, *dt),
        }
    }
}

/// Apply every segment in order and sample the state every `sample_dt`,
/// plus the final instant.
pub fn run_schedule(
    initial: &SingleExcitationState,
    schedule: &Schedule,
    deco: &DecoherenceParams,
) -> Result<Trajectory> {
    deco.validate()?;
    if initial.n_modes() != schedule.lattice.n_modes() {
        return Err(Error::DimensionMismatch { expected: schedule.lattice.n_modes(), found: initial.n_modes() });
    }
    let total = schedule.total_duration();
    let eps = 1e-9 * schedule.sample_dt;
    let mut state = initial.clone();
    let mut t = 0.0;
    let mut next_index = 1usize;
    let mut out = vec![(0.0, state.clone())];

    let mut seg_start = 0.0;
    for segment in &schedule.segments {
        let seg_end = seg_start + segment.duration;
        if segment.duration > 0.0 {
            let stepper = Stepper::new(&schedule.lattice, segment, schedule.lab_dt)?;
            while t < seg_end - eps {
                let next_sample = next_index as f64 * schedule.sample_dt;
                let target = next_sample.min(seg_end);
                let tau = target - t;
                stepper.advance(&mut state, t, tau)?;
                deco.apply(&mut state, tau);
                t = target;
                if (t - next_sample).abs() <= eps {
                    out.push((next_sample, state.clone()));
                    next_index += 1;
                }
            }
        }
        seg_start = seg_end;
    }
    if let Some((last, _)) = out.last() {
        if total - last > eps {
            out.push((total, state));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lab_hamiltonian, CouplingScaling};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, TAU};

    fn lattice(n_side: usize) -> ModeLattice {
        ModeLattice::symmetric(n_side, 4320.0, 7.33).unwrap()
    }

    fn nn(g: f64, detuning: f64) -> DriveTone {
        DriveTone::resonant(1, 7.33, detuning, g, PI).unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let l = lattice(2);
        let mut s = SingleExcitationState::photon(5, 1);
        s.c_modes[3] = C64::new(0.0, 0.3);
        s.c_modes[1] = C64::new((1.0f64 - 0.09).sqrt(), 0.0);
        let h = build_rwa_hamiltonian(&l, &[], 0.0).unwrap();
        let out = evolve_static(&s, &h, 3.7).unwrap();
        assert!((out.c_modes.clone() - s.c_modes.clone()).norm() < 1e-14);
    }

    #[test]
    fn two_site_half_swap() {
        let l = ModeLattice::new(592, 0, 1, 4320.0, 7.33).unwrap();
        let g = 0.5;
        let h = build_rwa_hamiltonian(&l, &[nn(g, 0.0)], 0.0).unwrap();
        let out = evolve_static(&SingleExcitationState::photon(2, 0), &h, 1.0 / (8.0 * g)).unwrap();
        let p = out.mode_populations();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);
        // sin²(2πgt) at another time
        let t = 0.13;
        let out = evolve_static(&SingleExcitationState::photon(2, 0), &h, t).unwrap();
        assert_abs_diff_eq!(out.mode_populations()[1], (TAU * g * t).sin().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = build_rwa_hamiltonian(&lattice(2), &[], 0.0).unwrap();
        let err = evolve_static(&SingleExcitationState::photon(3, 0), &h, 1.0).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 5, found: 3 });
    }

    #[test]
    fn free_lab_evolution_is_phase_only() {
        let l = lattice(3);
        let mut s = SingleExcitationState::vacuum(7);
        s.c_vac = C64::new(0.0, 0.0);
        for i in 0..7 {
            s.c_modes[i] = C64::new((1.0f64 / 7.0).sqrt(), 0.0);
        }
        let out = evolve_time_dependent(&s, &l, &[], None, 0.2, 0.9, 0.01).unwrap();
        for (i, m) in l.sites().enumerate() {
            let expected = s.c_modes[i] * C64::from_polar(1.0, -TAU * 7.33 * m as f64 * 0.9);
            assert!((out.c_modes[i] - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn vacuum_rabi_two_level() {
        let c = QubitCoupler::new(4320.0, 0.36, CouplingScaling::Flat).unwrap();
        // second mode parked far off resonance
        let wide = ModeLattice::new(592, 0, 1, 4320.0, 5000.0).unwrap();
        let s = SingleExcitationState::qubit_excited(2);
        let t_swap = 1.0 / (4.0 * 0.36);
        let out = evolve_time_dependent(&s, &wide, &[], Some(&c), 0.0, t_swap, 0.001).unwrap();
        assert!(out.qubit_population() < 1e-4);
        assert!(out.mode_populations()[0] > 0.9999);
    }

    #[test]
    fn step_limit_is_numerical_error() {
        let l = lattice(3);
        let err = evolve_time_dependent(&SingleExcitationState::photon(7, 3), &l, &[nn(0.5, 0.0)], None, 0.0, 1e6, 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn reset_examples() {
        let s = SingleExcitationState::photon(3, 1);
        assert_eq!(reset_qubit(&s), s);

        let mut s = SingleExcitationState::vacuum(3);
        s.c_vac = C64::new(0.0, 0.0);
        s.c_q = C64::new(0.6, 0.0);
        s.c_modes[2] = C64::new(0.0, 0.8);
        let r = reset_qubit(&s);
        assert_abs_diff_eq!(r.p_lost, 0.36, epsilon = 1e-15);
        assert_eq!(r.c_modes, s.c_modes);
        assert!(r.check_normalized(1e-12).is_ok());
    }

    #[test]
    fn schedule_edge_cases() {
        let l = lattice(2);
        let s = SingleExcitationState::photon(5, 2);
        let sched = Schedule::new(l.clone(), vec![], 0.1).unwrap();
        let traj = run_schedule(&s, &sched, &DecoherenceParams::disabled()).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj[0].0, 0.0);

        let tones = vec![nn(0.5, -0.2)];
        let sched = Schedule::new(l.clone(), vec![Segment::rwa(1.234, tones.clone(), -0.2, "mod")], 0.1).unwrap();
        let traj = run_schedule(&s, &sched, &DecoherenceParams::disabled()).unwrap();
        let h = build_rwa_hamiltonian(&l, &tones, -0.2).unwrap();
        let direct = evolve_static(&s, &h, 1.234).unwrap();
        let (t_end, end) = traj.last().unwrap();
        assert_abs_diff_eq!(*t_end, 1.234, epsilon = 1e-12);
        assert!((end.c_modes.clone() - direct.c_modes).norm() < 1e-12);
        assert_eq!(traj.len(), 14);

        assert!(Schedule::new(l, vec![], 0.0).is_err());
    }

    #[test]
    fn decoherence_single_time_constant() {
        let l = lattice(2);
        let deco = DecoherenceParams::new(29.1, 58.2, 20.0).unwrap();
        let sched = Schedule::new(l, vec![Segment::rwa(29.1, vec![], 0.0, "idle")], 0.1).unwrap();
        let traj = run_schedule(&SingleExcitationState::photon(5, 2), &sched, &deco).unwrap();
        let end = &traj.last().unwrap().1;
        assert_abs_diff_eq!(end.photon_population(), (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(end.p_lost, 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        assert!(end.check_normalized(1e-12).is_ok());
    }

    #[test]
    fn pure_dephasing_only_touches_coherence() {
        let deco = DecoherenceParams::new(29.1, 57.9, 20.0).unwrap();
        assert!(deco.pure_dephasing_rate() > 0.0);
        let mut s = SingleExcitationState::photon(3, 1);
        deco.apply(&mut s, 29.1);
        assert_abs_diff_eq!(s.photon_population(), (-1.0f64).exp(), epsilon = 1e-12);
        assert!(s.vacuum_coherence < 1.0);
        assert!(DecoherenceParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lab_hamiltonian_hermitian() {
        let l = lattice(4);
        let c = QubitCoupler::new(4325.0, 2.0, CouplingScaling::SqrtOmega).unwrap();
        let tones = [nn(0.4, 0.1), DriveTone::resonant(2, 7.33, 0.1, 0.2, 0.3).unwrap()];
        for &t in &[0.0, 0.11, 3.7] {
            let h = build_lab_hamiltonian(&l, &tones, Some(&c), t).unwrap();
            assert!(h.hermiticity_error() < 1e-12);
        }
    }
}
