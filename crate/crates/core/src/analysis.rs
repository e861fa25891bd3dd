//! Reductions from trajectories to band maps, fits and scalar metrics.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix3, Vector3};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::{Error, Result, C64};

/// Time-axis zero-padding factor of the band transform.
pub const BAND_TIME_PADDING: usize = 4;
/// Zero-padding factor used when locating the dominant oscillation frequency.
pub const PERIOD_PADDING: usize = 8;
pub const FIT_MAX_ITERATIONS: usize = 200;
pub const FIT_TOLERANCE: f64 = 1e-10;

/// Spectral density over quasimomentum and rotating-frame frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMap {
    /// Quasimomenta in radians per site, ascending within `(-π, π]`.
    pub k_grid: Vec<f64>,
    /// Frequencies in MHz, ascending.
    pub omega_grid: Vec<f64>,
    /// `|transform|²` with shape `(k, ω)`, maximum 1.
    pub intensity: DMatrix<f64>,
    /// Peak frequency for each `k` column.
    pub ridge: Vec<(f64, f64)>,
}

impl BandMap {
    /// Spacing of the frequency grid in MHz.
    pub fn omega_step(&self) -> f64 {
        self.omega_grid[1] - self.omega_grid[0]
    }

    /// Ridge frequency at the grid column nearest `k`.
    pub fn ridge_at(&self, k: f64) -> f64 {
        self.ridge.iter().min_by(|a, b| (a.0 - k).abs().total_cmp(&(b.0 - k).abs())).map(|r| r.1).unwrap_or(f64::NAN)
    }

    /// `max_k |ω(k) - ω(-k)|` over grid points whose mirror is on the grid.
    pub fn ridge_asymmetry(&self) -> f64 {
        let step = TAU / self.k_grid.len() as f64;
        self.ridge
            .iter()
            .filter_map(|&(k, w)| {
                self.ridge.iter().find(|(k2, _)| (k2 + k).abs() < 0.25 * step).map(|&(_, w2)| (w - w2).abs())
            })
            .fold(0.0, f64::max)
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain("sample times must increase".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::Domain(format!(
                "non-uniform sampling: step {} differs from mean step {dt}",
                w[1] - w[0]
            )));
        }
    }
    Ok(dt)
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 0.5 * (1.0 - (TAU * i as f64 / (n - 1) as f64).cos())).collect()
}

/// Position of the maximum refined by a parabola through its neighbours,
/// returned as a fractional index.
fn parabolic_peak(values: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= values.len() {
        return i as f64;
    }
    let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::MIN_POSITIVE {
        return i as f64;
    }
    let delta = 0.5 * (a - c) / denom;
    i as f64 + delta.clamp(-0.5, 0.5)
}

fn argmax(values: &[f64]) -> usize {
    values.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc }).0
}

/// Two-dimensional transform of `ψ(m, t)` (rows are modes, columns are the
/// uniformly spaced `times`). A plane wave `exp(i(k m - 2π f t))` maps to a
/// peak at `(k, f)`.
pub fn band_from_wavefunction(psi: &DMatrix<C64>, times: &[f64]) -> Result<BandMap> {
    let (n_modes, n_t) = psi.shape();
    if n_modes < 8 {
        return Err(Error::Domain(format!("band map needs at least 8 modes, got {n_modes}")));
    }
    if n_t < 16 || times.len() != n_t {
        return Err(Error::Domain(format!("band map needs at least 16 time samples matching psi, got {n_t}")));
    }
    let dt = uniform_step(times)?;
    let n_pad = BAND_TIME_PADDING * n_t;
    let window = hann(n_t);

    let mut planner = FftPlanner::<f64>::new();
    // e^{+i 2π f t} over time, then e^{-i k m} over modes
    let time_fft = planner.plan_fft_inverse(n_pad);
    let mode_fft = planner.plan_fft_forward(n_modes);

    let mut spectrum = DMatrix::<C64>::zeros(n_modes, n_pad);
    let mut row = vec![C64::new(0.0, 0.0); n_pad];
    for m in 0..n_modes {
        row.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
        for t in 0..n_t {
            row[t] = psi[(m, t)] * window[t];
        }
        time_fft.process(&mut row);
        for j in 0..n_pad {
            spectrum[(m, j)] = row[j];
        }
    }
    let mut col = vec![C64::new(0.0, 0.0); n_modes];
    for j in 0..n_pad {
        for m in 0..n_modes {
            col[m] = spectrum[(m, j)];
        }
        mode_fft.process(&mut col);
        for q in 0..n_modes {
            spectrum[(q, j)] = col[q];
        }
    }

    let mut k_order: Vec<(f64, usize)> =
        (0..n_modes).map(|q| (crate::model::wrap_angle(TAU * q as f64 / n_modes as f64), q)).collect();
    k_order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w_order: Vec<(f64, usize)> = (0..n_pad)
        .map(|j| {
            let signed = if j < n_pad.div_ceil(2) { j as f64 } else { j as f64 - n_pad as f64 };
            (signed / (n_pad as f64 * dt), j)
        })
        .collect();
    w_order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut intensity = DMatrix::<f64>::zeros(n_modes, n_pad);
    for (a, &(_, q)) in k_order.iter().enumerate() {
        for (b, &(_, j)) in w_order.iter().enumerate() {
            intensity[(a, b)] = spectrum[(q, j)].norm_sqr();
        }
    }
    let max = intensity.max();
    if max > 0.0 {
        intensity /= max;
    }

    let k_grid: Vec<f64> = k_order.iter().map(|p| p.0).collect();
    let omega_grid: Vec<f64> = w_order.iter().map(|p| p.0).collect();
    let d_omega = 1.0 / (n_pad as f64 * dt);
    let ridge = k_grid
        .iter()
        .enumerate()
        .map(|(a, &k)| {
            let line: Vec<f64> = intensity.row(a).iter().copied().collect();
            let pos = parabolic_peak(&line, argmax(&line));
            (k, omega_grid[0] + pos * d_omega)
        })
        .collect();

    Ok(BandMap { k_grid, omega_grid, intensity, ridge })
}

/// Least-squares Lorentzian envelope `A (Γ/2)² / ((x - x₀)² + (Γ/2)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzianFit {
    /// Peak position in site units.
    pub center: f64,
    /// Full width at half maximum in MHz.
    pub fwhm: f64,
    pub peak: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

fn lorentz_eval(p: &Vector3<f64>, x: f64) -> (f64, Vector3<f64>) {
    let (a, x0, g) = (p[0], p[1], p[2]);
    let u = x - x0;
    let d = u * u + g * g;
    let f = a * g * g / d;
    let grad = Vector3::new(g * g / d, 2.0 * a * g * g * u / (d * d), 2.0 * a * g * u * u / (d * d));
    (f, grad)
}

fn lorentz_cost(p: &Vector3<f64>, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - lorentz_eval(p, x).0).powi(2)).sum()
}

/// Fit populations sampled at `sites` (mode indices) on a lattice with the
/// given spacing in MHz. Levenberg–Marquardt, started from the empirical
/// peak and half-maximum crossings.
pub fn lorentzian_fit(sites: &[f64], populations: &[f64], spacing_mhz: f64) -> Result<LorentzianFit> {
    if sites.len() != populations.len() {
        return Err(Error::Fit(format!("{} sites but {} populations", sites.len(), populations.len())));
    }
    if sites.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 points, got {}", sites.len())));
    }
    if !(spacing_mhz.is_finite() && spacing_mhz > 0.0) || populations.iter().any(|p| !p.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let xs: Vec<f64> = sites.iter().map(|s| s * spacing_mhz).collect();
    let ys = populations;
    let i_max = argmax(ys);
    let y_max = ys[i_max];
    let support = ys.iter().filter(|&&y| y > 1e-12 * y_max.abs()).count();
    if y_max <= 0.0 || support < 3 {
        return Err(Error::Fit(format!("insufficient support: {support} nonzero points")));
    }

    let half = 0.5 * y_max;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = i_max;
        for i in range {
            if ys[i] < half {
                let t = (ys[prev] - half) / (ys[prev] - ys[i]);
                return Some(xs[prev] + t * (xs[i] - xs[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..i_max).rev());
    let right = crossing(&mut (i_max + 1..xs.len()));
    let x0 = xs[i_max];
    let width = match (left, right) {
        (Some(l), Some(r)) => (r - l).abs(),
        (Some(l), None) => 2.0 * (x0 - l).abs(),
        (None, Some(r)) => 2.0 * (r - x0).abs(),
        (None, None) => xs[xs.len() - 1] - xs[0],
    }
    .max(spacing_mhz);

    let mut p = Vector3::new(y_max, x0, 0.5 * width);
    let mut cost = lorentz_cost(&p, &xs, ys);
    let mut lambda = 1e-3;
    for iter in 1..=FIT_MAX_ITERATIONS {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&x, &y) in xs.iter().zip(ys) {
            let (f, g) = lorentz_eval(&p, x);
            jtj += g * g.transpose();
            jtr += g * (y - f);
        }
        loop {
            let mut a = jtj;
            for d in 0..3 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    return Err(Error::Fit("normal equations singular".into()));
                }
                continue;
            };
            let trial = p + step;
            let trial_cost = if trial[2] > 0.0 { lorentz_cost(&trial, &xs, ys) } else { f64::INFINITY };
            if trial_cost <= cost {
                // the centre has no natural scale of its own; measure it against the width
                let scale = [p[0].abs(), p[2].abs(), p[2].abs()];
                let rel = (0..3).map(|d| step[d].abs() / scale[d].max(1e-300)).fold(0.0, f64::max);
                p = trial;
                cost = trial_cost;
                lambda = (lambda * 0.1).max(1e-15);
                if rel < FIT_TOLERANCE || cost == 0.0 {
                    return Ok(finish(&p, cost, xs.len(), spacing_mhz, iter));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no descent direction left at working precision
                return Ok(finish(&p, cost, xs.len(), spacing_mhz, iter));
            }
        }
    }
    Err(Error::Fit(format!(
        "no convergence after {FIT_MAX_ITERATIONS} iterations (A={:.4}, x0={:.4}, Γ={:.4}, cost={cost:.3e})",
        p[0],
        p[1],
        2.0 * p[2]
    )))
}

fn finish(p: &Vector3<f64>, cost: f64, n: usize, spacing: f64, iterations: usize) -> LorentzianFit {
    LorentzianFit {
        center: p[1] / spacing,
        fwhm: 2.0 * p[2].abs(),
        peak: p[0],
        residual_rms: (cost / n as f64).sqrt(),
        iterations,
    }
}

/// `Σ m p(m)`, divided by `Σ p(m)` when `renormalize` is set.
pub fn center_of_mass(sites: &[i64], populations: &[f64], renormalize: bool) -> Result<f64> {
    if sites.len() != populations.len() {
        return Err(Error::Domain(format!("{} sites but {} populations", sites.len(), populations.len())));
    }
    let total: f64 = populations.iter().sum();
    if total <= 0.0 {
        return Err(Error::Domain("center of mass of zero total population".into()));
    }
    let first: f64 = sites.iter().zip(populations).map(|(&m, &p)| m as f64 * p).sum();
    Ok(if renormalize { first / total } else { first })
}

/// Root-mean-square distance from `center`, normalized by total population.
pub fn spread(sites: &[i64], populations: &[f64], center: f64) -> Result<f64> {
    let total: f64 = populations.iter().sum();
    if total <= 0.0 {
        return Err(Error::Domain("spread of zero total population".into()));
    }
    let second: f64 = sites.iter().zip(populations).map(|(&m, &p)| (m as f64 - center).powi(2) * p).sum();
    Ok((second / total).sqrt())
}

/// Period of the dominant oscillation in a uniformly sampled series, from
/// the zero-padded spectrum of the mean-subtracted data with parabolic peak
/// refinement.
pub fn bloch_period_estimate(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::Estimation("times and values differ in length".into()));
    }
    if times.len() < 8 {
        return Err(Error::Estimation(format!("series too short: {} samples", times.len())));
    }
    let dt = uniform_step(times).map_err(|e| Error::Estimation(e.to_string()))?;
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let n_pad = PERIOD_PADDING * n;
    let mut buf: Vec<C64> = values.iter().map(|v| C64::new(v - mean, 0.0)).collect();
    buf.resize(n_pad, C64::new(0.0, 0.0));
    FftPlanner::<f64>::new().plan_fft_forward(n_pad).process(&mut buf);

    // positive frequencies, DC excluded
    let mags: Vec<f64> = buf[1..n_pad / 2].iter().map(|c| c.norm()).collect();
    let i = argmax(&mags);
    let peak = mags[i];
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if peak <= 1e-12 * scale * n as f64 || peak < 3.0 * median {
        return Err(Error::Estimation(format!("no significant spectral peak (peak {peak:.3e}, median {median:.3e})")));
    }
    let bin = parabolic_peak(&mags, i) + 1.0;
    Ok(n_pad as f64 * dt / bin)
}

/// `Σ_{m,t} |p(c+m, t) - p(c-m, t)| / Σ_{m,t} p(m, t)` with `c` the initial
/// center of mass rounded to a site. Mirror sites outside the window count
/// as empty.
pub fn asymmetry_metric(sites: &[i64], populations: &DMatrix<f64>) -> Result<f64> {
    let (n_modes, n_t) = populations.shape();
    if n_modes != sites.len() || n_t == 0 {
        return Err(Error::Domain("population map does not match site list".into()));
    }
    let first: Vec<f64> = populations.column(0).iter().copied().collect();
    let center = center_of_mass(sites, &first, true)?.round() as i64;
    let index: std::collections::HashMap<i64, usize> = sites.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let mut diff = 0.0;
    for (i, &m) in sites.iter().enumerate() {
        let mirror = index.get(&(2 * center - m));
        for t in 0..n_t {
            let p = populations[(i, t)];
            let q = mirror.map_or(0.0, |&j| populations[(j, t)]);
            diff += (p - q).abs();
        }
    }
    let total = populations.sum();
    if total <= 0.0 {
        return Err(Error::Domain("asymmetry of an empty population map".into()));
    }
    Ok(diff / total)
}

/// Mean quasimomentum direction helper: wraps `x` to `(-π, π]` relative to 0.
pub fn principal_k(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plane_wave(n_modes: usize, n_t: usize, dt: f64, k0: f64, f0: f64) -> (DMatrix<C64>, Vec<f64>) {
        let times: Vec<f64> = (0..n_t).map(|i| i as f64 * dt).collect();
        let psi = DMatrix::from_fn(n_modes, n_t, |m, t| C64::from_polar(1.0, k0 * m as f64 - TAU * f0 * times[t]));
        (psi, times)
    }

    #[test]
    fn plane_wave_single_peak() {
        let n = 16;
        let k0 = TAU * 3.0 / n as f64;
        let (psi, times) = plane_wave(n, 64, 0.05, k0, 1.3);
        let map = band_from_wavefunction(&psi, &times).unwrap();
        let (mut ia, mut ib) = (0, 0);
        let mut best = 0.0;
        for a in 0..map.k_grid.len() {
            for b in 0..map.omega_grid.len() {
                if map.intensity[(a, b)] > best {
                    best = map.intensity[(a, b)];
                    ia = a;
                    ib = b;
                }
            }
        }
        assert_abs_diff_eq!(best, 1.0);
        assert_abs_diff_eq!(map.k_grid[ia], k0, epsilon = 1e-12);
        assert!((map.omega_grid[ib] - 1.3).abs() <= map.omega_step());
        assert!((map.ridge_at(k0) - 1.3).abs() < map.omega_step());
        assert!(map.intensity.iter().all(|&v| v >= 0.0));
        assert!(map.k_grid[0] > -PI && *map.k_grid.last().unwrap() <= PI);
    }

    #[test]
    fn band_rejects_bad_sampling() {
        let (psi, mut times) = plane_wave(8, 16, 0.1, 0.0, 0.0);
        times[5] += 0.03;
        assert!(matches!(band_from_wavefunction(&psi, &times), Err(Error::Domain(_))));
        let (psi, times) = plane_wave(4, 16, 0.1, 0.0, 0.0);
        assert!(band_from_wavefunction(&psi, &times).is_err());
        let (psi, times) = plane_wave(8, 8, 0.1, 0.0, 0.0);
        assert!(band_from_wavefunction(&psi, &times).is_err());
    }

    #[test]
    fn band_peak_is_phase_invariant_and_shifts_with_momentum() {
        let n = 12;
        let (psi, times) = plane_wave(n, 48, 0.05, TAU * 2.0 / n as f64, -0.8);
        let base = band_from_wavefunction(&psi, &times).unwrap();
        let peak = |map: &BandMap| {
            let (i, j) = map.intensity.iamax_full();
            (map.k_grid[i], map.omega_grid[j])
        };
        let rotated = psi.map(|c| c * C64::from_polar(1.0, 0.7));
        let r = band_from_wavefunction(&rotated, &times).unwrap();
        assert_eq!(peak(&base), peak(&r));

        let shift = TAU * 3.0 / n as f64;
        let boosted = DMatrix::from_fn(n, 48, |m, t| psi[(m, t)] * C64::from_polar(1.0, shift * m as f64));
        let b = band_from_wavefunction(&boosted, &times).unwrap();
        assert_abs_diff_eq!(principal_k(peak(&b).0 - peak(&base).0), shift, epsilon = 1e-12);
        assert_eq!(peak(&b).1, peak(&base).1);
    }

    fn lorentz_samples(a: f64, gamma: f64, x0_site: f64, spacing: f64) -> (Vec<f64>, Vec<f64>) {
        let sites: Vec<f64> = (-16..=16).map(|m| m as f64).collect();
        let pops = sites
            .iter()
            .map(|&m| {
                let u = (m - x0_site) * spacing;
                a * (gamma / 2.0).powi(2) / (u * u + (gamma / 2.0).powi(2))
            })
            .collect();
        (sites, pops)
    }

    #[test]
    fn lorentzian_recovers_exact_samples() {
        let (sites, pops) = lorentz_samples(0.27, 31.0, 0.0, 7.33);
        let fit = lorentzian_fit(&sites, &pops, 7.33).unwrap();
        assert!((fit.peak - 0.27).abs() / 0.27 < 1e-6);
        assert!((fit.fwhm - 31.0).abs() / 31.0 < 1e-6);
        assert!(fit.center.abs() < 1e-6);
        assert!(fit.residual_rms < 1e-9);

        let (sites, pops) = lorentz_samples(0.4, 12.0, 1.3, 7.33);
        let fit = lorentzian_fit(&sites, &pops, 7.33).unwrap();
        assert!((fit.fwhm - 12.0).abs() / 12.0 < 1e-6);
        assert!((fit.center - 1.3).abs() < 1e-6);
    }

    #[test]
    fn lorentzian_degenerate_inputs() {
        let sites: Vec<f64> = (0..7).map(f64::from).collect();
        let mut pops = vec![0.0; 7];
        pops[3] = 1.0;
        assert!(matches!(lorentzian_fit(&sites, &pops, 7.33), Err(Error::Fit(_))));
        assert!(lorentzian_fit(&sites[..4], &pops[..4], 7.33).is_err());
    }

    #[test]
    fn lorentzian_scale_equivariance() {
        let (sites, mut pops) = lorentz_samples(0.3, 20.0, 0.4, 7.33);
        // perturb so the fit is not exact
        for (i, p) in pops.iter_mut().enumerate() {
            *p *= 1.0 + 0.05 * ((i * 7) % 5) as f64 / 5.0;
        }
        let a = lorentzian_fit(&sites, &pops, 7.33).unwrap();
        let scaled: Vec<f64> = pops.iter().map(|p| 2.5 * p).collect();
        let b = lorentzian_fit(&sites, &scaled, 7.33).unwrap();
        assert_abs_diff_eq!(b.peak, 2.5 * a.peak, epsilon = 1e-9);
        assert_abs_diff_eq!(b.center, a.center, epsilon = 1e-9);
        assert_abs_diff_eq!(b.fwhm, a.fwhm, epsilon = 1e-9);
    }

    #[test]
    fn center_of_mass_examples() {
        let sites: Vec<i64> = (-3..=3).collect();
        let mut p = vec![0.0; 7];
        p[6] = 1.0;
        assert_eq!(center_of_mass(&sites, &p, true).unwrap(), 3.0);
        let mut p = vec![0.0; 7];
        p[2] = 0.5;
        p[4] = 0.5;
        assert_eq!(center_of_mass(&sites, &p, true).unwrap(), 0.0);
        assert!(center_of_mass(&sites, &[0.0; 7], true).is_err());
        let mut p = vec![0.0; 7];
        p[5] = 0.5;
        assert_eq!(center_of_mass(&sites, &p, false).unwrap(), 1.0);
        assert_eq!(center_of_mass(&sites, &p, true).unwrap(), 2.0);
    }

    #[test]
    fn period_of_sinusoid() {
        let times: Vec<f64> = (0..=300).map(|i| i as f64 * 0.05).collect();
        let vals: Vec<f64> = times.iter().map(|t| (TAU * t / 5.0).sin()).collect();
        let p = bloch_period_estimate(&times, &vals).unwrap();
        assert!((p - 5.0).abs() < 0.1, "{p}");
        let shifted: Vec<f64> = vals.iter().map(|v| v + 17.0).collect();
        assert_abs_diff_eq!(bloch_period_estimate(&times, &shifted).unwrap(), p, epsilon = 1e-9);
    }

    #[test]
    fn period_of_constant_fails() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        assert!(matches!(bloch_period_estimate(&times, &[2.0; 100]), Err(Error::Estimation(_))));
    }

    #[test]
    fn asymmetry_of_mirror_map_is_zero() {
        let sites: Vec<i64> = (-2..=2).collect();
        let p = DMatrix::from_row_slice(5, 2, &[0.1, 0.0, 0.2, 0.3, 0.4, 0.4, 0.2, 0.3, 0.1, 0.0]);
        assert_eq!(asymmetry_metric(&sites, &p).unwrap(), 0.0);
        let q = DMatrix::from_row_slice(5, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.5, 0.0, 0.0]);
        assert_abs_diff_eq!(asymmetry_metric(&sites, &q).unwrap(), 0.5, epsilon = 1e-15);
    }
}
