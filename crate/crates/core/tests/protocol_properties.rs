use std::f64::consts::PI;

use synfreq::analysis::{asymmetry_metric, bloch_period_estimate, lorentzian_fit};
use synfreq::evolution::DecoherenceParams;
use synfreq::model::ModeLattice;
use synfreq::protocols::{
    prepare_single_site, prepare_wave_packet, readout_mode, run_experiment, DriveProgram, EvolutionFrame,
    ExperimentConfig, Preparation,
};

fn single_tone(detuning: f64, strength: f64) -> DriveProgram {
    DriveProgram::SingleTone { order: 1, detuning, strength, phase: PI }
}

fn site_config(drive: DriveProgram, total: f64) -> ExperimentConfig {
    ExperimentConfig::standard(Preparation::SingleSite { site: 0 }, drive, total).unwrap()
}

#[test]
fn prepare_then_read_out_round_trips_every_mode() {
    let cfg = site_config(single_tone(0.0, 0.5), 1.0);
    for m in cfg.lattice.sites() {
        let s = prepare_single_site(&cfg, m).unwrap();
        let p1 = readout_mode(&cfg, &s, m).unwrap();
        assert!(p1 >= 0.98, "mode {m}: {p1}");
    }
}

#[test]
fn detuning_sign_mirrors_the_population_map() {
    let a = run_experiment(&site_config(single_tone(-0.2, 0.5), 6.0)).unwrap();
    let b = run_experiment(&site_config(single_tone(0.2, 0.5), 6.0)).unwrap();
    let n = a.map.modes.len();
    for t in 0..a.map.times.len() {
        for i in 0..n {
            assert!((a.map.p[(i, t)] - b.map.p[(n - 1 - i, t)]).abs() < 1e-6);
        }
    }
}

#[test]
fn zero_drive_keeps_site_population() {
    let r = run_experiment(&site_config(single_tone(0.0, 0.0), 5.0)).unwrap();
    let first = r.map.column(0);
    for t in 0..r.map.times.len() {
        for (a, b) in r.map.column(t).iter().zip(&first) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn bloch_state_recurs_after_one_period() {
    let d = 0.2;
    let mut cfg = site_config(single_tone(-d, 0.5), 1.0 / d);
    cfg.readout.dt = 1.0 / d;
    let r = run_experiment(&cfg).unwrap();
    let overlap: f64 = r.map.column(0).iter().zip(r.map.column(1)).map(|(a, b)| (a * b).sqrt()).sum();
    assert!(overlap.powi(2) >= 0.99, "{overlap}");
}

#[test]
fn bloch_breathing_period() {
    let r = run_experiment(&site_config(single_tone(-0.2, 0.5), 15.0)).unwrap();
    let t = bloch_period_estimate(&r.map.times, &r.map.spread_series().unwrap()).unwrap();
    assert!((t - 5.0).abs() < 0.2, "{t}");
}

#[test]
fn flux_pi_is_mirror_symmetric_and_off_pi_is_not() {
    let sites: Vec<i64> = (-16..=16).collect();
    let run = |phi2: f64| {
        let drive = DriveProgram::DoubleTone { detuning: 0.0, g1: 0.5, phi1: PI, g2: 0.25, phi2 };
        asymmetry_metric(&sites, &run_experiment(&site_config(drive, 5.0)).unwrap().map.p).unwrap()
    };
    let sym = run(PI);
    let asym = run(PI / 2.0);
    assert!(sym < 1e-9, "{sym}");
    assert!(asym > 0.5, "{asym}");
}

#[test]
fn wave_packet_is_symmetric_and_single_peaked() {
    let cfg = ExperimentConfig::standard(Preparation::WavePacket, single_tone(0.0, 0.5), 1.0).unwrap();
    let wp = prepare_wave_packet(&cfg).unwrap();
    assert!(wp.residual_p1 < 0.01 && wp.warning.is_none());
    let p = wp.state.mode_populations();
    for i in 0..p.len() {
        assert!((p[i] - p[p.len() - 1 - i]).abs() < 1e-9);
    }
    let sites: Vec<f64> = cfg.lattice.sites().map(|m| m as f64).collect();
    let fit = lorentzian_fit(&sites, &p, cfg.lattice.fsr()).unwrap();
    assert!(fit.center.abs() < 1e-6);
    assert!(fit.fwhm > 12.0 && fit.fwhm < 45.0);
}

#[test]
fn weak_coupling_wave_packet_stays_in_one_mode() {
    let mut cfg = ExperimentConfig::standard(Preparation::WavePacket, single_tone(0.0, 0.5), 1.0).unwrap();
    cfg.coupler = cfg.coupler.with_kappa(0.01).unwrap();
    cfg.emission_cap = 30.0;
    let wp = prepare_wave_packet(&cfg).unwrap();
    assert!(wp.state.mode_populations()[16] > 0.98);
}

#[test]
fn emission_cap_attaches_warning() {
    let mut cfg = ExperimentConfig::standard(Preparation::WavePacket, single_tone(0.0, 0.5), 1.0).unwrap();
    cfg.coupler = cfg.coupler.with_kappa(0.01).unwrap();
    cfg.emission_cap = 1.0;
    let wp = prepare_wave_packet(&cfg).unwrap();
    assert!(wp.warning.is_some());
    assert_eq!(wp.emission_time, 1.0);
}

#[test]
fn lab_and_rwa_runs_agree_for_weak_drive() {
    let drive = single_tone(0.0, 0.01 * 7.33);
    let mut cfg = site_config(drive, 3.0);
    cfg.lattice = ModeLattice::symmetric(6, 4320.0, 7.33).unwrap();
    cfg.readout.dt = 0.25;
    let rwa = run_experiment(&cfg).unwrap();
    cfg.frame = EvolutionFrame::Lab;
    let lab = run_experiment(&cfg).unwrap();
    for t in 0..rwa.map.times.len() {
        let tv: f64 = 0.5 * rwa.map.column(t).iter().zip(lab.map.column(t)).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.05, "t={} tv={tv}", rwa.map.times[t]);
    }
}

#[test]
fn reversal_lab_run_tracks_rwa_chain() {
    let drive = DriveProgram::Reversal { order: 1, detuning: -0.2, strength: 0.1, phase: PI, half_period: 0.5 };
    let mut cfg = site_config(drive, 1.5);
    cfg.lattice = ModeLattice::symmetric(6, 4320.0, 7.33).unwrap();
    cfg.readout.dt = 0.5;
    let rwa = run_experiment(&cfg).unwrap();
    cfg.frame = EvolutionFrame::Lab;
    let lab = run_experiment(&cfg).unwrap();
    let last = rwa.map.times.len() - 1;
    let tv: f64 = 0.5 * rwa.map.column(last).iter().zip(lab.map.column(last)).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv < 0.02, "{tv}");
}

#[test]
fn decoherence_drains_population_with_t1() {
    let mut cfg = site_config(single_tone(0.0, 0.0), 29.1);
    cfg.deco = DecoherenceParams::new(29.1, 57.9, 20.0).unwrap();
    cfg.readout.dt = 29.1;
    let r = run_experiment(&cfg).unwrap();
    let idx = 16;
    let ratio = r.map.p[(idx, 1)] / r.map.p[(idx, 0)];
    assert!((ratio - (-1.0f64).exp()).abs() < 1e-6, "{ratio}");
}

#[test]
fn shot_sampling_is_seeded() {
    let mut cfg = site_config(single_tone(0.0, 0.5), 1.0);
    cfg.shots = 200;
    cfg.seed = 7;
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.map.p1_readout, b.map.p1_readout);
    cfg.seed = 8;
    let c = run_experiment(&cfg).unwrap();
    assert_ne!(a.map.p1_readout, c.map.p1_readout);
    for v in a.map.p1_readout.iter() {
        assert!((0.0..=1.0).contains(v) && (v * 200.0 - (v * 200.0).round()).abs() < 1e-9);
    }
}
