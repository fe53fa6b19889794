//! Readout suite: power Rabi (with the readout-frequency map), simultaneous
//! two-qubit readout, and single-shot statistics.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::detection::{fit_damped_cosine, fit_line, Discriminator};
use crate::error::{Error, Result};
use crate::qubit::{BlochState, PulseSpec};
use crate::signal::{power_spectrum_bins, spectral_peaks, IQPoint};
use crate::transducer::PumpTone;

use super::chain::{DrivePath, ReadoutChain, ReadoutChannel};
use super::config::LinkConfig;
use super::result::{ExperimentResult, Trace};
use super::{averaged_readout, stream, Stream};

/// How the pump follows a readout-frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpPolicy {
    /// Retune the pump so the channel center sits on each readout frequency.
    Tracked,
    /// Keep the configured pump.
    Fixed,
}

/// Upconverted readout frequencies for the 2-D power Rabi map.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutSweep {
    pub freqs: Vec<f64>,
    pub pump: PumpPolicy,
    pub shots: usize,
}

impl ReadoutSweep {
    pub fn from_config(cfg: &LinkConfig, pump: PumpPolicy) -> Self {
        Self { freqs: cfg.characterization.rabi_map_freqs.values(), pump, shots: cfg.characterization.rabi_map_shots }
    }
}

fn excited_after(drive: &DrivePath, q: &crate::qubit::QubitParams, amplitude: f64) -> f64 {
    drive
        .pulse_map(q, &PulseSpec::gaussian(q.ref_pulse_duration, amplitude, 0.0), 0.0)
        .apply(&BlochState::ground())
        .p_excited()
}

/// Fitted Rabi period expressed as the π amplitude.
fn pi_amplitude(xs: &[f64], pops: &[f64]) -> Result<(f64, f64, crate::detection::FitResult)> {
    let fit = fit_damped_cosine(xs, pops)?;
    let f = fit.value("freq");
    Ok((0.5 / f, 0.5 * fit.stderr("freq") / (f * f), fit))
}

/// Power Rabi on one qubit: per amplitude (fraction of `pi_amp`) the
/// averaged demodulated IQ, its magnitude and the inferred population.
pub fn run_power_rabi(
    cfg: &LinkConfig,
    qubit_index: usize,
    amplitudes: &[f64],
    sweep: Option<&ReadoutSweep>,
) -> Result<ExperimentResult> {
    if amplitudes.is_empty() {
        return Err(Error::InvalidArgument("power Rabi needs at least one amplitude".into()));
    }
    cfg.validate()?;
    let channel = cfg.qubit(qubit_index)?;
    let q = channel.qubit;
    let drive = DrivePath::new(cfg, cfg.io_mode, &q)?;
    let chain = ReadoutChain::new(cfg, &[qubit_index])?;
    let disc = chain.discriminator(0)?;
    let mut result = ExperimentResult::new("power_rabi", cfg)?;
    for w in chain.warnings() {
        result.warn(w.clone());
    }
    let p_e: Vec<f64> = amplitudes.iter().map(|&a| excited_after(&drive, &q, a)).collect();
    let shots = cfg.protocol.rabi_shots;
    let (mut is, mut qs, mut mags, mut pops) = (vec![], vec![], vec![], vec![]);
    for (i, &p) in p_e.iter().enumerate() {
        let mut rng = stream(cfg, Stream::Rabi, &[qubit_index as u64, i as u64]);
        let m = averaged_readout(&chain, &[p], shots, &mut rng)[0];
        is.push(m.i);
        qs.push(m.q);
        mags.push(m.norm());
        pops.push(disc.population(m));
    }
    result.raw.insert("population".into(), pops.clone());
    result.summary.insert(
        "rabi".into(),
        Trace::new("amplitude (π units)", amplitudes.to_vec())
            .with("population", pops.clone())
            .with("p_excited_expected", p_e),
    );
    result.summary.insert(
        "rabi_iq".into(),
        Trace::new("amplitude (π units)", amplitudes.to_vec()).with("i", is).with("q", qs).with("magnitude", mags),
    );
    if amplitudes.len() >= 8 {
        let (pi, pi_err, fit) = pi_amplitude(amplitudes, &pops)?;
        result.scalars.insert("fitted_pi_amplitude".into(), pi);
        result.scalars.insert("fitted_pi_amplitude_stderr".into(), pi_err);
        result.fits.insert("rabi".into(), fit);
    }
    result.scalars.insert("separation_snr".into(), chain.separation_snr(0));
    if let Some(sw) = sweep {
        rabi_map(cfg, qubit_index, amplitudes, sw, &drive, &chain, &mut result)?;
    }
    Ok(result)
}

fn rabi_map(
    cfg: &LinkConfig,
    qubit_index: usize,
    amplitudes: &[f64],
    sweep: &ReadoutSweep,
    drive: &DrivePath,
    nominal: &ReadoutChain,
    result: &mut ExperimentResult,
) -> Result<()> {
    if !cfg.io_mode.optical_readout() {
        return Err(Error::Config(format!("a readout-frequency sweep needs optical readout, not {}", cfg.io_mode)));
    }
    let channel = cfg.qubit(qubit_index)?;
    let q = channel.qubit;
    let transducer = cfg.transducer.as_ref().ok_or_else(|| Error::Config("missing [transducer]".into()))?;
    let jpc = cfg.jpc.ok_or_else(|| Error::Config("missing [jpc]".into()))?;
    let base_pump = channel.pump.ok_or_else(|| Error::Config(format!("{} has no pump", channel.name)))?;
    let (g0, e0) = nominal.centers(0);
    let nominal_sep = (e0 - g0).norm();
    let p_e: Vec<f64> = amplitudes.iter().map(|&a| excited_after(drive, &q, a)).collect();
    let mut map = Trace::new("amplitude (π units)", amplitudes.to_vec());
    let (mut contrast, mut wavelengths) = (vec![], vec![]);
    for (fi, &f_up) in sweep.freqs.iter().enumerate() {
        let pump = match sweep.pump {
            PumpPolicy::Tracked => PumpTone {
                wavelength_nm: transducer.wavelength_for_center(f_up, cfg.uplink.temperature)?,
                ..base_pump
            },
            PumpPolicy::Fixed => base_pump,
        };
        let readout = crate::qubit::ReadoutParams { f_r: f_up - jpc.pump_freq, ..channel.readout };
        let chain = ReadoutChain::with_channels(cfg, vec![ReadoutChannel { readout, pump: Some(pump) }])?;
        let (g, e) = chain.centers(0);
        let ratio = (e - g).norm() / nominal_sep;
        let disc = Discriminator::new(g, e).ok();
        let row: Vec<f64> = p_e
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut rng = stream(cfg, Stream::RabiMap, &[qubit_index as u64, fi as u64, i as u64]);
                let m = averaged_readout(&chain, &[p], sweep.shots, &mut rng)[0];
                disc.map_or(0.0, |d| d.population(m) * ratio)
            })
            .collect();
        map.series.insert(format!("{:.4} GHz", f_up / 1e9), row);
        contrast.push(ratio);
        wavelengths.push(pump.wavelength_nm);
    }
    result.summary.insert("rabi_map".into(), map);
    result.summary.insert(
        "map_contrast".into(),
        Trace::new("readout frequency (Hz)", sweep.freqs.clone())
            .with("contrast", contrast.clone())
            .with("pump_wavelength_nm", wavelengths),
    );
    let (lo, hi) = sweep.freqs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &f| (a.0.min(f), a.1.max(f)));
    result.scalars.insert("map_span_hz".into(), hi - lo);
    result.scalars.insert("map_min_contrast".into(), contrast.iter().cloned().fold(f64::INFINITY, f64::min));
    Ok(())
}

/// Simultaneous readout of the first two qubits. Both receive the same
/// drive voltage grid (`rabi_amplitudes`, in volts at the qubit); a qubit
/// with `driven[k] == false` stays idle.
pub fn run_dual_readout(cfg: &LinkConfig, driven: &[bool]) -> Result<ExperimentResult> {
    if cfg.qubits.len() < 2 || driven.len() != 2 {
        return Err(Error::Config("dual readout needs two qubits and a drive flag for each".into()));
    }
    cfg.validate()?;
    let chain = ReadoutChain::new(cfg, &[0, 1])?;
    let mut result = ExperimentResult::new("dual_readout", cfg)?;
    for w in chain.warnings() {
        result.warn(w.clone());
    }
    let volts = cfg.protocol.rabi_amplitudes.values();
    let drives: Vec<DrivePath> =
        (0..2).map(|k| DrivePath::new(cfg, cfg.io_mode, &cfg.qubits[k].qubit)).collect::<Result<_>>()?;
    let discs: Vec<Discriminator> = (0..2).map(|k| chain.discriminator(k)).collect::<Result<_>>()?;
    let names: Vec<&str> = cfg.qubits[..2].iter().map(|c| c.name.as_str()).collect();
    let mut pops = vec![vec![]; 2];
    let mut expected = vec![vec![]; 2];
    for (i, &v) in volts.iter().enumerate() {
        let p: Vec<f64> = (0..2)
            .map(|k| {
                let q = &cfg.qubits[k].qubit;
                let a = if driven[k] { v / q.pi_amp } else { 0.0 };
                excited_after(&drives[k], q, a)
            })
            .collect();
        let mut rng = stream(cfg, Stream::Dual, &[i as u64]);
        let means = averaged_readout(&chain, &p, cfg.protocol.dual_shots, &mut rng);
        for k in 0..2 {
            pops[k].push(discs[k].population(means[k]));
            expected[k].push(p[k]);
        }
    }
    let mut trace = Trace::new("drive amplitude (V)", volts.clone());
    for k in 0..2 {
        trace.series.insert(format!("{}_population", names[k]), pops[k].clone());
        trace.series.insert(format!("{}_p_excited_expected", names[k]), expected[k].clone());
        result.raw.insert(format!("{}_population", names[k]), pops[k].clone());
        if driven[k] && volts.len() >= 8 {
            let (pi, pi_err, fit) = pi_amplitude(&volts, &pops[k])?;
            result.scalars.insert(format!("{}_fitted_pi_amplitude", names[k]), pi);
            result.scalars.insert(format!("{}_fitted_pi_amplitude_stderr", names[k]), pi_err);
            result.fits.insert(format!("{}_rabi", names[k]), fit);
        }
    }
    result.summary.insert("rabi".into(), trace);

    // Population shift on channel k from a full flip of qubit j, relative to
    // channel k's own contrast.
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        for j in 0..2 {
            if j == k {
                continue;
            }
            let rj = &chain.channels()[j].readout;
            let rk = &chain.channels()[k].readout;
            let leak = (chain.gain(k, j) * (rj.iq_e - rj.iq_g).to_complex()).norm();
            let own = (chain.gain(k, k) * (rk.iq_e - rk.iq_g).to_complex()).norm();
            let c = leak / own;
            worst = worst.max(c);
            result.scalars.insert(format!("crosstalk_{}_from_{}", names[k], names[j]), c);
            if driven[j] && !driven[k] {
                let fit = fit_line(&pops[j], &pops[k])?;
                result.scalars.insert(format!("trace_crosstalk_{}_from_{}", names[k], names[j]), fit.value("slope").abs());
                result.scalars.insert(
                    format!("trace_crosstalk_{}_from_{}_stderr", names[k], names[j]),
                    fit.stderr("slope"),
                );
            }
        }
    }
    result.scalars.insert("crosstalk_max".into(), worst);

    if cfg.io_mode.optical_readout() {
        let t = cfg.transducer.as_ref().ok_or_else(|| Error::Config("missing [transducer]".into()))?;
        let temp = cfg.uplink.temperature;
        let bw = t.bandwidth(temp);
        let centers: Vec<f64> = chain
            .channels()
            .iter()
            .map(|c| t.channel_center(c.pump.map_or(0.0, |p| p.wavelength_nm), temp))
            .collect::<Result<_>>()?;
        if (centers[0] - centers[1]).abs() < 3.0 * bw {
            result.warn(format!(
                "conversion channels at {:.6e} and {:.6e} Hz are closer than three bandwidths ({:.3e} Hz)",
                centers[0], centers[1], 3.0 * bw
            ));
        }
    }

    // Spectrum of the coherently averaged record with both qubits in |g⟩.
    let ground: Vec<IQPoint> = chain.channels().iter().map(|c| c.readout.iq_g).collect();
    let mut rng = stream(cfg, Stream::DualSpectrum, &[]);
    let scale = 1.0 / cfg.protocol.dual_shots.max(1) as f64;
    let (record, _) = chain.record(&ground, Some((&mut rng, scale)))?;
    let bins = power_spectrum_bins(&record)?;
    let sep = (chain.demod_freq(1) - chain.demod_freq(0)).abs();
    let mut peaks = spectral_peaks(&bins, 2, sep / 2.0);
    peaks.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    for (n, p) in peaks.iter().enumerate() {
        result.scalars.insert(format!("spectrum_peak_{}_hz", n + 1), p.freq);
        result.scalars.insert(format!("spectrum_peak_{}_dbm", n + 1), p.dbm());
    }
    result.summary.insert(
        "spectrum".into(),
        Trace::new("frequency (Hz)", bins.iter().map(|b| b.freq).collect())
            .with("power_dbm", bins.iter().map(|b| b.dbm().max(-300.0)).collect()),
    );
    Ok(result)
}

/// Single-shot clouds for `|g⟩` and `|e⟩` (prepared with a π pulse) at one
/// and `n_average` shots per point.
pub fn run_single_shot(cfg: &LinkConfig, qubit_index: usize, n_shots: usize, n_average: usize) -> Result<ExperimentResult> {
    if n_shots < 2 || n_average == 0 {
        return Err(Error::InvalidArgument("single-shot run needs ≥ 2 points and n_average ≥ 1".into()));
    }
    cfg.validate()?;
    let q = cfg.qubit(qubit_index)?.qubit;
    let drive = DrivePath::new(cfg, cfg.io_mode, &q)?;
    let chain = ReadoutChain::new(cfg, &[qubit_index])?;
    let disc = chain.discriminator(0)?;
    let mut result = ExperimentResult::new("single_shot", cfg)?;
    for w in chain.warnings() {
        result.warn(w.clone());
    }
    let p_states = [0.0, excited_after(&drive, &q, 1.0)];
    let snr = chain.separation_snr(0);
    result.scalars.insert("expected_separation_snr".into(), snr);
    let mut depths = vec![1];
    if n_average > 1 {
        depths.push(n_average);
    }
    let std_normal = Normal::new(0.0, 1.0).map_err(|e| Error::Internal(e.to_string()))?;
    for &depth in &depths {
        let clouds: Vec<Vec<IQPoint>> = p_states
            .iter()
            .enumerate()
            .map(|(s, &p)| {
                let mut rng = stream(cfg, Stream::SingleShot, &[qubit_index as u64, depth as u64, s as u64]);
                (0..n_shots).map(|_| averaged_readout(&chain, &[p], depth, &mut rng)[0]).collect()
            })
            .collect();
        let fidelity = disc.assignment_fidelity(&clouds[0], &clouds[1])?;
        let coords: Vec<Vec<f64>> = clouds.iter().map(|c| c.iter().map(|&p| disc.coordinate(p)).collect()).collect();
        let stats: Vec<(f64, f64)> = coords
            .iter()
            .map(|c| {
                let n = c.len() as f64;
                let m = c.iter().sum::<f64>() / n;
                (m, (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
            })
            .collect();
        let pooled = ((stats[0].1.powi(2) + stats[1].1.powi(2)) / 2.0).sqrt();
        let measured_snr = if pooled > 0.0 { (stats[1].0 - stats[0].0) / pooled } else { f64::INFINITY };
        result.scalars.insert(format!("fidelity_avg{depth}"), fidelity);
        result.scalars.insert(format!("separation_snr_avg{depth}"), measured_snr);
        result
            .scalars
            .insert(format!("expected_fidelity_avg{depth}"), std_normal.cdf(snr * (depth as f64).sqrt() / 2.0));
        result.summary.insert(format!("histogram_avg{depth}"), histogram(&coords[0], &coords[1], 60));
        result.raw_iq.insert(format!("g_avg{depth}"), clouds[0].clone());
        result.raw_iq.insert(format!("e_avg{depth}"), clouds[1].clone());
    }
    Ok(result)
}

/// Counts of the projected I quadrature for both prepared states on shared bins.
fn histogram(g: &[f64], e: &[f64], bins: usize) -> Trace {
    let (lo, hi) = g.iter().chain(e).fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let count = |xs: &[f64]| {
        let mut c = vec![0.0; bins];
        for &x in xs {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            c[k] += 1.0;
        }
        c
    };
    let centers = (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect();
    Trace::new("projected I", centers).with("g", count(g)).with("e", count(e))
}
