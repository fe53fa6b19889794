//! The two signal paths around the plant: the drive path that turns
//! commanded pulses into Bloch maps, and the readout chain that turns the
//! resonator's state-dependent response into demodulated IQ points.
//!
//! The readout chain is linear in the probe field, so every configuration is
//! characterized once by running the sampled chain without noise (`record`)
//! and shots are then drawn from the resulting gain matrix plus Gaussian
//! noise whose variance follows from the stage noise densities (`shot`).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::detection::{Discriminator, GainStage, StageLabel};
use crate::downlink::DriveCompression;
use crate::error::{Error, Result};
use crate::qubit::{amplitude_noise_average, jpc_upconvert, pulse_map_with, BlochMap, PulseSpec, QubitParams, ReadoutParams};
use crate::signal::{add_awgn_with, iq_demodulate, ComplexEnvelope, IQPoint, SimRng};
use crate::transducer::PumpTone;

use super::config::{IoMode, LinkConfig};

/// Control path from the pulse generator to the qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePath {
    pub optical: bool,
    pub compression: DriveCompression,
    /// Relative amplitude jitter per pulse.
    pub amplitude_noise: f64,
}

impl DrivePath {
    pub fn ideal() -> Self {
        Self { optical: false, compression: DriveCompression::identity(), amplitude_noise: 0.0 }
    }

    pub fn new(cfg: &LinkConfig, mode: IoMode, q: &QubitParams) -> Result<Self> {
        let mw = cfg.drive.amplitude_noise;
        if !mode.optical_drive() {
            return Ok(Self { optical: false, compression: DriveCompression::identity(), amplitude_noise: mw });
        }
        let eom = cfg.eom.as_ref().ok_or_else(|| Error::Config(format!("io mode {mode} requires [eom]")))?;
        let reference = PulseSpec::gaussian(q.ref_pulse_duration, 1.0, 0.0).envelope();
        let compression = DriveCompression::calibrate(eom, cfg.drive.pi_peak_over_vpi * eom.v_pi, &reference)?;
        let excess = cfg.drive.optical_excess_noise;
        Ok(Self { optical: true, compression, amplitude_noise: mw.hypot(excess) })
    }

    /// Pulse map averaged over the amplitude jitter.
    pub fn pulse_map(&self, q: &QubitParams, p: &PulseSpec, static_offset: f64) -> BlochMap {
        let c = self.compression;
        amplitude_noise_average(self.amplitude_noise, |s| {
            pulse_map_with(q, p, static_offset, &|a| c.delivered(a * s))
        })
    }
}

/// One demodulated readout channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutChannel {
    pub readout: ReadoutParams,
    pub pump: Option<PumpTone>,
}

#[derive(Debug, Clone)]
pub struct ReadoutChain {
    mode: IoMode,
    channels: Vec<ReadoutChannel>,
    cfg: LinkConfig,
    sample_rate: f64,
    duration: f64,
    /// Common microwave carrier of the probe record.
    carrier: f64,
    /// `gain[k][j]`: demodulated IQ on channel `k` per unit response of `j`.
    gain: Vec<Vec<Complex64>>,
    /// Per-quadrature noise std of one shot on each channel.
    sigma: Vec<f64>,
    warnings: Vec<String>,
}

impl ReadoutChain {
    /// Chain reading out the listed qubits simultaneously in `cfg.io_mode`.
    pub fn new(cfg: &LinkConfig, qubits: &[usize]) -> Result<Self> {
        let channels = qubits
            .iter()
            .map(|&k| {
                let q = cfg.qubit(k)?;
                Ok(ReadoutChannel { readout: q.readout, pump: q.pump })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_channels(cfg, channels)
    }

    pub fn with_channels(cfg: &LinkConfig, channels: Vec<ReadoutChannel>) -> Result<Self> {
        let mode = cfg.io_mode;
        cfg.validate_for(mode)?;
        if channels.is_empty() {
            return Err(Error::Config("readout needs at least one channel".into()));
        }
        let duration = channels[0].readout.probe_duration;
        if channels.iter().any(|c| c.readout.probe_duration != duration) {
            return Err(Error::Config("simultaneous probes must share one duration".into()));
        }
        if mode.optical_readout() && channels.iter().any(|c| c.pump.is_none()) {
            return Err(Error::Config("optical readout needs a pump for every channel".into()));
        }
        let carrier = channels.iter().map(|c| c.readout.f_r).sum::<f64>() / channels.len() as f64;
        let mut chain = Self {
            mode,
            channels,
            cfg: cfg.clone(),
            sample_rate: cfg.protocol.sample_rate,
            duration,
            carrier,
            gain: vec![],
            sigma: vec![],
            warnings: vec![],
        };
        let n = chain.channels.len();
        let mut gain = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for j in 0..n {
            let mut unit = vec![IQPoint::ZERO; n];
            unit[j] = IQPoint::new(1.0, 0.0);
            let (env, warnings) = chain.record(&unit, None)?;
            for w in warnings {
                if !chain.warnings.contains(&w) {
                    chain.warnings.push(w);
                }
            }
            for (k, iq) in chain.demodulate(&env)?.into_iter().enumerate() {
                gain[k][j] = iq.to_complex();
            }
        }
        chain.gain = gain;
        chain.sigma = (0..n).map(|k| chain.noise_variance(k).sqrt()).collect();
        Ok(chain)
    }

    pub fn mode(&self) -> IoMode {
        self.mode
    }

    pub fn channels(&self) -> &[ReadoutChannel] {
        &self.channels
    }

    pub fn gain(&self, k: usize, j: usize) -> Complex64 {
        self.gain[k][j]
    }

    pub fn sigma(&self, k: usize) -> f64 {
        self.sigma[k]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Frequency each channel is demodulated at.
    pub fn demod_freq(&self, k: usize) -> f64 {
        let f = self.channels[k].readout.f_r;
        if self.mode.optical_readout() {
            f + self.jpc_freq()
        } else {
            f
        }
    }

    fn jpc_freq(&self) -> f64 {
        self.cfg.jpc.map_or(0.0, |j| j.pump_freq)
    }

    fn stage(&self, label: StageLabel) -> Result<GainStage> {
        self.cfg
            .stage(label)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing {label:?} stage")))
    }

    /// Sampled chain for one record with the given per-channel resonator
    /// responses. With `noise = Some((rng, scale))` every noise density is
    /// multiplied by `scale` (1 for a single shot, `1/N` for an `N`-shot
    /// coherent average).
    pub fn record(
        &self,
        responses: &[IQPoint],
        mut noise: Option<(&mut SimRng, f64)>,
    ) -> Result<(ComplexEnvelope, Vec<String>)> {
        if responses.len() != self.channels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} responses for {} channels",
                responses.len(),
                self.channels.len()
            )));
        }
        let fs = self.sample_rate;
        let n = (self.duration * fs).round() as usize;
        let samples = (0..n)
            .map(|t| {
                let time = t as f64 / fs;
                self.channels
                    .iter()
                    .zip(responses)
                    .map(|(c, r)| {
                        let df = c.readout.f_r - self.carrier;
                        r.to_complex() * c.readout.probe_power.sqrt() * Complex64::from_polar(1.0, 2.0 * PI * df * time)
                    })
                    .sum()
            })
            .collect();
        let mut env = ComplexEnvelope::new(samples, fs, self.carrier)?;
        let mut add_noise = |env: ComplexEnvelope, psd: f64| match noise.as_mut() {
            Some((rng, scale)) if psd > 0.0 => add_awgn_with(&env, psd * *scale, rng),
            _ => env,
        };
        let mut warnings = vec![];
        let hemt = self.stage(StageLabel::Hemt)?;
        if self.mode.optical_readout() {
            let jpc = self.cfg.jpc.as_ref().ok_or_else(|| Error::Config("missing [jpc]".into()))?;
            env = jpc_upconvert(&env, jpc);
            env = add_noise(hemt.amplify(&env), hemt.added_noise_psd);
            let transducer = self.cfg.transducer.as_ref().ok_or_else(|| Error::Config("missing [transducer]".into()))?;
            let edfa = self.stage(StageLabel::Edfa)?;
            let pumps: Vec<PumpTone> = self.channels.iter().filter_map(|c| c.pump).collect();
            let sidebands = transducer.transduce(&env, &pumps, self.cfg.uplink.temperature)?;
            let beat_carrier = env.carrier_freq();
            let mut total = ComplexEnvelope::zeros(n, fs, beat_carrier)?;
            for (pump, side) in pumps.iter().zip(sidebands) {
                let side = add_noise(edfa.amplify(&side), edfa.added_noise_psd);
                let reflected = pump.amplitude() * (self.cfg.uplink.pump_reflection / pump.power.max(f64::MIN_POSITIVE)).sqrt();
                let pump_field = ComplexEnvelope::new(vec![reflected * edfa.amplitude_gain(); n], fs, pump.optical_frequency())?;
                let beat = self.cfg.detector.detect(&pump_field, &side)?;
                if let Some(w) = beat.warning {
                    warnings.push(w);
                }
                // The beat sits at the upconverted carrier up to rounding of
                // the optical frequencies.
                total = total.try_add(&beat.envelope.with_carrier(beat_carrier))?;
            }
            env = total;
        } else {
            env = add_noise(hemt.amplify(&env), hemt.added_noise_psd);
        }
        env = add_noise(env, self.cfg.noise.psd);
        Ok((env, warnings))
    }

    /// Whole-record demodulation of every channel.
    pub fn demodulate(&self, env: &ComplexEnvelope) -> Result<Vec<IQPoint>> {
        (0..self.channels.len())
            .map(|k| iq_demodulate(env, self.demod_freq(k), (0.0, self.duration)))
            .collect()
    }

    /// Noise variance per quadrature of one demodulated shot on channel `k`.
    /// Whole-record demodulation keeps exactly the FFT bin of the channel
    /// tone, so each white source contributes its density times the power
    /// gain from its insertion point at that frequency, over `2T`.
    fn noise_variance(&self, k: usize) -> f64 {
        let t = self.duration;
        let mut psd = self.cfg.noise.psd;
        let hemt = self.cfg.stage(StageLabel::Hemt).copied();
        let r = &self.channels[k].readout;
        if let Some(h) = hemt {
            let mut upstream = h.amplitude_gain() * r.probe_power.sqrt();
            if self.mode.optical_readout() {
                upstream *= self.cfg.jpc.map_or(1.0, |j| crate::signal::db_to_amplitude(j.gain_db));
            }
            if upstream > 0.0 {
                psd += h.added_noise_psd * (self.gain[k][k].norm() / upstream).powi(2);
            }
        }
        if self.mode.optical_readout() {
            if let Some(e) = self.cfg.stage(StageLabel::Edfa) {
                let pump_amp = self.cfg.uplink.pump_reflection.sqrt() * e.amplitude_gain();
                let per_pump = (2.0 * self.cfg.detector.scale() * pump_amp).powi(2) * e.added_noise_psd;
                psd += per_pump * self.channels.len() as f64;
            }
        }
        psd / (2.0 * t)
    }

    /// Noiseless demodulated IQ on every channel.
    pub fn expected(&self, responses: &[IQPoint]) -> Vec<IQPoint> {
        self.gain
            .iter()
            .map(|row| {
                IQPoint::from_complex(row.iter().zip(responses).map(|(g, r)| g * r.to_complex()).sum())
            })
            .collect()
    }

    /// One shot: noiseless IQ plus the calibrated Gaussian noise.
    pub fn shot(&self, responses: &[IQPoint], rng: &mut SimRng) -> Vec<IQPoint> {
        self.expected(responses)
            .into_iter()
            .zip(&self.sigma)
            .map(|(p, &s)| {
                let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
                IQPoint::new(p.i + s * a, p.q + s * b)
            })
            .collect()
    }

    /// Expected IQ of channel `k` with that qubit in `|g⟩`/`|e⟩` and all
    /// others in `|g⟩`.
    pub fn centers(&self, k: usize) -> (IQPoint, IQPoint) {
        let ground: Vec<IQPoint> = self.channels.iter().map(|c| c.readout.iq_g).collect();
        let mut excited = ground.clone();
        excited[k] = self.channels[k].readout.iq_e;
        (self.expected(&ground)[k], self.expected(&excited)[k])
    }

    pub fn discriminator(&self, k: usize) -> Result<Discriminator> {
        let (g, e) = self.centers(k);
        Discriminator::new(g, e)
    }

    /// Single-shot separation of the state centers over the noise std.
    pub fn separation_snr(&self, k: usize) -> f64 {
        let (g, e) = self.centers(k);
        if self.sigma[k] == 0.0 {
            return f64::INFINITY;
        }
        (e - g).norm() / self.sigma[k]
    }
}
