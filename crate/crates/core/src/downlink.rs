//! Optical control downlink: a quadrature-biased Mach–Zehnder modulator at
//! room temperature and a UTC photodiode at the cold stage.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{ComplexEnvelope, RealSignal, ToneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bias {
    #[default]
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EomParams {
    /// Half-wave voltage, V.
    pub v_pi: f64,
    #[serde(default)]
    pub bias: Bias,
    /// Optical power entering the modulator, W.
    pub carrier_power: f64,
    /// Replace the sine transfer by its first-order expansion.
    #[serde(default)]
    pub linearized: bool,
}

impl Default for EomParams {
    fn default() -> Self {
        Self { v_pi: 3.0, bias: Bias::Quadrature, carrier_power: 10e-3, linearized: false }
    }
}

impl EomParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_pi > 0.0) || !(self.carrier_power >= 0.0) {
            return Err(Error::Config("EOM needs v_pi > 0 and non-negative carrier power".into()));
        }
        Ok(())
    }

    /// Intensity ripple per volt in the small-signal limit.
    pub fn small_signal_gain(&self) -> f64 {
        PI * self.carrier_power / (2.0 * self.v_pi)
    }

    pub fn intensity(&self, v: f64) -> f64 {
        let phase = PI * v / self.v_pi;
        let swing = if self.linearized { phase } else { phase.sin() };
        self.carrier_power * 0.5 * (1.0 + swing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtcParams {
    /// A/W.
    pub responsivity: f64,
    /// Hz.
    pub bandwidth3db: f64,
    /// Ω.
    pub load: f64,
}

impl Default for UtcParams {
    fn default() -> Self {
        Self { responsivity: 0.5, bandwidth3db: 10e9, load: 50.0 }
    }
}

impl UtcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.responsivity > 0.0) || !(self.bandwidth3db > 0.0) || !(self.load > 0.0) {
            return Err(Error::Config("UTC needs positive responsivity, bandwidth and load".into()));
        }
        Ok(())
    }

    /// One-pole response `1/(1 + i f/f3dB)`.
    pub fn response(&self, freq: f64) -> Complex64 {
        Complex64::new(1.0, freq / self.bandwidth3db).inv()
    }
}

pub fn eom_modulate(rf: &RealSignal, e: &EomParams) -> RealSignal {
    RealSignal {
        samples: rf.samples.iter().map(|&v| e.intensity(v)).collect(),
        sample_rate: rf.sample_rate,
    }
}

/// Photocurrent into the load, band-limited by the diode. The result is a
/// real voltage (carrier 0) that keeps its DC component.
pub fn utc_detect(intensity: &RealSignal, u: &UtcParams) -> Result<ComplexEnvelope> {
    if let Some(bad) = intensity.samples.iter().find(|&&p| !(p >= 0.0)) {
        return Err(invalid(format!("optical intensity sample {bad} is negative")));
    }
    let fs = intensity.sample_rate;
    let scale = u.responsivity * u.load;
    let filtered = intensity.to_envelope().filtered(|f| {
        let h = u.response(f);
        // The Nyquist bin is shared by ±fs/2; keep it real so the output is.
        if (f.abs() - fs / 2.0).abs() < 1e-9 * fs {
            Complex64::new(h.re, 0.0)
        } else {
            h
        }
    });
    let samples = filtered.samples().iter().map(|s| Complex64::new(s.re * scale, 0.0)).collect();
    ComplexEnvelope::new(samples, fs, 0.0)
}

pub fn rf_waveform(tones: &[ToneSpec], duration: f64, sample_rate: f64) -> Result<RealSignal> {
    if let Some(t) = tones.iter().find(|t| !(t.frequency.abs() < sample_rate / 2.0)) {
        return Err(invalid(format!(
            "tone at {:e} Hz is not below Nyquist ({:e} Hz)",
            t.frequency,
            sample_rate / 2.0
        )));
    }
    let n = (duration * sample_rate).round() as usize;
    if n == 0 {
        return Err(invalid("duration shorter than one sample"));
    }
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / sample_rate;
            tones.iter().map(|s| s.amplitude * (2.0 * PI * s.frequency * t + s.phase).cos()).sum()
        })
        .collect();
    RealSignal::new(samples, sample_rate)
}

/// Tones → modulator → fiber (lossless) → photodiode.
pub fn synthesize_control(
    tones: &[ToneSpec],
    e: &EomParams,
    u: &UtcParams,
    duration: f64,
    sample_rate: f64,
) -> Result<ComplexEnvelope> {
    let rf = rf_waveform(tones, duration, sample_rate)?;
    utc_detect(&eom_modulate(&rf, e), u)
}

/// Bessel function of the first kind, integer order, by its power series.
/// Accurate to ~1e-15 for |x| ≲ 10, which covers every modulation depth here.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= -half * half / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Output phasor (V) at `freq` for a single input tone `amplitude·cos(2πft+φ)`
/// (phase not included).
pub fn fundamental_phasor(e: &EomParams, u: &UtcParams, amplitude: f64, freq: f64) -> Complex64 {
    let beta = PI * amplitude / e.v_pi;
    let depth = if e.linearized { beta / 2.0 } else { bessel_j(1, beta) };
    u.response(freq) * (e.carrier_power * u.responsivity * u.load * depth)
}

/// Amplitude (V) of the `2f₁ − f₂` product for two tones, before the diode
/// response.
pub fn intermod_amplitude(e: &EomParams, u: &UtcParams, a1: f64, a2: f64) -> f64 {
    if e.linearized {
        return 0.0;
    }
    let (b1, b2) = (PI * a1 / e.v_pi, PI * a2 / e.v_pi);
    e.carrier_power * u.responsivity * u.load * bessel_j(2, b1) * bessel_j(1, b2)
}

/// Envelope compression of the downlink for a drive tone: maps a commanded
/// envelope (fraction of the π-pulse peak) to the delivered one, normalized
/// so the reference Gaussian keeps its area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCompression {
    /// Modulation depth `π·V/v_pi` of the π-pulse peak.
    pub beta_pi: f64,
    pub scale: f64,
    pub linearized: bool,
}

impl DriveCompression {
    pub fn identity() -> Self {
        Self { beta_pi: 0.0, scale: 1.0, linearized: true }
    }

    /// `pi_peak_volts` is the commanded peak RF voltage of the reference π
    /// pulse; `envelope` its normalized samples.
    pub fn calibrate(e: &EomParams, pi_peak_volts: f64, envelope: &[f64]) -> Result<Self> {
        if !(pi_peak_volts > 0.0) {
            return Err(Error::Config("drive level must be positive".into()));
        }
        let beta_pi = PI * pi_peak_volts / e.v_pi;
        let raw = Self { beta_pi, scale: 1.0, linearized: e.linearized };
        let delivered: f64 = envelope.iter().map(|&g| raw.delivered(g)).sum();
        let commanded: f64 = envelope.iter().sum();
        Ok(Self { scale: commanded / delivered, ..raw })
    }

    pub fn delivered(&self, commanded: f64) -> f64 {
        if self.linearized || self.beta_pi == 0.0 {
            return self.scale * commanded;
        }
        self.scale * 2.0 * bessel_j(1, self.beta_pi * commanded) / self.beta_pi
    }
}
