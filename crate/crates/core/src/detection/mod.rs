//! Readout back-end: amplifier stages, optical heterodyne, state
//! discrimination and curve fitting.

pub mod fit;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{add_awgn_with, db_to_amplitude, ComplexEnvelope, IQPoint, SimRng};

pub use fit::{fit_damped_cosine, fit_exponential, fit_lineshape, fit_line, fit_rb, FitParam, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StageLabel {
    Hemt,
    Edfa,
}

/// Amplifier with output-referred additive white noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainStage {
    pub label: StageLabel,
    pub gain_db: f64,
    /// One-sided PSD at the output, W/Hz.
    pub added_noise_psd: f64,
}

impl GainStage {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain_db >= 0.0) || !(self.added_noise_psd >= 0.0) {
            return Err(Error::Config(format!("{:?} stage needs gain ≥ 0 dB and noise ≥ 0", self.label)));
        }
        Ok(())
    }

    pub fn amplitude_gain(&self) -> f64 {
        db_to_amplitude(self.gain_db)
    }

    pub fn amplify(&self, env: &ComplexEnvelope) -> ComplexEnvelope {
        env.scaled(Complex64::new(self.amplitude_gain(), 0.0))
    }

    pub fn apply(&self, env: &ComplexEnvelope, rng: &mut SimRng) -> ComplexEnvelope {
        add_awgn_with(&self.amplify(env), self.added_noise_psd, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatNote {
    pub envelope: ComplexEnvelope,
    pub warning: Option<String>,
}

/// Interference term of two optical fields on a square-law detector, as a
/// complex envelope at `|f_pump − f_sideband|`: `2·A_pump·conj(A_sideband)`
/// (W) for a sideband below the pump, the conjugate ordering above it.
pub fn beat_note(pump: &ComplexEnvelope, sideband: &ComplexEnvelope, detector_bw: f64) -> Result<BeatNote> {
    if pump.len() != sideband.len() || pump.sample_rate() != sideband.sample_rate() {
        return Err(invalid("pump and sideband must share length and sample rate"));
    }
    let df = pump.carrier_freq() - sideband.carrier_freq();
    let fs = pump.sample_rate();
    if df.abs() > detector_bw {
        let warning = format!("beat at {:.6e} Hz is above the detector bandwidth {:.3e} Hz", df.abs(), detector_bw);
        return Ok(BeatNote { envelope: ComplexEnvelope::zeros(pump.len(), fs, df.abs())?, warning: Some(warning) });
    }
    let samples = pump
        .samples()
        .iter()
        .zip(sideband.samples())
        .map(|(p, s)| if df >= 0.0 { 2.0 * p * s.conj() } else { 2.0 * s * p.conj() })
        .collect();
    Ok(BeatNote { envelope: ComplexEnvelope::new(samples, fs, df.abs())?, warning: None })
}

/// Photodiode plus load that turns a beat note into a microwave envelope
/// whose power (`mean |x|²`) is the electrical power delivered to the load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Photodetector {
    pub bandwidth: f64,
    /// A/W.
    pub responsivity: f64,
    /// Ω.
    pub load: f64,
}

impl Default for Photodetector {
    fn default() -> Self {
        Self { bandwidth: 20e9, responsivity: 0.8, load: 50.0 }
    }
}

impl Photodetector {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.responsivity > 0.0 && self.load > 0.0) {
            return Err(Error::Config("detector needs positive bandwidth, responsivity and load".into()));
        }
        Ok(())
    }

    /// Peak voltage `R·I·load` expressed as `V/√(2·load)`.
    pub fn scale(&self) -> f64 {
        self.responsivity * (self.load / 2.0).sqrt()
    }

    pub fn detect(&self, pump: &ComplexEnvelope, sideband: &ComplexEnvelope) -> Result<BeatNote> {
        let beat = beat_note(pump, sideband, self.bandwidth)?;
        Ok(BeatNote { envelope: beat.envelope.scaled(Complex64::new(self.scale(), 0.0)), ..beat })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub center_g: IQPoint,
    pub center_e: IQPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    /// `true` for `|e⟩`.
    pub labels: Vec<bool>,
    pub fidelity: Option<f64>,
}

impl Discriminator {
    pub fn new(center_g: IQPoint, center_e: IQPoint) -> Result<Self> {
        if center_g == center_e {
            return Err(Error::Config("discrimination centers coincide".into()));
        }
        Ok(Self { center_g, center_e })
    }

    fn axis(&self) -> IQPoint {
        let d = self.center_e - self.center_g;
        d * (1.0 / d.norm())
    }

    /// Signed coordinate along the g→e axis, zero at the midpoint.
    pub fn coordinate(&self, p: IQPoint) -> f64 {
        let mid = (self.center_g + self.center_e) * 0.5;
        (p - mid).dot(self.axis())
    }

    pub fn label(&self, p: IQPoint) -> bool {
        self.coordinate(p) > 0.0
    }

    /// Excited population of an averaged point: 0 at `center_g`, 1 at `center_e`.
    pub fn population(&self, p: IQPoint) -> f64 {
        let d = self.center_e - self.center_g;
        (p - self.center_g).dot(d) / d.dot(d)
    }

    /// `1 − ½(P(e|g) + P(g|e))` from shots prepared in known states.
    pub fn assignment_fidelity(&self, shots_g: &[IQPoint], shots_e: &[IQPoint]) -> Result<f64> {
        if shots_g.is_empty() || shots_e.is_empty() {
            return Err(invalid("need calibration shots for both states"));
        }
        let e_given_g = shots_g.iter().filter(|&&p| self.label(p)).count() as f64 / shots_g.len() as f64;
        let g_given_e = shots_e.iter().filter(|&&p| !self.label(p)).count() as f64 / shots_e.len() as f64;
        Ok(1.0 - 0.5 * (e_given_g + g_given_e))
    }
}

/// Labels `points`; the fidelity estimate uses `calibration` shots
/// `(prepared g, prepared e)` when given.
pub fn discriminate(
    points: &[IQPoint],
    centers: (IQPoint, IQPoint),
    calibration: Option<(&[IQPoint], &[IQPoint])>,
) -> Result<Discrimination> {
    let d = Discriminator::new(centers.0, centers.1)?;
    let labels = points.iter().map(|&p| d.label(p)).collect();
    let fidelity = calibration.map(|(g, e)| d.assignment_fidelity(g, e)).transpose()?;
    Ok(Discrimination { labels, fidelity })
}
