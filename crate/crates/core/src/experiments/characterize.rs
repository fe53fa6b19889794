//! Transducer characterization: beat-power linearity, S21 channel spectra at
//! both temperatures, and the pump-wavelength tuning curve.

use num_complex::Complex64;

use crate::detection::{fit_line, fit_lineshape, StageLabel};
use crate::error::{Error, Result};
use crate::signal::{add_awgn_with, dbm_to_watts, iq_demodulate, watts_to_dbm, ComplexEnvelope, SimRng};
use crate::transducer::{PumpTone, Temperature, TransducerModel};

use super::config::LinkConfig;
use super::result::{ExperimentResult, Trace};
use super::{stream, Stream};

/// The bench setup of the characterization runs: a microwave source drives
/// the transducer directly, and the sideband is amplified together with
/// the reflected pump and detected.
struct Bench<'a> {
    cfg: &'a LinkConfig,
    transducer: &'a TransducerModel,
    pump: PumpTone,
    edfa_gain: f64,
    edfa_psd: f64,
    samples: usize,
    sample_rate: f64,
}

impl<'a> Bench<'a> {
    fn new(cfg: &'a LinkConfig) -> Result<Self> {
        let transducer = cfg.transducer.as_ref().ok_or_else(|| Error::Config("characterization needs [transducer]".into()))?;
        transducer.validate()?;
        let edfa = cfg
            .stage(StageLabel::Edfa)
            .ok_or_else(|| Error::Config("characterization needs an EDFA stage".into()))?;
        let ch = &cfg.characterization;
        let samples = (ch.record_duration * ch.sample_rate).round() as usize;
        if samples < 2 {
            return Err(Error::Config("characterization record is shorter than two samples".into()));
        }
        Ok(Self {
            cfg,
            transducer,
            pump: ch.pump,
            edfa_gain: edfa.amplitude_gain(),
            edfa_psd: edfa.added_noise_psd,
            samples,
            sample_rate: ch.sample_rate,
        })
    }

    fn duration(&self) -> f64 {
        self.samples as f64 / self.sample_rate
    }

    /// Reflected pump amplitude at the detector, √W.
    fn pump_at_detector(&self) -> Complex64 {
        self.pump.amplitude() * (self.cfg.uplink.pump_reflection / self.pump.power.max(f64::MIN_POSITIVE)).sqrt()
            * self.edfa_gain
    }

    /// Demodulated beat phasor for a microwave tone of `power` W at `freq`.
    fn beat(&self, power: f64, freq: f64, temperature: Temperature, rng: &mut SimRng) -> Result<Complex64> {
        let fs = self.sample_rate;
        let mw = ComplexEnvelope::new(vec![Complex64::new(power.sqrt(), 0.0); self.samples], fs, freq)?;
        let side = self.transducer.transduce(&mw, &[self.pump], temperature)?.remove(0);
        let side = side.scaled(Complex64::new(self.edfa_gain, 0.0));
        let side = add_awgn_with(&side, self.edfa_psd, rng);
        let pump = ComplexEnvelope::new(vec![self.pump_at_detector(); self.samples], fs, self.pump.optical_frequency())?;
        let beat = self.cfg.detector.detect(&pump, &side)?;
        let env = add_awgn_with(&beat.envelope.with_carrier(freq), self.cfg.noise.psd, rng);
        Ok(iq_demodulate(&env, freq, (0.0, self.duration()))?.to_complex())
    }

    /// Mean noise power in a demodulated beat, W.
    fn noise_floor(&self) -> f64 {
        let gain = (2.0 * self.cfg.detector.scale() * self.pump_at_detector().norm()).powi(2);
        (gain * self.edfa_psd + self.cfg.noise.psd) / self.duration()
    }

    /// Optical sideband power implied by a beat power.
    fn sideband_power(&self, beat_power: f64) -> f64 {
        let gain = (2.0 * self.cfg.detector.scale() * self.pump_at_detector().norm() * self.edfa_gain).powi(2);
        beat_power / gain
    }
}

/// Beat power against microwave input power at the channel center.
pub fn run_linearity(cfg: &LinkConfig, mw_powers_dbm: &[f64]) -> Result<ExperimentResult> {
    if mw_powers_dbm.is_empty() {
        return Err(Error::InvalidArgument("linearity sweep needs at least one power".into()));
    }
    let bench = Bench::new(cfg)?;
    let temperature = cfg.uplink.temperature;
    let center = bench.transducer.channel_center(bench.pump.wavelength_nm, temperature)?;
    let mut result = ExperimentResult::new("linearity", cfg)?;
    let floor = bench.noise_floor();
    let mut beat_dbm = vec![];
    for (i, &dbm) in mw_powers_dbm.iter().enumerate() {
        let mut rng = stream(cfg, Stream::Linearity, &[i as u64]);
        let p = bench.beat(dbm_to_watts(dbm), center, temperature, &mut rng)?.norm_sqr();
        if p < 10.0 * floor {
            result.warn(format!("input {dbm} dBm: beat power is within 10 dB of the noise floor"));
        }
        beat_dbm.push(watts_to_dbm(p));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        mw_powers_dbm.iter().zip(&beat_dbm).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (*x, *y)).unzip();
    if xs.len() >= 3 {
        let fit = fit_line(&xs, &ys)?;
        result.scalars.insert("slope_db_per_db".into(), fit.value("slope"));
        result.scalars.insert("slope_stderr".into(), fit.stderr("slope"));
        result.fits.insert("linearity".into(), fit);
    }
    result.scalars.insert("noise_floor_dbm".into(), watts_to_dbm(floor));
    result.scalars.insert("channel_center_hz".into(), center);
    result.summary.insert(
        "linearity".into(),
        Trace::new("microwave power (dBm)", mw_powers_dbm.to_vec()).with("beat_power_dbm", beat_dbm.clone()),
    );
    result.raw.insert("beat_power_dbm".into(), beat_dbm);
    Ok(result)
}

/// S21 sweeps around the channel at 300 K and at the cryogenic point, with
/// lineshape fits.
pub fn run_channel_spectra(cfg: &LinkConfig) -> Result<ExperimentResult> {
    let bench = Bench::new(cfg)?;
    let ch = &cfg.characterization;
    if ch.sweep_points < 5 || !(ch.sweep_span > 0.0) {
        return Err(Error::Config("S21 sweep needs ≥ 5 points and a positive span".into()));
    }
    let mut result = ExperimentResult::new("channel_spectra", cfg)?;
    let input = 1e-3;
    for (temp, tag) in [(Temperature::T300K, "300k"), (Temperature::T3K, "cryo")] {
        let center = bench.transducer.channel_center(bench.pump.wavelength_nm, temp)?;
        let freqs: Vec<f64> = (0..ch.sweep_points)
            .map(|k| center - ch.sweep_span / 2.0 + ch.sweep_span * k as f64 / (ch.sweep_points - 1) as f64)
            .collect();
        let s21: Vec<f64> = freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let mut rng = stream(cfg, Stream::Spectra, &[temp as u64, i as u64]);
                let p_side = bench.sideband_power(bench.beat(input, f, temp, &mut rng)?.norm_sqr());
                let f_side = bench.transducer.sideband_carrier(&bench.pump, f);
                let flux_ratio = (p_side / f_side) / (input / f);
                Ok(10.0 * flux_ratio.max(1e-30).log10())
            })
            .collect::<Result<_>>()?;
        let fit = fit_lineshape(&freqs, &s21, bench.transducer.lineshape)?;
        result.scalars.insert(format!("bandwidth_{tag}"), fit.value("bandwidth"));
        result.scalars.insert(format!("center_{tag}"), fit.value("center"));
        result.scalars.insert(format!("peak_{tag}"), fit.value("peak"));
        result.scalars.insert(format!("efficiency_per_watt_{tag}"), fit.value("peak") / bench.pump.power);
        result.fits.insert(format!("s21_{tag}"), fit);
        result.summary.insert(format!("s21_{tag}"), Trace::new("frequency (Hz)", freqs).with("s21_db", s21));
    }
    let ratio = result.scalar("peak_cryo") / result.scalar("peak_300k");
    result.scalars.insert("efficiency_ratio".into(), ratio);
    result.scalars.insert("amplitude_factor".into(), ratio.sqrt());
    result.scalars.insert("center_shift".into(), result.scalar("center_cryo") - result.scalar("center_300k"));
    Ok(result)
}

/// Channel center against pump wavelength, measured by lineshape fits.
pub fn run_tunability(cfg: &LinkConfig) -> Result<ExperimentResult> {
    let t = cfg.transducer.as_ref().ok_or_else(|| Error::Config("tunability needs [transducer]".into()))?;
    t.validate()?;
    let temp = cfg.uplink.temperature;
    let bw = t.bandwidth(temp);
    let wavelengths = cfg.characterization.tuning_wavelengths_nm.values();
    if wavelengths.len() < 2 {
        return Err(Error::Config("tuning sweep needs at least two wavelengths".into()));
    }
    let mut result = ExperimentResult::new("tunability", cfg)?;
    let (mut predicted, mut fitted) = (vec![], vec![]);
    for &nm in &wavelengths {
        let pump = PumpTone { wavelength_nm: nm, ..cfg.characterization.pump };
        if !t.pump_in_coupler_band(nm) {
            result.warn(format!("pump at {nm} nm is outside the coupler band"));
        }
        let c = t.channel_center(nm, temp)?;
        let sweep = t.s21_sweep((c - 3.0 * bw, c + 3.0 * bw), 121, &pump, temp)?;
        let (fs, db): (Vec<f64>, Vec<f64>) = sweep.into_iter().unzip();
        fitted.push(fit_lineshape(&fs, &db, t.lineshape)?.value("center"));
        predicted.push(c);
    }
    let (lo, hi) = fitted.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &f| (a.0.min(f), a.1.max(f)));
    result.scalars.insert("span_hz".into(), hi - lo);
    let slope = fit_line(&wavelengths, &fitted)?;
    result.scalars.insert("slope_hz_per_nm".into(), slope.value("slope"));
    result.fits.insert("tuning".into(), slope);
    result.summary.insert(
        "tuning".into(),
        Trace::new("pump wavelength (nm)", wavelengths).with("fitted_center", fitted).with("predicted_center", predicted),
    );
    Ok(result)
}
