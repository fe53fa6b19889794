//! Traveling-wave Brillouin microwave-to-optical transducer.
//!
//! The device is reduced to its effective response: a conversion channel whose
//! center is set by the pump wavelength (phase matching), whose width and
//! efficiency depend on the operating temperature, and whose output is an
//! optical sideband offset from the pump by the microwave frequency.
//!
//! Efficiencies are photon-flux ratios per watt of pump. A sideband therefore
//! carries `η·P_pump·(f_opt/f_mw)` of the microwave power.
//!
//! In the Stokes branch the sideband sits at `f_pump − f_mw` and is the phase
//! conjugate of the microwave input (a component at `+δ` from the microwave
//! carrier lands at `−δ` from the sideband carrier). Rotating the microwave
//! phase by `φ` rotates the sideband by `−φ`; heterodyning against the pump
//! conjugates again, so the recovered beat note follows the input phase.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::ComplexEnvelope;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK: f64 = 6.626_070_15e-34;

/// `x₀` with `sin(x₀)/x₀ = 1/√2`, the half-power point of sinc².
pub const SINC2_HALF_POWER_X: f64 = 1.391_557_378_251_510_2;

pub fn optical_frequency(wavelength_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

pub fn photon_energy(freq: f64) -> f64 {
    PLANCK * freq
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Temperature {
    #[serde(rename = "300K")]
    T300K,
    #[serde(rename = "3.3K")]
    T3K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lineshape {
    Sinc2,
    Lorentzian,
}

impl Lineshape {
    /// Complex amplitude transfer at `detuning` for a channel of 3 dB width `bw`.
    pub fn amplitude(self, detuning: f64, bw: f64) -> Complex64 {
        let u = 2.0 * detuning / bw;
        match self {
            Lineshape::Sinc2 => {
                let x = SINC2_HALF_POWER_X * u;
                let s = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                Complex64::new(s, 0.0)
            }
            Lineshape::Lorentzian => Complex64::new(1.0, 0.0) / Complex64::new(1.0, u),
        }
    }

    pub fn power(self, detuning: f64, bw: f64) -> f64 {
        self.amplitude(detuning, bw).norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Stokes,
    /// Reversed pump direction. Carried for completeness; not calibrated.
    AntiStokes,
}

/// Coupled-mode rates kept for reporting only; the simulation uses the
/// effective efficiency/center/bandwidth description.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingRates {
    pub g_em: Option<f64>,
    pub g_om: Option<f64>,
    pub kappa_e: Option<f64>,
    pub kappa_m: Option<f64>,
    pub kappa_o: Option<f64>,
}

/// Two-point linear map from pump wavelength to the cryogenic channel center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthMap {
    pub lambda1_nm: f64,
    pub freq1_hz: f64,
    pub lambda2_nm: f64,
    pub freq2_hz: f64,
}

impl WavelengthMap {
    pub fn slope_hz_per_nm(&self) -> f64 {
        (self.freq2_hz - self.freq1_hz) / (self.lambda2_nm - self.lambda1_nm)
    }

    pub fn eval(&self, wavelength_nm: f64) -> f64 {
        self.freq1_hz + self.slope_hz_per_nm() * (wavelength_nm - self.lambda1_nm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransducerModel {
    #[serde(default)]
    pub coupling_doc: CouplingRates,
    /// Photon-flux efficiency per pump watt at 300 K, 1/W.
    pub eta_300k: f64,
    /// Same at 3.3 K, 1/W.
    pub eta_cryo: f64,
    pub bw3db_300k: f64,
    pub bw3db_cryo: f64,
    /// Channel center moves up by this much on cooling, Hz.
    pub center_shift_cool: f64,
    /// Output amplitude gain on cooling.
    pub amp_factor_cool: f64,
    pub lineshape: Lineshape,
    pub wavelength_map: WavelengthMap,
    /// Usable microwave band of the IDT, Hz. Not published; placeholder.
    pub idt_band: (f64, f64),
    /// Grating-coupler wavelength band, nm. Not published; placeholder.
    pub coupler_band: (f64, f64),
    pub branch: Branch,
    /// Fixed phase added by the device to every sideband, rad.
    pub device_phase: f64,
}

impl Default for TransducerModel {
    fn default() -> Self {
        Self {
            coupling_doc: CouplingRates::default(),
            eta_300k: 3.2e-7,
            eta_cryo: 2.5e-6,
            bw3db_300k: 2.63e6,
            bw3db_cryo: 0.88e6,
            center_shift_cool: 131.56e6,
            amp_factor_cool: 2.8,
            lineshape: Lineshape::Sinc2,
            wavelength_map: WavelengthMap {
                lambda1_nm: 1550.00,
                freq1_hz: 8.743e9,
                lambda2_nm: 1560.95,
                freq2_hz: 8.818e9,
            },
            idt_band: (8.3e9, 9.2e9),
            coupler_band: (1530.0, 1575.0),
            branch: Branch::Stokes,
            device_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpTone {
    pub wavelength_nm: f64,
    /// W
    pub power: f64,
    pub phase: f64,
}

impl PumpTone {
    pub fn new(wavelength_nm: f64, power: f64, phase: f64) -> Result<Self> {
        if !(power >= 0.0) || !(wavelength_nm > 0.0) {
            return Err(invalid("pump needs a positive wavelength and non-negative power"));
        }
        Ok(Self { wavelength_nm, power, phase })
    }

    pub fn optical_frequency(&self) -> f64 {
        optical_frequency(self.wavelength_nm)
    }

    /// Field envelope of the pump itself (√W), referenced to its own frequency.
    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.power.sqrt(), self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelResponse {
    pub center: f64,
    pub bandwidth3db: f64,
    /// Photon-flux conversion ratio at the channel center (dimensionless).
    pub peak_flux_efficiency: f64,
    pub shape: Lineshape,
    pub pump_outside_coupler_band: bool,
}

impl ChannelResponse {
    /// Photon-flux conversion ratio for a microwave tone at `freq`.
    pub fn flux_efficiency(&self, freq: f64) -> f64 {
        self.peak_flux_efficiency * self.shape.power(freq - self.center, self.bandwidth3db)
    }

    pub fn amplitude_transfer(&self, freq: f64) -> Complex64 {
        self.peak_flux_efficiency.sqrt() * self.shape.amplitude(freq - self.center, self.bandwidth3db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonFluxPair {
    /// Microwave photons/s.
    pub n_in: f64,
    /// Optical photons/s.
    pub n_out: f64,
}

impl TransducerModel {
    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta_300k", self.eta_300k), ("eta_cryo", self.eta_cryo)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Config(format!("{name} = {eta} must lie in (0, 1] per watt")));
            }
        }
        if !(self.bw3db_300k > 0.0 && self.bw3db_cryo > 0.0) {
            return Err(Error::Config("channel bandwidths must be positive".into()));
        }
        if !(self.amp_factor_cool > 0.0) {
            return Err(Error::Config("amp_factor_cool must be positive".into()));
        }
        let m = &self.wavelength_map;
        if m.lambda1_nm == m.lambda2_nm || !m.slope_hz_per_nm().is_finite() {
            return Err(Error::Config("wavelength map calibration points coincide".into()));
        }
        if !(self.idt_band.0 < self.idt_band.1) || !(self.coupler_band.0 < self.coupler_band.1) {
            return Err(Error::Config("IDT and coupler bands must be increasing intervals".into()));
        }
        let ratio = self.eta_cryo / self.eta_300k;
        let amp2 = self.amp_factor_cool.powi(2);
        if ((amp2 - ratio) / ratio).abs() > 0.05 {
            return Err(Error::Config(format!(
                "cooling amplitude factor² = {amp2:.3} disagrees with efficiency ratio {ratio:.3} by more than 5 %"
            )));
        }
        Ok(())
    }

    pub fn eta(&self, temperature: Temperature) -> f64 {
        match temperature {
            Temperature::T300K => self.eta_300k,
            Temperature::T3K => self.eta_cryo,
        }
    }

    pub fn bandwidth(&self, temperature: Temperature) -> f64 {
        match temperature {
            Temperature::T300K => self.bw3db_300k,
            Temperature::T3K => self.bw3db_cryo,
        }
    }

    pub fn pump_in_coupler_band(&self, wavelength_nm: f64) -> bool {
        (self.coupler_band.0..=self.coupler_band.1).contains(&wavelength_nm)
    }

    /// Conversion-channel center for a pump wavelength. The cryogenic map is
    /// the calibrated one; room temperature sits `center_shift_cool` below it.
    /// Wavelengths outside the coupler band are extrapolated.
    pub fn channel_center(&self, wavelength_nm: f64, temperature: Temperature) -> Result<f64> {
        let m = &self.wavelength_map;
        if m.lambda1_nm == m.lambda2_nm {
            return Err(Error::Config("wavelength map calibration points coincide".into()));
        }
        let cryo = m.eval(wavelength_nm);
        Ok(match temperature {
            Temperature::T3K => cryo,
            Temperature::T300K => cryo - self.center_shift_cool,
        })
    }

    /// Pump wavelength that centers the channel on `center`.
    pub fn wavelength_for_center(&self, center: f64, temperature: Temperature) -> Result<f64> {
        let m = &self.wavelength_map;
        let slope = m.slope_hz_per_nm();
        if !(slope.is_finite() && slope != 0.0) {
            return Err(Error::Config("wavelength map is not invertible".into()));
        }
        let cryo = match temperature {
            Temperature::T3K => center,
            Temperature::T300K => center + self.center_shift_cool,
        };
        Ok(m.lambda1_nm + (cryo - m.freq1_hz) / slope)
    }

    pub fn channel_response(&self, pump: &PumpTone, temperature: Temperature) -> Result<ChannelResponse> {
        Ok(ChannelResponse {
            center: self.channel_center(pump.wavelength_nm, temperature)?,
            bandwidth3db: self.bandwidth(temperature),
            peak_flux_efficiency: self.eta(temperature) * pump.power,
            shape: self.lineshape,
            pump_outside_coupler_band: !self.pump_in_coupler_band(pump.wavelength_nm),
        })
    }

    /// Optical carrier of the sideband generated by `pump` from a microwave
    /// carrier.
    pub fn sideband_carrier(&self, pump: &PumpTone, mw_carrier: f64) -> f64 {
        match self.branch {
            Branch::Stokes => pump.optical_frequency() - mw_carrier,
            Branch::AntiStokes => pump.optical_frequency() + mw_carrier,
        }
    }

    /// One optical sideband per pump. Pumps are non-depleted and act
    /// independently, so each output ignores the other pumps.
    pub fn transduce(
        &self,
        mw: &ComplexEnvelope,
        pumps: &[PumpTone],
        temperature: Temperature,
    ) -> Result<Vec<ComplexEnvelope>> {
        let fc = mw.carrier_freq();
        let (lo, hi) = self.idt_band;
        if !(lo..=hi).contains(&fc) {
            return Err(Error::OutOfBand { carrier_hz: fc, lo, hi });
        }
        pumps
            .iter()
            .map(|pump| {
                let resp = self.channel_response(pump, temperature)?;
                let f_pump = pump.optical_frequency();
                let branch = self.branch;
                let filtered = mw.filtered(|offset| {
                    let f_in = fc + offset;
                    let f_out = match branch {
                        Branch::Stokes => f_pump - f_in,
                        Branch::AntiStokes => f_pump + f_in,
                    };
                    if f_in <= 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    resp.amplitude_transfer(f_in) * (f_out / f_in).sqrt()
                });
                let rotation = Complex64::from_polar(1.0, pump.phase + self.device_phase);
                let out = match branch {
                    Branch::Stokes => filtered.conj(),
                    Branch::AntiStokes => filtered,
                };
                Ok(out.scaled(rotation).with_carrier(self.sideband_carrier(pump, fc)))
            })
            .collect()
    }

    pub fn flux_pair(
        &self,
        mw_power: f64,
        mw_freq: f64,
        pump: &PumpTone,
        temperature: Temperature,
    ) -> Result<PhotonFluxPair> {
        if !(mw_power >= 0.0) {
            return Err(invalid("microwave power must be non-negative"));
        }
        if !(mw_freq > 0.0) {
            return Err(invalid("microwave frequency must be positive"));
        }
        let n_in = mw_power / photon_energy(mw_freq);
        let resp = self.channel_response(pump, temperature)?;
        Ok(PhotonFluxPair { n_in, n_out: n_in * resp.flux_efficiency(mw_freq) })
    }

    /// `|S21|²` in dB on a uniform grid over `range`.
    pub fn s21_sweep(
        &self,
        range: (f64, f64),
        points: usize,
        pump: &PumpTone,
        temperature: Temperature,
    ) -> Result<Vec<(f64, f64)>> {
        if points < 3 {
            return Err(invalid("an S21 sweep needs at least 3 points"));
        }
        if !(range.1 > range.0) {
            return Err(invalid("sweep range must be increasing"));
        }
        let resp = self.channel_response(pump, temperature)?;
        let step = (range.1 - range.0) / (points - 1) as f64;
        Ok((0..points)
            .map(|k| {
                let f = range.0 + step * k as f64;
                (f, 10.0 * resp.flux_efficiency(f).max(1e-30).log10())
            })
            .collect())
    }

    /// Channel centers for a pump sweep (cryogenic map).
    pub fn tuning_curve(&self, wavelengths_nm: &[f64], temperature: Temperature) -> Result<Vec<(f64, f64)>> {
        wavelengths_nm
            .iter()
            .map(|&w| Ok((w, self.channel_center(w, temperature)?)))
            .collect()
    }
}
