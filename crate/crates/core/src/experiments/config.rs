//! Link configuration: every block of the chain, the noise levels, the
//! protocol grids and the RNG seed. Loaded from TOML; `LinkConfig::default()`
//! is the published operating point with placeholders where the device
//! parameters are unpublished (see `configs/default.toml`).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{GainStage, Photodetector, StageLabel};
use crate::downlink::{EomParams, UtcParams};
use crate::error::{Error, Result};
use crate::qubit::{JPCParams, PulseDecay, QubitParams, ReadoutParams};
use crate::signal::{IQPoint, NoiseSpec};
use crate::transducer::{PumpTone, Temperature, TransducerModel};

/// Drive path – readout path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IoMode {
    MM,
    MO,
    OM,
    OO,
}

impl IoMode {
    pub const ALL: [IoMode; 4] = [IoMode::MM, IoMode::MO, IoMode::OM, IoMode::OO];

    pub fn optical_drive(self) -> bool {
        matches!(self, IoMode::OM | IoMode::OO)
    }

    pub fn optical_readout(self) -> bool {
        matches!(self, IoMode::MO | IoMode::OO)
    }

    pub fn with_drive(self, optical: bool) -> IoMode {
        match (optical, self.optical_readout()) {
            (false, false) => IoMode::MM,
            (false, true) => IoMode::MO,
            (true, false) => IoMode::OM,
            (true, true) => IoMode::OO,
        }
    }
}

impl fmt::Display for IoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for IoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MM" => Ok(IoMode::MM),
            "MO" => Ok(IoMode::MO),
            "OM" => Ok(IoMode::OM),
            "OO" => Ok(IoMode::OO),
            other => Err(Error::Config(format!("unknown io mode {other:?}; expected MM, MO, OM or OO"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitChannel {
    pub name: String,
    pub qubit: QubitParams,
    pub readout: ReadoutParams,
    /// Optical pump that places this qubit's conversion channel.
    pub pump: Option<PumpTone>,
}

/// Inclusive linear grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => vec![],
            1 => vec![self.start],
            n => (0..n).map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityConvention {
    #[default]
    PerClifford,
    PerPhysicalGate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UplinkConfig {
    pub temperature: Temperature,
    /// Pump power reflected toward the detector before the EDFA, W.
    pub pump_reflection: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Peak RF voltage of the reference π pulse at the modulator, in units
    /// of `v_pi`.
    pub pi_peak_over_vpi: f64,
    /// Relative Gaussian amplitude jitter per pulse on every drive path.
    pub amplitude_noise: f64,
    /// Extra jitter of the optical drive, added in quadrature.
    pub optical_excess_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Complex-envelope sample rate of readout records, S/s.
    pub sample_rate: f64,
    pub rabi_amplitudes: Grid,
    pub rabi_shots: usize,
    pub dual_shots: usize,
    pub single_shot_count: usize,
    pub single_shot_average: usize,
    pub t1_delays: Grid,
    pub ramsey_delays: Grid,
    pub echo_delays: Grid,
    pub coherence_shots: usize,
    pub ramsey_detuning_optical_readout: f64,
    pub ramsey_detuning_microwave_readout: f64,
    pub rb_lengths: Vec<usize>,
    pub rb_sequences: usize,
    pub rb_shots: usize,
    pub fidelity_convention: FidelityConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationConfig {
    pub pump: PumpTone,
    pub mw_powers_dbm: Vec<f64>,
    pub record_duration: f64,
    pub sample_rate: f64,
    pub sweep_span: f64,
    pub sweep_points: usize,
    pub tuning_wavelengths_nm: Grid,
    /// Upconverted readout frequencies for the 2-D power Rabi map, Hz.
    pub rabi_map_freqs: Grid,
    pub rabi_map_shots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub tunable_span: f64,
    pub spacing: f64,
    pub per_channel_pump: f64,
    pub cooling_budget: f64,
    pub target_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub seed: u64,
    pub io_mode: IoMode,
    pub qubits: Vec<QubitChannel>,
    pub transducer: Option<TransducerModel>,
    pub jpc: Option<JPCParams>,
    pub eom: Option<EomParams>,
    pub utc: Option<UtcParams>,
    pub stages: Vec<GainStage>,
    /// Back-end (digitizer) noise after the last stage.
    pub noise: NoiseSpec,
    pub detector: Photodetector,
    pub uplink: UplinkConfig,
    pub drive: DriveConfig,
    pub protocol: ProtocolConfig,
    pub characterization: CharacterizationConfig,
    pub budget: BudgetConfig,
}

/// Output-referred HEMT noise giving per-shot separation/σ = 3 on the
/// microwave readout path.
pub const HEMT_NOISE_PSD: f64 = 5.688_788_888_888_889e-18;
/// EDFA noise giving per-shot separation/σ = 0.8 on the optical path.
pub const EDFA_NOISE_PSD: f64 = 1.376_452_334_338_342_4e-16;
/// Calibrated drive amplitude jitter (microwave RB fidelity 0.9978).
pub const AMPLITUDE_NOISE: f64 = 0.025_673_975_935_087_92;
/// Calibrated optical excess jitter (optical RB fidelity 0.9959).
pub const OPTICAL_EXCESS_NOISE: f64 = 0.040_637_648_972_399_91;

impl Default for LinkConfig {
    fn default() -> Self {
        let q2 = QubitParams::measured_q2();
        let q1 = QubitParams { f_q: 5.054e9, pi_amp: 0.8, ..q2 };
        let readout = |f_r| ReadoutParams {
            f_r,
            iq_g: IQPoint::new(0.8, 0.6),
            iq_e: IQPoint::new(-0.8, 0.6),
            probe_duration: 10e-6,
            probe_power: 1e-16,
        };
        let pump = |nm| Some(PumpTone { wavelength_nm: nm, power: 0.1, phase: 0.0 });
        Self {
            seed: 20_240_601,
            io_mode: IoMode::OO,
            qubits: vec![
                QubitChannel { name: "Q1".into(), qubit: q1, readout: readout(7.509e9), pump: pump(1550.00) },
                QubitChannel { name: "Q2".into(), qubit: q2, readout: readout(7.584e9), pump: pump(1560.95) },
            ],
            transducer: Some(TransducerModel::default()),
            jpc: Some(JPCParams { pump_freq: 1.234e9, gain_db: 20.0, phase_offset: 0.0 }),
            eom: Some(EomParams::default()),
            utc: Some(UtcParams::default()),
            stages: vec![
                GainStage { label: StageLabel::Hemt, gain_db: 40.0, added_noise_psd: HEMT_NOISE_PSD },
                GainStage { label: StageLabel::Edfa, gain_db: 5.0, added_noise_psd: EDFA_NOISE_PSD },
            ],
            noise: NoiseSpec { psd: 1e-22, seed: 1 },
            detector: Photodetector::default(),
            uplink: UplinkConfig { temperature: Temperature::T3K, pump_reflection: 1e-3 },
            drive: DriveConfig {
                pi_peak_over_vpi: 0.05,
                amplitude_noise: AMPLITUDE_NOISE,
                optical_excess_noise: OPTICAL_EXCESS_NOISE,
            },
            protocol: ProtocolConfig {
                sample_rate: 1e9,
                rabi_amplitudes: Grid::new(0.0, 2.0, 41),
                rabi_shots: 2000,
                dual_shots: 50_000,
                single_shot_count: 2000,
                single_shot_average: 100,
                t1_delays: Grid::new(0.0, 200e-6, 41),
                ramsey_delays: Grid::new(0.0, 20e-6, 101),
                echo_delays: Grid::new(0.0, 60e-6, 41),
                coherence_shots: 400_000,
                ramsey_detuning_optical_readout: 0.20e6,
                ramsey_detuning_microwave_readout: 0.42e6,
                rb_lengths: vec![1, 20, 50, 100, 150, 200, 300, 400],
                rb_sequences: 30,
                rb_shots: 50,
                fidelity_convention: FidelityConvention::PerClifford,
            },
            characterization: CharacterizationConfig {
                pump: PumpTone { wavelength_nm: 1550.0, power: 0.1, phase: 0.0 },
                mw_powers_dbm: vec![-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0],
                record_duration: 20e-6,
                sample_rate: 50e6,
                sweep_span: 12e6,
                sweep_points: 241,
                tuning_wavelengths_nm: Grid::new(1534.0, 1570.0, 19),
                rabi_map_freqs: Grid::new(8.643e9, 8.843e9, 11),
                rabi_map_shots: 200,
            },
            budget: BudgetConfig {
                tunable_span: 200e6,
                spacing: 5e6,
                per_channel_pump: 10e-3,
                cooling_budget: 1.0,
                target_efficiency: 2.5e-6,
            },
        }
    }
}

impl LinkConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: LinkConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn stage(&self, label: StageLabel) -> Option<&GainStage> {
        self.stages.iter().find(|s| s.label == label)
    }

    pub fn qubit(&self, index: usize) -> Result<&QubitChannel> {
        self.qubits
            .get(index)
            .ok_or_else(|| Error::Config(format!("no qubit with index {index} ({} configured)", self.qubits.len())))
    }

    pub fn ramsey_detuning(&self) -> f64 {
        if self.io_mode.optical_readout() {
            self.protocol.ramsey_detuning_optical_readout
        } else {
            self.protocol.ramsey_detuning_microwave_readout
        }
    }

    pub fn with_mode(&self, mode: IoMode) -> Self {
        Self { io_mode: mode, ..self.clone() }
    }

    /// Checks that every block the configured mode needs is present and sane.
    pub fn validate(&self) -> Result<()> {
        self.validate_for(self.io_mode)
    }

    pub fn validate_for(&self, mode: IoMode) -> Result<()> {
        let missing = |what: &str| Err(Error::Config(format!("io mode {mode} requires a [{what}] section")));
        if self.qubits.is_empty() {
            return Err(Error::Config("at least one qubit must be configured".into()));
        }
        for q in &self.qubits {
            q.qubit.validate().map_err(|e| Error::Config(format!("{}: {e}", q.name)))?;
            q.readout.validate().map_err(|e| Error::Config(format!("{}: {e}", q.name)))?;
        }
        for s in &self.stages {
            s.validate()?;
        }
        if self.stage(StageLabel::Hemt).is_none() {
            return missing("stages (HEMT)");
        }
        if !(self.noise.psd >= 0.0) {
            return Err(Error::Config("noise.psd must be non-negative".into()));
        }
        if !(self.protocol.sample_rate > 0.0) {
            return Err(Error::Config("protocol.sample_rate must be positive".into()));
        }
        if mode.optical_drive() {
            match (&self.eom, &self.utc) {
                (Some(e), Some(u)) => {
                    e.validate()?;
                    u.validate()?;
                }
                (None, _) => return missing("eom"),
                (_, None) => return missing("utc"),
            }
            if !(self.drive.pi_peak_over_vpi > 0.0) {
                return Err(Error::Config("drive.pi_peak_over_vpi must be positive".into()));
            }
        }
        if !(self.drive.amplitude_noise >= 0.0 && self.drive.optical_excess_noise >= 0.0) {
            return Err(Error::Config("drive noise levels must be non-negative".into()));
        }
        if mode.optical_readout() {
            let Some(t) = &self.transducer else { return missing("transducer") };
            t.validate()?;
            let Some(j) = &self.jpc else { return missing("jpc") };
            j.validate()?;
            if self.stage(StageLabel::Edfa).is_none() {
                return missing("stages (EDFA)");
            }
            self.detector.validate()?;
            if !(self.uplink.pump_reflection >= 0.0) {
                return Err(Error::Config("uplink.pump_reflection must be non-negative".into()));
            }
            if let Some(q) = self.qubits.iter().find(|q| q.pump.is_none()) {
                return Err(Error::Config(format!("{} has no optical pump for optical readout", q.name)));
            }
        }
        Ok(())
    }
}

/// The pulse decay setting in force, for reporting.
pub fn pulse_decay_label(d: PulseDecay) -> &'static str {
    match d {
        PulseDecay::RelaxationOnly => "relaxation-only",
        PulseDecay::Full => "full",
    }
}
