//! Multiplexing budget: how many readout channels fit in the tuning span and
//! in the cryogenic pump-power budget, and the per-channel SNR.

use serde::{Deserialize, Serialize};

use crate::detection::StageLabel;
use crate::error::{Error, Result};
use crate::signal::db_to_amplitude;
use crate::transducer::photon_energy;

use super::config::{BudgetConfig, LinkConfig};
use super::result::ExperimentResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub channels_by_bandwidth: u64,
    pub channels_by_power: u64,
    pub channels: u64,
    /// Beat SNR of one channel in a band equal to the channel spacing.
    pub snr_db_per_channel: f64,
}

/// `floor(a/b)` that tolerates the rounding of exact decimal ratios such as
/// `1 W / 10 mW`.
fn whole_ratio(a: f64, b: f64) -> u64 {
    let r = a / b;
    (r * (1.0 + 1e-12)).floor().max(0.0) as u64
}

pub fn budget_report(cfg: &LinkConfig, b: &BudgetConfig) -> Result<BudgetReport> {
    if !(b.spacing > 0.0 && b.per_channel_pump > 0.0 && b.tunable_span >= 0.0 && b.cooling_budget >= 0.0) {
        return Err(Error::Config("budget needs positive spacing and pump power and non-negative span and cooling".into()));
    }
    if !(b.target_efficiency > 0.0) {
        return Err(Error::Config("budget target efficiency must be positive".into()));
    }
    let by_bw = whole_ratio(b.tunable_span, b.spacing);
    let by_power = whole_ratio(b.cooling_budget, b.per_channel_pump);

    // Signal: the first qubit's probe after the microwave amplifiers,
    // converted with the target efficiency at its channel.
    let q = cfg.qubit(0)?;
    let jpc = cfg.jpc.ok_or_else(|| Error::Config("budget needs [jpc]".into()))?;
    let hemt = cfg.stage(StageLabel::Hemt).ok_or_else(|| Error::Config("budget needs a HEMT stage".into()))?;
    let edfa = cfg.stage(StageLabel::Edfa).ok_or_else(|| Error::Config("budget needs an EDFA stage".into()))?;
    let pump = q.pump.ok_or_else(|| Error::Config("budget needs the first qubit's pump".into()))?;
    let f_mw = q.readout.f_r + jpc.pump_freq;
    let p_mw = q.readout.probe_power * db_to_amplitude(jpc.gain_db).powi(2) * db_to_amplitude(hemt.gain_db).powi(2);
    let f_opt = pump.optical_frequency() - f_mw;
    let flux_ratio = b.target_efficiency * b.per_channel_pump;
    let p_side = p_mw / photon_energy(f_mw) * flux_ratio * photon_energy(f_opt);
    let g = edfa.amplitude_gain().powi(2);
    let scale = cfg.detector.scale();
    let p_pump = cfg.uplink.pump_reflection * g;
    let beat = 4.0 * scale * scale * p_pump * p_side * g;
    let noise_psd = 4.0 * scale * scale * p_pump * edfa.added_noise_psd + cfg.noise.psd;
    let snr = beat / (noise_psd * b.spacing);
    Ok(BudgetReport {
        channels_by_bandwidth: by_bw,
        channels_by_power: by_power,
        channels: by_bw.min(by_power),
        snr_db_per_channel: 10.0 * snr.log10(),
    })
}

pub fn run_budget(cfg: &LinkConfig) -> Result<(BudgetReport, ExperimentResult)> {
    let b = cfg.budget;
    let report = budget_report(cfg, &b)?;
    let mut result = ExperimentResult::new("budget", cfg)?;
    if report.channels_by_bandwidth == 0 {
        result.warn(format!(
            "channel spacing {:.3e} Hz exceeds the tunable span {:.3e} Hz: no channels fit",
            b.spacing, b.tunable_span
        ));
    }
    result.scalars.insert("channels_by_bandwidth".into(), report.channels_by_bandwidth as f64);
    result.scalars.insert("channels_by_power".into(), report.channels_by_power as f64);
    result.scalars.insert("channels".into(), report.channels as f64);
    result.scalars.insert("snr_db_per_channel".into(), report.snr_db_per_channel);
    Ok((report, result))
}
