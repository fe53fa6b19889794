//! Experiment orchestration: configuration, the drive and readout paths, the
//! characterization, readout and closed-loop suites, and result output.

pub mod budget;
pub mod chain;
pub mod characterize;
pub mod closedloop;
pub mod config;
pub mod plot;
pub mod readout;
pub mod result;

use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::signal::{rng_from_seed, sub_seed, IQPoint, SimRng};

pub use budget::{run_budget, BudgetReport};
pub use chain::{DrivePath, ReadoutChain, ReadoutChannel};
pub use characterize::{run_channel_spectra, run_linearity, run_tunability};
pub use closedloop::{
    calibrate_drive_noise, rb_expected_fidelity, run_coherence_all_modes, run_coherence_suite, run_rb,
    CoherenceComparison,
};
pub use config::{FidelityConvention, Grid, IoMode, LinkConfig, QubitChannel};
pub use readout::{run_dual_readout, run_power_rabi, run_single_shot, PumpPolicy, ReadoutSweep};
pub use result::{ExperimentResult, Trace};

/// Stream labels for `sub_seed`, so every experiment draws from its own
/// reproducible stream independent of the I/O mode.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Rabi = 1,
    RabiMap,
    Dual,
    DualSpectrum,
    SingleShot,
    T1,
    Ramsey,
    Echo,
    Rb,
    Linearity,
    Spectra,
}

pub(crate) fn stream(cfg: &LinkConfig, s: Stream, tags: &[u64]) -> SimRng {
    let mut all = vec![cfg.noise.seed, s as u64];
    all.extend_from_slice(tags);
    rng_from_seed(sub_seed(cfg.seed, &all))
}

/// Mean demodulated IQ per channel over `shots` repetitions, each qubit
/// projected with its own excited-state probability. The excited count is
/// binomial and the chain is linear with Gaussian noise, so the mean is
/// drawn in closed form with the same distribution as a shot-by-shot loop.
pub(crate) fn averaged_readout(chain: &ReadoutChain, p_excited: &[f64], shots: usize, rng: &mut SimRng) -> Vec<IQPoint> {
    let n = shots.max(1);
    let responses: Vec<IQPoint> = chain
        .channels()
        .iter()
        .zip(p_excited)
        .map(|(c, &p)| {
            let excited = Binomial::new(n as u64, p.clamp(0.0, 1.0)).map_or(0, |b| b.sample(rng)) as f64;
            let f = excited / n as f64;
            c.readout.iq_e * f + c.readout.iq_g * (1.0 - f)
        })
        .collect();
    let scale = 1.0 / (n as f64).sqrt();
    chain
        .expected(&responses)
        .into_iter()
        .enumerate()
        .map(|(k, m)| {
            let s = chain.sigma(k) * scale;
            let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            IQPoint::new(m.i + s * a, m.q + s * b)
        })
        .collect()
}
