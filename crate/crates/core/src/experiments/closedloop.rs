//! Closed-loop suite: T1, Ramsey and Hahn-echo scans and randomized
//! benchmarking, through the configured drive and readout paths.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::clifford::CliffordGroup;
use crate::detection::{fit_damped_cosine, fit_exponential, fit_rb, FitResult};
use crate::error::{Error, Result};
use crate::qubit::{gaussian_nodes, idle_map, BlochMap, BlochState, IdleMode, PulseSpec, QubitParams};

use super::chain::{DrivePath, ReadoutChain};
use super::config::{FidelityConvention, IoMode, LinkConfig};
use super::result::{ExperimentResult, Trace};
use super::{averaged_readout, stream, Stream};

/// Average Clifford fidelity under microwave drive.
pub const MICROWAVE_RB_TARGET: f64 = 0.9978;
/// Average Clifford fidelity under optical drive.
pub const OPTICAL_RB_TARGET: f64 = 0.9959;

struct Pulses {
    half: BlochMap,
    pi: BlochMap,
    pi_y: BlochMap,
}

impl Pulses {
    fn new(drive: &DrivePath, q: &QubitParams) -> Self {
        let d = q.ref_pulse_duration;
        Self {
            half: drive.pulse_map(q, &PulseSpec::gaussian(d, 0.5, 0.0), 0.0),
            pi: drive.pulse_map(q, &PulseSpec::gaussian(d, 1.0, 0.0), 0.0),
            pi_y: drive.pulse_map(q, &PulseSpec::gaussian(d, 1.0, PI / 2.0), 0.0),
        }
    }
}

fn z_rotation(angle: f64) -> BlochMap {
    BlochMap::rotation(Vector3::z(), angle)
}

/// Shot-averaged Ramsey `P(|e⟩)` per delay, averaging over the quasi-static
/// offset by quadrature. The second pulse is the first one conjugated by a
/// z rotation, which is exact because decay is axially symmetric.
fn ramsey_expectations(drive: &DrivePath, q: &QubitParams, delays: &[f64], detuning: f64) -> Vec<f64> {
    let nodes: Vec<(f64, f64, BlochMap)> = gaussian_nodes(q.quasi_static_sigma)
        .into_iter()
        .map(|(w, off)| (w, off, drive.pulse_map(q, &PulseSpec::gaussian(q.ref_pulse_duration, 0.5, 0.0), off)))
        .collect();
    delays
        .iter()
        .map(|&d| {
            let phi = 2.0 * PI * detuning * d;
            let (rm, rp) = (z_rotation(-phi), z_rotation(phi));
            nodes
                .iter()
                .map(|(w, off, half)| {
                    let second = rm.then(half).then(&rp);
                    let map = half.then(&idle_map(q, d, IdleMode::Free { static_offset: *off })).then(&second);
                    w * map.apply(&BlochState::ground()).p_excited()
                })
                .sum()
        })
        .collect()
}

fn measure(
    cfg: &LinkConfig,
    chain: &ReadoutChain,
    s: Stream,
    qubit_index: usize,
    p_e: &[f64],
    shots: usize,
) -> Result<Vec<f64>> {
    let disc = chain.discriminator(0)?;
    Ok(p_e
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut rng = stream(cfg, s, &[qubit_index as u64, i as u64]);
            disc.population(averaged_readout(chain, &[p], shots, &mut rng)[0])
        })
        .collect())
}

fn record_fit(result: &mut ExperimentResult, name: &str, fit: FitResult, param: &str, scalar: &str) {
    result.scalars.insert(scalar.into(), fit.value(param));
    result.scalars.insert(format!("{scalar}_stderr"), fit.stderr(param));
    result.fits.insert(name.into(), fit);
}

/// T1, Ramsey and echo scans with fits, in `cfg.io_mode`.
pub fn run_coherence_suite(cfg: &LinkConfig, qubit_index: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let q = cfg.qubit(qubit_index)?.qubit;
    let drive = DrivePath::new(cfg, cfg.io_mode, &q)?;
    let chain = ReadoutChain::new(cfg, &[qubit_index])?;
    let pulses = Pulses::new(&drive, &q);
    let shots = cfg.protocol.coherence_shots;
    let mut result = ExperimentResult::new("coherence", cfg)?;
    for w in chain.warnings() {
        result.warn(w.clone());
    }
    let ground = BlochState::ground();

    let t1_delays = cfg.protocol.t1_delays.values();
    let t1_expected: Vec<f64> = t1_delays
        .iter()
        .map(|&d| pulses.pi.then(&idle_map(&q, d, IdleMode::EchoProtected)).apply(&ground).p_excited())
        .collect();
    let t1_measured = measure(cfg, &chain, Stream::T1, qubit_index, &t1_expected, shots)?;
    record_fit(&mut result, "t1", fit_exponential(&t1_delays, &t1_measured)?, "tau", "t1");

    let detuning = cfg.ramsey_detuning();
    let r_delays = cfg.protocol.ramsey_delays.values();
    let r_expected = ramsey_expectations(&drive, &q, &r_delays, detuning);
    let r_measured = measure(cfg, &chain, Stream::Ramsey, qubit_index, &r_expected, shots)?;
    let r_fit = fit_damped_cosine(&r_delays, &r_measured)?;
    result.scalars.insert("ramsey_freq".into(), r_fit.value("freq"));
    result.scalars.insert("ramsey_freq_stderr".into(), r_fit.stderr("freq"));
    result.scalars.insert("ramsey_period".into(), 1.0 / r_fit.value("freq"));
    result.scalars.insert("ramsey_detuning".into(), detuning);
    record_fit(&mut result, "ramsey", r_fit, "tau", "t2");

    let e_delays = cfg.protocol.echo_delays.values();
    let e_expected: Vec<f64> = e_delays
        .iter()
        .map(|&d| {
            let half = idle_map(&q, d / 2.0, IdleMode::EchoProtected);
            pulses.half.then(&half).then(&pulses.pi_y).then(&half).then(&pulses.half).apply(&ground).p_excited()
        })
        .collect();
    let e_measured = measure(cfg, &chain, Stream::Echo, qubit_index, &e_expected, shots)?;
    record_fit(&mut result, "echo", fit_exponential(&e_delays, &e_measured)?, "tau", "t2e");

    for (name, xs, measured, expected) in [
        ("t1", t1_delays, t1_measured, t1_expected),
        ("ramsey", r_delays, r_measured, r_expected),
        ("echo", e_delays, e_measured, e_expected),
    ] {
        result.raw.insert(format!("{name}_population"), measured.clone());
        result.summary.insert(
            name.into(),
            Trace::new("delay (s)", xs).with("population", measured).with("p_excited_expected", expected),
        );
    }
    Ok(result)
}

/// Per-mode coherence results plus a comparison record.
#[derive(Debug, Clone)]
pub struct CoherenceComparison {
    pub runs: Vec<ExperimentResult>,
    pub comparison: ExperimentResult,
}

/// The coherence suite in all four I/O modes on one plant. Every mode
/// draws from the same random streams.
pub fn run_coherence_all_modes(cfg: &LinkConfig, qubit_index: usize) -> Result<CoherenceComparison> {
    let runs: Vec<ExperimentResult> = IoMode::ALL
        .iter()
        .map(|&m| run_coherence_suite(&cfg.with_mode(m), qubit_index))
        .collect::<Result<_>>()?;
    let mut comparison = ExperimentResult::new("coherence_comparison", cfg)?;
    for key in ["t1", "t2", "t2e"] {
        let vals: Vec<(f64, f64)> = runs.iter().map(|r| (r.scalar(key), r.scalar(&format!("{key}_stderr")))).collect();
        let mut overlap = true;
        for (a, sa) in &vals {
            for (b, sb) in &vals {
                overlap &= (a - b).abs() <= sa + sb;
            }
        }
        let mut trace = Trace::new("mode index", (0..runs.len()).map(|k| k as f64).collect());
        trace.series.insert("value".into(), vals.iter().map(|v| v.0).collect());
        trace.series.insert("stderr".into(), vals.iter().map(|v| v.1).collect());
        comparison.summary.insert(key.into(), trace);
        for (r, (v, s)) in runs.iter().zip(&vals) {
            comparison.scalars.insert(format!("{}_{key}", r.metadata.io_mode), *v);
            comparison.scalars.insert(format!("{}_{key}_stderr", r.metadata.io_mode), *s);
        }
        comparison.scalars.insert(format!("{key}_intervals_overlap"), if overlap { 1.0 } else { 0.0 });
    }
    Ok(CoherenceComparison { runs, comparison })
}

/// Noisy Bloch map of every Clifford through `drive`.
fn clifford_maps(group: &CliffordGroup, drive: &DrivePath, q: &QubitParams) -> Vec<BlochMap> {
    let pulses: Vec<BlochMap> = crate::clifford::Pulse::ALL
        .iter()
        .map(|p| {
            let (a, phase) = p.amplitude_phase();
            drive.pulse_map(q, &PulseSpec::gaussian(q.ref_pulse_duration, a, phase), 0.0)
        })
        .collect();
    (0..group.len())
        .map(|c| group.decomposition(c).iter().fold(BlochMap::identity(), |acc, p| acc.then(&pulses[p.index()])))
        .collect()
}

/// Average Clifford fidelity `½ + tr(Rᵀ M)/6` over the group, which is what
/// the randomized-benchmarking decay measures.
fn mean_clifford_fidelity(group: &CliffordGroup, maps: &[BlochMap]) -> f64 {
    let total: f64 = maps.iter().enumerate().map(|(c, m)| 0.5 + (group.matrix(c).transpose() * m.m).trace() / 6.0).sum();
    total / maps.len() as f64
}

/// Twirled expectation of the per-Clifford fidelity for `mode`'s drive path.
pub fn rb_expected_fidelity(cfg: &LinkConfig, qubit_index: usize, mode: IoMode) -> Result<f64> {
    let q = cfg.qubit(qubit_index)?.qubit;
    let drive = DrivePath::new(cfg, mode, &q)?;
    let group = CliffordGroup::new()?;
    Ok(mean_clifford_fidelity(&group, &clifford_maps(&group, &drive, &q)))
}

/// Drive jitter (microwave, optical excess) that puts the expected Clifford
/// fidelity at the microwave and optical targets.
pub fn calibrate_drive_noise(cfg: &LinkConfig, qubit_index: usize) -> Result<(f64, f64)> {
    let solve = |target: f64, f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let (mut lo, mut hi) = (0.0, 0.3);
        if f(lo)? < target {
            return Err(Error::Config(format!("fidelity {target} is above the noise-free value")));
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let mw = solve(MICROWAVE_RB_TARGET, &|s| {
        let mut c = cfg.clone();
        c.drive.amplitude_noise = s;
        rb_expected_fidelity(&c, qubit_index, IoMode::MM)
    })?;
    let mut c = cfg.clone();
    c.drive.amplitude_noise = mw;
    let opt = solve(OPTICAL_RB_TARGET, &|s| {
        let mut cc = c.clone();
        cc.drive.optical_excess_noise = s;
        rb_expected_fidelity(&cc, qubit_index, IoMode::OM)
    })?;
    Ok((mw, opt))
}

/// Randomized benchmarking: `k_sequences` random Clifford sequences per
/// length, each closed by its recovery element, through `cfg.io_mode`.
pub fn run_rb(cfg: &LinkConfig, qubit_index: usize, m_values: &[usize], k_sequences: usize) -> Result<ExperimentResult> {
    if m_values.len() < 4 || m_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("RB needs at least four strictly ascending lengths".into()));
    }
    if k_sequences < 20 {
        return Err(Error::InvalidArgument("RB needs at least 20 sequences per length".into()));
    }
    cfg.validate()?;
    let q = cfg.qubit(qubit_index)?.qubit;
    let drive = DrivePath::new(cfg, cfg.io_mode, &q)?;
    let chain = ReadoutChain::new(cfg, &[qubit_index])?;
    let disc = chain.discriminator(0)?;
    let group = CliffordGroup::new()?;
    let maps = clifford_maps(&group, &drive, &q);
    let mut result = ExperimentResult::new("rb", cfg)?;
    for w in chain.warnings() {
        result.warn(w.clone());
    }
    let ground = BlochState::ground();
    let (mut mean_survival, mut expected, mut per_sequence) = (vec![], vec![], vec![]);
    for (mi, &m) in m_values.iter().enumerate() {
        let (mut acc, mut acc_exp) = (0.0, 0.0);
        for s in 0..k_sequences {
            let mut rng = stream(cfg, Stream::Rb, &[qubit_index as u64, mi as u64, s as u64]);
            let seq = group.random_sequence(m, &mut rng);
            let map = seq.iter().fold(BlochMap::identity(), |acc, &c| acc.then(&maps[c]));
            let p_e = map.apply(&ground).p_excited();
            let survival = 1.0 - disc.population(averaged_readout(&chain, &[p_e], cfg.protocol.rb_shots, &mut rng)[0]);
            per_sequence.push(survival);
            acc += survival;
            acc_exp += 1.0 - p_e;
        }
        mean_survival.push(acc / k_sequences as f64);
        expected.push(acc_exp / k_sequences as f64);
    }
    let ms: Vec<f64> = m_values.iter().map(|&m| m as f64).collect();
    let fit = fit_rb(&ms, &mean_survival)?;
    let per_clifford = fit.value("fidelity");
    let per_clifford_err = fit.stderr("fidelity");
    let mean_pulses = group.mean_pulses();
    let (fidelity, err) = match cfg.protocol.fidelity_convention {
        FidelityConvention::PerClifford => (per_clifford, per_clifford_err),
        FidelityConvention::PerPhysicalGate => (1.0 - (1.0 - per_clifford) / mean_pulses, per_clifford_err / mean_pulses),
    };
    result.scalars.insert("fidelity".into(), fidelity);
    result.scalars.insert("fidelity_stderr".into(), err);
    result.scalars.insert("fidelity_per_clifford".into(), per_clifford);
    result.scalars.insert("p".into(), fit.value("p"));
    result.scalars.insert("expected_fidelity_per_clifford".into(), mean_clifford_fidelity(&group, &maps));
    result.scalars.insert("pulses_per_clifford".into(), mean_pulses);
    result.scalars.insert("total_shots".into(), (m_values.len() * k_sequences * cfg.protocol.rb_shots) as f64);
    result.fits.insert("rb".into(), fit);
    result.raw.insert("survival_per_sequence".into(), per_sequence);
    result.summary.insert(
        "rb".into(),
        Trace::new("sequence length", ms).with("survival", mean_survival).with("survival_expected", expected),
    );
    Ok(result)
}
