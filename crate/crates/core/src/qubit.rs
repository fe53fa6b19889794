//! Bloch-vector model of a transmon with dispersive readout.
//!
//! Conventions: `z = +1` is `|g⟩`, `P(|e⟩) = (1 − z)/2`. A pulse with phase
//! `φ` rotates (right-handed) about `(cos φ, sin φ, 0)`; a positive frequency
//! offset rotates the transverse component about `+z`.
//!
//! Every operation with decay is an affine map `v ↦ M·v + b` on the Bloch
//! vector, so sequences are built by composing [`BlochMap`]s once and then
//! applied per shot.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{db_to_amplitude, ComplexEnvelope, IQPoint, SimRng};

/// Time slices used to integrate a shaped pulse.
pub const PULSE_SLICES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let s = Self { x, y, z };
        if !(s.norm() <= 1.0 + 1e-12) {
            return Err(invalid(format!("Bloch vector ({x}, {y}, {z}) lies outside the unit ball")));
        }
        Ok(s)
    }

    pub fn ground() -> Self {
        Self { x: 0.0, y: 0.0, z: 1.0 }
    }

    pub fn excited() -> Self {
        Self { x: 0.0, y: 0.0, z: -1.0 }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn transverse(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn p_excited(&self) -> f64 {
        ((1.0 - self.z) / 2.0).clamp(0.0, 1.0)
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    fn from_vector(v: Vector3<f64>) -> Self {
        Self { x: v.x, y: v.y, z: v.z }
    }
}

/// Affine map on the Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMap {
    pub m: Matrix3<f64>,
    pub b: Vector3<f64>,
}

impl BlochMap {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity(), b: Vector3::zeros() }
    }

    /// Right-handed rotation by `angle` about `axis` (need not be normalized).
    pub fn rotation(axis: Vector3<f64>, angle: f64) -> Self {
        let norm = axis.norm();
        if norm == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let n = axis / norm;
        let (s, c) = angle.sin_cos();
        let k = Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0);
        let m = Matrix3::identity() * c + k * s + (n * n.transpose()) * (1.0 - c);
        Self { m, b: Vector3::zeros() }
    }

    /// Longitudinal relaxation toward `|g⟩` and transverse damping.
    pub fn decay(duration: f64, t1: f64, t2: f64) -> Self {
        let e1 = (-duration / t1).exp();
        let e2 = (-duration / t2).exp();
        Self {
            m: Matrix3::from_diagonal(&Vector3::new(e2, e2, e1)),
            b: Vector3::new(0.0, 0.0, 1.0 - e1),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &BlochMap) -> BlochMap {
        BlochMap { m: next.m * self.m, b: next.m * self.b + next.b }
    }

    pub fn apply(&self, s: &BlochState) -> BlochState {
        BlochState::from_vector(self.m * s.vector() + self.b)
    }

    /// Weighted average of maps; an ensemble of affine maps acts as their mean.
    pub fn weighted_mean(maps: &[(f64, BlochMap)]) -> BlochMap {
        let total: f64 = maps.iter().map(|(w, _)| w).sum();
        let mut out = BlochMap { m: Matrix3::zeros(), b: Vector3::zeros() };
        for (w, map) in maps {
            out.m += map.m * (*w / total);
            out.b += map.b * (*w / total);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseDecay {
    /// Only energy relaxation acts while a gate is driven; pure dephasing is
    /// treated as slow compared to a gate.
    #[default]
    RelaxationOnly,
    /// Relaxation plus the free-evolution transverse decay.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// Drive frequency, Hz.
    pub f_q: f64,
    pub t1: f64,
    /// Ramsey (free-evolution) coherence time.
    pub t2: f64,
    /// Hahn-echo coherence time.
    pub t2e: f64,
    /// Received drive amplitude (V) of the reference π pulse.
    pub pi_amp: f64,
    /// Std of the shot-to-shot qubit frequency offset, Hz.
    pub quasi_static_sigma: f64,
    /// Duration of the pulse `pi_amp` was calibrated with, s.
    #[serde(default = "default_ref_pulse")]
    pub ref_pulse_duration: f64,
    #[serde(default)]
    pub pulse_decay: PulseDecay,
}

fn default_ref_pulse() -> f64 {
    120e-9
}

impl QubitParams {
    /// Published coherence of the closed-loop qubit. `quasi_static_sigma` is
    /// the value calibrated so the Ramsey fit returns `t2`.
    pub fn measured_q2() -> Self {
        Self {
            f_q: 4.954e9,
            t1: 51.0e-6,
            t2: 8.8e-6,
            t2e: 16.2e-6,
            pi_amp: 1.0,
            quasi_static_sigma: crate::qubit::CALIBRATED_QUASI_STATIC_SIGMA,
            ref_pulse_duration: 120e-9,
            pulse_decay: PulseDecay::RelaxationOnly,
        }
    }

    /// No decay of any kind.
    pub fn ideal(f_q: f64) -> Self {
        Self {
            f_q,
            t1: f64::INFINITY,
            t2: f64::INFINITY,
            t2e: f64::INFINITY,
            pi_amp: 1.0,
            quasi_static_sigma: 0.0,
            ref_pulse_duration: 120e-9,
            pulse_decay: PulseDecay::RelaxationOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t2 > 0.0 && self.t2e > 0.0) {
            return Err(Error::Config("coherence times must be positive".into()));
        }
        if self.t2 > 2.0 * self.t1 || self.t2e > 2.0 * self.t1 {
            return Err(Error::Config(format!(
                "T2 = {:e} s and T2E = {:e} s must not exceed 2·T1 = {:e} s",
                self.t2,
                self.t2e,
                2.0 * self.t1
            )));
        }
        if self.t2e < self.t2 {
            return Err(Error::Config("T2E must be at least T2".into()));
        }
        if !(self.quasi_static_sigma >= 0.0) || !(self.pi_amp > 0.0) || !(self.ref_pulse_duration > 0.0) {
            return Err(Error::Config("quasi_static_sigma ≥ 0, pi_amp > 0 and ref_pulse_duration > 0 required".into()));
        }
        Ok(())
    }

    /// Exponential transverse time constant for free evolution. With
    /// quasi-static noise configured, the exponential part is the
    /// echo-limited `t2e` and the noise supplies the rest of the Ramsey decay;
    /// without it, `t2` is used directly.
    pub fn free_exponential_t2(&self) -> f64 {
        if self.quasi_static_sigma > 0.0 {
            self.t2e
        } else {
            self.t2
        }
    }

    fn pulse_t2(&self) -> f64 {
        match self.pulse_decay {
            PulseDecay::RelaxationOnly => 2.0 * self.t1,
            PulseDecay::Full => self.free_exponential_t2(),
        }
    }
}

/// Quasi-static frequency noise that makes the default Ramsey fit return
/// 8.8 μs on top of a 16.2 μs exponential (see `calibrate_quasi_static_sigma`).
pub const CALIBRATED_QUASI_STATIC_SIGMA: f64 = 13_989.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub duration: f64,
    /// Peak amplitude as a fraction of `pi_amp`.
    pub amplitude: f64,
    pub phase: f64,
    /// Drive detuning from the qubit, Hz.
    pub detuning: f64,
}

impl PulseSpec {
    pub fn gaussian(duration: f64, amplitude: f64, phase: f64) -> Self {
        Self { shape: PulseShape::Gaussian, duration, amplitude, phase, detuning: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.amplitude.is_finite() || !self.phase.is_finite() {
            return Err(invalid("pulse needs positive duration and finite amplitude/phase"));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.duration / 4.0
    }

    /// Normalized envelope at slice midpoints, truncated at ±2σ.
    pub fn envelope(&self) -> [f64; PULSE_SLICES] {
        let mut g = [0.0; PULSE_SLICES];
        for (k, v) in g.iter_mut().enumerate() {
            let u = (k as f64 + 0.5) / PULSE_SLICES as f64 - 0.5;
            // σ = duration/4 → u/σ_u with σ_u = 1/4.
            *v = (-(u * 4.0).powi(2) / 2.0).exp();
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    pub f_r: f64,
    pub iq_g: IQPoint,
    pub iq_e: IQPoint,
    pub probe_duration: f64,
    /// W at the resonator.
    pub probe_power: f64,
}

impl ReadoutParams {
    pub fn validate(&self) -> Result<()> {
        if self.iq_g == self.iq_e {
            return Err(Error::Config("iq_g and iq_e must differ".into()));
        }
        if !(self.probe_duration > 0.0) || !(self.probe_power >= 0.0) {
            return Err(Error::Config("probe needs positive duration and non-negative power".into()));
        }
        Ok(())
    }

    pub fn response(&self, outcome: Outcome) -> IQPoint {
        match outcome {
            Outcome::G => self.iq_g,
            Outcome::E => self.iq_e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JPCParams {
    pub pump_freq: f64,
    pub gain_db: f64,
    #[serde(default)]
    pub phase_offset: f64,
}

impl JPCParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain_db >= 0.0) || !(self.pump_freq >= 0.0) {
            return Err(Error::Config("JPC gain and pump frequency must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    G,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdleMode {
    /// Ramsey-type free evolution with this shot's frequency offset.
    Free { static_offset: f64 },
    /// Refocused evolution: decays with `t2e`, immune to static offsets.
    EchoProtected,
}

/// Pulse map with a drive response: `transfer` takes the commanded envelope
/// (fraction of `pi_amp`) to the delivered one.
pub fn pulse_map_with(
    q: &QubitParams,
    p: &PulseSpec,
    static_offset: f64,
    transfer: &dyn Fn(f64) -> f64,
) -> BlochMap {
    let g = p.envelope();
    let n = PULSE_SLICES as f64;
    let area_unit: f64 = g.iter().sum::<f64>() / n;
    let dt = p.duration / n;
    // Angle per slice so that amplitude 1 with the reference duration is π.
    let angle_scale = PI * (p.duration / q.ref_pulse_duration) / (n * area_unit);
    let half_decay = BlochMap::decay(dt / 2.0, q.t1, q.pulse_t2());
    let detuning_angle = 2.0 * PI * (p.detuning + static_offset) * dt;
    let (s, c) = p.phase.sin_cos();
    g.iter().fold(BlochMap::identity(), |acc, &gk| {
        let theta = angle_scale * transfer(p.amplitude * gk);
        let axis = Vector3::new(theta * c, theta * s, detuning_angle);
        let angle = axis.norm();
        acc.then(&half_decay).then(&BlochMap::rotation(axis, angle)).then(&half_decay)
    })
}

pub fn pulse_map(q: &QubitParams, p: &PulseSpec) -> BlochMap {
    pulse_map_with(q, p, 0.0, &|a| a)
}

pub fn apply_pulse(state: &BlochState, q: &QubitParams, p: &PulseSpec) -> BlochState {
    pulse_map(q, p).apply(state)
}

/// Average of a pulse map over Gaussian relative amplitude noise of std
/// `sigma`, by quadrature on a fixed grid.
pub fn amplitude_noise_average(sigma: f64, map_at: impl Fn(f64) -> BlochMap) -> BlochMap {
    if sigma == 0.0 {
        return map_at(1.0);
    }
    const NODES: usize = 41;
    let span = 6.0;
    let maps: Vec<(f64, BlochMap)> = (0..NODES)
        .map(|k| {
            let u = -span + 2.0 * span * k as f64 / (NODES - 1) as f64;
            ((-u * u / 2.0).exp(), map_at(1.0 + sigma * u))
        })
        .collect();
    BlochMap::weighted_mean(&maps)
}

pub fn idle_map(q: &QubitParams, duration: f64, mode: IdleMode) -> BlochMap {
    match mode {
        IdleMode::Free { static_offset } => {
            let decay = BlochMap::decay(duration, q.t1, q.free_exponential_t2());
            let rot = BlochMap::rotation(Vector3::z(), 2.0 * PI * static_offset * duration);
            decay.then(&rot)
        }
        IdleMode::EchoProtected => BlochMap::decay(duration, q.t1, q.t2e),
    }
}

pub fn idle(state: &BlochState, q: &QubitParams, duration: f64, mode: IdleMode) -> Result<BlochState> {
    if !(duration >= 0.0) {
        return Err(invalid("idle duration must be non-negative"));
    }
    Ok(idle_map(q, duration, mode).apply(state))
}

/// Builds the standard sequences from a pulse factory, so the same code runs
/// with ideal pulses or with a drive path attached.
pub struct SequenceBuilder<'a> {
    pub q: &'a QubitParams,
    pub pulse: &'a dyn Fn(&PulseSpec, f64) -> BlochMap,
}

impl SequenceBuilder<'_> {
    fn ref_pulse(&self, amplitude: f64, phase: f64, offset: f64) -> BlochMap {
        (self.pulse)(&PulseSpec::gaussian(self.q.ref_pulse_duration, amplitude, phase), offset)
    }

    pub fn rabi(&self, amplitude: f64) -> BlochMap {
        self.ref_pulse(amplitude, 0.0, 0.0)
    }

    pub fn t1(&self, delay: f64) -> BlochMap {
        self.ref_pulse(1.0, 0.0, 0.0).then(&idle_map(self.q, delay, IdleMode::EchoProtected))
    }

    /// π/2 – free idle – π/2 with the second pulse phase advanced by
    /// `2π·detuning·delay`.
    pub fn ramsey(&self, delay: f64, detuning: f64, static_offset: f64) -> BlochMap {
        self.ref_pulse(0.5, 0.0, static_offset)
            .then(&idle_map(self.q, delay, IdleMode::Free { static_offset }))
            .then(&self.ref_pulse(0.5, 2.0 * PI * detuning * delay, static_offset))
    }

    /// π/2(x) – τ/2 – π(y) – τ/2 – π/2(x).
    pub fn echo(&self, delay: f64) -> BlochMap {
        let half = idle_map(self.q, delay / 2.0, IdleMode::EchoProtected);
        self.ref_pulse(0.5, 0.0, 0.0)
            .then(&half)
            .then(&self.ref_pulse(1.0, PI / 2.0, 0.0))
            .then(&half)
            .then(&self.ref_pulse(0.5, 0.0, 0.0))
    }
}

fn ideal_pulse(q: &QubitParams) -> impl Fn(&PulseSpec, f64) -> BlochMap + '_ {
    move |p, offset| pulse_map_with(q, p, offset, &|a| a)
}

/// Final state of one Ramsey shot with frequency offset `static_offset`.
pub fn ramsey_state(q: &QubitParams, delay: f64, detuning: f64, static_offset: f64) -> BlochState {
    let pulse = ideal_pulse(q);
    SequenceBuilder { q, pulse: &pulse }
        .ramsey(delay, detuning, static_offset)
        .apply(&BlochState::ground())
}

/// Shot-averaged `P(|e⟩)` over the quasi-static offset distribution, by
/// quadrature (no sampling).
pub fn ramsey_expectation(q: &QubitParams, delay: f64, detuning: f64) -> f64 {
    let pulse = ideal_pulse(q);
    let b = SequenceBuilder { q, pulse: &pulse };
    gaussian_average(q.quasi_static_sigma, |offset| {
        b.ramsey(delay, detuning, offset).apply(&BlochState::ground()).p_excited()
    })
}

fn gaussian_average(sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
    gaussian_nodes(sigma).iter().map(|&(w, x)| w * f(x)).sum()
}

/// Normalized weights and abscissae averaging over a zero-mean Gaussian of
/// std `sigma` (a single node when `sigma` is zero).
pub fn gaussian_nodes(sigma: f64) -> Vec<(f64, f64)> {
    if sigma == 0.0 {
        return vec![(1.0, 0.0)];
    }
    const NODES: usize = 201;
    let span = 8.0;
    let raw: Vec<(f64, f64)> = (0..NODES)
        .map(|k| {
            let u = -span + 2.0 * span * k as f64 / (NODES - 1) as f64;
            ((-u * u / 2.0).exp(), sigma * u)
        })
        .collect();
    let total: f64 = raw.iter().map(|p| p.0).sum();
    raw.into_iter().map(|(w, x)| (w / total, x)).collect()
}

/// Monte Carlo Ramsey: fraction of `|e⟩` outcomes per delay, drawing a fresh
/// frequency offset for every shot.
pub fn ramsey_sequence(
    q: &QubitParams,
    delays: &[f64],
    artificial_detuning: f64,
    shots: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(invalid("need at least one shot"));
    }
    let normal = rand_distr::Normal::new(0.0, q.quasi_static_sigma.max(0.0))
        .map_err(|e| invalid(e.to_string()))?;
    let pulse = ideal_pulse(q);
    let b = SequenceBuilder { q, pulse: &pulse };
    Ok(delays
        .iter()
        .map(|&d| {
            let excited = (0..shots)
                .filter(|_| {
                    let offset = rand_distr::Distribution::sample(&normal, rng);
                    let p = b.ramsey(d, artificial_detuning, offset).apply(&BlochState::ground()).p_excited();
                    rng.random::<f64>() < p
                })
                .count();
            excited as f64 / shots as f64
        })
        .collect())
}

pub fn echo_state(q: &QubitParams, delay: f64) -> BlochState {
    let pulse = ideal_pulse(q);
    SequenceBuilder { q, pulse: &pulse }.echo(delay).apply(&BlochState::ground())
}

/// Monte Carlo Hahn echo: fraction of `|e⟩` outcomes per delay.
pub fn echo_sequence(q: &QubitParams, delays: &[f64], shots: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(invalid("need at least one shot"));
    }
    Ok(delays
        .iter()
        .map(|&d| {
            let p = echo_state(q, d).p_excited();
            (0..shots).filter(|_| rng.random::<f64>() < p).count() as f64 / shots as f64
        })
        .collect())
}

/// Projective measurement in the energy basis.
pub fn project(state: &BlochState, rng: &mut SimRng) -> Outcome {
    if rng.random::<f64>() < state.p_excited() {
        Outcome::E
    } else {
        Outcome::G
    }
}

/// Rectangular probe reflected off the resonator for a given outcome.
pub fn probe_envelope(outcome: Outcome, r: &ReadoutParams, sample_rate: f64) -> Result<ComplexEnvelope> {
    let n = (r.probe_duration * sample_rate).round() as usize;
    if n == 0 {
        return Err(invalid("probe shorter than one sample"));
    }
    let amp = r.response(outcome).to_complex() * r.probe_power.sqrt();
    ComplexEnvelope::new(vec![amp; n], sample_rate, r.f_r)
}

pub fn measure_dispersive(
    state: &BlochState,
    r: &ReadoutParams,
    sample_rate: f64,
    rng: &mut SimRng,
) -> Result<(Outcome, ComplexEnvelope)> {
    let outcome = project(state, rng);
    Ok((outcome, probe_envelope(outcome, r, sample_rate)?))
}

/// Ideal three-wave-mixing upconversion: adds the pump frequency, applies the
/// gain and a fixed phase.
pub fn jpc_upconvert(env: &ComplexEnvelope, jpc: &JPCParams) -> ComplexEnvelope {
    env.scaled(Complex64::from_polar(db_to_amplitude(jpc.gain_db), jpc.phase_offset))
        .with_carrier(env.carrier_freq() + jpc.pump_freq)
}

/// Ramsey quasi-static noise that makes the damped-cosine fit over `delays`
/// return `q.t2`, found by bisection on noiseless expectation curves.
pub fn calibrate_quasi_static_sigma(q: &QubitParams, delays: &[f64], detuning: f64) -> Result<f64> {
    let fitted_t2 = |sigma: f64| -> Result<f64> {
        let qq = QubitParams { quasi_static_sigma: sigma, ..*q };
        let ys: Vec<f64> = delays.iter().map(|&d| ramsey_expectation(&qq, d, detuning)).collect();
        let fit = crate::detection::fit::fit_damped_cosine(delays, &ys)?;
        Ok(fit.value("tau"))
    };
    let (mut lo, mut hi) = (1.0, 1e6);
    if fitted_t2(lo)? < q.t2 {
        return Err(Error::Config("target T2 is above the echo-limited decay".into()));
    }
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if fitted_t2(mid)? > q.t2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::rng_from_seed;

    fn ideal() -> QubitParams {
        QubitParams::ideal(4.954e9)
    }

    fn close(a: &BlochState, b: &BlochState, tol: f64) -> bool {
        (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol && (a.z - b.z).abs() < tol
    }

    #[test]
    fn pi_and_half_pi_pulses() {
        let q = ideal();
        let pi = apply_pulse(&BlochState::ground(), &q, &PulseSpec::gaussian(120e-9, 1.0, 0.0));
        assert!(close(&pi, &BlochState::excited(), 1e-12), "{pi:?}");
        let half = apply_pulse(&BlochState::ground(), &q, &PulseSpec::gaussian(120e-9, 0.5, 0.0));
        assert!(half.z.abs() < 1e-12 && (half.y.abs() - 1.0).abs() < 1e-12, "{half:?}");
    }

    #[test]
    fn longer_pulse_has_proportional_area() {
        let q = ideal();
        let s = apply_pulse(&BlochState::ground(), &q, &PulseSpec::gaussian(240e-9, 0.5, 0.0));
        assert!(close(&s, &BlochState::excited(), 1e-12));
    }

    #[test]
    fn zero_amplitude_pulse_only_decays() {
        let q = QubitParams { pulse_decay: PulseDecay::Full, ..QubitParams::measured_q2() };
        let start = BlochState::new(0.6, 0.0, -0.8).unwrap();
        let p = PulseSpec::gaussian(120e-9, 0.0, 0.0);
        let after = apply_pulse(&start, &q, &p);
        let idled = idle(&start, &q, 120e-9, IdleMode::Free { static_offset: 0.0 }).unwrap();
        assert!(close(&after, &idled, 1e-12), "{after:?} {idled:?}");
    }

    #[test]
    fn two_half_pi_equal_one_pi() {
        let q = ideal();
        for phase in [0.0, 0.7, PI / 2.0] {
            let h = PulseSpec::gaussian(120e-9, 0.5, phase);
            let twice = apply_pulse(&apply_pulse(&BlochState::ground(), &q, &h), &q, &h);
            let once = apply_pulse(&BlochState::ground(), &q, &PulseSpec::gaussian(120e-9, 1.0, phase));
            assert!(close(&twice, &once, 1e-10));
        }
    }

    #[test]
    fn power_rabi_is_sin_squared() {
        let q = ideal();
        for k in 0..=40 {
            let a = k as f64 * 0.05;
            let p = apply_pulse(&BlochState::ground(), &q, &PulseSpec::gaussian(120e-9, a, 0.0)).p_excited();
            assert!((p - (PI * a / 2.0).sin().powi(2)).abs() < 1e-12, "A={a}");
        }
    }

    #[test]
    fn idle_zero_duration_and_t1_relaxation() {
        let q = QubitParams::measured_q2();
        let s = BlochState::new(0.3, -0.2, 0.1).unwrap();
        assert_eq!(idle(&s, &q, 0.0, IdleMode::EchoProtected).unwrap(), s);
        let relaxed = idle(&BlochState::excited(), &q, q.t1, IdleMode::EchoProtected).unwrap();
        assert!((relaxed.z - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-12);
        assert!((relaxed.z - 0.264).abs() < 1e-3);
        assert!(idle(&s, &q, -1.0, IdleMode::EchoProtected).is_err());
    }

    #[test]
    fn free_idle_decays_with_t2_without_quasi_static_noise() {
        let q = QubitParams { quasi_static_sigma: 0.0, ..QubitParams::measured_q2() };
        let s = BlochState::new(1.0, 0.0, 0.0).unwrap();
        let out = idle(&s, &q, q.t2, IdleMode::Free { static_offset: 0.0 }).unwrap();
        assert!((out.transverse() - (-1.0f64).exp()).abs() < 1e-12);
        let echo = idle(&s, &q, q.t2e, IdleMode::EchoProtected).unwrap();
        assert!((echo.transverse() - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn static_offset_rotates_transverse_component() {
        let q = ideal();
        let s = BlochState::new(1.0, 0.0, 0.0).unwrap();
        let out = idle(&s, &q, 1e-6, IdleMode::Free { static_offset: 0.25e6 }).unwrap();
        assert!(close(&out, &BlochState::new(0.0, 1.0, 0.0).unwrap(), 1e-12));
        let echo = idle(&s, &q, 1e-6, IdleMode::EchoProtected).unwrap();
        assert!(close(&echo, &s, 1e-12));
    }

    #[test]
    fn ramsey_and_echo_at_zero_delay() {
        let q = ideal();
        assert!((ramsey_state(&q, 0.0, 0.2e6, 0.0).p_excited() - 1.0).abs() < 1e-12);
        assert!((echo_state(&q, 0.0).p_excited() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ramsey_fringe_follows_expected_formula() {
        let q = QubitParams { t1: f64::INFINITY, quasi_static_sigma: 0.0, t2: 8.8e-6, t2e: 8.8e-6, ..ideal() };
        let det = 0.20e6;
        for k in 0..50 {
            let t = k as f64 * 0.4e-6;
            let p = ramsey_state(&q, t, det, 0.0).p_excited();
            let expect = 0.5 * (1.0 + (-t / q.t2).exp() * (2.0 * PI * det * t).cos());
            assert!((p - expect).abs() < 1e-12, "t={t} {p} {expect}");
        }
        // Fringe period 1/Δ = 5 μs: one period later the phase returns.
        let a = ramsey_state(&QubitParams { t2: f64::INFINITY, t2e: f64::INFINITY, ..q }, 1.3e-6, det, 0.0);
        let b = ramsey_state(&QubitParams { t2: f64::INFINITY, t2e: f64::INFINITY, ..q }, 6.3e-6, det, 0.0);
        assert!((a.p_excited() - b.p_excited()).abs() < 1e-12);
    }

    #[test]
    fn echo_contrast_at_t2e() {
        let q = QubitParams { t1: f64::INFINITY, ..QubitParams::measured_q2() };
        let p = echo_state(&q, q.t2e).p_excited();
        assert!(((2.0 * p - 1.0) - (-1.0f64).exp()).abs() < 1e-12, "{p}");
    }

    #[test]
    fn measurement_statistics() {
        let r = ReadoutParams {
            f_r: 7.509e9,
            iq_g: IQPoint::new(0.8, 0.6),
            iq_e: IQPoint::new(-0.8, 0.6),
            probe_duration: 1e-6,
            probe_power: 4.0,
        };
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let (o, env) = measure_dispersive(&BlochState::ground(), &r, 1e8, &mut rng).unwrap();
            assert_eq!(o, Outcome::G);
            assert!((env.samples()[0] - Complex64::new(1.6, 1.2)).norm() < 1e-12);
            assert_eq!(project(&BlochState::excited(), &mut rng), Outcome::E);
        }
        let mid = BlochState::new(1.0, 0.0, 0.0).unwrap();
        let n = 100_000;
        let e = (0..n).filter(|_| project(&mid, &mut rng) == Outcome::E).count() as f64 / n as f64;
        assert!((e - 0.5).abs() < 0.005, "{e}");
    }

    #[test]
    fn jpc_frequency_arithmetic() {
        let jpc = JPCParams { pump_freq: 1.234e9, gain_db: 0.0, phase_offset: 0.0 };
        for (f_in, f_out) in [(7.509e9, 8.743e9), (7.584e9, 8.818e9)] {
            let env = ComplexEnvelope::new(vec![Complex64::new(0.3, 0.4); 4], 1e9, f_in).unwrap();
            let up = jpc_upconvert(&env, &jpc);
            assert_eq!(up.carrier_freq(), f_out);
            assert_eq!(up.samples(), env.samples());
        }
        let gain = JPCParams { gain_db: 20.0, ..jpc };
        let env = ComplexEnvelope::new(vec![Complex64::new(1.0, 0.0); 4], 1e9, 7.5e9).unwrap();
        assert!((jpc_upconvert(&env, &gain).samples()[0].re - 10.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        QubitParams::measured_q2().validate().unwrap();
        let bad = QubitParams { t2: 200e-6, ..QubitParams::measured_q2() };
        assert!(bad.validate().is_err());
        let bad = QubitParams { t2e: 5e-6, ..QubitParams::measured_q2() };
        assert!(bad.validate().is_err());
        assert!(BlochState::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ramsey_monte_carlo_matches_expectation() {
        let q = QubitParams::measured_q2();
        let delays = [0.0, 2e-6, 5e-6, 9e-6];
        let mut rng = rng_from_seed(9);
        let mc = ramsey_sequence(&q, &delays, 0.2e6, 20_000, &mut rng).unwrap();
        for (d, p) in delays.iter().zip(mc) {
            let e = ramsey_expectation(&q, *d, 0.2e6);
            assert!((p - e).abs() < 0.015, "{d}: {p} vs {e}");
        }
        assert!(ramsey_sequence(&q, &delays, 0.2e6, 0, &mut rng).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn op(kind: u8, a: f64, phase: f64, t: f64) -> BlochMap {
            let q = QubitParams::measured_q2();
            match kind % 3 {
                0 => pulse_map(&q, &PulseSpec::gaussian(120e-9, a, phase)),
                1 => idle_map(&q, t, IdleMode::Free { static_offset: a * 1e5 }),
                _ => idle_map(&q, t, IdleMode::EchoProtected),
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn bloch_norm_never_exceeds_one(
                ops in proptest::collection::vec((any::<u8>(), -2.0..2.0f64, 0.0..6.3f64, 0.0..50e-6f64), 1..40)
            ) {
                let mut s = BlochState::ground();
                for (k, a, ph, t) in ops {
                    s = op(k, a, ph, t).apply(&s);
                    prop_assert!(s.norm() <= 1.0 + 1e-12);
                }
            }
        }
    }
}
