//! Sampled-signal primitives shared by every block of the link.
//!
//! Fields are carried as complex baseband envelopes referenced to an explicit
//! `carrier_freq`, so a sample `x[k]` represents the physical field
//! `Re{ x[k] · exp(i2π·carrier·t_k) }` (up to the usual factor of √2 for
//! power). Envelope amplitudes are in √W unless a block states otherwise, and
//! the power of an envelope is the mean of `|x|²`.
//!
//! Noise uses a one-sided power spectral density. A complex sample drawn for a
//! PSD `p` at sample rate `fs` has variance `p·fs` split evenly between the two
//! quadratures.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Deterministic RNG used for every stochastic operation in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a master seed and a path of tags
/// (experiment id, sweep index, shot index, ...).
pub fn sub_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    samples: Vec<Complex64>,
    sample_rate: f64,
    carrier_freq: f64,
}

impl ComplexEnvelope {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, carrier_freq: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if samples.is_empty() {
            return Err(invalid("envelope must contain at least one sample"));
        }
        if !carrier_freq.is_finite() {
            return Err(invalid("carrier frequency must be finite"));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(invalid("envelope samples must be finite"));
        }
        Ok(Self { samples, sample_rate, carrier_freq })
    }

    pub fn zeros(len: usize, sample_rate: f64, carrier_freq: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate, carrier_freq)
    }

    pub(crate) fn from_parts(samples: Vec<Complex64>, sample_rate: f64, carrier_freq: f64) -> Self {
        debug_assert!(!samples.is_empty() && sample_rate > 0.0);
        Self { samples, sample_rate, carrier_freq }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn carrier_freq(&self) -> f64 {
        self.carrier_freq
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean of `|x|²`.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::from_parts(
            self.samples.iter().map(|s| s * factor).collect(),
            self.sample_rate,
            self.carrier_freq,
        )
    }

    pub fn conj(&self) -> Self {
        Self::from_parts(
            self.samples.iter().map(|s| s.conj()).collect(),
            self.sample_rate,
            self.carrier_freq,
        )
    }

    pub fn with_carrier(mut self, carrier_freq: f64) -> Self {
        self.carrier_freq = carrier_freq;
        self
    }

    /// Re-reference the same physical field to a new carrier. Content keeps its
    /// absolute frequency: a component at `f` moves from baseband offset
    /// `f - old` to `f - new`.
    pub fn shift_carrier(&self, new_carrier: f64) -> Self {
        let df = self.carrier_freq - new_carrier;
        let fs = self.sample_rate;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| s * Complex64::from_polar(1.0, 2.0 * PI * df * k as f64 / fs))
            .collect();
        Self::from_parts(samples, fs, new_carrier)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.len() != other.len()
            || self.sample_rate != other.sample_rate
            || self.carrier_freq != other.carrier_freq
        {
            return Err(invalid(
                "envelopes differ in length, sample rate or carrier frequency",
            ));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self::from_parts(
            self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
            self.sample_rate,
            self.carrier_freq,
        ))
    }

    /// Multiply the spectrum by `response(f_offset)` where `f_offset` is the
    /// signed baseband frequency of each FFT bin. The filter is circular.
    pub fn filtered(&self, response: impl Fn(f64) -> Complex64) -> Self {
        let n = self.len();
        let fs = self.sample_rate;
        let mut buf = self.samples.clone();
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(n).process(&mut buf);
        for (k, b) in buf.iter_mut().enumerate() {
            *b *= response(bin_frequency(k, n, fs));
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let norm = 1.0 / n as f64;
        for b in &mut buf {
            *b *= norm;
        }
        Self::from_parts(buf, fs, self.carrier_freq)
    }
}

/// Signed frequency of FFT bin `k` for an `n`-point transform.
pub fn bin_frequency(k: usize, n: usize, fs: f64) -> f64 {
    if k < n.div_ceil(2) {
        k as f64 * fs / n as f64
    } else {
        (k as f64 - n as f64) * fs / n as f64
    }
}

/// Real-valued sampled waveform (drive voltage, optical intensity).
#[derive(Debug, Clone, PartialEq)]
pub struct RealSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl RealSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(invalid("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(invalid("signal must contain at least one sample"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(invalid("signal samples must be finite"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// View as an envelope referenced to DC.
    pub fn to_envelope(&self) -> ComplexEnvelope {
        ComplexEnvelope::from_parts(
            self.samples.iter().map(|&s| Complex64::new(s, 0.0)).collect(),
            self.sample_rate,
            0.0,
        )
    }

    /// Complex amplitude `A·e^{iφ}` of the component `A·cos(2πft + φ)`,
    /// estimated over the whole record.
    pub fn tone_phasor(&self, freq: f64) -> Result<IQPoint> {
        let env = self.to_envelope();
        let iq = iq_demodulate(&env, freq, (0.0, env.duration()))?;
        Ok(iq * 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSpec {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl ToneSpec {
    pub fn new(frequency: f64, amplitude: f64, phase: f64) -> Result<Self> {
        if !(frequency >= 0.0) || !(amplitude >= 0.0) || !phase.is_finite() {
            return Err(invalid("tone needs frequency ≥ 0, amplitude ≥ 0 and a finite phase"));
        }
        Ok(Self { frequency, amplitude, phase: phase.rem_euclid(2.0 * PI) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// One-sided PSD, W/Hz.
    pub psd: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(psd: f64, seed: u64) -> Result<Self> {
        if !(psd >= 0.0) || !psd.is_finite() {
            return Err(invalid(format!("noise psd must be finite and ≥ 0, got {psd}")));
        }
        Ok(Self { psd, seed })
    }

    pub fn silent() -> Self {
        Self { psd: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IQPoint {
    pub i: f64,
    pub q: f64,
}

impl IQPoint {
    pub const ZERO: IQPoint = IQPoint { i: 0.0, q: 0.0 };

    pub fn new(i: f64, q: f64) -> Self {
        Self { i, q }
    }

    pub fn from_complex(c: Complex64) -> Self {
        Self { i: c.re, q: c.im }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.i, self.q)
    }

    pub fn norm(self) -> f64 {
        self.i.hypot(self.q)
    }

    pub fn dot(self, other: IQPoint) -> f64 {
        self.i * other.i + self.q * other.q
    }

    pub fn rotated(self, phi: f64) -> Self {
        Self::from_complex(self.to_complex() * Complex64::from_polar(1.0, phi))
    }
}

impl Add for IQPoint {
    type Output = IQPoint;
    fn add(self, rhs: IQPoint) -> IQPoint {
        IQPoint::new(self.i + rhs.i, self.q + rhs.q)
    }
}

impl Sub for IQPoint {
    type Output = IQPoint;
    fn sub(self, rhs: IQPoint) -> IQPoint {
        IQPoint::new(self.i - rhs.i, self.q - rhs.q)
    }
}

impl Mul<f64> for IQPoint {
    type Output = IQPoint;
    fn mul(self, rhs: f64) -> IQPoint {
        IQPoint::new(self.i * rhs, self.q * rhs)
    }
}

/// Constant-amplitude tone on an envelope referenced to `carrier_freq`.
pub fn synthesize_tone(
    spec: &ToneSpec,
    duration: f64,
    sample_rate: f64,
    carrier_freq: f64,
) -> Result<ComplexEnvelope> {
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(invalid("duration and sample rate must be positive"));
    }
    let n = (duration * sample_rate).round() as usize;
    if n < 2 {
        return Err(invalid(format!("duration·sample_rate = {} is below 2 samples", duration * sample_rate)));
    }
    let df = spec.frequency - carrier_freq;
    let samples = (0..n)
        .map(|k| {
            Complex64::from_polar(spec.amplitude, 2.0 * PI * df * k as f64 / sample_rate + spec.phase)
        })
        .collect();
    ComplexEnvelope::new(samples, sample_rate, carrier_freq)
}

/// Complex AWGN with per-sample variance `psd·sample_rate`.
pub fn add_awgn(env: &ComplexEnvelope, noise: &NoiseSpec) -> ComplexEnvelope {
    let mut rng = rng_from_seed(noise.seed);
    add_awgn_with(env, noise.psd, &mut rng)
}

pub(crate) fn add_awgn_with(env: &ComplexEnvelope, psd: f64, rng: &mut SimRng) -> ComplexEnvelope {
    if psd == 0.0 {
        return env.clone();
    }
    let sigma = (psd * env.sample_rate / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let samples = env
        .samples
        .iter()
        .map(|s| s + Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect();
    ComplexEnvelope::from_parts(samples, env.sample_rate, env.carrier_freq)
}

/// Time average of `x(t)·exp(-i2π(ref − carrier)t)` over `[t0, t1)`, with
/// `t = k / sample_rate` measured from the first sample.
pub fn iq_demodulate(env: &ComplexEnvelope, ref_freq: f64, window: (f64, f64)) -> Result<IQPoint> {
    let fs = env.sample_rate;
    let df = ref_freq - env.carrier_freq;
    if df.abs() > fs / 2.0 {
        return Err(invalid(format!(
            "reference {ref_freq:.6e} Hz is {df:.3e} Hz from the carrier, beyond Nyquist ±{:.3e} Hz",
            fs / 2.0
        )));
    }
    let (t0, t1) = window;
    let k0 = (t0 * fs).round();
    let k1 = (t1 * fs).round();
    if !(k0 >= 0.0) || !(k1 > k0) || k1 > env.len() as f64 {
        return Err(invalid(format!(
            "window ({t0:e}, {t1:e}) s is not inside the {:e} s record",
            env.duration()
        )));
    }
    let (k0, k1) = (k0 as usize, k1 as usize);
    let acc: Complex64 = env.samples[k0..k1]
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let t = (k0 + j) as f64 / fs;
            s * Complex64::from_polar(1.0, -2.0 * PI * df * t)
        })
        .sum();
    Ok(IQPoint::from_complex(acc / (k1 - k0) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotStats {
    pub mean: IQPoint,
    /// Standard error of the mean per quadrature; `None` for a single shot.
    pub std_err: Option<IQPoint>,
    pub count: usize,
}

pub fn average_shots(points: &[IQPoint]) -> Result<ShotStats> {
    if points.is_empty() {
        return Err(invalid("cannot average an empty set of shots"));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(IQPoint::ZERO, |a, &p| a + p) * (1.0 / n);
    let std_err = (points.len() > 1).then(|| {
        let (si, sq) = points.iter().fold((0.0, 0.0), |(si, sq), p| {
            (si + (p.i - mean.i).powi(2), sq + (p.q - mean.q).powi(2))
        });
        IQPoint::new((si / (n - 1.0) / n).sqrt(), (sq / (n - 1.0) / n).sqrt())
    });
    Ok(ShotStats { mean, std_err, count: points.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    /// Absolute frequency (carrier + bin offset), Hz.
    pub freq: f64,
    /// Power in the bin, W.
    pub power: f64,
}

impl SpectrumBin {
    pub fn dbm(&self) -> f64 {
        watts_to_dbm(self.power)
    }
}

pub fn watts_to_dbm(w: f64) -> f64 {
    if w > 0.0 {
        10.0 * (w / 1e-3).log10()
    } else {
        f64::NEG_INFINITY
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Periodogram sorted by frequency. Bin powers sum to the envelope power.
pub fn power_spectrum_bins(env: &ComplexEnvelope) -> Result<Vec<SpectrumBin>> {
    let n = env.len();
    if n < 2 {
        return Err(invalid("power spectrum needs at least two samples"));
    }
    let mut buf = env.samples.clone();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let norm = 1.0 / (n as f64 * n as f64);
    let mut bins: Vec<SpectrumBin> = buf
        .iter()
        .enumerate()
        .map(|(k, x)| SpectrumBin {
            freq: env.carrier_freq + bin_frequency(k, n, env.sample_rate),
            power: x.norm_sqr() * norm,
        })
        .collect();
    bins.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    Ok(bins)
}

/// Periodogram as `(Hz, dBm)` pairs.
pub fn power_spectrum(env: &ComplexEnvelope) -> Result<Vec<(f64, f64)>> {
    Ok(power_spectrum_bins(env)?.iter().map(|b| (b.freq, b.dbm())).collect())
}

/// Local maxima of a spectrum, strongest first, at least `min_separation` apart.
pub fn spectral_peaks(bins: &[SpectrumBin], count: usize, min_separation: f64) -> Vec<SpectrumBin> {
    let mut order: Vec<&SpectrumBin> = bins.iter().collect();
    order.sort_by(|a, b| b.power.total_cmp(&a.power));
    let mut peaks: Vec<SpectrumBin> = Vec::with_capacity(count);
    for b in order {
        if peaks.len() == count {
            break;
        }
        if peaks.iter().all(|p| (p.freq - b.freq).abs() >= min_separation) {
            peaks.push(*b);
        }
    }
    peaks
}
