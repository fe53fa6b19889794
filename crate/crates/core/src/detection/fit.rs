//! Nonlinear least squares (Levenberg–Marquardt with a central-difference
//! Jacobian) and the model fits built on it.
//!
//! Initialization: linear parameters are solved exactly on a grid of the
//! nonlinear ones (decay time, RB depolarization, frequency from a
//! periodogram peak) and the best grid point seeds the full fit.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transducer::Lineshape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    /// One standard error; infinite when the data cannot constrain it.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    pub residual_rms: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Panics if the model has no such parameter.
    pub fn value(&self, name: &str) -> f64 {
        self.param(name).unwrap_or_else(|| panic!("{} fit has no parameter {name}", self.model)).value
    }

    pub fn stderr(&self, name: &str) -> f64 {
        self.param(name).unwrap_or_else(|| panic!("{} fit has no parameter {name}", self.model)).stderr
    }
}

fn failure(model: &'static str, reason: impl Into<String>) -> Error {
    Error::FitFailure { model, reason: reason.into() }
}

struct Solution {
    params: Vec<f64>,
    stderr: Vec<f64>,
    rms: f64,
}

fn residuals(xs: &[f64], ys: &[f64], p: &[f64], f: &dyn Fn(&[f64], f64) -> f64) -> DVector<f64> {
    DVector::from_iterator(xs.len(), xs.iter().zip(ys).map(|(&x, &y)| y - f(p, x)))
}

fn jacobian(xs: &[f64], p: &[f64], scale: &[f64], f: &dyn Fn(&[f64], f64) -> f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(xs.len(), p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * (p[k].abs() + scale[k]);
        q[k] = p[k] + h;
        let up: Vec<f64> = xs.iter().map(|&x| f(&q, x)).collect();
        q[k] = p[k] - h;
        for (i, &x) in xs.iter().enumerate() {
            j[(i, k)] = (up[i] - f(&q, x)) / (2.0 * h);
        }
        q[k] = p[k];
    }
    j
}

/// `scale` gives a typical magnitude per parameter for finite differences
/// and convergence tests.
fn levenberg_marquardt(
    model: &'static str,
    xs: &[f64],
    ys: &[f64],
    p0: &[f64],
    scale: &[f64],
    f: &dyn Fn(&[f64], f64) -> f64,
) -> Result<Solution> {
    let n = xs.len();
    let k = p0.len();
    let mut p = p0.to_vec();
    let mut r = residuals(xs, ys, &p, f);
    let mut ssr = r.norm_squared();
    let y_scale: f64 = ys.iter().map(|y| y * y).sum::<f64>().max(1e-300);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..2000 {
        let j = jacobian(xs, &p, scale, f);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for d in 0..k {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = residuals(xs, ys, &trial, f);
            let ssr_trial = r_trial.norm_squared();
            if ssr_trial.is_finite() && ssr_trial <= ssr {
                let small_step = step.iter().zip(&p).zip(scale).all(|((s, v), sc)| s.abs() <= 1e-13 * (v.abs() + sc));
                let small_gain = ssr - ssr_trial <= 1e-15 * ssr;
                p = trial;
                r = r_trial;
                ssr = ssr_trial;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if small_step || small_gain || ssr <= 1e-30 * y_scale {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step at any damping: a stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(failure(model, format!("no convergence after 2000 iterations (ssr {ssr:.3e})")));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(failure(model, "non-finite parameters"));
    }
    let j = jacobian(xs, &p, scale, f);
    let dof = n.saturating_sub(k);
    let stderr = match ((j.transpose() * &j).try_inverse(), dof) {
        (Some(cov), d) if d > 0 => {
            let s2 = ssr / d as f64;
            (0..k).map(|i| (cov[(i, i)] * s2).max(0.0).sqrt()).collect()
        }
        _ => vec![f64::INFINITY; k],
    };
    Ok(Solution { params: p, stderr, rms: (ssr / n as f64).sqrt() })
}

/// Least squares for `y ≈ Σ c_k·basis_k(x)`; returns coefficients and SSR.
fn linear_lsq(ys: &[f64], basis: &[Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    let n = ys.len();
    let a = DMatrix::from_fn(n, basis.len(), |i, k| basis[k][i]);
    let y = DVector::from_column_slice(ys);
    let coef = (a.transpose() * &a).lu().solve(&(a.transpose() * &y))?;
    let ssr = (&y - &a * &coef).norm_squared();
    ssr.is_finite().then(|| (coef.iter().copied().collect(), ssr))
}

fn check_input(model: &'static str, xs: &[f64], ys: &[f64], min_points: usize) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(failure(model, "xs and ys differ in length"));
    }
    if xs.len() < min_points {
        return Err(failure(model, format!("needs at least {min_points} points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(failure(model, "non-finite input"));
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if !(hi > lo) {
        return Err(failure(model, "xs span zero range"));
    }
    Ok(hi - lo)
}

fn is_constant(ys: &[f64]) -> bool {
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
    hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs()))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
}

fn param(name: &str, value: f64, stderr: f64) -> FitParam {
    FitParam { name: name.to_string(), value, stderr }
}

/// `y = amplitude·exp(−x/tau) + offset`; also reports `rate = 1/tau`.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    const MODEL: &str = "exponential";
    let range = check_input(MODEL, xs, ys, 4)?;
    if is_constant(ys) {
        return Err(failure(MODEL, "degenerate: constant data, decay rate unidentifiable"));
    }
    let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = xs.iter().map(|x| x - x0).collect();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for tau in log_grid(range / 200.0, range * 20.0, 120) {
        let e: Vec<f64> = shifted.iter().map(|x| (-x / tau).exp()).collect();
        if let Some((c, ssr)) = linear_lsq(ys, &[e, vec![1.0; ys.len()]]) {
            if best.as_ref().is_none_or(|b| ssr < b.2) {
                best = Some((tau, c, ssr));
            }
        }
    }
    let (tau0, c, _) = best.ok_or_else(|| failure(MODEL, "initialization failed"))?;
    let y_scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(1e-300);
    let f = move |p: &[f64], x: f64| p[0] * (-(x - x0) / p[1]).exp() + p[2];
    let sol = levenberg_marquardt(MODEL, xs, ys, &[c[0], tau0, c[1]], &[y_scale, range, y_scale], &f)?;
    let (a, tau, off) = (sol.params[0], sol.params[1], sol.params[2]);
    if !(tau > 0.0) {
        return Err(failure(MODEL, format!("non-positive decay time {tau:e}")));
    }
    // Reference the amplitude to x = 0.
    let a0 = a * (x0 / tau).exp();
    let mut flags = Vec::new();
    if tau > 100.0 * range {
        flags.push(format!("decay time {tau:.3e} far exceeds the sampled range {range:.3e}"));
    }
    Ok(FitResult {
        model: MODEL.into(),
        params: vec![
            param("amplitude", a0, sol.stderr[0] * (x0 / tau).exp()),
            param("tau", tau, sol.stderr[1]),
            param("rate", 1.0 / tau, sol.stderr[1] / (tau * tau)),
            param("offset", off, sol.stderr[2]),
        ],
        residual_rms: sol.rms,
        flags,
    })
}

fn periodogram_peak(xs: &[f64], ys: &[f64], range: f64) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let f_max = 0.5 * (xs.len() - 1) as f64 / range;
    let df = 1.0 / (8.0 * range);
    let steps = (f_max / df).ceil() as usize;
    (0..=steps)
        .map(|k| k as f64 * df)
        .map(|f| {
            let (c, s) = xs.iter().zip(ys).fold((0.0, 0.0), |(c, s), (&x, &y)| {
                let (sn, cs) = (2.0 * PI * f * x).sin_cos();
                (c + (y - mean) * cs, s + (y - mean) * sn)
            });
            (f, c * c + s * s)
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0
}

/// `y = amplitude·exp(−x/tau)·cos(2π·freq·x + phase) + offset`.
pub fn fit_damped_cosine(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    const MODEL: &str = "damped_cosine";
    let range = check_input(MODEL, xs, ys, 8)?;
    if is_constant(ys) {
        return Err(failure(MODEL, "degenerate: constant data"));
    }
    let f_peak = periodogram_peak(xs, ys, range);
    if f_peak * range < 1.0 {
        return Err(failure(
            MODEL,
            format!("degenerate: dominant frequency {f_peak:.3e} Hz gives less than one period; use an exponential"),
        ));
    }
    let mut best: Option<(f64, f64, Vec<f64>, f64)> = None;
    let df = 1.0 / (64.0 * range);
    for j in -8..=8 {
        let f = f_peak + j as f64 * df;
        for tau in log_grid(range / 50.0, range * 20.0, 50) {
            let env: Vec<f64> = xs.iter().map(|x| (-x / tau).exp()).collect();
            let cos = xs.iter().zip(&env).map(|(x, e)| e * (2.0 * PI * f * x).cos()).collect();
            let sin = xs.iter().zip(&env).map(|(x, e)| e * (2.0 * PI * f * x).sin()).collect();
            if let Some((c, ssr)) = linear_lsq(ys, &[cos, sin, vec![1.0; ys.len()]]) {
                if best.as_ref().is_none_or(|b| ssr < b.3) {
                    best = Some((f, tau, c, ssr));
                }
            }
        }
    }
    let (f0, tau0, c, _) = best.ok_or_else(|| failure(MODEL, "initialization failed"))?;
    let amp0 = c[0].hypot(c[1]);
    let phase0 = (-c[1]).atan2(c[0]);
    let y_scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(1e-300);
    let f = |p: &[f64], x: f64| p[0] * (-x / p[3]).exp() * (2.0 * PI * p[1] * x + p[2]).cos() + p[4];
    let sol = levenberg_marquardt(
        MODEL,
        xs,
        ys,
        &[amp0, f0, phase0, tau0, c[2]],
        &[y_scale, 1.0 / range, 1.0, range, y_scale],
        &f,
    )?;
    let mut p = sol.params.clone();
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[2] += PI;
    }
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[2] = -p[2];
    }
    p[2] = (p[2] + PI).rem_euclid(2.0 * PI) - PI;
    if !(p[3] > 0.0) {
        return Err(failure(MODEL, format!("non-positive decay time {:e}", p[3])));
    }
    let mut flags = Vec::new();
    if p[3] > 100.0 * range {
        flags.push("decay time far exceeds the sampled range".to_string());
    }
    Ok(FitResult {
        model: MODEL.into(),
        params: vec![
            param("amplitude", p[0], sol.stderr[0]),
            param("freq", p[1], sol.stderr[1]),
            param("phase", p[2], sol.stderr[2]),
            param("tau", p[3], sol.stderr[3]),
            param("offset", p[4], sol.stderr[4]),
        ],
        residual_rms: sol.rms,
        flags,
    })
}

/// `survival = A·p^m + B`; adds `fidelity = 1 − (1 − p)/2` per Clifford.
pub fn fit_rb(m_values: &[f64], survival: &[f64]) -> Result<FitResult> {
    const MODEL: &str = "rb";
    let range = check_input(MODEL, m_values, survival, 4)?;
    let build = |a: (f64, f64), p: (f64, f64), b: (f64, f64), rms: f64, flags: Vec<String>| FitResult {
        model: MODEL.into(),
        params: vec![
            param("A", a.0, a.1),
            param("p", p.0, p.1),
            param("B", b.0, b.1),
            param("fidelity", 1.0 - (1.0 - p.0) / 2.0, p.1 / 2.0),
        ],
        residual_rms: rms,
        flags,
    };
    if is_constant(survival) {
        let mean = survival.iter().sum::<f64>() / survival.len() as f64;
        return Ok(build((0.0, 0.0), (1.0, 0.0), (mean, 0.0), 0.0, vec!["constant survival: p fixed at 1".into()]));
    }
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    // Growth (p > 1) is searched too so that it is reported rather than
    // absorbed into a degenerate p ≈ 1 solution.
    let decays = log_grid(1e-6, 0.5, 150).map(|r| 1.0 - r);
    let grows = log_grid(1e-6, 0.5, 150).map(|r| 1.0 + r);
    for p in decays.chain(grows) {
        let basis = m_values.iter().map(|&m| p.powf(m)).collect();
        if let Some((c, ssr)) = linear_lsq(survival, &[basis, vec![1.0; survival.len()]]) {
            if best.as_ref().is_none_or(|b| ssr < b.2) {
                best = Some((p, c, ssr));
            }
        }
    }
    let (p0, c, _) = best.ok_or_else(|| failure(MODEL, "initialization failed"))?;
    let f = |q: &[f64], m: f64| q[0] * q[1].powf(m) + q[2];
    let sol = levenberg_marquardt(MODEL, m_values, survival, &[c[0], p0, c[1]], &[1.0, 1.0 / range, 1.0], &f)?;
    let (a, mut p, b) = (sol.params[0], sol.params[1], sol.params[2]);
    let mut flags = Vec::new();
    if !sol.stderr[1].is_finite() {
        return Err(failure(MODEL, "decay parameter unidentifiable from the data"));
    }
    if !(p > 0.0) || p > 1.0 + 1e-9 {
        return Err(failure(MODEL, format!("decay parameter p = {p} outside (0, 1]")));
    }
    if p > 1.0 {
        p = 1.0;
        flags.push("p clipped to 1".into());
    }
    Ok(build((a, sol.stderr[0]), (p, sol.stderr[1]), (b, sol.stderr[2]), sol.rms, flags))
}

/// Channel lineshape fit on linear power: `peak·shape(f − center, bandwidth)`.
/// Input is `(frequency, dB)` pairs as produced by an S21 sweep.
pub fn fit_lineshape(freqs: &[f64], power_db: &[f64], shape: Lineshape) -> Result<FitResult> {
    const MODEL: &str = "lineshape";
    let range = check_input(MODEL, freqs, power_db, 5)?;
    let lin: Vec<f64> = power_db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
    let (imax, &peak) = lin
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let above = lin.iter().filter(|&&v| v >= peak / 2.0).count().max(2);
    let step = range / (freqs.len() - 1) as f64;
    let bw0 = above as f64 * step;
    // Fit in units of the initial width to keep the problem well scaled.
    let (c0, unit) = (freqs[imax], bw0);
    let xs: Vec<f64> = freqs.iter().map(|f| (f - c0) / unit).collect();
    let ys: Vec<f64> = lin.iter().map(|v| v / peak).collect();
    let f = move |p: &[f64], x: f64| p[0] * shape.power(x - p[1], p[2]);
    let sol = levenberg_marquardt(MODEL, &xs, &ys, &[1.0, 0.0, 1.0], &[1.0, 1.0, 1.0], &f)?;
    let (pk, ctr, bw) = (sol.params[0] * peak, c0 + sol.params[1] * unit, sol.params[2].abs() * unit);
    Ok(FitResult {
        model: MODEL.into(),
        params: vec![
            param("peak", pk, sol.stderr[0] * peak),
            param("peak_db", 10.0 * pk.log10(), 10.0 / std::f64::consts::LN_10 * sol.stderr[0] / sol.params[0]),
            param("center", ctr, sol.stderr[1] * unit),
            param("bandwidth", bw, sol.stderr[2] * unit),
        ],
        residual_rms: sol.rms * peak,
        flags: Vec::new(),
    })
}

/// Ordinary least-squares line `y = slope·x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    const MODEL: &str = "line";
    check_input(MODEL, xs, ys, 3)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let s2 = ssr / (n - 2.0);
    Ok(FitResult {
        model: MODEL.into(),
        params: vec![
            param("slope", slope, (s2 / sxx).sqrt()),
            param("intercept", intercept, (s2 * (1.0 / n + mx * mx / sxx)).sqrt()),
        ],
        residual_rms: (ssr / n).sqrt(),
        flags: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::rng_from_seed;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, stop: f64) -> Vec<f64> {
        (0..n).map(|k| stop * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exponential_noiseless_recovery() {
        let xs = grid(40, 200e-6);
        let ys: Vec<f64> = xs.iter().map(|x| 0.9 * (-x / 51.0e-6).exp() + 0.05).collect();
        let fit = fit_exponential(&xs, &ys).unwrap();
        assert!((fit.value("tau") / 51.0e-6 - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.value("amplitude") - 0.9).abs() < 1e-6);
        assert!((fit.value("rate") * 51.0e-6 - 1.0).abs() < 1e-6);
        assert!(fit.stderr("tau") >= 0.0);
    }

    #[test]
    fn exponential_constant_data_is_degenerate() {
        let xs = grid(10, 1.0);
        let err = fit_exponential(&xs, &[0.3; 10]).unwrap_err();
        assert!(matches!(err, Error::FitFailure { .. }) && err.to_string().contains("degenerate"));
        assert!(fit_exponential(&xs[..3], &[1.0, 0.5, 0.2]).is_err());
    }

    #[test]
    fn exponential_noisy_bias_and_pulls() {
        // Per-point SNR 20: mean over draws within 3 %, each draw within
        // five of its own standard errors.
        let xs = grid(50, 200e-6);
        let noise = Normal::new(0.0, 1.0 / 20.0).unwrap();
        let mut rng = rng_from_seed(11);
        let draws = 50;
        let mut sum = 0.0;
        for _ in 0..draws {
            let ys: Vec<f64> = xs.iter().map(|x| (-x / 51e-6).exp() + noise.sample(&mut rng)).collect();
            let fit = fit_exponential(&xs, &ys).unwrap();
            let tau = fit.value("tau");
            assert!((tau - 51e-6).abs() < 5.0 * fit.stderr("tau"));
            sum += tau;
        }
        assert!((sum / draws as f64 / 51e-6 - 1.0).abs() < 0.03);
    }

    #[test]
    fn damped_cosine_noiseless_recovery() {
        let xs = grid(101, 20e-6);
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 0.48 * (-x / 8.8e-6).exp() * (2.0 * PI * 0.20e6 * x + 0.1).cos() + 0.5)
            .collect();
        let fit = fit_damped_cosine(&xs, &ys).unwrap();
        assert!((fit.value("freq") / 0.20e6 - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.value("tau") / 8.8e-6 - 1.0).abs() < 1e-6);
        assert!((fit.value("phase") - 0.1).abs() < 1e-6);
    }

    #[test]
    fn damped_cosine_zero_frequency_is_degenerate() {
        let xs = grid(40, 20e-6);
        let ys: Vec<f64> = xs.iter().map(|x| (-x / 8.8e-6).exp()).collect();
        let err = fit_damped_cosine(&xs, &ys).unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn damped_cosine_noisy_bias_and_pulls() {
        let xs = grid(101, 20e-6);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut rng = rng_from_seed(12);
        let draws = 50;
        let (mut f_sum, mut tau_sum) = (0.0, 0.0);
        for _ in 0..draws {
            let ys: Vec<f64> = xs
                .iter()
                .map(|x| 0.5 * (-x / 8.8e-6).exp() * (2.0 * PI * 0.42e6 * x).cos() + 0.5 + noise.sample(&mut rng))
                .collect();
            let fit = fit_damped_cosine(&xs, &ys).unwrap();
            assert!((fit.value("freq") - 0.42e6).abs() < 5.0 * fit.stderr("freq"));
            assert!((fit.value("tau") - 8.8e-6).abs() < 5.0 * fit.stderr("tau"));
            f_sum += fit.value("freq");
            tau_sum += fit.value("tau");
        }
        assert!((f_sum / draws as f64 / 0.42e6 - 1.0).abs() < 0.01);
        assert!((tau_sum / draws as f64 / 8.8e-6 - 1.0).abs() < 0.05);
    }

    #[test]
    fn rb_fits() {
        let ms = [1.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 400.0];
        let ys: Vec<f64> = ms.iter().map(|m| 0.5 * 0.9918f64.powf(*m) + 0.5).collect();
        let fit = fit_rb(&ms, &ys).unwrap();
        assert!((fit.value("p") - 0.9918).abs() < 1e-9);
        assert!((fit.value("fidelity") - 0.9959).abs() < 1e-9);
        let perfect = fit_rb(&ms, &[1.0; 8]).unwrap();
        assert_eq!(perfect.value("fidelity"), 1.0);
        assert!(fit_rb(&ms[..3], &ys[..3]).is_err());
        // Growing survival has no p in (0, 1].
        let grow: Vec<f64> = ms.iter().map(|m| 0.5 - 0.3 * 0.99f64.powf(*m)).collect();
        assert!(fit_rb(&ms, &grow).is_ok());
        let bad: Vec<f64> = ms.iter().map(|m| 0.1 * 1.01f64.powf(*m)).collect();
        let r = fit_rb(&ms, &bad);
        assert!(r.is_err(), "{r:?}");
    }

    #[test]
    fn lineshape_fit_recovers_width_and_center() {
        for (shape, bw) in [(Lineshape::Sinc2, 0.88e6), (Lineshape::Lorentzian, 2.63e6)] {
            let c = 8.7431e9;
            let fs: Vec<f64> = (0..201).map(|k| c - 5e6 + 10e6 * k as f64 / 200.0 + 0.013e6).collect();
            let db: Vec<f64> = fs.iter().map(|f| 10.0 * (2.5e-7 * shape.power(f - c, bw)).max(1e-30).log10()).collect();
            let fit = fit_lineshape(&fs, &db, shape).unwrap();
            assert!((fit.value("bandwidth") / bw - 1.0).abs() < 1e-6, "{fit:?}");
            assert!((fit.value("center") - c).abs() < 1.0);
            assert!((fit.value("peak") / 2.5e-7 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn line_fit() {
        let xs = [-15.0, -10.0, -5.0, 0.0, 5.0];
        let fit = fit_line(&xs, &xs.map(|x| 1.0 * x - 40.0)).unwrap();
        assert!((fit.value("slope") - 1.0).abs() < 1e-12);
        assert!((fit.value("intercept") + 40.0).abs() < 1e-12);
    }
}
