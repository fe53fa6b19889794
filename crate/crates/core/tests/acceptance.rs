//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::cell::Cell;
use std::io::Write;
use std::f64::consts::PI;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestCaseError, TestRunner};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use optical_io::detection::{fit_damped_cosine, fit_exponential, fit_lineshape, fit_rb, StageLabel};
use optical_io::downlink::EomParams;
use optical_io::experiments::closedloop::{MICROWAVE_RB_TARGET, OPTICAL_RB_TARGET};
use optical_io::experiments::*;
use optical_io::qubit::jpc_upconvert;
use optical_io::signal::{rng_from_seed, ComplexEnvelope, IQPoint, NoiseSpec};
use optical_io::transducer::{Lineshape, Temperature};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value / target - 1.0).abs() <= rel
}

fn c1_linearity(cfg: &LinkConfig) -> Outcome {
    let powers: Vec<f64> = (0..7).map(|k| -15.0 + 5.0 * k as f64).collect();
    let r = run_linearity(cfg, &powers).unwrap();
    let slope = r.scalar("slope_db_per_db");
    outcome((slope - 1.0).abs() <= 0.005, format!("slope {slope:.5} dB/dB (target 1.000 ± 0.005)"))
}

fn c2_spectra(cfg: &LinkConfig) -> Outcome {
    let r = run_channel_spectra(cfg).unwrap();
    let (bw_warm, bw_cold) = (r.scalar("bandwidth_300k"), r.scalar("bandwidth_cryo"));
    let shift = r.scalar("center_shift");
    let ratio = r.scalar("efficiency_ratio");
    let t = cfg.transducer.as_ref().unwrap();
    let nm = cfg.characterization.pump.wavelength_nm;
    let model_shift = t.channel_center(nm, Temperature::T3K).unwrap() - t.channel_center(nm, Temperature::T300K).unwrap();
    let pass = within(bw_warm, 2.63e6, 0.02)
        && within(bw_cold, 0.88e6, 0.02)
        && (model_shift - 131.56e6).abs() < 1e-3
        && within(shift, 131.56e6, 0.01)
        && within(ratio, 7.81, 0.05);
    outcome(
        pass,
        format!(
            "widths {:.4}/{:.4} MHz, shift model {:.4} fit {:.4} MHz, efficiency ratio {ratio:.3}",
            bw_warm / 1e6,
            bw_cold / 1e6,
            model_shift / 1e6,
            shift / 1e6
        ),
    )
}

fn c3_tunability(cfg: &LinkConfig) -> Outcome {
    let r = run_tunability(cfg).unwrap();
    let span = r.scalar("span_hz");
    outcome(span > 200e6, format!("channel centers span {:.2} MHz over 1534-1570 nm", span / 1e6))
}

fn c4_frequency_arithmetic(cfg: &LinkConfig) -> Outcome {
    let jpc = cfg.jpc.unwrap();
    let mut pass = true;
    let mut parts = vec![];
    for (k, want) in [(0, 8.743e9), (1, 8.818e9)] {
        let f_r = cfg.qubits[k].readout.f_r;
        let env = ComplexEnvelope::zeros(4, 1e9, f_r).unwrap();
        let up = jpc_upconvert(&env, &jpc).carrier_freq();
        let chain = ReadoutChain::new(&cfg.with_mode(IoMode::OO), &[k]).unwrap();
        let demod = chain.demod_freq(0);
        let pump_nm = cfg.qubits[k].pump.unwrap().wavelength_nm;
        let center = cfg.transducer.as_ref().unwrap().channel_center(pump_nm, Temperature::T3K).unwrap();
        pass &= up == want && demod == want && (center - want).abs() < 1e-3;
        parts.push(format!("{:.3} + {:.3} -> {:.3} GHz", f_r / 1e9, jpc.pump_freq / 1e9, up / 1e9));
    }
    outcome(pass, parts.join(", "))
}

fn c5_dual_channel(cfg: &LinkConfig) -> Outcome {
    let both = run_dual_readout(cfg, &[true, true]).unwrap();
    let mut peaks = [both.scalar("spectrum_peak_1_hz"), both.scalar("spectrum_peak_2_hz")];
    peaks.sort_by(f64::total_cmp);
    let resolution = 1.0 / cfg.qubits[0].readout.probe_duration;
    let peaks_ok = (peaks[0] - 8.743e9).abs() <= resolution && (peaks[1] - 8.818e9).abs() <= resolution;
    let one = run_dual_readout(cfg, &[true, false]).unwrap();
    let names: Vec<&str> = cfg.qubits.iter().map(|q| q.name.as_str()).collect();
    let trace_leak = one.scalar(&format!("trace_crosstalk_{}_from_{}", names[1], names[0]));
    let leak = both.scalar("crosstalk_max");
    outcome(
        peaks_ok && leak < 0.01 && trace_leak < 0.01,
        format!(
            "peaks {:.4}/{:.4} GHz, gain cross-talk {leak:.2e}, idle-trace cross-talk {trace_leak:.2e}",
            peaks[0] / 1e9,
            peaks[1] / 1e9
        ),
    )
}

fn c6_averaging(cfg: &LinkConfig) -> Outcome {
    let p = &cfg.protocol;
    let r = run_single_shot(cfg, 1, p.single_shot_count, p.single_shot_average).unwrap();
    let d = p.single_shot_average;
    let snr1 = r.scalar("separation_snr_avg1");
    let fid = r.scalar(&format!("fidelity_avg{d}"));
    let oracle = r.scalar(&format!("expected_fidelity_avg{d}"));
    // Binomial error of the measured fidelity over both state clouds.
    let err = (oracle * (1.0 - oracle) / (2 * p.single_shot_count) as f64).sqrt().max(1.0 / p.single_shot_count as f64);
    let pass = snr1 < 1.0 && fid > 0.99 && oracle > 0.99 && (fid - oracle).abs() <= 4.0 * err;
    outcome(
        pass,
        format!("single-shot separation/σ {snr1:.3}, {d}-shot fidelity {fid:.4} (Φ oracle {oracle:.4})"),
    )
}

fn c7_rb(cfg: &LinkConfig) -> Outcome {
    let start = Instant::now();
    let p = &cfg.protocol;
    let mut pass = true;
    let mut parts = vec![];
    for (mode, target) in [(IoMode::OM, OPTICAL_RB_TARGET), (IoMode::MM, MICROWAVE_RB_TARGET)] {
        let r = run_rb(&cfg.with_mode(mode), 1, &p.rb_lengths, p.rb_sequences).unwrap();
        let f = r.scalar("fidelity");
        pass &= (f - target).abs() <= 0.0005;
        parts.push(format!("{mode} {f:.5} ± {:.5} (target {target})", r.scalar("fidelity_stderr")));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= p.rb_lengths.len() == 8 && p.rb_sequences == 30 && secs < 300.0;
    let shots = p.rb_lengths.len() * p.rb_sequences * p.rb_shots;
    outcome(pass, format!("{}, {shots} shots per run, {secs:.1} s", parts.join(", ")))
}

fn c8_coherence(cfg: &LinkConfig) -> Outcome {
    let cmp = run_coherence_all_modes(cfg, 1).unwrap();
    let mut pass = true;
    let mut parts = vec![];
    for (key, target) in [("t1", 51.0e-6), ("t2", 8.8e-6), ("t2e", 16.2e-6)] {
        let mut vals = vec![];
        for run in &cmp.runs {
            let v = run.scalar(key);
            pass &= within(v, target, 0.03);
            vals.push(format!("{}={:.2}", run.metadata.io_mode, v * 1e6));
        }
        let overlap = cmp.comparison.scalar(&format!("{key}_intervals_overlap")) == 1.0;
        pass &= overlap;
        parts.push(format!("{key} μs [{}] overlap {overlap}", vals.join(" ")));
    }
    outcome(pass, parts.join("; "))
}

fn c9_budget(cfg: &LinkConfig) -> Outcome {
    let (r, _) = run_budget(cfg).unwrap();
    outcome(
        r.channels_by_bandwidth == 40 && r.channels_by_power == 100,
        format!("{} channels by bandwidth, {} by power", r.channels_by_bandwidth, r.channels_by_power),
    )
}

fn random_link() -> impl Strategy<Value = (LinkConfig, [IQPoint; 2], [IQPoint; 2], f64, f64, f64)> {
    let point = || (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(i, q)| IQPoint::new(i, q));
    (
        0usize..4,
        any::<u64>(),
        -18.0..-13.0f64,
        0.0..30.0f64,
        -0.3..0.3f64,
        (0.01..0.5f64, 0.0..10.0f64, 0.0..45.0f64),
        [point(), point()],
        [point(), point()],
        (-2.0..2.0f64, -2.0..2.0f64, -PI..PI),
    )
        .prop_map(|(mode, seed, probe_log, jpc_db, nm_shift, (pump_w, edfa_db, hemt_db), r1, r2, (a, b, phi))| {
            let mut cfg = LinkConfig::default().with_mode(IoMode::ALL[mode]);
            cfg.seed = seed;
            for q in &mut cfg.qubits {
                q.readout.probe_power = 10f64.powf(probe_log);
                if let Some(p) = &mut q.pump {
                    p.power = pump_w;
                    p.wavelength_nm += nm_shift;
                }
            }
            if let Some(j) = &mut cfg.jpc {
                j.gain_db = jpc_db;
            }
            for s in &mut cfg.stages {
                s.gain_db = match s.label {
                    StageLabel::Hemt => hemt_db,
                    StageLabel::Edfa => edfa_db,
                };
            }
            (cfg, r1, r2, a, b, phi)
        })
}

fn c10_chain_invariants() -> Outcome {
    let mut runner = TestRunner::new(ProptestConfig { cases: 100, failure_persistence: None, ..Default::default() });
    let worst = Cell::new(0.0f64);
    let result = runner.run(&random_link(), |(cfg, r1, r2, a, b, phi)| {
        let chain = ReadoutChain::new(&cfg, &[0, 1]).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let out = |r: &[IQPoint]| chain.demodulate(&chain.record(r, None).unwrap().0).unwrap();
        let (o1, o2) = (out(&r1), out(&r2));
        let mixed: Vec<IQPoint> = r1.iter().zip(&r2).map(|(x, y)| *x * a + *y * b).collect();
        let rotated: Vec<IQPoint> = r1.iter().map(|x| x.rotated(phi)).collect();
        let (om, orot) = (out(&mixed), out(&rotated));
        for k in 0..2 {
            let scale = o1[k].norm() + o2[k].norm();
            prop_assume!(scale > 0.0);
            let lin = (om[k] - (o1[k] * a + o2[k] * b)).norm() / (scale * (a.abs() + b.abs()).max(1.0));
            let cov = (orot[k] - o1[k].rotated(phi)).norm() / o1[k].norm().max(f64::MIN_POSITIVE);
            worst.set(worst.get().max(lin).max(cov));
            prop_assert!(lin < 1e-9, "{} linearity residual {lin:e}", cfg.io_mode);
            prop_assert!(cov < 1e-9, "{} phase residual {cov:e}", cfg.io_mode);
        }
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, format!("100 configurations, worst relative residual {:.2e}", worst.get())),
        Err(e) => outcome(false, format!("{e}")),
    }
}

fn grid(n: usize, stop: f64) -> Vec<f64> {
    (0..n).map(|k| stop * k as f64 / (n - 1) as f64).collect()
}

fn c11_fitters() -> Outcome {
    let draws = 200;
    let mut rng = rng_from_seed(0xF17);
    let mut failures: Vec<String> = vec![];
    let mut check = |ok: bool, what: String| {
        if !ok && failures.len() < 5 {
            failures.push(what);
        }
    };

    // Noiseless draws: parameters recovered to 1e-6 relative.
    for _ in 0..draws {
        let tau = rng.random_range(10e-6..80e-6);
        let (amp, off) = (rng.random_range(0.3..1.0), rng.random_range(-0.2..0.2));
        let xs = grid(50, 4.0 * tau);
        let ys: Vec<f64> = xs.iter().map(|x| amp * (-x / tau).exp() + off).collect();
        let fit = fit_exponential(&xs, &ys);
        check(fit.as_ref().is_ok_and(|f| within(f.value("tau"), tau, 1e-6)), format!("exponential τ={tau:e}"));

        let (freq, decay, phase) = (rng.random_range(0.1e6..0.6e6), rng.random_range(4e-6..20e-6), rng.random_range(-1.0..1.0));
        let xs = grid(101, 20e-6);
        let ys: Vec<f64> =
            xs.iter().map(|x| amp * 0.5 * (-x / decay).exp() * (2.0 * PI * freq * x + phase).cos() + 0.5).collect();
        let fit = fit_damped_cosine(&xs, &ys);
        check(
            fit.as_ref().is_ok_and(|f| within(f.value("freq"), freq, 1e-6) && within(f.value("tau"), decay, 1e-6)),
            format!("damped cosine f={freq:e} τ={decay:e}"),
        );

        let p: f64 = rng.random_range(0.97..0.9995);
        let ms = [1.0, 20.0, 50.0, 100.0, 150.0, 200.0, 300.0, 400.0];
        let a = rng.random_range(0.3..0.5);
        let ys: Vec<f64> = ms.iter().map(|m| a * p.powf(*m) + 0.5).collect();
        let fit = fit_rb(&ms, &ys);
        check(fit.as_ref().is_ok_and(|f| (f.value("p") - p).abs() < 1e-6), format!("rb p={p}"));

        let shape = if rng.random::<bool>() { Lineshape::Sinc2 } else { Lineshape::Lorentzian };
        let bw = rng.random_range(0.5e6..3e6);
        let c = 8.7e9 + rng.random_range(-50e6..50e6);
        let peak = 10f64.powf(rng.random_range(-8.0..-5.0));
        let fs: Vec<f64> = (0..201).map(|k| c - 3.0 * bw + 6.0 * bw * k as f64 / 200.0 + 0.01 * bw).collect();
        let db: Vec<f64> = fs.iter().map(|f| 10.0 * (peak * shape.power(f - c, bw)).max(1e-30).log10()).collect();
        let fit = fit_lineshape(&fs, &db, shape);
        check(
            fit.as_ref().is_ok_and(|f| within(f.value("bandwidth"), bw, 1e-6) && (f.value("center") - c).abs() < 1e-6 * bw),
            format!("{shape:?} bw={bw:e}"),
        );
    }

    // Noisy draws: mean within the stated tolerance and every draw within
    // five of its own standard errors.
    let unit = Normal::new(0.0, 1.0).unwrap();
    let (mut tau_sum, mut f_sum, mut d_sum) = (0.0, 0.0, 0.0);
    for _ in 0..draws {
        let xs = grid(50, 200e-6);
        let ys: Vec<f64> = xs.iter().map(|x| (-x / 51e-6).exp() + unit.sample(&mut rng) / 20.0).collect();
        match fit_exponential(&xs, &ys) {
            Ok(f) => {
                check((f.value("tau") - 51e-6).abs() < 5.0 * f.stderr("tau"), "noisy exponential pull".into());
                tau_sum += f.value("tau") / 51e-6;
            }
            Err(e) => check(false, format!("noisy exponential: {e}")),
        }
        let xs = grid(101, 20e-6);
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 0.5 * (-x / 8.8e-6).exp() * (2.0 * PI * 0.2e6 * x).cos() + 0.5 + 0.02 * unit.sample(&mut rng))
            .collect();
        match fit_damped_cosine(&xs, &ys) {
            Ok(f) => {
                check((f.value("freq") - 0.2e6).abs() < 5.0 * f.stderr("freq"), "noisy cosine freq pull".into());
                check((f.value("tau") - 8.8e-6).abs() < 5.0 * f.stderr("tau"), "noisy cosine decay pull".into());
                f_sum += f.value("freq") / 0.2e6;
                d_sum += f.value("tau") / 8.8e-6;
            }
            Err(e) => check(false, format!("noisy damped cosine: {e}")),
        }
    }
    let n = draws as f64;
    let (tau_bias, f_bias, d_bias) = (tau_sum / n - 1.0, f_sum / n - 1.0, d_sum / n - 1.0);
    check(tau_bias.abs() < 0.03, format!("exponential bias {tau_bias:e}"));
    check(f_bias.abs() < 0.01, format!("frequency bias {f_bias:e}"));
    check(d_bias.abs() < 0.05, format!("decay bias {d_bias:e}"));
    let pass = failures.is_empty();
    let detail = if pass {
        format!("{draws} draws per fitter; noisy biases τ {tau_bias:+.4}, f {f_bias:+.5}, T2 {d_bias:+.4}")
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

fn silent(cfg: &LinkConfig) -> LinkConfig {
    let mut c = cfg.clone();
    for s in &mut c.stages {
        s.added_noise_psd = 0.0;
    }
    c.noise = NoiseSpec::silent();
    c.drive.amplitude_noise = 0.0;
    c.drive.optical_excess_noise = 0.0;
    c.eom = Some(EomParams { linearized: true, ..c.eom.unwrap_or_default() });
    c
}

fn c12_mode_equivalence(cfg: &LinkConfig) -> Outcome {
    let cfg = silent(cfg);
    let amps = cfg.protocol.rabi_amplitudes.values();
    let traces: Vec<ExperimentResult> = [IoMode::MM, IoMode::OO]
        .iter()
        .map(|&m| run_power_rabi(&cfg.with_mode(m), 1, &amps, None).unwrap())
        .collect();
    let mut worst: f64 = 0.0;
    for series in ["population", "p_excited_expected"] {
        let a = traces[0].summary["rabi"].get(series);
        let b = traces[1].summary["rabi"].get(series);
        worst = a.iter().zip(b).fold(worst, |w, (x, y)| w.max((x - y).abs()));
    }
    outcome(worst <= 1e-9, format!("max |ΔP(e)| between MM and OO {worst:.2e}"))
}

#[test]
fn acceptance() {
    let cfg = LinkConfig::default();
    let criteria: Vec<Criterion> = vec![
        ("transduction linearity", Box::new(|| c1_linearity(&cfg))),
        ("channel spectra", Box::new(|| c2_spectra(&cfg))),
        ("tunability", Box::new(|| c3_tunability(&cfg))),
        ("frequency arithmetic", Box::new(|| c4_frequency_arithmetic(&cfg))),
        ("dual-channel readout", Box::new(|| c5_dual_channel(&cfg))),
        ("averaging behavior", Box::new(|| c6_averaging(&cfg))),
        ("randomized benchmarking", Box::new(|| c7_rb(&cfg))),
        ("coherence suite", Box::new(|| c8_coherence(&cfg))),
        ("channel budget", Box::new(|| c9_budget(&cfg))),
        ("full-chain linearity and phase covariance", Box::new(c10_chain_invariants)),
        ("fitter self-consistency", Box::new(c11_fitters)),
        ("zero-noise MM/OO equivalence", Box::new(|| c12_mode_equivalence(&cfg))),
    ];
    let mut failed = vec![];
    std::io::stdout().lock().write_all(b"\n").unwrap();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        // Written to the raw handle so the report shows without --nocapture.
        let line = format!("{tag} {:>2} {name}: {} [{:.1} s]\n", k + 1, o.detail, start.elapsed().as_secs_f64());
        std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
        if !o.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
