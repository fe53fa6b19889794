use num_complex::Complex64;
use proptest::prelude::*;

use optical_io::detection::fit_lineshape;
use optical_io::signal::{iq_demodulate, synthesize_tone, ComplexEnvelope, ToneSpec};
use optical_io::transducer::*;
use optical_io::Error;

const FS: f64 = 1e9;

fn pump(nm: f64) -> PumpTone {
    PumpTone::new(nm, 0.1, 0.0).unwrap()
}

fn tone(freq: f64, amplitude: f64, phase: f64, carrier: f64) -> ComplexEnvelope {
    synthesize_tone(&ToneSpec::new(freq, amplitude, phase).unwrap(), 4e-6, FS, carrier).unwrap()
}

#[test]
fn operating_points_and_midpoint() {
    let m = TransducerModel::default();
    let c = |nm| m.channel_center(nm, Temperature::T3K).unwrap();
    assert!((c(1550.00) - 8.743e9).abs() < 1e-3);
    assert!((c(1560.95) - 8.818e9).abs() < 1e-3);
    assert!((c(1555.475) - 8.7805e9).abs() < 1e-3);
    // 75 MHz over 10.95 nm.
    assert!((m.wavelength_map.slope_hz_per_nm() - 6.849_315_068_5e6).abs() < 1.0);
    let warm = m.channel_center(1550.0, Temperature::T300K).unwrap();
    assert!((c(1550.0) - warm - 131.56e6).abs() < 1e-3);
}

#[test]
fn pump_sweep_spans_more_than_200_mhz() {
    let m = TransducerModel::default();
    let nm: Vec<f64> = (0..19).map(|k| 1534.0 + 2.0 * k as f64).collect();
    let curve = m.tuning_curve(&nm, Temperature::T3K).unwrap();
    let span = curve.last().unwrap().1 - curve[0].1;
    // 36 nm × 75 MHz / 10.95 nm.
    assert!((span - 36.0 * 75e6 / 10.95).abs() < 1e-3, "{span}");
    assert!(span > 200e6);
}

#[test]
fn peak_efficiency_is_eta_times_pump_power() {
    let m = TransducerModel::default();
    let cryo = m.channel_response(&pump(1550.0), Temperature::T3K).unwrap();
    let warm = m.channel_response(&pump(1550.0), Temperature::T300K).unwrap();
    assert!((cryo.peak_flux_efficiency - 2.5e-7).abs() < 1e-18);
    assert!((warm.peak_flux_efficiency - 3.2e-8).abs() < 1e-18);
    assert!((cryo.flux_efficiency(cryo.center) - 2.5e-7).abs() < 1e-18);
}

#[test]
fn half_bandwidth_offset_is_minus_3_db() {
    for shape in [Lineshape::Sinc2, Lineshape::Lorentzian] {
        let m = TransducerModel { lineshape: shape, ..Default::default() };
        for t in [Temperature::T3K, Temperature::T300K] {
            let r = m.channel_response(&pump(1550.0), t).unwrap();
            for side in [-0.5, 0.5] {
                let ratio = r.flux_efficiency(r.center + side * r.bandwidth3db) / r.peak_flux_efficiency;
                assert!((ratio - 0.5).abs() < 1e-9, "{shape:?} {t:?}: {ratio}");
            }
        }
    }
}

#[test]
fn photon_flux_arithmetic() {
    let m = TransducerModel::default();
    let p = m.flux_pair(1e-3, 8.743e9, &pump(1550.0), Temperature::T3K).unwrap();
    let n_in = 1e-3 / (6.626_070_15e-34 * 8.743e9);
    assert!((p.n_in / n_in - 1.0).abs() < 1e-12);
    assert!((p.n_in - 1.73e20).abs() < 0.01e20);
    assert!((p.n_out - 4.3e13).abs() < 0.05e13, "{}", p.n_out);
    let doubled = m.flux_pair(1e-3, 8.743e9, &PumpTone::new(1550.0, 0.2, 0.0).unwrap(), Temperature::T3K).unwrap();
    assert!((doubled.n_out / p.n_out - 2.0).abs() < 1e-12);
    let zero = m.flux_pair(0.0, 8.743e9, &pump(1550.0), Temperature::T3K).unwrap();
    assert_eq!((zero.n_in, zero.n_out), (0.0, 0.0));
}

#[test]
fn stokes_sideband_carrier_and_flux_ratio() {
    let m = TransducerModel::default();
    let p = pump(1550.0);
    let mw = tone(8.743e9, 1e-3f64.sqrt(), 0.0, 8.743e9);
    let out = m.transduce(&mw, &[p], Temperature::T3K).unwrap();
    assert!((p.optical_frequency() / (299_792_458.0 / 1550.0e-9) - 1.0).abs() < 1e-15);
    assert_eq!(out[0].carrier_freq(), p.optical_frequency() - 8.743e9);
    let flux_ratio = (out[0].power() / out[0].carrier_freq()) / (mw.power() / 8.743e9);
    assert!((flux_ratio / 2.5e-7 - 1.0).abs() < 1e-9, "{flux_ratio:e}");
}

#[test]
fn second_channel_is_suppressed_by_the_lineshape() {
    let m = TransducerModel::default();
    let mw = tone(8.818e9, 1.0, 0.0, 8.818e9);
    let out = m.transduce(&mw, &[pump(1550.0), pump(1560.95)], Temperature::T3K).unwrap();
    // Compare photon fluxes: the two sidebands sit at different optical frequencies.
    let flux = |e: &ComplexEnvelope| e.power() / e.carrier_freq();
    let db = 10.0 * (flux(&out[0]) / flux(&out[1])).log10();
    // sinc²(x) ≤ 1/x² with x = 2·1.3916·75/0.88 ≈ 237: below −47 dB.
    let bound = 10.0 * (1.0 / (2.0 * SINC2_HALF_POWER_X * 75.0 / 0.88).powi(2)).log10();
    assert!(db < -40.0 && db <= bound + 1e-9, "{db} dB vs bound {bound}");
}

#[test]
fn microwave_outside_the_idt_band_is_rejected() {
    let m = TransducerModel::default();
    let mw = tone(7.5e9, 1.0, 0.0, 7.5e9);
    assert!(matches!(m.transduce(&mw, &[pump(1550.0)], Temperature::T3K), Err(Error::OutOfBand { .. })));
}

#[test]
fn swept_s21_widths_and_cooling_gain() {
    let m = TransducerModel::default();
    let p = pump(1550.0);
    let mut peaks = vec![];
    for (t, bw) in [(Temperature::T300K, 2.63e6), (Temperature::T3K, 0.88e6)] {
        let c = m.channel_center(1550.0, t).unwrap();
        let sweep = m.s21_sweep((c - 3.0 * bw, c + 3.0 * bw), 241, &p, t).unwrap();
        let (fs, db): (Vec<f64>, Vec<f64>) = sweep.into_iter().unzip();
        let fit = fit_lineshape(&fs, &db, m.lineshape).unwrap();
        assert!((fit.value("bandwidth") / bw - 1.0).abs() < 0.02);
        peaks.push(fit.value("peak"));
    }
    let power_ratio = peaks[1] / peaks[0];
    assert!((power_ratio - 7.8125).abs() < 1e-6);
    // Amplitude factor 2.8 squared is 7.84, within 5 % of the efficiency ratio.
    assert!((power_ratio.sqrt() / 2.8 - 1.0).abs() < 0.05);
}

fn phasor(env: &ComplexEnvelope) -> Complex64 {
    iq_demodulate(env, env.carrier_freq(), (0.0, env.duration())).unwrap().to_complex()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The Stokes map is additive and conjugate-linear: scaling the input
    /// by α scales the sideband by conj(α).
    #[test]
    fn stokes_map_is_additive_and_conjugate_linear(
        a in 0.0..2.0f64, phi in -3.1..3.1f64, b in 0.0..2.0f64, df in -2e6..2e6f64,
    ) {
        let m = TransducerModel::default();
        let p = [pump(1550.0)];
        let x = tone(8.743e9 + df, 1.0, 0.3, 8.743e9);
        let y = tone(8.743e9 - df, 0.5, -1.0, 8.743e9);
        let alpha = Complex64::from_polar(a, phi);
        let tx = m.transduce(&x, &p, Temperature::T3K).unwrap().remove(0);
        let ty = m.transduce(&y, &p, Temperature::T3K).unwrap().remove(0);
        let mix = x.scaled(alpha).try_add(&y.scaled(Complex64::new(b, 0.0))).unwrap();
        let tm = m.transduce(&mix, &p, Temperature::T3K).unwrap().remove(0);
        let want = tx.scaled(alpha.conj()).try_add(&ty.scaled(Complex64::new(b, 0.0))).unwrap();
        let scale = want.power().sqrt().max(1e-300);
        for (u, v) in tm.samples().iter().zip(want.samples()) {
            prop_assert!((u - v).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn input_phase_maps_to_conjugated_output_phase(phi in -3.1..3.1f64) {
        let m = TransducerModel::default();
        let base = m.transduce(&tone(8.743e9, 1.0, 0.0, 8.743e9), &[pump(1550.0)], Temperature::T3K).unwrap();
        let turned = m.transduce(&tone(8.743e9, 1.0, phi, 8.743e9), &[pump(1550.0)], Temperature::T3K).unwrap();
        let rel = phasor(&turned[0]) / phasor(&base[0]);
        prop_assert!((rel - Complex64::from_polar(1.0, -phi)).norm() < 1e-9);
    }

    #[test]
    fn adding_a_pump_leaves_the_first_sideband_untouched(nm in 1534.0..1570.0f64, f in 8.7e9..8.85e9f64) {
        let m = TransducerModel::default();
        let mw = tone(f, 1.0, 0.2, f);
        let alone = m.transduce(&mw, &[pump(1550.0)], Temperature::T3K).unwrap();
        let both = m.transduce(&mw, &[pump(1550.0), pump(nm)], Temperature::T3K).unwrap();
        let scale = alone[0].power().sqrt().max(1e-300);
        for (u, v) in alone[0].samples().iter().zip(both[0].samples()) {
            prop_assert!((u - v).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn sideband_carrier_obeys_energy_conservation(nm in 1534.0..1570.0f64, f in 8.4e9..9.1e9f64) {
        let m = TransducerModel::default();
        let p = pump(nm);
        let out = m.transduce(&ComplexEnvelope::zeros(8, FS, f).unwrap(), &[p], Temperature::T3K).unwrap();
        prop_assert_eq!(out[0].carrier_freq(), p.optical_frequency() - f);
    }
}
