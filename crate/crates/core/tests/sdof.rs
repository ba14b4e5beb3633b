use hotr_core::hbm::{solve_mhb, AftConfig};
use hotr_core::model::SensorRow;
use hotr_core::sdof::{self, SdofParams};
use hotr_core::timedomain::extract_harmonics;

fn linear_amplitude(p: &SdofParams) -> f64 {
    let re = p.k - p.m * p.omega_f * p.omega_f;
    let im = p.c * p.omega_f;
    p.amplitude / (re * re + im * im).sqrt()
}

#[test]
fn healthy_steady_amplitude() {
    let p = SdofParams::healthy();
    let spec = sdof::steady_spectrum(&p, 8).unwrap();
    let amp = 2.0 * spec[1].1;
    let exact = linear_amplitude(&p);
    assert!((exact - 1.5622).abs() < 1e-4);
    assert!((amp - exact).abs() / exact < 5e-3, "amp {amp} vs {exact}");
    let ratio = spec[2].1 / spec[1].1;
    assert!(ratio < 1e-6, "healthy second-harmonic ratio {ratio}");
}

#[test]
fn breathing_gap_creates_superharmonics() {
    let p = SdofParams::cracked();
    let spec = sdof::steady_spectrum(&p, 8).unwrap();
    let ratio = spec[2].1 / spec[1].1;
    assert!(ratio > 1e-3, "cracked second-harmonic ratio {ratio}");
}

#[test]
fn time_domain_matches_harmonic_balance() {
    let p = SdofParams::cracked();
    let hist = sdof::steady_response(&p, &sdof::default_integrator()).unwrap();
    let td = extract_harmonics(&hist.channels[0], hist.dt, hist.t0, p.omega_f, 3).unwrap();
    let model = p.model().unwrap();
    let cfg = AftConfig {
        n_samples: 1024,
        harmonics: 8,
    };
    let hb = solve_mhb(&model, p.omega_f, cfg, None).unwrap();
    let row = SensorRow::unit(0);
    let scale = hb.output(&row, 1).norm();
    for k in 0..3 {
        let err = (td[k] - hb.output(&row, k + 1)).norm() / scale;
        assert!(err < 2e-3, "order {} mismatch {err}", k + 1);
    }
}

#[test]
fn zero_gap_response_is_homogeneous() {
    let p = SdofParams::cracked();
    let q = SdofParams {
        amplitude: 2.5,
        ..p
    };
    let a = sdof::steady_spectrum(&p, 4).unwrap();
    let b = sdof::steady_spectrum(&q, 4).unwrap();
    for (x, y) in a.iter().zip(&b).skip(1) {
        assert!((y.1 - 2.5 * x.1).abs() <= 1e-6 * y.1.max(1e-12) + 1e-9 * b[1].1);
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let bad = SdofParams {
        m: 0.0,
        ..SdofParams::healthy()
    };
    assert!(bad.model().is_err());
    let neg = SdofParams {
        k0: -1.0,
        ..SdofParams::healthy()
    };
    assert!(sdof::simulate_sdof(&neg, 10.0, 0.01).is_err());
}
