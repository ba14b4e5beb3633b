mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use hotr_core::error::Error;
use hotr_core::fe::{Beam, BeamConfig, CrackSpec, Structure};
use hotr_core::hbm::{self, newton_solve_count, AftConfig};
use hotr_core::hotr::*;
use hotr_core::linalg::C64;
use hotr_core::rom::rb_model;
use proptest::prelude::*;

fn beam() -> &'static Beam {
    static B: OnceLock<Beam> = OnceLock::new();
    B.get_or_init(|| Beam::new(BeamConfig::default()).unwrap())
}

fn rb(crack: CrackSpec) -> Structure {
    rb_model(beam(), Some(&crack), 6).unwrap().structure
}

fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

fn max_rel(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
        / scale
}

#[test]
fn bordered_and_condensed_closed_solves_agree() {
    let chain = common::random_chain(30, 4);
    let s = rb(CrackSpec::new(50, 15));
    for (model, w) in [
        (&chain, 0.9),
        (&s.system, hz(128.0)),
        (&s.system, hz(431.0)),
    ] {
        let a = solve_closed_crack(model, w).unwrap();
        let b = solve_closed_crack_condensed(model, w).unwrap();
        assert!(max_rel(&a.lambda, &b.lambda) < 1e-10);
        assert!(max_rel(&a.x, &b.x) < 1e-10);
        assert!(a.compatibility < 1e-10 && b.compatibility < 1e-10);
    }
}

#[test]
fn multipliers_are_linear_in_the_load() {
    let model = common::random_chain(20, 7);
    let w = 1.1;
    let base = solve_closed_crack(&model, w).unwrap();
    let scaled = solve_closed_crack(&model.with_force_amplitude(-3.5), w).unwrap();
    for (a, b) in base.lambda.iter().zip(&scaled.lambda) {
        assert!((a * -3.5 - b).norm() < 1e-12 * b.norm().max(1.0));
    }
}

#[test]
fn closed_crack_reproduces_the_pristine_beam() {
    let b = beam();
    let cracked = b.structure(Some(&CrackSpec::new(90, 10))).unwrap();
    let healthy = b.structure(None).unwrap();
    let w = hz(128.0);
    let closed = solve_closed_crack(&cracked.system, w).unwrap();
    let x = healthy
        .system
        .factor_dynamic_stiffness(w, 1)
        .unwrap()
        .solve(&healthy.system.q_hat());
    let yc: Vec<C64> = cracked.sensors.iter().map(|s| s.dot(&closed.x)).collect();
    let yh: Vec<C64> = healthy.sensors.iter().map(|s| s.dot(&x)).collect();
    assert!(max_rel(&yc, &yh) < 1e-10);
}

#[test]
fn static_multipliers_are_the_pristine_section_forces() {
    let b = beam();
    let cracked = b.structure(Some(&CrackSpec::new(40, 15))).unwrap();
    let healthy = b.structure(None).unwrap();
    let closed = solve_closed_crack(&cracked.system, 0.0).unwrap();

    // Static pristine field, copied onto the cracked DoFs; the split faces
    // take the value of their partner.
    let sys = &healthy.system;
    let q: Vec<f64> = sys.q_hat().iter().map(|c| c.re).collect();
    let xh = hotr_core::linalg::Factor::<f64>::assemble(&sys.layout, &[(&sys.stiffness, 1.0)])
        .unwrap()
        .solve(&q);
    let n = cracked.system.n();
    let mut xc: Vec<Option<f64>> = vec![None; n];
    for i in 0..=b.nx() {
        for j in 0..=b.ny() {
            let node = b.mesh.grid_node(i, j);
            for dir in 0..2 {
                if let (Ok(rc), Ok(rh)) = (cracked.row(node, dir), healthy.row(node, dir)) {
                    if rc.entries.is_empty() {
                        continue;
                    }
                    xc[rc.entries[0].0] = Some(rh.dot(&xh));
                }
            }
        }
    }
    for p in &cracked.system.contact_pairs {
        let m = p.dof_minus.unwrap();
        let v = xc[p.dof_plus].or(xc[m]).unwrap();
        xc[p.dof_plus] = Some(v);
        xc[m] = Some(v);
    }
    let xc: Vec<f64> = xc.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    let kx = hotr_core::linalg::spmv_new(&cracked.system.stiffness, &xc);
    let qc = cracked.system.q_hat();
    let scale = closed.lambda.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    for (p, l) in cracked.system.contact_pairs.iter().zip(&closed.lambda) {
        let m = p.dof_minus.unwrap();
        let section = kx[m] - qc[m].re;
        assert!((l.re - section).abs() < 1e-8 * scale && l.im.abs() < 1e-12 * scale);
    }
}

#[test]
fn healthy_models_have_no_higher_order_transmissibility() {
    let healthy = beam().structure(None).unwrap();
    let sol = hbm::solve_mhb(&healthy.system, hz(128.0), AftConfig::default(), None).unwrap();
    let pairs = upper_pairs(4);
    assert!(tr_nonlinear(&sol, &healthy.sensors, &pairs, 1).is_ok());
    assert!(matches!(
        tr_nonlinear(&sol, &healthy.sensors, &pairs, 2),
        Err(Error::UndefinedTransmissibility { order: 2, .. })
    ));
    assert!(tr_surrogate(&healthy.system, hz(128.0), &healthy.sensors, &pairs, 2).is_err());
}

#[test]
fn reciprocal_pairs_multiply_to_one() {
    let s = rb(CrackSpec::new(70, 10));
    let pairs = ordered_pairs(4);
    let w = hz(211.0);
    let sol = hbm::solve_mhb(&s.system, w, AftConfig::default(), None).unwrap();
    for recs in [
        tr_surrogate(&s.system, w, &s.sensors, &pairs, 2).unwrap(),
        tr_nonlinear(&sol, &s.sensors, &pairs, 2).unwrap(),
    ] {
        for a in &recs {
            let b = recs.iter().find(|r| (r.m, r.n) == (a.n, a.m)).unwrap();
            assert!((a.value * b.value - 1.0).norm() < 1e-12);
        }
    }
}

#[test]
fn forcing_amplitude_cancels() {
    let s = rb(CrackSpec::new(50, 15));
    let louder = s.system.with_force_amplitude(10.0);
    let pairs = upper_pairs(4);
    let w = hz(128.0);
    let a = tr_surrogate(&s.system, w, &s.sensors, &pairs, 2).unwrap();
    let b = tr_surrogate(&louder, w, &s.sensors, &pairs, 2).unwrap();
    assert_eq!(a, b);
    let cfg = AftConfig::default();
    let na = tr_nonlinear(
        &hbm::solve_mhb(&s.system, w, cfg, None).unwrap(),
        &s.sensors,
        &pairs,
        2,
    )
    .unwrap();
    let nb = tr_nonlinear(
        &hbm::solve_mhb(&louder, w, cfg, None).unwrap(),
        &s.sensors,
        &pairs,
        2,
    )
    .unwrap();
    for (x, y) in na.iter().zip(&nb) {
        assert!((x.value - y.value).norm() < 1e-10 * x.value.norm());
    }
}

#[test]
fn single_pair_crack_is_reproduced_exactly() {
    // With one contact pair every force harmonic is a multiple of the same
    // column of B, so the surrogate shape is exact.
    let s = rb(CrackSpec::new(30, 5));
    assert_eq!(s.system.nc(), 1);
    let pairs = upper_pairs(4);
    for f in [90.0, 128.0, 377.0] {
        let sol = hbm::solve_mhb(&s.system, hz(f), AftConfig::default(), None).unwrap();
        let nl = tr_nonlinear(&sol, &s.sensors, &pairs, 2).unwrap();
        let su = tr_surrogate(&s.system, hz(f), &s.sensors, &pairs, 2).unwrap();
        for (a, b) in nl.iter().zip(&su) {
            assert!((a.value - b.value).norm() < 1e-8 * a.value.norm(), "{f} Hz");
        }
    }
}

#[test]
fn first_order_surrogate_is_the_linear_part() {
    // Shallow cracks between sensors; a crack next to a strain gauge changes
    // its local first-order strain by far more than 1 %.
    let pairs = upper_pairs(4);
    for line in [36, 60, 84] {
        let s = rb(CrackSpec::new(line, 5));
        for f in [128.0, 250.0] {
            let sol = hbm::solve_mhb(&s.system, hz(f), AftConfig::default(), None).unwrap();
            let nl = tr_nonlinear(&sol, &s.sensors, &pairs, 1).unwrap();
            let su = tr_surrogate(&s.system, hz(f), &s.sensors, &pairs, 1).unwrap();
            for (a, b) in nl.iter().zip(&su) {
                assert!(
                    (a.value - b.value).norm() < 1e-2 * a.value.norm(),
                    "line {line} at {f} Hz"
                );
            }
        }
    }
}

#[test]
fn second_order_surrogate_tracks_the_nonlinear_solution() {
    let pairs = upper_pairs(4);
    let omegas: Vec<f64> = (0..25).map(|k| hz(60.0 + 20.0 * k as f64)).collect();
    let s = rb(CrackSpec::new(50, 15));
    let sols = hbm::sweep(&s.system, &omegas, AftConfig::default()).unwrap();
    // errors per pair, measured against the largest value of that curve
    let mut err = vec![0.0f64; pairs.len()];
    let mut peak = vec![0.0f64; pairs.len()];
    for (w, sol) in omegas.iter().zip(sols) {
        let nl = tr_nonlinear(&sol.unwrap(), &s.sensors, &pairs, 2).unwrap();
        let su = tr_surrogate(&s.system, *w, &s.sensors, &pairs, 2).unwrap();
        for (k, (a, b)) in nl.iter().zip(&su).enumerate() {
            err[k] = err[k].max((a.value - b.value).norm());
            peak[k] = peak[k].max(a.value.norm());
        }
    }
    for k in 0..pairs.len() {
        assert!(
            err[k] < 5e-2 * peak[k],
            "pair {:?}: {} vs {}",
            pairs[k],
            err[k],
            peak[k]
        );
    }
}

#[test]
fn surrogate_never_runs_newton() {
    let s = rb(CrackSpec::new(50, 15));
    let before = newton_solve_count();
    let surrogate_before = surrogate_solve_count();
    for f in [100.0, 200.0, 300.0] {
        tr_surrogate(&s.system, hz(f), &s.sensors, &upper_pairs(4), 2).unwrap();
    }
    assert_eq!(newton_solve_count(), before);
    assert_eq!(surrogate_solve_count(), surrogate_before + 3);
}

#[test]
fn comparison_requires_aligned_records() {
    let s = rb(CrackSpec::new(50, 15));
    let a = tr_surrogate(&s.system, hz(128.0), &s.sensors, &upper_pairs(4), 2).unwrap();
    let b = tr_surrogate(&s.system, hz(129.0), &s.sensors, &upper_pairs(4), 2).unwrap();
    assert!(compare(&a, &b).is_err());
    assert!(compare(&a, &a[..3]).is_err());
    assert_eq!(compare(&a, &a).unwrap().max_error, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_solve_routes_agree_on_random_chains(seed in 0u64..1000, w in 0.05f64..3.0) {
        let model = common::random_chain(16, seed);
        let a = solve_closed_crack(&model, w).unwrap();
        let b = solve_closed_crack_condensed(&model, w).unwrap();
        prop_assert!(max_rel(&a.lambda, &b.lambda) < 1e-9);
        prop_assert!(a.compatibility < 1e-10);
    }

    #[test]
    fn surrogate_ratios_are_amplitude_free(seed in 0u64..1000, amp in 0.01f64..100.0) {
        let model = common::random_chain(12, seed);
        let sensors: Vec<_> = [1, 5, 9].iter().map(|&i| hotr_core::model::SensorRow::unit(i)).collect();
        let pairs = ordered_pairs(3);
        let a = tr_surrogate(&model, 0.8, &sensors, &pairs, 2).unwrap();
        let b = tr_surrogate(&model.with_force_amplitude(amp), 0.8, &sensors, &pairs, 2).unwrap();
        prop_assert_eq!(a, b);
    }
}
