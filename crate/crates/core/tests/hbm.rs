mod common;

use hotr_core::hbm::{self, Aft, AftConfig};
use hotr_core::linalg::{self, C64};
use nalgebra::DVector;

const CFG: AftConfig = AftConfig {
    n_samples: 256,
    harmonics: 5,
};

#[test]
fn dynamic_stiffness_at_zero_frequency_is_k() {
    let model = common::random_chain(8, 1);
    let d0 = hbm::dynamic_stiffness(&model, 1.3, 0);
    let k = linalg::csr_to_dense(&model.stiffness);
    assert!(d0
        .iter()
        .zip(k.iter())
        .all(|(a, b)| a.re == *b && a.im == 0.0));
}

#[test]
fn healthy_model_is_solved_in_one_step() {
    let model = common::random_chain(12, 2).without_contacts();
    let w = 0.7;
    let sol = hbm::solve_mhb(&model, w, CFG, None).unwrap();
    assert_eq!(sol.iterations, 1);
    let d = hbm::dynamic_stiffness(&model, w, 1);
    let x = d.lu().solve(&DVector::from_vec(model.q_hat())).unwrap();
    for i in 0..12 {
        assert!((sol.coeffs[1][i] - x[i]).norm() < 1e-12 * x.camax());
    }
    for p in [0, 2, 3, 4, 5] {
        assert!(sol.coeffs[p].iter().all(|v| v.norm() == 0.0));
    }
}

#[test]
fn cracked_solution_carries_residual_certificate() {
    let model = common::random_chain(20, 3);
    let aft = Aft::new(CFG).unwrap();
    for w in [0.3, 0.55, 0.9] {
        let sol = hbm::solve_mhb(&model, w, CFG, None).unwrap();
        assert!(sol.converged);
        let r = hbm::relative_residual(&model, w, &aft, &sol.coeffs);
        assert!(r < 1e-9, "residual {r} at {w}");
        assert!(sol.coeffs[0].iter().all(|v| v.im == 0.0));
        let row = hotr_core::model::SensorRow::unit(5);
        let two = sol.coeffs[2][5].norm();
        assert!(two > 0.0);
        // reconstructed signal is real by construction; check consistency at t = 0
        let y0: f64 =
            sol.output(&row, 0).re + 2.0 * (1..=5).map(|p| sol.output(&row, p).re).sum::<f64>();
        assert!((y0 - sol.output_at(&row, 0.0)).abs() < 1e-12);
    }
}

#[test]
fn response_scales_with_forcing_amplitude() {
    let model = common::random_chain(20, 4);
    let a = hbm::solve_mhb(&model, 0.6, CFG, None).unwrap();
    let b = hbm::solve_mhb(&model.with_force_amplitude(10.0), 0.6, CFG, None).unwrap();
    for p in 0..=5 {
        let scale = linalg::norm(&a.coeffs[p]).max(1e-300);
        let diff: Vec<C64> = a.coeffs[p]
            .iter()
            .zip(&b.coeffs[p])
            .map(|(x, y)| x * 10.0 - y)
            .collect();
        assert!(linalg::norm(&diff) <= 1e-10 * 10.0 * scale);
    }
}

#[test]
fn analytic_jacobian_matches_central_differences() {
    let model = common::random_chain(20, 5);
    let aft = Aft::new(AftConfig::default()).unwrap();
    let sol = hbm::solve_mhb(&model, 0.5, AftConfig::default(), None).unwrap();
    let z = hbm::to_real(&sol.coeffs);
    let jac = hbm::jacobian_real(&model, 0.5, &aft, &z);
    let eps = 1e-7 * z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut fd = nalgebra::DMatrix::<f64>::zeros(z.len(), z.len());
    for c in 0..z.len() {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[c] += eps;
        zm[c] -= eps;
        let rp = hbm::residual_real(&model, 0.5, &aft, &zp);
        let rm = hbm::residual_real(&model, 0.5, &aft, &zm);
        for r in 0..z.len() {
            fd[(r, c)] = (rp[r] - rm[r]) / (2.0 * eps);
        }
    }
    let err = (&fd - &jac).norm() / jac.norm();
    assert!(err < 1e-5, "relative jacobian error {err}");
}

#[test]
fn sweep_degenerate_cases() {
    let model = common::random_chain(10, 6);
    assert!(hbm::sweep(&model, &[], CFG).unwrap().is_empty());
    let one = hbm::sweep(&model, &[0.4], CFG).unwrap();
    let direct = hbm::solve_mhb(&model, 0.4, CFG, None).unwrap();
    assert_eq!(one[0].as_ref().unwrap().coeffs, direct.coeffs);
    assert!(hbm::sweep(&model, &[0.5, 0.4], CFG).is_err());
    let many = hbm::sweep(&model, &[0.2, 0.3, 0.4, 0.5], CFG).unwrap();
    assert!(many.iter().all(|r| r.is_ok()));
}

#[test]
fn invalid_sample_count_is_rejected() {
    let model = common::random_chain(10, 7);
    let bad = AftConfig {
        n_samples: 1000,
        harmonics: 5,
    };
    assert!(hbm::solve_mhb(&model, 0.4, bad, None).is_err());
}

#[test]
fn rectified_cosine_coefficients() {
    let pair = hotr_core::model::ContactPair {
        dof_plus: 0,
        dof_minus: None,
        stiffness: 1.0,
        gap: 0.0,
    };
    let mut x = vec![C64::new(0.0, 0.0); 6];
    x[1] = C64::new(0.5, 0.0);
    let f = hbm::aft_coefficients(&[x], &[pair], AftConfig::default()).unwrap();
    let pi = std::f64::consts::PI;
    // sampling a kinked signal leaves an O(N⁻²) error on the even orders
    assert!((f[0][0].re - 1.0 / pi).abs() < 1e-5);
    assert!((f[0][1].re - 0.25).abs() < 1e-12);
    assert!((f[0][2].re - 1.0 / (3.0 * pi)).abs() < 1e-5);
    assert!(f[0][3].norm() < 1e-5);
}

#[test]
fn condensed_and_full_newton_agree() {
    let model = common::random_chain(14, 9);
    for w in [0.35, 0.8] {
        let a = hbm::solve_mhb(&model, w, CFG, None).unwrap();
        let b = hbm::solve_mhb_full(&model, w, CFG, None, &hbm::NewtonOptions::default()).unwrap();
        for p in 0..=5 {
            let scale = linalg::norm(&a.coeffs[1]);
            let d: Vec<C64> = a.coeffs[p]
                .iter()
                .zip(&b.coeffs[p])
                .map(|(x, y)| x - y)
                .collect();
            assert!(linalg::norm(&d) < 1e-8 * scale);
        }
    }
    let big = common::random_chain(600, 1);
    assert!(hbm::solve_mhb_full(&big, 0.5, CFG, None, &hbm::NewtonOptions::default()).is_err());
}

#[test]
fn sweep_reaches_points_a_cold_start_misses() {
    // Close to the cracked resonance the linear start lies outside the Newton
    // basin; continuation with step bisection gets there.
    let beam = hotr_core::fe::Beam::new(hotr_core::fe::BeamConfig::default()).unwrap();
    let crack = hotr_core::fe::CrackSpec::new(50, 15);
    let rb = hotr_core::rom::rb_model(&beam, Some(&crack), 6).unwrap();
    let model = &rb.structure.system;
    let target = 2.0 * std::f64::consts::PI * 317.5;
    let cfg = AftConfig::default();
    assert!(hbm::solve_mhb(model, target, cfg, None).is_err());
    let out = hbm::sweep(model, &[2.0 * std::f64::consts::PI * 300.0, target], cfg).unwrap();
    let sol = out[1].as_ref().unwrap();
    let aft = Aft::new(cfg).unwrap();
    assert!(hbm::relative_residual(model, target, &aft, &sol.coeffs) < 1e-9);
}
