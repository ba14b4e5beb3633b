use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use hotr_core::fe::{Beam, BeamConfig, CrackSpec};
use hotr_core::hbm::{solve_mhb, AftConfig};
use hotr_core::hotr::{ordered_pairs, tr_nonlinear, Method, TransmissibilityRecord};
use hotr_core::identify::*;
use hotr_core::linalg::C64;
use hotr_core::rom::{SubBuilder, SubstructureSplit};
use proptest::prelude::*;

const FREQ_HZ: f64 = 128.0;

fn omega() -> f64 {
    2.0 * PI * FREQ_HZ
}

fn beam() -> Arc<Beam> {
    static B: OnceLock<Arc<Beam>> = OnceLock::new();
    B.get_or_init(|| Arc::new(Beam::new(BeamConfig::default()).unwrap()))
        .clone()
}

fn forward() -> &'static ForwardModel {
    static F: OnceLock<ForwardModel> = OnceLock::new();
    F.get_or_init(|| {
        let sb = SubBuilder::new(beam(), SubstructureSplit::default(), 6, None).unwrap();
        ForwardModel::new(Arc::new(sb), omega()).unwrap()
    })
}

fn space() -> ParameterSpace {
    default_space(&SubstructureSplit::default())
}

/// Noiseless measurement from the harmonic-balance solution of the full beam.
fn full_measurement(crack: CrackSpec, amplitude: f64) -> Vec<TransmissibilityRecord> {
    let s = beam().structure(Some(&crack)).unwrap();
    let model = s.system.with_force_amplitude(amplitude);
    let sol = solve_mhb(&model, omega(), AftConfig::default(), None).unwrap();
    tr_nonlinear(&sol, &s.sensors, &ordered_pairs(s.sensors.len()), 2).unwrap()
}

fn measured_90_10() -> &'static [TransmissibilityRecord] {
    static M: OnceLock<Vec<TransmissibilityRecord>> = OnceLock::new();
    M.get_or_init(|| full_measurement(CrackSpec::new(90, 10), 1.0))
}

fn record(m: usize, n: usize, value: C64) -> TransmissibilityRecord {
    TransmissibilityRecord {
        order: 2,
        m,
        n,
        omega: 1.0,
        value,
        method: Method::Measured,
    }
}

/// Smooth bowl with a shallow decoy, for GA mechanics without a model.
fn synthetic(space: &ParameterSpace, target: Theta) -> impl Fn(Theta) -> f64 + Sync + '_ {
    move |t| {
        let dl = t.location as f64 - target.location as f64;
        let dd = t.depth as f64 - target.depth as f64;
        let decoy = (t.location as f64 - (space.lines.len() / 4) as f64).abs();
        (dl * dl + 4.0 * dd * dd).sqrt().min(20.0 + 0.5 * decoy)
    }
}

#[test]
fn objective_is_a_relative_root_sum_square_in_percent() {
    let one = C64::new(1.0, 0.0);
    let m = vec![record(0, 1, one)];
    assert_eq!(objective(&m, &m).unwrap(), 0.0);
    assert_eq!(objective(&[record(0, 1, 2.0 * one)], &m).unwrap(), 100.0);
    let m2 = vec![
        record(0, 1, C64::new(3.0, 0.0)),
        record(1, 0, C64::new(0.0, 4.0)),
    ];
    let s2 = vec![
        record(0, 1, C64::new(3.0, 0.0)),
        record(1, 0, C64::new(0.0, -1.0)),
    ];
    assert!((objective(&s2, &m2).unwrap() - 100.0).abs() < 1e-12);
    assert!(objective(&[record(1, 0, one)], &m).is_err());
    assert!(objective(&[], &[]).is_err());
}

#[test]
fn default_space_covers_every_sub_crack() {
    let space = space();
    assert_eq!(space.len(), 339);
    assert_eq!(space.dimension(), 2);
    let split = SubstructureSplit::default();
    for (i, t) in space.iter().enumerate() {
        assert_eq!(space.index(t), i);
        assert_eq!(space.theta(i), t);
        let c = space.crack(t);
        assert_eq!(space.theta_of(&c), Some(t));
        split.admits(&c, beam().ny()).unwrap();
    }
    assert!(ParameterSpace::new(vec![], vec![5]).is_err());
    assert!(ParameterSpace::new(vec![3, 3], vec![5]).is_err());
    assert!(ParameterSpace::new(vec![3], vec![0]).is_err());
}

#[test]
fn invalid_ga_settings_are_rejected() {
    let space = space();
    let f = |_: Theta| 1.0;
    for cfg in [
        GaConfig {
            elite: 7,
            ..GaConfig::default()
        },
        GaConfig {
            population: 0,
            elite: 0,
            ..GaConfig::default()
        },
        GaConfig {
            crossover_fraction: 1.5,
            ..GaConfig::default()
        },
        GaConfig {
            tournament: 0,
            ..GaConfig::default()
        },
        GaConfig {
            mutation_shrink: 2.0,
            ..GaConfig::default()
        },
        GaConfig {
            stop_below: Some(-1.0),
            ..GaConfig::default()
        },
    ] {
        assert!(run_ga(&space, &cfg, f).is_err());
    }
}

#[test]
fn same_seed_same_trace() {
    let space = space();
    let target = Theta {
        location: 70,
        depth: 1,
    };
    let cfg = GaConfig {
        seed: 11,
        ..GaConfig::default()
    };
    let a = run_ga(&space, &cfg, synthetic(&space, target)).unwrap();
    let b = run_ga(&space, &cfg, synthetic(&space, target)).unwrap();
    assert_eq!(a, b);
    let c = run_ga(
        &space,
        &GaConfig { seed: 12, ..cfg },
        synthetic(&space, target),
    )
    .unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn exhaustive_population_returns_the_brute_force_argmin() {
    let space = space();
    let target = Theta {
        location: 17,
        depth: 2,
    };
    let cfg = GaConfig {
        population: space.len(),
        ..GaConfig::default()
    };
    let r = run_ga(&space, &cfg, synthetic(&space, target)).unwrap();
    assert!(r.exhaustive);
    assert_eq!(r.evaluations, space.len());
    assert_eq!(
        (r.best, r.j),
        brute_force(&space, synthetic(&space, target))
    );
    assert_eq!(r.best, target);
}

#[test]
fn threshold_stops_the_search() {
    let space = space();
    let target = Theta {
        location: 40,
        depth: 0,
    };
    let cfg = GaConfig {
        stop_below: Some(1e9),
        ..GaConfig::default()
    };
    let r = run_ga(&space, &cfg, synthetic(&space, target)).unwrap();
    assert!(r.reached_threshold);
    assert_eq!(r.trace.len(), 1);
    assert_eq!(GaConfig::threshold_for_noise(0.1), 0.5);
    assert_eq!(GaConfig::threshold_for_noise(5.0), 10.0);
}

#[test]
fn undefined_candidates_score_worst_without_failing_the_search() {
    let space = space();
    let target = Theta {
        location: 5,
        depth: 2,
    };
    let f = |t: Theta| {
        if t.location.is_multiple_of(2) {
            f64::INFINITY
        } else {
            synthetic(&space, target)(t)
        }
    };
    let r = run_ga(
        &space,
        &GaConfig {
            seed: 3,
            ..GaConfig::default()
        },
        f,
    )
    .unwrap();
    assert!(r.j.is_finite());
    assert_eq!(r.best.location % 2, 1);

    // A healthy or inadmissible candidate cannot be simulated.
    let m = measured_90_10();
    assert_eq!(
        forward().objective(&CrackSpec::new(2, 10), m),
        f64::INFINITY
    );
}

#[test]
fn redrawing_repeats_widens_the_search() {
    let space = space();
    let target = Theta {
        location: 90,
        depth: 1,
    };
    let mut plain = 0;
    let mut fresh = 0;
    for seed in 0..10 {
        let base = GaConfig {
            seed,
            fresh_attempts: 0,
            ..GaConfig::default()
        };
        plain += run_ga(&space, &base, synthetic(&space, target))
            .unwrap()
            .evaluations;
        let cfg = GaConfig {
            fresh_attempts: 20,
            ..base
        };
        let r = run_ga(&space, &cfg, synthetic(&space, target)).unwrap();
        // every offspring is new: elites are the only repeats
        assert_eq!(
            r.evaluations,
            cfg.population + cfg.max_generations * (cfg.population - cfg.elite)
        );
        fresh += r.evaluations;
    }
    assert!(fresh > 2 * plain);
}

#[test]
fn true_crack_scores_below_one_percent_without_noise() {
    let space = space();
    let m = measured_90_10();
    let truth = CrackSpec::new(90, 10);
    let (best, j) = brute_force(&space, |t| forward().objective(&space.crack(t), m));
    assert_eq!(space.crack(best), truth);
    assert!(j < 1.0, "J = {j}");
    assert!(forward().cached() >= space.len());
}

#[test]
fn generous_ga_finds_the_brute_force_argmin() {
    let space = space();
    let m = measured_90_10();
    let fitness = |t: Theta| forward().objective(&space.crack(t), m);
    let (best, _) = brute_force(&space, fitness);
    let cfg = GaConfig {
        population: 20,
        max_generations: 60,
        ..GaConfig::default()
    };
    let hits = (0..20)
        .filter(|&seed| {
            run_ga(&space, &GaConfig { seed, ..cfg }, fitness)
                .unwrap()
                .best
                == best
        })
        .count();
    assert!(hits >= 19, "{hits}/20 seeds");
}

#[test]
fn objective_is_independent_of_the_forcing_amplitude() {
    let space = space();
    let crack = CrackSpec::new(60, 15);
    let a = full_measurement(crack, 1.0);
    let b = full_measurement(crack, 10.0);
    for i in (0..space.len()).step_by(34) {
        let c = space.crack(space.theta(i));
        let (ja, jb) = (forward().objective(&c, &a), forward().objective(&c, &b));
        assert!((ja - jb).abs() <= 1e-8 * ja, "{c:?}: {ja} vs {jb}");
    }
}

#[test]
fn noiseless_sampled_measurement_matches_the_harmonic_one() {
    let crack = CrackSpec::new(90, 10);
    let s = beam().structure(Some(&crack)).unwrap();
    let sol = solve_mhb(&s.system, omega(), AftConfig::default(), None).unwrap();
    let h = history_from_solution(&sol, &s.sensors, 256, 4).unwrap();
    let pairs = ordered_pairs(4);
    let sampled = measure(&h, &pairs, 0.0, 1).unwrap();
    for (x, y) in sampled.iter().zip(measured_90_10()) {
        assert!((x.value - y.value).norm() < 1e-8 * y.value.norm());
    }
    assert!(history_from_solution(&sol, &s.sensors, 256, 0).is_err());
}

#[test]
fn noiseless_monte_carlo_always_localizes() {
    let crack = CrackSpec::new(90, 10);
    let s = beam().structure(Some(&crack)).unwrap();
    let sol = solve_mhb(&s.system, omega(), AftConfig::default(), None).unwrap();
    let truth = history_from_solution(&sol, &s.sensors, 256, 4).unwrap();
    let local = ParameterSpace::new((84..=96).collect(), vec![5, 10, 15]).unwrap();
    let ga = GaConfig {
        population: local.len(),
        ..GaConfig::default()
    };
    let scenario = Scenario {
        crack,
        noise_percent: 0.0,
        replicates: 3,
        freq_hz: FREQ_HZ,
        seed: 5,
    };
    let report = monte_carlo(&local, &ga, &scenario, &truth, forward()).unwrap();
    assert_eq!(report.summary.completed, 3);
    assert_eq!(report.summary.exact_probability, 1.0);
    assert_eq!(report.summary.median_location_error, 0.0);
    assert_eq!(report.summary.histogram.get(&90), Some(&3));

    let again = monte_carlo(&local, &ga, &scenario, &truth, forward()).unwrap();
    assert_eq!(report, again);
    assert!(monte_carlo(
        &local,
        &ga,
        &Scenario {
            replicates: 0,
            ..scenario
        },
        &truth,
        forward()
    )
    .is_err());
    assert!(monte_carlo(
        &local,
        &ga,
        &Scenario {
            freq_hz: 100.0,
            ..scenario
        },
        &truth,
        forward()
    )
    .is_err());
}

#[test]
fn summary_counts_failures_and_distances() {
    let truth = CrackSpec::new(50, 10);
    let space = ParameterSpace::new(vec![40, 48, 50, 53], vec![10]).unwrap();
    let outcome = |r: usize, line: Option<usize>| ReplicateOutcome {
        replicate: r,
        seed: r as u64,
        result: line.map(|l| {
            let t = space.theta_of(&CrackSpec::new(l, 10)).unwrap();
            IdentificationResult {
                best: t,
                crack: space.crack(t),
                j: 1.0,
                reached_threshold: false,
                exhaustive: false,
                trace: vec![],
                evaluations: 1,
            }
        }),
        error: line.is_none().then(|| "failed".to_string()),
    };
    let outs = vec![
        outcome(0, Some(50)),
        outcome(1, Some(48)),
        outcome(2, None),
        outcome(3, Some(53)),
        outcome(4, Some(40)),
    ];
    let s = summarize(&truth, &outs);
    assert_eq!((s.completed, s.failed), (4, 1));
    assert_eq!(s.exact_location_probability, 0.25);
    assert_eq!(s.median_location_error, 2.5);
    assert_eq!(s.mean_location_error, 15.0 / 4.0);
    assert_eq!(s.max_location_error, 10);
    assert_eq!(s.histogram.values().sum::<usize>(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn best_score_never_increases(seed in any::<u64>(), loc in 0usize..113, depth in 0usize..3, attempts in 0usize..25) {
        let space = space();
        let target = Theta { location: loc, depth };
        let cfg = GaConfig { seed, fresh_attempts: attempts, ..GaConfig::default() };
        let r = run_ga(&space, &cfg, synthetic(&space, target)).unwrap();
        for w in r.trace.windows(2) {
            prop_assert!(w[1].best_j <= w[0].best_j);
            prop_assert!(w[1].evaluations >= w[0].evaluations);
        }
        prop_assert!(r.j >= 0.0);
        prop_assert_eq!(r.j, r.trace.last().unwrap().best_j);
        prop_assert!(r.evaluations <= space.len());
    }

    #[test]
    fn candidates_stay_on_the_grid(seed in any::<u64>(), lines in 1usize..6, depths in 1usize..4) {
        let space = ParameterSpace::new((10..10 + lines).collect(), (1..=depths as u32).collect()).unwrap();
        let seen = std::sync::Mutex::new(HashSet::new());
        let cfg = GaConfig { seed, population: 3, elite: 1, ..GaConfig::default() };
        let f = |t: Theta| {
            seen.lock().unwrap().insert(t);
            t.location as f64
        };
        let r = run_ga(&space, &cfg, f).unwrap();
        prop_assert!(seen.lock().unwrap().iter().all(|&t| space.contains(t)));
        prop_assert_eq!(r.j, brute_force(&space, |t| t.location as f64).1);
    }
}
