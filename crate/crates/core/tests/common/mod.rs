#![allow(dead_code)]

use hotr_core::linalg::{self, C64};
use hotr_core::model::{ContactPair, SystemModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Spring–mass chain with two internal contact pairs and random parameters.
pub fn random_chain(n: usize, seed: u64) -> SystemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for i in 0..n {
        mt.push((i, i, rng.random_range(0.5..2.0)));
        let ground = rng.random_range(0.05..0.3);
        kt.push((i, i, ground));
        if i + 1 < n {
            let k = rng.random_range(0.5..2.0);
            kt.push((i, i, k));
            kt.push((i + 1, i + 1, k));
            kt.push((i, i + 1, -k));
            kt.push((i + 1, i, -k));
        }
    }
    let k = linalg::csr_from_triplets(n, &kt);
    let m = linalg::csr_from_triplets(n, &mt);
    let c = linalg::csr_combine(0.01, &m, 0.005, &k);
    let pairs = vec![
        ContactPair::new(n / 5, n / 5 + 1, rng.random_range(1.0..3.0)),
        ContactPair::new(3 * n / 5, 3 * n / 5 + 1, rng.random_range(1.0..3.0)),
    ];
    let mut q = vec![C64::new(0.0, 0.0); n];
    q[0] = C64::new(1.0, 0.0);
    q[n - 1] = C64::new(-0.5, 0.0);
    SystemModel::new(m, c, k, pairs, q, n).unwrap()
}

/// Unit mass–spring oscillator with a unilateral ground spring.
pub fn bilinear_oscillator(k: f64, k0: f64, c: f64) -> SystemModel {
    let mut model = hotr_core::model::scalar_model(1.0, c, k).unwrap();
    model.contact_pairs.push(ContactPair {
        dof_plus: 0,
        dof_minus: None,
        stiffness: k0,
        gap: 0.0,
    });
    model
}
