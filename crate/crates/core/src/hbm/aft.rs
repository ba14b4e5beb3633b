use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::ContactPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AftConfig {
    pub n_samples: usize,
    pub harmonics: usize,
}

impl Default for AftConfig {
    fn default() -> Self {
        AftConfig {
            n_samples: 1024,
            harmonics: 5,
        }
    }
}

impl AftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_samples.is_power_of_two() {
            return Err(Error::invalid(format!(
                "AFT sample count {} is not a power of two",
                self.n_samples
            )));
        }
        if self.harmonics == 0 {
            return Err(Error::invalid("at least one harmonic is required"));
        }
        if self.n_samples < 4 * self.harmonics + 4 {
            return Err(Error::invalid(format!(
                "{} samples are too few for {} harmonics (need ≥ {})",
                self.n_samples,
                self.harmonics,
                4 * self.harmonics + 4
            )));
        }
        Ok(())
    }

    /// Size of the real coordinate vector `[a0, Re a1, Im a1, …]`.
    pub fn real_len(&self) -> usize {
        2 * self.harmonics + 1
    }
}

/// Sampled trigonometric basis `cos(pθ_k)`, `sin(pθ_k)` on `θ_k = 2πk/N`.
#[derive(Debug, Clone)]
pub struct Aft {
    pub cfg: AftConfig,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Aft {
    pub fn new(cfg: AftConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_samples;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        Ok(Aft {
            cfg,
            cos: (0..n).map(|k| (k as f64 * step).cos()).collect(),
            sin: (0..n).map(|k| (k as f64 * step).sin()).collect(),
        })
    }

    #[inline]
    fn cs(&self, p: usize, k: usize) -> (f64, f64) {
        let m = (p * k) % self.cfg.n_samples;
        (self.cos[m], self.sin[m])
    }

    /// `u(θ_k) = a0 + Σ_p 2 Re(a_p e^{ipθ_k})`.
    pub fn to_time(&self, coeffs: &[C64]) -> Vec<f64> {
        (0..self.cfg.n_samples)
            .map(|k| {
                let mut u = coeffs[0].re;
                for (p, a) in coeffs.iter().enumerate().skip(1) {
                    let (c, s) = self.cs(p, k);
                    u += 2.0 * (a.re * c - a.im * s);
                }
                u
            })
            .collect()
    }

    /// `f̂_p = (1/N) Σ_k f_k e^{−ipθ_k}` for `p = 0..=h`.
    pub fn to_freq(&self, samples: &[f64]) -> Vec<C64> {
        let n = self.cfg.n_samples;
        (0..=self.cfg.harmonics)
            .map(|p| {
                let (mut re, mut im) = (0.0, 0.0);
                for (k, f) in samples.iter().enumerate() {
                    let (c, s) = self.cs(p, k);
                    re += f * c;
                    im -= f * s;
                }
                C64::new(re / n as f64, im / n as f64)
            })
            .collect()
    }

    /// Fourier coefficients of one pair's contact force given those of its
    /// relative displacement.
    pub fn pair_force(&self, pair: &ContactPair, x_rel: &[C64]) -> Vec<C64> {
        let f: Vec<f64> = self
            .to_time(x_rel)
            .into_iter()
            .map(|u| pair.force(u))
            .collect();
        self.to_freq(&f)
    }

    /// Force coefficients and their derivative with respect to the real
    /// coordinates `[a0, Re a1, Im a1, …]` of the relative displacement.
    pub fn pair_force_jacobian(
        &self,
        pair: &ContactPair,
        x_rel: &[C64],
    ) -> (Vec<C64>, DMatrix<f64>) {
        let n = self.cfg.n_samples;
        let h = self.cfg.harmonics;
        let m = self.cfg.real_len();
        let u = self.to_time(x_rel);
        let f: Vec<f64> = u.iter().map(|&v| pair.force(v)).collect();
        let coeffs = self.to_freq(&f);
        let mut jac = DMatrix::<f64>::zeros(m, m);
        let mut du = vec![0.0; m];
        let mut df = vec![0.0; m];
        for (k, &uk) in u.iter().enumerate() {
            let g = pair.tangent(uk);
            if g == 0.0 {
                continue;
            }
            du[0] = 1.0;
            df[0] = 1.0;
            for p in 1..=h {
                let (c, s) = self.cs(p, k);
                du[2 * p - 1] = 2.0 * c;
                du[2 * p] = -2.0 * s;
                df[2 * p - 1] = c;
                df[2 * p] = -s;
            }
            let w = g / n as f64;
            for r in 0..m {
                let a = w * df[r];
                for c in 0..m {
                    jac[(r, c)] += a * du[c];
                }
            }
        }
        (coeffs, jac)
    }
}

/// Force coefficients `f̂_0..f̂_h` per contact pair from the relative
/// displacement coefficients per pair.
pub fn aft_coefficients(
    x_rel: &[Vec<C64>],
    pairs: &[ContactPair],
    cfg: AftConfig,
) -> Result<Vec<Vec<C64>>> {
    if x_rel.len() != pairs.len() {
        return Err(Error::invalid(
            "one coefficient set per contact pair is required",
        ));
    }
    let aft = Aft::new(cfg)?;
    x_rel
        .iter()
        .zip(pairs)
        .map(|(x, p)| {
            if x.len() != cfg.harmonics + 1 {
                return Err(Error::invalid("coefficient count differs from h + 1"));
            }
            Ok(aft.pair_force(p, x))
        })
        .collect()
}

/// Scatter per-pair force coefficients into full harmonic vectors of
/// length `n` with the signed pair incidence.
pub fn scatter(pairs: &[ContactPair], forces: &[Vec<C64>], n: usize) -> Vec<Vec<C64>> {
    let h1 = forces.first().map_or(0, |f| f.len());
    let mut out = vec![vec![C64::new(0.0, 0.0); n]; h1];
    for (pair, f) in pairs.iter().zip(forces) {
        for (p, v) in f.iter().enumerate() {
            pair.scatter(*v, &mut out[p]);
        }
    }
    out
}
