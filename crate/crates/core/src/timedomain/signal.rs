use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Recursive-correlation extraction of `x̂_1..x̂_h` from samples
/// `x(t0 + k·dt)`. Each order is correlated at `pω` after subtracting the
/// orders already extracted. The window must span whole periods.
pub fn extract_harmonics(
    signal: &[f64],
    dt: f64,
    t0: f64,
    omega: f64,
    h: usize,
) -> Result<Vec<C64>> {
    let n = signal.len();
    let periods = n as f64 * dt * omega / (2.0 * std::f64::consts::PI);
    if periods < 1.0 - 1e-9 {
        return Err(Error::invalid(
            "extraction window is shorter than one period",
        ));
    }
    if (periods - periods.round()).abs() > 1e-9 * periods {
        return Err(Error::invalid(format!(
            "extraction window spans {periods:.6} periods; a whole number is required"
        )));
    }
    let mut residual = signal.to_vec();
    let mut out = Vec::with_capacity(h);
    for p in 1..=h {
        let w = p as f64 * omega;
        let mut acc = C64::new(0.0, 0.0);
        for (k, r) in residual.iter().enumerate() {
            let th = w * (t0 + k as f64 * dt);
            acc += C64::new(th.cos(), -th.sin()) * *r;
        }
        let c = acc / n as f64;
        for (k, r) in residual.iter_mut().enumerate() {
            let th = w * (t0 + k as f64 * dt);
            *r -= 2.0 * (c.re * th.cos() - c.im * th.sin());
        }
        out.push(c);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisySignal {
    pub clean: Vec<f64>,
    pub noise: Vec<f64>,
    /// Requested noise-to-signal RMS ratio in percent.
    pub level: f64,
    pub seed: u64,
}

impl NoisySignal {
    pub fn measured(&self) -> Vec<f64> {
        self.clean
            .iter()
            .zip(&self.noise)
            .map(|(s, e)| s + e)
            .collect()
    }

    /// Realized `√(Σe² / ΣS²) × 100`.
    pub fn realized_level(&self) -> f64 {
        let e: f64 = self.noise.iter().map(|v| v * v).sum();
        let s: f64 = self.clean.iter().map(|v| v * v).sum();
        (e / s).sqrt() * 100.0
    }
}

/// Add zero-mean white Gaussian noise with standard deviation
/// `level/100 · rms(S)`. Channels draw from independent streams of the same
/// seed.
pub fn add_noise(signal: &[f64], level: f64, seed: u64, channel: u64) -> Result<NoisySignal> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::invalid("noise level must be non-negative"));
    }
    if level == 0.0 {
        return Ok(NoisySignal {
            clean: signal.to_vec(),
            noise: vec![0.0; signal.len()],
            level,
            seed,
        });
    }
    let rms = (signal.iter().map(|v| v * v).sum::<f64>() / signal.len().max(1) as f64).sqrt();
    if !(rms > 0.0) {
        return Err(Error::invalid("cannot scale noise to a zero-power signal"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(channel);
    let normal =
        Normal::new(0.0, level / 100.0 * rms).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(NoisySignal {
        clean: signal.to_vec(),
        noise: (0..signal.len()).map(|_| normal.sample(&mut rng)).collect(),
        level,
        seed,
    })
}
