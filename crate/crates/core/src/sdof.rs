//! Bilinear single-degree-of-freedom oscillator
//! `m ẍ + c ẋ + k x + H(x − δ) k₀ x = A sin(ω_f t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{scalar_model, ContactPair, SensorRow, SystemModel};
use crate::timedomain::{self, AlphaParams, Integrator, IntegratorConfig, TimeHistory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdofParams {
    pub m: f64,
    pub c: f64,
    pub k: f64,
    pub k0: f64,
    pub delta: f64,
    /// Forcing frequency, rad/s.
    pub omega_f: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl SdofParams {
    pub fn healthy() -> Self {
        SdofParams {
            m: 1.0,
            c: 0.02,
            k: 1.0,
            k0: 0.0,
            delta: 0.0,
            omega_f: 0.6,
            amplitude: 1.0,
        }
    }

    /// Same closed-gap stiffness as [`healthy`](Self::healthy).
    pub fn cracked() -> Self {
        SdofParams {
            k: 0.9,
            k0: 0.1,
            ..Self::healthy()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.m > 0.0
            && self.k >= 0.0
            && self.k0 >= 0.0
            && self.c >= 0.0
            && self.omega_f > 0.0
            && self.delta.is_finite()
            && self.amplitude.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("SDoF needs m > 0, k, k0, c ≥ 0 and ω_f > 0"))
        }
    }

    pub fn model(&self) -> Result<SystemModel> {
        self.validate()?;
        let mut model = scalar_model(self.m, self.c, self.k)?;
        // sin(ωt) = 2 Re(−i/2 · e^{iωt})
        model.force_pattern = vec![C64::new(0.0, -0.5)];
        model.force_amplitude = self.amplitude;
        if self.k0 > 0.0 {
            model.contact_pairs.push(ContactPair {
                dof_plus: 0,
                dof_minus: None,
                stiffness: self.k0,
                gap: self.delta,
            });
        }
        Ok(model)
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_f
    }
}

/// Integrator settings used for the oscillator.
pub fn default_integrator() -> IntegratorConfig {
    IntegratorConfig {
        steady_tol: 1e-6,
        steady_periods: 2,
        max_periods: 20_000,
        record_periods: 4,
        ..IntegratorConfig::default()
    }
}

/// Displacement history from rest over `[0, t_end]`.
pub fn simulate_sdof(params: &SdofParams, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    let model = params.model()?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::invalid("time step and end time must be positive"));
    }
    if dt > params.period() / 64.0 {
        return Err(Error::invalid(
            "time step must resolve the forcing (≥ 64 steps per period)",
        ));
    }
    let mut it = Integrator::new(&model, params.omega_f, AlphaParams::from_rho_inf(0.7)?, dt)?;
    let steps = (t_end / dt).round() as usize;
    let bound = 1e6 * params.amplitude.abs().max(1.0)
        / (params.k + params.k0)
            .max(params.c * params.omega_f)
            .max(1e-12);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(it.x[0]);
    for _ in 0..steps {
        it.step()?;
        if it.x[0].abs() > bound {
            return Err(Error::Integration(format!(
                "response diverged at t = {}",
                it.t
            )));
        }
        out.push(it.x[0]);
    }
    Ok(out)
}

/// Steady-state periods of the displacement.
pub fn steady_response(params: &SdofParams, cfg: &IntegratorConfig) -> Result<TimeHistory> {
    let model = params.model()?;
    timedomain::integrate(&model, params.omega_f, &[SensorRow::unit(0)], cfg)
}

/// `|x̂_p|`, `p = 0..=h`, of samples spaced `dt` over whole forcing periods.
pub fn spectrum(x: &[f64], dt: f64, omega_f: f64, h: usize) -> Result<Vec<f64>> {
    let n = x.len();
    let periods = n as f64 * dt * omega_f / (2.0 * std::f64::consts::PI);
    if n == 0
        || (periods - periods.round()).abs() > 1e-9 * periods.max(1.0)
        || periods.round() < 1.0
    {
        return Err(Error::invalid(format!(
            "spectrum window spans {periods:.6} periods; a whole number is required"
        )));
    }
    Ok((0..=h)
        .map(|p| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, v) in x.iter().enumerate() {
                let th = p as f64 * omega_f * k as f64 * dt;
                acc += C64::new(th.cos(), -th.sin()) * *v;
            }
            acc.norm() / n as f64
        })
        .collect())
}

/// Harmonic magnitudes of the steady response, `(frequency [rad/s], |x̂_p|)`.
pub fn steady_spectrum(params: &SdofParams, h: usize) -> Result<Vec<(f64, f64)>> {
    let hist = steady_response(params, &default_integrator())?;
    let mags = spectrum(&hist.channels[0], hist.dt, params.omega_f, h)?;
    Ok(mags
        .into_iter()
        .enumerate()
        .map(|(p, m)| (p as f64 * params.omega_f, m))
        .collect())
}
