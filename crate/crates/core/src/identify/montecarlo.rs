use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ga::{run_ga, GaConfig, IdentificationResult};
use super::objective::{ForwardModel, IDENTIFICATION_ORDER};
use super::space::ParameterSpace;
use crate::error::{Error, Result};
use crate::fe::{Beam, CrackSpec};
use crate::hbm::HarmonicSolution;
use crate::hotr::{tr_from_harmonics, TransmissibilityRecord};
use crate::model::SensorRow;
use crate::timedomain::{
    add_noise, closed_periodic_state, extract_harmonics, integrate_from, IntegratorConfig,
    TimeHistory,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub crack: CrackSpec,
    /// Noise-to-signal RMS ratio in percent.
    pub noise_percent: f64,
    pub replicates: usize,
    pub freq_hz: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("at least one replicate is required"));
        }
        if !(self.freq_hz > 0.0) {
            return Err(Error::invalid("measurement frequency must be positive"));
        }
        if !(self.noise_percent >= 0.0) {
            return Err(Error::invalid("noise level must be non-negative"));
        }
        Ok(())
    }

    /// Noise seed of replicate `r`; the GA of that replicate uses the next
    /// value.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.seed
            .wrapping_add(r as u64)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(17)
    }
}

/// Periods in a synthetic measurement record.
pub const MEASUREMENT_PERIODS: usize = 100;

/// Default integration settings with a measurement-length record.
pub fn measurement_integrator() -> IntegratorConfig {
    IntegratorConfig {
        record_periods: MEASUREMENT_PERIODS,
        ..IntegratorConfig::default()
    }
}

/// Sensor signals of a harmonic solution sampled over whole periods.
pub fn history_from_solution(
    sol: &HarmonicSolution,
    sensors: &[SensorRow],
    steps_per_period: usize,
    periods: usize,
) -> Result<TimeHistory> {
    if steps_per_period == 0 || periods == 0 {
        return Err(Error::invalid(
            "sampling needs at least one step and one period",
        ));
    }
    let dt = 2.0 * std::f64::consts::PI / sol.omega / steps_per_period as f64;
    let len = steps_per_period * periods;
    Ok(TimeHistory {
        omega: sol.omega,
        dt,
        t0: 0.0,
        steps_per_period,
        channels: sensors
            .iter()
            .map(|s| (0..len).map(|k| sol.output_at(s, k as f64 * dt)).collect())
            .collect(),
        transient_periods: 0,
    })
}

/// Steady-state gauge strains of the full cracked beam, integrated from the
/// closed-crack periodic state.
pub fn synthesize_truth(
    beam: &Beam,
    crack: &CrackSpec,
    omega: f64,
    cfg: &IntegratorConfig,
) -> Result<TimeHistory> {
    let s = beam.structure(Some(crack))?;
    let (x0, v0) = closed_periodic_state(&s.system, omega)?;
    integrate_from(&s.system, omega, &s.sensors, cfg, &x0, &v0)
}

/// Measured `T̂r_2` from a recorded history after adding noise to every
/// channel.
pub fn measure(
    truth: &TimeHistory,
    pairs: &[(usize, usize)],
    noise_percent: f64,
    seed: u64,
) -> Result<Vec<TransmissibilityRecord>> {
    let harmonics = truth
        .channels
        .iter()
        .enumerate()
        .map(|(c, ch)| {
            let noisy = add_noise(ch, noise_percent, seed, c as u64)?.measured();
            extract_harmonics(
                &noisy,
                truth.dt,
                truth.t0,
                truth.omega,
                IDENTIFICATION_ORDER,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    tr_from_harmonics(&harmonics, truth.omega, pairs, IDENTIFICATION_ORDER)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub result: Option<IdentificationResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub completed: usize,
    pub failed: usize,
    /// Fraction of completed replicates on the true line.
    pub exact_location_probability: f64,
    /// Fraction of completed replicates on the true line and depth.
    pub exact_probability: f64,
    pub median_location_error: f64,
    pub mean_location_error: f64,
    pub max_location_error: usize,
    /// Identified line → count.
    pub histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub scenario: Scenario,
    pub outcomes: Vec<ReplicateOutcome>,
    pub summary: MonteCarloSummary,
}

pub fn summarize(truth: &CrackSpec, outcomes: &[ReplicateOutcome]) -> MonteCarloSummary {
    let found: Vec<&CrackSpec> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().map(|r| &r.crack))
        .collect();
    let mut errors: Vec<usize> = found
        .iter()
        .map(|c| c.location_index.abs_diff(truth.location_index))
        .collect();
    errors.sort_unstable();
    let n = found.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let median = match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => errors[n / 2] as f64,
        _ => 0.5 * (errors[n / 2 - 1] + errors[n / 2]) as f64,
    };
    let mut histogram = BTreeMap::new();
    for c in &found {
        *histogram.entry(c.location_index).or_insert(0) += 1;
    }
    MonteCarloSummary {
        completed: n,
        failed: outcomes.len() - n,
        exact_location_probability: frac(errors.iter().filter(|&&e| e == 0).count()),
        exact_probability: frac(found.iter().filter(|c| **c == truth).count()),
        median_location_error: median,
        mean_location_error: if n == 0 {
            f64::NAN
        } else {
            errors.iter().sum::<usize>() as f64 / n as f64
        },
        max_location_error: errors.last().copied().unwrap_or(0),
        histogram,
    }
}

/// Repeated noisy measurement and GA identification against one recorded
/// truth. The integration is deterministic, so only the noise is redrawn per
/// replicate. Without an explicit threshold the GA stops at the noise-based
/// one.
pub fn monte_carlo(
    space: &ParameterSpace,
    ga: &GaConfig,
    scenario: &Scenario,
    truth: &TimeHistory,
    forward: &ForwardModel,
) -> Result<MonteCarloReport> {
    scenario.validate()?;
    ga.validate()?;
    if (truth.omega - scenario.omega()).abs() > 1e-9 * truth.omega
        || (forward.omega() - truth.omega).abs() > 1e-9 * truth.omega
    {
        return Err(Error::invalid(
            "truth, forward model and scenario frequencies differ",
        ));
    }
    let outcomes: Vec<ReplicateOutcome> = (0..scenario.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = scenario.replicate_seed(r);
            let run = measure(truth, forward.pairs(), scenario.noise_percent, seed).and_then(
                |measured| {
                    let cfg = GaConfig {
                        seed: seed.wrapping_add(1),
                        stop_below: ga
                            .stop_below
                            .or(Some(GaConfig::threshold_for_noise(scenario.noise_percent))),
                        ..*ga
                    };
                    run_ga(space, &cfg, |t| {
                        forward.objective(&space.crack(t), &measured)
                    })
                },
            );
            let (result, error) = match run {
                Ok(res) => (Some(res), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ReplicateOutcome {
                replicate: r,
                seed,
                result,
                error,
            }
        })
        .collect();
    Ok(MonteCarloReport {
        scenario: *scenario,
        summary: summarize(&scenario.crack, &outcomes),
        outcomes,
    })
}
