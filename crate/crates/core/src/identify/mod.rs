//! Crack identification by genetic search over a discrete crack grid, scored
//! by the surrogate second-order transmissibility against a measurement.

mod ga;
mod montecarlo;
mod objective;
mod space;

pub use ga::{brute_force, run_ga, GaConfig, GenerationRecord, IdentificationResult, MutationUnit};
pub use montecarlo::{
    history_from_solution, measure, measurement_integrator, monte_carlo, summarize,
    synthesize_truth, MonteCarloReport, MonteCarloSummary, ReplicateOutcome, Scenario,
    MEASUREMENT_PERIODS,
};
pub use objective::{objective, ForwardModel, IDENTIFICATION_ORDER};
pub use space::{ParameterSpace, Theta};

use crate::rom::SubstructureSplit;

/// Default search depths in percent of the beam height.
pub const DEFAULT_DEPTHS: [u32; 3] = [5, 10, 15];

/// Every crack line a SUB model admits × the default depths.
pub fn default_space(split: &SubstructureSplit) -> ParameterSpace {
    ParameterSpace {
        lines: split.crack_lines().collect(),
        depths: DEFAULT_DEPTHS.to_vec(),
    }
}
