//! Generalized-alpha time integration, harmonic extraction and measurement
//! noise.

mod integrator;
mod signal;

pub use integrator::{
    closed_periodic_state, integrate, integrate_from, AlphaParams, Integrator, IntegratorConfig,
    TimeHistory,
};
pub use signal::{add_noise, extract_harmonics, NoisySignal};
