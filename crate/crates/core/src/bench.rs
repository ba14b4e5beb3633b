//! Construction and per-frequency solution times of the reduced models, laid
//! out like a model/size/construction/solution/total timing table.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{Beam, CrackSpec};
use crate::hbm::{
    solve_mhb_full, solve_mhb_with, AftConfig, NewtonOptions, FULL_NEWTON_MAX_UNKNOWNS,
};
use crate::hotr::surrogate_sensor_values;
use crate::rom::{rb_model, ReducedModel, SubBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: crate::fe::ModelKind,
    pub size: usize,
    /// Online (per-crack) construction, s.
    pub construction_s: f64,
    /// Condensed harmonic-balance solve, s.
    pub nl_s: f64,
    /// Full block-system harmonic-balance solve, s; absent when too large.
    pub nl_full_s: Option<f64>,
    /// Surrogate solve, s.
    pub apx_s: f64,
    pub speedup: f64,
    pub speedup_full: Option<f64>,
    pub total_nl_s: f64,
    pub total_apx_s: f64,
    pub total_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub arch: String,
    pub os: String,
    pub hardware_threads: usize,
    pub worker_threads: usize,
}

impl Machine {
    pub fn current() -> Self {
        Machine {
            arch: std::env::consts::ARCH.to_string(),
            os: std::env::consts::OS.to_string(),
            hardware_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            worker_threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub crack: CrackSpec,
    pub freq_hz: f64,
    /// Each time is the median over this many runs.
    pub runs: usize,
    pub full_size: usize,
    /// One-off reduction of substructure B, s.
    pub sub_offline_s: f64,
    pub rows: Vec<BenchRow>,
    pub machine: Machine,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn timed<T>(runs: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs {
        let start = Instant::now();
        last = Some(f()?);
        times.push(start.elapsed().as_secs_f64());
    }
    Ok((last.expect("at least one run"), median(times)))
}

fn row(
    model: &ReducedModel,
    construction_s: f64,
    omega: f64,
    aft: AftConfig,
    newton: &NewtonOptions,
    runs: usize,
) -> Result<BenchRow> {
    let sys = &model.structure.system;
    let sensors = &model.structure.sensors;
    let (_, nl_s) = timed(runs, || solve_mhb_with(sys, omega, aft, None, newton))?;
    let nl_full_s = if sys.n() * (2 * aft.harmonics + 1) <= FULL_NEWTON_MAX_UNKNOWNS {
        Some(timed(runs, || solve_mhb_full(sys, omega, aft, None, newton))?.1)
    } else {
        None
    };
    let (_, apx_s) = timed(runs, || surrogate_sensor_values(sys, omega, sensors, &[2]))?;
    Ok(BenchRow {
        model: model.kind(),
        size: model.n(),
        construction_s,
        nl_s,
        nl_full_s,
        apx_s,
        speedup: nl_s / apx_s,
        speedup_full: nl_full_s.map(|t| t / apx_s),
        total_nl_s: construction_s + nl_s,
        total_apx_s: construction_s + apx_s,
        total_speedup: (construction_s + nl_s) / (construction_s + apx_s),
    })
}

/// Time RB and SUB construction and solution for one crack at one
/// frequency, taking medians over `runs` repetitions.
pub fn bench(
    beam: &Beam,
    sub: &SubBuilder,
    crack: &CrackSpec,
    freq_hz: f64,
    aft: AftConfig,
    newton: &NewtonOptions,
    runs: usize,
) -> Result<BenchReport> {
    if runs == 0 {
        return Err(Error::invalid("at least one timing run is required"));
    }
    if !(freq_hz > 0.0) {
        return Err(Error::invalid("frequency must be positive"));
    }
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    let n_modes = sub.reduction().modal_count;
    let (rb, rb_s) = timed(runs, || rb_model(beam, Some(crack), n_modes))?;
    let (sb, sub_s) = timed(runs, || sub.model(Some(crack)))?;
    let rows = vec![
        row(&rb, rb_s, omega, aft, newton, runs)?,
        row(&sb, sub_s, omega, aft, newton, runs)?,
    ];
    Ok(BenchReport {
        crack: *crack,
        freq_hz,
        runs,
        full_size: beam.structure(Some(crack))?.system.n(),
        sub_offline_s: sub.offline_s,
        rows,
        machine: Machine::current(),
    })
}
