use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::{ParameterSpace, Theta};
use crate::error::{Error, Result};
use crate::fe::CrackSpec;

/// Unit of the Gaussian mutation standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationUnit {
    /// One grid step per coordinate.
    GridStep,
    /// The full index span of each coordinate.
    Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub max_generations: usize,
    pub elite: usize,
    pub crossover_fraction: f64,
    pub tournament: usize,
    /// Initial mutation standard deviation in `mutation_unit`s.
    pub mutation_scale: f64,
    /// Fraction of the initial deviation removed by the last generation.
    pub mutation_shrink: f64,
    pub mutation_unit: MutationUnit,
    /// Draws allowed for an offspring that was not scored before; when all
    /// repeat earlier candidates an unscored one is drawn uniformly. Zero
    /// accepts repeats.
    pub fresh_attempts: usize,
    /// Stop once the best `J` (percent) falls below this value.
    pub stop_below: Option<f64>,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 7,
            max_generations: 40,
            elite: 2,
            crossover_fraction: 0.8,
            tournament: 2,
            mutation_scale: 1.0,
            mutation_shrink: 1.0,
            mutation_unit: MutationUnit::GridStep,
            fresh_attempts: 20,
            stop_below: None,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population == 0 || self.elite >= self.population {
            return Err(Error::invalid(
                "elite count must be smaller than a nonzero population",
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return Err(Error::invalid("crossover fraction must lie in [0, 1]"));
        }
        if self.tournament == 0 {
            return Err(Error::invalid("tournament size must be positive"));
        }
        if !(self.mutation_scale >= 0.0) || !(0.0..=1.0).contains(&self.mutation_shrink) {
            return Err(Error::invalid(
                "mutation scale must be non-negative and shrink in [0, 1]",
            ));
        }
        if let Some(t) = self.stop_below {
            if !(t >= 0.0) {
                return Err(Error::invalid("stopping threshold must be non-negative"));
            }
        }
        Ok(())
    }

    /// Stopping threshold for a given measurement noise level in percent.
    pub fn threshold_for_noise(noise_percent: f64) -> f64 {
        (2.0 * noise_percent).max(0.5)
    }

    fn sigma(&self, generation: usize, span: usize) -> f64 {
        let unit = match self.mutation_unit {
            MutationUnit::GridStep => 1.0,
            MutationUnit::Span => span as f64,
        };
        let progress = generation as f64 / self.max_generations.max(1) as f64;
        (self.mutation_scale * (1.0 - self.mutation_shrink * progress)).max(0.0) * unit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_j: f64,
    /// Mean over finite scores of the population.
    pub mean_j: f64,
    pub best: Theta,
    /// Distinct candidates scored so far.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub best: Theta,
    pub crack: CrackSpec,
    pub j: f64,
    /// True when the stopping threshold was reached.
    pub reached_threshold: bool,
    pub exhaustive: bool,
    pub trace: Vec<GenerationRecord>,
    pub evaluations: usize,
}

impl IdentificationResult {
    /// First generation whose best candidate is `target`, if any.
    pub fn first_hit(&self, target: Theta) -> Option<usize> {
        self.trace
            .iter()
            .find(|g| g.best == target)
            .map(|g| g.generation)
    }
}

struct Scorer<'a, F> {
    fitness: &'a F,
    memo: HashMap<Theta, f64>,
}

impl<F: Fn(Theta) -> f64 + Sync> Scorer<'_, F> {
    fn score(&mut self, pop: &[Theta]) -> Vec<f64> {
        let mut fresh: Vec<Theta> = pop
            .iter()
            .copied()
            .filter(|t| !self.memo.contains_key(t))
            .collect();
        fresh.sort();
        fresh.dedup();
        let f = self.fitness;
        let scores: Vec<f64> = fresh.par_iter().map(|&t| sanitize(f(t))).collect();
        self.memo.extend(fresh.into_iter().zip(scores));
        pop.iter().map(|t| self.memo[t]).collect()
    }
}

fn sanitize(j: f64) -> f64 {
    if j.is_nan() {
        f64::INFINITY
    } else {
        j
    }
}

/// Indices sorted by ascending score, ties broken by candidate.
fn ranking(pop: &[Theta], scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(pop[a].cmp(&pop[b])));
    idx
}

fn record(
    generation: usize,
    pop: &[Theta],
    scores: &[f64],
    evaluations: usize,
) -> GenerationRecord {
    let best = ranking(pop, scores)[0];
    let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    GenerationRecord {
        generation,
        best_j: scores[best],
        mean_j: if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        },
        best: pop[best],
        evaluations,
    }
}

fn tournament(rng: &mut ChaCha8Rng, pop: &[Theta], scores: &[f64], size: usize) -> Theta {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if scores[c] < scores[best] || (scores[c] == scores[best] && pop[c] < pop[best]) {
            best = c;
        }
    }
    pop[best]
}

fn mutate(rng: &mut ChaCha8Rng, t: Theta, sigma: [f64; 2], spans: [usize; 2]) -> Theta {
    let mut c = [t.location, t.depth];
    for k in 0..2 {
        let z: f64 = StandardNormal.sample(rng);
        let v = (c[k] as f64 + sigma[k] * z).round();
        c[k] = v.clamp(0.0, spans[k] as f64) as usize;
    }
    Theta {
        location: c[0],
        depth: c[1],
    }
}

/// Genetic search for `argmin J` over the grid. `fitness` must be pure; each
/// distinct candidate is scored once and scores of a generation are computed
/// in parallel.
pub fn run_ga<F>(space: &ParameterSpace, cfg: &GaConfig, fitness: F) -> Result<IdentificationResult>
where
    F: Fn(Theta) -> f64 + Sync,
{
    cfg.validate()?;
    let mut scorer = Scorer {
        fitness: &fitness,
        memo: HashMap::new(),
    };
    if cfg.population >= space.len() {
        let all: Vec<Theta> = space.iter().collect();
        let scores = scorer.score(&all);
        let rec = record(0, &all, &scores, all.len());
        return Ok(IdentificationResult {
            best: rec.best,
            crack: space.crack(rec.best),
            j: rec.best_j,
            reached_threshold: cfg.stop_below.is_some_and(|t| rec.best_j < t),
            exhaustive: true,
            trace: vec![rec],
            evaluations: all.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spans = space.spans();
    let mut pop: Vec<Theta> = sample(&mut rng, space.len(), cfg.population)
        .into_iter()
        .map(|i| space.theta(i))
        .collect();
    let mut scores = scorer.score(&pop);
    let mut trace = vec![record(0, &pop, &scores, scorer.memo.len())];
    let reached = |r: &GenerationRecord| cfg.stop_below.is_some_and(|t| r.best_j < t);

    let offspring = cfg.population - cfg.elite;
    let n_cross = (cfg.crossover_fraction * offspring as f64).round() as usize;
    for generation in 1..=cfg.max_generations {
        if reached(trace.last().unwrap()) {
            break;
        }
        let order = ranking(&pop, &scores);
        let mut next: Vec<Theta> = order[..cfg.elite].iter().map(|&i| pop[i]).collect();
        let sigma = [
            cfg.sigma(generation, spans[0]),
            cfg.sigma(generation, spans[1]),
        ];
        while next.len() < cfg.population {
            let crossover = next.len() < cfg.elite + n_cross;
            let mut child = None;
            for _ in 0..cfg.fresh_attempts.max(1) {
                let c = if crossover {
                    let a = tournament(&mut rng, &pop, &scores, cfg.tournament);
                    let b = tournament(&mut rng, &pop, &scores, cfg.tournament);
                    Theta {
                        location: if rng.random_bool(0.5) {
                            a.location
                        } else {
                            b.location
                        },
                        depth: if rng.random_bool(0.5) {
                            a.depth
                        } else {
                            b.depth
                        },
                    }
                } else {
                    let parent = tournament(&mut rng, &pop, &scores, cfg.tournament);
                    mutate(&mut rng, parent, sigma, spans)
                };
                child = Some(c);
                if cfg.fresh_attempts == 0 || !(scorer.memo.contains_key(&c) || next.contains(&c)) {
                    break;
                }
                child = None;
            }
            let child = match child {
                Some(c) => c,
                None => {
                    let open: Vec<Theta> = space
                        .iter()
                        .filter(|t| !scorer.memo.contains_key(t) && !next.contains(t))
                        .collect();
                    if open.is_empty() {
                        pop[order[rng.random_range(0..order.len())]]
                    } else {
                        open[rng.random_range(0..open.len())]
                    }
                }
            };
            next.push(child);
        }
        pop = next;
        scores = scorer.score(&pop);
        trace.push(record(generation, &pop, &scores, scorer.memo.len()));
    }
    let last = *trace.last().unwrap();
    Ok(IdentificationResult {
        best: last.best,
        crack: space.crack(last.best),
        j: last.best_j,
        reached_threshold: reached(&last),
        exhaustive: false,
        trace,
        evaluations: scorer.memo.len(),
    })
}

/// Exhaustive `argmin J`; ties go to the first candidate in grid order.
pub fn brute_force<F>(space: &ParameterSpace, fitness: F) -> (Theta, f64)
where
    F: Fn(Theta) -> f64 + Sync,
{
    let all: Vec<Theta> = space.iter().collect();
    let scores: Vec<f64> = all.par_iter().map(|&t| sanitize(fitness(t))).collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    (all[best], scores[best])
}
