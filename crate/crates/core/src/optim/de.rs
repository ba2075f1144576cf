//! Differential evolution on the unit hypercube.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Strategy {
    #[default]
    #[serde(rename = "rand1bin")]
    Rand1Bin,
    #[serde(rename = "best1bin")]
    Best1Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeConfig {
    /// Population size; `15 × dims` when absent.
    pub population: Option<usize>,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "CR")]
    pub cr: f64,
    pub max_generations: usize,
    /// Stop once the spread of population scores is at most `tol (1 + |best|)`.
    pub tol: f64,
    pub seed: u64,
    pub strategy: Strategy,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: None,
            f: 0.7,
            cr: 0.9,
            max_generations: 600,
            tol: 1e-8,
            seed: 0,
            strategy: Strategy::Rand1Bin,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f > 0.0 && self.f <= 2.0) {
            return Err(Error::Config(format!("F = {} is outside (0, 2]", self.f)));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::Config(format!("CR = {} is outside [0, 1]", self.cr)));
        }
        if self.population.is_some_and(|n| n < 4) {
            return Err(Error::Config("population must hold at least 4 members".into()));
        }
        Ok(())
    }

    pub fn population_for(&self, dims: usize) -> usize {
        self.population.unwrap_or(15 * dims).max(4)
    }
}

/// Objective value and constraint violation at a point; `violation == 0` means feasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub violation: f64,
}

impl Evaluation {
    pub fn feasible(value: f64) -> Self {
        Self { value, violation: 0.0 }
    }
}

/// Added to the value of infeasible points, times `1 + violation`.
pub const PENALTY: f64 = 1e6;

/// Coordinates this close to a face of the cube are tried on the face after the run.
const SNAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeOutcome {
    pub theta: Vec<f64>,
    pub value: f64,
    pub violation: f64,
    /// Best penalized score after each generation.
    pub trace: Vec<(usize, f64)>,
    pub generations: usize,
}

fn score(theta: &[f64], e: Evaluation) -> Result<f64> {
    if e.violation > 0.0 {
        let v = if e.violation.is_finite() { e.violation } else { 1e12 };
        let base = if e.value.is_finite() { e.value } else { 0.0 };
        return Ok(base + PENALTY * (1.0 + v));
    }
    if !e.value.is_finite() {
        return Err(Error::NonFiniteObjective { theta: theta.to_vec() });
    }
    Ok(e.value)
}

fn rng_for(seed: u64, generation: usize, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | member as u64);
    rng
}

fn reflect(v: f64) -> f64 {
    let r = if v < 0.0 {
        -v
    } else if v > 1.0 {
        2.0 - v
    } else {
        v
    };
    r.clamp(0.0, 1.0)
}

fn evaluate_all<F>(objective: &F, points: &[Vec<f64>]) -> Result<Vec<(f64, Evaluation)>>
where
    F: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    let one = |t: &Vec<f64>| -> Result<(f64, Evaluation)> {
        let e = objective(t)?;
        Ok((score(t, e)?, e))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(one).collect()
    }
}

/// Minimizes `objective` over `[0, 1]^dims`.
///
/// Infeasible points score `value + 1e6 (1 + violation)`. Each member draws from
/// its own ChaCha stream keyed by generation and index, so the result does not
/// depend on the number of worker threads.
pub fn minimize<F>(objective: F, dims: usize, config: &DeConfig) -> Result<DeOutcome>
where
    F: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    config.validate()?;
    if dims == 0 {
        let e = objective(&[])?;
        let s = score(&[], e)?;
        return Ok(DeOutcome {
            theta: vec![],
            value: e.value,
            violation: e.violation,
            trace: vec![(0, s)],
            generations: 0,
        });
    }
    with_pool(|| run(&objective, dims, config))
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(job: impl FnOnce() -> T + Send) -> T {
    match std::env::var("MOMENTBOUND_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        },
        _ => job(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T>(job: impl FnOnce() -> T) -> T {
    job()
}

fn run<F>(objective: &F, dims: usize, config: &DeConfig) -> Result<DeOutcome>
where
    F: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    let np = config.population_for(dims);
    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|i| {
            let mut rng = rng_for(config.seed, 0, i);
            (0..dims).map(|_| rng.random::<f64>()).collect()
        })
        .collect();
    let evals = evaluate_all(objective, &pop)?;
    let mut scores: Vec<f64> = evals.iter().map(|e| e.0).collect();
    let mut details: Vec<Evaluation> = evals.iter().map(|e| e.1).collect();

    let best_of = |scores: &[f64]| {
        let mut b = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s < scores[b] {
                b = i;
            }
        }
        b
    };
    let mut best = best_of(&scores);
    let mut trace = vec![(0, scores[best])];
    let mut generation = 0;

    while generation < config.max_generations {
        let spread = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - scores[best];
        if spread <= config.tol * (1.0 + scores[best].abs()) {
            break;
        }
        generation += 1;
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut rng = rng_for(config.seed, generation, i);
                let mut pick = |exclude: &[usize]| loop {
                    let r = rng.random_range(0..np);
                    if !exclude.contains(&r) {
                        return r;
                    }
                };
                let base = match config.strategy {
                    Strategy::Rand1Bin => pick(&[i]),
                    Strategy::Best1Bin => best,
                };
                let b = pick(&[i, base]);
                let c = pick(&[i, base, b]);
                let forced = rng.random_range(0..dims);
                (0..dims)
                    .map(|j| {
                        if j == forced || rng.random::<f64>() < config.cr {
                            reflect(pop[base][j] + config.f * (pop[b][j] - pop[c][j]))
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let evals = evaluate_all(objective, &trials)?;
        for (i, (t, (s, e))) in trials.into_iter().zip(evals).enumerate() {
            if s <= scores[i] {
                pop[i] = t;
                scores[i] = s;
                details[i] = e;
            }
        }
        best = best_of(&scores);
        trace.push((generation, scores[best]));
    }

    let mut theta = pop[best].clone();
    let mut s_best = scores[best];
    let mut e_best = details[best];
    for j in 0..dims {
        for face in [0.0, 1.0] {
            if theta[j] != face && (theta[j] - face).abs() < SNAP {
                let mut t = theta.clone();
                t[j] = face;
                let e = objective(&t)?;
                let s = score(&t, e)?;
                if s <= s_best {
                    theta = t;
                    s_best = s;
                    e_best = e;
                }
            }
        }
    }
    if s_best < trace.last().map_or(f64::INFINITY, |t| t.1) {
        trace.push((generation + 1, s_best));
    }
    Ok(DeOutcome {
        theta,
        value: e_best.value,
        violation: e_best.violation,
        trace,
        generations: generation,
    })
}
