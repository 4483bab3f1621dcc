//! Cross-entropy method over flattened policy parameters.
//!
//! Each iteration samples a population from a diagonal Gaussian, evaluates
//! every candidate, refits mean and per-parameter stddev to the elites and
//! floors the stddev. Optional extra noise, decaying linearly to zero over the
//! run, is added to the refitted variance to delay premature collapse. Candidates are sampled sequentially from one seeded
//! stream and evaluated in population order, so results are identical for
//! any thread count.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::env::{evaluate_policy, Env};
use super::Policy;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub population: usize,
    pub elite_fraction: f64,
    pub initial_stddev: f64,
    pub stddev_floor: f64,
    /// Extra exploration stddev at iteration 0, decaying linearly to 0.
    pub extra_stddev: f64,
    pub episodes: usize,
    pub seed: u64,
    /// Worker threads for population evaluation; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            population: 64,
            elite_fraction: 0.1,
            initial_stddev: 0.5,
            stddev_floor: 0.01,
            extra_stddev: 0.0,
            episodes: 1,
            seed: 0,
            threads: 0,
        }
    }
}

impl TrainConfig {
    pub fn elite_count(&self) -> usize {
        (self.elite_fraction * self.population as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::invariant("population", "must be >= 2"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::invariant(
                "elite_fraction",
                format!("must be in (0, 1), got {}", self.elite_fraction),
            ));
        }
        if self.elite_count() < 1 {
            return Err(Error::invariant("elite_fraction", "selects no elites"));
        }
        if !(self.initial_stddev.is_finite() && self.initial_stddev >= 0.0) {
            return Err(Error::invariant(
                "initial_stddev",
                "must be finite and >= 0",
            ));
        }
        if !(self.stddev_floor.is_finite() && self.stddev_floor > 0.0) {
            return Err(Error::invariant("stddev_floor", "must be > 0"));
        }
        if !(self.extra_stddev.is_finite() && self.extra_stddev >= 0.0) {
            return Err(Error::invariant("extra_stddev", "must be finite and >= 0"));
        }
        if self.episodes < 1 {
            return Err(Error::invariant("episodes", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    /// Best return seen so far (non-decreasing).
    pub best: f64,
    pub elite_mean: f64,
    pub pop_mean: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn best(&self) -> Option<f64> {
        self.rows.last().map(|r| r.best)
    }

    /// `iter,best,elite_mean,pop_mean`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,best,elite_mean,pop_mean\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.iter, r.best, r.elite_mean, r.pop_mean);
        }
        out
    }
}

/// Trains a policy for `env` and returns the best candidate ever evaluated.
/// With zero iterations the initial (all-zero) mean policy is returned.
pub fn cem_train(env: &Env, config: &TrainConfig) -> Result<(Policy, TrainHistory)> {
    config.validate()?;
    let dof = env.dof();
    let dim = Policy::num_params(dof);
    let mut mean = vec![0.0; dim];
    let mut stddev = vec![config.initial_stddev; dim];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let n_elite = config.elite_count();
    let eval_seed = config.seed;

    let pool = match config.threads {
        1 => None,
        n => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        ),
    };

    for iter in 0..config.iterations {
        let population: Vec<Vec<f64>> = (0..config.population)
            .map(|_| {
                mean.iter()
                    .zip(&stddev)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + s * z
                    })
                    .collect()
            })
            .collect();

        let evaluate = |params: &Vec<f64>| -> Result<f64> {
            let policy = Policy::from_params(dof, params)?;
            evaluate_policy(&policy, env, config.episodes, eval_seed)
        };
        let returns: Vec<f64> = match &pool {
            None => population.iter().map(evaluate).collect::<Result<_>>()?,
            Some(pool) => {
                pool.install(|| population.par_iter().map(evaluate).collect::<Result<_>>())?
            }
        };

        let mut order: Vec<usize> = (0..config.population).collect();
        order.sort_by(|&a, &b| returns[b].total_cmp(&returns[a]).then(a.cmp(&b)));
        let elites = &order[..n_elite];

        let top = order[0];
        if best.as_ref().is_none_or(|(r, _)| returns[top] > *r) {
            best = Some((returns[top], population[top].clone()));
        }

        let extra = config.extra_stddev * (1.0 - iter as f64 / config.iterations as f64);
        for d in 0..dim {
            let m = elites.iter().map(|&e| population[e][d]).sum::<f64>() / n_elite as f64;
            let var = elites
                .iter()
                .map(|&e| (population[e][d] - m).powi(2))
                .sum::<f64>()
                / n_elite as f64;
            mean[d] = m;
            stddev[d] = (var + extra * extra).sqrt().max(config.stddev_floor);
        }

        history.rows.push(HistoryRow {
            iter,
            best: best.as_ref().map(|(r, _)| *r).expect("set above"),
            elite_mean: elites.iter().map(|&e| returns[e]).sum::<f64>() / n_elite as f64,
            pop_mean: returns.iter().sum::<f64>() / config.population as f64,
        });
    }

    let params = best.map(|(_, p)| p).unwrap_or(mean);
    Ok((Policy::from_params(dof, &params)?, history))
}
