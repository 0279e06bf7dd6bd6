//! Bounded evolutionary minimiser and the calibration searches built on it.
//!
//! Operators: a population of `pool_rate * dim` points; each slot's parent
//! spawns one offspring, the parent plus `U(0, cross_limit)` times the
//! difference of two other distinct parents; with probability
//! `radioactivity` one coordinate is then replaced by a uniform draw from its
//! interval. Coordinates leaving the box are clipped. An offspring replaces
//! its own parent when it is no worse, which keeps the population diverse
//! where global truncation collapses it onto one basin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydration::{simulate, StandardizedParams, ThermalConditions, TimeGrid};
use crate::parallel;
use crate::strategies::{ErrorFunction, OutputSpec, SurrogateBank};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub pool_rate: usize,
    pub radioactivity: f64,
    pub cross_limit: f64,
    pub budget: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            pool_rate: 4,
            radioactivity: 0.33,
            cross_limit: 0.1,
            budget: 10_000,
            seed: 0,
            bounds: vec![(0.0, 1.0); 4],
        }
    }
}

impl OptimizerConfig {
    pub fn pool_size(&self) -> usize {
        self.pool_rate * self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::Config("optimizer needs at least one dimension".into()));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "bounds[{j}] = [{lo}, {hi}] is not a finite interval"
                )));
            }
        }
        if self.pool_size() < 3 {
            return Err(Error::Config(format!(
                "pool of {} points is too small; need at least 3",
                self.pool_size()
            )));
        }
        if self.budget < self.pool_size() {
            return Err(Error::Config(format!(
                "budget {} is below the pool size {}",
                self.budget,
                self.pool_size()
            )));
        }
        if !(0.0..=1.0).contains(&self.radioactivity) {
            return Err(Error::Config(format!(
                "radioactivity {} outside [0, 1]",
                self.radioactivity
            )));
        }
        if !(self.cross_limit > 0.0) {
            return Err(Error::Config(format!(
                "cross_limit {} must be positive",
                self.cross_limit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value after each evaluation.
    pub trace: Vec<f64>,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `objective` over the configured box. Non-finite objective
/// values count as `+inf`.
pub fn minimize<F>(objective: F, config: &OptimizerConfig) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = config.bounds.len();
    let pool = config.pool_size();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let uniform = |rng: &mut ChaCha8Rng, j: usize| {
        let (lo, hi) = config.bounds[j];
        rng.gen_range(lo..=hi)
    };

    let mut trace = Vec::with_capacity(config.budget);
    let mut best = (Vec::new(), f64::INFINITY);
    let mut record = |points: &[Vec<f64>], values: &[f64], trace: &mut Vec<f64>| {
        for (p, &v) in points.iter().zip(values) {
            if v < best.1 || best.0.is_empty() {
                best = (p.clone(), v);
            }
            trace.push(best.1);
        }
    };

    let mut population: Vec<Vec<f64>> = (0..pool)
        .map(|_| (0..dim).map(|j| uniform(&mut rng, j)).collect())
        .collect();
    let mut values: Vec<f64> = parallel::map(&population, |p| sanitize(objective(p)));
    record(&population, &values, &mut trace);

    while trace.len() < config.budget {
        let n_off = pool.min(config.budget - trace.len());
        // Offspring i descends from slot i and competes only with it.
        let offspring: Vec<Vec<f64>> = (0..n_off)
            .map(|a| {
                let b = loop {
                    let b = rng.gen_range(0..pool);
                    if b != a {
                        break b;
                    }
                };
                let c = loop {
                    let c = rng.gen_range(0..pool);
                    if c != a && c != b {
                        break c;
                    }
                };
                let r = rng.gen_range(0.0..=config.cross_limit);
                let mut child: Vec<f64> = (0..dim)
                    .map(|j| population[a][j] + r * (population[b][j] - population[c][j]))
                    .collect();
                if rng.gen::<f64>() < config.radioactivity {
                    let j = rng.gen_range(0..dim);
                    child[j] = uniform(&mut rng, j);
                }
                for (x, &(lo, hi)) in child.iter_mut().zip(&config.bounds) {
                    *x = x.clamp(lo, hi);
                }
                child
            })
            .collect();
        let off_values: Vec<f64> = parallel::map(&offspring, |p| sanitize(objective(p)));
        record(&offspring, &off_values, &mut trace);

        // Ties favour the offspring so flat regions are still explored.
        for (i, (child, v)) in offspring.into_iter().zip(off_values).enumerate() {
            if v <= values[i] {
                population[i] = child;
                values[i] = v;
            }
        }
    }
    let evaluations = trace.len();
    Ok(OptimizeResult {
        best: best.0,
        value: best.1,
        evaluations,
        trace,
    })
}

/// Squared distance between observed and bank-predicted components.
pub fn response_distance(bank: &SurrogateBank, observed: &[f64], p: &[f64]) -> Result<f64> {
    let ks = bank
        .strategy
        .forward_components()
        .ok_or_else(|| Error::Config(format!("{} is not a forward strategy", bank.id())))?;
    let pred = bank.predict_components(p)?;
    let mut delta = 0.0;
    for (&k, y) in ks.iter().zip(&pred) {
        let o = observed
            .get(k - 1)
            .ok_or_else(|| Error::Shape(format!("observed curve has no component {k}")))?;
        delta += (o - y) * (o - y);
    }
    Ok(delta)
}

/// Identifies standardized parameters with a forward or error bank:
/// minimises the response distance, or the predicted error value.
/// `observed` is the full-grid curve.
pub fn fit_surrogate_response(
    bank: &SurrogateBank,
    observed: &[f64],
    config: &OptimizerConfig,
) -> Result<(StandardizedParams, OptimizeResult)> {
    let result = match bank.strategy.output_spec {
        OutputSpec::Components(_) | OutputSpec::ComponentOverTime(_) => {
            let n_time = observed.len();
            if let Some(&k) = bank
                .strategy
                .forward_components()
                .and_then(|ks| ks.iter().find(|&&k| k > n_time))
            {
                return Err(Error::Shape(format!("observed curve has no component {k}")));
            }
            minimize(
                |p| response_distance(bank, observed, p).unwrap_or(f64::INFINITY),
                config,
            )?
        }
        OutputSpec::ErrorFunction(_) => minimize(|p| bank.predict_error(p).unwrap_or(f64::INFINITY), config)?,
        OutputSpec::Params => {
            return Err(Error::Config(format!(
                "{} is an inverse strategy; evaluate it directly",
                bank.id()
            )))
        }
    };
    Ok((StandardizedParams::from_slice(&result.best)?, result))
}

/// Calibration with the simulator in the loop.
pub fn direct_calibrate(
    observed: &[f64],
    error: ErrorFunction,
    grid: &TimeGrid,
    cond: &ThermalConditions,
    config: &OptimizerConfig,
) -> Result<(StandardizedParams, OptimizeResult)> {
    if observed.len() != grid.len() {
        return Err(Error::Shape(format!(
            "observed curve has {} values, grid has {}",
            observed.len(),
            grid.len()
        )));
    }
    let result = minimize(
        |p| {
            let Ok(sp) = StandardizedParams::from_slice(p) else {
                return f64::INFINITY;
            };
            match simulate(&sp, grid, cond) {
                Ok(curve) => error.eval(&curve.alpha, observed).unwrap_or(f64::INFINITY),
                Err(_) => f64::INFINITY,
            }
        },
        config,
    )?;
    Ok((StandardizedParams::from_slice(&result.best)?, result))
}
