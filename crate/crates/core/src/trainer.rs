//! Conjugate-gradient training and cross-validated choice of the hidden
//! layer size.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{self, NetTopology, NeuralNet, OutputActivation, ScaledBatch, Scaler};
use crate::parallel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub v_folds: usize,
    pub ratio_window: usize,
    pub max_iters: usize,
    pub pe_ratio_max: f64,
    pub h_min: usize,
    /// Upper bound on the hidden layer size tried during cross-validation.
    pub h_max: usize,
    pub cve_ratio_max: f64,
    pub max_exceed: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            v_folds: 10,
            ratio_window: 100,
            max_iters: 5000,
            pe_ratio_max: 0.999,
            h_min: 1,
            h_max: 30,
            cve_ratio_max: 0.99,
            max_exceed: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("v_folds", self.v_folds),
            ("ratio_window", self.ratio_window),
            ("max_iters", self.max_iters),
            ("h_min", self.h_min),
            ("max_exceed", self.max_exceed),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        for (name, v) in [
            ("pe_ratio_max", self.pe_ratio_max),
            ("cve_ratio_max", self.cve_ratio_max),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if 2 * self.ratio_window > self.max_iters {
            return Err(Error::Config(format!(
                "2 * ratio_window ({}) exceeds max_iters ({})",
                2 * self.ratio_window,
                self.max_iters
            )));
        }
        if self.h_max < self.h_min {
            return Err(Error::Config(format!("h_max {} < h_min {}", self.h_max, self.h_min)));
        }
        Ok(())
    }
}

/// Mean relative prediction error in percent, normalised by the training
/// target range.
pub fn mrp_error(outputs: &[f64], targets: &[f64], train_min: f64, train_max: f64) -> Result<f64> {
    if outputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} outputs but {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::Shape("MRP of an empty set".into()));
    }
    if !(train_max > train_min) {
        return Err(Error::DegenerateTarget(format!(
            "training range [{train_min}, {train_max}] is empty"
        )));
    }
    let sum: f64 = outputs.iter().zip(targets).map(|(o, t)| (o - t).abs()).sum();
    Ok(100.0 * sum / (outputs.len() as f64 * (train_max - train_min)))
}

/// MRP of a network on raw samples, using its output scaler range as the
/// training range.
pub fn net_mrp(net: &NeuralNet, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let batch = net.scale_batch(inputs, targets)?;
    Ok(batch_mrp(net, &batch))
}

fn batch_mrp(net: &NeuralNet, batch: &ScaledBatch) -> f64 {
    let (_, abs_sum) = mlp::loss_and_gradient(&net.topology, &net.weights, batch, None);
    scaled_mrp(abs_sum, batch)
}

fn scaled_mrp(abs_sum: f64, batch: &ScaledBatch) -> f64 {
    let span = mlp::OUTPUT_RANGE.1 - mlp::OUTPUT_RANGE.0;
    100.0 * abs_sum / ((batch.len() * batch.n_outputs) as f64 * span)
}

/// Ratio of the error sum over iterations `k-J..=k` to the sum over
/// `k-2J..=k-J-1`; `None` until `k >= 2J`.
pub fn pe_ratio(errors: &[f64], k: usize, window: usize) -> Option<f64> {
    if k < 2 * window || k >= errors.len() {
        return None;
    }
    let recent: f64 = errors[k - window..=k].iter().sum();
    let previous: f64 = errors[k - 2 * window..k - window].iter().sum();
    Some(if previous > 0.0 {
        recent / previous
    } else {
        f64::INFINITY
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    ErrorRatio,
    /// Gradient vanished or no descent step could be found.
    Stationary,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainTrace {
    /// Monitoring MRP after each iteration; entry 0 is the initial weights.
    pub errors: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub evaluations: usize,
    pub value: f64,
    pub stop: StopReason,
}

const LS_MAX_STEPS: usize = 20;
const LS_CURVATURE: f64 = 1e-2;
const ARMIJO: f64 = 1e-4;
const BACKTRACK_STEPS: usize = 40;
const GRAD_FLOOR: f64 = 1e-30;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Probe {
    x: Vec<f64>,
    g: Vec<f64>,
    value: f64,
    aux: f64,
}

/// Polak-Ribiere conjugate gradients with restarts.
///
/// `objective(x, grad)` returns `(value, aux)` and fills `grad`; `aux` is
/// passed through to `on_iter`, which is called with iteration 0 at the
/// start point and after every accepted step, and returns `true` to stop.
/// The line search runs secant steps on the directional derivative and
/// falls back to Armijo backtracking.
pub fn minimize_cg<F, C>(x: &mut Vec<f64>, mut objective: F, max_iters: usize, mut on_iter: C) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> (f64, f64),
    C: FnMut(usize, f64) -> Result<bool>,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let (mut value, aux) = objective(x, &mut g);
    let mut evaluations = 1;
    if !value.is_finite() || !aux.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let outcome = |iterations, evaluations, value, stop| CgOutcome {
        iterations,
        evaluations,
        value,
        stop,
    };
    if on_iter(0, aux)? {
        return Ok(outcome(0, evaluations, value, StopReason::ErrorRatio));
    }
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut steepest = true;
    let mut step = 1.0 / dot(&g, &g).sqrt().max(1e-12);
    let mut prev_slope = 0.0;
    let mut since_restart = 0;
    let mut trial = vec![0.0; n];
    let mut trial_g = vec![0.0; n];

    for k in 1..=max_iters {
        let gg = dot(&g, &g);
        if gg <= GRAD_FLOOR {
            return Ok(outcome(k - 1, evaluations, value, StopReason::Stationary));
        }
        let slope0 = dot(&g, &d);
        if k > 1 && slope0 < 0.0 && prev_slope < 0.0 {
            step *= prev_slope / slope0;
        }
        if !(step.is_finite() && step > 0.0) {
            step = 1.0 / gg.sqrt();
        }

        // Secant iterations on phi'(a) = g(x + a d) . d
        let mut found: Option<Probe> = None;
        let mut best: Option<Probe> = None;
        let (mut a_lo, mut s_lo) = (0.0, slope0);
        let mut a = step;
        for _ in 0..LS_MAX_STEPS {
            for i in 0..n {
                trial[i] = x[i] + a * d[i];
            }
            let (v, aux) = objective(&trial, &mut trial_g);
            evaluations += 1;
            if !v.is_finite() || !aux.is_finite() {
                a = 0.5 * (a_lo + a);
                continue;
            }
            let s = dot(&trial_g, &d);
            let probe = || Probe {
                x: trial.clone(),
                g: trial_g.clone(),
                value: v,
                aux,
            };
            if v <= value + ARMIJO * a * slope0 && s.abs() <= LS_CURVATURE * slope0.abs() {
                step = a;
                found = Some(probe());
                break;
            }
            if v < value && best.as_ref().is_none_or(|b| v < b.value) {
                best = Some(probe());
                step = a;
            }
            let denom = s - s_lo;
            let next = if denom > 0.0 {
                a - s * (a - a_lo) / denom
            } else {
                f64::NAN
            };
            let next = if next.is_finite() && next > 0.0 {
                next.min(10.0 * a.max(a_lo))
            } else if s < 0.0 {
                2.0 * a.max(a_lo)
            } else {
                0.5 * (a_lo + a)
            };
            a_lo = a;
            s_lo = s;
            a = next;
        }
        let found = found.or(best).or_else(|| {
            let mut a = step;
            for _ in 0..BACKTRACK_STEPS {
                a *= 0.5;
                for i in 0..n {
                    trial[i] = x[i] + a * d[i];
                }
                let (v, aux) = objective(&trial, &mut trial_g);
                evaluations += 1;
                if v.is_finite() && aux.is_finite() && v <= value + ARMIJO * a * slope0 {
                    step = a;
                    return Some(Probe {
                        x: trial.clone(),
                        g: trial_g.clone(),
                        value: v,
                        aux,
                    });
                }
            }
            None
        });
        let Some(probe) = found else {
            if steepest {
                return Ok(outcome(k - 1, evaluations, value, StopReason::Stationary));
            }
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            steepest = true;
            since_restart = 0;
            continue;
        };
        let (new_value, aux) = (probe.value, probe.aux);
        let g_new = probe.g;
        let beta = {
            let num: f64 = g_new.iter().zip(&g).map(|(a, b)| a * (a - b)).sum();
            (num / gg).max(0.0)
        };
        since_restart += 1;
        let restart = since_restart >= n;
        for i in 0..n {
            d[i] = -g_new[i] + if restart { 0.0 } else { beta * d[i] };
        }
        steepest = restart || beta == 0.0;
        if restart {
            since_restart = 0;
        }
        if dot(&g_new, &d) >= 0.0 {
            d.iter_mut().zip(&g_new).for_each(|(di, gi)| *di = -gi);
            steepest = true;
            since_restart = 0;
        }
        *x = probe.x;
        g = g_new;
        value = new_value;
        prev_slope = slope0;
        if on_iter(k, aux)? {
            return Ok(outcome(k, evaluations, value, StopReason::ErrorRatio));
        }
    }
    Ok(outcome(max_iters, evaluations, value, StopReason::MaxIterations))
}

/// Trains `net` on a scaled batch until the error-ratio rule fires or
/// `max_iters` is reached. The ratio is computed on the same batch.
pub fn train_weights(net: &NeuralNet, batch: &ScaledBatch, config: &TrainConfig) -> Result<(NeuralNet, TrainTrace)> {
    config.validate()?;
    if batch.is_empty() {
        return Err(Error::Shape("empty training batch".into()));
    }
    if batch.n_inputs != net.topology.n_inputs || batch.n_outputs != net.topology.n_outputs {
        return Err(Error::Shape("batch does not match network topology".into()));
    }
    let topo = net.topology;
    let mut weights = net.weights.clone();
    let mut errors = Vec::with_capacity(config.max_iters + 1);
    let window = config.ratio_window;
    let limit = config.pe_ratio_max;
    let outcome = minimize_cg(
        &mut weights,
        |w, grad| mlp::loss_and_gradient(&topo, w, batch, Some(grad)),
        config.max_iters,
        |k, abs_sum| {
            errors.push(scaled_mrp(abs_sum, batch));
            Ok(pe_ratio(&errors, k, window).is_some_and(|r| r > limit))
        },
    )?;
    let mut trained = net.clone();
    trained.weights = weights;
    Ok((
        trained,
        TrainTrace {
            errors,
            iterations: outcome.iterations,
            stop: outcome.stop,
            evaluations: outcome.evaluations,
        },
    ))
}

/// Shuffled partition of `0..n` into `v` folds whose sizes differ by at
/// most one.
pub fn fold_partition(n: usize, v: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if v == 0 || n < v {
        return Err(Error::Config(format!(
            "cross-validation needs at least {v} samples, got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..v).map(|i| idx[i * n / v..(i + 1) * n / v].to_vec()).collect())
}

#[derive(Debug, Clone)]
pub struct FoldOutcome<N> {
    pub net: N,
    pub train_mrp: f64,
    pub held_mrp: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub h: usize,
    pub cv_error: f64,
    /// Ratio to the previous hidden size's error; absent for the first.
    pub ratio: Option<f64>,
    pub held_mrp: Vec<f64>,
    pub train_mrp: Vec<f64>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome<N> {
    pub entries: Vec<CvEntry>,
    pub chosen_h: usize,
    pub final_fold: usize,
    pub final_net: N,
    /// Fold networks for every evaluated hidden size, in entry order.
    pub fold_nets: Vec<Vec<N>>,
}

/// Hidden-size search with a caller-supplied fold trainer
/// `train_fold(h, fold, train_rows, held_rows)`.
pub fn cross_validate_with<N, F>(n: usize, config: &TrainConfig, train_fold: F) -> Result<CvOutcome<N>>
where
    N: Send + Clone,
    F: Fn(usize, usize, &[usize], &[usize]) -> Result<FoldOutcome<N>> + Sync,
{
    config.validate()?;
    let folds = fold_partition(n, config.v_folds, parallel::derive_seed(config.seed, 0))?;
    let train_rows: Vec<Vec<usize>> = (0..folds.len())
        .map(|i| {
            folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, f)| f.iter().copied())
                .collect()
        })
        .collect();

    let mut entries: Vec<CvEntry> = Vec::new();
    let mut fold_nets = Vec::new();
    let mut exceeded = 0;
    for h in config.h_min..=config.h_max {
        let results = parallel::try_map_range(folds.len(), |i| train_fold(h, i, &train_rows[i], &folds[i]))?;
        let cv_error = results.iter().map(|r| r.held_mrp).sum::<f64>() / results.len() as f64;
        let ratio = entries.last().map(|prev| {
            if prev.cv_error > 0.0 {
                cv_error / prev.cv_error
            } else {
                f64::INFINITY
            }
        });
        entries.push(CvEntry {
            h,
            cv_error,
            ratio,
            held_mrp: results.iter().map(|r| r.held_mrp).collect(),
            train_mrp: results.iter().map(|r| r.train_mrp).collect(),
            iterations: results.iter().map(|r| r.iterations).collect(),
        });
        fold_nets.push(results.into_iter().map(|r| r.net).collect::<Vec<_>>());
        if ratio.is_some_and(|r| !(r <= config.cve_ratio_max)) {
            exceeded += 1;
            if exceeded >= config.max_exceed {
                break;
            }
        }
    }
    let mut best = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.cv_error < entries[best].cv_error {
            best = i;
        }
    }
    let entry = &entries[best];
    let mut final_fold = 0;
    for (i, &m) in entry.train_mrp.iter().enumerate() {
        if m < entry.train_mrp[final_fold] {
            final_fold = i;
        }
    }
    Ok(CvOutcome {
        chosen_h: entry.h,
        final_fold,
        final_net: fold_nets[best][final_fold].clone(),
        entries,
        fold_nets,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub chosen_h: usize,
    pub cv_errors: Vec<CvEntry>,
    pub final_fold: usize,
    pub train_mrp: f64,
    pub test_mrp: Option<f64>,
    pub final_net: NeuralNet,
    #[serde(skip)]
    pub fold_nets: Vec<Vec<NeuralNet>>,
}

/// Cross-validated training of a single-hidden-layer network on raw samples.
/// Scalers are fitted on the whole training set.
pub fn cross_validate(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    config: &TrainConfig,
    output: OutputActivation,
) -> Result<TrainReport> {
    config.validate()?;
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if inputs.len() < config.v_folds {
        return Err(Error::Config(format!(
            "cross-validation needs at least {} samples, got {}",
            config.v_folds,
            inputs.len()
        )));
    }
    let in_scaler = Scaler::fit(inputs, mlp::INPUT_RANGE)?;
    let out_scaler = Scaler::fit(targets, mlp::OUTPUT_RANGE)?;
    let n_in = in_scaler.dim();
    let n_out = out_scaler.dim();
    let template = NeuralNet::random(
        NetTopology::new(n_in, 1, n_out)?.with_output(output),
        in_scaler.clone(),
        out_scaler.clone(),
        0,
    )?;
    let full = template.scale_batch(inputs, targets)?;

    let outcome = cross_validate_with(inputs.len(), config, |h, fold, train_rows, held_rows| {
        let topo = NetTopology::new(n_in, h, n_out)?.with_output(output);
        let seed = parallel::derive_seed(parallel::derive_seed(config.seed, 1 + h as u64), fold as u64);
        let init = NeuralNet::random(topo, in_scaler.clone(), out_scaler.clone(), seed)?;
        let train = full.select(train_rows);
        let held = full.select(held_rows);
        let (net, trace) = train_weights(&init, &train, config)?;
        Ok(FoldOutcome {
            train_mrp: batch_mrp(&net, &train),
            held_mrp: batch_mrp(&net, &held),
            iterations: trace.iterations,
            net,
        })
    })?;
    Ok(TrainReport {
        chosen_h: outcome.chosen_h,
        final_fold: outcome.final_fold,
        train_mrp: batch_mrp(&outcome.final_net, &full),
        test_mrp: None,
        final_net: outcome.final_net,
        cv_errors: outcome.entries,
        fold_nets: outcome.fold_nets,
    })
}
