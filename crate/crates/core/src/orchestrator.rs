//! The alternating training / resource-allocation loop and its baselines.
//!
//! One iteration:
//!
//! 1. every user, in id order, picks its CPU share and then its offload
//!    fraction against the bandwidth of the previous iteration;
//! 2. datasets are split, users train locally from the current global model
//!    and the round time and energy are evaluated;
//! 3. the edge updates the multipliers and the bandwidth shares, trains on
//!    the pooled offloaded data and aggregates.
//!
//! The first iteration uses random offload fractions and CPU shares with
//! equal bandwidth. The offload of iteration `k` therefore always runs on
//! the bandwidth computed in iteration `k − 1`.

use rand::Rng;
use rayon::prelude::*;

use crate::cost;
use crate::error::{Error, Result, Simplex};
use crate::fl::{self, Dataset, TrainParams};
use crate::model::{AllocationState, ModelState, RoundMetrics, SystemConfig, UserProfile};
use crate::optimizer;
use crate::rng::{self, tag};

/// Users, their training shards and the held-out test set.
#[derive(Debug, Clone)]
pub struct Population {
    pub users: Vec<UserProfile>,
    pub datasets: Vec<Dataset>,
    pub test_set: Dataset,
}

impl Population {
    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::validation("users", "need at least one user"));
        }
        if self.users.len() != self.datasets.len() {
            return Err(Error::LengthMismatch {
                expected: self.users.len(),
                found: self.datasets.len(),
            });
        }
        let shape = (self.test_set.n_features(), self.test_set.n_classes());
        for (u, d) in self.users.iter().zip(&self.datasets) {
            u.validate()?;
            if u.dataset_size != d.len() {
                return Err(Error::validation(
                    "dataset_size",
                    format!("user {} declares {} samples but holds {}", u.id, u.dataset_size, d.len()),
                ));
            }
            if (d.n_features(), d.n_classes()) != shape {
                return Err(Error::validation("dataset", format!("user {} shard has a different shape", u.id)));
            }
        }
        if self.test_set.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(())
    }

    pub fn weight_dim(&self) -> usize {
        self.test_set.weight_dim()
    }
}

/// How a per-user decision is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionPolicy {
    BestResponse,
    /// Pinned to the same value for every user and iteration.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthPolicy {
    BestResponse,
    /// Equal shares `1/I` in both simplices throughout.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub max_iterations: usize,
    pub delta: DecisionPolicy,
    pub gamma: DecisionPolicy,
    pub bandwidth: BandwidthPolicy,
    /// Stop as soon as both loss and round time settle.
    pub stop_on_convergence: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            delta: DecisionPolicy::BestResponse,
            gamma: DecisionPolicy::BestResponse,
            bandwidth: BandwidthPolicy::BestResponse,
            stop_on_convergence: true,
        }
    }
}

/// One entry of the trace: the allocation the round ran under and what it cost.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub allocation: AllocationState,
    pub metrics: RoundMetrics,
    /// Users whose radio energy alone exceeded the budget this round.
    pub budget_exhausted: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub trace: Vec<IterationRecord>,
    /// State after the last edge update.
    pub final_allocation: AllocationState,
    pub final_model: ModelState,
    pub converged: bool,
    pub iterations_used: usize,
}

impl ExperimentResult {
    pub fn last(&self) -> &IterationRecord {
        self.trace.last().expect("trace holds at least one iteration")
    }
}

/// Best-response run of the full scheme.
pub fn run_proposed(pop: &Population, cfg: &SystemConfig, max_iterations: usize) -> Result<ExperimentResult> {
    run(
        pop,
        cfg,
        &RunOptions {
            max_iterations,
            ..RunOptions::default()
        },
    )
}

/// Plain federated learning: nothing is offloaded.
pub fn run_traditional(pop: &Population, cfg: &SystemConfig, rounds: usize) -> Result<ExperimentResult> {
    run(
        pop,
        cfg,
        &RunOptions {
            max_iterations: rounds,
            delta: DecisionPolicy::Fixed(0.0),
            ..RunOptions::default()
        },
    )
}

/// Everything is offloaded and trained at the edge.
pub fn run_centralized(pop: &Population, cfg: &SystemConfig, max_iterations: usize) -> Result<ExperimentResult> {
    run(
        pop,
        cfg,
        &RunOptions {
            max_iterations,
            delta: DecisionPolicy::Fixed(1.0),
            ..RunOptions::default()
        },
    )
}

fn check_fixed(name: &str, p: DecisionPolicy) -> Result<()> {
    match p {
        DecisionPolicy::Fixed(v) if !(0.0..=1.0).contains(&v) => {
            Err(Error::validation(name, format!("fixed value {v} outside [0, 1]")))
        }
        _ => Ok(()),
    }
}

pub fn run(pop: &Population, cfg: &SystemConfig, opts: &RunOptions) -> Result<ExperimentResult> {
    cfg.validate()?;
    pop.validate()?;
    if opts.max_iterations == 0 {
        return Err(Error::validation("max_iterations", "must be >= 1"));
    }
    check_fixed("delta", opts.delta)?;
    check_fixed("gamma", opts.gamma)?;

    let n = pop.users.len();
    let dim = pop.weight_dim();
    let full_train = Dataset::concat(&pop.datasets, pop.test_set.n_features(), pop.test_set.n_classes())?;
    let params = TrainParams {
        epochs: cfg.local_epochs,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
    };

    let mut init = rng::stream(cfg.rng_seed, &[tag::INIT]);
    let mut delta = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    for _ in 0..n {
        // both draws always happen so pinning one policy leaves the other's stream intact
        let d: f64 = init.random();
        let g: f64 = init.random();
        delta.push(match opts.delta {
            DecisionPolicy::Fixed(v) => v,
            DecisionPolicy::BestResponse => d,
        });
        gamma.push(match opts.gamma {
            DecisionPolicy::Fixed(v) => v,
            DecisionPolicy::BestResponse => g,
        });
    }
    let share = 1.0 / n as f64;
    let mut alloc = AllocationState::new(delta, gamma, vec![share; n], vec![share; n], vec![0.5; n], vec![0.5; n])?;

    let mut model = ModelState::zeros(dim, pop.users.iter().map(|u| u.dataset_size).collect());
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut converged = false;

    for k in 1..=opts.max_iterations {
        let step = (|| -> Result<()> {
            let mut exhausted = vec![false; n];
            if k > 1 {
                alloc = user_sweep(pop, cfg, opts, &alloc, dim, &mut exhausted)?;
            }
            model = train_round(pop, cfg, params, &alloc, &model, k)?;
            let metrics = round_metrics(pop, cfg, &alloc, dim, &model, &full_train)?;
            let record = IterationRecord {
                iteration: k,
                allocation: alloc.clone(),
                metrics,
                budget_exhausted: exhausted,
            };
            alloc = edge_update(pop, cfg, opts, &alloc, &record.metrics, dim)?;
            trace.push(record);
            Ok(())
        })();
        step.map_err(|e| e.at_iteration(k))?;

        if let [.., prev, cur] = trace.as_slice() {
            let dl = (cur.metrics.test_loss - prev.metrics.test_loss).abs();
            let dt = (cur.metrics.t_total - prev.metrics.t_total).abs();
            if dl <= cfg.convergence_tol && dt <= cfg.convergence_tol {
                converged = true;
                if opts.stop_on_convergence {
                    break;
                }
            } else {
                converged = false;
            }
        }
    }

    let iterations_used = trace.len();
    Ok(ExperimentResult {
        trace,
        final_allocation: alloc,
        final_model: model,
        converged,
        iterations_used,
    })
}

/// Gauss–Seidel pass over the users: CPU share first, then offload fraction,
/// each user seeing the fractions already updated this sweep.
fn user_sweep(
    pop: &Population,
    cfg: &SystemConfig,
    opts: &RunOptions,
    prev: &AllocationState,
    dim: usize,
    exhausted: &mut [bool],
) -> Result<AllocationState> {
    let mut cur = prev.clone();
    for (i, u) in pop.users.iter().enumerate() {
        let mut delta = cur.delta().to_vec();
        let mut gamma = cur.gamma().to_vec();
        match opts.gamma {
            DecisionPolicy::Fixed(v) => gamma[i] = v,
            DecisionPolicy::BestResponse => {
                let s = optimizer::solve_gamma(u, &cur.user(i), dim, cfg)?;
                gamma[i] = s.gamma;
                exhausted[i] = s.budget_exhausted;
            }
        }
        cur = cur.with_user_decisions(delta.clone(), gamma.clone())?;
        match opts.delta {
            DecisionPolicy::Fixed(v) => delta[i] = v,
            DecisionPolicy::BestResponse => delta[i] = optimizer::solve_delta(i, &pop.users, &cur, dim, cfg)?,
        }
        cur = cur.with_user_decisions(delta, gamma)?;
    }
    Ok(cur)
}

/// Split, train locally and at the edge, aggregate.
fn train_round(
    pop: &Population,
    cfg: &SystemConfig,
    params: TrainParams,
    alloc: &AllocationState,
    prev: &ModelState,
    k: usize,
) -> Result<ModelState> {
    let k = k as u64;
    let global = &prev.global_weights;
    let results: Vec<Result<(Vec<f64>, usize, Dataset)>> = pop
        .datasets
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let i = i as u64;
            let split = fl::split_dataset(d, alloc.delta()[i as usize], rng::derive_seed(cfg.rng_seed, &[tag::SPLIT, k, i]))?;
            let local_n = split.local_part.len();
            let w = if local_n == 0 {
                global.clone()
            } else {
                fl::train(global, &split.local_part, params, rng::derive_seed(cfg.rng_seed, &[tag::LOCAL_TRAIN, k, i]))?
            };
            Ok((w, local_n, split.offload_part))
        })
        .collect();

    let mut local_weights = Vec::with_capacity(results.len());
    let mut local_sizes = Vec::with_capacity(results.len());
    let mut offloaded = Vec::with_capacity(results.len());
    for r in results {
        let (w, m, off) = r?;
        local_weights.push(w);
        local_sizes.push(m);
        offloaded.push(off);
    }
    let pooled = Dataset::concat(&offloaded, pop.test_set.n_features(), pop.test_set.n_classes())?;
    let edge_weights = if pooled.is_empty() {
        global.clone()
    } else {
        fl::train(global, &pooled, params, rng::derive_seed(cfg.rng_seed, &[tag::EDGE_TRAIN, k]))?
    };
    let mut next = ModelState {
        local_weights,
        edge_weights,
        global_weights: Vec::new(),
        dim: prev.dim,
        local_trainset_sizes: local_sizes,
        edge_trainset_size: pooled.len(),
        dataset_sizes: prev.dataset_sizes.clone(),
    };
    next.global_weights = vec![0.0; prev.dim];
    next.global_weights = fl::aggregate(&next)?;
    Ok(next)
}

fn round_metrics(
    pop: &Population,
    cfg: &SystemConfig,
    alloc: &AllocationState,
    dim: usize,
    model: &ModelState,
    full_train: &Dataset,
) -> Result<RoundMetrics> {
    let mut t_local = Vec::with_capacity(pop.users.len());
    let mut e_total = Vec::with_capacity(pop.users.len());
    for (i, u) in pop.users.iter().enumerate() {
        let a = alloc.user(i);
        t_local.push(cost::local_time(u, &a, dim, cfg)?);
        e_total.push(cost::total_energy(u, &a, dim, cfg)?);
    }
    let t_edge = cost::edge_time_total(&pop.users, alloc, cfg)?;
    let t_total = t_local.iter().copied().fold(t_edge, f64::max);
    let test_loss = fl::evaluate_loss(&model.global_weights, &pop.test_set)?;
    let train_loss = fl::evaluate_loss(&model.global_weights, full_train)?;
    Ok(RoundMetrics {
        t_local,
        t_edge,
        t_total,
        e_total,
        weighted_score: cfg.loss_weight * test_loss + cfg.time_weight * t_total,
        train_loss,
        test_loss,
    })
}

/// Multiplier step followed by the bandwidth best response.
fn edge_update(
    pop: &Population,
    cfg: &SystemConfig,
    opts: &RunOptions,
    alloc: &AllocationState,
    metrics: &RoundMetrics,
    dim: usize,
) -> Result<AllocationState> {
    let n = pop.users.len();
    let mut lt = Vec::with_capacity(n);
    let mut lb = Vec::with_capacity(n);
    for (i, u) in pop.users.iter().enumerate() {
        let (a, b) = optimizer::update_multipliers(metrics.e_total[i], u.energy_budget, alloc.lambda_offload()[i], cfg);
        lt.push(a);
        lb.push(b);
    }
    let with_lambda = alloc.with_edge_decisions(alloc.uplink_offload().to_vec(), alloc.uplink_weight().to_vec(), lt.clone(), lb.clone())?;
    let (off, up) = match opts.bandwidth {
        BandwidthPolicy::Uniform => (alloc.uplink_offload().to_vec(), alloc.uplink_weight().to_vec()),
        BandwidthPolicy::BestResponse => match optimizer::solve_uplink(&pop.users, &with_lambda, dim, cfg) {
            Ok(v) => v,
            // nobody offloads: the offload band is idle
            Err(Error::AllZeroWeights(Simplex::Offload)) => {
                let (_, up) = upload_only(pop, &with_lambda, dim, cfg)?;
                (vec![0.0; n], up)
            }
            Err(e) => return Err(e),
        },
    };
    with_lambda.with_edge_decisions(off, up, lt, lb)
}

/// Upload shares when every offload fraction is zero.
fn upload_only(
    pop: &Population,
    alloc: &AllocationState,
    dim: usize,
    cfg: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    // Any positive offload fraction gives the same upload shares.
    let probe = alloc.with_user_decisions(vec![1.0; alloc.len()], alloc.gamma().to_vec())?;
    optimizer::solve_uplink(&pop.users, &probe, dim, cfg)
}
