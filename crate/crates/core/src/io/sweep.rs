//! Fixed-decision sweeps over the offload fraction or the CPU share.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fl;
use crate::io::config::{ExperimentSpec, Scenario};
use crate::io::synth::synthesize_users;
use crate::orchestrator::{self, BandwidthPolicy, DecisionPolicy, ExperimentResult, Population, RunOptions};
use crate::model::SystemConfig;

/// One sweep point, summarised at its last round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep: String,
    pub value: f64,
    pub rounds: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub t_local_max: f64,
    pub t_edge: f64,
    pub t_total: f64,
    pub e_total_mean: f64,
    pub e_total_max: f64,
    pub weighted_score: f64,
}

impl SweepRow {
    pub fn from_result(sweep: &str, value: f64, r: &ExperimentResult, pop: &Population) -> Result<Self> {
        let m = &r.last().metrics;
        let n = m.e_total.len() as f64;
        Ok(Self {
            sweep: sweep.to_string(),
            value,
            rounds: r.iterations_used,
            train_loss: m.train_loss,
            test_loss: m.test_loss,
            test_accuracy: fl::accuracy(&r.final_model.global_weights, &pop.test_set)?,
            t_local_max: m.t_local.iter().copied().fold(0.0, f64::max),
            t_edge: m.t_edge,
            t_total: m.t_total,
            e_total_mean: m.e_total.iter().sum::<f64>() / n,
            e_total_max: m.e_total.iter().copied().fold(0.0, f64::max),
            weighted_score: m.weighted_score,
        })
    }
}

/// Offload fractions `0, 0.1, …, 1`.
pub fn offload_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// CPU shares `0.1, 0.2, …, 1`.
pub fn gamma_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// Options for one sweep point: decisions pinned, equal bandwidth, no early stop.
pub fn point_options(scenario: Scenario, value: f64, fixed_delta: f64, rounds: usize) -> Result<RunOptions> {
    let (delta, gamma) = match scenario {
        Scenario::SweepOffload => (DecisionPolicy::Fixed(value), DecisionPolicy::BestResponse),
        Scenario::SweepGamma => (DecisionPolicy::Fixed(fixed_delta), DecisionPolicy::Fixed(value)),
        other => return Err(Error::validation("scenario", format!("{other} is not a sweep"))),
    };
    Ok(RunOptions {
        max_iterations: rounds,
        delta,
        gamma,
        bandwidth: BandwidthPolicy::Uniform,
        stop_on_convergence: false,
    })
}

/// Runs every point of a sweep on an existing population.
///
/// Points run in parallel; rows come back in grid order.
pub fn sweep_population(
    pop: &Population,
    cfg: &SystemConfig,
    scenario: Scenario,
    values: &[f64],
    fixed_delta: f64,
    rounds: usize,
) -> Result<Vec<SweepRow>> {
    values
        .par_iter()
        .map(|&v| {
            let opts = point_options(scenario, v, fixed_delta, rounds)?;
            let r = orchestrator::run(pop, cfg, &opts)?;
            SweepRow::from_result(&scenario.to_string(), v, &r, pop)
        })
        .collect()
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    let values = match spec.scenario {
        Scenario::SweepOffload => offload_grid(),
        Scenario::SweepGamma => gamma_grid(),
        other => return Err(Error::validation("scenario", format!("{other} is not a sweep"))),
    };
    let pop = synthesize_users(spec)?.population;
    sweep_population(&pop, &spec.system_config(), spec.scenario, &values, spec.sweep.fixed_delta, spec.sweep.rounds)
}
