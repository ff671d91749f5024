//! CSV and JSON-lines writers.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::io::sweep::SweepRow;
use crate::model::AllocationState;
use crate::orchestrator::ExperimentResult;

pub const SWEEP_HEADER: [&str; 12] = [
    "sweep",
    "value",
    "rounds",
    "train_loss",
    "test_loss",
    "test_accuracy",
    "t_local_max",
    "t_edge",
    "t_total",
    "e_total_mean",
    "e_total_max",
    "weighted_score",
];

pub const TRACE_HEADER: [&str; 9] = [
    "iteration",
    "train_loss",
    "test_loss",
    "t_local_max",
    "t_edge",
    "t_total",
    "e_total_max",
    "budget_violations",
    "weighted_score",
];

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    train_loss: f64,
    test_loss: f64,
    t_local_max: f64,
    t_edge: f64,
    t_total: f64,
    e_total_max: f64,
    budget_violations: usize,
    weighted_score: f64,
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of metrics per iteration.
pub fn write_trace_csv<W: Write>(result: &ExperimentResult, budgets: &[f64], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for rec in &result.trace {
        let m = &rec.metrics;
        w.serialize(TraceRow {
            iteration: rec.iteration,
            train_loss: m.train_loss,
            test_loss: m.test_loss,
            t_local_max: m.t_local.iter().copied().fold(0.0, f64::max),
            t_edge: m.t_edge,
            t_total: m.t_total,
            e_total_max: m.e_total.iter().copied().fold(0.0, f64::max),
            budget_violations: m.e_total.iter().zip(budgets).filter(|(e, b)| e > b).count(),
            weighted_score: m.weighted_score,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct AllocationLine<'a> {
    iteration: usize,
    allocation: &'a AllocationState,
}

/// One JSON object per iteration holding the allocation that round ran under.
pub fn write_allocation_jsonl<W: Write>(result: &ExperimentResult, mut out: W) -> Result<()> {
    for rec in &result.trace {
        serde_json::to_writer(
            &mut out,
            &AllocationLine {
                iteration: rec.iteration,
                allocation: &rec.allocation,
            },
        )?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
