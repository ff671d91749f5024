use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mecfl::io::{self as mio, ExperimentSpec, Scenario};
use mecfl::orchestrator::{self, ExperimentResult};
use mecfl::verify;

#[derive(Parser)]
#[command(name = "mecfl", version, about = "Federated learning over an edge network with data offloading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write a per-iteration metrics CSV.
    Run(Common),
    /// Run an offload or cpu-share sweep and write one CSV row per point.
    Sweep(Common),
    /// Run the oracle cross-checks.
    Verify {
        #[arg(long, env = "MECFL_SEED", default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "MECFL_SEED")]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl Common {
    fn spec(&self) -> mecfl::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(p) => ExperimentSpec::load(p)?,
            None => ExperimentSpec::default(),
        };
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(s) = self.scenario {
            spec.scenario = s;
        }
        if let Some(u) = self.users {
            spec.user_count = u;
        }
        if let Some(m) = self.max_iter {
            spec.max_iterations = m;
        }
        if let Some(o) = &self.out {
            spec.output = Some(o.clone());
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run_scenario(spec: &ExperimentSpec) -> mecfl::Result<()> {
    if spec.scenario.is_sweep() {
        return Err(mecfl::Error::Config(format!("{} is a sweep; use the sweep subcommand", spec.scenario)));
    }
    let pop = mio::synthesize_users(spec)?.population;
    let cfg = spec.system_config();
    let result: ExperimentResult = match spec.scenario {
        Scenario::Proposed => orchestrator::run_proposed(&pop, &cfg, spec.max_iterations)?,
        Scenario::Traditional => orchestrator::run_traditional(&pop, &cfg, spec.max_iterations)?,
        _ => orchestrator::run_centralized(&pop, &cfg, spec.max_iterations)?,
    };
    let budgets: Vec<f64> = pop.users.iter().map(|u| u.energy_budget).collect();
    mio::write_trace_csv(&result, &budgets, sink(spec.output.as_deref())?)?;
    if let Some(out) = &spec.output {
        let jsonl = out.with_extension("jsonl");
        mio::write_allocation_jsonl(&result, BufWriter::new(File::create(&jsonl)?))?;
        eprintln!("allocation trace written to {}", jsonl.display());
    }
    let last = result.last();
    eprintln!(
        "{}: {} iterations, converged = {}, test loss {:.5}, round time {:.6} s",
        spec.scenario, result.iterations_used, result.converged, last.metrics.test_loss, last.metrics.t_total
    );
    Ok(())
}

fn run_sweep(spec: &ExperimentSpec) -> mecfl::Result<()> {
    let rows = mio::run_sweep(spec)?;
    mio::write_sweep_csv(&rows, sink(spec.output.as_deref())?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(c) => c.spec().and_then(|s| run_scenario(&s)).map(|()| true),
        Command::Sweep(c) => c.spec().and_then(|mut s| {
            if !s.scenario.is_sweep() {
                s.scenario = Scenario::SweepOffload;
            }
            run_sweep(&s)
        })
        .map(|()| true),
        Command::Verify { seed } => verify::full_suite(seed).map(|checks| {
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{c}");
            }
            if failed > 0 {
                eprintln!("{failed} check(s) failed");
                return false;
            }
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
