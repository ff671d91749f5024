use mecfl::io::{self, ExperimentSpec, PopulationSpec};
use mecfl::model::{validate_allocation, SystemConfig};
use mecfl::orchestrator::{self, BandwidthPolicy, DecisionPolicy, Population, RunOptions};

fn desk(seed: u64, population: PopulationSpec) -> (Population, SystemConfig) {
    let spec = ExperimentSpec {
        seed,
        population,
        ..ExperimentSpec::default()
    };
    (io::synthesize_users(&spec).unwrap().population, spec.system_config())
}

#[test]
fn tight_budgets_drive_multipliers() {
    let pop_spec = PopulationSpec {
        energy_budget_range: [0.005, 0.02],
        ..PopulationSpec::default()
    };
    let (pop, cfg) = desk(3, pop_spec);
    let r = orchestrator::run(
        &pop,
        &cfg,
        &RunOptions {
            max_iterations: 15,
            stop_on_convergence: false,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let mut raised = 0;
    for pair in r.trace.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        for (i, u) in pop.users.iter().enumerate() {
            let before = prev.allocation.lambda_offload()[i];
            let over = prev.metrics.e_total[i] > u.energy_budget + 1e-9;
            let want = if over { before + cfg.multiplier_increment } else { before }.clamp(cfg.lambda_min, 1.0 - cfg.lambda_min);
            assert_eq!(next.allocation.lambda_offload()[i], want);
            assert_eq!(next.allocation.lambda_local()[i], 1.0 - want);
            raised += usize::from(over);
        }
    }
    assert!(raised > 0, "no user ever exceeded its budget");
    for rec in &r.trace {
        validate_allocation(rec.allocation.clone(), pop.users.len()).unwrap();
    }
}

#[test]
fn converged_runs_respect_energy_budgets() {
    for seed in [0, 1, 2] {
        let (pop, cfg) = desk(seed, PopulationSpec::default());
        let r = orchestrator::run_proposed(&pop, &cfg, 100).unwrap();
        assert!(r.converged, "seed {seed}");
        assert_eq!(r.trace.len(), r.iterations_used);
        let last = r.last();
        for (e, u) in last.metrics.e_total.iter().zip(&pop.users) {
            assert!(*e <= u.energy_budget * (1.0 + 1e-3));
        }
        let [.., a, b] = r.trace.as_slice() else { panic!("too short") };
        assert!((a.metrics.test_loss - b.metrics.test_loss).abs() <= cfg.convergence_tol);
        assert!((a.metrics.t_total - b.metrics.t_total).abs() <= cfg.convergence_tol);
    }
}

#[test]
fn identical_inputs_give_identical_results() {
    let (pop, cfg) = desk(5, PopulationSpec::default());
    let a = orchestrator::run_proposed(&pop, &cfg, 10).unwrap();
    let b = orchestrator::run_proposed(&pop, &cfg, 10).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.final_allocation, b.final_allocation);
    assert_eq!(a.final_model, b.final_model);
}

#[test]
fn traditional_loss_mostly_decreases() {
    let mut monotone = 0;
    for seed in [0, 1, 2] {
        let (pop, cfg) = desk(seed, PopulationSpec::default());
        let r = orchestrator::run(
            &pop,
            &cfg,
            &RunOptions {
                max_iterations: 15,
                delta: DecisionPolicy::Fixed(0.0),
                stop_on_convergence: false,
                ..RunOptions::default()
            },
        )
        .unwrap();
        for rec in &r.trace {
            assert_eq!(rec.metrics.t_edge, 0.0);
        }
        let losses: Vec<f64> = r.trace.iter().map(|t| t.metrics.test_loss).collect();
        monotone += usize::from(losses.windows(2).all(|w| w[1] <= w[0]));
    }
    assert!(monotone >= 2, "only {monotone} of 3 seeds had a non-increasing loss trace");
}

#[test]
fn centralized_beats_traditional_at_equal_epochs() {
    let mut wins = 0;
    for seed in [0, 1, 2] {
        let (pop, cfg) = desk(seed, PopulationSpec::default());
        let opts = |d| RunOptions {
            max_iterations: 10,
            delta: DecisionPolicy::Fixed(d),
            stop_on_convergence: false,
            bandwidth: BandwidthPolicy::Uniform,
            ..RunOptions::default()
        };
        let c = orchestrator::run(&pop, &cfg, &opts(1.0)).unwrap();
        let t = orchestrator::run(&pop, &cfg, &opts(0.0)).unwrap();
        assert_eq!(c.final_model.global_weights, c.final_model.edge_weights);
        wins += usize::from(c.last().metrics.test_loss <= t.last().metrics.test_loss);
    }
    assert!(wins >= 2);
}

#[test]
fn centralized_has_no_local_training() {
    let (pop, cfg) = desk(4, PopulationSpec::default());
    let r = orchestrator::run_centralized(&pop, &cfg, 5).unwrap();
    for rec in &r.trace {
        for (i, u) in pop.users.iter().enumerate() {
            let a = rec.allocation.user(i);
            assert_eq!(mecfl::cost::local_training_time(u, &a, &cfg).unwrap(), 0.0);
        }
    }
    assert!(r.final_model.local_trainset_sizes.iter().all(|&n| n == 0));
}

#[test]
fn errors_carry_iteration_context() {
    let (pop, cfg) = desk(6, PopulationSpec::default());
    // No CPU at all with data kept local: local training never finishes.
    let err = orchestrator::run(
        &pop,
        &cfg,
        &RunOptions {
            delta: DecisionPolicy::Fixed(0.5),
            gamma: DecisionPolicy::Fixed(0.0),
            ..RunOptions::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, mecfl::Error::Iteration { iteration: 1, .. }), "{err}");
    assert!(matches!(err.root(), mecfl::Error::DegenerateDivisor { .. }));
}
