//! Randomised cross-checks of the closed forms against the brute-force
//! oracles, plus derivative-sign and gradient checks.
//!
//! Each check returns a [`Check`] instead of panicking so callers can print
//! a report.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cost;
use crate::error::Result;
use crate::fl;
use crate::model::{AllocationState, ModelState, SystemConfig, UserAllocation, UserProfile};
use crate::optimizer;
use crate::oracle;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, failures: usize, total: usize, detail: impl Into<String>) -> Self {
        let detail = detail.into();
        Self {
            name: name.to_string(),
            passed: failures == 0,
            detail: if detail.is_empty() {
                format!("{} of {total} instances within tolerance", total - failures)
            } else {
                format!("{} of {total} instances within tolerance; {detail}", total - failures)
            },
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

const DIM: usize = 210;

fn random_user(r: &mut ChaCha8Rng, id: usize) -> UserProfile {
    UserProfile {
        id,
        transmit_power: r.random_range(0.05..0.5),
        channel_gain: 10f64.powf(r.random_range(-9.5..-6.0)),
        cpu_hz: r.random_range(1.2e9..1.5e9),
        energy_budget: 50.0,
        dataset_size: r.random_range(50..2000),
    }
}

fn random_cfg(r: &mut ChaCha8Rng) -> SystemConfig {
    SystemConfig {
        chip_capacitance: 10f64.powf(r.random_range(-28.0..-25.0)),
        edge_cpu_hz: r.random_range(4e9..32e9),
        ..SystemConfig::default()
    }
}

fn random_alloc(r: &mut ChaCha8Rng) -> UserAllocation {
    UserAllocation {
        delta: r.random_range(0.0..0.95),
        gamma: r.random_range(0.05..1.0),
        uplink_offload: r.random_range(0.05..1.0),
        uplink_weight: r.random_range(0.05..1.0),
    }
}

fn instance_rng(seed: u64, check: u64, k: usize) -> ChaCha8Rng {
    rng::stream(seed, &[0xC4EC, check, k as u64])
}

/// CPU share against a constrained grid search over `γ`.
pub fn check_gamma(seed: u64, instances: usize, grid_points: usize) -> Result<Check> {
    let step = 1.0 / (grid_points - 1) as f64;
    let outcomes: Vec<Result<(bool, bool)>> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let mut r = instance_rng(seed, 1, k);
            let cfg = random_cfg(&mut r);
            let mut u = random_user(&mut r, 0);
            let a = random_alloc(&mut r);
            let radio = cost::offload_energy(&u, &a, &cfg)? + u.transmit_power * cost::upload_time(&u, &a, DIM, &cfg)?;
            let full = cost::local_compute_energy(&u, &UserAllocation { gamma: 1.0, ..a }, &cfg);
            u.energy_budget = radio + r.random_range(0.01..1.5) * full;

            let closed = optimizer::solve_gamma(&u, &a, DIM, &cfg)?.gamma;
            let at = |g: f64| UserAllocation { gamma: g, ..a };
            let (grid, _) = oracle::grid_minimize(
                |g| cost::local_time(&u, &at(g), DIM, &cfg).unwrap_or(f64::INFINITY),
                0.0,
                1.0,
                grid_points,
                |g| cost::total_energy(&u, &at(g), DIM, &cfg).is_ok_and(|e| e <= u.energy_budget),
            )?;
            let matches = (closed - grid).abs() <= step;
            let tight = if closed > 0.0 && closed < 1.0 {
                let e = cost::total_energy(&u, &at(closed), DIM, &cfg)?;
                ((e - u.energy_budget) / u.energy_budget).abs() <= 1e-6
            } else {
                true
            };
            Ok((matches, tight))
        })
        .collect();
    let mut bad_match = 0;
    let mut bad_tight = 0;
    for o in outcomes {
        let (m, t) = o?;
        bad_match += usize::from(!m);
        bad_tight += usize::from(!t);
    }
    Ok(Check::new(
        "cpu share vs grid search",
        bad_match + bad_tight,
        instances,
        format!("{bad_match} grid mismatches, {bad_tight} interior points off the energy budget"),
    ))
}

fn random_population(r: &mut ChaCha8Rng, n: usize) -> (Vec<UserProfile>, AllocationState) {
    let users: Vec<UserProfile> = (0..n).map(|i| random_user(r, i)).collect();
    let mut raw = |n: usize| -> Vec<f64> { (0..n).map(|_| r.random_range(0.05..1.0)).collect() };
    let normalise = |v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let delta = raw(n);
    let gamma = raw(n);
    let off = normalise(raw(n));
    let up = normalise(raw(n));
    let lt: Vec<f64> = raw(n).into_iter().map(|x| x.clamp(0.01, 0.99)).collect();
    let lb = lt.iter().map(|x| 1.0 - x).collect();
    let a = AllocationState::new(delta, gamma, off, up, lt, lb).expect("shares normalised");
    (users, a)
}

/// Offload fraction against bisection of the local/edge time gap.
pub fn check_delta(seed: u64, instances: usize) -> Result<Check> {
    let outcomes: Vec<Result<(bool, bool)>> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let mut r = instance_rng(seed, 2, k);
            let cfg = random_cfg(&mut r);
            let n = r.random_range(2..6);
            let (users, a) = random_population(&mut r, n);
            let i = r.random_range(0..n);
            let closed = optimizer::solve_delta(i, &users, &a, DIM, &cfg)?;
            let with = |d: f64| {
                let mut delta = a.delta().to_vec();
                delta[i] = d;
                a.with_user_decisions(delta, a.gamma().to_vec()).expect("delta in range")
            };
            let gap = |d: f64| {
                let b = with(d);
                cost::local_time(&users[i], &b.user(i), DIM, &cfg).unwrap() - cost::edge_time_user(i, &users, &b, &cfg).unwrap()
            };
            let root = match oracle::bisect_root(gap, 0.0, 1.0, 1e-12) {
                Ok(x) => x,
                // no crossing: the gap keeps one sign and the projection picks an end
                Err(_) if gap(1.0) > 0.0 => 1.0,
                Err(_) => 0.0,
            };
            let matches = (closed - root).abs() <= 1e-8;
            let balanced = if closed > 0.0 && closed < 1.0 {
                let b = with(closed);
                let tl = cost::local_time(&users[i], &b.user(i), DIM, &cfg)?;
                let te = cost::edge_time_user(i, &users, &b, &cfg)?;
                (tl - te).abs() <= 1e-6 * tl.max(te)
            } else {
                true
            };
            Ok((matches, balanced))
        })
        .collect();
    let mut bad_match = 0;
    let mut bad_balance = 0;
    for o in outcomes {
        let (m, b) = o?;
        bad_match += usize::from(!m);
        bad_balance += usize::from(!b);
    }
    Ok(Check::new(
        "offload fraction vs bisection",
        bad_match + bad_balance,
        instances,
        format!("{bad_match} root mismatches, {bad_balance} unbalanced interior points"),
    ))
}

/// Which brute-force objective the bandwidth shares are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UplinkOracle {
    /// Smallest largest per-user time.
    MaxTime,
    /// Smallest multiplier-weighted sum of transmission times.
    Lagrangian,
}

/// Bandwidth shares on two-user instances against exhaustive simplex search.
pub fn check_uplink(seed: u64, instances: usize, resolution: f64, against: UplinkOracle) -> Result<Check> {
    let outcomes: Vec<Result<(bool, bool, f64)>> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let mut r = instance_rng(seed, 3, k);
            let cfg = random_cfg(&mut r);
            let (users, a) = random_population(&mut r, 2);
            let (off, up) = optimizer::solve_uplink(&users, &a, DIM, &cfg)?;
            let sums = (off.iter().sum::<f64>() - 1.0).abs() <= 1e-12 && (up.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
            // the search varies shares with the multipliers already in place
            let (o_off, o_up) = match against {
                UplinkOracle::MaxTime => oracle::simplex_minimize_maxtime(&users, &a, DIM, &cfg, resolution)?,
                UplinkOracle::Lagrangian => oracle::simplex_minimize_lagrangian(&users, &a, DIM, &cfg, resolution)?,
            };
            let gap = off
                .iter()
                .zip(&o_off)
                .chain(up.iter().zip(&o_up))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            Ok((gap <= resolution + 1e-12, sums, gap))
        })
        .collect();
    let mut bad_match = 0;
    let mut bad_sum = 0;
    let mut worst: f64 = 0.0;
    for o in outcomes {
        let (m, s, g) = o?;
        bad_match += usize::from(!m);
        bad_sum += usize::from(!s);
        worst = worst.max(g);
    }
    let name = match against {
        UplinkOracle::MaxTime => "bandwidth shares vs min-max-time search",
        UplinkOracle::Lagrangian => "bandwidth shares vs weighted-time search",
    };
    Ok(Check::new(
        name,
        bad_match + bad_sum,
        instances,
        format!("{bad_match} share mismatches (worst gap {worst:.4}), {bad_sum} sums off 1"),
    ))
}

/// Analytic sign of a first derivative; second derivatives are all ≥ 0.
struct Probe {
    label: &'static str,
    first_sign: f64,
}

/// Finite-difference curvature and slope signs of energy and local time.
pub fn check_derivatives(seed: u64, points: usize) -> Result<Check> {
    let probes = [
        Probe {
            label: "e/gamma",
            first_sign: 1.0,
        },
        Probe {
            label: "e/offload",
            first_sign: -1.0,
        },
        Probe {
            label: "e/upload",
            first_sign: -1.0,
        },
        Probe {
            label: "t/gamma",
            first_sign: -1.0,
        },
        Probe {
            label: "t/upload",
            first_sign: -1.0,
        },
    ];
    let failures: Vec<Result<Vec<String>>> = (0..points)
        .into_par_iter()
        .map(|k| {
            let mut r = instance_rng(seed, 4, k);
            let cfg = random_cfg(&mut r);
            let u = random_user(&mut r, 0);
            let a = UserAllocation {
                delta: r.random_range(0.05..0.95),
                ..random_alloc(&mut r)
            };
            let mut bad = Vec::new();
            for p in &probes {
                let x0 = match p.label {
                    "e/gamma" | "t/gamma" => a.gamma,
                    "e/offload" => a.uplink_offload,
                    _ => a.uplink_weight,
                };
                let f = |x: f64| {
                    let b = match p.label {
                        "e/gamma" | "t/gamma" => UserAllocation { gamma: x, ..a },
                        "e/offload" => UserAllocation { uplink_offload: x, ..a },
                        _ => UserAllocation { uplink_weight: x, ..a },
                    };
                    if p.label.starts_with('e') {
                        cost::total_energy(&u, &b, DIM, &cfg).unwrap()
                    } else {
                        cost::local_time(&u, &b, DIM, &cfg).unwrap()
                    }
                };
                let d1 = oracle::finite_diff(f, x0, 1, 1e-6);
                let d2 = oracle::finite_diff(f, x0, 2, 1e-3);
                if d2 < -1e-6 {
                    bad.push(format!("{} curvature {d2:e}", p.label));
                }
                if d1.signum() != p.first_sign || d1.abs() <= 1e-12 {
                    bad.push(format!("{} slope {d1:e}", p.label));
                }
                let analytic = analytic_second(p.label, &u, &a, &cfg);
                if analytic.signum() != d2.signum() {
                    bad.push(format!("{} curvature sign {d2:e} vs {analytic:e}", p.label));
                }
            }
            Ok(bad)
        })
        .collect();
    let mut n_bad = 0;
    let mut first = None;
    for f in failures {
        let f = f?;
        if !f.is_empty() {
            n_bad += 1;
            first.get_or_insert(f.join(", "));
        }
    }
    Ok(Check::new(
        "convexity and monotonicity",
        n_bad,
        points,
        first.map(|f| format!("first failure: {f}")).unwrap_or_default(),
    ))
}

/// Hand-derived second derivatives, independent of the cost module.
fn analytic_second(label: &str, u: &UserProfile, a: &UserAllocation, cfg: &SystemConfig) -> f64 {
    let rate = cfg.bandwidth_hz * (1.0 + u.transmit_power * u.channel_gain / cfg.noise_power).log2();
    let data = u.dataset_size as f64 * cfg.bytes_per_sample;
    let weights = DIM as f64 * cfg.bytes_per_weight_element;
    let cycles = (1.0 - a.delta) * data * cfg.cycles_per_byte;
    match label {
        "e/gamma" => 2.0 * cfg.chip_capacitance * cycles * u.cpu_hz * u.cpu_hz,
        "e/offload" => 2.0 * u.transmit_power * 8.0 * a.delta * data / (a.uplink_offload.powi(3) * rate),
        "e/upload" => 2.0 * u.transmit_power * 8.0 * weights / (a.uplink_weight.powi(3) * rate),
        "t/gamma" => 2.0 * cycles / (a.gamma.powi(3) * u.cpu_hz),
        _ => 2.0 * 8.0 * weights / (a.uplink_weight.powi(3) * rate),
    }
}

/// Local time falls and energy rises strictly along the CPU-share grid.
pub fn check_gamma_monotonicity(seed: u64, users: usize) -> Result<Check> {
    let mut bad = 0;
    for k in 0..users {
        let mut r = instance_rng(seed, 7, k);
        let cfg = random_cfg(&mut r);
        let u = random_user(&mut r, 0);
        let a = random_alloc(&mut r);
        let mut prev: Option<(f64, f64)> = None;
        let mut ok = true;
        for g in (1..=10).map(|j| j as f64 / 10.0) {
            let b = UserAllocation { gamma: g, ..a };
            let t = cost::local_time(&u, &b, DIM, &cfg)?;
            let e = cost::total_energy(&u, &b, DIM, &cfg)?;
            if let Some((pt, pe)) = prev {
                ok &= t < pt && e > pe;
            }
            prev = Some((t, e));
        }
        bad += usize::from(!ok);
    }
    Ok(Check::new("local time and energy along the cpu-share grid", bad, users, ""))
}

/// Loss gradient against central differences, and aggregation weights.
pub fn check_learning(seed: u64, pairs: usize) -> Result<Check> {
    let mut bad_grad = 0;
    let mut r = rng::stream(seed, &[0xC4EC, 10]);
    for _ in 0..pairs {
        let f = r.random_range(1..12);
        let c = r.random_range(2..6);
        let x: Vec<f64> = (0..f).map(|_| r.random::<f64>()).collect();
        let y = r.random_range(0..c);
        let w: Vec<f64> = (0..fl::weight_dim(f, c)).map(|_| r.random_range(-2.0..2.0)).collect();
        let g = fl::sample_gradient(&w, &x, y, c);
        let ok = (0..w.len()).all(|j| {
            let h = 1e-6;
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let fd = (fl::sample_loss(&wp, &x, y, c) - fl::sample_loss(&wm, &x, y, c)) / (2.0 * h);
            (fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-4)
        });
        bad_grad += usize::from(!ok);
    }
    let mut bad_coef = 0;
    for _ in 0..pairs {
        let n = r.random_range(1..40);
        let sizes: Vec<usize> = (0..n).map(|_| r.random_range(1..5000)).collect();
        let mut m = ModelState::zeros(1, sizes.clone());
        let off: Vec<usize> = sizes.iter().map(|&s| fl::offload_count(s, r.random())).collect();
        m.local_trainset_sizes = sizes.iter().zip(&off).map(|(s, o)| s - o).collect();
        m.edge_trainset_size = off.iter().sum();
        let (c, e) = fl::aggregation_coefficients(&m)?;
        bad_coef += usize::from((c.iter().sum::<f64>() + e - 1.0).abs() > 1e-12);
    }
    Ok(Check::new(
        "loss gradient and aggregation weights",
        bad_grad + bad_coef,
        2 * pairs,
        format!("{bad_grad} gradient mismatches, {bad_coef} coefficient sums off 1"),
    ))
}

/// Every check at its full size.
pub fn full_suite(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        check_gamma(seed, 200, 1_000_000)?,
        check_delta(seed, 200)?,
        check_uplink(seed, 50, 1e-3, UplinkOracle::MaxTime)?,
        check_uplink(seed, 50, 1e-3, UplinkOracle::Lagrangian)?,
        check_derivatives(seed, 1000)?,
        check_gamma_monotonicity(seed, 100)?,
        check_learning(seed, 100)?,
    ])
}
