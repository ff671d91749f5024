//! Closed-form best responses of the users and the edge server.

use crate::cost::{self, BITS_PER_BYTE};
use crate::error::{Error, Result, Simplex};
use crate::link::base_rate;
use crate::model::{AllocationState, SystemConfig, UserAllocation, UserProfile};

/// Result of the computing-resource best response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSolution {
    pub gamma: f64,
    /// Transmission energy alone already exceeds the budget.
    pub budget_exhausted: bool,
}

/// Largest CPU share that keeps the round energy within budget.
///
/// With nothing left to train locally (`δ = 1`) the CPU share does not
/// affect time or energy; it is reported as 1 when the radio fits in the
/// budget and 0 otherwise.
pub fn solve_gamma(user: &UserProfile, a: &UserAllocation, weight_dim: usize, cfg: &SystemConfig) -> Result<GammaSolution> {
    let radio = cost::offload_energy(user, a, cfg)?
        + user.transmit_power * cost::upload_time(user, a, weight_dim, cfg)?;
    let left = user.energy_budget - radio;
    if left < 0.0 {
        return Ok(GammaSolution {
            gamma: 0.0,
            budget_exhausted: true,
        });
    }
    let per_unit = cfg.chip_capacitance
        * (1.0 - a.delta)
        * cfg.dataset_bytes(user.dataset_size)
        * cfg.cycles_per_byte
        * user.cpu_hz
        * user.cpu_hz;
    let gamma = if per_unit <= 0.0 {
        1.0
    } else {
        (left / per_unit).sqrt().min(1.0)
    };
    Ok(GammaSolution {
        gamma,
        budget_exhausted: false,
    })
}

/// Bandwidth shares for dataset offloading and weight upload.
///
/// Each share is proportional to `sqrt(λ·bits/R)` and each vector is
/// normalised to sum to one.
pub fn solve_uplink(
    users: &[UserProfile],
    alloc: &AllocationState,
    weight_dim: usize,
    cfg: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if users.len() != alloc.len() {
        return Err(Error::LengthMismatch {
            expected: users.len(),
            found: alloc.len(),
        });
    }
    let mut off = Vec::with_capacity(users.len());
    let mut up = Vec::with_capacity(users.len());
    for (i, u) in users.iter().enumerate() {
        let r = base_rate(u, cfg);
        if !(r > 0.0) {
            return Err(Error::DegenerateDivisor {
                user: u.id,
                term: "base rate",
            });
        }
        let data_bits = BITS_PER_BYTE * alloc.delta()[i] * cfg.dataset_bytes(u.dataset_size);
        let weight_bits = BITS_PER_BYTE * cfg.weight_bytes(weight_dim);
        off.push((alloc.lambda_offload()[i] * data_bits / r).sqrt());
        up.push((alloc.lambda_local()[i] * weight_bits / r).sqrt());
    }
    Ok((normalize(off, Simplex::Offload)?, normalize(up, Simplex::Upload)?))
}

fn normalize(mut w: Vec<f64>, simplex: Simplex) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroWeights(simplex));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Offload fraction that balances user `i`'s local and edge times, holding
/// everyone else's fraction fixed, projected onto `[0, 1]`.
///
/// Limits: no CPU share means local training never finishes, so everything
/// is offloaded; no offload bandwidth means nothing can be offloaded.
pub fn solve_delta(
    i: usize,
    users: &[UserProfile],
    alloc: &AllocationState,
    weight_dim: usize,
    cfg: &SystemConfig,
) -> Result<f64> {
    if users.len() != alloc.len() {
        return Err(Error::LengthMismatch {
            expected: users.len(),
            found: alloc.len(),
        });
    }
    let u = &users[i];
    let a = alloc.user(i);
    if a.gamma <= 0.0 {
        return Ok(1.0);
    }
    if a.uplink_offload <= 0.0 {
        return Ok(0.0);
    }
    let bytes = cfg.dataset_bytes(u.dataset_size);
    let local = bytes * cfg.cycles_per_byte / (a.gamma * u.cpu_hz);
    let upload = cost::upload_time(u, &a, weight_dim, cfg)?;
    let offload = BITS_PER_BYTE * bytes / (a.uplink_offload * base_rate(u, cfg));
    let edge_own = bytes * cfg.cycles_per_byte / cfg.edge_cpu_hz;
    let others: f64 = users
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, v)| alloc.delta()[j] * cfg.dataset_bytes(v.dataset_size))
        .sum::<f64>()
        * cfg.cycles_per_byte
        / cfg.edge_cpu_hz;
    let den = offload + edge_own + local;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::DegenerateDivisor {
            user: u.id,
            term: "offload balance denominator",
        });
    }
    Ok(((local + upload - others) / den).clamp(0.0, 1.0))
}

/// Multiplier step after observing the round energy.
///
/// Returns `(λ̃, λ̄)`, both inside `[λ_min, 1 − λ_min]`.
pub fn update_multipliers(e_total: f64, budget: f64, lambda_prev: f64, cfg: &SystemConfig) -> (f64, f64) {
    let mut lt = lambda_prev;
    if e_total > budget + crate::model::CONSTRAINT_TOL {
        lt += cfg.multiplier_increment;
    }
    let lt = lt.clamp(cfg.lambda_min, 1.0 - cfg.lambda_min);
    (lt, 1.0 - lt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn user(id: usize, gain: f64, budget: f64, samples: usize) -> UserProfile {
        UserProfile {
            id,
            transmit_power: 0.2,
            channel_gain: gain,
            cpu_hz: 1.3e9,
            energy_budget: budget,
            dataset_size: samples,
        }
    }

    fn one(delta: f64, gamma: f64, off: f64, up: f64) -> UserAllocation {
        UserAllocation {
            delta,
            gamma,
            uplink_offload: off,
            uplink_weight: up,
        }
    }

    fn radio_energy(u: &UserProfile, a: &UserAllocation, dim: usize, cfg: &SystemConfig) -> f64 {
        cost::offload_energy(u, a, cfg).unwrap() + u.transmit_power * cost::upload_time(u, a, dim, cfg).unwrap()
    }

    #[test]
    fn gamma_zero_when_radio_uses_whole_budget() {
        let cfg = SystemConfig::default();
        let mut u = user(0, 1e-8, 1.0, 200);
        let a = one(0.3, 0.5, 0.1, 0.1);
        u.energy_budget = radio_energy(&u, &a, 7850, &cfg);
        let s = solve_gamma(&u, &a, 7850, &cfg).unwrap();
        assert_eq!(s.gamma, 0.0);
        assert!(!s.budget_exhausted);
    }

    #[test]
    fn gamma_flags_exhausted_budget() {
        let cfg = SystemConfig::default();
        let mut u = user(0, 1e-8, 1.0, 200);
        let a = one(0.3, 0.5, 0.1, 0.1);
        u.energy_budget = 0.5 * radio_energy(&u, &a, 7850, &cfg);
        assert_eq!(
            solve_gamma(&u, &a, 7850, &cfg).unwrap(),
            GammaSolution {
                gamma: 0.0,
                budget_exhausted: true
            }
        );
    }

    #[test]
    fn gamma_projects_large_root() {
        let cfg = SystemConfig::default();
        let a = one(0.0, 0.5, 0.0, 1.0);
        let mut u = user(0, 1e-6, 1.0, 100);
        // Unclamped root 2: compute energy at γ = 2 equals the remaining budget.
        let full = cost::local_compute_energy(&u, &one(0.0, 2.0, 0.0, 1.0), &cfg);
        u.energy_budget = radio_energy(&u, &a, 10, &cfg) + full;
        assert_eq!(solve_gamma(&u, &a, 10, &cfg).unwrap().gamma, 1.0);
    }

    #[test]
    fn gamma_interior_is_energy_tight() {
        let cfg = SystemConfig {
            chip_capacitance: 1e-24,
            ..SystemConfig::default()
        };
        let u = user(0, 1e-8, 1.0, 200);
        let a = one(0.4, 0.5, 0.2, 0.1);
        let s = solve_gamma(&u, &a, 7850, &cfg).unwrap();
        assert!(s.gamma > 0.0 && s.gamma < 1.0, "{s:?}");
        let e = cost::total_energy(&u, &one(0.4, s.gamma, 0.2, 0.1), 7850, &cfg).unwrap();
        assert_relative_eq!(e, u.energy_budget, max_relative = 1e-9);
    }

    #[test]
    fn gamma_with_everything_offloaded() {
        let cfg = SystemConfig::default();
        let u = user(0, 1e-8, 50.0, 200);
        assert_eq!(solve_gamma(&u, &one(1.0, 0.3, 0.5, 0.5), 7850, &cfg).unwrap().gamma, 1.0);
    }

    fn alloc(delta: Vec<f64>, gamma: Vec<f64>, off: Vec<f64>, up: Vec<f64>, lt: Vec<f64>) -> AllocationState {
        let lb = lt.iter().map(|l| 1.0 - l).collect();
        AllocationState::new(delta, gamma, off, up, lt, lb).unwrap()
    }

    #[test]
    fn uplink_symmetric_users_share_equally() {
        let cfg = SystemConfig::default();
        let users: Vec<_> = (0..4).map(|i| user(i, 1e-8, 50.0, 200)).collect();
        let a = AllocationState::uniform(4, 0.4, 0.5).unwrap();
        let (off, up) = solve_uplink(&users, &a, 7850, &cfg).unwrap();
        for (o, w) in off.iter().zip(&up) {
            assert_relative_eq!(*o, 0.25, max_relative = 1e-15);
            assert_relative_eq!(*w, 0.25, max_relative = 1e-15);
        }
    }

    #[test]
    fn uplink_square_root_proportionality() {
        let cfg = SystemConfig::default();
        // Same link, user 0 offloads four times as many bytes.
        let users = vec![user(0, 1e-8, 50.0, 400), user(1, 1e-8, 50.0, 100)];
        let a = alloc(vec![0.5, 0.5], vec![0.5; 2], vec![0.5; 2], vec![0.5; 2], vec![0.5; 2]);
        let (off, _) = solve_uplink(&users, &a, 7850, &cfg).unwrap();
        assert_relative_eq!(off[0], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(off[1], 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn uplink_skips_users_that_keep_their_data() {
        let cfg = SystemConfig::default();
        let users: Vec<_> = (0..3).map(|i| user(i, 1e-8, 50.0, 200)).collect();
        let a = alloc(vec![0.0, 0.5, 0.5], vec![0.5; 3], vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3], vec![0.5; 3]);
        let (off, _) = solve_uplink(&users, &a, 7850, &cfg).unwrap();
        assert_eq!(off[0], 0.0);
        assert_relative_eq!(off[1], 0.5, max_relative = 1e-15);
        let none = AllocationState::uniform(3, 0.0, 0.5).unwrap();
        assert!(matches!(solve_uplink(&users, &none, 7850, &cfg), Err(Error::AllZeroWeights(Simplex::Offload))));
    }

    proptest! {
        #[test]
        fn uplink_shares_sum_to_one(
            params in proptest::collection::vec((1e-10f64..1e-5, 0.0f64..=1.0, 0.01f64..0.99, 10usize..2000), 1..20)
        ) {
            let cfg = SystemConfig::default();
            let users: Vec<_> = params.iter().enumerate().map(|(i, p)| user(i, p.0, 50.0, p.3)).collect();
            let n = users.len();
            prop_assume!(params.iter().any(|p| p.1 > 0.0));
            let a = alloc(
                params.iter().map(|p| p.1).collect(),
                vec![0.5; n],
                vec![1.0 / n as f64; n],
                vec![1.0 / n as f64; n],
                params.iter().map(|p| p.2).collect(),
            );
            let (off, up) = solve_uplink(&users, &a, 7850, &cfg).unwrap();
            prop_assert!((off.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!((up.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn uplink_scale_invariant(scale in 0.01f64..100.0, d0 in 0.1f64..1.0, d1 in 0.1f64..1.0) {
            // Scaling every dataset by the same factor scales every weight equally.
            let cfg = SystemConfig::default();
            let a = alloc(vec![d0, d1], vec![0.5; 2], vec![0.5; 2], vec![0.5; 2], vec![0.3, 0.6]);
            let base = vec![user(0, 1e-8, 50.0, 100), user(1, 1e-9, 50.0, 300)];
            let (off, _) = solve_uplink(&base, &a, 7850, &cfg).unwrap();
            let mut scaled_cfg = cfg.clone();
            scaled_cfg.bytes_per_sample *= scale;
            let (off2, _) = solve_uplink(&base, &a, 7850, &scaled_cfg).unwrap();
            for (x, y) in off.iter().zip(&off2) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn delta_balances_times(
            g in 1e-9f64..1e-6,
            gamma in 0.05f64..1.0,
            off in 0.05f64..0.9,
            up in 0.05f64..0.9,
            other in 0.0f64..1.0,
        ) {
            let cfg = SystemConfig::default();
            let users = vec![user(0, g, 50.0, 200), user(1, 1e-8, 50.0, 200)];
            let a = alloc(vec![0.5, other], vec![gamma, 0.5], vec![off, 1.0 - off], vec![up, 1.0 - up], vec![0.5; 2]);
            let d = solve_delta(0, &users, &a, 7850, &cfg).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            if d > 0.0 && d < 1.0 {
                let b = alloc(vec![d, other], vec![gamma, 0.5], vec![off, 1.0 - off], vec![up, 1.0 - up], vec![0.5; 2]);
                let tl = cost::local_time(&users[0], &b.user(0), 7850, &cfg).unwrap();
                let te = cost::edge_time_user(0, &users, &b, &cfg).unwrap();
                prop_assert!((tl - te).abs() <= 1e-9 * tl.max(te));
            }
        }
    }

    #[test]
    fn delta_tends_to_one_when_only_local_training_costs() {
        let cfg = SystemConfig {
            edge_cpu_hz: 1e30,
            bandwidth_hz: 1e15,
            bytes_per_weight_element: 1e-12,
            ..SystemConfig::default()
        };
        let users = vec![user(0, 1e3, 50.0, 200), user(1, 1e-8, 50.0, 200)];
        let a = alloc(vec![0.5, 0.0], vec![0.5; 2], vec![0.5; 2], vec![0.5; 2], vec![0.5; 2]);
        let d = solve_delta(0, &users, &a, 7850, &cfg).unwrap();
        assert!(d > 0.999, "{d}");
    }

    #[test]
    fn delta_clamps_to_zero_under_edge_congestion() {
        let cfg = SystemConfig {
            edge_cpu_hz: 1e6,
            ..SystemConfig::default()
        };
        let users = vec![user(0, 1e-8, 50.0, 200), user(1, 1e-8, 50.0, 20000)];
        let a = alloc(vec![0.5, 1.0], vec![0.5; 2], vec![0.5; 2], vec![0.5; 2], vec![0.5; 2]);
        assert_eq!(solve_delta(0, &users, &a, 7850, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn delta_limits() {
        let cfg = SystemConfig::default();
        let users = vec![user(0, 1e-8, 50.0, 200), user(1, 1e-8, 50.0, 200)];
        let a = alloc(vec![0.5, 0.5], vec![0.0, 0.5], vec![0.5; 2], vec![0.5; 2], vec![0.5; 2]);
        assert_eq!(solve_delta(0, &users, &a, 7850, &cfg).unwrap(), 1.0);
        let a = alloc(vec![0.5, 0.5], vec![0.5; 2], vec![0.0, 1.0], vec![0.5; 2], vec![0.5; 2]);
        assert_eq!(solve_delta(0, &users, &a, 7850, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn multiplier_examples() {
        let cfg = SystemConfig::default();
        assert_eq!(update_multipliers(40.0, 45.0, 0.5, &cfg), (0.5, 0.5));
        assert_eq!(update_multipliers(45.0, 45.0, 0.37, &cfg), (0.37, 1.0 - 0.37));
        let (lt, lb) = update_multipliers(50.0, 45.0, 0.5, &cfg);
        assert_relative_eq!(lt, 0.55, max_relative = 1e-15);
        assert_relative_eq!(lb, 0.45, max_relative = 1e-14);
        assert_eq!(update_multipliers(50.0, 45.0, 0.99, &cfg), (1.0 - 1e-3, 1.0 - (1.0 - 1e-3)));
    }
}
