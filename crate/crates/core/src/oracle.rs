//! Brute-force references for the closed-form solvers: grid search,
//! bisection, finite differences and exhaustive simplex search.
//!
//! Nothing here calls into [`crate::optimizer`]; objectives are built from
//! the cost model directly.

use crate::cost;
use crate::error::{Error, Result};
use crate::model::{AllocationState, SystemConfig, UserAllocation, UserProfile};

/// Feasible grid point with the smallest objective.
///
/// The grid has `points` equally spaced nodes including both ends. Ties go to
/// the smaller `x`.
pub fn grid_minimize(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
    constraint: impl Fn(f64) -> bool,
) -> Result<(f64, f64)> {
    if points < 2 || !(lo < hi) {
        return Err(Error::validation("grid", "needs points >= 2 and lo < hi"));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..points {
        let x = if k == points - 1 { hi } else { lo + k as f64 * step };
        if !constraint(x) {
            continue;
        }
        let y = f(x);
        if best.is_none_or(|(_, by)| y < by) {
            best = Some((x, y));
        }
    }
    best.ok_or(Error::NoFeasiblePoint)
}

/// Root of `g` on `[lo, hi]` by bisection, to a bracket no wider than `tol`.
pub fn bisect_root(g: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut ga, gb) = (g(a), g(b));
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Central difference of order 1 or 2.
pub fn finite_diff(f: impl Fn(f64) -> f64, x: f64, order: u8, h: f64) -> f64 {
    match order {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        _ => panic!("finite_diff supports order 1 or 2, got {order}"),
    }
}

/// All share vectors `k/n` with `Σk = n`, for `users` entries.
fn simplex_grid(users: usize, n: usize, mut visit: impl FnMut(&[f64])) {
    fn rec(prefix: &mut Vec<usize>, left: usize, users: usize, n: usize, buf: &mut Vec<f64>, visit: &mut dyn FnMut(&[f64])) {
        if prefix.len() == users - 1 {
            prefix.push(left);
            buf.clear();
            buf.extend(prefix.iter().map(|&k| k as f64 / n as f64));
            visit(buf);
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(prefix, left - k, users, n, buf, visit);
            prefix.pop();
        }
    }
    rec(&mut Vec::new(), n, users, n, &mut Vec::new(), &mut visit);
}

fn steps(resolution: f64) -> Result<usize> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::validation("resolution", format!("{resolution} not in (0, 1]")));
    }
    Ok((1.0 / resolution).round() as usize)
}

fn with_shares(a: &AllocationState, off: &[f64], up: &[f64]) -> Result<AllocationState> {
    a.with_edge_decisions(off.to_vec(), up.to_vec(), a.lambda_offload().to_vec(), a.lambda_local().to_vec())
}

fn search(
    n_users: usize,
    n: usize,
    mut cost_of: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut err = None;
    simplex_grid(n_users, n, |w| {
        if err.is_some() {
            return;
        }
        match cost_of(w) {
            Ok(c) if best.as_ref().is_none_or(|(_, b)| c < *b) => best = Some((w.to_vec(), c)),
            Ok(_) => {}
            // a zero share with work to move is simply infeasible
            Err(Error::DegenerateDivisor { .. }) => {}
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    best.map(|b| b.0).ok_or(Error::NoFeasiblePoint)
}

/// Exhaustive search of both bandwidth simplices minimising the largest
/// per-user time `max(tᵢ_local, tᵢ_edge)`.
///
/// The objective is `max(A(ω̄), B(ω̃))`, so the two simplices are searched
/// independently: the pair of minimisers is a joint minimiser. Other
/// allocation fields are taken from `alloc`.
pub fn simplex_minimize_maxtime(
    users: &[UserProfile],
    alloc: &AllocationState,
    weight_dim: usize,
    cfg: &SystemConfig,
    resolution: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if users.len() > 3 {
        return Err(Error::InstanceTooLarge(users.len()));
    }
    let n = steps(resolution)?;
    let k = users.len();
    let off_fixed = alloc.uplink_offload().to_vec();
    let up_fixed = alloc.uplink_weight().to_vec();
    let off = search(k, n, |w| {
        let a = with_shares(alloc, w, &up_fixed)?;
        let mut t: f64 = 0.0;
        for i in 0..k {
            t = t.max(cost::edge_time_user(i, users, &a, cfg)?);
        }
        Ok(t)
    })?;
    let up = search(k, n, |w| {
        let a = with_shares(alloc, &off_fixed, w)?;
        let mut t: f64 = 0.0;
        for (i, u) in users.iter().enumerate() {
            t = t.max(cost::local_time(u, &a.user(i), weight_dim, cfg)?);
        }
        Ok(t)
    })?;
    Ok((off, up))
}

/// Exhaustive search minimising the multiplier-weighted transmission times
/// `Σ λ̃ᵢ·t_offload,i` and `Σ λ̄ᵢ·t_upload,i` over the two simplices.
pub fn simplex_minimize_lagrangian(
    users: &[UserProfile],
    alloc: &AllocationState,
    weight_dim: usize,
    cfg: &SystemConfig,
    resolution: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if users.len() > 3 {
        return Err(Error::InstanceTooLarge(users.len()));
    }
    let n = steps(resolution)?;
    let k = users.len();
    let share = |i: usize, off: f64, up: f64| UserAllocation {
        uplink_offload: off,
        uplink_weight: up,
        ..alloc.user(i)
    };
    let off = search(k, n, |w| {
        let mut s = 0.0;
        for (i, u) in users.iter().enumerate() {
            s += alloc.lambda_offload()[i] * cost::offload_time(u, &share(i, w[i], 1.0), cfg)?;
        }
        Ok(s)
    })?;
    let up = search(k, n, |w| {
        let mut s = 0.0;
        for (i, u) in users.iter().enumerate() {
            s += alloc.lambda_local()[i] * cost::upload_time(u, &share(i, 1.0, w[i]), weight_dim, cfg)?;
        }
        Ok(s)
    })?;
    Ok((off, up))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_examples() {
        let (x, _) = grid_minimize(|x| (x - 0.3).powi(2), 0.0, 1.0, 101, |_| true).unwrap();
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-12);
        let (x, y) = grid_minimize(|x| x, 0.0, 1.0, 101, |x| x >= 0.5).unwrap();
        assert_abs_diff_eq!(x, 0.5, epsilon = 1e-12);
        assert_eq!(x, y);
        assert!(matches!(grid_minimize(|x| x, 0.0, 1.0, 11, |_| false), Err(Error::NoFeasiblePoint)));
        assert!(grid_minimize(|x| x, 1.0, 0.0, 11, |_| true).is_err());
    }

    #[test]
    fn bisection_examples() {
        assert_abs_diff_eq!(bisect_root(|x| x - 0.5, 0.0, 1.0, 1e-8).unwrap(), 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(bisect_root(|x| x * x - 2.0, 1.0, 2.0, 1e-8).unwrap(), 2f64.sqrt(), epsilon = 1e-8);
        assert!(matches!(bisect_root(|x| x + 1.0, 0.0, 1.0, 1e-8), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn finite_difference_examples() {
        assert_abs_diff_eq!(finite_diff(|x| x * x, 3.0, 1, 1e-4), 6.0, epsilon = 1e-6);
        assert_abs_diff_eq!(finite_diff(|x| x * x, 3.0, 2, 1e-3), 2.0, epsilon = 1e-4);
    }

    #[test]
    fn simplex_grid_counts() {
        let mut count = 0;
        simplex_grid(3, 10, |w| {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            count += 1;
        });
        assert_eq!(count, 66);
    }

    fn user(id: usize, samples: usize) -> UserProfile {
        UserProfile {
            id,
            transmit_power: 0.2,
            channel_gain: 1e-8,
            cpu_hz: 1.3e9,
            energy_budget: 50.0,
            dataset_size: samples,
        }
    }

    #[test]
    fn symmetric_instance_gets_uniform_shares() {
        let cfg = SystemConfig::default();
        let users = vec![user(0, 200), user(1, 200)];
        let a = AllocationState::uniform(2, 0.5, 0.5).unwrap();
        let (off, up) = simplex_minimize_maxtime(&users, &a, 7850, &cfg, 1e-3).unwrap();
        assert_abs_diff_eq!(off[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(up[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn asymmetric_instance_equalises_times() {
        // Offloaded bytes 4:1 on equal links. Min-max equalises the two
        // offload times, which makes shares linear in the load.
        let cfg = SystemConfig::default();
        let users = vec![user(0, 400), user(1, 100)];
        let a = AllocationState::uniform(2, 0.5, 0.5).unwrap();
        let (off, _) = simplex_minimize_maxtime(&users, &a, 7850, &cfg, 1e-3).unwrap();
        assert_abs_diff_eq!(off[0], 0.8, epsilon = 1e-12);
        let (off, _) = simplex_minimize_lagrangian(&users, &a, 7850, &cfg, 1e-3).unwrap();
        assert_abs_diff_eq!(off[0], 2.0 / 3.0, epsilon = 1e-3);
    }

    #[test]
    fn four_users_too_large() {
        let cfg = SystemConfig::default();
        let users: Vec<_> = (0..4).map(|i| user(i, 10)).collect();
        let a = AllocationState::uniform(4, 0.5, 0.5).unwrap();
        assert!(matches!(
            simplex_minimize_maxtime(&users, &a, 10, &cfg, 0.1),
            Err(Error::InstanceTooLarge(4))
        ));
    }
}
