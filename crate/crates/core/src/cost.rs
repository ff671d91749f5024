//! Time and energy of one communication round.
//!
//! Sizes are bytes; anything crossing the radio is multiplied by 8 so it can
//! be divided by a rate in bit/s. A term whose numerator is exactly zero is
//! zero even when its divisor vanishes; a non-zero numerator over a zero
//! divisor is reported as [`Error::DegenerateDivisor`] instead of infinity.

use crate::error::{Error, Result};
use crate::link::base_rate;
use crate::model::{AllocationState, SystemConfig, UserAllocation, UserProfile};

pub(crate) const BITS_PER_BYTE: f64 = 8.0;

fn ratio(num: f64, den: f64, user: usize, term: &'static str) -> Result<f64> {
    if num == 0.0 {
        Ok(0.0)
    } else if den <= 0.0 {
        Err(Error::DegenerateDivisor { user, term })
    } else {
        Ok(num / den)
    }
}

/// Seconds spent on local training: `(1−δ)·f(|D|)·τ / (γΓ)`.
pub fn local_training_time(user: &UserProfile, a: &UserAllocation, cfg: &SystemConfig) -> Result<f64> {
    let cycles = (1.0 - a.delta) * cfg.dataset_bytes(user.dataset_size) * cfg.cycles_per_byte;
    ratio(cycles, a.gamma * user.cpu_hz, user.id, "local training (gamma = 0)")
}

/// Seconds spent uploading the weight vector: `f(|w|) / (ω̄R)`.
pub fn upload_time(user: &UserProfile, a: &UserAllocation, weight_dim: usize, cfg: &SystemConfig) -> Result<f64> {
    let bits = BITS_PER_BYTE * cfg.weight_bytes(weight_dim);
    ratio(bits, a.uplink_weight * base_rate(user, cfg), user.id, "weight upload (uplink_weight = 0)")
}

/// Seconds spent offloading the dataset share: `δ·f(|D|) / (ω̃R)`.
pub fn offload_time(user: &UserProfile, a: &UserAllocation, cfg: &SystemConfig) -> Result<f64> {
    let bits = BITS_PER_BYTE * a.delta * cfg.dataset_bytes(user.dataset_size);
    ratio(bits, a.uplink_offload * base_rate(user, cfg), user.id, "dataset offload (uplink_offload = 0)")
}

/// Local training followed by weight upload.
pub fn local_time(user: &UserProfile, a: &UserAllocation, weight_dim: usize, cfg: &SystemConfig) -> Result<f64> {
    Ok(local_training_time(user, a, cfg)? + upload_time(user, a, weight_dim, cfg)?)
}

/// Dynamic CPU energy `ψ·(1−δ)·f(|D|)·τ·(γΓ)²`.
pub fn local_compute_energy(user: &UserProfile, a: &UserAllocation, cfg: &SystemConfig) -> f64 {
    let freq = a.gamma * user.cpu_hz;
    cfg.chip_capacitance * (1.0 - a.delta) * cfg.dataset_bytes(user.dataset_size) * cfg.cycles_per_byte * freq * freq
}

/// Compute energy plus the radio energy of the weight upload.
pub fn local_energy(user: &UserProfile, a: &UserAllocation, weight_dim: usize, cfg: &SystemConfig) -> Result<f64> {
    Ok(local_compute_energy(user, a, cfg) + user.transmit_power * upload_time(user, a, weight_dim, cfg)?)
}

pub fn offload_energy(user: &UserProfile, a: &UserAllocation, cfg: &SystemConfig) -> Result<f64> {
    Ok(user.transmit_power * offload_time(user, a, cfg)?)
}

pub fn total_energy(user: &UserProfile, a: &UserAllocation, weight_dim: usize, cfg: &SystemConfig) -> Result<f64> {
    Ok(local_energy(user, a, weight_dim, cfg)? + offload_energy(user, a, cfg)?)
}

/// Time the edge CPU needs for the pooled offloaded data: `Σ δⱼf(|Dⱼ|)τ / Γ_E`.
pub fn edge_compute_time(users: &[UserProfile], delta: &[f64], cfg: &SystemConfig) -> f64 {
    let bytes: f64 = users
        .iter()
        .zip(delta)
        .map(|(u, d)| d * cfg.dataset_bytes(u.dataset_size))
        .sum();
    bytes * cfg.cycles_per_byte / cfg.edge_cpu_hz
}

fn check_len(users: &[UserProfile], alloc: &AllocationState) -> Result<()> {
    if users.len() != alloc.len() {
        return Err(Error::LengthMismatch {
            expected: users.len(),
            found: alloc.len(),
        });
    }
    Ok(())
}

/// Slowest offload plus the shared edge compute time.
pub fn edge_time_total(users: &[UserProfile], alloc: &AllocationState, cfg: &SystemConfig) -> Result<f64> {
    check_len(users, alloc)?;
    let mut slowest: f64 = 0.0;
    for (i, u) in users.iter().enumerate() {
        slowest = slowest.max(offload_time(u, &alloc.user(i), cfg)?);
    }
    Ok(slowest + edge_compute_time(users, alloc.delta(), cfg))
}

/// User `i`'s own offload time plus the shared edge compute time.
pub fn edge_time_user(i: usize, users: &[UserProfile], alloc: &AllocationState, cfg: &SystemConfig) -> Result<f64> {
    check_len(users, alloc)?;
    Ok(offload_time(&users[i], &alloc.user(i), cfg)? + edge_compute_time(users, alloc.delta(), cfg))
}

/// Synchronous round time: the later of the slowest user and the edge.
pub fn total_time(
    users: &[UserProfile],
    alloc: &AllocationState,
    weight_dim: usize,
    cfg: &SystemConfig,
) -> Result<f64> {
    check_len(users, alloc)?;
    let mut t = edge_time_total(users, alloc, cfg)?;
    for (i, u) in users.iter().enumerate() {
        t = t.max(local_time(u, &alloc.user(i), weight_dim, cfg)?);
    }
    Ok(t)
}
