//! OFDMA uplink rates.
//!
//! Dataset offloading and weight upload never overlap in time, so both use
//! the same spectral rate scaled by their own bandwidth share.

use crate::model::{SystemConfig, UserAllocation, UserProfile};

/// Rates of one user under a given allocation, in bit/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRates {
    pub base_rate: f64,
    pub offload_rate: f64,
    pub upload_rate: f64,
}

impl LinkRates {
    pub fn new(user: &UserProfile, alloc: &UserAllocation, cfg: &SystemConfig) -> Self {
        let base = base_rate(user, cfg);
        Self {
            base_rate: base,
            offload_rate: alloc.uplink_offload * base,
            upload_rate: alloc.uplink_weight * base,
        }
    }
}

/// Shannon rate with the whole band: `ω·log₂(1 + p·g/n₀)`.
pub fn base_rate(user: &UserProfile, cfg: &SystemConfig) -> f64 {
    let snr = user.transmit_power * user.channel_gain / cfg.noise_power;
    cfg.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

pub fn offload_rate(user: &UserProfile, alloc: &UserAllocation, cfg: &SystemConfig) -> f64 {
    alloc.uplink_offload * base_rate(user, cfg)
}

pub fn upload_rate(user: &UserProfile, alloc: &UserAllocation, cfg: &SystemConfig) -> f64 {
    alloc.uplink_weight * base_rate(user, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn user_with_snr(snr: f64, cfg: &SystemConfig) -> UserProfile {
        UserProfile {
            id: 0,
            transmit_power: 1.0,
            channel_gain: snr * cfg.noise_power,
            cpu_hz: 1e9,
            energy_budget: 1.0,
            dataset_size: 1,
        }
    }

    fn alloc(offload: f64, weight: f64) -> UserAllocation {
        UserAllocation {
            delta: 0.5,
            gamma: 0.5,
            uplink_offload: offload,
            uplink_weight: weight,
        }
    }

    #[test]
    fn unit_snr_gives_bandwidth() {
        let cfg = SystemConfig::default();
        assert_relative_eq!(base_rate(&user_with_snr(1.0, &cfg), &cfg), 20e6, max_relative = 1e-15);
        assert_relative_eq!(base_rate(&user_with_snr(3.0, &cfg), &cfg), 40e6, max_relative = 1e-15);
    }

    #[test]
    fn realistic_link() {
        let cfg = SystemConfig::default();
        let u = UserProfile {
            id: 0,
            transmit_power: 0.2,
            channel_gain: 1e-7,
            cpu_hz: 1e9,
            energy_budget: 1.0,
            dataset_size: 1,
        };
        // 20e6 * log2(21), 30-digit reference value.
        assert_relative_eq!(base_rate(&u, &cfg), 87_846_348.455_575_2, max_relative = 1e-14);
    }

    #[test]
    fn shares_scale_rates() {
        let cfg = SystemConfig::default();
        let u1 = user_with_snr(1.0, &cfg);
        let u3 = user_with_snr(3.0, &cfg);
        assert_eq!(offload_rate(&u1, &alloc(0.0, 0.0), &cfg), 0.0);
        assert_relative_eq!(offload_rate(&u1, &alloc(1.0, 0.0), &cfg), 20e6, max_relative = 1e-15);
        assert_relative_eq!(offload_rate(&u3, &alloc(0.25, 0.0), &cfg), 1e7, max_relative = 1e-15);
        assert_eq!(upload_rate(&u1, &alloc(0.0, 0.0), &cfg), 0.0);
        assert_relative_eq!(upload_rate(&u1, &alloc(0.0, 0.5), &cfg), 1e7, max_relative = 1e-15);
        assert_relative_eq!(upload_rate(&u1, &alloc(0.0, 1.0 / 50.0), &cfg), 4e5, max_relative = 1e-14);
        let r = LinkRates::new(&u3, &alloc(0.25, 0.5), &cfg);
        assert!(r.offload_rate <= r.base_rate && r.upload_rate <= r.base_rate);
    }

    proptest! {
        #[test]
        fn rate_increases_with_gain(g in 1e-10f64..1e-5, factor in 1.001f64..100.0) {
            let cfg = SystemConfig::default();
            let mut u = user_with_snr(1.0, &cfg);
            u.channel_gain = g;
            let lo = base_rate(&u, &cfg);
            u.channel_gain = g * factor;
            prop_assert!(base_rate(&u, &cfg) > lo);
        }

        #[test]
        fn rate_decreases_with_noise(n0 in 1e-12f64..1e-6) {
            let mut cfg = SystemConfig::default();
            let u = user_with_snr(10.0, &cfg);
            cfg.noise_power = n0;
            let lo_noise = base_rate(&u, &cfg);
            cfg.noise_power = n0 * 2.0;
            prop_assert!(base_rate(&u, &cfg) < lo_noise);
        }

        #[test]
        fn offload_rate_is_linear(w in 0.0f64..0.5) {
            let cfg = SystemConfig::default();
            let u = user_with_snr(7.0, &cfg);
            let one = offload_rate(&u, &alloc(w, 0.0), &cfg);
            let two = offload_rate(&u, &alloc(2.0 * w, 0.0), &cfg);
            prop_assert!((two - 2.0 * one).abs() <= 1e-6 * two.abs().max(1.0));
        }
    }
}
