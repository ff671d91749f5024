//! Domain types shared by every stage of the simulator.
//!
//! Physical quantities are plain `f64` in SI units: Hz, W, J, s, bytes and
//! cycles. Sizes that enter a rate are converted from bytes to bits at the
//! point of use (see [`crate::cost`]).

use serde::{Deserialize, Serialize};

use crate::error::{AllocField, Error, Result, Simplex};

/// Absolute slack used when comparing against a constraint.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Global constants of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Total uplink bandwidth of the access point (Hz).
    pub bandwidth_hz: f64,
    /// Additive white Gaussian noise power (W).
    pub noise_power: f64,
    /// CPU frequency available at the edge server (cycles/s).
    pub edge_cpu_hz: f64,
    /// CPU cycles needed to process one byte of training data.
    pub cycles_per_byte: f64,
    /// Effective switched capacitance of the device chips.
    pub chip_capacitance: f64,
    /// Weight of the test loss in the reported score.
    pub loss_weight: f64,
    /// Weight of the round time in the reported score.
    pub time_weight: f64,
    /// Stop threshold on successive loss and round-time differences.
    pub convergence_tol: f64,
    /// Step added to the offloading multiplier when a user overshoots its budget.
    pub multiplier_increment: f64,
    /// Lower clamp for both multipliers; keeps them strictly positive.
    pub lambda_min: f64,
    /// Size of one training sample (bytes).
    pub bytes_per_sample: f64,
    /// Size of one weight element on the wire (bytes).
    pub bytes_per_weight_element: f64,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            noise_power: 1e-9,
            edge_cpu_hz: 16e9,
            cycles_per_byte: 100.0,
            chip_capacitance: 1e-28,
            loss_weight: 1.0,
            time_weight: 1.0,
            convergence_tol: 1e-3,
            multiplier_increment: 0.05,
            lambda_min: 1e-3,
            bytes_per_sample: 784.0,
            bytes_per_weight_element: 4.0,
            local_epochs: 10,
            learning_rate: 4.0,
            batch_size: 32,
            rng_seed: 7,
        }
    }
}

fn require_positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {v}")))
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        require_positive("bandwidth_hz", self.bandwidth_hz)?;
        require_positive("noise_power", self.noise_power)?;
        require_positive("edge_cpu_hz", self.edge_cpu_hz)?;
        require_positive("cycles_per_byte", self.cycles_per_byte)?;
        require_positive("chip_capacitance", self.chip_capacitance)?;
        require_positive("bytes_per_sample", self.bytes_per_sample)?;
        require_positive("bytes_per_weight_element", self.bytes_per_weight_element)?;
        require_positive("multiplier_increment", self.multiplier_increment)?;
        require_positive("learning_rate", self.learning_rate)?;
        // +inf disables the stop rule's threshold entirely.
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::validation("convergence_tol", "must be > 0"));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < 0.5) {
            return Err(Error::validation("lambda_min", "must lie in (0, 0.5)"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be >= 1"));
        }
        for (name, v) in [("loss_weight", self.loss_weight), ("time_weight", self.time_weight)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Linear size model for a dataset: bytes occupied by `samples` samples.
    pub fn dataset_bytes(&self, samples: usize) -> f64 {
        self.bytes_per_sample * samples as f64
    }

    /// Linear size model for a weight vector of `dim` elements.
    pub fn weight_bytes(&self, dim: usize) -> f64 {
        self.bytes_per_weight_element * dim as f64
    }
}

/// Physical state of one mobile user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: usize,
    /// Transmit power (W).
    pub transmit_power: f64,
    /// Uplink channel power gain.
    pub channel_gain: f64,
    /// Total CPU frequency (cycles/s).
    pub cpu_hz: f64,
    /// Energy the user may spend in one round (J).
    pub energy_budget: f64,
    /// Number of local samples.
    pub dataset_size: usize,
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        require_positive("transmit_power", self.transmit_power)?;
        require_positive("channel_gain", self.channel_gain)?;
        require_positive("cpu_hz", self.cpu_hz)?;
        require_positive("energy_budget", self.energy_budget)?;
        if self.dataset_size == 0 {
            return Err(Error::validation("dataset_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// Clamp onto `[0, 1]`.
pub fn project_unit_interval(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::validation("x", format!("not finite: {x}")));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Decision variables of a single user, detached from the population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserAllocation {
    pub delta: f64,
    pub gamma: f64,
    pub uplink_offload: f64,
    pub uplink_weight: f64,
}

#[derive(Deserialize)]
struct RawAllocation {
    delta: Vec<f64>,
    gamma: Vec<f64>,
    uplink_offload: Vec<f64>,
    uplink_weight: Vec<f64>,
    lambda_offload: Vec<f64>,
    lambda_local: Vec<f64>,
}

impl TryFrom<RawAllocation> for AllocationState {
    type Error = Error;

    fn try_from(r: RawAllocation) -> Result<Self> {
        AllocationState::new(
            r.delta,
            r.gamma,
            r.uplink_offload,
            r.uplink_weight,
            r.lambda_offload,
            r.lambda_local,
        )
    }
}

/// Decision variables of one round for the whole population.
///
/// Every instance satisfies the feasible-set invariants; the only way to
/// build one is through a validating constructor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAllocation")]
pub struct AllocationState {
    delta: Vec<f64>,
    gamma: Vec<f64>,
    uplink_offload: Vec<f64>,
    uplink_weight: Vec<f64>,
    lambda_offload: Vec<f64>,
    lambda_local: Vec<f64>,
}

impl AllocationState {
    pub fn new(
        delta: Vec<f64>,
        gamma: Vec<f64>,
        uplink_offload: Vec<f64>,
        uplink_weight: Vec<f64>,
        lambda_offload: Vec<f64>,
        lambda_local: Vec<f64>,
    ) -> Result<Self> {
        let state = Self {
            delta,
            gamma,
            uplink_offload,
            uplink_weight,
            lambda_offload,
            lambda_local,
        };
        let n = state.delta.len();
        validate_allocation(state, n)
    }

    /// Equal bandwidth split, equal multipliers, same `delta`/`gamma` for all.
    pub fn uniform(n_users: usize, delta: f64, gamma: f64) -> Result<Self> {
        if n_users == 0 {
            return Err(Error::validation("n_users", "must be >= 1"));
        }
        let share = 1.0 / n_users as f64;
        Self::new(
            vec![delta; n_users],
            vec![gamma; n_users],
            vec![share; n_users],
            vec![share; n_users],
            vec![0.5; n_users],
            vec![0.5; n_users],
        )
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn uplink_offload(&self) -> &[f64] {
        &self.uplink_offload
    }
    pub fn uplink_weight(&self) -> &[f64] {
        &self.uplink_weight
    }
    pub fn lambda_offload(&self) -> &[f64] {
        &self.lambda_offload
    }
    pub fn lambda_local(&self) -> &[f64] {
        &self.lambda_local
    }

    pub fn user(&self, i: usize) -> UserAllocation {
        UserAllocation {
            delta: self.delta[i],
            gamma: self.gamma[i],
            uplink_offload: self.uplink_offload[i],
            uplink_weight: self.uplink_weight[i],
        }
    }

    /// Replace the per-user decisions, keeping bandwidth and multipliers.
    pub fn with_user_decisions(&self, delta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        Self::new(
            delta,
            gamma,
            self.uplink_offload.clone(),
            self.uplink_weight.clone(),
            self.lambda_offload.clone(),
            self.lambda_local.clone(),
        )
    }

    /// Replace the edge-side variables, keeping `delta` and `gamma`.
    pub fn with_edge_decisions(
        &self,
        uplink_offload: Vec<f64>,
        uplink_weight: Vec<f64>,
        lambda_offload: Vec<f64>,
        lambda_local: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            self.delta.clone(),
            self.gamma.clone(),
            uplink_offload,
            uplink_weight,
            lambda_offload,
            lambda_local,
        )
    }
}

/// Checks the feasible-set invariants and hands the state back untouched.
pub fn validate_allocation(a: AllocationState, n_users: usize) -> Result<AllocationState> {
    for v in [
        &a.delta,
        &a.gamma,
        &a.uplink_offload,
        &a.uplink_weight,
        &a.lambda_offload,
        &a.lambda_local,
    ] {
        if v.len() != n_users {
            return Err(Error::LengthMismatch {
                expected: n_users,
                found: v.len(),
            });
        }
    }
    let unit = |x: f64| x.is_finite() && (-CONSTRAINT_TOL..=1.0 + CONSTRAINT_TOL).contains(&x);
    for i in 0..n_users {
        let checks = [
            (AllocField::Delta, unit(a.delta[i])),
            (AllocField::Gamma, unit(a.gamma[i])),
            (AllocField::UplinkOffload, unit(a.uplink_offload[i])),
            (AllocField::UplinkWeight, unit(a.uplink_weight[i])),
            (
                AllocField::LambdaOffload,
                a.lambda_offload[i].is_finite() && a.lambda_offload[i] >= 0.0,
            ),
            (
                AllocField::LambdaLocal,
                a.lambda_local[i].is_finite() && a.lambda_local[i] >= 0.0,
            ),
        ];
        if let Some((field, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(Error::OutOfRange { index: i, field: *field });
        }
    }
    for (simplex, v) in [(Simplex::Offload, &a.uplink_offload), (Simplex::Upload, &a.uplink_weight)] {
        let sum: f64 = v.iter().sum();
        if sum > 1.0 + CONSTRAINT_TOL {
            return Err(Error::SumExceedsOne {
                simplex,
                excess: sum - 1.0,
            });
        }
    }
    Ok(a)
}

/// Weight vectors of one round plus the sample counts used for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub local_weights: Vec<Vec<f64>>,
    pub edge_weights: Vec<f64>,
    pub global_weights: Vec<f64>,
    pub dim: usize,
    /// |D̄ᵢ|: samples each user kept for local training.
    pub local_trainset_sizes: Vec<usize>,
    /// |D̃_E|: samples pooled at the edge.
    pub edge_trainset_size: usize,
    /// |Dᵢ|: full local dataset sizes.
    pub dataset_sizes: Vec<usize>,
}

impl ModelState {
    /// All weights zero, nothing offloaded yet.
    pub fn zeros(dim: usize, dataset_sizes: Vec<usize>) -> Self {
        Self {
            local_weights: vec![vec![0.0; dim]; dataset_sizes.len()],
            edge_weights: vec![0.0; dim],
            global_weights: vec![0.0; dim],
            dim,
            local_trainset_sizes: dataset_sizes.clone(),
            edge_trainset_size: 0,
            dataset_sizes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dataset_sizes.len();
        if self.local_weights.len() != n || self.local_trainset_sizes.len() != n {
            return Err(Error::InconsistentSizes(format!(
                "{} users but {} local models and {} local sizes",
                n,
                self.local_weights.len(),
                self.local_trainset_sizes.len()
            )));
        }
        let dims_ok = self.edge_weights.len() == self.dim
            && self.global_weights.len() == self.dim
            && self.local_weights.iter().all(|w| w.len() == self.dim);
        if !dims_ok {
            return Err(Error::InconsistentSizes(format!(
                "weight vectors must all have dimension {}",
                self.dim
            )));
        }
        let total: usize = self.dataset_sizes.iter().sum();
        let used: usize = self.local_trainset_sizes.iter().sum::<usize>() + self.edge_trainset_size;
        if total != used {
            return Err(Error::InconsistentSizes(format!(
                "local + edge samples = {used}, datasets hold {total}"
            )));
        }
        if total == 0 {
            return Err(Error::InconsistentSizes("no samples at all".into()));
        }
        Ok(())
    }
}

/// Outputs of one communication round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub t_local: Vec<f64>,
    pub t_edge: f64,
    pub t_total: f64,
    pub e_total: Vec<f64>,
    pub weighted_score: f64,
    pub train_loss: f64,
    pub test_loss: f64,
}
