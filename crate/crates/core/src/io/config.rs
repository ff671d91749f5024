//! Experiment description read from a TOML file.
//!
//! Every key has a default, so an empty file is a valid experiment. Tables
//! map to dotted paths, e.g. `system.bandwidth_hz` or
//! `population.cpu_hz_range`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    Proposed,
    Traditional,
    Centralized,
    SweepOffload,
    SweepGamma,
}

impl Scenario {
    pub fn is_sweep(self) -> bool {
        matches!(self, Scenario::SweepOffload | Scenario::SweepGamma)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::Proposed => "proposed",
            Scenario::Traditional => "traditional",
            Scenario::Centralized => "centralized",
            Scenario::SweepOffload => "sweep_offload",
            Scenario::SweepGamma => "sweep_gamma",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        n_features: usize,
        n_classes: usize,
        /// Distance of each class mean from the origin, in noise std-devs.
        separation: f64,
        test_samples: usize,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            n_features: 20,
            n_classes: 10,
            separation: 5.0,
            test_samples: 500,
        }
    }
}

/// Ranges the user population is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub cpu_hz_range: [f64; 2],
    pub energy_budget_range: [f64; 2],
    /// Distance to the access point (m); sets the path loss.
    pub distance_range: [f64; 2],
    pub path_loss_exponent: f64,
    /// Standard deviation of log-normal shadowing (dB).
    pub shadowing_db: f64,
    /// If set, channel gains are drawn uniformly from this range instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_gain_range: Option<[f64; 2]>,
    pub transmit_power: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            cpu_hz_range: [1.2e9, 1.5e9],
            energy_budget_range: [45.0, 60.0],
            distance_range: [50.0, 500.0],
            path_loss_exponent: 3.0,
            shadowing_db: 8.0,
            channel_gain_range: None,
            transmit_power: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Rounds per sweep point; sweeps never stop early.
    pub rounds: usize,
    /// Offload fraction held fixed during the CPU-share sweep.
    pub fixed_delta: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            rounds: 20,
            fixed_delta: 0.5,
        }
    }
}

pub const SYNTHETIC_SAMPLES_PER_USER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub user_count: usize,
    /// Samples per user. Unset means the whole pool is shared out for IDX
    /// data and [`SYNTHETIC_SAMPLES_PER_USER`] for synthetic data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_user: Option<usize>,
    pub max_iterations: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub data: DataSource,
    pub population: PopulationSpec,
    pub sweep: SweepSpec,
    /// `rng_seed` in here is ignored; `seed` wins.
    pub system: SystemConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::Proposed,
            user_count: 10,
            samples_per_user: None,
            max_iterations: 100,
            seed: 7,
            output: None,
            data: DataSource::default(),
            population: PopulationSpec::default(),
            sweep: SweepSpec::default(),
            system: SystemConfig::default(),
        }
    }
}

fn range(name: &str, r: [f64; 2], positive: bool) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] || (positive && r[0] <= 0.0) {
        return Err(Error::validation(name, format!("bad range [{}, {}]", r[0], r[1])));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.user_count == 0 {
            return Err(Error::validation("user_count", "must be >= 1"));
        }
        if self.samples_per_user == Some(0) {
            return Err(Error::validation("samples_per_user", "must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations", "must be >= 1"));
        }
        let p = &self.population;
        range("population.cpu_hz_range", p.cpu_hz_range, true)?;
        range("population.energy_budget_range", p.energy_budget_range, true)?;
        range("population.distance_range", p.distance_range, true)?;
        if let Some(g) = p.channel_gain_range {
            range("population.channel_gain_range", g, true)?;
        }
        if !(p.transmit_power > 0.0) || !(p.shadowing_db >= 0.0) || !(p.path_loss_exponent > 0.0) {
            return Err(Error::validation("population", "power, exponent must be > 0 and shadowing >= 0"));
        }
        if self.sweep.rounds == 0 || !(0.0..=1.0).contains(&self.sweep.fixed_delta) {
            return Err(Error::validation("sweep", "rounds must be >= 1 and fixed_delta in [0, 1]"));
        }
        match &self.data {
            DataSource::Synthetic {
                n_features,
                n_classes,
                separation,
                test_samples,
            } => {
                if *n_classes == 0 || n_features < n_classes || !(*separation >= 0.0) || *test_samples == 0 {
                    return Err(Error::validation(
                        "data",
                        "synthetic data needs n_features >= n_classes >= 1, separation >= 0, test_samples >= 1",
                    ));
                }
            }
            DataSource::Idx { .. } => {}
        }
        self.system_config().validate()
    }

    /// System constants with the experiment seed applied.
    pub fn system_config(&self) -> SystemConfig {
        SystemConfig {
            rng_seed: self.seed,
            ..self.system.clone()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.as_ref().display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentSpec::from_toml("").unwrap(), ExperimentSpec::default());
    }

    #[test]
    fn dotted_keys_parse() {
        let s = ExperimentSpec::from_toml(
            "scenario = \"sweep_gamma\"\nuser_count = 3\nsystem.bandwidth_hz = 1e7\npopulation.cpu_hz_range = [1e9, 2e9]\n",
        )
        .unwrap();
        assert_eq!(s.scenario, Scenario::SweepGamma);
        assert_eq!(s.system.bandwidth_hz, 1e7);
        assert_eq!(s.population.cpu_hz_range, [1e9, 2e9]);
    }

    #[test]
    fn unknown_keys_and_bad_ranges_rejected() {
        assert!(matches!(ExperimentSpec::from_toml("usr_count = 3"), Err(Error::Config(_))));
        assert!(ExperimentSpec::from_toml("population.cpu_hz_range = [2e9, 1e9]").is_err());
        assert!(ExperimentSpec::from_toml("user_count = 0").is_err());
    }

    #[test]
    fn round_trip() {
        let mut s = ExperimentSpec {
            scenario: Scenario::Centralized,
            output: Some("out/run.csv".into()),
            samples_per_user: Some(1200),
            data: DataSource::Idx {
                train_images: "a".into(),
                train_labels: "b".into(),
                test_images: "c".into(),
                test_labels: "d".into(),
            },
            ..ExperimentSpec::default()
        };
        s.population.channel_gain_range = Some([1e-9, 1e-7]);
        s.system.convergence_tol = 0.1 + 0.2;
        let back = ExperimentSpec::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(back, s);
        let d = ExperimentSpec::default();
        assert_eq!(ExperimentSpec::from_toml(&d.to_toml().unwrap()).unwrap(), d);
    }
}
