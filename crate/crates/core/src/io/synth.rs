//! Synthetic datasets and user populations.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::fl::Dataset;
use crate::io::config::{DataSource, ExperimentSpec, SYNTHETIC_SAMPLES_PER_USER};
use crate::io::idx::load_idx;
use crate::model::UserProfile;
use crate::orchestrator::Population;
use crate::rng::{self, tag};

/// Gaussian clusters: class `c` has unit-variance noise around
/// `separation · e_c`. Features are then mapped affinely into `[0, 1]` and
/// clipped, like pixel intensities.
pub fn synthesize_dataset(n_samples: usize, n_features: usize, n_classes: usize, seed: u64, separation: f64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::validation("n_samples", "must be >= 1"));
    }
    if n_classes == 0 || n_features < n_classes {
        return Err(Error::validation("n_features", "need n_features >= n_classes >= 1"));
    }
    let mut r = rng::stream(seed, &[tag::DATA]);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = separation + 6.0;
    let mut features = Vec::with_capacity(n_samples * n_features);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let y = r.random_range(0..n_classes);
        for j in 0..n_features {
            let mut x: f64 = noise.sample(&mut r);
            if j == y {
                x += separation;
            }
            features.push(((x + 3.0) / scale).clamp(0.0, 1.0));
        }
        labels.push(y);
    }
    Dataset::new(features, labels, n_features, n_classes)
}

/// Position of a user relative to the access point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellPosition {
    Center,
    Middle,
    Edge,
}

#[derive(Debug, Clone)]
pub struct SynthesizedPopulation {
    pub population: Population,
    pub distances: Vec<f64>,
    pub positions: Vec<CellPosition>,
}

/// Labels the closest and the farthest decile (at least one user each when
/// there are two or more users).
pub fn tag_positions(distances: &[f64]) -> Vec<CellPosition> {
    let n = distances.len();
    let mut out = vec![CellPosition::Middle; n];
    if n < 2 {
        return out;
    }
    let k = (n / 10).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    for &i in &order[..k] {
        out[i] = CellPosition::Center;
    }
    for &i in &order[n - k..] {
        out[i] = CellPosition::Edge;
    }
    out
}

fn uniform(r: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        Uniform::new_inclusive(range[0], range[1]).expect("validated range").sample(r)
    }
}

/// Splits `pool` into `parts` shards whose sizes differ by at most one.
pub fn shard(pool: &Dataset, parts: usize) -> Vec<Dataset> {
    let n = pool.len();
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let idx: Vec<usize> = (start..start + len).collect();
            start += len;
            pool.subset(&idx)
        })
        .collect()
}

/// Draws users and hands each a shard of the shuffled training pool.
pub fn synthesize_users(spec: &ExperimentSpec) -> Result<SynthesizedPopulation> {
    spec.validate()?;
    let n = spec.user_count;
    let (pool, test_set) = match &spec.data {
        DataSource::Synthetic {
            n_features,
            n_classes,
            separation,
            test_samples,
        } => {
            let per_user = spec.samples_per_user.unwrap_or(SYNTHETIC_SAMPLES_PER_USER);
            let train = synthesize_dataset(n * per_user, *n_features, *n_classes, spec.seed, *separation)?;
            let test = synthesize_dataset(*test_samples, *n_features, *n_classes, rng::derive_seed(spec.seed, &[tag::TEST_DATA]), *separation)?;
            (train, test)
        }
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => (load_idx(train_images, train_labels)?, load_idx(test_images, test_labels)?),
    };

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng::stream(spec.seed, &[tag::SHUFFLE, 0]));
    if let (Some(per_user), DataSource::Idx { .. }) = (spec.samples_per_user, &spec.data) {
        let want = per_user * n;
        if want > pool.len() {
            return Err(Error::validation(
                "samples_per_user",
                format!("{want} samples requested, pool holds {}", pool.len()),
            ));
        }
        order.truncate(want);
    }
    if order.len() < n {
        return Err(Error::validation("user_count", "more users than samples"));
    }
    let datasets = shard(&pool.subset(&order), n);

    let p = &spec.population;
    let mut r = rng::stream(spec.seed, &[tag::POPULATION]);
    let shadow = Normal::new(0.0, p.shadowing_db).map_err(|e| Error::validation("population.shadowing_db", e.to_string()))?;
    let mut users = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for (i, d) in datasets.iter().enumerate() {
        let cpu_hz = uniform(&mut r, p.cpu_hz_range);
        let energy_budget = uniform(&mut r, p.energy_budget_range);
        let dist = uniform(&mut r, p.distance_range);
        let x_db: f64 = shadow.sample(&mut r);
        let channel_gain = match p.channel_gain_range {
            Some(g) => uniform(&mut r, g),
            None => dist.powf(-p.path_loss_exponent) * 10f64.powf(x_db / 10.0),
        };
        distances.push(dist);
        users.push(UserProfile {
            id: i,
            transmit_power: p.transmit_power,
            channel_gain,
            cpu_hz,
            energy_budget,
            dataset_size: d.len(),
        });
    }
    let positions = tag_positions(&distances);
    Ok(SynthesizedPopulation {
        population: Population {
            users,
            datasets,
            test_set,
        },
        distances,
        positions,
    })
}
