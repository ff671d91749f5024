//! One-vs-rest logistic regression trained with mini-batch SGD on a
//! squared-error loss, plus the size-weighted aggregation of local and edge
//! models.
//!
//! Weights are laid out class-major: class `c` owns the slice
//! `w[c*(F+1) .. (c+1)*(F+1)]`, the last entry of which is its bias.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::rng;

/// Row-major feature matrix with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n_features: usize,
    n_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, n_features: usize, n_classes: usize) -> Result<Self> {
        if n_features == 0 || n_classes == 0 {
            return Err(Error::validation("dataset", "needs at least one feature and one class"));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::validation(
                "dataset",
                format!(
                    "{} feature values for {} samples of width {}",
                    features.len(),
                    labels.len(),
                    n_features
                ),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::validation("dataset", format!("label {bad} >= {n_classes} classes")));
        }
        Ok(Self {
            features,
            labels,
            n_features,
            n_classes,
        })
    }

    pub fn empty(n_features: usize, n_classes: usize) -> Self {
        Self {
            features: Vec::new(),
            labels: Vec::new(),
            n_features,
            n_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        let f = self.n_features;
        (&self.features[i * f..(i + 1) * f], self.labels[i])
    }

    /// Length of the flattened weight vector for this feature/class shape.
    pub fn weight_dim(&self) -> usize {
        weight_dim(self.n_features, self.n_classes)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let (x, y) = self.sample(i);
            features.extend_from_slice(x);
            labels.push(y);
        }
        Self {
            features,
            labels,
            n_features: self.n_features,
            n_classes: self.n_classes,
        }
    }

    /// Concatenates datasets in the given order.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>, n_features: usize, n_classes: usize) -> Result<Self> {
        let mut out = Self::empty(n_features, n_classes);
        for p in parts {
            if p.n_features != n_features || p.n_classes != n_classes {
                return Err(Error::validation("dataset", "cannot concatenate datasets of different shape"));
            }
            out.features.extend_from_slice(&p.features);
            out.labels.extend_from_slice(&p.labels);
        }
        Ok(out)
    }
}

pub fn weight_dim(n_features: usize, n_classes: usize) -> usize {
    (n_features + 1) * n_classes
}

/// A user's dataset partitioned into the part trained locally and the part
/// sent to the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub local_part: Dataset,
    pub offload_part: Dataset,
}

/// Number of offloaded samples: `δ·n` rounded half-up.
pub fn offload_count(n: usize, delta: f64) -> usize {
    let raw = (delta.clamp(0.0, 1.0) * n as f64 + 0.5).floor() as usize;
    raw.min(n)
}

/// Uniform random partition without replacement, reproducible per seed.
pub fn split_dataset(d: &Dataset, delta: f64, seed: u64) -> Result<SplitDataset> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::validation("delta", format!("{delta} outside [0, 1]")));
    }
    let n = d.len();
    let k = offload_count(n, delta);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, &[rng::tag::SPLIT]));
    let (off, local) = idx.split_at(k);
    let mut off = off.to_vec();
    let mut local = local.to_vec();
    // keep original order inside each part
    off.sort_unstable();
    local.sort_unstable();
    Ok(SplitDataset {
        local_part: d.subset(&local),
        offload_part: d.subset(&off),
    })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(w: &[f64], x: &[f64], c: usize) -> f64 {
    let stride = x.len() + 1;
    let block = &w[c * stride..(c + 1) * stride];
    block[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + block[x.len()]
}

/// Squared error between per-class sigmoid outputs and the one-hot target.
pub fn sample_loss(w: &[f64], x: &[f64], label: usize, n_classes: usize) -> f64 {
    (0..n_classes)
        .map(|c| {
            let target = if c == label { 1.0 } else { 0.0 };
            let r = sigmoid(logit(w, x, c)) - target;
            r * r
        })
        .sum()
}

/// Adds `scale · ∇_w sample_loss` into `grad`.
pub fn accumulate_gradient(w: &[f64], x: &[f64], label: usize, n_classes: usize, scale: f64, grad: &mut [f64]) {
    let stride = x.len() + 1;
    for c in 0..n_classes {
        let s = sigmoid(logit(w, x, c));
        let target = if c == label { 1.0 } else { 0.0 };
        let dz = scale * 2.0 * (s - target) * s * (1.0 - s);
        let g = &mut grad[c * stride..(c + 1) * stride];
        for (gj, xj) in g[..x.len()].iter_mut().zip(x) {
            *gj += dz * xj;
        }
        g[x.len()] += dz;
    }
}

pub fn sample_gradient(w: &[f64], x: &[f64], label: usize, n_classes: usize) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    accumulate_gradient(w, x, label, n_classes, 1.0, &mut g);
    g
}

/// SGD hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

/// Runs `epochs` shuffled passes of mini-batch SGD starting from `w_init`.
pub fn train(w_init: &[f64], d: &Dataset, params: TrainParams, seed: u64) -> Result<Vec<f64>> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if w_init.len() != d.weight_dim() {
        return Err(Error::validation(
            "weights",
            format!("dimension {} does not match dataset ({})", w_init.len(), d.weight_dim()),
        ));
    }
    if !(params.learning_rate > 0.0) || params.batch_size == 0 {
        return Err(Error::validation("train", "learning rate and batch size must be positive"));
    }
    let mut w = w_init.to_vec();
    let mut grad = vec![0.0; w.len()];
    let mut order: Vec<usize> = (0..d.len()).collect();
    let mut rng = rng::stream(seed, &[rng::tag::SHUFFLE]);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = d.sample(i);
                accumulate_gradient(&w, x, y, d.n_classes(), scale, &mut grad);
            }
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= params.learning_rate * gi;
            }
        }
    }
    Ok(w)
}

/// Mean per-sample loss of `w` over `d`.
pub fn evaluate_loss(w: &[f64], d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = (0..d.len())
        .map(|i| {
            let (x, y) = d.sample(i);
            sample_loss(w, x, y, d.n_classes())
        })
        .sum();
    Ok(total / d.len() as f64)
}

/// Fraction of samples whose arg-max class matches the label.
pub fn accuracy(w: &[f64], d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = (0..d.len())
        .filter(|&i| {
            let (x, y) = d.sample(i);
            let best = (0..d.n_classes())
                .map(|c| logit(w, x, c))
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (c, z)| if z > acc.1 { (c, z) } else { acc });
            best.0 == y
        })
        .count();
    Ok(hits as f64 / d.len() as f64)
}

/// Mixing coefficients of the local models and the edge model.
///
/// Returns one coefficient per user followed by the edge coefficient.
pub fn aggregation_coefficients(model: &ModelState) -> Result<(Vec<f64>, f64)> {
    model.validate()?;
    let total = model.dataset_sizes.iter().sum::<usize>() as f64;
    let local = model
        .local_trainset_sizes
        .iter()
        .map(|&n| n as f64 / total)
        .collect();
    Ok((local, model.edge_trainset_size as f64 / total))
}

/// Size-weighted average of local models and the edge model.
///
/// Accumulated in user-id order, edge last.
pub fn aggregate(model: &ModelState) -> Result<Vec<f64>> {
    let (local, edge) = aggregation_coefficients(model)?;
    let mut out = vec![0.0; model.dim];
    for (c, w) in local.iter().zip(&model.local_weights) {
        for (o, wi) in out.iter_mut().zip(w) {
            *o += c * wi;
        }
    }
    for (o, wi) in out.iter_mut().zip(&model.edge_weights) {
        *o += edge * wi;
    }
    Ok(out)
}
