//! Desk-scale learners, local SGD, the linear compute-time model and the
//! label-skewed data split used by the simulator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Bits used to serialize one parameter or feature value on the wire.
pub const BITS_PER_VALUE: u64 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Serialized size S(w).
    pub fn wire_bits(&self) -> u64 {
        BITS_PER_VALUE * self.values.len() as u64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &ModelParams) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// S(D_k): raw feature payload in bits.
    pub fn size_bits(&self) -> u64 {
        self.samples
            .iter()
            .map(|s| BITS_PER_VALUE * s.features.len() as u64)
            .sum()
    }

    pub fn label_counts(&self, classes: usize) -> Vec<usize> {
        let mut counts = vec![0; classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A differentiable model over flat parameter vectors.
pub trait Learner {
    fn param_count(&self) -> usize;

    /// Per-sample loss f(x, w).
    fn sample_loss(&self, params: &[f64], sample: &Sample) -> f64;

    /// Adds the gradient of the per-sample loss, scaled by `scale`, into `grad`.
    fn accumulate_gradient(&self, params: &[f64], sample: &Sample, scale: f64, grad: &mut [f64]);

    fn predict(&self, params: &[f64], features: &[f64]) -> usize;

    fn init_params(&self, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::new(
            (0..self.param_count())
                .map(|_| 0.01 * normal(&mut rng))
                .collect::<Vec<f64>>(),
        )
    }

    /// Mean loss and gradient over `batch`.
    fn loss_and_gradient(&self, params: &[f64], batch: &[&Sample]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.param_count()];
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for s in batch {
            loss += self.sample_loss(params, s);
            self.accumulate_gradient(params, s, scale, &mut grad);
        }
        (loss * scale, grad)
    }
}

fn log_softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    for z in logits.iter_mut() {
        *z -= lse;
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Multinomial logistic regression; parameters are a row-major
/// `classes × features` weight matrix followed by `classes` biases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticRegression {
    pub classes: usize,
    pub features: usize,
}

impl LogisticRegression {
    fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let bias = &params[self.classes * self.features..];
        (0..self.classes)
            .map(|c| {
                let row = &params[c * self.features..(c + 1) * self.features];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias[c]
            })
            .collect()
    }
}

impl Learner for LogisticRegression {
    fn param_count(&self) -> usize {
        self.classes * (self.features + 1)
    }

    fn sample_loss(&self, params: &[f64], sample: &Sample) -> f64 {
        let mut z = self.logits(params, &sample.features);
        log_softmax_in_place(&mut z);
        -z[sample.label]
    }

    fn accumulate_gradient(&self, params: &[f64], sample: &Sample, scale: f64, grad: &mut [f64]) {
        let mut z = self.logits(params, &sample.features);
        log_softmax_in_place(&mut z);
        let bias_at = self.classes * self.features;
        for c in 0..self.classes {
            let delta = scale * (z[c].exp() - if c == sample.label { 1.0 } else { 0.0 });
            let row = &mut grad[c * self.features..(c + 1) * self.features];
            for (g, x) in row.iter_mut().zip(&sample.features) {
                *g += delta * x;
            }
            grad[bias_at + c] += delta;
        }
    }

    fn predict(&self, params: &[f64], features: &[f64]) -> usize {
        argmax(&self.logits(params, features))
    }
}

/// One hidden tanh layer followed by a softmax output layer.
///
/// Layout: `W1 (hidden × features)`, `b1 (hidden)`, `W2 (classes × hidden)`, `b2 (classes)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mlp {
    pub classes: usize,
    pub features: usize,
    pub hidden: usize,
}

impl Mlp {
    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.features;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        (b1, w2, b2)
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &params[j * self.features..(j + 1) * self.features];
                (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + params[b1 + j]).tanh()
            })
            .collect();
        let logits = (0..self.classes)
            .map(|c| {
                let row = &params[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
                row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + params[b2 + c]
            })
            .collect();
        (hidden, logits)
    }
}

impl Learner for Mlp {
    fn param_count(&self) -> usize {
        self.offsets().2 + self.classes
    }

    fn init_params(&self, seed: u64) -> ModelParams {
        // small symmetric-breaking weights scaled by fan-in
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b1, w2, b2) = self.offsets();
        let mut values = vec![0.0; self.param_count()];
        let s1 = 1.0 / (self.features as f64).sqrt();
        let s2 = 1.0 / (self.hidden as f64).sqrt();
        for (i, v) in values.iter_mut().enumerate() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v = if i < b1 {
                s1 * n
            } else if (w2..b2).contains(&i) {
                s2 * n
            } else {
                0.0
            };
        }
        ModelParams::new(values)
    }

    fn sample_loss(&self, params: &[f64], sample: &Sample) -> f64 {
        let (_, mut z) = self.forward(params, &sample.features);
        log_softmax_in_place(&mut z);
        -z[sample.label]
    }

    fn accumulate_gradient(&self, params: &[f64], sample: &Sample, scale: f64, grad: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let (hidden, mut z) = self.forward(params, &sample.features);
        log_softmax_in_place(&mut z);
        let mut back = vec![0.0; self.hidden];
        for c in 0..self.classes {
            let delta = scale * (z[c].exp() - if c == sample.label { 1.0 } else { 0.0 });
            for j in 0..self.hidden {
                grad[w2 + c * self.hidden + j] += delta * hidden[j];
                back[j] += delta * params[w2 + c * self.hidden + j];
            }
            grad[b2 + c] += delta;
        }
        for j in 0..self.hidden {
            let d = back[j] * (1.0 - hidden[j] * hidden[j]);
            let row = &mut grad[j * self.features..(j + 1) * self.features];
            for (g, x) in row.iter_mut().zip(&sample.features) {
                *g += d * x;
            }
            grad[b1 + j] += d;
        }
    }

    fn predict(&self, params: &[f64], features: &[f64]) -> usize {
        argmax(&self.forward(params, features).1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Logistic(LogisticRegression),
    Mlp(Mlp),
}

impl Learner for Model {
    fn param_count(&self) -> usize {
        match self {
            Model::Logistic(m) => m.param_count(),
            Model::Mlp(m) => m.param_count(),
        }
    }

    fn init_params(&self, seed: u64) -> ModelParams {
        match self {
            Model::Logistic(m) => m.init_params(seed),
            Model::Mlp(m) => m.init_params(seed),
        }
    }

    fn sample_loss(&self, params: &[f64], sample: &Sample) -> f64 {
        match self {
            Model::Logistic(m) => m.sample_loss(params, sample),
            Model::Mlp(m) => m.sample_loss(params, sample),
        }
    }

    fn accumulate_gradient(&self, params: &[f64], sample: &Sample, scale: f64, grad: &mut [f64]) {
        match self {
            Model::Logistic(m) => m.accumulate_gradient(params, sample, scale, grad),
            Model::Mlp(m) => m.accumulate_gradient(params, sample, scale, grad),
        }
    }

    fn predict(&self, params: &[f64], features: &[f64]) -> usize {
        match self {
            Model::Logistic(m) => m.predict(params, features),
            Model::Mlp(m) => m.predict(params, features),
        }
    }
}

/// Local optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub eta: f64,
    pub batch_size: usize,
    /// Number of SGD steps I; `None` means one pass over the local data.
    pub local_iters: Option<usize>,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { eta: 0.1, batch_size: 10, local_iters: None }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("learning rate", self.eta));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size", 0.0));
        }
        if self.local_iters == Some(0) {
            return Err(Error::invalid("local iterations", 0.0));
        }
        Ok(())
    }

    pub fn iterations(&self, dataset_len: usize) -> usize {
        self.local_iters
            .unwrap_or_else(|| dataset_len.div_ceil(self.batch_size).max(1))
    }
}

/// Linear compute model: cycles per bit and CPU frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeProfile {
    pub cycles_per_bit: f64,
    pub cpu_hz: f64,
}

/// t_l = c · I · S(D) / ν.
pub fn training_time(profile: &ComputeProfile, iterations: usize, data_bits: f64) -> f64 {
    profile.cycles_per_bit * iterations as f64 * data_bits / profile.cpu_hz
}

fn check_dim<L: Learner + ?Sized>(learner: &L, params: &ModelParams) -> Result<()> {
    if params.dim() != learner.param_count() {
        return Err(Error::DimensionMismatch {
            expected: learner.param_count(),
            found: params.dim(),
        });
    }
    Ok(())
}

/// F_k(w): mean per-sample loss over a local dataset.
pub fn local_loss<L: Learner + ?Sized>(learner: &L, params: &ModelParams, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(learner, params)?;
    let total: f64 = data
        .samples
        .iter()
        .map(|s| learner.sample_loss(&params.values, s))
        .sum();
    Ok(total / data.len() as f64)
}

/// F(w) = Σ (D_k / D) F_k(w).
pub fn global_loss<L: Learner + ?Sized>(learner: &L, params: &ModelParams, datasets: &[Dataset]) -> Result<f64> {
    let total: usize = datasets.iter().map(Dataset::len).sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut loss = 0.0;
    for d in datasets.iter().filter(|d| !d.is_empty()) {
        loss += d.len() as f64 / total as f64 * local_loss(learner, params, d)?;
    }
    Ok(loss)
}

/// Runs `I` mini-batch SGD steps from `start`, reshuffling at every epoch.
pub fn local_sgd<L: Learner + ?Sized>(
    learner: &L,
    start: &ModelParams,
    data: &Dataset,
    config: &SgdConfig,
    seed: u64,
) -> Result<ModelParams> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(learner, start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batches_per_epoch = data.len().div_ceil(config.batch_size);
    let mut w = start.values.clone();
    for step in 0..config.iterations(data.len()) {
        let b = step % batches_per_epoch;
        if b == 0 {
            order.shuffle(&mut rng);
        }
        let end = ((b + 1) * config.batch_size).min(data.len());
        let batch: Vec<&Sample> = order[b * config.batch_size..end]
            .iter()
            .map(|&i| &data.samples[i])
            .collect();
        let (_, grad) = learner.loss_and_gradient(&w, &batch);
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= config.eta * gi;
        }
    }
    Ok(ModelParams::new(w))
}

pub fn evaluate_accuracy<L: Learner + ?Sized>(learner: &L, params: &ModelParams, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(learner, params)?;
    let correct = test
        .samples
        .iter()
        .filter(|s| learner.predict(&params.values, &s.features) == s.label)
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Splits `classes` labels into `groups` contiguous, equally sized blocks.
pub fn split_labels(classes: usize, groups: usize) -> Result<Vec<Vec<usize>>> {
    if groups == 0 || !classes.is_multiple_of(groups) {
        return Err(Error::Partition(format!(
            "{classes} labels cannot be divided evenly across {groups} groups"
        )));
    }
    let per = classes / groups;
    Ok((0..groups).map(|g| (g * per..(g + 1) * per).collect()).collect())
}

/// Label-skewed split: every satellite in `groups[g]` only receives samples
/// whose label is in `labels[g]`, dealt evenly among the group's members.
///
/// Returns one dataset per satellite id `0..satellite_count`.
pub fn partition_non_iid(
    dataset: &Dataset,
    groups: &[Vec<usize>],
    labels: &[Vec<usize>],
    satellite_count: usize,
    seed: u64,
) -> Result<Vec<Dataset>> {
    if groups.len() != labels.len() {
        return Err(Error::Partition(format!(
            "{} satellite groups but {} label groups",
            groups.len(),
            labels.len()
        )));
    }
    let mut owner = vec![None; satellite_count];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Partition(format!("satellite group {g} is empty")));
        }
        for &k in members {
            match owner.get_mut(k) {
                Some(slot @ None) => *slot = Some(g),
                Some(Some(_)) => return Err(Error::Partition(format!("satellite {k} in two groups"))),
                None => return Err(Error::UnknownSatellite(k)),
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Dataset::default(); satellite_count];
    for (members, group_labels) in groups.iter().zip(labels) {
        for &label in group_labels {
            let mut idx: Vec<usize> = dataset
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.label == label)
                .map(|(i, _)| i)
                .collect();
            if idx.len() < members.len() {
                return Err(Error::Partition(format!(
                    "label {label} has {} samples for {} satellites",
                    idx.len(),
                    members.len()
                )));
            }
            idx.shuffle(&mut rng);
            for (j, i) in idx.into_iter().enumerate() {
                out[members[j % members.len()]]
                    .samples
                    .push(dataset.samples[i].clone());
            }
        }
    }
    Ok(out)
}

/// Gaussian-blob classification task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTask {
    pub classes: usize,
    pub feature_dim: usize,
    pub samples_per_class: usize,
    pub test_per_class: usize,
    /// Distance of every class mean from the origin.
    pub separation: f64,
    /// Per-coordinate noise standard deviation.
    pub spread: f64,
}

/// Draws class means on a sphere of radius `separation` and samples isotropic
/// noise of std `spread` around them. Returns `(train, test)`.
pub fn generate_synthetic_task(task: &SyntheticTask, seed: u64) -> Result<(Dataset, Dataset)> {
    if task.classes == 0 || task.feature_dim == 0 || task.samples_per_class == 0 {
        return Err(Error::invalid("synthetic task size", 0.0));
    }
    if !(task.spread >= 0.0) || !(task.separation > 0.0) {
        return Err(Error::invalid("synthetic task spread/separation", task.spread));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..task.classes)
        .map(|_| {
            let v: Vec<f64> = (0..task.feature_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| task.separation * x / norm).collect()
        })
        .collect();
    let mut draw = |count: usize| {
        let mut samples = Vec::with_capacity(count * task.classes);
        for (label, mean) in means.iter().enumerate() {
            for _ in 0..count {
                let features = mean
                    .iter()
                    .map(|m| m + task.spread * normal(&mut rng))
                    .collect();
                samples.push(Sample { features, label });
            }
        }
        Dataset { samples }
    };
    let train = draw(task.samples_per_class);
    let test = draw(task.test_per_class);
    Ok((train, test))
}
