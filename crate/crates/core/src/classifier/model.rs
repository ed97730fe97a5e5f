//! Multinomial logistic regression trained with mini-batch SGD.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureConfig;
use crate::error::{Error, Result};
use crate::synth::GestureClass;

pub const NUM_CLASSES: usize = GestureClass::COUNT;
const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Frames per window.
    pub window_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 100,
            dropout_p: 0.3,
            batch_size: 32,
            seed: 0,
            window_len: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.window_len == 0 {
            return Err(Error::Config("window length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-feature standardization learned from the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(xs: &[Vec<f64>]) -> Self {
        let d = xs.first().map_or(0, Vec::len);
        let n = xs.len() as f64;
        let mut mean = vec![0.0; d];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub feature_config: FeatureConfig,
    pub window_len: usize,
    pub stats: Standardizer,
    /// Row-major `NUM_CLASSES x feature_dim`.
    pub weights: Vec<f64>,
    pub bias: [f64; NUM_CLASSES],
}

impl ClassifierModel {
    pub fn feature_dim(&self) -> usize {
        self.stats.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.feature_dim();
        if self.stats.std.len() != d || self.weights.len() != NUM_CLASSES * d {
            return Err(Error::format("model", "parameter shapes disagree"));
        }
        if d != self.feature_config.feature_len(self.window_len) {
            return Err(Error::format(
                "model",
                format!(
                    "feature dim {d} does not match {:?} with window {}",
                    self.feature_config, self.window_len
                ),
            ));
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.bias)
            .chain(&self.stats.mean)
            .chain(&self.stats.std)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ClassifierModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    /// Class probabilities for an unstandardized feature vector.
    pub fn probabilities(&self, features: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        if features.len() != self.feature_dim() {
            return Err(Error::dims(self.feature_dim(), features.len()));
        }
        let z = self.stats.apply(features);
        Ok(softmax(&logits(&self.weights, &self.bias, &z)))
    }

    pub fn predict(&self, features: &[f64]) -> Result<(GestureClass, [f64; NUM_CLASSES])> {
        let p = self.probabilities(features)?;
        let class = GestureClass::from_index(argmax(&p)).expect("index < NUM_CLASSES");
        Ok((class, p))
    }
}

pub fn logits(weights: &[f64], bias: &[f64; NUM_CLASSES], x: &[f64]) -> [f64; NUM_CLASSES] {
    let d = x.len();
    std::array::from_fn(|c| {
        bias[c]
            + weights[c * d..(c + 1) * d]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    })
}

pub fn softmax(z: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: [f64; NUM_CLASSES] = std::array::from_fn(|c| (z[c] - m).exp());
    let s: f64 = e.iter().sum();
    std::array::from_fn(|c| e[c] / s)
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over `xs` and its gradient with respect to the
/// weights and bias.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: &[f64; NUM_CLASSES],
    xs: &[Vec<f64>],
    ys: &[usize],
) -> (f64, Vec<f64>, [f64; NUM_CLASSES]) {
    let d = xs.first().map_or(0, Vec::len);
    let mut gw = vec![0.0; weights.len()];
    let mut gb = [0.0; NUM_CLASSES];
    let loss = accumulate(weights, bias, xs.iter().map(Vec::as_slice), ys, d, &mut gw, &mut gb);
    (loss, gw, gb)
}

fn accumulate<'a>(
    weights: &[f64],
    bias: &[f64; NUM_CLASSES],
    xs: impl Iterator<Item = &'a [f64]>,
    ys: &[usize],
    d: usize,
    gw: &mut [f64],
    gb: &mut [f64; NUM_CLASSES],
) -> f64 {
    gw.iter_mut().for_each(|g| *g = 0.0);
    *gb = [0.0; NUM_CLASSES];
    let mut loss = 0.0;
    let mut n = 0usize;
    for (x, &y) in xs.zip(ys) {
        let z = logits(weights, bias, x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[y];
        let p = softmax(&z);
        for c in 0..NUM_CLASSES {
            let r = p[c] - if c == y { 1.0 } else { 0.0 };
            gb[c] += r;
            for (g, v) in gw[c * d..(c + 1) * d].iter_mut().zip(x) {
                *g += r * v;
            }
        }
        n += 1;
    }
    let inv = 1.0 / n.max(1) as f64;
    gw.iter_mut().for_each(|g| *g *= inv);
    gb.iter_mut().for_each(|g| *g *= inv);
    loss * inv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean mini-batch loss per epoch.
    pub epoch_loss: Vec<f64>,
}

const SHUFFLE_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;

/// Fits the model on unstandardized features `xs` with labels `ys`.
pub fn train(
    xs: &[Vec<f64>],
    ys: &[GestureClass],
    feature_config: &FeatureConfig,
    config: &TrainConfig,
) -> Result<(ClassifierModel, TrainLog)> {
    config.validate()?;
    feature_config.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::dims(xs.len(), format!("{} labels", ys.len())));
    }
    let mut counts = [0usize; NUM_CLASSES];
    for y in ys {
        counts[y.index()] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Input(format!(
            "no training samples for class {}",
            GestureClass::ALL[c]
        )));
    }
    let d = feature_config.feature_len(config.window_len);
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::dims(d, x.len()));
    }

    let stats = Standardizer::fit(xs);
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| stats.apply(x)).collect();
    let labels: Vec<usize> = ys.iter().map(|y| y.index()).collect();

    let mut weights = vec![0.0; NUM_CLASSES * d];
    let mut bias = [0.0; NUM_CLASSES];
    let mut gw = vec![0.0; NUM_CLASSES * d];
    let mut gb = [0.0; NUM_CLASSES];

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);
    let keep = 1.0 - config.dropout_p;
    let scale = 1.0 / keep;

    let mut order: Vec<usize> = (0..zs.len()).collect();
    let mut batch_x: Vec<Vec<f64>> = Vec::with_capacity(config.batch_size);
    let mut batch_y: Vec<usize> = Vec::with_capacity(config.batch_size);
    let mut log = TrainLog {
        epoch_loss: Vec::with_capacity(config.epochs),
    };

    for epoch in 0..config.epochs {
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                let x = if config.dropout_p > 0.0 {
                    zs[i]
                        .iter()
                        .map(|&v| if dropout_rng.random::<f64>() < keep { v * scale } else { 0.0 })
                        .collect()
                } else {
                    zs[i].clone()
                };
                batch_x.push(x);
                batch_y.push(labels[i]);
            }
            let loss = accumulate(
                &weights,
                &bias,
                batch_x.iter().map(Vec::as_slice),
                &batch_y,
                d,
                &mut gw,
                &mut gb,
            );
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss,
                    detail: format!(
                        "batch {batches}, previous epoch loss {:?}",
                        log.epoch_loss.last()
                    ),
                });
            }
            for (w, g) in weights.iter_mut().zip(&gw) {
                *w -= config.learning_rate * g;
            }
            for (b, g) in bias.iter_mut().zip(&gb) {
                *b -= config.learning_rate * g;
            }
            epoch_loss += loss;
            batches += 1;
        }
        log.epoch_loss.push(epoch_loss / batches.max(1) as f64);
    }

    let model = ClassifierModel {
        feature_config: *feature_config,
        window_len: config.window_len,
        stats,
        weights,
        bias,
    };
    if !model.weights.iter().chain(&model.bias).all(|v| v.is_finite()) {
        return Err(Error::Diverged {
            epoch: config.epochs,
            loss: f64::NAN,
            detail: "non-finite parameters after training".into(),
        });
    }
    Ok((model, log))
}
