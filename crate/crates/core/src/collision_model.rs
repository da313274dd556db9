//! Learned collision classifier: dataset generation, training, thresholded
//! metrics with ROC, and edge prediction.
//!
//! Inputs are the joint angles followed by the obstacle's corner
//! coordinates `[xmin, xmax, ymin, ymax]`, standardized per feature with
//! statistics from the training split. The network outputs a logit; the
//! collision probability is its sigmoid.

use std::io::{Read, Write};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmModel, JointConfig};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::geom::{self, Aabb};
use crate::nn::{Activation, Adam, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionSample {
    pub q: JointConfig,
    pub obstacle: Aabb,
    pub label: bool,
}

impl CollisionSample {
    pub fn features(&self) -> Vec<f64> {
        features(&self.q, &self.obstacle)
    }
}

fn features(q: &JointConfig, obstacle: &Aabb) -> Vec<f64> {
    let mut f = q.angles().to_vec();
    f.extend_from_slice(&obstacle.to_features());
    f
}

/// `n` samples with uniform joint angles and obstacle centers uniform in the
/// configured region, labeled by exact geometry.
pub fn generate_dataset<R: Rng + ?Sized>(cfg: &EnvConfig, n: usize, rng: &mut R) -> Vec<CollisionSample> {
    let arm = cfg.arm();
    let region = cfg.obstacle_region;
    (0..n)
        .map(|_| {
            let q = arm.random_config(rng);
            let c = [
                rng.random_range(region.min[0]..=region.max[0]),
                rng.random_range(region.min[1]..=region.max[1]),
            ];
            let obstacle = Aabb::from_center(c, cfg.obstacle_size);
            let label = geom::config_in_collision(&arm, &q, &obstacle, cfg.inflate);
            CollisionSample { q, obstacle, label }
        })
        .collect()
}

/// First 90% for training, the rest for testing.
pub fn split(data: &[CollisionSample]) -> (&[CollisionSample], &[CollisionSample]) {
    data.split_at(data.len() * 9 / 10)
}

pub fn write_dataset_csv<W: Write>(out: W, data: &[CollisionSample]) -> Result<()> {
    let n = data.first().map_or(0, |s| s.q.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    header.extend(["xmin", "xmax", "ymin", "ymax", "label"].map(String::from));
    w.write_record(&header)?;
    for s in data {
        let mut rec: Vec<String> = s.features().iter().map(|v| format!("{v:?}")).collect();
        rec.push(u8::from(s.label).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<CollisionSample>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < 6 || header[header.len() - 5..] != ["xmin", "xmax", "ymin", "ymax", "label"] {
        return Err(Error::Parse("expected columns q0.., xmin, xmax, ymin, ymax, label".into()));
    }
    let n = header.len() - 5;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |m: &str| Error::Parse(format!("row {}: {m}", i + 1));
        let v: Vec<f64> = rec
            .iter()
            .take(n + 4)
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("non-numeric field"))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad("non-finite value"));
        }
        let obstacle = Aabb {
            min: [v[n], v[n + 2]],
            max: [v[n + 1], v[n + 3]],
        };
        if !obstacle.is_valid() {
            return Err(bad("obstacle min exceeds max"));
        }
        let label = match rec.get(n + 4).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(bad("label must be 0 or 1")),
        };
        out.push(CollisionSample {
            q: JointConfig::new(v[..n].to_vec()),
            obstacle,
            label,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierHyper {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation-loss improvement.
    pub patience: usize,
    /// Learning-rate factor applied after each epoch without improvement.
    pub lr_decay: f64,
    /// Fraction of the training split held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        ClassifierHyper {
            hidden: vec![512, 256, 64],
            lr: 1e-3,
            batch: 128,
            max_epochs: 40,
            patience: 6,
            lr_decay: 0.5,
            validation_fraction: 0.1,
        }
    }
}

impl ClassifierHyper {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionClassifier {
    pub net: Mlp,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy on logits and its gradient with respect to them.
pub fn bce_with_logits(z: &[f64], y: &[bool]) -> (f64, Vec<f64>) {
    let b = z.len() as f64;
    let mut loss = 0.0;
    let mut g = Vec::with_capacity(z.len());
    for (&z, &y) in z.iter().zip(y) {
        let t = f64::from(u8::from(y));
        loss += softplus(z) - t * z;
        g.push((sigmoid(z) - t) / b);
    }
    (loss / b, g)
}

impl CollisionClassifier {
    fn standardize(&self, rows: &[Vec<f64>]) -> Array2<f64> {
        let w = self.mean.len();
        Array2::from_shape_fn((rows.len(), w), |(i, j)| (rows[i][j] - self.mean[j]) / self.std[j])
    }

    pub fn logits(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        self.net.forward(self.standardize(rows).view()).column(0).to_vec()
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        self.logits(rows).into_iter().map(sigmoid).collect()
    }

    pub fn predict(&self, q: &JointConfig, obstacle: &Aabb) -> f64 {
        self.predict_batch(&[features(q, obstacle)])[0]
    }

    /// Collision probability of the joint-space edge: the maximum over the
    /// subdivision interpolants, endpoints included.
    pub fn predict_edge(&self, qa: &JointConfig, qb: &JointConfig, obstacle: &Aabb, step_size: f64) -> f64 {
        let rows: Vec<Vec<f64>> = geom::interpolate(qa, qb, step_size)
            .iter()
            .map(|q| features(q, obstacle))
            .collect();
        self.predict_batch(&rows).into_iter().fold(0.0, f64::max)
    }

    /// Mean cross-entropy over `data`.
    pub fn loss(&self, data: &[CollisionSample]) -> f64 {
        let rows: Vec<Vec<f64>> = data.iter().map(CollisionSample::features).collect();
        let y: Vec<bool> = data.iter().map(|s| s.label).collect();
        let mut total = 0.0;
        for (r, l) in rows.chunks(4096).zip(y.chunks(4096)) {
            total += bce_with_logits(&self.logits(r), l).0 * r.len() as f64;
        }
        total / data.len().max(1) as f64
    }

    /// Binary format: magic, version, feature count, mean and std as
    /// little-endian f64, then the network's own encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CLS_MAGIC);
        out.extend_from_slice(&CLS_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.mean.len() as u32).to_le_bytes());
        for v in self.mean.iter().chain(&self.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.net.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("collision model: {m}"));
        if bytes.len() < 16 || &bytes[..8] != CLS_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CLS_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        if n == 0 || n > 1024 {
            return Err(bad("implausible feature count"));
        }
        let stats_end = 16 + 16 * n;
        if bytes.len() < stats_end {
            return Err(bad("truncated statistics"));
        }
        let vals: Vec<f64> = bytes[16..stats_end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (mean, std) = vals.split_at(n);
        if mean.iter().any(|v| !v.is_finite()) || std.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(bad("invalid standardization statistics"));
        }
        let net = Mlp::from_bytes(&bytes[stats_end..])?;
        if net.input_dim() != n || net.output_dim() != 1 {
            return Err(bad("network shape does not match features"));
        }
        Ok(CollisionClassifier {
            net,
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }
}

const CLS_MAGIC: &[u8; 8] = b"SILPCOL\0";
const CLS_VERSION: u32 = 1;

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

/// Mini-batch Adam on cross-entropy with early stopping on a validation
/// slice carved from the end of `data`. The learning rate shrinks after each
/// epoch that does not improve the validation loss. Returns the best model
/// seen.
pub fn train<R: Rng + ?Sized>(
    data: &[CollisionSample],
    hyper: &ClassifierHyper,
    rng: &mut R,
) -> Result<(CollisionClassifier, Vec<EpochLoss>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("collision model training"));
    }
    if hyper.batch == 0
        || !(hyper.lr > 0.0)
        || !(hyper.lr_decay > 0.0 && hyper.lr_decay <= 1.0)
        || !(0.0..1.0).contains(&hyper.validation_fraction)
    {
        return Err(Error::Config("invalid classifier hyperparameters".into()));
    }
    let n_val = ((data.len() as f64 * hyper.validation_fraction) as usize).min(data.len() - 1);
    let (fit, val) = data.split_at(data.len() - n_val);
    let rows: Vec<Vec<f64>> = fit.iter().map(CollisionSample::features).collect();
    let width = rows[0].len();
    let mut mean = vec![0.0; width];
    let mut std = vec![0.0; width];
    for r in &rows {
        for j in 0..width {
            mean[j] += r[j] / rows.len() as f64;
        }
    }
    for r in &rows {
        for j in 0..width {
            std[j] += (r[j] - mean[j]).powi(2) / rows.len() as f64;
        }
    }
    // constant features keep unit scale
    let std: Vec<f64> = std.into_iter().map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 }).collect();

    let mut sizes = vec![width];
    sizes.extend_from_slice(&hyper.hidden);
    sizes.push(1);
    let mut model = CollisionClassifier {
        net: Mlp::new(&sizes, Activation::Tanh, Activation::Identity, rng),
        mean,
        std,
    };
    let x = model.standardize(&rows);
    let y: Vec<bool> = fit.iter().map(|s| s.label).collect();
    let mut opt = Adam::new(&model.net, hyper.lr);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, model.clone());
    let mut since_best = 0;
    for epoch in 1..=hyper.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(hyper.batch) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<bool> = chunk.iter().map(|&i| y[i]).collect();
            let cache = model.net.forward_cached(xb.view());
            let z: Vec<f64> = cache.output().column(0).to_vec();
            let (loss, g) = bce_with_logits(&z, &yb);
            if !loss.is_finite() {
                return Err(Error::Training(format!("collision model loss became {loss} in epoch {epoch}")));
            }
            total += loss * chunk.len() as f64;
            let g = Array2::from_shape_vec((chunk.len(), 1), g).expect("column");
            let (grads, _) = model.net.backward(&cache, &g);
            opt.step(&mut model.net, &grads);
        }
        let train_loss = total / rows.len() as f64;
        let validation_loss = if val.is_empty() { train_loss } else { model.loss(val) };
        log::info!("collision model epoch {epoch}: train {train_loss:.5} validation {validation_loss:.5}");
        history.push(EpochLoss {
            epoch,
            train_loss,
            validation_loss,
        });
        if validation_loss < best.0 {
            best = (validation_loss, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            opt.lr *= hyper.lr_decay;
            if since_best >= hyper.patience {
                break;
            }
        }
    }
    Ok((best.1, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub threshold: f64,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub specificity: f64,
    /// `(fpr, tpr)` pairs sorted by false-positive rate.
    pub roc: Vec<(f64, f64)>,
    pub auc: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Metrics of probabilities `p` against labels. A sample is predicted
/// positive when `p >= threshold`. Ratios with an empty denominator are 0.
pub fn metrics_from_scores(p: &[f64], y: &[bool], threshold: f64) -> ClassifierMetrics {
    let confusion = |t: f64| {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&p, &y) in p.iter().zip(y) {
            match (p >= t, y) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        (tp, fp, tn, fn_)
    };
    let (tp, fp, tn, fn_) = confusion(threshold);
    let mut roc: Vec<(f64, f64)> = (0..=100)
        .map(|k| {
            let (tp, fp, tn, fn_) = confusion(k as f64 / 100.0);
            (ratio(fp, fp + tn), ratio(tp, tp + fn_))
        })
        .collect();
    // a threshold above every score
    roc.push((0.0, 0.0));
    roc.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    ClassifierMetrics {
        threshold,
        accuracy: ratio(tp + tn, p.len()),
        recall: ratio(tp, tp + fn_),
        precision: ratio(tp, tp + fp),
        specificity: ratio(tn, tn + fp),
        roc,
        auc: auc(p, y),
    }
}

/// Area under the ROC curve as the probability that a random positive
/// scores above a random negative (ties count one half).
pub fn auc(p: &[f64], y: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let (mut rank_sum, mut i) = (0.0, 0);
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && p[idx[j + 1]] == p[idx[i]] {
            j += 1;
        }
        // average 1-based rank of the tie group
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            if y[k] {
                rank_sum += r;
            }
        }
        i = j + 1;
    }
    let pos = y.iter().filter(|&&b| b).count() as f64;
    let neg = y.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return 0.5;
    }
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

pub fn evaluate(model: &CollisionClassifier, test: &[CollisionSample], threshold: f64) -> ClassifierMetrics {
    let rows: Vec<Vec<f64>> = test.iter().map(CollisionSample::features).collect();
    let p = model.predict_batch(&rows);
    let y: Vec<bool> = test.iter().map(|s| s.label).collect();
    metrics_from_scores(&p, &y, threshold)
}

/// Exact-geometry edge check, for comparison with [`CollisionClassifier::predict_edge`].
pub fn exact_edge_collides(arm: &ArmModel, qa: &JointConfig, qb: &JointConfig, obstacle: &Aabb, inflate: f64, step: f64) -> bool {
    !geom::edge_collision_free(arm, qa, qb, obstacle, inflate, step)
}
