//! One-vs-rest linear SVM over pseudo-features of past classes and real
//! features of new classes.
//!
//! Each binary problem minimizes `0.5 |w|^2 + C * sum(max(0, 1 - y w.x)^2)`
//! where the bias is folded in as a constant input of 1 (and so is
//! regularized with the weights). It is solved in the dual by coordinate descent, in the manner of
//! LIBLINEAR's L2-loss dual solver, with a seeded shuffle per epoch.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::stats::{dot, norm};
use crate::{seed, ClassId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `C`: larger means weaker regularization.
    pub regularization: f64,
    /// Stop when the projected-gradient spread falls below this.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// L2-normalize every input row (training and prediction).
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regularization: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.regularization > 0.0 && self.regularization.is_finite())
            || !(self.tolerance > 0.0 && self.tolerance.is_finite())
            || self.max_epochs < 1
        {
            return Err(Error::InvalidParams(
                "regularization and tolerance must be positive, max_epochs at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Feature rows with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub features: FeatureMatrix,
    pub labels: Vec<ClassId>,
}

impl LabeledFeatures {
    pub fn new(dim: usize) -> Self {
        Self {
            features: FeatureMatrix::empty(dim),
            labels: Vec::new(),
        }
    }

    pub fn push_class(&mut self, class_id: ClassId, rows: &FeatureMatrix) -> Result<()> {
        self.features.append(rows)?;
        self.labels.extend(std::iter::repeat_n(class_id, rows.rows()));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Ascending.
    pub class_ids: Vec<ClassId>,
    /// One row per entry of `class_ids`.
    pub weights: FeatureMatrix,
    pub biases: Vec<f64>,
    pub normalize: bool,
}

fn normalized(row: &[f64]) -> Vec<f64> {
    let n = norm(row);
    if n > 0.0 {
        row.iter().map(|v| v / n).collect()
    } else {
        row.to_vec()
    }
}

fn prepare(features: &FeatureMatrix, normalize: bool) -> FeatureMatrix {
    if !normalize {
        return features.clone();
    }
    let mut out = FeatureMatrix::with_capacity(features.dim(), features.rows());
    for r in features.iter_rows() {
        out.push_row(&normalized(r)).expect("finite row stays finite");
    }
    out
}

/// Dual coordinate descent for one binary squared-hinge problem.
/// Returns `(w, b)`.
fn solve_binary(x: &FeatureMatrix, y: &[f64], sq_norms: &[f64], config: &TrainConfig, seed_: u64) -> (Vec<f64>, f64) {
    let n = y.len();
    let dim = x.dim();
    let diag = 0.5 / config.regularization;
    let qd: Vec<f64> = sq_norms.iter().map(|s| s + 1.0 + diag).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut index: Vec<usize> = (0..n).collect();
    let mut active = n;
    let mut pg_max_old = f64::INFINITY;
    let mut rng = seed::rng(seed_);

    for _ in 0..config.max_epochs {
        index[..active].shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        let mut s = 0;
        while s < active {
            let i = index[s];
            let xi = x.row(i);
            let g = y[i] * (dot(&w, xi) + b) - 1.0 + diag * alpha[i];
            let pg = if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                g.min(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).max(0.0);
                let d = (alpha[i] - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += d * xj;
                }
                b += d;
            }
            s += 1;
        }

        if pg_max - pg_min <= config.tolerance {
            if active == n {
                break;
            }
            active = n;
            pg_max_old = f64::INFINITY;
            continue;
        }
        // alpha has no upper bound, so only the lower side is ever shrunk
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
    }
    (w, b)
}

/// Trains one binary separator per distinct label.
pub fn train(samples: &LabeledFeatures, config: &TrainConfig, seed_: u64) -> Result<LinearModel> {
    config.validate()?;
    if samples.features.rows() != samples.labels.len() {
        return Err(Error::DimMismatch {
            expected: samples.features.rows(),
            got: samples.labels.len(),
        });
    }
    if samples.features.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut class_ids = samples.labels.clone();
    class_ids.sort_unstable();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(Error::NeedTwoClasses);
    }
    let x = prepare(&samples.features, config.normalize);
    let sq_norms: Vec<f64> = x.iter_rows().map(|r| dot(r, r)).collect();

    let solved: Vec<(Vec<f64>, f64)> = class_ids
        .par_iter()
        .map(|&c| {
            let y: Vec<f64> = samples
                .labels
                .iter()
                .map(|&l| if l == c { 1.0 } else { -1.0 })
                .collect();
            solve_binary(&x, &y, &sq_norms, config, seed::derive(seed_, &[c as u64]))
        })
        .collect();

    let mut weights = FeatureMatrix::with_capacity(x.dim(), class_ids.len());
    let mut biases = Vec::with_capacity(class_ids.len());
    for (w, b) in solved {
        weights.push_row(&w)?;
        biases.push(b);
    }
    Ok(LinearModel {
        class_ids,
        weights,
        biases,
        normalize: config.normalize,
    })
}

impl LinearModel {
    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn scores(&self, query: &[f64]) -> Vec<f64> {
        let q = if self.normalize {
            normalized(query)
        } else {
            query.to_vec()
        };
        self.weights
            .iter_rows()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, &q) + b)
            .collect()
    }
}

/// The `k` best-scoring labels per query, best first. Equal scores are
/// ordered by ascending class id.
pub fn predict_topk(model: &LinearModel, queries: &FeatureMatrix, k: usize) -> Result<Vec<Vec<ClassId>>> {
    if k < 1 || k > model.num_classes() {
        return Err(Error::InvalidK {
            k,
            classes: model.num_classes(),
        });
    }
    if queries.dim() != model.weights.dim() {
        return Err(Error::DimMismatch {
            expected: model.weights.dim(),
            got: queries.dim(),
        });
    }
    Ok(queries
        .iter_rows()
        .map(|q| {
            let scores = model.scores(q);
            let mut order: Vec<usize> = (0..scores.len()).collect();
            // class_ids ascending + stable sort keeps ties in id order
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            order.iter().take(k).map(|&i| model.class_ids[i]).collect()
        })
        .collect())
}

/// Fraction of rows whose label is among the top `k` predictions.
pub fn accuracy_topk(model: &LinearModel, test: &LabeledFeatures, k: usize) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptySet);
    }
    let preds = predict_topk(model, &test.features, k)?;
    let hits = preds.iter().zip(&test.labels).filter(|(p, l)| p.contains(l)).count();
    Ok(hits as f64 / test.len() as f64)
}

pub const MODEL_MAGIC: &[u8; 8] = b"FEATMODL";
pub const MODEL_VERSION: u16 = 1;

/// `FEATMODL`, u16 version, u16 flags (bit 0: normalize), u32 classes,
/// u32 dim, then per class u32 id, f64 bias, dim f64 weights; trailing
/// CRC-32 of everything before it. Little-endian throughout.
pub fn encode_model(model: &LinearModel) -> Vec<u8> {
    let dim = model.weights.dim();
    let mut buf = Vec::with_capacity(24 + model.num_classes() * (12 + 8 * dim));
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&u16::from(model.normalize).to_le_bytes());
    buf.extend_from_slice(&(model.num_classes() as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for (i, &c) in model.class_ids.iter().enumerate() {
        buf.extend_from_slice(&c.to_le_bytes());
        buf.extend_from_slice(&model.biases[i].to_le_bytes());
        for v in model.weights.row(i) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn decode_model(bytes: &[u8]) -> Result<LinearModel> {
    if bytes.len() < 8 || &bytes[..8] != MODEL_MAGIC {
        return Err(Error::Corrupt("not a model file".into()));
    }
    if bytes.len() < 24 {
        return Err(Error::Corrupt("model file too short".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(payload) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(Error::Corrupt("model crc mismatch".into()));
    }
    let u32_at = |p: usize| u32::from_le_bytes(payload[p..p + 4].try_into().unwrap()) as usize;
    let flags = u16::from_le_bytes([payload[10], payload[11]]);
    let classes = u32_at(12);
    let dim = u32_at(16);
    let record = 12 + 8 * dim;
    if dim == 0 || payload.len() != 20 + classes * record {
        return Err(Error::Corrupt("model size does not match header".into()));
    }
    let f64_at = |p: usize| f64::from_le_bytes(payload[p..p + 8].try_into().unwrap());
    let mut model = LinearModel {
        class_ids: Vec::with_capacity(classes),
        weights: FeatureMatrix::with_capacity(dim, classes),
        biases: Vec::with_capacity(classes),
        normalize: flags & 1 != 0,
    };
    for k in 0..classes {
        let base = 20 + k * record;
        model.class_ids.push(u32_at(base) as ClassId);
        model.biases.push(f64_at(base + 4));
        let w: Vec<f64> = (0..dim).map(|j| f64_at(base + 12 + 8 * j)).collect();
        model.weights.push_row(&w).map_err(|e| Error::Corrupt(e.to_string()))?;
    }
    Ok(model)
}

pub fn write_model(model: &LinearModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<LinearModel> {
    decode_model(&fs::read(path)?)
}
