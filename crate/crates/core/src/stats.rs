//! Per-class summary statistics and the similarity measure used for ranking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bankio::BankAccess;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::ClassId;

/// The only thing kept about a class once its state has passed: its mean,
/// the diagonal of its covariance, and how many samples produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrototype {
    pub class_id: ClassId,
    pub centroid: Vec<f64>,
    pub cov_diag: Vec<f64>,
    pub count: usize,
}

impl ClassPrototype {
    pub fn from_features(class_id: ClassId, features: &FeatureMatrix) -> Result<Self> {
        Ok(Self {
            class_id,
            centroid: centroid(features)?,
            cov_diag: cov_diagonal(features)?,
            count: features.rows(),
        })
    }

    pub fn dim(&self) -> usize {
        self.centroid.len()
    }
}

/// Component-wise mean of the rows.
pub fn centroid(features: &FeatureMatrix) -> Result<Vec<f64>> {
    if features.is_empty() {
        return Err(Error::EmptyClass);
    }
    let mut sum = vec![0.0; features.dim()];
    for row in features.iter_rows() {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = features.rows() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Per-dimension sample variance (divisor `n - 1`), computed in two passes.
/// A single row yields zeros.
pub fn cov_diagonal(features: &FeatureMatrix) -> Result<Vec<f64>> {
    let mean = centroid(features)?;
    let n = features.rows();
    if n == 1 {
        return Ok(vec![0.0; features.dim()]);
    }
    let mut acc = vec![0.0; features.dim()];
    for row in features.iter_rows() {
        for ((a, v), m) in acc.iter_mut().zip(row).zip(&mean) {
            let d = v - m;
            *a += d * d;
        }
    }
    let denom = (n - 1) as f64;
    acc.iter_mut().for_each(|a| *a /= denom);
    Ok(acc)
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine of the angle between two non-zero vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// One prototype per requested class, built from the bank's training rows.
pub fn build_prototypes<B: BankAccess + ?Sized>(
    bank: &B,
    class_ids: &[ClassId],
) -> Result<BTreeMap<ClassId, ClassPrototype>> {
    class_ids
        .iter()
        .map(|&c| {
            let train = bank.train(c)?;
            Ok((c, ClassPrototype::from_features(c, train)?))
        })
        .collect()
}

/// Append-only prototype memory. A class is summarized once, when first
/// admitted; later admissions of the same id are rejected.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PrototypeStore {
    prototypes: BTreeMap<ClassId, ClassPrototype>,
}

impl PrototypeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn admit(&mut self, class_id: ClassId, features: &FeatureMatrix) -> Result<&ClassPrototype> {
        if self.prototypes.contains_key(&class_id) {
            return Err(Error::InvalidParams(format!(
                "class {class_id} already has a stored prototype"
            )));
        }
        let p = ClassPrototype::from_features(class_id, features)?;
        Ok(self.prototypes.entry(class_id).or_insert(p))
    }

    pub fn get(&self, class_id: ClassId) -> Result<&ClassPrototype> {
        self.prototypes.get(&class_id).ok_or(Error::UnknownClass(class_id))
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClassPrototype> {
        self.prototypes.values()
    }

    /// Count of stored scalars: `2d + 1` per class.
    pub fn stored_scalars(&self) -> usize {
        self.prototypes
            .values()
            .map(|p| p.centroid.len() + p.cov_diag.len() + 1)
            .sum()
    }
}
