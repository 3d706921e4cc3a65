//! Reference implementations shared by the integration and acceptance tests.
//! Written against plain `Vec<Vec<f64>>` so they share no code paths with the
//! engine beyond the arithmetic they must match bit for bit.

#![allow(dead_code)]

use featrans::{ClassId, FeatureMatrix};
use rand::Rng;

pub struct RefSource {
    pub class_id: ClassId,
    pub rows: Vec<Vec<f64>>,
    pub centroid: Vec<f64>,
}

pub fn to_matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows(rows).unwrap()
}

pub fn mean_of(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let mut m = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            m[j] += r[j];
        }
    }
    m.iter().map(|v| v / rows.len() as f64).collect()
}

/// Unbiased per-dimension variance, two-pass.
pub fn variances(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let m = mean_of(rows);
    (0..m.len())
        .map(|j| {
            if n < 2 {
                return 0.0;
            }
            rows.iter().map(|r| (r[j] - m[j]).powi(2)).sum::<f64>() / (n - 1) as f64
        })
        .collect()
}

pub fn variance_distance(rows: &[Vec<f64>], target: &[f64]) -> f64 {
    variances(rows)
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Greedy herding by enumeration: at step t, every unpicked candidate is
/// scored by the distance of the mean of the picks plus itself to `mu_p`,
/// and candidates are ordered by (distance, class_id, row).
pub fn herd_reference(mu_p: &[f64], sources: &[RefSource], s: usize) -> Vec<(ClassId, usize)> {
    let mut cands: Vec<(ClassId, usize, Vec<f64>)> = Vec::new();
    for src in sources {
        for (r, row) in src.rows.iter().enumerate() {
            let moved = row
                .iter()
                .zip(mu_p.iter().zip(&src.centroid))
                .map(|(x, (p, c))| x + (p - c))
                .collect();
            cands.push((src.class_id, r, moved));
        }
    }
    let mut picked: Vec<usize> = Vec::new();
    for t in 1..=s.min(cands.len()) {
        let mut scored: Vec<(f64, ClassId, usize, usize)> = Vec::new();
        for (i, (c, r, x)) in cands.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            let mut dist = 0.0;
            for j in 0..mu_p.len() {
                let mut acc = 0.0;
                for &p in &picked {
                    acc += cands[p].2[j];
                }
                let m = (acc + x[j]) / t as f64;
                dist += (m - mu_p[j]) * (m - mu_p[j]);
            }
            scored.push((dist, *c, *r, i));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        picked.push(scored[0].3);
    }
    picked.iter().map(|&i| (cands[i].0, cands[i].1)).collect()
}

pub fn random_rows(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

/// Small-integer rows, so duplicate rows and exact ties are common.
pub fn lattice_rows(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2i32..=2) as f64).collect())
        .collect()
}
