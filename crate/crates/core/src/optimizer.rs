//! Hill climbing over pseudo-feature sets.
//!
//! A candidate set is scored by the Euclidean distance between its
//! per-dimension variances and the variances stored for the past class when
//! it was first seen. Proposals replace `replace_cnt` rows of the current set
//! with rows of a feature pool and are kept only on strict improvement.
//!
//! Proposals are scored from running per-dimension sums of anchored values
//! and squares, so one proposal costs `O(replace_cnt * d)`. The sums are
//! rebuilt from the rows every [`REFRESH_EVERY`] accepted swaps.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{translate_rows, PseudoSet, SourceView};
use crate::matrix::FeatureMatrix;
use crate::seed;
use crate::selection::{rank_new_classes, select_m};
use crate::stats::{centroid, cov_diagonal, ClassPrototype};

pub const REFRESH_EVERY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HillClimbParams {
    pub max_iter: usize,
    pub replace_cnt: usize,
    pub patience: usize,
    pub seed: u64,
}

impl HillClimbParams {
    /// 1000 iterations, patience 50, and `max(1, s / 50)` rows per proposal.
    pub fn defaults_for(s: usize, seed: u64) -> Self {
        Self {
            max_iter: 1000,
            replace_cnt: (s / 50).max(1),
            patience: 50,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerVariant {
    /// Pool: the unused rows of the initial set's source classes.
    #[serde(rename = "single")]
    Single,
    /// Pool: `s` rows from every new class except the initial set's primary
    /// source, the class that contributed the most rows (lowest id on ties).
    #[serde(rename = "multi")]
    Multi,
    /// As `Multi`, re-centering the set on the past centroid after every
    /// accepted proposal.
    #[serde(rename = "shift")]
    Shift,
    /// Initial set from the two closest classes; pool is that same set.
    #[serde(rename = "m2opt")]
    M2Opt,
    #[serde(rename = "m3opt")]
    M3Opt,
    /// Initial set from the two closest classes; pool holds `s` rows of
    /// every new class.
    #[serde(rename = "M2opt")]
    M2OptWide,
    #[serde(rename = "M3opt")]
    M3OptWide,
}

impl OptimizerVariant {
    pub const ALL: [Self; 7] = [
        Self::Single,
        Self::Multi,
        Self::Shift,
        Self::M2Opt,
        Self::M3Opt,
        Self::M2OptWide,
        Self::M3OptWide,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Multi => "multi",
            Self::Shift => "shift",
            Self::M2Opt => "m2opt",
            Self::M3Opt => "m3opt",
            Self::M2OptWide => "M2opt",
            Self::M3OptWide => "M3opt",
        }
    }

    /// Number of closest classes that seed the initial set, for the variants
    /// that build their own.
    pub fn pooled_sources(&self) -> Option<usize> {
        match self {
            Self::M2Opt | Self::M2OptWide => Some(2),
            Self::M3Opt | Self::M3OptWide => Some(3),
            _ => None,
        }
    }

    pub fn recalibrates(&self) -> bool {
        matches!(self, Self::Shift)
    }
}

impl FromStr for OptimizerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown optimizer variant {s:?}")))
    }
}

impl fmt::Display for OptimizerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One adopted proposal: `replaced[i]` of the set took `inserted[i]` of the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedSwap {
    pub iteration: usize,
    pub replaced: Vec<usize>,
    pub inserted: Vec<usize>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimbTrace {
    pub class_id: crate::ClassId,
    pub initial_distance: f64,
    pub iterations: usize,
    pub accepted: usize,
    /// Objective after each adopted proposal; strictly decreasing.
    pub distances: Vec<f64>,
    pub swaps: Vec<AcceptedSwap>,
}

impl ClimbTrace {
    pub fn final_distance(&self) -> f64 {
        self.distances.last().copied().unwrap_or(self.initial_distance)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimMismatch { expected, got });
    }
    Ok(())
}

/// `|| cov_diagonal(candidate) - d_actual ||_2`
pub fn objective(candidate: &FeatureMatrix, d_actual: &[f64]) -> Result<f64> {
    check_dim(candidate.dim(), d_actual.len())?;
    let diag = cov_diagonal(candidate)?;
    Ok(diag
        .iter()
        .zip(d_actual)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Per-dimension sums of `x - anchor` and `(x - anchor)^2` over a set.
struct Moments {
    n: f64,
    anchor: Vec<f64>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Moments {
    fn new(set: &FeatureMatrix, anchor: Vec<f64>) -> Self {
        let mut m = Self {
            n: set.rows() as f64,
            sum: vec![0.0; anchor.len()],
            sumsq: vec![0.0; anchor.len()],
            anchor,
        };
        m.rebuild(set);
        m
    }

    fn rebuild(&mut self, set: &FeatureMatrix) {
        self.sum.iter_mut().for_each(|v| *v = 0.0);
        self.sumsq.iter_mut().for_each(|v| *v = 0.0);
        for row in set.iter_rows() {
            for (j, (x, a)) in row.iter().zip(&self.anchor).enumerate() {
                let d = x - a;
                self.sum[j] += d;
                self.sumsq[j] += d * d;
            }
        }
    }

    fn distance(&self, sum: &[f64], sumsq: &[f64], target: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for j in 0..target.len() {
            let var = if n > 1.0 {
                ((sumsq[j] - sum[j] * sum[j] / n) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            let d = var - target[j];
            acc += d * d;
        }
        acc.sqrt()
    }

    fn current(&self, target: &[f64]) -> f64 {
        self.distance(&self.sum, &self.sumsq, target)
    }
}

/// Refines `initial` toward the variance profile `d_actual` by swapping rows
/// in from `pool`.
///
/// With `recalibrate`, every accepted proposal is followed by a rigid shift of
/// the whole set that puts its mean back on `mu_p`.
pub fn hill_climb(
    initial: &PseudoSet,
    pool: &PseudoSet,
    d_actual: &[f64],
    params: &HillClimbParams,
    recalibrate: bool,
    mu_p: &[f64],
) -> Result<(PseudoSet, ClimbTrace)> {
    let dim = initial.features.dim();
    check_dim(dim, d_actual.len())?;
    check_dim(dim, mu_p.len())?;
    check_dim(dim, pool.features.dim())?;
    if initial.is_empty() {
        return Err(Error::EmptyClass);
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool(initial.class_id));
    }
    if params.max_iter < 1 || params.patience < 1 || params.replace_cnt < 1 {
        return Err(Error::InvalidParams(
            "max_iter, patience and replace_cnt must all be at least 1".into(),
        ));
    }
    if params.replace_cnt > initial.len().min(pool.len()) {
        return Err(Error::InvalidParams(format!(
            "replace_cnt {} exceeds set size {} or pool size {}",
            params.replace_cnt,
            initial.len(),
            pool.len()
        )));
    }

    let mut current = initial.clone();
    let mut moments = Moments::new(&current.features, centroid(&current.features)?);
    let mut curr_dist = moments.current(d_actual);
    let mut trace = ClimbTrace {
        class_id: initial.class_id,
        initial_distance: curr_dist,
        iterations: 0,
        accepted: 0,
        distances: Vec::new(),
        swaps: Vec::new(),
    };

    let mut rng = seed::rng(params.seed);
    let rc = params.replace_cnt;
    let mut prop_sum = vec![0.0; dim];
    let mut prop_sumsq = vec![0.0; dim];
    let mut no_improve = 0;
    let mut since_refresh = 0;

    while trace.iterations < params.max_iter && no_improve < params.patience {
        let replaced: Vec<usize> = index::sample(&mut rng, current.len(), rc).into_vec();
        let inserted: Vec<usize> = index::sample(&mut rng, pool.len(), rc).into_vec();

        for j in 0..dim {
            let a = moments.anchor[j];
            // differences first: a swap with an identical row leaves the sums untouched
            let (mut ds, mut dsq) = (0.0, 0.0);
            for (&r, &e) in replaced.iter().zip(&inserted) {
                let out = current.features.row(r)[j] - a;
                let inn = pool.features.row(e)[j] - a;
                ds += inn - out;
                dsq += inn * inn - out * out;
            }
            prop_sum[j] = moments.sum[j] + ds;
            prop_sumsq[j] = moments.sumsq[j] + dsq;
        }
        let new_dist = moments.distance(&prop_sum, &prop_sumsq, d_actual);

        if new_dist < curr_dist {
            for (&r, &e) in replaced.iter().zip(&inserted) {
                current.features.row_mut(r).copy_from_slice(pool.features.row(e));
                current.origins[r] = pool.origins[e];
            }
            std::mem::swap(&mut moments.sum, &mut prop_sum);
            std::mem::swap(&mut moments.sumsq, &mut prop_sumsq);
            curr_dist = new_dist;
            since_refresh += 1;

            if recalibrate {
                let mean = centroid(&current.features)?;
                let offset: Vec<f64> = mu_p.iter().zip(&mean).map(|(p, m)| p - m).collect();
                current.features.shift_rows(&offset);
                moments.rebuild(&current.features);
                curr_dist = moments.current(d_actual);
                since_refresh = 0;
            } else if since_refresh >= REFRESH_EVERY {
                moments.rebuild(&current.features);
                curr_dist = moments.current(d_actual);
                since_refresh = 0;
            }

            trace.accepted += 1;
            trace.distances.push(curr_dist);
            trace.swaps.push(AcceptedSwap {
                iteration: trace.iterations,
                replaced,
                inserted,
                distance: curr_dist,
            });
            no_improve = 0;
        } else {
            no_improve += 1;
        }
        trace.iterations += 1;
    }
    Ok((current, trace))
}

fn translated_head(
    past: &ClassPrototype,
    src: &SourceView<'_>,
    rows: impl IntoIterator<Item = usize>,
    out: &mut PseudoSet,
) -> Result<()> {
    let rows: Vec<usize> = rows.into_iter().collect();
    translate_rows(src, &rows, &past.centroid, &mut out.features, &mut out.origins)
}

/// The replacement pool for `variant`, given the initial set.
pub fn build_pool(
    variant: OptimizerVariant,
    past: &ClassPrototype,
    initial: &PseudoSet,
    sources: &[SourceView<'_>],
    s: usize,
) -> Result<PseudoSet> {
    let mut pool = PseudoSet {
        class_id: past.class_id,
        features: FeatureMatrix::with_capacity(past.dim(), s),
        origins: Vec::new(),
        strategy: format!("pool:{variant}"),
    };
    let mut by_id: Vec<&SourceView> = sources.iter().collect();
    by_id.sort_by_key(|v| v.class_id);
    let used = initial.provenance();
    match variant {
        OptimizerVariant::Single => {
            for (class_id, rows) in &used {
                let src = by_id
                    .iter()
                    .find(|v| v.class_id == *class_id)
                    .ok_or(Error::UnknownClass(*class_id))?;
                let leftover = (0..src.features.rows()).filter(|r| !rows.contains(r));
                translated_head(past, src, leftover, &mut pool)?;
            }
        }
        OptimizerVariant::Multi | OptimizerVariant::Shift => {
            let primary = used
                .iter()
                .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
                .map(|(c, _)| *c);
            for src in by_id.iter().filter(|v| Some(v.class_id) != primary) {
                translated_head(past, src, 0..src.features.rows().min(s), &mut pool)?;
            }
        }
        OptimizerVariant::M2Opt | OptimizerVariant::M3Opt => {
            pool.features = initial.features.clone();
            pool.origins = initial.origins.clone();
        }
        OptimizerVariant::M2OptWide | OptimizerVariant::M3OptWide => {
            for src in &by_id {
                translated_head(past, src, 0..src.features.rows().min(s), &mut pool)?;
            }
        }
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool(past.class_id));
    }
    Ok(pool)
}

/// Builds the initial set for `variant`, its pool, and climbs.
///
/// `single`, `multi` and `shift` start from `strategy_output`; the pooled
/// variants start from the two or three closest new classes regardless.
/// The target variances are the ones stored in `past`.
pub fn optimize_class(
    variant: OptimizerVariant,
    past: &ClassPrototype,
    strategy_output: Option<PseudoSet>,
    sources: &[SourceView<'_>],
    s: usize,
    params: &HillClimbParams,
) -> Result<(PseudoSet, ClimbTrace)> {
    let initial = match variant.pooled_sources() {
        Some(n) => {
            let ranked = rank_new_classes(&past.centroid, sources)?;
            select_m(past, &ranked, sources, n, s)?
        }
        None => {
            strategy_output.ok_or_else(|| Error::InvalidParams(format!("variant {variant} needs a strategy output")))?
        }
    };
    let pool = build_pool(variant, past, &initial, sources, s)?;
    let (mut set, trace) = hill_climb(
        &initial,
        &pool,
        &past.cov_diag,
        params,
        variant.recalibrates(),
        &past.centroid,
    )?;
    set.strategy = variant.name().to_owned();
    Ok((set, trace))
}
