//! Which new-class features feed the translation for each past class.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{generate_multi, translate_rows, PseudoSet, RowOrigin, SourceView};
use crate::matrix::FeatureMatrix;
use crate::seed;
use crate::stats::{cosine_similarity, ClassPrototype};
use crate::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// All `s` features from the k-th most similar new class.
    Kth,
    /// `s` features drawn uniformly from every new class.
    Rand,
    /// `s` features chosen greedily so their mean tracks the past centroid.
    Herd,
    /// `s` features from each of the two most similar new classes.
    M2,
    /// `s` features from each of the three most similar new classes.
    M3,
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kth" => Self::Kth,
            "rand" => Self::Rand,
            "herd" => Self::Herd,
            "m2" => Self::M2,
            "m3" => Self::M3,
            other => return Err(Error::InvalidParams(format!("unknown strategy {other:?}"))),
        })
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Kth => "kth",
            Self::Rand => "rand",
            Self::Herd => "herd",
            Self::M2 => "m2",
            Self::M3 => "m3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Similarity rank used by [`StrategyKind::Kth`], 1-based.
    pub k: usize,
    /// Pseudo-features per past class.
    pub s: usize,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind, s: usize) -> Self {
        Self { kind, k: 1, s }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if self.s < 1 {
            return Err(Error::InvalidParams("s must be at least 1".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self.kind {
            StrategyKind::Kth => format!("kth{}", self.k),
            k => k.to_string(),
        }
    }
}

fn find<'s, 'a>(sources: &'s [SourceView<'a>], class_id: ClassId) -> Result<&'s SourceView<'a>> {
    sources
        .iter()
        .find(|v| v.class_id == class_id)
        .ok_or(Error::UnknownClass(class_id))
}

/// New classes ordered by decreasing cosine similarity of their centroid to
/// `mu_p`; equal similarities fall back to ascending class id.
pub fn rank_new_classes(mu_p: &[f64], new_classes: &[SourceView<'_>]) -> Result<Vec<ClassId>> {
    if new_classes.is_empty() {
        return Err(Error::NoSources);
    }
    let mut scored = new_classes
        .iter()
        .map(|v| Ok((cosine_similarity(mu_p, v.centroid)?, v.class_id)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().map(|(_, c)| c).collect())
}

/// The first `min(s, rows)` features of the `k`-th ranked class, translated.
pub fn select_kth(
    past: &ClassPrototype,
    ranked: &[ClassId],
    sources: &[SourceView<'_>],
    k: usize,
    s: usize,
) -> Result<PseudoSet> {
    if k == 0 || k > ranked.len() {
        return Err(Error::RankOutOfRange {
            rank: k,
            available: ranked.len(),
        });
    }
    let src = find(sources, ranked[k - 1])?;
    generate_multi(
        past.class_id,
        std::slice::from_ref(src),
        &past.centroid,
        s,
        &format!("kth{k}"),
    )
}

/// Every (class, row) pair of the new classes, ascending.
fn pool_index(sources: &[SourceView<'_>]) -> Vec<RowOrigin> {
    let mut ids: Vec<&SourceView> = sources.iter().collect();
    ids.sort_by_key(|v| v.class_id);
    ids.iter()
        .flat_map(|v| {
            (0..v.features.rows()).map(move |row| RowOrigin {
                class_id: v.class_id,
                row,
            })
        })
        .collect()
}

fn translate_picks(
    past: &ClassPrototype,
    sources: &[SourceView<'_>],
    picks: &[RowOrigin],
    label: &str,
) -> Result<PseudoSet> {
    let mut features = FeatureMatrix::with_capacity(past.dim(), picks.len());
    let mut origins = Vec::with_capacity(picks.len());
    for p in picks {
        translate_rows(
            find(sources, p.class_id)?,
            &[p.row],
            &past.centroid,
            &mut features,
            &mut origins,
        )?;
    }
    Ok(PseudoSet {
        class_id: past.class_id,
        features,
        origins,
        strategy: label.to_owned(),
    })
}

/// `s` rows drawn uniformly without replacement from the union of all new
/// classes, each translated by its own class centroid. When the pool holds
/// fewer than `s` rows, the whole pool is used once and the shortfall is
/// drawn with replacement.
pub fn select_rand(past: &ClassPrototype, sources: &[SourceView<'_>], s: usize, rng_seed: u64) -> Result<PseudoSet> {
    let pool = pool_index(sources);
    if pool.is_empty() {
        return Err(Error::NoSources);
    }
    let mut rng = seed::rng(rng_seed);
    let mut picks: Vec<RowOrigin> = index::sample(&mut rng, pool.len(), s.min(pool.len()))
        .into_iter()
        .map(|i| pool[i])
        .collect();
    while picks.len() < s {
        picks.push(pool[rng.random_range(0..pool.len())]);
    }
    translate_picks(past, sources, &picks, "rand")
}

/// Greedy herding over the translated pool: each step adds the candidate that
/// brings the running mean closest to the past centroid. Equal distances go to
/// the smallest `(class_id, row)`.
pub fn select_herd(past: &ClassPrototype, sources: &[SourceView<'_>], s: usize) -> Result<PseudoSet> {
    let pool = pool_index(sources);
    if pool.is_empty() {
        return Err(Error::NoSources);
    }
    let all = translate_picks(past, sources, &pool, "herd")?;
    let dim = past.dim();
    let target = &past.centroid;
    let mut taken = vec![false; pool.len()];
    let mut running = vec![0.0; dim];
    let mut order = Vec::with_capacity(s.min(pool.len()));
    for t in 1..=s.min(pool.len()) {
        let tf = t as f64;
        let mut best: Option<(f64, usize)> = None;
        for (i, row) in all.features.iter_rows().enumerate() {
            if taken[i] {
                continue;
            }
            let mut dist = 0.0;
            for j in 0..dim {
                let d = (running[j] + row[j]) / tf - target[j];
                dist += d * d;
            }
            // pool is sorted by (class_id, row), so strict < keeps the first tie
            if best.is_none_or(|(b, _)| dist.total_cmp(&b) == Ordering::Less) {
                best = Some((dist, i));
            }
        }
        let (_, i) = best.expect("pool has unpicked rows");
        taken[i] = true;
        for (r, v) in running.iter_mut().zip(all.features.row(i)) {
            *r += v;
        }
        order.push(i);
    }
    Ok(PseudoSet {
        class_id: past.class_id,
        features: all.features.select_rows(&order),
        origins: order.iter().map(|&i| all.origins[i]).collect(),
        strategy: "herd".into(),
    })
}

/// Pools `s` translated features from each of the `n_closest` top-ranked classes.
pub fn select_m(
    past: &ClassPrototype,
    ranked: &[ClassId],
    sources: &[SourceView<'_>],
    n_closest: usize,
    s: usize,
) -> Result<PseudoSet> {
    if n_closest == 0 || ranked.len() < n_closest {
        return Err(Error::RankOutOfRange {
            rank: n_closest,
            available: ranked.len(),
        });
    }
    let chosen = ranked[..n_closest]
        .iter()
        .map(|&c| find(sources, c).copied())
        .collect::<Result<Vec<_>>>()?;
    generate_multi(past.class_id, &chosen, &past.centroid, s, &format!("m{n_closest}"))
}

/// Runs one strategy for one past class. `rng_seed` is only consumed by
/// [`StrategyKind::Rand`].
pub fn select(
    spec: &StrategySpec,
    past: &ClassPrototype,
    sources: &[SourceView<'_>],
    rng_seed: u64,
) -> Result<PseudoSet> {
    spec.validate()?;
    match spec.kind {
        StrategyKind::Kth => {
            let ranked = rank_new_classes(&past.centroid, sources)?;
            select_kth(past, &ranked, sources, spec.k, spec.s)
        }
        StrategyKind::Rand => select_rand(past, sources, spec.s, rng_seed),
        StrategyKind::Herd => select_herd(past, sources, spec.s),
        StrategyKind::M2 | StrategyKind::M3 => {
            let n = if spec.kind == StrategyKind::M2 { 2 } else { 3 };
            let ranked = rank_new_classes(&past.centroid, sources)?;
            select_m(past, &ranked, sources, n, spec.s)
        }
    }
}
