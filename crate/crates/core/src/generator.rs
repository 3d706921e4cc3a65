//! Pseudo-feature generation by rigid translation.
//!
//! A feature `x` of a new class with centroid `mu_src` becomes a pseudo-feature
//! of a past class with centroid `mu_dst` as `x + (mu_dst - mu_src)`.
//! Several source classes are combined by pooling their translated samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::ClassId;

/// Where a pseudo-feature row came from: a row of a new class's training matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowOrigin {
    pub class_id: ClassId,
    pub row: usize,
}

/// Pseudo-features standing in for one past class.
///
/// `origins[i]` identifies the source row that produced `features.row(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSet {
    pub class_id: ClassId,
    pub features: FeatureMatrix,
    pub origins: Vec<RowOrigin>,
    pub strategy: String,
}

impl PseudoSet {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Source classes in order of first appearance, each with the source rows
    /// it contributed.
    pub fn provenance(&self) -> Vec<(ClassId, Vec<usize>)> {
        let mut out: Vec<(ClassId, Vec<usize>)> = Vec::new();
        for o in &self.origins {
            match out.iter_mut().find(|(c, _)| *c == o.class_id) {
                Some((_, rows)) => rows.push(o.row),
                None => out.push((o.class_id, vec![o.row])),
            }
        }
        out
    }

    pub fn source_classes(&self) -> Vec<ClassId> {
        self.provenance().into_iter().map(|(c, _)| c).collect()
    }
}

/// A new class offered as translation source.
#[derive(Debug, Clone, Copy)]
pub struct SourceView<'a> {
    pub class_id: ClassId,
    pub features: &'a FeatureMatrix,
    pub centroid: &'a [f64],
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimMismatch { expected, got });
    }
    Ok(())
}

/// Moves every row of `src` by `mu_dst - mu_src`.
pub fn translate(src: &FeatureMatrix, mu_src: &[f64], mu_dst: &[f64]) -> Result<FeatureMatrix> {
    check_dim(src.dim(), mu_src.len())?;
    check_dim(src.dim(), mu_dst.len())?;
    let offset: Vec<f64> = mu_dst.iter().zip(mu_src).map(|(d, s)| d - s).collect();
    let mut out = src.clone();
    out.shift_rows(&offset);
    Ok(out)
}

/// Translates the listed rows of one source toward `mu_dst`, recording origins.
pub fn translate_rows(
    source: &SourceView<'_>,
    rows: &[usize],
    mu_dst: &[f64],
    out: &mut FeatureMatrix,
    origins: &mut Vec<RowOrigin>,
) -> Result<()> {
    check_dim(source.features.dim(), source.centroid.len())?;
    check_dim(source.features.dim(), mu_dst.len())?;
    let offset: Vec<f64> = mu_dst.iter().zip(source.centroid).map(|(d, s)| d - s).collect();
    let mut buf = vec![0.0; offset.len()];
    for &r in rows {
        for ((b, x), o) in buf.iter_mut().zip(source.features.row(r)).zip(&offset) {
            *b = x + o;
        }
        out.push_row(&buf)?;
        origins.push(RowOrigin {
            class_id: source.class_id,
            row: r,
        });
    }
    Ok(())
}

/// Translates up to `s` rows (bank order) of each source toward `mu_dst` and
/// pools them: `sum_i min(s, rows_i)` pseudo-features of the original width.
pub fn generate_multi(
    target: ClassId,
    sources: &[SourceView<'_>],
    mu_dst: &[f64],
    s: usize,
    strategy: &str,
) -> Result<PseudoSet> {
    if sources.is_empty() {
        return Err(Error::NoSources);
    }
    let dim = mu_dst.len();
    let total: usize = sources.iter().map(|src| src.features.rows().min(s)).sum();
    let mut features = FeatureMatrix::with_capacity(dim, total);
    let mut origins = Vec::with_capacity(total);
    for src in sources {
        if src.features.is_empty() {
            return Err(Error::EmptyClass);
        }
        let take: Vec<usize> = (0..src.features.rows().min(s)).collect();
        translate_rows(src, &take, mu_dst, &mut features, &mut origins)?;
    }
    Ok(PseudoSet {
        class_id: target,
        features,
        origins,
        strategy: strategy.to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{centroid, cov_diagonal};
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn translate_basic() {
        let out = translate(&m(&[&[1.0, 2.0]]), &[1.0, 1.0], &[5.0, 5.0]).unwrap();
        assert_eq!(out.as_slice(), &[5.0, 6.0]);
        let src = m(&[&[1.5, -2.0], &[0.25, 8.0]]);
        assert_eq!(translate(&src, &[3.0, 4.0], &[3.0, 4.0]).unwrap(), src);
        assert!(matches!(
            translate(&src, &[1.0], &[1.0, 2.0]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn full_class_translation_lands_on_target_mean() {
        let src = m(&[&[1.0, 7.0, -3.0], &[2.5, 0.0, 4.0], &[-8.0, 1.0, 2.0]]);
        let mu_src = centroid(&src).unwrap();
        let dst = [100.0, -42.0, 0.5];
        let got = centroid(&translate(&src, &mu_src, &dst).unwrap()).unwrap();
        for j in 0..3 {
            assert!((got[j] - dst[j]).abs() <= 1e-10 * dst[j].abs().max(1.0));
        }
    }

    #[test]
    fn multi_unrolls_per_source() {
        let a = m(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]);
        let b = m(&[&[10.0, 0.0], &[11.0, 0.0], &[12.0, 0.0]]);
        let (ca, cb) = (centroid(&a).unwrap(), centroid(&b).unwrap());
        let dst = [5.0, 5.0];
        let sources = [
            SourceView {
                class_id: 1,
                features: &a,
                centroid: &ca,
            },
            SourceView {
                class_id: 2,
                features: &b,
                centroid: &cb,
            },
        ];
        let set = generate_multi(9, &sources, &dst, 3, "m2").unwrap();
        assert_eq!(set.len(), 6);
        for i in 0..6 {
            let (src, mu) = if i < 3 { (&a, &ca) } else { (&b, &cb) };
            let r = set.origins[i].row;
            for j in 0..2 {
                assert_eq!(set.features.row(i)[j], src.row(r)[j] + (dst[j] - mu[j]));
            }
        }
        assert_eq!(set.provenance(), vec![(1, vec![0, 1, 2]), (2, vec![0, 1, 2])]);

        let single = generate_multi(9, &sources[..1], &dst, 3, "kth").unwrap();
        let direct = translate(&a.head(3), &ca, &dst).unwrap();
        assert_eq!(single.features, direct);

        assert!(matches!(generate_multi(9, &[], &dst, 3, "x"), Err(Error::NoSources)));
    }

    #[test]
    fn multi_full_use_centroid_oracle() {
        let a = m(&[&[0.0, 2.0], &[4.0, 6.0]]);
        let b = m(&[&[10.0, 0.0], &[11.0, 3.0], &[15.0, 3.0]]);
        // deliberately use offsets from non-centroid anchors
        let (ca, cb) = ([1.0, 1.0], [12.0, 1.0]);
        let dst = [5.0, 5.0];
        let sources = [
            SourceView {
                class_id: 1,
                features: &a,
                centroid: &ca,
            },
            SourceView {
                class_id: 2,
                features: &b,
                centroid: &cb,
            },
        ];
        let set = generate_multi(0, &sources, &dst, 10, "m2").unwrap();
        assert_eq!(set.len(), 5);
        // direct recomputation: mean over all translated rows
        let mut expected = [0.0; 2];
        for (f, c) in [(&a, &ca), (&b, &cb)] {
            for r in f.iter_rows() {
                for j in 0..2 {
                    expected[j] += r[j] + dst[j] - c[j];
                }
            }
        }
        let got = centroid(&set.features).unwrap();
        for j in 0..2 {
            assert!((got[j] - expected[j] / 5.0).abs() < 1e-12);
        }
    }

    fn matrix_and_vectors() -> impl Strategy<Value = (FeatureMatrix, Vec<f64>, Vec<f64>)> {
        (1usize..20, 1usize..8).prop_flat_map(|(rows, dim)| {
            (
                proptest::collection::vec(-50.0f64..50.0, rows * dim)
                    .prop_map(move |d| FeatureMatrix::from_flat(dim, d).unwrap()),
                proptest::collection::vec(-50.0f64..50.0, dim),
                proptest::collection::vec(-50.0f64..50.0, dim),
            )
        })
    }

    proptest! {
        #[test]
        fn translation_preserves_dispersion((f, a, b) in matrix_and_vectors()) {
            let t = translate(&f, &a, &b).unwrap();
            let (v1, v2) = (cov_diagonal(&f).unwrap(), cov_diagonal(&t).unwrap());
            for j in 0..f.dim() {
                prop_assert!((v1[j] - v2[j]).abs() <= 1e-10 * v1[j].abs().max(1.0));
            }
        }

        #[test]
        fn translation_inverts((f, a, b) in matrix_and_vectors()) {
            let back = translate(&translate(&f, &a, &b).unwrap(), &b, &a).unwrap();
            for (x, y) in f.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0) * 100.0);
            }
        }

        #[test]
        fn multi_row_count(sizes in proptest::collection::vec(1usize..9, 1..5), s in 1usize..8) {
            let mats: Vec<FeatureMatrix> = sizes
                .iter()
                .map(|&n| FeatureMatrix::from_flat(2, (0..2 * n).map(|v| v as f64).collect()).unwrap())
                .collect();
            let cents: Vec<Vec<f64>> = mats.iter().map(|m| centroid(m).unwrap()).collect();
            let sources: Vec<SourceView> = mats
                .iter()
                .zip(&cents)
                .enumerate()
                .map(|(i, (f, c))| SourceView { class_id: i as ClassId, features: f, centroid: c })
                .collect();
            let set = generate_multi(99, &sources, &[0.0, 0.0], s, "m").unwrap();
            prop_assert_eq!(set.len(), sizes.iter().map(|&n| n.min(s)).sum::<usize>());
            prop_assert_eq!(set.origins.len(), set.len());
        }
    }
}
