//! Feature banks: the engine's only input data.
//!
//! On disk a bank is a single little-endian binary file:
//!
//! ```text
//! magic      8 bytes  "FEATBANK"
//! version    u16      1
//! flags      u16      bit 0: metadata section follows the class records
//! classes    u32
//! dim        u32
//! per class, ascending id, two records (train then test):
//!   class_id u32, split_tag u8 (0 train, 1 test), row_count u32,
//!   row_count * dim f32
//! [metadata] u32 count, then per string: u32 byte length, UTF-8 bytes
//! crc32      u32      IEEE CRC-32 of every preceding byte
//! ```
//!
//! CSV fixtures (`class_id,split,f_0,...,f_{d-1}`) can be imported with
//! [`read_csv`].

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::{seed, ClassId};

pub const MAGIC: &[u8; 8] = b"FEATBANK";
pub const VERSION: u16 = 1;
const FLAG_METADATA: u16 = 1;

pub const SPLIT_TRAIN: u8 = 0;
pub const SPLIT_TEST: u8 = 1;

/// Train and test rows of one class. They are never merged.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSplit {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    dim: usize,
    classes: BTreeMap<ClassId, ClassSplit>,
    pub source_meta: Vec<String>,
}

/// Read access to per-class features.
///
/// The incremental protocol only talks to banks through this trait, which
/// lets tests audit exactly which training rows are touched and when.
pub trait BankAccess {
    fn dim(&self) -> usize;
    fn class_ids(&self) -> Vec<ClassId>;
    fn train(&self, class_id: ClassId) -> Result<&FeatureMatrix>;
    fn test(&self, class_id: ClassId) -> Result<&FeatureMatrix>;
}

impl FeatureBank {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            classes: BTreeMap::new(),
            source_meta: Vec::new(),
        }
    }

    pub fn insert(&mut self, class_id: ClassId, split: ClassSplit) -> Result<()> {
        for m in [&split.train, &split.test] {
            if m.dim() != self.dim {
                return Err(Error::DimMismatch {
                    expected: self.dim,
                    got: m.dim(),
                });
            }
        }
        if split.train.is_empty() {
            return Err(Error::EmptyClass);
        }
        if self.classes.insert(class_id, split).is_some() {
            return Err(Error::InvalidParams(format!("duplicate class {class_id}")));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> impl Iterator<Item = (ClassId, &ClassSplit)> {
        self.classes.iter().map(|(c, s)| (*c, s))
    }

    pub fn split(&self, class_id: ClassId) -> Result<&ClassSplit> {
        self.classes.get(&class_id).ok_or(Error::UnknownClass(class_id))
    }
}

impl BankAccess for FeatureBank {
    fn dim(&self) -> usize {
        self.dim
    }

    fn class_ids(&self) -> Vec<ClassId> {
        self.classes.keys().copied().collect()
    }

    fn train(&self, class_id: ClassId) -> Result<&FeatureMatrix> {
        Ok(&self.split(class_id)?.train)
    }

    fn test(&self, class_id: ClassId) -> Result<&FeatureMatrix> {
        Ok(&self.split(class_id)?.test)
    }
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn to_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidParams(format!("{what} exceeds u32")))
}

/// Serializes a bank to bytes. Values are narrowed to `f32`.
pub fn encode_bank(bank: &FeatureBank) -> Result<Vec<u8>> {
    let rows: usize = bank.classes.values().map(|s| s.train.rows() + s.test.rows()).sum();
    let mut buf = Vec::with_capacity(24 + rows * bank.dim * 4 + bank.classes.len() * 18);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let flags = if bank.source_meta.is_empty() { 0 } else { FLAG_METADATA };
    buf.extend_from_slice(&flags.to_le_bytes());
    push_u32(&mut buf, to_u32(bank.classes.len(), "class count")?);
    push_u32(&mut buf, to_u32(bank.dim, "dimension")?);
    for (&class_id, split) in &bank.classes {
        for (tag, m) in [(SPLIT_TRAIN, &split.train), (SPLIT_TEST, &split.test)] {
            push_u32(&mut buf, class_id);
            buf.push(tag);
            push_u32(&mut buf, to_u32(m.rows(), "row count")?);
            for &v in m.as_slice() {
                let narrowed = v as f32;
                if !narrowed.is_finite() {
                    return Err(Error::NonFinite);
                }
                buf.extend_from_slice(&narrowed.to_le_bytes());
            }
        }
    }
    if flags & FLAG_METADATA != 0 {
        push_u32(&mut buf, to_u32(bank.source_meta.len(), "metadata count")?);
        for s in &bank.source_meta {
            push_u32(&mut buf, to_u32(s.len(), "metadata length")?);
            buf.extend_from_slice(s.as_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    push_u32(&mut buf, crc);
    Ok(buf)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses a bank from bytes. Either the whole bank is returned or an error;
/// no partial result escapes.
pub fn decode_bank(bytes: &[u8]) -> Result<FeatureBank> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::NotABank);
    }
    let mut cur = Cursor {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let version = cur.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes.len() < 8 + 2 + 2 + 4 + 4 + 4 {
        return Err(Error::Corrupt("file too short".into()));
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let actual = crc32fast::hash(payload);
    if stored != actual {
        return Err(Error::Corrupt(format!(
            "crc mismatch: stored {stored:08x}, computed {actual:08x}"
        )));
    }
    let mut cur = Cursor {
        buf: payload,
        pos: cur.pos,
    };
    let flags = cur.u16()?;
    if flags & !FLAG_METADATA != 0 {
        return Err(Error::Corrupt(format!("unknown flags {flags:#06x}")));
    }
    let class_count = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    if dim == 0 {
        return Err(Error::Corrupt("zero dimension".into()));
    }
    let mut bank = FeatureBank::new(dim);
    for _ in 0..class_count {
        let mut blocks = [None, None];
        for expected_tag in [SPLIT_TRAIN, SPLIT_TEST] {
            let class_id = cur.u32()?;
            let tag = cur.u8()?;
            if tag != expected_tag {
                return Err(Error::Corrupt(format!(
                    "class {class_id}: split tag {tag}, expected {expected_tag}"
                )));
            }
            let rows = cur.u32()? as usize;
            let len = rows
                .checked_mul(dim)
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::Corrupt("row count overflow".into()))?;
            let raw = cur.take(len)?;
            let data: Vec<f64> = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect();
            let m =
                FeatureMatrix::from_flat(dim, data).map_err(|e| Error::Corrupt(format!("class {class_id}: {e}")))?;
            blocks[expected_tag as usize] = Some((class_id, m));
        }
        let (train_id, train) = blocks[0].take().unwrap();
        let (test_id, test) = blocks[1].take().unwrap();
        if train_id != test_id {
            return Err(Error::Corrupt(format!(
                "train block for class {train_id} followed by test block for {test_id}"
            )));
        }
        bank.insert(train_id, ClassSplit { train, test })
            .map_err(|e| Error::Corrupt(format!("class {train_id}: {e}")))?;
    }
    if flags & FLAG_METADATA != 0 {
        let n = cur.u32()? as usize;
        for _ in 0..n {
            let len = cur.u32()? as usize;
            let s = std::str::from_utf8(cur.take(len)?).map_err(|_| Error::Corrupt("metadata is not UTF-8".into()))?;
            bank.source_meta.push(s.to_owned());
        }
    }
    if cur.pos != payload.len() {
        return Err(Error::Corrupt(format!("{} trailing bytes", payload.len() - cur.pos)));
    }
    Ok(bank)
}

pub fn write_bank(bank: &FeatureBank, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_bank(bank)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn read_bank(path: impl AsRef<Path>) -> Result<FeatureBank> {
    decode_bank(&fs::read(path)?)
}

/// Imports a CSV fixture with header `class_id,split,f_0,...,f_{d-1}`.
/// `split` is `train`/`test` (or `0`/`1`).
pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureBank> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if headers.len() < 3 || &headers[0] != "class_id" || &headers[1] != "split" {
        return Err(Error::Csv(
            "header must start with class_id,split followed by f_0..f_{d-1}".into(),
        ));
    }
    for (j, h) in headers.iter().skip(2).enumerate() {
        if h != format!("f_{j}") {
            return Err(Error::Csv(format!("column {} should be f_{j}, found {h}", j + 2)));
        }
    }
    let dim = headers.len() - 2;
    let mut parts: BTreeMap<ClassId, [Vec<f64>; 2]> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let ctx = |msg: String| Error::Csv(format!("record {}: {msg}", line + 1));
        let class_id: ClassId = record[0]
            .trim()
            .parse()
            .map_err(|_| ctx(format!("bad class id {:?}", &record[0])))?;
        let split = match record[1].trim() {
            "train" | "0" => 0,
            "test" | "1" => 1,
            other => return Err(ctx(format!("bad split {other:?}"))),
        };
        let slot = &mut parts.entry(class_id).or_default()[split];
        for v in record.iter().skip(2) {
            let x: f64 = v.trim().parse().map_err(|_| ctx(format!("bad value {v:?}")))?;
            slot.push(x);
        }
    }
    let mut bank = FeatureBank::new(dim);
    for (class_id, [train, test]) in parts {
        bank.insert(
            class_id,
            ClassSplit {
                train: FeatureMatrix::from_flat(dim, train)?,
                test: FeatureMatrix::from_flat(dim, test)?,
            },
        )?;
    }
    Ok(bank)
}

/// Parameters of a synthetic Gaussian-cluster bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Centroids are uniform in `[-centroid_scale, centroid_scale]^dim`.
    pub centroid_scale: f64,
    /// Isotropic per-class noise standard deviation.
    pub noise_sigma: f64,
    /// Optional per-dimension variance multipliers, shared by all classes.
    #[serde(default)]
    pub anisotropy: Option<Vec<f64>>,
    /// Per-class, per-dimension variance multipliers `exp(u)`,
    /// `u ~ U[-spread, spread]`. Zero gives every class the same covariance.
    #[serde(default)]
    pub class_variance_spread: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_owned()));
        if self.num_classes < 1 || self.dim < 1 || self.train_per_class < 1 || self.test_per_class < 1 {
            return bad("all counts must be at least 1");
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be positive");
        }
        if !(self.centroid_scale >= 0.0 && self.centroid_scale.is_finite()) {
            return bad("centroid_scale must be non-negative");
        }
        if !(self.class_variance_spread >= 0.0 && self.class_variance_spread.is_finite()) {
            return bad("class_variance_spread must be non-negative");
        }
        if let Some(a) = &self.anisotropy {
            if a.len() != self.dim {
                return bad("anisotropy must have one entry per dimension");
            }
            if a.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("anisotropy entries must be positive");
            }
        }
        Ok(())
    }

    /// True centroid and per-dimension variance of `class_id`.
    pub fn class_truth(&self, class_id: ClassId) -> (Vec<f64>, Vec<f64>) {
        let mut rng = seed::rng(seed::derive(self.seed, &[class_id as u64]));
        let centroid: Vec<f64> = (0..self.dim)
            .map(|_| {
                if self.centroid_scale == 0.0 {
                    0.0
                } else {
                    rng.random_range(-self.centroid_scale..=self.centroid_scale)
                }
            })
            .collect();
        let var = (0..self.dim)
            .map(|j| {
                let shared = self.anisotropy.as_ref().map_or(1.0, |a| a[j]);
                let own = if self.class_variance_spread > 0.0 {
                    rng.random_range(-self.class_variance_spread..=self.class_variance_spread)
                        .exp()
                } else {
                    1.0
                };
                self.noise_sigma * self.noise_sigma * shared * own
            })
            .collect();
        (centroid, var)
    }
}

/// Draws a bank of Gaussian clusters. Class ids are `0..num_classes`.
/// Values are rounded to `f32` so the bank round-trips through the file
/// format unchanged.
pub fn synth_generate(spec: &SyntheticSpec) -> Result<FeatureBank> {
    spec.validate()?;
    let mut bank = FeatureBank::new(spec.dim);
    bank.source_meta.push(format!(
        "synthetic: {}",
        serde_json::to_string(spec).expect("spec serializes")
    ));
    for c in 0..spec.num_classes {
        let class_id = c as ClassId;
        let (centroid, var) = spec.class_truth(class_id);
        let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let mut rng = seed::rng(seed::derive(spec.seed, &[class_id as u64, 1]));
        let mut draw = |n: usize| {
            let mut data = Vec::with_capacity(n * spec.dim);
            for _ in 0..n {
                for j in 0..spec.dim {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push((centroid[j] + sd[j] * z) as f32 as f64);
                }
            }
            FeatureMatrix::from_flat(spec.dim, data)
        };
        let train = draw(spec.train_per_class)?;
        let test = draw(spec.test_per_class)?;
        bank.insert(class_id, ClassSplit { train, test })?;
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{centroid, cov_diagonal};

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 4,
            dim: 5,
            train_per_class: 200,
            test_per_class: 20,
            centroid_scale: 10.0,
            noise_sigma: 1.5,
            anisotropy: Some(vec![1.0, 2.0, 0.5, 1.0, 3.0]),
            class_variance_spread: 0.0,
            seed: 42,
        }
    }

    #[test]
    fn crc_reference_vector() {
        assert_eq!(crc32fast::hash(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut bank = synth_generate(&spec()).unwrap();
        bank.source_meta.push("second line".into());
        let bytes = encode_bank(&bank).unwrap();
        assert_eq!(decode_bank(&bytes).unwrap(), bank);
        assert_eq!(encode_bank(&decode_bank(&bytes).unwrap()).unwrap(), bytes);
    }

    #[test]
    fn error_contracts() {
        let bank = synth_generate(&spec()).unwrap();
        let bytes = encode_bank(&bank).unwrap();

        assert!(matches!(decode_bank(b"NOTABANK...."), Err(Error::NotABank)));
        assert!(matches!(decode_bank(&bytes[..3]), Err(Error::NotABank)));

        for cut in [10, 24, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(decode_bank(&bytes[..cut]), Err(Error::Corrupt(_))),
                "cut {cut}"
            );
        }

        let mut flipped = bytes.clone();
        flipped[100] ^= 0x01;
        assert!(matches!(decode_bank(&flipped), Err(Error::Corrupt(_))));

        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(decode_bank(&v2), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn train_and_test_stay_apart() {
        let bank = synth_generate(&spec()).unwrap();
        let back = decode_bank(&encode_bank(&bank).unwrap()).unwrap();
        for (_, s) in back.classes() {
            assert_eq!(s.train.rows(), 200);
            assert_eq!(s.test.rows(), 20);
        }
    }

    #[test]
    fn synth_is_deterministic() {
        assert_eq!(synth_generate(&spec()).unwrap(), synth_generate(&spec()).unwrap());
        let mut other = spec();
        other.seed = 43;
        assert_ne!(synth_generate(&spec()).unwrap(), synth_generate(&other).unwrap());
    }

    #[test]
    fn synth_centroids_within_clt_bound() {
        let s = spec();
        let bank = synth_generate(&s).unwrap();
        for (c, split) in bank.classes() {
            let (mu, var) = s.class_truth(c);
            let got = centroid(&split.train).unwrap();
            let n = split.train.rows() as f64;
            for j in 0..s.dim {
                assert!((got[j] - mu[j]).abs() <= 4.0 * var[j].sqrt() / n.sqrt());
            }
        }
    }

    #[test]
    fn synth_variances_within_thirty_percent() {
        let mut s = spec();
        s.class_variance_spread = 0.7;
        let bank = synth_generate(&s).unwrap();
        for (c, split) in bank.classes() {
            let (_, var) = s.class_truth(c);
            let got = cov_diagonal(&split.train).unwrap();
            for j in 0..s.dim {
                assert!((got[j] / var[j] - 1.0).abs() < 0.3, "class {c} dim {j}");
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = spec();
        s.noise_sigma = 0.0;
        assert!(synth_generate(&s).is_err());
        let mut s = spec();
        s.anisotropy = Some(vec![1.0]);
        assert!(synth_generate(&s).is_err());
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.csv");
        fs::write(
            &path,
            "class_id,split,f_0,f_1\n3,train,1,2\n3,train,3,4\n3,test,2,3\n7,train,0,0\n",
        )
        .unwrap();
        let bank = read_csv(&path).unwrap();
        assert_eq!(bank.dim(), 2);
        assert_eq!(bank.class_ids(), vec![3, 7]);
        assert_eq!(bank.train(3).unwrap().rows(), 2);
        assert_eq!(bank.test(3).unwrap().row(0), &[2.0, 3.0]);
        assert!(bank.test(7).unwrap().is_empty());

        fs::write(&path, "class_id,split,f_0\n1,valid,1\n").unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Csv(_))));
        fs::write(&path, "id,split,f_0\n").unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Csv(_))));
    }
}
