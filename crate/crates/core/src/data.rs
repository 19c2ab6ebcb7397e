//! Datasets: MNIST IDX parsing, binary digit pairs, disjoint splits and a
//! synthetic two-blob task.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{contract, Error, Result};
use crate::rng;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Standard file names of the MNIST distribution.
pub const MNIST_FILES: [&str; 4] = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"];

/// Decoded IDX image/label pair with raw 8-bit pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Image `i` scaled into `[0, 1]`.
    pub fn image(&self, i: usize) -> Vec<f64> {
        let d = self.rows * self.cols;
        self.pixels[i * d..(i + 1) * d].iter().map(|&p| f64::from(p) / 255.0).collect()
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Parse { offset, msg: "truncated header".into() })
}

/// Parses an IDX3 image file and IDX1 label file.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<RawDataset> {
    let magic = be_u32(images, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Parse { offset: 0, msg: format!("image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}") });
    }
    let count = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    let needed = 16 + count * rows * cols;
    if images.len() < needed {
        return Err(Error::Parse { offset: images.len(), msg: format!("image payload truncated: {} of {needed} bytes", images.len()) });
    }

    let magic = be_u32(labels, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Parse { offset: 0, msg: format!("label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}") });
    }
    let label_count = be_u32(labels, 4)? as usize;
    if label_count != count {
        return Err(Error::Parse { offset: 4, msg: format!("{label_count} labels for {count} images") });
    }
    if labels.len() < 8 + count {
        return Err(Error::Parse { offset: labels.len(), msg: format!("label payload truncated: {} of {} bytes", labels.len(), 8 + count) });
    }
    Ok(RawDataset {
        rows,
        cols,
        pixels: images[16..needed].to_vec(),
        labels: labels[8..8 + count].to_vec(),
    })
}

/// Reads `(train, test)` from a directory holding the four uncompressed MNIST files.
pub fn load_mnist_dir(dir: &Path) -> Result<(RawDataset, RawDataset)> {
    let read = |name: &str| std::fs::read(dir.join(name));
    let train = parse_idx(&read(MNIST_FILES[0])?, &read(MNIST_FILES[1])?)?;
    let test = parse_idx(&read(MNIST_FILES[2])?, &read(MNIST_FILES[3])?)?;
    Ok((train, test))
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub pair: Option<(u8, u8)>,
    pub split: String,
    /// Hex SHA-256 over the example fingerprints, in order.
    pub hash: String,
}

/// Binary-labelled inputs in `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<i8>, source: &str) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape(format!("{} inputs for {} labels", inputs.len(), labels.len())));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
            return Err(contract(format!("label {i} is {}, expected ±1", labels[i])));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|x| x.len() != first.len()) {
                return Err(Error::Shape("inputs have different dimensions".into()));
            }
        }
        if inputs.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(contract("inputs must lie in [0, 1]"));
        }
        let mut ds = Self {
            inputs,
            labels,
            provenance: Provenance { source: source.into(), pair: None, split: "all".into(), hash: String::new() },
        };
        ds.provenance.hash = ds.content_hash();
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// SHA-256 of `(label, input bits)` for example `i`.
    pub fn fingerprint(&self, i: usize) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.labels[i].to_le_bytes());
        for v in &self.inputs[i] {
            h.update(v.to_le_bytes());
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for i in 0..self.len() {
            h.update(self.fingerprint(i));
        }
        hex(&h.finalize())
    }

    /// Examples at `indices`, in that order, tagged as `split`.
    pub fn subset(&self, indices: &[usize], split: &str) -> LabeledDataset {
        let mut ds = LabeledDataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: Provenance { split: split.into(), hash: String::new(), ..self.provenance.clone() },
        };
        ds.provenance.hash = ds.content_hash();
        ds
    }

    /// `true` when no example of `self` also appears in `other` (by content).
    pub fn is_disjoint_from(&self, other: &LabeledDataset) -> bool {
        let mine: HashSet<[u8; 32]> = (0..self.len()).map(|i| self.fingerprint(i)).collect();
        (0..other.len()).all(|i| !mine.contains(&other.fingerprint(i)))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Keeps digits `a` (label +1) and `b` (label −1), in file order.
pub fn make_pair(raw: &RawDataset, a: u8, b: u8, source: &str) -> Result<LabeledDataset> {
    if a == b {
        return Err(contract("a pair needs two different digits"));
    }
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (i, &l) in raw.labels.iter().enumerate() {
        if l == a || l == b {
            inputs.push(raw.image(i));
            labels.push(if l == a { 1 } else { -1 });
        }
    }
    let mut ds = LabeledDataset::new(inputs, labels, source)?;
    ds.provenance.pair = Some((a, b));
    Ok(ds)
}

/// Requested sizes of the prior set `S'`, the posterior set `S` and the test set `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub prior: usize,
    pub posterior: usize,
    pub test: usize,
}

impl SplitSizes {
    /// 1400 / 1000 / 400.
    pub fn desk() -> Self {
        Self { prior: 1400, posterior: 1000, test: 400 }
    }

    /// 7000 / 5000 / 2000.
    pub fn full() -> Self {
        Self { prior: 7000, posterior: 5000, test: 2000 }
    }
}

/// The three disjoint sets used by training and certification.
#[derive(Debug, Clone)]
pub struct Splits {
    /// `S'`, learns the prior.
    pub prior: LabeledDataset,
    /// `S`, learns the posterior and selects the prior.
    pub posterior: LabeledDataset,
    /// `T`, evaluation.
    pub test: LabeledDataset,
}

/// Seeded split of the training partition into `S` then `S'`; `T` is the
/// first `sizes.test` items of the test partition in file order.
pub fn split(train: &LabeledDataset, test: &LabeledDataset, sizes: SplitSizes, seed: u64) -> Result<Splits> {
    if sizes.prior + sizes.posterior > train.len() {
        return Err(contract(format!(
            "requested |S'| + |S| = {} but the training partition holds {}",
            sizes.prior + sizes.posterior,
            train.len()
        )));
    }
    if sizes.test > test.len() {
        log::warn!("test partition holds {} items, fewer than the requested {}; using all", test.len(), sizes.test);
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng::stream(seed, "split", 0));
    let mut post_idx = order[..sizes.posterior].to_vec();
    let mut prior_idx = order[sizes.posterior..sizes.posterior + sizes.prior].to_vec();
    post_idx.sort_unstable();
    prior_idx.sort_unstable();
    let test_idx: Vec<usize> = (0..sizes.test.min(test.len())).collect();
    let splits = Splits {
        prior: train.subset(&prior_idx, "prior"),
        posterior: train.subset(&post_idx, "posterior"),
        test: test.subset(&test_idx, "test"),
    };
    if !splits.prior.is_disjoint_from(&splits.posterior) {
        log::warn!("S and S' share identical images; the source holds duplicates");
    }
    Ok(splits)
}

/// Two Gaussian blobs in `[0,1]²` separated along the first axis.
///
/// Example `i` has label `+1` for even `i` (center `0.5 + margin/2`) and `−1`
/// for odd `i` (center `0.5 − margin/2`); coordinates are clamped to `[0,1]`.
pub fn synth_2d(m: usize, margin: f64, noise: f64, seed: u64) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&margin) || noise < 0.0 || !noise.is_finite() {
        return Err(contract("synth_2d needs margin in [0, 1] and finite noise >= 0"));
    }
    let mut rng = rng::stream(seed, "synth2d", 0);
    let gauss = Normal::new(0.0, noise).map_err(|e| contract(e.to_string()))?;
    let mut inputs = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        let cx = 0.5 + f64::from(y) * margin / 2.0;
        let x0 = (cx + gauss.sample(&mut rng)).clamp(0.0, 1.0);
        let x1 = (0.5 + gauss.sample(&mut rng)).clamp(0.0, 1.0);
        inputs.push(vec![x0, x1]);
        labels.push(y);
    }
    LabeledDataset::new(inputs, labels, "synth2d")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_pair(images: &[[u8; 9]], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend(IMAGE_MAGIC.to_be_bytes());
        img.extend((images.len() as u32).to_be_bytes());
        img.extend(3u32.to_be_bytes());
        img.extend(3u32.to_be_bytes());
        images.iter().for_each(|im| img.extend(im));
        let mut lab = Vec::new();
        lab.extend(LABEL_MAGIC.to_be_bytes());
        lab.extend((labels.len() as u32).to_be_bytes());
        lab.extend(labels);
        (img, lab)
    }

    #[test]
    fn parses_hand_built_files() {
        let (img, lab) = idx_pair(&[[0, 255, 51, 0, 0, 0, 0, 0, 102], [255; 9]], &[7, 1]);
        let raw = parse_idx(&img, &lab).unwrap();
        assert_eq!((raw.rows, raw.cols, raw.len()), (3, 3, 2));
        assert_eq!(raw.image(0), vec![0.0, 1.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.4]);
        assert_eq!(raw.image(1), vec![1.0; 9]);
        let pair = make_pair(&raw, 1, 7, "fixture").unwrap();
        assert_eq!(pair.labels, vec![-1, 1]);
        assert_eq!(pair.provenance.pair, Some((1, 7)));
    }

    #[test]
    fn rejects_bad_headers() {
        let (img, lab) = idx_pair(&[[0; 9]], &[3]);
        let mut bad = img.clone();
        bad[3] = 0x01;
        assert!(matches!(parse_idx(&bad, &lab), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(parse_idx(&img[..20], &lab), Err(Error::Parse { offset: 20, .. })));
        let (_, two_labels) = idx_pair(&[], &[3, 4]);
        assert!(matches!(parse_idx(&img, &two_labels), Err(Error::Parse { offset: 4, .. })));
        assert!(matches!(parse_idx(&img, &lab[..8]), Err(Error::Parse { offset: 8, .. })));
        assert!(matches!(parse_idx(&img[..6], &lab), Err(Error::Parse { .. })));
    }

    #[test]
    fn swapping_the_pair_negates_labels() {
        let (img, lab) = idx_pair(&[[1; 9], [2; 9], [3; 9], [4; 9]], &[1, 7, 3, 1]);
        let raw = parse_idx(&img, &lab).unwrap();
        let a = make_pair(&raw, 1, 7, "f").unwrap();
        let b = make_pair(&raw, 7, 1, "f").unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.inputs, b.inputs);
        assert!(a.labels.iter().zip(&b.labels).all(|(x, y)| *x == -*y));
    }

    #[test]
    fn dataset_validation() {
        assert!(LabeledDataset::new(vec![vec![0.5]], vec![0], "t").is_err());
        assert!(LabeledDataset::new(vec![vec![1.5]], vec![1], "t").is_err());
        assert!(LabeledDataset::new(vec![vec![0.5], vec![0.1, 0.2]], vec![1, 1], "t").is_err());
        assert!(LabeledDataset::new(vec![vec![0.5]], vec![1, -1], "t").is_err());
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = synth_2d(20, 0.4, 0.05, 1).unwrap();
        let b = synth_2d(20, 0.4, 0.05, 1).unwrap();
        assert_eq!(a.provenance.hash, b.provenance.hash);
        let c = synth_2d(20, 0.4, 0.05, 2).unwrap();
        assert_ne!(a.provenance.hash, c.provenance.hash);
    }

    #[test]
    fn splits_are_disjoint_and_seeded() {
        let train = synth_2d(100, 0.4, 0.1, 1).unwrap();
        let test = synth_2d(30, 0.4, 0.1, 2).unwrap();
        let sizes = SplitSizes { prior: 40, posterior: 50, test: 20 };
        let s = split(&train, &test, sizes, 9).unwrap();
        assert_eq!((s.prior.len(), s.posterior.len(), s.test.len()), (40, 50, 20));
        assert!(s.prior.is_disjoint_from(&s.posterior));
        assert_eq!(s.test.inputs[..], test.inputs[..20]);
        let again = split(&train, &test, sizes, 9).unwrap();
        assert_eq!(s.posterior.provenance.hash, again.posterior.provenance.hash);
        assert_eq!(s.prior.provenance.hash, again.prior.provenance.hash);
        let other = split(&train, &test, sizes, 10).unwrap();
        assert_ne!(s.posterior.provenance.hash, other.posterior.provenance.hash);
    }

    #[test]
    fn oversized_split_is_an_error() {
        let train = synth_2d(10, 0.4, 0.1, 1).unwrap();
        let sizes = SplitSizes { prior: 6, posterior: 5, test: 1 };
        assert!(matches!(split(&train, &train, sizes, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn desk_sizes_keep_full_ratios() {
        let (d, f) = (SplitSizes::desk(), SplitSizes::full());
        let ratio = |a: usize, b: usize| a as f64 / b as f64;
        assert!((ratio(d.prior, d.posterior) / ratio(f.prior, f.posterior) - 1.0).abs() < 0.01);
        assert!((ratio(d.test, d.posterior) / ratio(f.test, f.posterior) - 1.0).abs() < 0.01);
    }

    #[test]
    fn synthetic_task_properties() {
        let ds = synth_2d(101, 0.6, 0.0, 3).unwrap();
        let positives = ds.labels.iter().filter(|&&y| y == 1).count();
        assert!((positives as f64 - 50.5).abs() <= 1.0);
        // Noise-free blobs are separated by x0 = 0.5.
        assert!(ds.inputs.iter().zip(&ds.labels).all(|(x, &y)| (x[0] - 0.5) * f64::from(y) > 0.0));
        assert!(ds.inputs.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }
}
