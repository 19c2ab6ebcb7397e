//! `prepare-data`: copy MNIST IDX files (plain or gzipped) into the cache
//! directory after checking their digests.

use std::fs;
use std::io::Read;
use std::path::Path;

use advbound::data::{load_mnist_dir, MNIST_FILES};
use flate2::read::GzDecoder;
use sha2::{Digest, Sha256};

use crate::{hex, io_at, CliError};

/// SHA-256 of the decompressed reference files, in [`MNIST_FILES`] order.
pub const MNIST_SHA256: [&str; 4] = [
    "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedData {
    pub train_counts: [usize; 10],
    pub test_counts: [usize; 10],
}

impl PreparedData {
    /// Per-pair sizes `(train, test)` for digits `a` and `b`.
    pub fn pair_sizes(&self, a: u8, b: u8) -> (usize, usize) {
        let (a, b) = (a as usize, b as usize);
        (self.train_counts[a] + self.train_counts[b], self.test_counts[a] + self.test_counts[b])
    }
}

fn read_source(from: &Path, name: &str) -> Result<Vec<u8>, CliError> {
    let plain = from.join(name);
    if plain.is_file() {
        return fs::read(&plain).map_err(io_at(&plain));
    }
    let gz = from.join(format!("{name}.gz"));
    if gz.is_file() {
        let file = fs::File::open(&gz).map_err(io_at(&gz))?;
        let mut bytes = Vec::new();
        GzDecoder::new(file).read_to_end(&mut bytes).map_err(io_at(&gz))?;
        return Ok(bytes);
    }
    Err(CliError::Io(format!("neither {} nor {} exists", plain.display(), gz.display())))
}

/// Copies the four files from `from` to `to`. A digest mismatch is an error
/// unless `allow_unknown` is set.
pub fn cmd_prepare_data(from: &Path, to: &Path, allow_unknown: bool) -> Result<PreparedData, CliError> {
    fs::create_dir_all(to).map_err(io_at(to))?;
    for (name, expected) in MNIST_FILES.iter().zip(MNIST_SHA256) {
        let bytes = read_source(from, name)?;
        let digest = hex(&Sha256::digest(&bytes));
        if digest != expected {
            if !allow_unknown {
                return Err(CliError::Invariant(format!("{name}: SHA-256 {digest} differs from the reference {expected}")));
            }
            log::warn!("{name}: SHA-256 {digest} differs from the reference");
        }
        let dest = to.join(name);
        fs::write(&dest, &bytes).map_err(io_at(&dest))?;
    }
    let (train, test) = load_mnist_dir(to)?;
    let count = |labels: &[u8]| {
        let mut c = [0usize; 10];
        labels.iter().filter(|&&l| l < 10).for_each(|&l| c[l as usize] += 1);
        c
    };
    Ok(PreparedData { train_counts: count(&train.labels), test_counts: count(&test.labels) })
}
