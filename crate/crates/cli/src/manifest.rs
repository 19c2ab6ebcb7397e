//! Run manifest: everything a later `certify` needs to trace its numbers back
//! to a configuration, seeds and data hashes.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use advbound::data::{load_mnist_dir, make_pair, split, synth_2d, LabeledDataset, Splits};
use advbound::diffnet::Network;
use advbound::posterior::{read_posterior, GaussianPosterior};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig};
use crate::{io_at, CliError};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PRIOR_FILE: &str = "prior.post";
pub const POSTERIOR_FILE: &str = "posterior.post";
pub const TIMING_FILE: &str = "timing.json";

/// Stream-seed offset separating the synthetic test draw from the training draw.
const SYNTH_TEST_SEED_OFFSET: u64 = 0x7465_7374;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub size: usize,
    pub hash: String,
}

impl From<&LabeledDataset> for SplitRecord {
    fn from(d: &LabeledDataset) -> Self {
        Self { size: d.len(), hash: d.content_hash() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataRecord {
    pub source: DataSource,
    pub pair: Option<[u8; 2]>,
    /// `S'`, used to learn the candidate priors.
    pub prior: SplitRecord,
    /// `S`, used for prior selection, the posterior and the certificates.
    pub posterior: SplitRecord,
    /// `T`, perturbed at certification time.
    pub test: SplitRecord,
}

impl DataRecord {
    pub fn of(cfg: &RunConfig, splits: &Splits) -> Self {
        Self {
            source: cfg.data.source,
            pair: (cfg.data.source == DataSource::Mnist).then_some(cfg.data.pair),
            prior: (&splits.prior).into(),
            posterior: (&splits.posterior).into(),
            test: (&splits.test).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRecord {
    /// Number of candidate priors in the union bound.
    pub t_priors: usize,
    pub selected_epoch: usize,
    pub selection_scores: Vec<f64>,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub lambda: f64,
    pub kl: f64,
    pub c: Option<f64>,
    pub epoch_losses: Vec<f64>,
    pub checkpoint: PathBuf,
}

/// Which network each attack is aimed at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackTargets {
    pub training: String,
    pub evaluation: String,
}

impl Default for AttackTargets {
    fn default() -> Self {
        Self {
            training: "network sampled from the current posterior, one per batch".into(),
            evaluation: "network sampled from the selected prior".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    /// Full configuration with every default filled in.
    pub config: RunConfig,
    pub network_hash: String,
    pub n_params: usize,
    pub data: DataRecord,
    pub prior: PriorRecord,
    pub posterior: PosteriorRecord,
    pub attack_targets: AttackTargets,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self, CliError> {
        let path = run_dir.join(MANIFEST_FILE);
        let file = File::open(&path).map_err(io_at(&path))?;
        let manifest: RunManifest = serde_json::from_reader(BufReader::new(file))?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CliError::Config(format!("manifest schema {} is not {MANIFEST_SCHEMA_VERSION}", manifest.schema_version)));
        }
        Ok(manifest)
    }

    pub fn save(&self, run_dir: &Path) -> Result<(), CliError> {
        write_json(&run_dir.join(MANIFEST_FILE), self)
    }

    /// Reads a posterior file named in the manifest and checks it against the
    /// recorded network.
    pub fn read_distribution(&self, run_dir: &Path, file: &Path) -> Result<(Network, GaussianPosterior), CliError> {
        let path = run_dir.join(file);
        let f = File::open(&path).map_err(io_at(&path))?;
        let (net, post, _) = read_posterior(&mut BufReader::new(f))?;
        if crate::hex(&net.spec().hash()) != self.network_hash {
            return Err(CliError::Invariant(format!("{} was written for another network", path.display())));
        }
        Ok((net, post))
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_at(path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    use std::io::Write;
    out.write_all(b"\n").map_err(io_at(path))?;
    Ok(())
}

/// Loads the configured dataset and draws the three splits.
pub fn load_splits(cfg: &RunConfig) -> Result<Splits, CliError> {
    let d = &cfg.data;
    let (train, test) = match d.source {
        DataSource::Mnist => {
            let dir = d.mnist_dir();
            let (train, test) = load_mnist_dir(&dir).map_err(|e| {
                CliError::Io(format!("cannot load MNIST from {}: {e} (run `advbound prepare-data` first)", dir.display()))
            })?;
            (make_pair(&train, d.pair[0], d.pair[1], "mnist-train")?, make_pair(&test, d.pair[0], d.pair[1], "mnist-test")?)
        }
        DataSource::Synth2d => (
            synth_2d(d.prior + d.posterior, d.margin, d.noise, cfg.seed)?,
            synth_2d(d.test, d.margin, d.noise, cfg.seed ^ SYNTH_TEST_SEED_OFFSET)?,
        ),
    };
    Ok(split(&train, &test, d.sizes(), cfg.seed)?)
}

/// Fails with an invariant error when reloaded data no longer matches the manifest.
pub fn check_data(manifest: &RunManifest, splits: &Splits) -> Result<(), CliError> {
    let now = DataRecord::of(&manifest.config, splits);
    for (name, was, is) in [
        ("prior", &manifest.data.prior, &now.prior),
        ("posterior", &manifest.data.posterior, &now.posterior),
        ("test", &manifest.data.test, &now.test),
    ] {
        if was != is {
            return Err(CliError::Invariant(format!("{name} split changed since training: {was:?} vs {is:?}")));
        }
    }
    Ok(())
}
