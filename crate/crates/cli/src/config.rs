//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use advbound::attacks::{AttackConfig, AttackKind};
use advbound::data::SplitSizes;
use advbound::diffnet::NetworkSpec;
use advbound::posterior::DEFAULT_ENSEMBLE_SIZE;
use advbound::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the dataset cache directory.
pub const CACHE_ENV: &str = "ADVBOUND_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Mnist,
    Synth2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Directory with the IDX files; defaults to `$ADVBOUND_CACHE_DIR/mnist`
    /// or `data/mnist`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Digit mapped to `+1`, then digit mapped to `−1`.
    #[serde(default = "default_pair")]
    pub pair: [u8; 2],
    pub prior: usize,
    pub posterior: usize,
    pub test: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_pair() -> [u8; 2] {
    [1, 7]
}

fn default_margin() -> f64 {
    0.4
}

fn default_noise() -> f64 {
    0.1
}

impl DataConfig {
    pub fn sizes(&self) -> SplitSizes {
        SplitSizes { prior: self.prior, posterior: self.posterior, test: self.test }
    }

    pub fn mnist_dir(&self) -> PathBuf {
        if let Some(dir) = &self.dir {
            return dir.clone();
        }
        match std::env::var_os(CACHE_ENV) {
            Some(cache) => PathBuf::from(cache).join("mnist"),
            None => PathBuf::from("data/mnist"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// 784 → 128 → 1 perceptron.
    DeskMnist,
    /// Two conv/pool blocks and a 1024-unit dense layer.
    ConvMnist,
    /// Perceptron over the data dimension with `hidden` layers.
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub arch: Architecture,
    #[serde(default)]
    pub hidden: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { arch: Architecture::DeskMnist, hidden: Vec::new() }
    }
}

impl NetworkConfig {
    pub fn spec(&self, input_dim: usize) -> NetworkSpec {
        match self.arch {
            Architecture::DeskMnist => NetworkSpec::desk_mnist(),
            Architecture::ConvMnist => NetworkSpec::conv_mnist(),
            Architecture::Mlp => NetworkSpec::mlp(input_dim, &self.hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    /// Attack that builds the perturbed test set; `n_perturbations` is `n`.
    pub attack: AttackConfig,
    /// Ensemble size `N`.
    pub n_voters: usize,
    pub delta: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            attack: AttackConfig { n_perturbations: 50, ..AttackConfig::new(AttackKind::PgdU, 0.1) },
            n_voters: DEFAULT_ENSEMBLE_SIZE,
            delta: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!("schema_version {} is not {CONFIG_SCHEMA_VERSION}", self.schema_version));
        }
        let d = &self.data;
        if d.prior == 0 || d.posterior == 0 || d.test == 0 {
            return bad("data split sizes must be positive".into());
        }
        if d.pair[0] > 9 || d.pair[1] > 9 || d.pair[0] == d.pair[1] {
            return bad(format!("pair {:?} must name two different digits", d.pair));
        }
        if d.source == DataSource::Mnist && self.network.arch == Architecture::Mlp && self.network.hidden.is_empty() {
            log::warn!("a linear voter on MNIST; set network.hidden for a hidden layer");
        }
        if self.certify.n_voters == 0 {
            return bad("certify.n_voters must be positive".into());
        }
        if !(self.certify.delta > 0.0 && self.certify.delta < 1.0) {
            return bad("certify.delta must lie in (0, 1)".into());
        }
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.certify.attack.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
output_dir = "runs/x"
[data]
source = "synth2d"
prior = 40
posterior = 40
test = 20
[network]
arch = "mlp"
hidden = [4]
[train]
prior_epochs = 2
posterior_epochs = 2
[train.defense]
kind = "pgd_u"
budget = 0.05
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.data.pair, [1, 7]);
        assert_eq!(cfg.train.defense.kind, AttackKind::PgdU);
        assert_eq!(cfg.train.defense.iterations, 100);
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.certify.n_voters, DEFAULT_ENSEMBLE_SIZE);
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_zero_epochs_and_unknown_keys() {
        let zero = MINIMAL.replace("prior_epochs = 2", "prior_epochs = 0");
        assert!(matches!(RunConfig::from_toml(&zero), Err(CliError::Config(_))));
        let unknown = MINIMAL.replace("[data]", "[data]\nbogus = 3");
        assert!(matches!(RunConfig::from_toml(&unknown), Err(CliError::Config(_))));
        let version = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(RunConfig::from_toml(&version), Err(CliError::Config(_))));
    }
}
