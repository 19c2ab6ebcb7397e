//! `train`: both learning steps, with per-epoch checkpoints and a manifest.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use advbound::diffnet::{init_weights, write_checkpoint, Network, WeightVector};
use advbound::posterior::{write_posterior, GaussianPosterior};
use advbound::trainer::{train_posterior, train_prior};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::{
    load_splits, write_json, AttackTargets, DataRecord, PosteriorRecord, PriorRecord, RunManifest, MANIFEST_SCHEMA_VERSION,
    POSTERIOR_FILE, PRIOR_FILE, TIMING_FILE,
};
use crate::{hex, io_at, CliError};

const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Serialize)]
struct Timing {
    prior_seconds: f64,
    posterior_seconds: f64,
}

fn write_weights(path: &Path, net: &Network, w: &WeightVector) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_at(path))?;
    write_checkpoint(net, w, &mut BufWriter::new(file))?;
    Ok(())
}

fn write_distribution(path: &Path, net: &Network, post: &GaussianPosterior, seed: u64) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_at(path))?;
    write_posterior(net, post, seed, &mut BufWriter::new(file))?;
    Ok(())
}

/// Runs the prior and posterior steps and writes every artifact under
/// `cfg.output_dir`. Returns the manifest that was saved.
pub fn cmd_train(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let ckpt_dir = out.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir).map_err(io_at(&ckpt_dir))?;

    let splits = load_splits(cfg)?;
    let net = Network::new(cfg.network.spec(splits.prior.dim()))?;
    if net.input_len() != splits.prior.dim() {
        return Err(CliError::Config(format!(
            "network expects {} inputs but the data has {}",
            net.input_len(),
            splits.prior.dim()
        )));
    }
    log::info!(
        "data: |S'| = {}, |S| = {}, |T| = {}; network with {} weights",
        splits.prior.len(),
        splits.posterior.len(),
        splits.test.len(),
        net.n_params()
    );

    let mut write_err = None;
    let mut checkpoint = |stage: &str, t: usize, w: &WeightVector, value: f64| {
        log::info!("{stage} epoch {}: {value:.6}", t + 1);
        let path = ckpt_dir.join(format!("{stage}_epoch_{t:03}.ckpt"));
        if let Err(e) = write_weights(&path, &net, w) {
            write_err.get_or_insert(e);
        }
    };

    let start = Instant::now();
    let v0 = init_weights(&net, cfg.seed);
    let (prior, trace) = train_prior(&cfg.train, &net, &v0, &splits.prior, &splits.posterior, |t, v, s| checkpoint("prior", t, v, s))?;
    let prior_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let outcome = train_posterior(&cfg.train, &net, &prior, &splits.posterior, |t, w, l| checkpoint("posterior", t, w, l))?;
    let posterior_seconds = start.elapsed().as_secs_f64();
    if let Some(e) = write_err {
        return Err(e);
    }
    log::info!("selected prior epoch {}; KL(Q‖P) = {:.6}", trace.chosen + 1, outcome.kl);

    write_distribution(&out.join(PRIOR_FILE), &net, &prior, cfg.seed)?;
    write_distribution(&out.join(POSTERIOR_FILE), &net, &outcome.posterior, cfg.seed)?;

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        config: cfg.clone(),
        network_hash: hex(&net.spec().hash()),
        n_params: net.n_params(),
        data: DataRecord::of(cfg, &splits),
        prior: PriorRecord {
            t_priors: trace.scores.len(),
            selected_epoch: trace.chosen,
            selection_scores: trace.scores,
            checkpoint: PathBuf::from(PRIOR_FILE),
        },
        posterior: PosteriorRecord {
            lambda: outcome.posterior.lambda(),
            kl: outcome.kl,
            c: outcome.c,
            epoch_losses: outcome.epoch_losses,
            checkpoint: PathBuf::from(POSTERIOR_FILE),
        },
        attack_targets: AttackTargets::default(),
    };
    manifest.save(out)?;
    write_json(&out.join(TIMING_FILE), &Timing { prior_seconds, posterior_seconds })?;
    Ok(manifest)
}
