//! `certify`: perturb the test set, evaluate the ensemble and emit bounds.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use advbound::attacks::{
    attack_target_for_eval, build_perturbation_set, quantize_sample, write_perturbation_stream, AttackConfig, AttackKind,
    PerturbedSample,
};
use advbound::bounds::{BoundReport, ReportSeeds};
use advbound::posterior::{kl_gaussians, VoterEnsemble};
use advbound::risks::ScoreTable;
use advbound::rng;
use rayon::prelude::*;

use crate::manifest::{check_data, load_splits, write_json, RunManifest};
use crate::{io_at, CliError};

pub const CERTIFY_DIR: &str = "certify";
/// Relative slack allowed between the recorded and the recomputed KL.
const KL_RECHECK_TOL: f64 = 1e-12;

/// Command-line overrides of the `[certify]` table.
#[derive(Debug, Clone, Default)]
pub struct CertifyOptions {
    pub attack: Option<AttackKind>,
    pub budget: Option<f64>,
    pub n_perturbations: Option<usize>,
    pub n_voters: Option<usize>,
    pub attack_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct CertifyOutput {
    pub report: BoundReport,
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
    pub perturbations_path: PathBuf,
}

/// Stem shared by the files of one certification, e.g. `pgd_u_b0.1_n50_N100`.
pub fn artifact_stem(attack: &AttackConfig, n_voters: usize) -> String {
    format!("{}_b{}_n{}_N{}", attack.kind.name(), attack.budget, attack.n_perturbations, n_voters)
}

/// Certifies the trained run in `run_dir`.
pub fn cmd_certify(run_dir: &Path, opts: &CertifyOptions) -> Result<CertifyOutput, CliError> {
    let manifest = RunManifest::load(run_dir)?;
    let cfg = &manifest.config;
    let mut attack = cfg.certify.attack.clone();
    if let Some(kind) = opts.attack {
        attack.kind = kind;
    }
    if let Some(b) = opts.budget {
        attack.budget = b;
    }
    if let Some(n) = opts.n_perturbations {
        attack.n_perturbations = n;
    }
    if let Some(seed) = opts.attack_seed {
        attack.seed = seed;
    }
    let n_voters = opts.n_voters.unwrap_or(cfg.certify.n_voters);
    if n_voters == 0 {
        return Err(CliError::Config("n_voters must be positive".into()));
    }
    attack.validate()?;

    let splits = load_splits(cfg)?;
    check_data(&manifest, &splits)?;
    let (net, prior) = manifest.read_distribution(run_dir, &manifest.prior.checkpoint)?;
    let (_, posterior) = manifest.read_distribution(run_dir, &manifest.posterior.checkpoint)?;
    let kl = kl_gaussians(&posterior, &prior)?;
    if (kl - manifest.posterior.kl).abs() > KL_RECHECK_TOL * kl.max(1.0) {
        return Err(CliError::Invariant(format!("KL recomputed as {kl}, manifest records {}", manifest.posterior.kl)));
    }

    let target = attack_target_for_eval(&prior, attack.seed, "eval-target");
    let test = &splits.test;
    log::info!("building {} perturbations for {} test examples ({})", attack.n_perturbations, test.len(), attack.kind);
    let samples = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(attack.seed, "eval-attack", i as u64);
            let mut s = build_perturbation_set(&attack, &net, &target, &test.inputs[i], test.labels[i], attack.n_perturbations, &mut rng)?;
            quantize_sample(&mut s);
            Ok(s)
        })
        .collect::<advbound::Result<Vec<PerturbedSample>>>()?;

    let ensemble = VoterEnsemble::sample(&net, &posterior, n_voters, cfg.seed)?;
    let table = ScoreTable::from_ensemble(&ensemble, &samples)?;
    let seeds = ReportSeeds { master: cfg.seed, ensemble: cfg.seed, attack: attack.seed };
    let report = BoundReport::from_table(
        &table,
        kl,
        manifest.prior.t_priors,
        cfg.certify.delta,
        cfg.train.defense.clone(),
        attack.clone(),
        seeds,
    )?;
    check_report(&report)?;

    let dir = run_dir.join(CERTIFY_DIR);
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let stem = artifact_stem(&attack, n_voters);
    let perturbations_path = dir.join(format!("{stem}.pert"));
    let file = File::create(&perturbations_path).map_err(io_at(&perturbations_path))?;
    let indexed: Vec<(u64, &PerturbedSample)> = samples.iter().enumerate().map(|(i, s)| (i as u64, s)).collect();
    write_perturbation_stream(&indexed, &mut BufWriter::new(file))?;

    let report_path = dir.join(format!("{stem}.json"));
    write_json(&report_path, &report)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, format!("{}\n{}\n", BoundReport::CSV_HEADER, report.csv_row())).map_err(io_at(&csv_path))?;
    Ok(CertifyOutput { report, report_path, csv_path, perturbations_path })
}

/// Inequalities every report must satisfy: 0-1 risks within twice their
/// surrogates, and the kl-inverse bound no looser than the square-root one.
pub fn check_report(r: &BoundReport) -> Result<(), CliError> {
    let checks = [
        (r.risks.avg_01 <= 2.0 * r.risks.avg_surrogate, "averaged 0-1 risk exceeds twice its surrogate"),
        (r.risks.avgmax_01 <= 2.0 * r.risks.avgmax_surrogate, "averaged-max 0-1 risk exceeds twice its surrogate"),
        (r.surrogate.eq8 <= r.surrogate.eq9, "kl-inverse bound is looser than the square-root bound"),
    ];
    match checks.iter().find(|(ok, _)| !ok) {
        Some((_, what)) => Err(CliError::Invariant(format!("{what}: {r:?}"))),
        None => Ok(()),
    }
}
