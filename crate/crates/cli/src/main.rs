use std::path::PathBuf;
use std::process::ExitCode;

use advbound::attacks::AttackKind;
use advbound::bounds::BoundReport;
use advbound_cli::config::CACHE_ENV;
use advbound_cli::{cmd_certify, cmd_prepare_data, cmd_report, cmd_train, cmd_verify, CertifyOptions, CliError, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "advbound", version, about = "Certified averaged adversarial robustness for Gaussian majority votes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Copy MNIST IDX files (plain or .gz) into the cache after checking their digests.
    PrepareData {
        #[arg(long)]
        from: PathBuf,
        /// Defaults to `$ADVBOUND_CACHE_DIR/mnist`, else `data/mnist`.
        #[arg(long)]
        to: Option<PathBuf>,
        /// Accept files whose SHA-256 differs from the reference.
        #[arg(long)]
        allow_unknown: bool,
    },
    /// Learn the prior and the posterior; writes checkpoints and a manifest.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        defense: Option<AttackKind>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        prior_epochs: Option<usize>,
        #[arg(long)]
        posterior_epochs: Option<usize>,
    },
    /// Perturb the test set, evaluate the majority vote and compute the bounds.
    Certify {
        /// Output directory of a `train` run.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        attack: Option<AttackKind>,
        #[arg(long)]
        budget: Option<f64>,
        /// Perturbations per test example.
        #[arg(short = 'n', long)]
        n_perturbations: Option<usize>,
        /// Voters sampled from the posterior.
        #[arg(short = 'N', long)]
        voters: Option<usize>,
        #[arg(long)]
        attack_seed: Option<u64>,
    },
    /// Check the finite-world invariants on stock, given and random worlds.
    Verify {
        #[arg(long, default_value_t = 500)]
        worlds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extra world files (JSON).
        #[arg(long = "world")]
        world: Vec<PathBuf>,
    },
    /// Merge report JSON files or run directories into one CSV.
    Report {
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::PrepareData { from, to, allow_unknown } => {
            let to = to.unwrap_or_else(|| match std::env::var_os(CACHE_ENV) {
                Some(cache) => PathBuf::from(cache).join("mnist"),
                None => PathBuf::from("data/mnist"),
            });
            let prepared = cmd_prepare_data(&from, &to, allow_unknown)?;
            println!("wrote {}", to.display());
            println!("digit,train,test");
            for d in 0..10 {
                println!("{d},{},{}", prepared.train_counts[d], prepared.test_counts[d]);
            }
        }
        Command::Train { config, seed, output_dir, defense, lambda, prior_epochs, posterior_epochs } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(kind) = defense {
                cfg.train.defense.kind = kind;
            }
            if let Some(l) = lambda {
                cfg.train.lambda = l;
            }
            if let Some(t) = prior_epochs {
                cfg.train.prior_epochs = t;
            }
            if let Some(t) = posterior_epochs {
                cfg.train.posterior_epochs = t;
            }
            let manifest = cmd_train(&cfg)?;
            println!(
                "selected prior epoch {} of {}; KL = {:.6}; manifest in {}",
                manifest.prior.selected_epoch + 1,
                manifest.prior.t_priors,
                manifest.posterior.kl,
                cfg.output_dir.display()
            );
        }
        Command::Certify { run, attack, budget, n_perturbations, voters, attack_seed } => {
            let opts = CertifyOptions { attack, budget, n_perturbations, n_voters: voters, attack_seed };
            let out = cmd_certify(&run, &opts)?;
            println!("{}", BoundReport::CSV_HEADER);
            println!("{}", out.report.csv_row());
            println!("report: {}", out.report_path.display());
        }
        Command::Verify { worlds, seed, world } => {
            let ledger = cmd_verify(worlds, seed, &world)?;
            println!("{ledger}");
            ledger.into_result()?;
        }
        Command::Report { paths, out } => {
            let (_, csv) = cmd_report(&paths)?;
            match out {
                Some(path) => std::fs::write(&path, csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
