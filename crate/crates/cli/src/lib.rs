//! Experiment runner: preprocessing, generator training, balancing,
//! decision-tree evaluation and result tables.

pub mod chart;
pub mod config;
pub mod error;
pub mod pipeline;

use std::path::PathBuf;

use c2bnvae_core::model::NormKind;
use c2bnvae_core::nslkdd::fixture::{self, Split};
use c2bnvae_core::nslkdd::{TEST_FILE, TRAIN_FILE};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::ExperimentConfig;
pub use error::CliError;
pub use pipeline::{Manifest, RunReport};

#[derive(Debug, Parser)]
#[command(
    name = "c2bnvae",
    version,
    about = "Minority-class synthesis and oversampling benchmarks on NSL-KDD"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every experiment subcommand. Flags override the
/// config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonOpts {
    /// TOML experiment configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stratified fraction of the training file to keep, in (0, 1].
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Encoded width after zero padding (0 disables padding).
    #[arg(long)]
    pub pad_to: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory holding KDDTrain+.txt and KDDTest+.txt.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Generator epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl CommonOpts {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(f) = self.subsample {
            cfg.subsample = f;
        }
        if let Some(p) = self.pad_to {
            cfg.pad_to = p;
        }
        if let Some(o) = &self.out {
            cfg.paths.out = o.clone();
        }
        if let Some(d) = &self.data_dir {
            cfg.paths.train = d.join(TRAIN_FILE);
            cfg.paths.test = d.join(TEST_FILE);
        }
        if let Some(e) = self.epochs {
            cfg.model.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    C2bnvae,
    Cvae,
}

impl Variant {
    pub fn norm(self) -> NormKind {
        match self {
            Variant::C2bnvae => NormKind::Conditional,
            Variant::Cvae => NormKind::Plain,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode the train and test files and print class counts.
    Preprocess(CommonOpts),
    /// Train a generator and write its checkpoint and loss trace.
    TrainGen {
        #[command(flatten)]
        opts: CommonOpts,
        #[arg(long, value_enum, default_value = "c2bnvae")]
        variant: Variant,
    },
    /// Run every balancing method, fit a tree on each and evaluate.
    RunAll {
        #[command(flatten)]
        opts: CommonOpts,
        /// Also write an SVG bar chart.
        #[arg(long)]
        svg: bool,
    },
    /// Print parameter and FLOP counts for the generator.
    Count {
        #[command(flatten)]
        opts: CommonOpts,
        #[arg(long, value_enum, default_value = "c2bnvae")]
        variant: Variant,
    },
    /// Print the results table of a finished run.
    Report {
        /// Directory written by `run-all`.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write chart.svg next to the report.
        #[arg(long)]
        svg: bool,
    },
    /// Write synthetic files in the NSL-KDD format.
    MakeFixture {
        /// Destination directory for KDDTrain+.txt and KDDTest+.txt.
        #[arg(long)]
        dir: PathBuf,
        /// Row-count multiplier relative to the real files.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Runs one parsed command and returns what it prints on stdout.
pub fn execute(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Preprocess(opts) => {
            let cfg = opts.resolve()?;
            let p = pipeline::cmd_preprocess(&cfg)?;
            Ok(format!(
                "encoded width {} ({} natural)\n{}",
                p.schema.feature_dim(),
                p.schema.natural_dim(),
                p.counts.to_text()
            ))
        }
        Command::TrainGen { opts, variant } => {
            let cfg = opts.resolve()?;
            let outcome = pipeline::cmd_train_gen(&cfg, variant.norm())?;
            let last = outcome.trace.last();
            Ok(format!(
                "{}: {} epochs, final loss {}\n",
                pipeline::variant_name(variant.norm()),
                outcome.trace.len(),
                last.map_or("n/a".into(), |e| format!("{:.6}", e.total))
            ))
        }
        Command::RunAll { opts, svg } => {
            let cfg = opts.resolve()?;
            let report = pipeline::cmd_run_all(&cfg, svg)?;
            match report.first_failure() {
                Some(e) => {
                    eprint!("{}", report.table());
                    Err(e)
                }
                None => Ok(report.table()),
            }
        }
        Command::Count { opts, variant } => {
            let cfg = opts.resolve()?;
            Ok(pipeline::cmd_count(&cfg, variant.norm()))
        }
        Command::Report { out, svg } => Ok(pipeline::cmd_report(&out, svg)?.table()),
        Command::MakeFixture { dir, scale, seed } => {
            if scale.is_nan() || scale <= 0.0 {
                return Err(CliError::Usage("scale must be positive".into()));
            }
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
            for (split, name) in [(Split::Train, TRAIN_FILE), (Split::Test, TEST_FILE)] {
                let records = fixture::generate(split, scale, seed);
                let path = dir.join(name);
                std::fs::write(&path, fixture::to_text(&records))
                    .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(format!("wrote {} and {} to {}\n", TRAIN_FILE, TEST_FILE, dir.display()))
        }
    }
}
