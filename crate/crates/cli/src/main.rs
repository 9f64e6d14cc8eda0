use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rsb_core::harness::{
    augment_stats, eval_sweep, eval_sweep_tsv, linear_probe, resolve_recipe, seed_sweep, stats_tsv, train, Dataset, ProbeConfig,
    SplitKind, SyntheticDatasetSpec, ToyNet, TrainOptions,
};
use rsb_core::recipe::{parse_config, Recipe};
use rsb_core::schedule::{apply_noise, format_sig10, lr_at};
use rsb_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rsb", about = "Training-procedure toolkit with a desk-scale harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a spec file.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        /// Output stem; writes <stem>.train, <stem>.val, <stem>.test.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a recipe and write its per-epoch report.
    Train {
        /// Preset name, or <preset>-desk for the desk-scale variant.
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        data: PathBuf,
        /// `key = value` overrides applied on top of the recipe.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to the recipe seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Augmentation threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Save final weights here.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Top-1 of saved weights for every (resolution, crop ratio) pair.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated test resolutions.
        #[arg(long, value_delimiter = ',', required = true)]
        res: Vec<usize>,
        /// Comma-separated crop ratios.
        #[arg(long = "crop-ratio", value_delimiter = ',', required = true)]
        crop_ratio: Vec<f64>,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once per seed and aggregate final accuracies.
    SeedSweep {
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of seeds, starting at --first-seed.
        #[arg(long)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-epoch validation band.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Learning rate at every whole epoch.
    LrCurve {
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Include learning-rate noise keyed by this seed.
        #[arg(long)]
        noise_seed: Option<u64>,
    },
    /// Linear softmax baseline on raw pixels.
    Probe {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-stage channel statistics of the training augmentations.
    Augment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        limit: usize,
    },
}

fn load_recipe(name: &str, config: Option<&Path>) -> Result<Recipe> {
    let base = resolve_recipe(name)?;
    match config {
        Some(path) => parse_config(&fs::read_to_string(path)?)?.apply(&base),
        None => Ok(base),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { spec, out } => {
            let spec = SyntheticDatasetSpec::parse(&fs::read_to_string(spec)?)?;
            Dataset::generate(&spec)?.write(&out)
        }
        Command::Train { recipe, data, config, seed, out, workers, weights } => {
            let recipe = load_recipe(&recipe, config.as_deref())?;
            let data = Dataset::read(&data)?;
            let seed = seed.unwrap_or(recipe.seed);
            let outcome = train(&recipe, &data, &TrainOptions { seed, workers })?;
            if let Some(w) = weights {
                outcome.model.save(&w)?;
            }
            emit(out.as_deref(), &outcome.report.to_tsv())
        }
        Command::Eval { weights, data, res, crop_ratio, split, out } => {
            let data = Dataset::read(&data)?;
            let kind = match split.as_str() {
                "train" => SplitKind::Train,
                "val" => SplitKind::Val,
                "test" => SplitKind::Test,
                other => return Err(Error::Config(format!("unknown split '{other}'"))),
            };
            let model = ToyNet::load(&weights, data.train.channels)?;
            let stats = data.train.channel_stats()?;
            let points = eval_sweep(&model, data.split(kind), &res, &crop_ratio, &stats)?;
            emit(out.as_deref(), &eval_sweep_tsv(&points))
        }
        Command::SeedSweep { recipe, data, config, seeds, first_seed, jobs, out, curve } => {
            let recipe = load_recipe(&recipe, config.as_deref())?;
            let data = Dataset::read(&data)?;
            let list: Vec<u64> = (first_seed..first_seed + seeds).collect();
            let report = seed_sweep(&recipe, &data, &list, jobs)?;
            if let Some(c) = curve {
                fs::write(c, report.curve_tsv())?;
            }
            emit(out.as_deref(), &report.summary_tsv())?;
            if report.failures() > 0 {
                eprintln!("warning: {} of {} runs failed", report.failures(), report.runs.len());
            }
            Ok(())
        }
        Command::LrCurve { recipe, config, noise_seed } => {
            let recipe = load_recipe(&recipe, config.as_deref())?;
            let mut cfg = recipe.schedule_config(noise_seed.unwrap_or(0));
            if noise_seed.is_none() {
                cfg.noise = None;
            }
            cfg.validate()?;
            let mut text = String::from("#epoch\tlr\n");
            for e in 0..=recipe.epochs {
                let lr = apply_noise(&cfg, e as f64, lr_at(&cfg, e as f64)?);
                text.push_str(&format!("{e}\t{}\n", format_sig10(lr)));
            }
            print!("{text}");
            Ok(())
        }
        Command::Probe { data, seed } => {
            let data = Dataset::read(&data)?;
            let r = linear_probe(&data, &ProbeConfig { seed, ..ProbeConfig::default() })?;
            print!("#val_top1\ttest_top1\n{:.4}\t{:.4}\n", r.val_top1, r.test_top1);
            Ok(())
        }
        Command::Augment { data, recipe, stats, seed, limit } => {
            let recipe = load_recipe(&recipe, None)?;
            let data = Dataset::read(&data)?;
            let channel = data.train.channel_stats()?;
            let rows = augment_stats(&recipe, &data.train, &channel, seed, limit)?;
            fs::write(stats, stats_tsv(&rows))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
