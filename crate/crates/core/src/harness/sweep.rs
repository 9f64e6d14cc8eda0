//! Seed sweeps: one training run per seed, then aggregate statistics.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::dataset::Dataset;
use super::train::{train, TrainOptions, TrainReport};
use crate::error::{Error, Result};
use crate::recipe::Recipe;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n − 1) standard deviation; 0 when all values agree.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            // the summed mean can be off by an ulp
            return Some(Aggregate { count: values.len(), mean: min, std: 0.0, min, max });
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        Some(Aggregate { count: values.len(), mean, std, min, max })
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: std::result::Result<TrainReport, String>,
}

impl SeedRun {
    pub fn val_top1(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|r| r.final_val_top1())
    }

    pub fn test_top1(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.test_top1)
    }
}

#[derive(Debug, Clone)]
pub struct SeedSweepReport {
    pub recipe: String,
    pub runs: Vec<SeedRun>,
    pub val: Option<Aggregate>,
    pub test: Option<Aggregate>,
    /// Per-epoch validation statistics across successful runs.
    pub curve: Vec<Aggregate>,
    pub duplicate_seeds: bool,
}

impl SeedSweepReport {
    pub fn from_runs(recipe: &str, runs: Vec<SeedRun>) -> Self {
        let val: Vec<f64> = runs.iter().filter_map(SeedRun::val_top1).collect();
        let test: Vec<f64> = runs.iter().filter_map(SeedRun::test_top1).collect();
        let reports: Vec<&TrainReport> = runs.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let epochs = reports.iter().map(|r| r.epochs.len()).min().unwrap_or(0);
        let curve = (0..epochs)
            .filter_map(|e| Aggregate::of(&reports.iter().map(|r| r.epochs[e].val_top1).collect::<Vec<_>>()))
            .collect();
        let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        let duplicate_seeds = seeds.windows(2).any(|w| w[0] == w[1]);
        SeedSweepReport {
            recipe: recipe.to_string(),
            runs,
            val: Aggregate::of(&val),
            test: Aggregate::of(&test),
            curve,
            duplicate_seeds,
        }
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// The first seed listed; reported next to the aggregates.
    pub fn reference(&self) -> Option<&SeedRun> {
        self.runs.first()
    }

    /// Largest per-epoch (max − min) over the epochs in `[from, to)`.
    pub fn band(&self, from: usize, to: usize) -> Option<f64> {
        self.curve.get(from..to.min(self.curve.len()))?.iter().map(Aggregate::range).reduce(f64::max)
    }

    /// Per-seed rows (the val-vs-test scatter) followed by the aggregate table.
    pub fn summary_tsv(&self) -> String {
        let mut s = String::from("#seed\tval_top1\ttest_top1\tstatus\n");
        for r in &self.runs {
            match &r.outcome {
                Ok(rep) => {
                    let _ = writeln!(s, "{}\t{:.4}\t{:.4}\tok", r.seed, rep.final_val_top1().unwrap_or(f64::NAN), rep.test_top1);
                }
                Err(e) => {
                    let _ = writeln!(s, "{}\t-\t-\tFAILED: {}", r.seed, e.replace(['\t', '\n'], " "));
                }
            }
        }
        s.push_str("#split\tmean\tstd\tmax\tmin\treference\n");
        let reference = self.reference();
        for (name, agg, pick) in [
            ("val", self.val, reference.and_then(SeedRun::val_top1)),
            ("test", self.test, reference.and_then(SeedRun::test_top1)),
        ] {
            let refv = pick.map_or("-".to_string(), |v| format!("{v:.4}"));
            match agg {
                Some(a) => {
                    let _ = writeln!(s, "{name}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{refv}", a.mean, a.std, a.max, a.min);
                }
                None => {
                    let _ = writeln!(s, "{name}\t-\t-\t-\t-\t{refv}");
                }
            }
        }
        s
    }

    pub fn curve_tsv(&self) -> String {
        let mut s = String::from("#epoch\tmean\tstd\tmin\tmax\n");
        for (e, a) in self.curve.iter().enumerate() {
            let _ = writeln!(s, "{e}\t{:.4}\t{:.4}\t{:.4}\t{:.4}", a.mean, a.std, a.min, a.max);
        }
        s
    }
}

/// Trains once per seed, `jobs` runs at a time. Runs share nothing mutable;
/// a failed run is kept as a failure marker.
pub fn seed_sweep(recipe: &Recipe, data: &Dataset, seeds: &[u64], jobs: usize) -> Result<SeedSweepReport> {
    if seeds.len() < 2 {
        return Err(Error::config(format!("a seed sweep needs at least 2 seeds, got {}", seeds.len())));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let runs = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| SeedRun {
                seed,
                outcome: train(recipe, data, &TrainOptions::new(seed)).map(|o| o.report).map_err(|e| e.to_string()),
            })
            .collect()
    });
    Ok(SeedSweepReport::from_runs(&recipe.name, runs))
}
