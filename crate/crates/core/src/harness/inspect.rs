//! Per-stage statistics of the training augmentation pipeline.

use std::fmt::Write as _;

use super::dataset::Split;
use super::train::train_pipeline;
use crate::augment::{ChannelStats, ImageBuffer};
use crate::error::Result;
use crate::recipe::Recipe;
use crate::rng::{Purpose, RngKey};

pub const STAGES: [&str; 5] = ["crop", "flip", "randaugment", "normalize", "erasing"];

#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub stage: &'static str,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Default)]
struct Moments {
    n: f64,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Moments {
    fn add(&mut self, img: &ImageBuffer) {
        let c = img.channels();
        if self.sum.is_empty() {
            self.sum = vec![0.0; c];
            self.sq = vec![0.0; c];
        }
        for (i, &v) in img.pixels().iter().enumerate() {
            self.sum[i % c] += v;
            self.sq[i % c] += v * v;
        }
        self.n += (img.pixels().len() / c) as f64;
    }

    fn finish(&self, stage: &'static str) -> StageStats {
        let mean: Vec<f64> = self.sum.iter().map(|s| s / self.n).collect();
        let std = self.sq.iter().zip(&mean).map(|(q, m)| (q / self.n - m * m).max(0.0).sqrt()).collect();
        StageStats { stage, mean, std }
    }
}

/// Runs the epoch-0 training pipeline over the first `limit` samples of
/// `split` and reports per-channel mean and std after every stage.
pub fn augment_stats(recipe: &Recipe, split: &Split, stats: &ChannelStats, seed: u64, limit: usize) -> Result<Vec<StageStats>> {
    let pipeline = train_pipeline(recipe, stats);
    let mut acc: Vec<Moments> = (0..STAGES.len()).map(|_| Moments::default()).collect();
    for i in 0..split.len().min(limit) {
        let out = pipeline.run_stages(&split.image(i), RngKey::new(seed, 0, i as u64, Purpose::Crop))?;
        for (m, img) in acc.iter_mut().zip([&out.cropped, &out.flipped, &out.augmented, &out.normalized, &out.erased]) {
            m.add(img);
        }
    }
    Ok(acc.iter().zip(STAGES).filter(|(m, _)| m.n > 0.0).map(|(m, s)| m.finish(s)).collect())
}

pub fn stats_tsv(rows: &[StageStats]) -> String {
    let mut s = String::from("#stage\tchannel\tmean\tstd\n");
    for r in rows {
        for (c, (m, d)) in r.mean.iter().zip(&r.std).enumerate() {
            let _ = writeln!(s, "{}\t{c}\t{m:.6}\t{d:.6}", r.stage);
        }
    }
    s
}
