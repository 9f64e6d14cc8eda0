//! Pixel-space augmentation: random resized crop, flip, RandAugment,
//! standardization and Random Erasing.

mod crop;
mod erasing;
mod image;
mod randaugment;

pub use crop::{horizontal_flip, random_resized_crop, sample_crop_box, CropBox, RrcConfig};
pub use erasing::{random_erasing, random_erasing_regions, EraseMode, RandomErasingConfig, Region};
pub use image::{ChannelStats, ImageBuffer};
pub use randaugment::{
    apply_op, map_magnitude, rand_augment, sample_magnitude, Mstd, OpKind, OpParams, RandAugmentConfig, MAX_MAGNITUDE,
};

use crate::error::Result;
use crate::rng::{Purpose, RngKey};

/// Training-time pipeline in its fixed order:
/// crop → flip → RandAugment → normalize → Random Erasing.
#[derive(Debug, Clone)]
pub struct TrainPipeline {
    pub crop: RrcConfig,
    pub flip_prob: f64,
    pub randaugment: Option<RandAugmentConfig>,
    pub stats: ChannelStats,
    pub erasing: Option<RandomErasingConfig>,
}

/// Output of every stage, kept for statistics reports.
#[derive(Debug, Clone)]
pub struct StageOutputs {
    pub cropped: ImageBuffer,
    pub flipped: ImageBuffer,
    pub augmented: ImageBuffer,
    pub normalized: ImageBuffer,
    pub erased: ImageBuffer,
}

impl TrainPipeline {
    /// Runs every stage with its own stream derived from `key`; only the key
    /// decides the result.
    pub fn run_stages(&self, img: &ImageBuffer, key: RngKey) -> Result<StageOutputs> {
        let cropped = random_resized_crop(img, &self.crop, &mut key.with_purpose(Purpose::Crop).stream())?;
        let flipped = horizontal_flip(&cropped, &mut key.with_purpose(Purpose::Flip).stream(), self.flip_prob);
        let augmented = match &self.randaugment {
            Some(cfg) => rand_augment(&flipped, cfg, &mut key.with_purpose(Purpose::RandAugment).stream())?,
            None => flipped.clone(),
        };
        let normalized = augmented.normalize(&self.stats)?;
        let erased = match &self.erasing {
            Some(cfg) => random_erasing(&normalized, cfg, &mut key.with_purpose(Purpose::Erasing).stream())?,
            None => normalized.clone(),
        };
        Ok(StageOutputs { cropped, flipped, augmented, normalized, erased })
    }

    pub fn run(&self, img: &ImageBuffer, key: RngKey) -> Result<ImageBuffer> {
        self.run_stages(img, key).map(|s| s.erased)
    }
}

/// Deterministic evaluation preprocessing: shorter side to
/// `round(test_res / crop_ratio)`, center crop `test_res`, normalize.
pub fn eval_transform(img: &ImageBuffer, test_res: usize, crop_ratio: f64, stats: &ChannelStats) -> Result<ImageBuffer> {
    let resized = img.resize_shorter_side(eval_resize_size(test_res, crop_ratio));
    resized.center_crop(test_res, test_res)?.normalize(stats)
}

/// Shorter-side length before the center crop.
pub fn eval_resize_size(test_res: usize, crop_ratio: f64) -> usize {
    (test_res as f64 / crop_ratio).round() as usize
}
