use rand::Rng;

use super::ImageBuffer;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct RrcConfig {
    pub target_size: (usize, usize),
    /// Fraction of the source area kept by the crop.
    pub scale_range: (f64, f64),
    /// Width over height of the crop.
    pub ratio_range: (f64, f64),
    pub max_attempts: usize,
}

impl RrcConfig {
    pub fn new(height: usize, width: usize) -> Self {
        RrcConfig {
            target_size: (height, width),
            scale_range: (0.08, 1.0),
            ratio_range: (3.0 / 4.0, 4.0 / 3.0),
            max_attempts: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.target_size;
        if h == 0 || w == 0 {
            return Err(Error::config("random resized crop target size must be positive"));
        }
        let (s0, s1) = self.scale_range;
        if !(0.0 < s0 && s0 <= s1 && s1 <= 1.0) {
            return Err(Error::config(format!("crop scale range ({s0}, {s1}) must satisfy 0 < min <= max <= 1")));
        }
        let (r0, r1) = self.ratio_range;
        if !(0.0 < r0 && r0 <= r1) {
            return Err(Error::config(format!("crop ratio range ({r0}, {r1}) must be positive and ordered")));
        }
        Ok(())
    }
}

/// Integer crop window in source pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Draws the crop window. Each attempt consumes two uniforms (area fraction,
/// log-aspect) and, when the rounded box fits and still lies inside both
/// ranges, two integer offsets. After `max_attempts` misses the largest
/// centered box whose aspect lies in range is used.
pub fn sample_crop_box(height: usize, width: usize, cfg: &RrcConfig, rng: &mut RngStream) -> CropBox {
    let area = (height * width) as f64;
    let (s0, s1) = cfg.scale_range;
    let (lr0, lr1) = (cfg.ratio_range.0.ln(), cfg.ratio_range.1.ln());
    for _ in 0..cfg.max_attempts {
        let target = area * (s0 + (s1 - s0) * rng.random::<f64>());
        let aspect = (lr0 + (lr1 - lr0) * rng.random::<f64>()).exp();
        let w = (target * aspect).sqrt().round() as usize;
        let h = (target / aspect).sqrt().round() as usize;
        if w == 0 || h == 0 || w > width || h > height {
            continue;
        }
        let frac = (w * h) as f64 / area;
        let ratio = w as f64 / h as f64;
        if frac < s0 || frac > s1 || ratio < cfg.ratio_range.0 || ratio > cfg.ratio_range.1 {
            continue;
        }
        let top = rng.random_range(0..=height - h);
        let left = rng.random_range(0..=width - w);
        return CropBox { top, left, height: h, width: w };
    }
    fallback_box(height, width, cfg)
}

fn fallback_box(height: usize, width: usize, cfg: &RrcConfig) -> CropBox {
    let in_ratio = width as f64 / height as f64;
    let (w, h) = if in_ratio < cfg.ratio_range.0 {
        (width, ((width as f64 / cfg.ratio_range.0).round() as usize).clamp(1, height))
    } else if in_ratio > cfg.ratio_range.1 {
        (((height as f64 * cfg.ratio_range.1).round() as usize).clamp(1, width), height)
    } else {
        (width, height)
    };
    CropBox { top: (height - h) / 2, left: (width - w) / 2, height: h, width: w }
}

pub fn random_resized_crop(img: &ImageBuffer, cfg: &RrcConfig, rng: &mut RngStream) -> Result<ImageBuffer> {
    cfg.validate()?;
    img.require_unit_range("random_resized_crop")?;
    let b = sample_crop_box(img.height(), img.width(), cfg, rng);
    let (th, tw) = cfg.target_size;
    Ok(img.resize_region(b.top, b.left, b.height, b.width, th, tw))
}

/// Mirrors along the width axis with probability `p` (one uniform draw).
pub fn horizontal_flip(img: &ImageBuffer, rng: &mut RngStream, p: f64) -> ImageBuffer {
    if rng.random::<f64>() < p {
        img.mirror()
    } else {
        img.clone()
    }
}
