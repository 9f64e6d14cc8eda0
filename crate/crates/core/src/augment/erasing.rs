use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ImageBuffer;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EraseMode {
    /// Independent `Normal(0, 1)` per pixel and channel.
    PerPixel,
    /// Zero, i.e. the dataset mean once the image is standardized.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomErasingConfig {
    pub probability: f64,
    pub count: usize,
    pub area_range: (f64, f64),
    pub aspect_range: (f64, f64),
    pub mode: EraseMode,
    /// Rejection-sampling attempts per region.
    pub max_attempts: usize,
}

impl RandomErasingConfig {
    pub fn new(probability: f64, count: usize) -> Self {
        RandomErasingConfig {
            probability,
            count,
            area_range: (0.02, 1.0 / 3.0),
            aspect_range: (0.3, 1.0 / 0.3),
            mode: EraseMode::PerPixel,
            max_attempts: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::config(format!("erasing probability {} outside [0, 1]", self.probability)));
        }
        if self.count == 0 {
            return Err(Error::config("erasing count must be positive"));
        }
        let (a0, a1) = self.area_range;
        if !(0.0 < a0 && a0 <= a1 && a1 < 1.0) {
            return Err(Error::config(format!("erasing area range ({a0}, {a1}) must satisfy 0 < min <= max < 1")));
        }
        let (r0, r1) = self.aspect_range;
        if !(0.0 < r0 && r0 <= r1) {
            return Err(Error::config("erasing aspect range must be positive and ordered"));
        }
        Ok(())
    }
}

/// An erased rectangle, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Random Erasing on a standardized image; see [`random_erasing_regions`].
pub fn random_erasing(img: &ImageBuffer, cfg: &RandomErasingConfig, rng: &mut RngStream) -> Result<ImageBuffer> {
    random_erasing_regions(img, cfg, rng).map(|(out, _)| out)
}

/// With probability `cfg.probability`, makes `cfg.count` region draws. Each
/// draw rejection-samples an (area, aspect) pair until the rounded box fits
/// strictly inside the image, then fills it. Draws that exhaust their
/// attempts erase nothing. Returns the regions actually erased.
pub fn random_erasing_regions(
    img: &ImageBuffer,
    cfg: &RandomErasingConfig,
    rng: &mut RngStream,
) -> Result<(ImageBuffer, Vec<Region>)> {
    if !img.is_normalized() {
        return Err(Error::contract("random erasing runs after normalization"));
    }
    cfg.validate()?;
    let mut out = img.clone();
    let mut regions = Vec::new();
    if rng.random::<f64>() >= cfg.probability {
        return Ok((out, regions));
    }
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let area = (h * w) as f64;
    let (lr0, lr1) = (cfg.aspect_range.0.ln(), cfg.aspect_range.1.ln());
    for _ in 0..cfg.count {
        for _ in 0..cfg.max_attempts {
            let target = area * (cfg.area_range.0 + (cfg.area_range.1 - cfg.area_range.0) * rng.random::<f64>());
            let aspect = (lr0 + (lr1 - lr0) * rng.random::<f64>()).exp();
            let eh = (target * aspect).sqrt().round() as usize;
            let ew = (target / aspect).sqrt().round() as usize;
            if eh == 0 || ew == 0 || eh >= h || ew >= w {
                continue;
            }
            let top = rng.random_range(0..=h - eh);
            let left = rng.random_range(0..=w - ew);
            for r in top..top + eh {
                for c in left..left + ew {
                    for k in 0..ch {
                        let i = out.idx(r, c, k);
                        out.pixels_mut()[i] = match cfg.mode {
                            EraseMode::PerPixel => StandardNormal.sample(rng),
                            EraseMode::Constant => 0.0,
                        };
                    }
                }
            }
            regions.push(Region { top, left, height: eh, width: ew });
            break;
        }
    }
    Ok((out, regions))
}
