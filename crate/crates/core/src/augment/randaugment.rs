//! RandAugment with the "increasing" magnitude semantics and per-application
//! magnitude noise.
//!
//! In increasing mode every op gets stronger as the magnitude grows:
//! blend ops move away from 1.0 (towards a degenerate image or beyond the
//! original, sign chosen at random), solarize lowers its threshold, and
//! posterize drops bits.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ImageBuffer;
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const MAX_MAGNITUDE: f64 = 10.0;
const MAX_ROTATE_DEG: f64 = 30.0;
const MAX_SHEAR: f64 = 0.3;
const MAX_TRANSLATE: f64 = 0.45;
const BLEND_SPAN: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    AutoContrast,
    Equalize,
    Rotate,
    Posterize,
    Solarize,
    Color,
    Contrast,
    Brightness,
    Sharpness,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
}

impl OpKind {
    pub const ALL: [OpKind; 13] = [
        OpKind::AutoContrast,
        OpKind::Equalize,
        OpKind::Rotate,
        OpKind::Posterize,
        OpKind::Solarize,
        OpKind::Color,
        OpKind::Contrast,
        OpKind::Brightness,
        OpKind::Sharpness,
        OpKind::ShearX,
        OpKind::ShearY,
        OpKind::TranslateX,
        OpKind::TranslateY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::AutoContrast => "auto_contrast",
            OpKind::Equalize => "equalize",
            OpKind::Rotate => "rotate",
            OpKind::Posterize => "posterize",
            OpKind::Solarize => "solarize",
            OpKind::Color => "color",
            OpKind::Contrast => "contrast",
            OpKind::Brightness => "brightness",
            OpKind::Sharpness => "sharpness",
            OpKind::ShearX => "shear_x",
            OpKind::ShearY => "shear_y",
            OpKind::TranslateX => "translate_x",
            OpKind::TranslateY => "translate_y",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::config(format!("unknown augmentation op `{name}`")))
    }

    pub fn is_blend(self) -> bool {
        matches!(self, OpKind::Color | OpKind::Contrast | OpKind::Brightness | OpKind::Sharpness)
    }
}

/// Concrete arguments for one application of an op.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpParams {
    None,
    /// Blend factor: 0 gives the degenerate image, 1 the original.
    Blend(f64),
    /// Bits kept per channel.
    Posterize(u32),
    /// Pixels strictly above the threshold are inverted.
    Solarize(f64),
    Degrees(f64),
    Shear(f64),
    /// Shift as a fraction of the image extent along the op's axis.
    Translate(f64),
}

impl OpParams {
    /// Distance from the identity setting; zero means the op is a no-op.
    pub fn strength(&self) -> f64 {
        match *self {
            OpParams::None => 0.0,
            OpParams::Blend(f) => (f - 1.0).abs(),
            OpParams::Posterize(bits) => 8.0 - bits.min(8) as f64,
            OpParams::Solarize(t) => 1.0 - t,
            OpParams::Degrees(v) | OpParams::Shear(v) | OpParams::Translate(v) => v.abs(),
        }
    }
}

/// Magnitude noise applied per op application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mstd {
    /// Add `Normal(0, std)` to the magnitude.
    Gaussian(f64),
    /// Draw the magnitude uniformly from `[0, M]`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandAugmentConfig {
    pub magnitude: f64,
    pub num_ops: usize,
    pub mstd: Mstd,
    pub increasing: bool,
    /// Value written into pixels introduced by geometric ops, one per channel.
    pub fill: Vec<f64>,
    pub ops: Vec<OpKind>,
}

impl RandAugmentConfig {
    pub fn new(magnitude: f64, num_ops: usize, mstd: f64, fill: Vec<f64>) -> Self {
        RandAugmentConfig {
            magnitude,
            num_ops,
            mstd: if mstd.is_infinite() && mstd < 0.0 { Mstd::Uniform } else { Mstd::Gaussian(mstd) },
            increasing: true,
            fill,
            ops: OpKind::ALL.to_vec(),
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if !(0.0..=MAX_MAGNITUDE).contains(&self.magnitude) {
            return Err(Error::config(format!("RandAugment magnitude {} outside [0, 10]", self.magnitude)));
        }
        if self.num_ops == 0 {
            return Err(Error::config("RandAugment needs at least one op per image"));
        }
        if let Mstd::Gaussian(s) = self.mstd {
            if !(s >= 0.0) {
                return Err(Error::config(format!("RandAugment mstd {s} must be non-negative")));
            }
        }
        if self.fill.len() != channels {
            return Err(Error::config(format!("fill has {} entries for {channels} channels", self.fill.len())));
        }
        if self.ops.is_empty() {
            return Err(Error::config("RandAugment op inventory is empty"));
        }
        Ok(())
    }
}

/// Effective magnitude for one op application, clamped to `[0, 10]`.
pub fn sample_magnitude(cfg: &RandAugmentConfig, rng: &mut RngStream) -> f64 {
    let m = match cfg.mstd {
        Mstd::Uniform => cfg.magnitude * rng.random::<f64>(),
        Mstd::Gaussian(s) if s > 0.0 => {
            let z: f64 = StandardNormal.sample(rng);
            cfg.magnitude + s * z
        }
        Mstd::Gaussian(_) => cfg.magnitude,
    };
    m.clamp(0.0, MAX_MAGNITUDE)
}

fn random_sign(rng: &mut RngStream) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Maps an effective magnitude to op arguments. Signed ops draw one random
/// bit for the sign.
pub fn map_magnitude(kind: OpKind, magnitude: f64, increasing: bool, rng: &mut RngStream) -> Result<OpParams> {
    if !(0.0..=MAX_MAGNITUDE).contains(&magnitude) {
        return Err(Error::contract(format!("magnitude {magnitude} outside [0, 10]")));
    }
    let level = magnitude / MAX_MAGNITUDE;
    Ok(match kind {
        OpKind::AutoContrast | OpKind::Equalize => OpParams::None,
        OpKind::Color | OpKind::Contrast | OpKind::Brightness | OpKind::Sharpness => {
            let factor = if increasing { 1.0 + random_sign(rng) * BLEND_SPAN * level } else { 0.1 + 1.8 * level };
            OpParams::Blend(factor.clamp(0.1, 1.9))
        }
        OpKind::Posterize => {
            let bits = if increasing { 8.0 - 4.0 * level } else { 4.0 + 4.0 * level };
            OpParams::Posterize(bits.round() as u32)
        }
        OpKind::Solarize => OpParams::Solarize(if increasing { 1.0 - level } else { level }),
        OpKind::Rotate => OpParams::Degrees(random_sign(rng) * MAX_ROTATE_DEG * level),
        OpKind::ShearX | OpKind::ShearY => OpParams::Shear(random_sign(rng) * MAX_SHEAR * level),
        OpKind::TranslateX | OpKind::TranslateY => OpParams::Translate(random_sign(rng) * MAX_TRANSLATE * level),
    })
}

/// Applies one op. Geometric ops resample bilinearly and write `fill` into
/// pixels whose source lies outside the image.
pub fn apply_op(img: &ImageBuffer, kind: OpKind, params: OpParams, fill: &[f64]) -> Result<ImageBuffer> {
    img.require_unit_range(kind.name())?;
    if fill.len() != img.channels() {
        return Err(Error::config("fill length does not match channels"));
    }
    let mismatch = || Error::contract(format!("parameters {params:?} do not fit op {}", kind.name()));
    let out = match (kind, params) {
        (OpKind::AutoContrast, _) => auto_contrast(img),
        (OpKind::Equalize, _) => equalize(img),
        (OpKind::Posterize, OpParams::Posterize(bits)) => posterize(img, bits),
        (OpKind::Solarize, OpParams::Solarize(t)) => solarize(img, t),
        (OpKind::Color, OpParams::Blend(f)) => blend(img, &grayscale(img), f),
        (OpKind::Contrast, OpParams::Blend(f)) => {
            let gray = grayscale(img);
            let mean = gray.pixels().iter().step_by(img.channels()).sum::<f64>() / (img.height() * img.width()) as f64;
            blend(img, &ImageBuffer::filled(img.height(), img.width(), img.channels(), mean), f)
        }
        (OpKind::Brightness, OpParams::Blend(f)) => {
            blend(img, &ImageBuffer::filled(img.height(), img.width(), img.channels(), 0.0), f)
        }
        (OpKind::Sharpness, OpParams::Blend(f)) => blend(img, &smooth(img), f),
        (OpKind::Rotate, OpParams::Degrees(deg)) => {
            let (s, c) = deg.to_radians().sin_cos();
            let (cy, cx) = center(img);
            // inverse map of a counter-clockwise rotation about the center
            affine(img, fill, |y, x| {
                let (dy, dx) = (y - cy, x - cx);
                (cy + c * dy - s * dx, cx + s * dy + c * dx)
            })
        }
        (OpKind::ShearX, OpParams::Shear(k)) => {
            let (cy, _) = center(img);
            affine(img, fill, |y, x| (y, x + k * (y - cy)))
        }
        (OpKind::ShearY, OpParams::Shear(k)) => {
            let (_, cx) = center(img);
            affine(img, fill, |y, x| (y + k * (x - cx), x))
        }
        (OpKind::TranslateX, OpParams::Translate(t)) => {
            let dx = t * img.width() as f64;
            affine(img, fill, |y, x| (y, x - dx))
        }
        (OpKind::TranslateY, OpParams::Translate(t)) => {
            let dy = t * img.height() as f64;
            affine(img, fill, |y, x| (y - dy, x))
        }
        _ => return Err(mismatch()),
    };
    Ok(out)
}

/// Applies `num_ops` ops drawn uniformly with replacement, in draw order.
/// Per op the stream supplies: op index, magnitude noise, then sign bits.
pub fn rand_augment(img: &ImageBuffer, cfg: &RandAugmentConfig, rng: &mut RngStream) -> Result<ImageBuffer> {
    cfg.validate(img.channels())?;
    let mut out = img.clone();
    for _ in 0..cfg.num_ops {
        let kind = cfg.ops[rng.random_range(0..cfg.ops.len())];
        let m = sample_magnitude(cfg, rng);
        let params = map_magnitude(kind, m, cfg.increasing, rng)?;
        out = apply_op(&out, kind, params, &cfg.fill)?;
    }
    Ok(out)
}

fn center(img: &ImageBuffer) -> (f64, f64) {
    ((img.height() as f64 - 1.0) / 2.0, (img.width() as f64 - 1.0) / 2.0)
}

/// Output pixel `(y, x)` reads the source at `inverse(y, x)`. A source point
/// counts as inside when it falls within the pixel footprint of the image,
/// i.e. `[-0.5, extent - 0.5]`.
fn affine(img: &ImageBuffer, fill: &[f64], inverse: impl Fn(f64, f64) -> (f64, f64)) -> ImageBuffer {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut pixels = Vec::with_capacity(h * w * ch);
    for r in 0..h {
        for c in 0..w {
            let (sy, sx) = inverse(r as f64, c as f64);
            let inside = sy >= -0.5 && sy <= h as f64 - 0.5 && sx >= -0.5 && sx <= w as f64 - 0.5;
            for k in 0..ch {
                pixels.push(if inside { img.sample_bilinear(sy, sx, k).clamp(0.0, 1.0) } else { fill[k] });
            }
        }
    }
    img.with_pixels(h, w, pixels)
}

fn map_pixels(img: &ImageBuffer, f: impl Fn(f64) -> f64) -> ImageBuffer {
    let pixels = img.pixels().iter().map(|&p| f(p)).collect();
    img.with_pixels(img.height(), img.width(), pixels)
}

fn blend(img: &ImageBuffer, degenerate: &ImageBuffer, factor: f64) -> ImageBuffer {
    let pixels =
        img.pixels().iter().zip(degenerate.pixels()).map(|(&p, &d)| (factor * p + (1.0 - factor) * d).clamp(0.0, 1.0)).collect();
    img.with_pixels(img.height(), img.width(), pixels)
}

/// Luma replicated to every channel; single-channel images are returned as is.
fn grayscale(img: &ImageBuffer) -> ImageBuffer {
    let ch = img.channels();
    if ch < 3 {
        return img.clone();
    }
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for px in img.pixels().chunks(ch) {
        let l = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        pixels.extend(std::iter::repeat_n(l, ch));
    }
    img.with_pixels(img.height(), img.width(), pixels)
}

/// 3×3 smoothing (center weight 5, neighbours 1, normalized by 13); border
/// pixels keep their values.
fn smooth(img: &ImageBuffer) -> ImageBuffer {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut out = img.clone();
    if h < 3 || w < 3 {
        return out;
    }
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            for k in 0..ch {
                let mut acc = 4.0 * img.get(r, c, k);
                for dr in 0..3 {
                    for dc in 0..3 {
                        acc += img.get(r + dr - 1, c + dc - 1, k);
                    }
                }
                let i = out.idx(r, c, k);
                out.pixels_mut()[i] = acc / 13.0;
            }
        }
    }
    out
}

fn quantize(p: f64) -> u8 {
    (p * 255.0).round().clamp(0.0, 255.0) as u8
}

fn posterize(img: &ImageBuffer, bits: u32) -> ImageBuffer {
    if bits >= 8 {
        return img.clone();
    }
    let mask = !((1u16 << (8 - bits)) - 1) as u8;
    map_pixels(img, |p| (quantize(p) & mask) as f64 / 255.0)
}

fn solarize(img: &ImageBuffer, threshold: f64) -> ImageBuffer {
    map_pixels(img, |p| if p > threshold { 1.0 - p } else { p })
}

fn auto_contrast(img: &ImageBuffer) -> ImageBuffer {
    let ch = img.channels();
    let mut out = img.clone();
    for k in 0..ch {
        let channel = img.pixels().iter().skip(k).step_by(ch);
        let (lo, hi) = channel.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        if hi > lo {
            for p in out.pixels_mut().iter_mut().skip(k).step_by(ch) {
                *p = (*p - lo) / (hi - lo);
            }
        }
    }
    out
}

/// Histogram equalization over 256 levels per channel.
fn equalize(img: &ImageBuffer) -> ImageBuffer {
    let ch = img.channels();
    let mut out = img.clone();
    for k in 0..ch {
        let mut hist = [0usize; 256];
        for &p in img.pixels().iter().skip(k).step_by(ch) {
            hist[quantize(p) as usize] += 1;
        }
        let last = hist.iter().rposition(|&n| n > 0).map_or(0, |i| hist[i]);
        let total: usize = hist.iter().sum();
        let step = (total - last) / 255;
        if step == 0 {
            continue;
        }
        let mut lut = [0u8; 256];
        let mut n = step / 2;
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = (n / step).min(255) as u8;
            n += hist[i];
        }
        for p in out.pixels_mut().iter_mut().skip(k).step_by(ch) {
            *p = lut[quantize(*p) as usize] as f64 / 255.0;
        }
    }
    out
}
