use crate::error::{Error, Result};

/// Channel-last pixel buffer. Pixels live in `[0, 1]` until
/// [`ImageBuffer::normalize`] standardizes them.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
    normalized: bool,
}

struct Taps {
    y0: usize,
    x0: usize,
    y1: usize,
    x1: usize,
    dy: f64,
    dx: f64,
}

/// Per-channel mean and standard deviation used for standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::config("mean and std need the same channel count"));
        }
        if std.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::config("channel std must be positive"));
        }
        Ok(ChannelStats { mean, std })
    }

    pub fn identity(channels: usize) -> Self {
        ChannelStats { mean: vec![0.0; channels], std: vec![1.0; channels] }
    }
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width * channels {
            return Err(Error::dim(format!(
                "{height}x{width}x{channels} image needs {} pixels, got {}",
                height * width * channels,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::contract(format!("pixel {p} outside [0, 1]")));
        }
        Ok(ImageBuffer { height, width, channels, pixels, normalized: false })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        ImageBuffer { height, width, channels, pixels: vec![value; height * width * channels], normalized: false }
    }

    /// Builds an image from `f(row, col, channel)`, clamped to `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, channels: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    pixels.push(f(r, c, ch).clamp(0.0, 1.0));
                }
            }
        }
        ImageBuffer { height, width, channels, pixels, normalized: false }
    }

    /// Wraps raw values without the unit-range check; used for buffers that
    /// are already standardized.
    pub fn from_normalized(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width * channels {
            return Err(Error::dim("pixel count does not match extents"));
        }
        Ok(ImageBuffer { height, width, channels, pixels, normalized: true })
    }

    pub(crate) fn with_pixels(&self, height: usize, width: usize, pixels: Vec<f64>) -> Self {
        ImageBuffer { height, width, channels: self.channels, pixels, normalized: self.normalized }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.pixels[self.idx(row, col, ch)]
    }

    pub(crate) fn require_unit_range(&self, op: &str) -> Result<()> {
        if self.normalized {
            return Err(Error::contract(format!("{op} expects an un-normalized image")));
        }
        Ok(())
    }

    /// Bilinear sample at continuous pixel-center coordinates, clamping taps
    /// to the border.
    pub(crate) fn sample_bilinear(&self, y: f64, x: f64, ch: usize) -> f64 {
        self.blend(&self.taps(y, x), ch)
    }

    fn taps(&self, y: f64, x: f64) -> Taps {
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
        Taps { y0, x0, y1, x1, dy: y - y0 as f64, dx: x - x0 as f64 }
    }

    #[inline]
    fn blend(&self, t: &Taps, ch: usize) -> f64 {
        if t.dy == 0.0 && t.dx == 0.0 {
            return self.get(t.y0, t.x0, ch);
        }
        let top = self.get(t.y0, t.x0, ch) * (1.0 - t.dx) + self.get(t.y0, t.x1, ch) * t.dx;
        let bottom = self.get(t.y1, t.x0, ch) * (1.0 - t.dx) + self.get(t.y1, t.x1, ch) * t.dx;
        top * (1.0 - t.dy) + bottom * t.dy
    }

    /// Resamples the window `(top, left, h, w)` to `out_h × out_w`
    /// (half-pixel centers, bilinear).
    pub fn resize_region(&self, top: usize, left: usize, h: usize, w: usize, out_h: usize, out_w: usize) -> Self {
        let sy = h as f64 / out_h as f64;
        let sx = w as f64 / out_w as f64;
        let mut pixels = Vec::with_capacity(out_h * out_w * self.channels);
        for r in 0..out_h {
            let y = top as f64 + (r as f64 + 0.5) * sy - 0.5;
            let y = y.clamp(top as f64, (top + h - 1) as f64);
            for c in 0..out_w {
                let x = left as f64 + (c as f64 + 0.5) * sx - 0.5;
                let x = x.clamp(left as f64, (left + w - 1) as f64);
                let taps = self.taps(y, x);
                for ch in 0..self.channels {
                    pixels.push(self.blend(&taps, ch));
                }
            }
        }
        self.with_pixels(out_h, out_w, pixels)
    }

    pub fn resize(&self, out_h: usize, out_w: usize) -> Self {
        if out_h == self.height && out_w == self.width {
            return self.clone();
        }
        self.resize_region(0, 0, self.height, self.width, out_h, out_w)
    }

    /// Scales so the shorter side equals `short`, preserving aspect ratio.
    pub fn resize_shorter_side(&self, short: usize) -> Self {
        let (h, w) = (self.height as f64, self.width as f64);
        let (out_h, out_w) = if self.height <= self.width {
            (short, ((w * short as f64 / h).round() as usize).max(1))
        } else {
            (((h * short as f64 / w).round() as usize).max(1), short)
        };
        self.resize(out_h, out_w)
    }

    pub fn center_crop(&self, out_h: usize, out_w: usize) -> Result<Self> {
        if out_h > self.height || out_w > self.width {
            return Err(Error::dim(format!("center crop {out_h}x{out_w} larger than {}x{}", self.height, self.width)));
        }
        let top = (self.height - out_h) / 2;
        let left = (self.width - out_w) / 2;
        Ok(self.crop(top, left, out_h, out_w))
    }

    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Self {
        let mut pixels = Vec::with_capacity(h * w * self.channels);
        for r in top..top + h {
            let start = self.idx(r, left, 0);
            pixels.extend_from_slice(&self.pixels[start..start + w * self.channels]);
        }
        self.with_pixels(h, w, pixels)
    }

    pub fn mirror(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for r in 0..self.height {
            for c in (0..self.width).rev() {
                let start = self.idx(r, c, 0);
                pixels.extend_from_slice(&self.pixels[start..start + self.channels]);
            }
        }
        self.with_pixels(self.height, self.width, pixels)
    }

    /// `(pixel − mean) / std` per channel.
    pub fn normalize(&self, stats: &ChannelStats) -> Result<Self> {
        if self.normalized {
            return Err(Error::contract("image is already normalized"));
        }
        self.check_stats(stats)?;
        let mut out = self.clone();
        for (i, p) in out.pixels.iter_mut().enumerate() {
            let ch = i % self.channels;
            *p = (*p - stats.mean[ch]) / stats.std[ch];
        }
        out.normalized = true;
        Ok(out)
    }

    pub fn denormalize(&self, stats: &ChannelStats) -> Result<Self> {
        if !self.normalized {
            return Err(Error::contract("image is not normalized"));
        }
        self.check_stats(stats)?;
        let mut out = self.clone();
        for (i, p) in out.pixels.iter_mut().enumerate() {
            let ch = i % self.channels;
            *p = *p * stats.std[ch] + stats.mean[ch];
        }
        out.normalized = false;
        Ok(out)
    }

    fn check_stats(&self, stats: &ChannelStats) -> Result<()> {
        if stats.mean.len() != self.channels || stats.std.len() != self.channels {
            return Err(Error::config(format!("stats for {} channels, image has {}", stats.mean.len(), self.channels)));
        }
        if stats.std.contains(&0.0) {
            return Err(Error::config("zero std"));
        }
        Ok(())
    }

    /// Channel-first copy of the pixels (`C×H×W`), the layout of batch tensors.
    pub fn to_chw(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels.len()];
        let plane = self.height * self.width;
        for (i, &p) in self.pixels.iter().enumerate() {
            let ch = i % self.channels;
            let pos = i / self.channels;
            out[ch * plane + pos] = p;
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}
