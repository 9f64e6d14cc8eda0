//! Synthetic oriented-grating dataset and the `RSB1` split file format.
//!
//! Class `k` of `K` is a sinusoidal grating at angle `kπ/K` with
//! `2 + (k mod 5)` cycles across the image, centered on the image with a
//! per-sample phase in `±phase_jitter`, plus `Normal(0, noise_std)` pixel
//! noise, clamped to `[0, 1]` and stored as bytes.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::augment::{ChannelStats, ImageBuffer};
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngKey};

pub const MAGIC: &[u8; 4] = b"RSB1";
pub const HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 3] = [SplitKind::Train, SplitKind::Val, SplitKind::Test];

    pub fn suffix(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Val => "val",
            SplitKind::Test => "test",
        }
    }

    fn code(self) -> u64 {
        match self {
            SplitKind::Train => 0,
            SplitKind::Val => 1,
            SplitKind::Test => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDatasetSpec {
    pub num_classes: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub resolution: usize,
    pub channels: usize,
    pub seed: u64,
    pub amplitude: f64,
    pub noise_std: f64,
    /// Half-width of the uniform phase range, in radians.
    pub phase_jitter: f64,
}

impl Default for SyntheticDatasetSpec {
    fn default() -> Self {
        SyntheticDatasetSpec {
            num_classes: 10,
            train: 5000,
            val: 1000,
            test: 1000,
            resolution: 32,
            channels: 3,
            seed: 0,
            amplitude: 0.5,
            noise_std: 0.1,
            phase_jitter: 0.8 * PI,
        }
    }
}

impl SyntheticDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.num_classes > u16::MAX as usize {
            return Err(Error::config(format!("num_classes {} outside [2, 65535]", self.num_classes)));
        }
        if self.resolution == 0 || self.resolution > u16::MAX as usize || self.channels == 0 || self.channels > 255 {
            return Err(Error::config("resolution and channels must be positive and fit the file header"));
        }
        if self.amplitude < 0.0 || self.noise_std < 0.0 || self.phase_jitter < 0.0 {
            return Err(Error::config("amplitude, noise and phase jitter must be non-negative"));
        }
        Ok(())
    }

    pub fn count(&self, split: SplitKind) -> usize {
        match split {
            SplitKind::Train => self.train,
            SplitKind::Val => self.val,
            SplitKind::Test => self.test,
        }
    }

    /// Parses `key = value` lines (`#` comments) over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = SyntheticDatasetSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse { line, message };
            let (k, v) = content.split_once('=').ok_or_else(|| perr(format!("expected 'key = value', got '{content}'")))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = |_| perr(format!("invalid value '{v}' for {k}"));
            match k {
                "num_classes" => s.num_classes = v.parse().map_err(bad)?,
                "train" => s.train = v.parse().map_err(bad)?,
                "val" => s.val = v.parse().map_err(bad)?,
                "test" => s.test = v.parse().map_err(bad)?,
                "resolution" => s.resolution = v.parse().map_err(bad)?,
                "channels" => s.channels = v.parse().map_err(bad)?,
                "seed" => s.seed = v.parse().map_err(bad)?,
                "amplitude" => s.amplitude = v.parse().map_err(|_| perr(format!("invalid value '{v}' for {k}")))?,
                "noise_std" => s.noise_std = v.parse().map_err(|_| perr(format!("invalid value '{v}' for {k}")))?,
                "phase_jitter" => s.phase_jitter = v.parse().map_err(|_| perr(format!("invalid value '{v}' for {k}")))?,
                _ => return Err(perr(format!("unknown key '{k}'"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    /// Label of sample `index`; labels cycle so every split is balanced.
    pub fn label(&self, index: usize) -> usize {
        index % self.num_classes
    }

    /// Pixels of one sample as unit-range floats, before quantization.
    pub fn render(&self, split: SplitKind, index: usize) -> ImageBuffer {
        let k = self.label(index);
        let n = self.resolution;
        let theta = k as f64 * PI / self.num_classes as f64;
        let freq = 2.0 + (k % 5) as f64;
        let mut rng = RngKey::new(self.seed, split.code(), index as u64, Purpose::Data).stream();
        let phase = if self.phase_jitter > 0.0 { rng.random_range(-self.phase_jitter..self.phase_jitter) } else { 0.0 };
        let noise = Normal::new(0.0, self.noise_std).expect("noise std checked");
        let center = (n as f64 - 1.0) / 2.0;
        let (c, s) = (theta.cos(), theta.sin());
        let mut pixels = Vec::with_capacity(n * n * self.channels);
        for y in 0..n {
            for x in 0..n {
                let u = ((x as f64 - center) * c + (y as f64 - center) * s) / n as f64;
                let g = 0.5 + self.amplitude * (2.0 * PI * freq * u + phase).sin();
                for _ in 0..self.channels {
                    let v = if self.noise_std > 0.0 { g + noise.sample(&mut rng) } else { g };
                    pixels.push(v.clamp(0.0, 1.0));
                }
            }
        }
        ImageBuffer::new(n, n, self.channels, pixels).expect("clamped pixels")
    }

    pub fn build_split(&self, split: SplitKind) -> Split {
        let n = self.count(split);
        let mut pixels = Vec::with_capacity(n * self.resolution * self.resolution * self.channels);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let img = self.render(split, i);
            pixels.extend(img.pixels().iter().map(|&p| (p * 255.0).round() as u8));
            labels.push(self.label(i) as u16);
        }
        Split { height: self.resolution, width: self.resolution, channels: self.channels, pixels, labels }
    }
}

/// One split held as bytes, exactly as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u16>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn sample_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> ImageBuffer {
        let n = self.sample_len();
        let pixels = self.pixels[i * n..(i + 1) * n].iter().map(|&b| b as f64 / 255.0).collect();
        ImageBuffer::new(self.height, self.width, self.channels, pixels).expect("bytes map into [0, 1]")
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Per-channel mean and standard deviation over all pixels.
    pub fn channel_stats(&self) -> Result<ChannelStats> {
        let c = self.channels;
        let mut sum = vec![0.0; c];
        let mut sq = vec![0.0; c];
        for (i, &b) in self.pixels.iter().enumerate() {
            let v = b as f64 / 255.0;
            sum[i % c] += v;
            sq[i % c] += v * v;
        }
        let n = (self.pixels.len() / c.max(1)) as f64;
        if n == 0.0 {
            return Ok(ChannelStats::identity(c));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq.iter().zip(&mean).map(|(q, m)| (q / n - m * m).max(0.0).sqrt()).collect();
        ChannelStats::new(mean, std)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.pixels.len() + 2 * self.labels.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u16).to_le_bytes());
        out.extend_from_slice(&(self.width as u16).to_le_bytes());
        out.push(self.channels as u8);
        out.push(0);
        out.extend_from_slice(&self.pixels);
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing RSB1 header".into()));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let height = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        let width = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
        let channels = bytes[12] as usize;
        let n = height * width * channels;
        let expected = HEADER_LEN + count * n + 2 * count;
        if bytes.len() != expected {
            return Err(Error::Format(format!("RSB1 file has {} bytes, header implies {expected}", bytes.len())));
        }
        let pixels = bytes[HEADER_LEN..HEADER_LEN + count * n].to_vec();
        let labels = bytes[HEADER_LEN + count * n..].chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        Ok(Split { height, width, channels, pixels, labels })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Split::from_bytes(&bytes)
    }
}

/// Path of one split file: `<stem>.train`, `<stem>.val`, `<stem>.test`.
pub fn split_path(stem: &Path, split: SplitKind) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(split.suffix());
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

impl Dataset {
    pub fn generate(spec: &SyntheticDatasetSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Dataset {
            train: spec.build_split(SplitKind::Train),
            val: spec.build_split(SplitKind::Val),
            test: spec.build_split(SplitKind::Test),
        })
    }

    pub fn split(&self, kind: SplitKind) -> &Split {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    pub fn write(&self, stem: &Path) -> Result<()> {
        for kind in SplitKind::ALL {
            self.split(kind).write(&split_path(stem, kind))?;
        }
        Ok(())
    }

    pub fn read(stem: &Path) -> Result<Self> {
        Ok(Dataset {
            train: Split::read(&split_path(stem, SplitKind::Train))?,
            val: Split::read(&split_path(stem, SplitKind::Val))?,
            test: Split::read(&split_path(stem, SplitKind::Test))?,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.train.num_classes().max(self.val.num_classes()).max(self.test.num_classes())
    }
}
