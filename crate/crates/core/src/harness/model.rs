//! Residual MLP used for desk-scale runs, and the `RSBW` weights format.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::augment::ImageBuffer;
use crate::error::{Error, Result};
use crate::regularize::{drop_path, dropout};
use crate::rng::{Purpose, RngKey};
use crate::tensor::{Activation, Tape, Tensor, Var};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"RSBW";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyNetConfig {
    /// Side of the square canvas every input is resized to.
    pub canvas: usize,
    pub channels: usize,
    pub width: usize,
    pub depth: usize,
    pub classes: usize,
}

impl ToyNetConfig {
    pub fn input_dim(&self) -> usize {
        self.canvas * self.canvas * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.canvas == 0 || self.channels == 0 || self.width == 0 || self.classes < 2 {
            return Err(Error::config(format!("invalid network shape {self:?}")));
        }
        Ok(())
    }
}

/// Stochastic parts of a training forward pass.
#[derive(Debug, Clone, Copy)]
pub struct TrainNoise {
    pub drop_path: f64,
    pub dropout: f64,
    /// Lane `i` drives block `i`; lane `depth` drives the head dropout.
    pub key: RngKey,
}

/// `x → embed → L × (x + drop_path(fc2(gelu(fc1(x))))) → dropout → head`.
/// Weights are stored `[in × out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    pub config: ToyNetConfig,
    pub params: Vec<(String, Tensor)>,
}

fn param_shapes(cfg: &ToyNetConfig) -> Vec<(String, Vec<usize>)> {
    let (d, w, k) = (cfg.input_dim(), cfg.width, cfg.classes);
    let mut out = vec![("embed.w".to_string(), vec![d, w]), ("embed.b".to_string(), vec![w])];
    for i in 0..cfg.depth {
        out.push((format!("block{i}.fc1.w"), vec![w, w]));
        out.push((format!("block{i}.fc1.b"), vec![w]));
        out.push((format!("block{i}.fc2.w"), vec![w, w]));
        out.push((format!("block{i}.fc2.b"), vec![w]));
    }
    out.push(("head.w".to_string(), vec![w, k]));
    out.push(("head.b".to_string(), vec![k]));
    out
}

impl ToyNet {
    /// Fan-in scaled uniform init, `U(±1/√fan_in)` for weights and biases.
    pub fn init(config: ToyNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let shapes = param_shapes(&config);
        let mut params = Vec::with_capacity(shapes.len());
        for (lane, (name, shape)) in shapes.into_iter().enumerate() {
            let fan_in = if shape.len() == 2 {
                shape[0]
            } else {
                // bias of the preceding weight
                params.last().map_or(1, |(_, w): &(String, Tensor)| w.shape()[0])
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut rng = RngKey::new(seed, 0, 0, Purpose::Init).with_lane(lane as u64).stream();
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            params.push((name, Tensor::new(shape, data)?));
        }
        Ok(ToyNet { config, params })
    }

    /// Rebuilds a network from named tensors, inferring its shape.
    pub fn from_named(params: Vec<(String, Tensor)>, channels: usize) -> Result<Self> {
        let find = |n: &str| params.iter().find(|(name, _)| name == n).map(|(_, t)| t.shape().to_vec());
        let embed = find("embed.w").ok_or_else(|| Error::Format("weights lack embed.w".into()))?;
        let head = find("head.w").ok_or_else(|| Error::Format("weights lack head.w".into()))?;
        if embed.len() != 2 || head.len() != 2 || channels == 0 {
            return Err(Error::Format("embed.w and head.w must be matrices".into()));
        }
        let pixels = embed[0] / channels;
        let canvas = (pixels as f64).sqrt().round() as usize;
        if canvas * canvas * channels != embed[0] {
            return Err(Error::Format(format!("embed input {} is not a square {channels}-channel image", embed[0])));
        }
        let depth = params.iter().filter(|(n, _)| n.ends_with(".fc1.w")).count();
        let config = ToyNetConfig { canvas, channels, width: embed[1], depth, classes: head[1] };
        config.validate()?;
        let expected = param_shapes(&config);
        if expected.len() != params.len()
            || expected.iter().zip(&params).any(|((en, es), (n, t))| en != n || es.as_slice() != t.shape())
        {
            return Err(Error::Format("weights do not match the network layout".into()));
        }
        Ok(ToyNet { config, params })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Flattens images into the `[B × D]` input, resizing to the canvas
    /// when needed. Images must be standardized.
    pub fn input_batch(&self, images: &[ImageBuffer]) -> Result<Tensor> {
        let s = self.config.canvas;
        let mut data = Vec::with_capacity(images.len() * self.config.input_dim());
        for img in images {
            if img.channels() != self.config.channels {
                return Err(Error::dim(format!(
                    "{}-channel image for a {}-channel network",
                    img.channels(),
                    self.config.channels
                )));
            }
            if img.height() == s && img.width() == s {
                data.extend(img.to_chw());
            } else {
                data.extend(img.resize(s, s).to_chw());
            }
        }
        Tensor::matrix(images.len(), self.config.input_dim(), data)
    }

    /// Records the forward pass; returns the logits and the parameter
    /// handles in `params` order. Parameters are trainable leaves only when
    /// `noise` is set.
    pub fn forward(&self, tape: &mut Tape, input: Tensor, noise: Option<TrainNoise>) -> Result<(Var, Vec<Var>)> {
        if input.rank() != 2 || input.shape()[1] != self.config.input_dim() {
            return Err(Error::dim(format!("network input {:?}, expected [B × {}]", input.shape(), self.config.input_dim())));
        }
        let training = noise.is_some();
        let mut vars = Vec::with_capacity(self.params.len());
        for (_, t) in &self.params {
            vars.push(tape.leaf(t.clone(), training)?);
        }
        let x = tape.constant(input)?;
        let affine = |tape: &mut Tape, x: Var, w: Var, b: Var| -> Result<Var> {
            let y = tape.matmul(x, w)?;
            tape.add_row(y, b)
        };
        let mut h = affine(tape, x, vars[0], vars[1])?;
        for i in 0..self.config.depth {
            let p = 2 + 4 * i;
            let a = affine(tape, h, vars[p], vars[p + 1])?;
            let a = tape.activation(a, Activation::Gelu)?;
            let mut branch = affine(tape, a, vars[p + 2], vars[p + 3])?;
            if let Some(n) = noise {
                branch = drop_path(tape, branch, n.drop_path, true, &mut n.key.with_lane(i as u64).stream())?;
            }
            h = tape.add(h, branch)?;
        }
        if let Some(n) = noise {
            h = dropout(tape, h, n.dropout, true, &mut n.key.with_lane(self.config.depth as u64).stream())?;
        }
        let p = 2 + 4 * self.config.depth;
        let logits = affine(tape, h, vars[p], vars[p + 1])?;
        Ok((logits, vars))
    }

    /// Eval-mode logits, `[B × K]`.
    pub fn logits(&self, input: Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (out, _) = self.forward(&mut tape, input, None)?;
        Ok(tape.value(out).clone())
    }

    pub fn with_values(&self, values: &[Tensor]) -> Result<Self> {
        if values.len() != self.params.len() {
            return Err(Error::contract(format!("{} tensors for {} parameters", values.len(), self.params.len())));
        }
        let mut out = self.clone();
        for ((_, t), v) in out.params.iter_mut().zip(values) {
            if t.shape() != v.shape() {
                return Err(Error::dim(format!("parameter shape {:?} replaced by {:?}", t.shape(), v.shape())));
            }
            *t = v.clone();
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_weights(&self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path, channels: usize) -> Result<Self> {
        ToyNet::from_named(decode_weights(&fs::read(path)?)?, channels)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn encode_weights(params: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params {
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &e in t.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated weights file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != WEIGHTS_MAGIC {
        return Err(Error::Format("missing RSBW header".into()));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u8()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|e| e as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after weights".into()));
    }
    Ok(out)
}
