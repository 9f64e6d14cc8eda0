use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// How mixing decisions are shared across a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixMode {
    /// One method, λ and box for the whole batch; sample `i` pairs with `B−1−i`.
    Batchwise,
    /// One decision per disjoint pair; both directions of a pair are kept.
    Pairwise,
    /// One decision per sample, partner from a random cyclic shuffle.
    Elementwise,
    /// Per pair, only one mixed output is kept, so every source contributes
    /// to exactly one output row. `B` sources give `B/2` rows.
    Half,
}

impl MixMode {
    pub fn name(self) -> &'static str {
        match self {
            MixMode::Batchwise => "batchwise",
            MixMode::Pairwise => "pairwise",
            MixMode::Elementwise => "elementwise",
            MixMode::Half => "half",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "batchwise" | "batch" => Ok(MixMode::Batchwise),
            "pairwise" | "pair" => Ok(MixMode::Pairwise),
            "elementwise" | "elem" => Ok(MixMode::Elementwise),
            "half" => Ok(MixMode::Half),
            other => Err(Error::config(format!("unknown mix mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixConfig {
    /// 0 disables Mixup.
    pub mixup_alpha: f64,
    /// 0 disables CutMix.
    pub cutmix_alpha: f64,
    /// Probability of CutMix over Mixup when both are enabled.
    pub switch_prob: f64,
    pub mode: MixMode,
    /// Probability that a mixing decision mixes at all.
    pub apply_prob: f64,
}

impl MixConfig {
    pub fn new(mixup_alpha: f64, cutmix_alpha: f64) -> Self {
        MixConfig { mixup_alpha, cutmix_alpha, switch_prob: 0.5, mode: MixMode::Batchwise, apply_prob: 1.0 }
    }

    pub fn enabled(&self) -> bool {
        self.mixup_alpha > 0.0 || self.cutmix_alpha > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("switch_prob", self.switch_prob), ("apply_prob", self.apply_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} {p} outside [0, 1]")));
            }
        }
        if self.mixup_alpha < 0.0 || self.cutmix_alpha < 0.0 {
            return Err(Error::config("mixing alphas must be non-negative"));
        }
        if !self.enabled() && self.apply_prob > 0.0 {
            return Err(Error::config("mixing requested but both alphas are zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixMethod {
    None,
    Mixup,
    CutMix,
}

/// CutMix rectangle, half-open: rows `row0..row1`, columns `col0..col1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixBox {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

impl MixBox {
    pub fn area(&self) -> usize {
        (self.row1 - self.row0) * (self.col1 - self.col0)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row0..self.row1).contains(&row) && (self.col0..self.col1).contains(&col)
    }
}

/// Per output row: which source is the primary image, which is mixed in,
/// with what weight and method.
#[derive(Debug, Clone, PartialEq)]
pub struct MixOutcome {
    pub primary: Vec<usize>,
    pub partner: Vec<usize>,
    /// Weight of the primary image; for CutMix the exact retained pixel
    /// fraction.
    pub lambda: Vec<f64>,
    pub method: Vec<MixMethod>,
    pub boxes: Vec<Option<MixBox>>,
}

impl MixOutcome {
    pub fn unmixed(batch: usize) -> Self {
        MixOutcome {
            primary: (0..batch).collect(),
            partner: (0..batch).collect(),
            lambda: vec![1.0; batch],
            method: vec![MixMethod::None; batch],
            boxes: vec![None; batch],
        }
    }

    pub fn len(&self) -> usize {
        self.primary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primary.is_empty()
    }
}

/// `λ ~ Beta(α, α)` from two Gamma draws.
pub fn sample_lambda(alpha: f64, rng: &mut RngStream) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::config(format!("Beta alpha must be positive, got {alpha}")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::config(e.to_string()))?;
    let x = gamma.sample(rng);
    let y = gamma.sample(rng);
    if x + y == 0.0 {
        // both draws underflowed; the mass sits at the endpoints
        return Ok(if rng.random::<bool>() { 1.0 } else { 0.0 });
    }
    Ok((x / (x + y)).clamp(0.0, 1.0))
}

/// Samples a box with sides `√(1−λ)·H` and `√(1−λ)·W` (rounded) around a
/// uniform integer center, clipped to the image. Returns the box and the
/// retained fraction `1 − area/(H·W)`.
pub fn cutmix_box(lambda: f64, height: usize, width: usize, rng: &mut RngStream) -> (MixBox, f64) {
    let cut = (1.0 - lambda.clamp(0.0, 1.0)).sqrt();
    let cut_h = (height as f64 * cut).round() as i64;
    let cut_w = (width as f64 * cut).round() as i64;
    let cy = rng.random_range(0..height) as i64;
    let cx = rng.random_range(0..width) as i64;
    let clip = |v: i64, hi: usize| v.clamp(0, hi as i64) as usize;
    let (r0, c0) = (cy - cut_h / 2, cx - cut_w / 2);
    let b =
        MixBox { row0: clip(r0, height), col0: clip(c0, width), row1: clip(r0 + cut_h, height), col1: clip(c0 + cut_w, width) };
    let lambda_adj = 1.0 - b.area() as f64 / (height * width) as f64;
    (b, lambda_adj)
}

#[derive(Clone, Copy)]
struct Decision {
    method: MixMethod,
    lambda: f64,
    bbox: Option<MixBox>,
}

const UNMIXED: Decision = Decision { method: MixMethod::None, lambda: 1.0, bbox: None };

/// Draw order: apply uniform, method uniform (only when both alphas are
/// enabled), λ, then the box center for CutMix.
fn decide(cfg: &MixConfig, height: usize, width: usize, rng: &mut RngStream) -> Result<Decision> {
    if rng.random::<f64>() >= cfg.apply_prob || !cfg.enabled() {
        return Ok(UNMIXED);
    }
    let use_cutmix = match (cfg.mixup_alpha > 0.0, cfg.cutmix_alpha > 0.0) {
        (true, true) => rng.random::<f64>() < cfg.switch_prob,
        (false, true) => true,
        _ => false,
    };
    if use_cutmix {
        let lam = sample_lambda(cfg.cutmix_alpha, rng)?;
        let (bbox, lam_adj) = cutmix_box(lam, height, width, rng);
        Ok(Decision { method: MixMethod::CutMix, lambda: lam_adj, bbox: Some(bbox) })
    } else {
        let lam = sample_lambda(cfg.mixup_alpha, rng)?;
        Ok(Decision { method: MixMethod::Mixup, lambda: lam, bbox: None })
    }
}

/// Random permutation with no fixed points (Sattolo's single-cycle shuffle).
fn cyclic_shuffle(n: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..i);
        p.swap(i, j);
    }
    p
}

/// Mixes a `B×C×H×W` batch. Pixels follow `λ·x + (1−λ)·x_partner` for
/// Mixup and a pasted partner box for CutMix; every output row reads
/// unmixed source images.
pub fn mix_batch(images: &Tensor, labels: &[usize], cfg: &MixConfig, rng: &mut RngStream) -> Result<(Tensor, MixOutcome)> {
    cfg.validate()?;
    let [b, c, h, w] = match images.shape() {
        &[b, c, h, w] => [b, c, h, w],
        s => return Err(Error::dim(format!("mix_batch expects B×C×H×W, got {s:?}"))),
    };
    if labels.len() != b {
        return Err(Error::dim(format!("{} labels for batch of {b}", labels.len())));
    }
    let mut outcome = MixOutcome { primary: vec![], partner: vec![], lambda: vec![], method: vec![], boxes: vec![] };
    let push = |o: &mut MixOutcome, p: usize, q: usize, d: &Decision| {
        o.primary.push(p);
        o.partner.push(if d.method == MixMethod::None { p } else { q });
        o.lambda.push(d.lambda);
        o.method.push(d.method);
        o.boxes.push(d.bbox);
    };
    match cfg.mode {
        MixMode::Batchwise => {
            let d = decide(cfg, h, w, rng)?;
            for i in 0..b {
                let partner = if b > 1 { b - 1 - i } else { i };
                let d = if partner == i { UNMIXED } else { d };
                push(&mut outcome, i, partner, &d);
            }
        }
        MixMode::Elementwise => {
            let partners = cyclic_shuffle(b, rng);
            for (i, &q) in partners.iter().enumerate() {
                let d = if q == i { UNMIXED } else { decide(cfg, h, w, rng)? };
                push(&mut outcome, i, q, &d);
            }
        }
        MixMode::Pairwise => {
            let mut order: Vec<usize> = (0..b).collect();
            order.shuffle(rng);
            let mut slots: Vec<Option<(usize, Decision)>> = (0..b).map(|_| None).collect();
            for pair in order.chunks(2) {
                match *pair {
                    [p, q] => {
                        // both directions share λ and box
                        let d = decide(cfg, h, w, rng)?;
                        slots[p] = Some((q, d));
                        slots[q] = Some((p, d));
                    }
                    [p] => slots[p] = Some((p, UNMIXED)),
                    _ => unreachable!(),
                }
            }
            for (i, slot) in slots.into_iter().enumerate() {
                let (q, d) = slot.expect("every index is paired");
                push(&mut outcome, i, q, &d);
            }
        }
        MixMode::Half => {
            if b % 2 != 0 {
                return Err(Error::config(format!("half mixing needs an even batch, got {b}")));
            }
            let mut order: Vec<usize> = (0..b).collect();
            order.shuffle(rng);
            for pair in order.chunks(2) {
                let d = decide(cfg, h, w, rng)?;
                push(&mut outcome, pair[0], pair[1], &d);
            }
        }
    }

    let plane = h * w;
    let sample = c * plane;
    let src = images.data();
    let mut out = Vec::with_capacity(outcome.len() * sample);
    for r in 0..outcome.len() {
        let (p, q) = (outcome.primary[r], outcome.partner[r]);
        let xp = &src[p * sample..(p + 1) * sample];
        let xq = &src[q * sample..(q + 1) * sample];
        match outcome.method[r] {
            MixMethod::None => out.extend_from_slice(xp),
            MixMethod::Mixup => {
                let lam = outcome.lambda[r];
                out.extend(xp.iter().zip(xq).map(|(a, b)| lam * a + (1.0 - lam) * b));
            }
            MixMethod::CutMix => {
                let bx = outcome.boxes[r].expect("cutmix rows carry a box");
                let start = out.len();
                out.extend_from_slice(xp);
                let row = &mut out[start..];
                for ch in 0..c {
                    for y in bx.row0..bx.row1 {
                        let base = ch * plane + y * w;
                        row[base + bx.col0..base + bx.col1].copy_from_slice(&xq[base + bx.col0..base + bx.col1]);
                    }
                }
            }
        }
    }
    let mixed = Tensor::new(vec![outcome.len(), c, h, w], out)?;
    Ok((mixed, outcome))
}
