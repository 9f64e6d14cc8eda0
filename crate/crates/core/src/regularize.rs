//! Stochastic depth, dropout, EMA weight averaging and the
//! repeated-augmentation sampler.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{Purpose, RngKey, RngStream};
use crate::tensor::{Tape, Tensor, Var};

fn check_rate(what: &str, rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::config(format!("{what} rate {rate} outside [0, 1)")))
    }
}

fn masked(tape: &mut Tape, x: Var, mask: Vec<f64>) -> Result<Var> {
    let shape = tape.value(x).shape().to_vec();
    let m = tape.constant(Tensor::new(shape, mask)?)?;
    tape.mul(x, m)
}

/// Per-sample residual-branch drop on a `[B × D]` activation. Kept rows are
/// scaled by `1/(1 − rate)`. Draws one uniform per row in training mode.
pub fn drop_path(tape: &mut Tape, x: Var, rate: f64, training: bool, rng: &mut RngStream) -> Result<Var> {
    check_rate("drop path", rate)?;
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let shape = tape.value(x).shape();
    if shape.len() != 2 {
        return Err(Error::dim(format!("drop path expects [B × D], got {shape:?}")));
    }
    let (b, d) = (shape[0], shape[1]);
    let keep = 1.0 / (1.0 - rate);
    let mut mask = Vec::with_capacity(b * d);
    for _ in 0..b {
        let v = if rng.random::<f64>() < rate { 0.0 } else { keep };
        mask.extend(std::iter::repeat_n(v, d));
    }
    masked(tape, x, mask)
}

/// Inverted per-element dropout.
pub fn dropout(tape: &mut Tape, x: Var, rate: f64, training: bool, rng: &mut RngStream) -> Result<Var> {
    check_rate("dropout", rate)?;
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - rate);
    let n = tape.value(x).numel();
    let mask = (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
    masked(tape, x, mask)
}

/// Exponential moving average of a parameter list. The shadow starts as a
/// copy of the live weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    pub decay: f64,
    pub shadow: Vec<Tensor>,
}

impl EmaState {
    pub fn new<'a>(decay: f64, live: impl IntoIterator<Item = &'a Tensor>) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::config(format!("EMA decay {decay} outside [0, 1)")));
        }
        Ok(EmaState { decay, shadow: live.into_iter().cloned().collect() })
    }

    /// `shadow ← d·shadow + (1 − d)·live`.
    pub fn update<'a>(&mut self, live: impl IntoIterator<Item = &'a Tensor>) -> Result<()> {
        let live: Vec<&Tensor> = live.into_iter().collect();
        if live.len() != self.shadow.len() {
            return Err(Error::contract(format!("EMA tracks {} tensors, got {}", self.shadow.len(), live.len())));
        }
        if let Some((s, l)) = self.shadow.iter().zip(&live).find(|(s, l)| s.shape() != l.shape()) {
            return Err(Error::contract(format!("EMA shape drift: {:?} vs {:?}", s.shape(), l.shape())));
        }
        let d = self.decay;
        for (s, l) in self.shadow.iter_mut().zip(live) {
            for (s, &l) in s.data_mut().iter_mut().zip(l.data()) {
                *s = d * *s + (1.0 - d) * l;
            }
        }
        Ok(())
    }
}

/// One sampler slot: the dataset index and which repeat of it this is. The
/// repeat number selects an independent augmentation stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleSlot {
    pub index: usize,
    pub repeat: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedAugSampler {
    pub dataset_size: usize,
    pub batch_size: usize,
    /// 1 disables repetition.
    pub repeats: usize,
    pub seed: u64,
}

impl RepeatedAugSampler {
    pub fn new(dataset_size: usize, batch_size: usize, repeats: usize, seed: u64) -> Result<Self> {
        if repeats == 0 || batch_size == 0 {
            return Err(Error::config("batch size and repeats must be positive"));
        }
        if !batch_size.is_multiple_of(repeats) {
            return Err(Error::config(format!("batch size {batch_size} not divisible by repeats {repeats}")));
        }
        Ok(RepeatedAugSampler { dataset_size, batch_size, repeats, seed })
    }

    /// Epoch order: shuffle, keep the first `⌈N/m⌉` indices, repeat each `m`
    /// times in place. Length is `⌈N/m⌉·m`.
    pub fn indices(&self, epoch: u64) -> Vec<SampleSlot> {
        let mut order: Vec<usize> = (0..self.dataset_size).collect();
        let mut rng = RngKey::new(self.seed, epoch, 0, Purpose::Sampler).stream();
        order.shuffle(&mut rng);
        let m = self.repeats;
        order.truncate(self.dataset_size.div_ceil(m));
        order.iter().flat_map(|&index| (0..m).map(move |repeat| SampleSlot { index, repeat })).collect()
    }

    /// Full batches of the epoch; a trailing partial batch is dropped.
    pub fn batches(&self, epoch: u64) -> Vec<Vec<SampleSlot>> {
        self.indices(epoch).chunks_exact(self.batch_size).map(<[SampleSlot]>::to_vec).collect()
    }

    /// The part of the epoch order a data worker `worker` of `workers` loads:
    /// every `workers`-th slot starting at `worker`.
    pub fn shard(&self, epoch: u64, worker: usize, workers: usize) -> Vec<SampleSlot> {
        self.indices(epoch).into_iter().skip(worker).step_by(workers.max(1)).collect()
    }
}

/// Sampler order for `epoch` (see [`RepeatedAugSampler::indices`]).
pub fn ra_indices(sampler: &RepeatedAugSampler, epoch: u64) -> Vec<SampleSlot> {
    sampler.indices(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn stream(i: u64) -> RngStream {
        RngKey::new(5, 0, i, Purpose::DropPath).stream()
    }

    #[test]
    fn identity_cases() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::ones(&[3, 4])).unwrap();
        assert_eq!(drop_path(&mut tape, x, 0.0, true, &mut stream(0)).unwrap(), x);
        assert_eq!(drop_path(&mut tape, x, 0.7, false, &mut stream(0)).unwrap(), x);
        assert_eq!(dropout(&mut tape, x, 0.0, true, &mut stream(0)).unwrap(), x);
        assert!(matches!(drop_path(&mut tape, x, 1.0, true, &mut stream(0)), Err(Error::Config(_))));
    }

    #[test]
    fn drop_path_rows_and_expectation() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[10_000, 2], 3.0)).unwrap();
        let y = drop_path(&mut tape, x, 0.5, true, &mut stream(1)).unwrap();
        let out = tape.value(y);
        let kept = out.rows().filter(|r| r[0] != 0.0).count();
        assert!(out.rows().all(|r| r[0] == r[1] && (r[0] == 0.0 || r[0] == 6.0)));
        let frac = kept as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
        let mean = out.data().iter().sum::<f64>() / 20_000.0;
        assert!((mean / 3.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn dropout_zero_fraction() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::ones(&[100_000])).unwrap();
        let y = dropout(&mut tape, x, 0.25, true, &mut stream(2)).unwrap();
        let zeros = tape.value(y).data().iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((0.24..=0.26).contains(&zeros));
    }

    #[test]
    fn ema_geometric_convergence() {
        let live = Tensor::from_vec(vec![1.0, -2.0]);
        let mut ema = EmaState::new(0.9, [&Tensor::from_vec(vec![0.0, 0.0])]).unwrap();
        for _ in 0..7 {
            ema.update([&live]).unwrap();
        }
        let d7 = 0.9f64.powi(7);
        assert!((ema.shadow[0].data()[0] - (1.0 - d7)).abs() < 1e-15);
        assert!((ema.shadow[0].data()[1] - (-2.0 + 2.0 * d7)).abs() < 1e-15);

        let mut instant = EmaState::new(0.0, [&Tensor::zeros(&[2])]).unwrap();
        instant.update([&live]).unwrap();
        assert_eq!(instant.shadow[0], live);
        assert!(matches!(instant.update([&Tensor::zeros(&[3])]), Err(Error::Contract(_))));
    }

    #[test]
    fn ra_batches_have_b_over_m_distinct() {
        let s = RepeatedAugSampler::new(100, 6, 3, 7).unwrap();
        let idx = s.indices(0);
        assert_eq!(idx.len(), 102);
        for batch in s.batches(0) {
            let distinct: HashSet<usize> = batch.iter().map(|x| x.index).collect();
            assert_eq!(distinct.len(), 2);
        }
        let groups: Vec<usize> = idx.chunks(3).map(|g| g[0].index).collect();
        assert_eq!(groups.iter().collect::<HashSet<_>>().len(), groups.len());
        assert!(idx.chunks(3).all(|g| g.iter().enumerate().all(|(r, x)| x.repeat == r && x.index == g[0].index)));
    }

    #[test]
    fn plain_epoch_is_permutation() {
        let s = RepeatedAugSampler::new(50, 5, 1, 1).unwrap();
        let mut idx: Vec<usize> = s.indices(3).iter().map(|x| x.index).collect();
        assert_ne!(idx, (0..50).collect::<Vec<_>>());
        idx.sort();
        assert_eq!(idx, (0..50).collect::<Vec<_>>());
        assert_ne!(s.indices(3), s.indices(4));
    }

    #[test]
    fn shards_interleave_to_global_order() {
        let s = RepeatedAugSampler::new(40, 6, 3, 2).unwrap();
        let global = s.indices(1);
        let (a, b) = (s.shard(1, 0, 2), s.shard(1, 1, 2));
        let merged: Vec<SampleSlot> = (0..global.len()).map(|i| if i % 2 == 0 { a[i / 2] } else { b[i / 2] }).collect();
        assert_eq!(merged, global);
        assert_eq!(s.shard(1, 0, 1), global);
    }

    #[test]
    fn indivisible_batch_rejected() {
        assert!(matches!(RepeatedAugSampler::new(10, 64, 3, 0), Err(Error::Config(_))));
    }
}
