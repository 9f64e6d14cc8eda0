//! Linear softmax classifier on standardized raw pixels, used as the
//! baseline that trained networks must beat.

use rand::seq::SliceRandom;

use super::dataset::Dataset;
use super::model::ToyNet;
use super::train::evaluate;
use crate::error::Result;
use crate::mix::{build_targets, ce_loss, BceStyle, LossKind, MixOutcome};
use crate::optim::{AdamWConfig, Optimizer, OptimizerConfig, ParamSlot};
use crate::rng::{Purpose, RngKey};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { epochs: 10, batch_size: 100, lr: 1e-3, weight_decay: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub val_top1: f64,
    pub test_top1: f64,
}

/// Fits `softmax(x·W + b)` with AdamW and reports top-1 at the
/// native resolution without cropping.
pub fn linear_probe(data: &Dataset, cfg: &ProbeConfig) -> Result<ProbeResult> {
    let stats = data.train.channel_stats()?;
    let (h, w, c) = (data.train.height, data.train.width, data.train.channels);
    let d = h * w * c;
    let k = data.num_classes();
    let inputs: Vec<Vec<f64>> =
        (0..data.train.len()).map(|i| data.train.image(i).normalize(&stats).map(|img| img.to_chw())).collect::<Result<_>>()?;
    let mut slots = vec![ParamSlot::new("w", Tensor::zeros(&[d, k])), ParamSlot::new("b", Tensor::zeros(&[k]))];
    let mut opt = Optimizer::new(OptimizerConfig::AdamW(AdamWConfig::new(cfg.lr, cfg.weight_decay)))?;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut RngKey::new(cfg.seed, epoch as u64, 0, Purpose::Sampler).stream());
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let x: Vec<f64> = batch.iter().flat_map(|&i| inputs[i].iter().copied()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| data.train.label(i)).collect();
            let targets = build_targets(&labels, &MixOutcome::unmixed(labels.len()), k, LossKind::Ce, 0.0, BceStyle::Multilabel)?;
            let mut tape = Tape::new();
            let xv = tape.constant(Tensor::matrix(batch.len(), d, x)?)?;
            let wv = tape.param(slots[0].value.clone())?;
            let bv = tape.param(slots[1].value.clone())?;
            let z = tape.matmul(xv, wv)?;
            let logits = tape.add_row(z, bv)?;
            let loss = ce_loss(&mut tape, logits, &targets)?;
            tape.backward(loss)?;
            for (slot, v) in slots.iter_mut().zip([wv, bv]) {
                slot.set_grad(tape.take_grad(v).expect("parameter gradient"))?;
            }
            opt.step(&mut slots, cfg.lr)?;
        }
    }
    let net = as_network(&slots, c)?;
    Ok(ProbeResult {
        val_top1: evaluate(&net, &data.val, h, 1.0, &stats)?,
        test_top1: evaluate(&net, &data.test, h, 1.0, &stats)?,
    })
}

/// Wraps the fitted map as a depth-0 network of width K with an identity
/// head, so evaluation shares the network path.
fn as_network(slots: &[ParamSlot], channels: usize) -> Result<ToyNet> {
    let k = slots[1].value.numel();
    let mut eye = vec![0.0; k * k];
    for i in 0..k {
        eye[i * k + i] = 1.0;
    }
    let params = vec![
        ("embed.w".to_string(), slots[0].value.clone()),
        ("embed.b".to_string(), slots[1].value.clone()),
        ("head.w".to_string(), Tensor::matrix(k, k, eye)?),
        ("head.b".to_string(), Tensor::zeros(&[k])),
    ];
    ToyNet::from_named(params, channels)
}
