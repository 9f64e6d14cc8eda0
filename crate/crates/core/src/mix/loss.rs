//! Classification losses recorded as fused tape ops.

use super::{TargetMatrix, TargetSemantics};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

fn check_shape(tape: &Tape, logits: Var, targets: &TargetMatrix) -> Result<(usize, usize)> {
    match tape.value(logits).shape() {
        &[b, k] if b == targets.rows && k == targets.classes => Ok((b, k)),
        s => Err(Error::dim(format!("logits {s:?} vs targets {}×{}", targets.rows, targets.classes))),
    }
}

/// Mean over rows of `−Σ_k t_k · log softmax(z)_k`.
pub fn ce_loss(tape: &mut Tape, logits: Var, targets: &TargetMatrix) -> Result<Var> {
    if targets.semantics != TargetSemantics::Distribution {
        return Err(Error::contract("cross-entropy needs distribution targets"));
    }
    let (b, k) = check_shape(tape, logits, targets)?;
    let z = tape.value(logits).data();
    let mut total = 0.0;
    let mut probs = vec![0.0; b * k];
    for r in 0..b {
        let zr = &z[r * k..(r + 1) * k];
        let max = zr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + zr.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (j, &v) in zr.iter().enumerate() {
            total -= targets.values[r * k + j] * (v - lse);
            probs[r * k + j] = (v - lse).exp();
        }
    }
    let t = targets.values.clone();
    let backward = Box::new(move |_: &[&Tensor], _: &Tensor, g: &[f64]| {
        let scale = g[0] / b as f64;
        let mut grad = vec![0.0; b * k];
        for r in 0..b {
            let mass: f64 = t[r * k..(r + 1) * k].iter().sum();
            for j in 0..k {
                let i = r * k + j;
                grad[i] = scale * (probs[i] * mass - t[i]);
            }
        }
        vec![Some(grad)]
    });
    tape.custom(&[logits], Tensor::scalar(total / b as f64), backward)
}

/// Mean over all `B·K` entries of the logit-form binary cross-entropy
/// `max(z, 0) − z·t + log(1 + e^{−|z|})`.
pub fn bce_loss(tape: &mut Tape, logits: Var, targets: &TargetMatrix) -> Result<Var> {
    if let Some(v) = targets.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::contract(format!("BCE target {v} outside [0, 1]")));
    }
    let (b, k) = check_shape(tape, logits, targets)?;
    let n = (b * k) as f64;
    let z = tape.value(logits).data();
    let total: f64 = z.iter().zip(&targets.values).map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()).sum();
    let t = targets.values.clone();
    let backward = Box::new(move |inputs: &[&Tensor], _: &Tensor, g: &[f64]| {
        let scale = g[0] / n;
        let grad = inputs[0].data().iter().zip(&t).map(|(&z, &t)| scale * (crate::tensor::sigmoid(z) - t)).collect();
        vec![Some(grad)]
    });
    tape.custom(&[logits], Tensor::scalar(total / n), backward)
}
