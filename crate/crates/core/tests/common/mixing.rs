//! Mixing-event invariants over many random batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsb_core::mix::{build_targets, mix_batch, BceStyle, LossKind, MixConfig, MixMethod, MixMode};
use rsb_core::rng::{Purpose, RngKey};
use rsb_core::tensor::Tensor;

use super::{ensure, Check};

pub const EVENTS: u64 = 10_000;
const MODES: [MixMode; 4] = [MixMode::Batchwise, MixMode::Pairwise, MixMode::Elementwise, MixMode::Half];
const B: usize = 4;
const K: usize = 10;
const EPS: f64 = 0.1;

/// Image `b` is the constant `b + 1`, so pasted pixels can be attributed.
fn batch(h: usize, w: usize) -> Tensor {
    let data = (0..B).flat_map(|b| std::iter::repeat_n((b + 1) as f64, h * w)).collect();
    Tensor::new(vec![B, 1, h, w], data).unwrap()
}

/// CutMix weights equal the retained pixel count, mixup pixels follow the
/// convex combination, and every target row has the right form.
pub fn event_invariants() -> Check {
    let mut shape_rng = ChaCha8Rng::seed_from_u64(44);
    let mut cut_rows = 0usize;
    for i in 0..EVENTS {
        let (h, w) = (shape_rng.random_range(3..=16), shape_rng.random_range(3..=16));
        let cfg = MixConfig { mode: MODES[i as usize % 4], ..MixConfig::new(0.8, 1.0) };
        let labels: Vec<usize> = (0..B).map(|_| shape_rng.random_range(0..K)).collect();
        let images = batch(h, w);
        let (mixed, out) =
            mix_batch(&images, &labels, &cfg, &mut RngKey::new(7, 0, i, Purpose::Mix).stream()).map_err(|e| e.to_string())?;
        let plane = h * w;
        for r in 0..out.len() {
            let px = &mixed.data()[r * plane..(r + 1) * plane];
            let (p, q, lam) = ((out.primary[r] + 1) as f64, (out.partner[r] + 1) as f64, out.lambda[r]);
            ensure((0.0..=1.0).contains(&lam), || format!("event {i}: lambda {lam}"))?;
            match out.method[r] {
                MixMethod::CutMix => {
                    cut_rows += 1;
                    ensure(p != q, || format!("event {i}: cutmix row {r} mixes with itself"))?;
                    let pasted = px.iter().filter(|&&v| v == q).count();
                    let kept = px.iter().filter(|&&v| v == p).count();
                    ensure(pasted + kept == plane, || format!("event {i}: stray pixel values"))?;
                    let exact = 1.0 - pasted as f64 / plane as f64;
                    ensure(lam == exact, || format!("event {i}: cutmix lambda {lam} but {kept}/{plane} pixels kept"))?;
                }
                MixMethod::Mixup => {
                    let want = lam * p + (1.0 - lam) * q;
                    ensure(px.iter().all(|&v| (v - want).abs() <= 1e-12), || format!("event {i}: mixup pixels"))?;
                }
                MixMethod::None => ensure(px.iter().all(|&v| v == p), || format!("event {i}: unmixed row altered"))?,
            }
        }
        for (loss, style) in [(LossKind::Ce, BceStyle::Normalized), (LossKind::Bce, BceStyle::Normalized)] {
            let t = build_targets(&labels, &out, K, loss, EPS, style).map_err(|e| e.to_string())?;
            for r in 0..t.rows {
                let s: f64 = t.row(r).iter().sum();
                ensure((s - 1.0).abs() <= 1e-9, || format!("event {i}: {loss:?} row {r} sums to {s}"))?;
            }
        }
        let t = build_targets(&labels, &out, K, LossKind::Bce, EPS, BceStyle::Multilabel).map_err(|e| e.to_string())?;
        let (lo, hi) = (EPS / K as f64, 1.0 - EPS);
        ensure(t.values.iter().all(|&v| v == lo || v == hi), || format!("event {i}: multilabel value outside {{{lo}, {hi}}}"))?;
    }
    Ok(format!("{EVENTS} events, {cut_rows} cutmix rows with exact lambda"))
}

/// With both alphas on, batchwise events pick CutMix half the time.
pub fn switch_frequency() -> Check {
    let cfg = MixConfig::new(0.8, 1.0);
    let labels = vec![0; B];
    let images = batch(4, 4);
    let mut cut = 0usize;
    for i in 0..EVENTS {
        let (_, out) =
            mix_batch(&images, &labels, &cfg, &mut RngKey::new(8, 0, i, Purpose::Mix).stream()).map_err(|e| e.to_string())?;
        cut += (out.method[0] == MixMethod::CutMix) as usize;
    }
    let rate = cut as f64 / EVENTS as f64;
    ensure((rate - 0.5).abs() <= 0.02, || format!("cutmix rate {rate}"))?;
    Ok(format!("cutmix rate {rate:.4}"))
}

pub fn mixing_invariants() -> Check {
    let a = event_invariants()?;
    let b = switch_frequency()?;
    Ok(format!("{a}; {b}"))
}
