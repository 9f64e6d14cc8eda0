//! Tape gradients against central differences on the loss and
//! regularization graphs used in training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsb_core::mix::{bce_loss, build_targets, ce_loss, mix_batch, BceStyle, LossKind, MixConfig, MixMode, TargetMatrix};
use rsb_core::regularize::{drop_path, dropout};
use rsb_core::rng::{Purpose, RngKey};
use rsb_core::tensor::{grad_check, Activation, Tape, Tensor, Var};
use rsb_core::Result;

use super::{ensure, Check};

pub const SEEDS: u64 = 20;
pub const MAX_REL: f64 = 1e-4;
const STEP: f64 = 1e-5;
const B: usize = 6;
const K: usize = 5;
const D: usize = 4;

#[derive(Clone, Copy, Debug)]
pub enum Graph {
    CeSmoothed,
    BceMultilabel,
    BceNormalized,
    DropPath,
    Dropout,
}

pub const GRAPHS: [Graph; 5] = [Graph::CeSmoothed, Graph::BceMultilabel, Graph::BceNormalized, Graph::DropPath, Graph::Dropout];

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn mixed_targets(seed: u64, loss: LossKind, style: BceStyle, smoothing: f64) -> Result<TargetMatrix> {
    let labels: Vec<usize> = (0..B).map(|i| (i * 7 + seed as usize) % K).collect();
    let cfg = MixConfig { mode: MixMode::Elementwise, ..MixConfig::new(0.8, 1.0) };
    let images = Tensor::new(vec![B, 1, 4, 4], vec![0.0; B * 16])?;
    let (_, outcome) = mix_batch(&images, &labels, &cfg, &mut RngKey::new(seed, 0, 0, Purpose::Mix).stream())?;
    build_targets(&labels, &outcome, K, loss, smoothing, style)
}

/// Worst relative disagreement for one graph and seed.
pub fn check_graph(graph: Graph, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    match graph {
        Graph::CeSmoothed | Graph::BceMultilabel | Graph::BceNormalized => {
            let (loss, style, smoothing) = match graph {
                Graph::CeSmoothed => (LossKind::Ce, BceStyle::Normalized, 0.1),
                Graph::BceMultilabel => (LossKind::Bce, BceStyle::Multilabel, 0.1),
                _ => (LossKind::Bce, BceStyle::Normalized, 0.0),
            };
            let targets = mixed_targets(seed, loss, style, smoothing)?;
            let x = random(&mut rng, B, K, 3.0);
            grad_check(
                |t: &mut Tape, v: Var| match loss {
                    LossKind::Ce => ce_loss(t, v, &targets),
                    LossKind::Bce => bce_loss(t, v, &targets),
                },
                &x,
                STEP,
            )
        }
        Graph::DropPath | Graph::Dropout => {
            let targets = mixed_targets(seed, LossKind::Ce, BceStyle::Normalized, 0.1)?;
            let x = random(&mut rng, B, D, 1.0);
            let w = random(&mut rng, D, K, 1.0);
            let purpose = if let Graph::DropPath = graph { Purpose::DropPath } else { Purpose::Dropout };
            let key = RngKey::new(seed, 0, 0, purpose);
            grad_check(
                |t: &mut Tape, v: Var| {
                    let wv = t.constant(w.clone())?;
                    let h = t.matmul(v, wv)?;
                    let h = t.activation(h, Activation::Gelu)?;
                    // the mask must be identical on every evaluation
                    let mut stream = key.stream();
                    let h = match graph {
                        Graph::DropPath => drop_path(t, h, 0.3, true, &mut stream)?,
                        _ => dropout(t, h, 0.3, true, &mut stream)?,
                    };
                    ce_loss(t, h, &targets)
                },
                &x,
                STEP,
            )
        }
    }
}

pub fn gradient_suite() -> Check {
    let mut worst = 0.0f64;
    for graph in GRAPHS {
        for seed in 0..SEEDS {
            let rel = check_graph(graph, seed).map_err(|e| format!("{graph:?} seed {seed}: {e}"))?;
            ensure(rel < MAX_REL, || format!("{graph:?} seed {seed}: max rel error {rel:.3e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("{} graphs x {SEEDS} seeds, max rel error {worst:.2e}", GRAPHS.len()))
}
