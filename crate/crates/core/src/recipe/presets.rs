use super::{OptimizerKind, OptimizerParams, RandAugmentParams, Recipe, ScheduleKind, ScheduleParams};
use crate::augment::Mstd;
use crate::error::{Error, Result};
use crate::mix::{BceStyle, LossKind, MixMode};

pub const PRESET_NAMES: [&str; 10] = ["a1", "a2", "a3", "b", "c1", "c2", "d", "pytorch-baseline", "fixres", "deit"];

/// Repeat count for presets with repeated augmentation. Must divide every
/// preset batch (2048, 1024, 512).
pub(super) const PRESET_REPEATS: usize = 2;

fn optimizer(kind: OptimizerKind, lr: f64, weight_decay: f64, reference_batch: usize) -> OptimizerParams {
    let (beta2, eps) = match kind {
        OptimizerKind::Lamb => (0.999, 1e-6),
        OptimizerKind::RmsPropTf => (0.999, 1e-3),
        _ => (0.999, 1e-8),
    };
    OptimizerParams {
        kind,
        lr,
        weight_decay,
        beta1: 0.9,
        beta2,
        eps,
        momentum: 0.9,
        rho: 0.9,
        delta: 0.1,
        wd_ratio: 0.1,
        trust_clip: None,
        reference_batch,
    }
}

fn cosine(warmup: f64) -> ScheduleParams {
    ScheduleParams {
        kind: ScheduleKind::Cosine,
        warmup_epochs: warmup,
        min_lr_ratio: 1e-6,
        decay_rate: 1.0,
        decay_interval: 1.0,
        milestones: Vec::new(),
        noise_range: (0.0, 1.0),
        noise_std: 0.0,
    }
}

fn randaugment(magnitude: f64, num_ops: usize, mstd: f64) -> RandAugmentParams {
    RandAugmentParams { enabled: true, magnitude, num_ops, mstd: Mstd::Gaussian(mstd) }
}

/// Shared skeleton of the three A procedures (A1 values).
fn a1() -> Recipe {
    Recipe {
        name: "a1".into(),
        train_res: 224,
        test_res: 224,
        test_crop_ratio: 0.95,
        epochs: 600,
        batch_size: 2048,
        seed: 0,
        optimizer: optimizer(OptimizerKind::Lamb, 5e-3, 0.01, 2048),
        scale_lr_for_batch: false,
        schedule: cosine(5.0),
        loss: LossKind::Bce,
        bce_style: BceStyle::Multilabel,
        smoothing: 0.1,
        dropout: 0.0,
        drop_path: 0.05,
        repeated_aug: Some(PRESET_REPEATS),
        grad_clip: None,
        randaugment: randaugment(7.0, 2, 0.5),
        mixup_alpha: 0.2,
        cutmix_alpha: 1.0,
        mix_mode: MixMode::Batchwise,
        mix_switch_prob: 0.5,
        mix_apply_prob: 1.0,
        erasing_prob: 0.0,
        erasing_count: 1,
        ema: None,
        rrc_scale: (0.08, 1.0),
        rrc_ratio: (3.0 / 4.0, 4.0 / 3.0),
        flip_prob: 0.5,
        model_width: 128,
        model_depth: 4,
    }
}

/// Shared skeleton of the alternative procedures (C.1 values).
fn c1() -> Recipe {
    Recipe {
        name: "c1".into(),
        epochs: 800,
        optimizer: optimizer(OptimizerKind::Sgd, 0.88, 1e-5, 2048),
        loss: LossKind::Ce,
        smoothing: 0.1,
        dropout: 0.25,
        drop_path: 0.1,
        repeated_aug: None,
        grad_clip: Some(0.025),
        randaugment: randaugment(7.0, 3, 1.0),
        mixup_alpha: 0.2,
        cutmix_alpha: 1.0,
        erasing_prob: 0.4,
        erasing_count: 1,
        ..a1()
    }
}

/// Classic step-decay SGD column.
fn pytorch_baseline() -> Recipe {
    Recipe {
        name: "pytorch-baseline".into(),
        test_crop_ratio: 0.875,
        epochs: 90,
        batch_size: 256,
        optimizer: optimizer(OptimizerKind::Sgd, 0.1, 1e-4, 256),
        schedule: ScheduleParams {
            kind: ScheduleKind::Waterfall,
            warmup_epochs: 0.0,
            decay_rate: 0.1,
            milestones: vec![30.0, 60.0],
            ..cosine(0.0)
        },
        loss: LossKind::Ce,
        smoothing: 0.0,
        drop_path: 0.0,
        repeated_aug: None,
        randaugment: RandAugmentParams { enabled: false, ..randaugment(0.0, 1, 0.0) },
        mixup_alpha: 0.0,
        cutmix_alpha: 0.0,
        mix_apply_prob: 0.0,
        ..a1()
    }
}

/// Returns the full record for a named procedure.
pub fn preset(name: &str) -> Result<Recipe> {
    let r = match name {
        "a1" => a1(),
        "a2" => Recipe {
            name: "a2".into(),
            epochs: 300,
            optimizer: optimizer(OptimizerKind::Lamb, 5e-3, 0.02, 2048),
            smoothing: 0.0,
            mixup_alpha: 0.1,
            ..a1()
        },
        "a3" => Recipe {
            name: "a3".into(),
            train_res: 160,
            epochs: 100,
            optimizer: optimizer(OptimizerKind::Lamb, 8e-3, 0.02, 2048),
            smoothing: 0.0,
            drop_path: 0.0,
            repeated_aug: None,
            randaugment: randaugment(6.0, 2, 0.5),
            mixup_alpha: 0.1,
            ..a1()
        },
        "b" => Recipe {
            name: "b".into(),
            epochs: 600,
            optimizer: optimizer(OptimizerKind::RmsPropTf, 0.18, 7e-6, 2048),
            schedule: ScheduleParams {
                kind: ScheduleKind::Step,
                decay_rate: 0.988,
                decay_interval: 1.0,
                noise_range: (0.45, 1.0),
                noise_std: 1.0,
                ..cosine(5.0)
            },
            dropout: 0.2,
            grad_clip: None,
            randaugment: randaugment(8.0, 2, 1.0),
            cutmix_alpha: 0.0,
            erasing_prob: 0.35,
            erasing_count: 3,
            ema: Some(0.9999),
            ..c1()
        },
        "c1" => c1(),
        "c2" => Recipe { name: "c2".into(), repeated_aug: Some(PRESET_REPEATS), grad_clip: Some(0.05), ..c1() },
        "d" => Recipe {
            name: "d".into(),
            epochs: 600,
            batch_size: 384,
            optimizer: optimizer(OptimizerKind::AdamP, 0.0033, 0.01, 384),
            loss: LossKind::Bce,
            dropout: 0.1,
            drop_path: 0.05,
            grad_clip: None,
            erasing_prob: 0.35,
            ..c1()
        },
        "pytorch-baseline" => pytorch_baseline(),
        "fixres" => Recipe {
            name: "fixres".into(),
            epochs: 120,
            batch_size: 512,
            optimizer: optimizer(OptimizerKind::Sgd, 0.2, 1e-4, 512),
            schedule: ScheduleParams { milestones: vec![30.0, 60.0, 90.0], ..pytorch_baseline().schedule },
            repeated_aug: Some(PRESET_REPEATS),
            ..pytorch_baseline()
        },
        "deit" => Recipe {
            name: "deit".into(),
            test_crop_ratio: 0.875,
            epochs: 300,
            batch_size: 1024,
            optimizer: optimizer(OptimizerKind::AdamW, 1e-3, 0.05, 1024),
            loss: LossKind::Ce,
            smoothing: 0.1,
            drop_path: 0.1,
            randaugment: randaugment(9.0, 2, 0.5),
            mixup_alpha: 0.8,
            cutmix_alpha: 1.0,
            erasing_prob: 0.25,
            ..a1()
        },
        _ => return Err(Error::config(format!("unknown preset '{name}' (known: {})", PRESET_NAMES.join(", ")))),
    };
    Ok(r)
}
