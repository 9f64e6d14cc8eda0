//! Hyper-parameter records for complete training procedures, the named
//! presets, the `key = value` override format and validation.

mod config;
mod presets;
mod validate;

pub use config::{parse_config, ConfigOverrides, Override};
pub use presets::{preset, PRESET_NAMES};
pub use validate::validate;

use crate::augment::{Mstd, RandAugmentConfig, RandomErasingConfig, RrcConfig};
use crate::error::{Error, Result};
use crate::mix::{BceStyle, LossKind, MixConfig, MixMode};
use crate::optim::{AdamPConfig, AdamWConfig, AgcConfig, LambConfig, OptimizerConfig, RmsPropTfConfig, SgdConfig};
use crate::schedule::{DecayKind, LrNoise, ScheduleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Lamb,
    Sgd,
    RmsPropTf,
    AdamP,
    AdamW,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Lamb => "lamb",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::RmsPropTf => "rmsprop_tf",
            OptimizerKind::AdamP => "adamp",
            OptimizerKind::AdamW => "adamw",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "lamb" => OptimizerKind::Lamb,
            "sgd" => OptimizerKind::Sgd,
            "rmsprop_tf" => OptimizerKind::RmsPropTf,
            "adamp" => OptimizerKind::AdamP,
            "adamw" => OptimizerKind::AdamW,
            _ => return Err(Error::config(format!("unknown optimizer '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Cosine,
    Step,
    Waterfall,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Cosine => "cosine",
            ScheduleKind::Step => "step",
            ScheduleKind::Waterfall => "waterfall",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "cosine" => ScheduleKind::Cosine,
            "step" => ScheduleKind::Step,
            "waterfall" => ScheduleKind::Waterfall,
            _ => return Err(Error::config(format!("unknown schedule '{s}'"))),
        })
    }
}

/// All optimizer hyper-parameters; fields a rule does not use are carried
/// along unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerParams {
    pub kind: OptimizerKind,
    /// Learning rate at `reference_batch`.
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub momentum: f64,
    pub rho: f64,
    pub delta: f64,
    pub wd_ratio: f64,
    pub trust_clip: Option<f64>,
    pub reference_batch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub kind: ScheduleKind,
    pub warmup_epochs: f64,
    /// Cosine floor as a fraction of the base rate.
    pub min_lr_ratio: f64,
    pub decay_rate: f64,
    pub decay_interval: f64,
    pub milestones: Vec<f64>,
    /// Noise window as fractions of training; noise is on when `noise_std > 0`.
    pub noise_range: (f64, f64),
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandAugmentParams {
    pub enabled: bool,
    pub magnitude: f64,
    pub num_ops: usize,
    pub mstd: Mstd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub name: String,
    pub train_res: usize,
    pub test_res: usize,
    pub test_crop_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerParams,
    /// Rescale the learning rate when `batch_size` differs from the
    /// optimizer's reference batch: linear, or square root for AdamP.
    pub scale_lr_for_batch: bool,
    pub schedule: ScheduleParams,
    pub loss: LossKind,
    pub bce_style: BceStyle,
    pub smoothing: f64,
    pub dropout: f64,
    pub drop_path: f64,
    /// Repeat count `m`; `None` disables repeated augmentation.
    pub repeated_aug: Option<usize>,
    /// AGC clip factor.
    pub grad_clip: Option<f64>,
    pub randaugment: RandAugmentParams,
    pub mixup_alpha: f64,
    pub cutmix_alpha: f64,
    pub mix_mode: MixMode,
    pub mix_switch_prob: f64,
    pub mix_apply_prob: f64,
    /// Probability 0 disables erasing.
    pub erasing_prob: f64,
    pub erasing_count: usize,
    pub ema: Option<f64>,
    pub rrc_scale: (f64, f64),
    pub rrc_ratio: (f64, f64),
    pub flip_prob: f64,
    pub model_width: usize,
    pub model_depth: usize,
}

impl Recipe {
    /// Learning rate after optional batch-size scaling.
    pub fn effective_lr(&self) -> f64 {
        let o = &self.optimizer;
        if !self.scale_lr_for_batch || self.batch_size == o.reference_batch {
            return o.lr;
        }
        let ratio = self.batch_size as f64 / o.reference_batch as f64;
        match o.kind {
            OptimizerKind::AdamP => o.lr * ratio.sqrt(),
            _ => o.lr * ratio,
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        let lr = self.effective_lr();
        match o.kind {
            OptimizerKind::Lamb => OptimizerConfig::Lamb(LambConfig {
                lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                weight_decay: o.weight_decay,
                trust_clip: o.trust_clip,
            }),
            OptimizerKind::Sgd => OptimizerConfig::Sgd(SgdConfig { lr, momentum: o.momentum, weight_decay: o.weight_decay }),
            OptimizerKind::RmsPropTf => OptimizerConfig::RmsPropTf(RmsPropTfConfig {
                lr,
                rho: o.rho,
                eps: o.eps,
                momentum: o.momentum,
                weight_decay: o.weight_decay,
            }),
            OptimizerKind::AdamP => OptimizerConfig::AdamP(AdamPConfig {
                lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                weight_decay: o.weight_decay,
                delta: o.delta,
                wd_ratio: o.wd_ratio,
            }),
            OptimizerKind::AdamW => OptimizerConfig::AdamW(AdamWConfig {
                lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                weight_decay: o.weight_decay,
            }),
        }
    }

    /// The schedule over `epochs`; `noise_seed` keys the LR noise draws.
    pub fn schedule_config(&self, noise_seed: u64) -> ScheduleConfig {
        let s = &self.schedule;
        let base_lr = self.effective_lr();
        let kind = match s.kind {
            ScheduleKind::Cosine => DecayKind::Cosine,
            ScheduleKind::Step => DecayKind::Step { rate: s.decay_rate, interval: s.decay_interval },
            ScheduleKind::Waterfall => DecayKind::Waterfall { factor: s.decay_rate, milestones: s.milestones.clone() },
        };
        let noise = (s.noise_std > 0.0).then_some(LrNoise { range: s.noise_range, std: s.noise_std, seed: noise_seed });
        ScheduleConfig {
            base_lr,
            min_lr: s.min_lr_ratio * base_lr,
            warmup_epochs: s.warmup_epochs,
            total_epochs: self.epochs as f64,
            kind,
            noise,
        }
    }

    pub fn mix_config(&self) -> Option<MixConfig> {
        (self.mixup_alpha > 0.0 || self.cutmix_alpha > 0.0).then_some(MixConfig {
            mixup_alpha: self.mixup_alpha,
            cutmix_alpha: self.cutmix_alpha,
            switch_prob: self.mix_switch_prob,
            mode: self.mix_mode,
            apply_prob: self.mix_apply_prob,
        })
    }

    pub fn randaugment_config(&self, fill: Vec<f64>) -> Option<RandAugmentConfig> {
        let r = &self.randaugment;
        r.enabled.then(|| {
            let mut cfg = RandAugmentConfig::new(r.magnitude, r.num_ops, 0.0, fill);
            cfg.mstd = r.mstd;
            cfg
        })
    }

    pub fn erasing_config(&self) -> Option<RandomErasingConfig> {
        (self.erasing_prob > 0.0).then(|| RandomErasingConfig::new(self.erasing_prob, self.erasing_count))
    }

    pub fn rrc_config(&self) -> RrcConfig {
        RrcConfig {
            target_size: (self.train_res, self.train_res),
            scale_range: self.rrc_scale,
            ratio_range: self.rrc_ratio,
            max_attempts: 10,
        }
    }

    pub fn agc_config(&self) -> Option<AgcConfig> {
        self.grad_clip.map(AgcConfig::new)
    }

    /// Canonical text form: every key, alphabetical, LF line endings.
    pub fn to_config(&self) -> String {
        config::serialize(self)
    }
}
