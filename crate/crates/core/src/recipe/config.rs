//! Line-oriented `key = value` format. Keys are dotted field paths, `#`
//! starts a comment, optional values use `off`.

use super::{OptimizerKind, Recipe, ScheduleKind};
use crate::augment::Mstd;
use crate::error::{Error, Result};
use crate::mix::{BceStyle, LossKind, MixMode};

pub(super) const KEYS: [&str; 52] = [
    "batch_size",
    "bce_style",
    "cutmix_alpha",
    "drop_path",
    "dropout",
    "ema",
    "epochs",
    "erasing.count",
    "erasing.prob",
    "flip_prob",
    "grad_clip",
    "loss",
    "mix.apply_prob",
    "mix.mode",
    "mix.switch_prob",
    "mixup_alpha",
    "model.depth",
    "model.width",
    "name",
    "optimizer.beta1",
    "optimizer.beta2",
    "optimizer.delta",
    "optimizer.eps",
    "optimizer.kind",
    "optimizer.lr",
    "optimizer.momentum",
    "optimizer.reference_batch",
    "optimizer.rho",
    "optimizer.trust_clip",
    "optimizer.wd_ratio",
    "optimizer.weight_decay",
    "randaugment.enabled",
    "randaugment.magnitude",
    "randaugment.mstd",
    "randaugment.num_ops",
    "repeated_aug",
    "rrc.ratio",
    "rrc.scale",
    "scale_lr_for_batch",
    "schedule.decay_interval",
    "schedule.decay_rate",
    "schedule.kind",
    "schedule.milestones",
    "schedule.min_lr_ratio",
    "schedule.noise_range",
    "schedule.noise_std",
    "schedule.warmup_epochs",
    "seed",
    "smoothing",
    "test_crop_ratio",
    "test_res",
    "train_res",
];

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "off".to_string(), |x| x.to_string())
}

fn pair(p: (f64, f64)) -> String {
    format!("{},{}", p.0, p.1)
}

fn loss_name(l: LossKind) -> &'static str {
    match l {
        LossKind::Ce => "ce",
        LossKind::Bce => "bce",
    }
}

fn style_name(s: BceStyle) -> &'static str {
    match s {
        BceStyle::Multilabel => "multilabel",
        BceStyle::Normalized => "normalized",
    }
}

fn value_of(r: &Recipe, key: &str) -> String {
    let o = &r.optimizer;
    let s = &r.schedule;
    match key {
        "batch_size" => r.batch_size.to_string(),
        "bce_style" => style_name(r.bce_style).into(),
        "cutmix_alpha" => r.cutmix_alpha.to_string(),
        "drop_path" => r.drop_path.to_string(),
        "dropout" => r.dropout.to_string(),
        "ema" => opt_f64(r.ema),
        "epochs" => r.epochs.to_string(),
        "erasing.count" => r.erasing_count.to_string(),
        "erasing.prob" => r.erasing_prob.to_string(),
        "flip_prob" => r.flip_prob.to_string(),
        "grad_clip" => opt_f64(r.grad_clip),
        "loss" => loss_name(r.loss).into(),
        "mix.apply_prob" => r.mix_apply_prob.to_string(),
        "mix.mode" => r.mix_mode.name().into(),
        "mix.switch_prob" => r.mix_switch_prob.to_string(),
        "mixup_alpha" => r.mixup_alpha.to_string(),
        "model.depth" => r.model_depth.to_string(),
        "model.width" => r.model_width.to_string(),
        "name" => r.name.clone(),
        "optimizer.beta1" => o.beta1.to_string(),
        "optimizer.beta2" => o.beta2.to_string(),
        "optimizer.delta" => o.delta.to_string(),
        "optimizer.eps" => o.eps.to_string(),
        "optimizer.kind" => o.kind.name().into(),
        "optimizer.lr" => o.lr.to_string(),
        "optimizer.momentum" => o.momentum.to_string(),
        "optimizer.reference_batch" => o.reference_batch.to_string(),
        "optimizer.rho" => o.rho.to_string(),
        "optimizer.trust_clip" => opt_f64(o.trust_clip),
        "optimizer.wd_ratio" => o.wd_ratio.to_string(),
        "optimizer.weight_decay" => o.weight_decay.to_string(),
        "randaugment.enabled" => r.randaugment.enabled.to_string(),
        "randaugment.magnitude" => r.randaugment.magnitude.to_string(),
        "randaugment.mstd" => match r.randaugment.mstd {
            Mstd::Gaussian(x) => x.to_string(),
            Mstd::Uniform => "uniform".into(),
        },
        "randaugment.num_ops" => r.randaugment.num_ops.to_string(),
        "repeated_aug" => r.repeated_aug.map_or_else(|| "off".to_string(), |m| m.to_string()),
        "rrc.ratio" => pair(r.rrc_ratio),
        "rrc.scale" => pair(r.rrc_scale),
        "scale_lr_for_batch" => r.scale_lr_for_batch.to_string(),
        "schedule.decay_interval" => s.decay_interval.to_string(),
        "schedule.decay_rate" => s.decay_rate.to_string(),
        "schedule.kind" => s.kind.name().into(),
        "schedule.milestones" => {
            if s.milestones.is_empty() {
                "none".into()
            } else {
                s.milestones.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
            }
        }
        "schedule.min_lr_ratio" => s.min_lr_ratio.to_string(),
        "schedule.noise_range" => pair(s.noise_range),
        "schedule.noise_std" => s.noise_std.to_string(),
        "schedule.warmup_epochs" => s.warmup_epochs.to_string(),
        "seed" => r.seed.to_string(),
        "smoothing" => r.smoothing.to_string(),
        "test_crop_ratio" => r.test_crop_ratio.to_string(),
        "test_res" => r.test_res.to_string(),
        "train_res" => r.train_res.to_string(),
        _ => unreachable!("key table and value_of disagree on '{key}'"),
    }
}

pub(super) fn serialize(r: &Recipe) -> String {
    KEYS.iter().map(|k| format!("{k} = {}\n", value_of(r, k))).collect()
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("expected a number, got '{v}'"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn optional<T: std::str::FromStr>(v: &str) -> std::result::Result<Option<T>, String> {
    if v == "off" {
        Ok(None)
    } else {
        num(v).map(Some)
    }
}

fn list(v: &str) -> std::result::Result<Vec<f64>, String> {
    if v == "none" {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(x.trim())).collect()
}

fn two(v: &str) -> std::result::Result<(f64, f64), String> {
    match list(v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got '{v}'")),
    }
}

fn named<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> std::result::Result<T, String> {
    f(v).map_err(|e| match e {
        Error::Config(m) => m,
        other => other.to_string(),
    })
}

fn set(r: &mut Recipe, key: &str, v: &str) -> std::result::Result<(), String> {
    let o = &mut r.optimizer;
    let s = &mut r.schedule;
    match key {
        "batch_size" => r.batch_size = num(v)?,
        "bce_style" => {
            r.bce_style = match v {
                "multilabel" => BceStyle::Multilabel,
                "normalized" => BceStyle::Normalized,
                _ => return Err(format!("unknown bce style '{v}'")),
            }
        }
        "cutmix_alpha" => r.cutmix_alpha = num(v)?,
        "drop_path" => r.drop_path = num(v)?,
        "dropout" => r.dropout = num(v)?,
        "ema" => r.ema = optional(v)?,
        "epochs" => r.epochs = num(v)?,
        "erasing.count" => r.erasing_count = num(v)?,
        "erasing.prob" => r.erasing_prob = num(v)?,
        "flip_prob" => r.flip_prob = num(v)?,
        "grad_clip" => r.grad_clip = optional(v)?,
        "loss" => {
            r.loss = match v {
                "ce" => LossKind::Ce,
                "bce" => LossKind::Bce,
                _ => return Err(format!("unknown loss '{v}'")),
            }
        }
        "mix.apply_prob" => r.mix_apply_prob = num(v)?,
        "mix.mode" => r.mix_mode = named(v, MixMode::from_name)?,
        "mix.switch_prob" => r.mix_switch_prob = num(v)?,
        "mixup_alpha" => r.mixup_alpha = num(v)?,
        "model.depth" => r.model_depth = num(v)?,
        "model.width" => r.model_width = num(v)?,
        "name" => r.name = v.to_string(),
        "optimizer.beta1" => o.beta1 = num(v)?,
        "optimizer.beta2" => o.beta2 = num(v)?,
        "optimizer.delta" => o.delta = num(v)?,
        "optimizer.eps" => o.eps = num(v)?,
        "optimizer.kind" => o.kind = named(v, OptimizerKind::from_name)?,
        "optimizer.lr" => o.lr = num(v)?,
        "optimizer.momentum" => o.momentum = num(v)?,
        "optimizer.reference_batch" => o.reference_batch = num(v)?,
        "optimizer.rho" => o.rho = num(v)?,
        "optimizer.trust_clip" => o.trust_clip = optional(v)?,
        "optimizer.wd_ratio" => o.wd_ratio = num(v)?,
        "optimizer.weight_decay" => o.weight_decay = num(v)?,
        "randaugment.enabled" => r.randaugment.enabled = boolean(v)?,
        "randaugment.magnitude" => r.randaugment.magnitude = num(v)?,
        "randaugment.mstd" => r.randaugment.mstd = if v == "uniform" { Mstd::Uniform } else { Mstd::Gaussian(num(v)?) },
        "randaugment.num_ops" => r.randaugment.num_ops = num(v)?,
        "repeated_aug" => r.repeated_aug = optional(v)?,
        "rrc.ratio" => r.rrc_ratio = two(v)?,
        "rrc.scale" => r.rrc_scale = two(v)?,
        "scale_lr_for_batch" => r.scale_lr_for_batch = boolean(v)?,
        "schedule.decay_interval" => s.decay_interval = num(v)?,
        "schedule.decay_rate" => s.decay_rate = num(v)?,
        "schedule.kind" => s.kind = named(v, ScheduleKind::from_name)?,
        "schedule.milestones" => s.milestones = list(v)?,
        "schedule.min_lr_ratio" => s.min_lr_ratio = num(v)?,
        "schedule.noise_range" => s.noise_range = two(v)?,
        "schedule.noise_std" => s.noise_std = num(v)?,
        "schedule.warmup_epochs" => s.warmup_epochs = num(v)?,
        "seed" => r.seed = num(v)?,
        "smoothing" => r.smoothing = num(v)?,
        "test_crop_ratio" => r.test_crop_ratio = num(v)?,
        "test_res" => r.test_res = num(v)?,
        "train_res" => r.train_res = num(v)?,
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parsed override file, checked for syntax, known keys and value types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigOverrides {
    pub entries: Vec<Override>,
}

impl ConfigOverrides {
    /// Applies the overrides in file order on top of `base`.
    pub fn apply(&self, base: &Recipe) -> Result<Recipe> {
        let mut r = base.clone();
        for e in &self.entries {
            set(&mut r, &e.key, &e.value).map_err(|message| Error::Parse { line: e.line, message })?;
        }
        Ok(r)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses override text. Errors carry the 1-based line number.
pub fn parse_config(text: &str) -> Result<ConfigOverrides> {
    let mut entries = Vec::new();
    let mut scratch = super::preset("a1")?;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse { line, message: format!("expected 'key = value', got '{content}'") });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse { line, message: format!("expected 'key = value', got '{content}'") });
        }
        set(&mut scratch, key, value).map_err(|message| Error::Parse { line, message })?;
        entries.push(Override { line, key: key.into(), value: value.into() });
    }
    Ok(ConfigOverrides { entries })
}
