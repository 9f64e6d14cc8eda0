use super::{OptimizerKind, Recipe, ScheduleKind};
use crate::augment::{Mstd, MAX_MAGNITUDE};
use crate::mix::{BceStyle, LossKind, MixMode};

fn unit_open(x: f64) -> bool {
    (0.0..1.0).contains(&x)
}

fn prob(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Every violated constraint, in a stable order; empty when valid.
pub fn validate(r: &Recipe) -> Vec<String> {
    let mut v = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            v.push(msg);
        }
    };
    check(r.batch_size > 0, "batch size must be positive".into());
    check(r.train_res > 0 && r.test_res > 0, "resolutions must be positive".into());
    check(r.test_crop_ratio > 0.0 && r.test_crop_ratio <= 1.0, format!("test crop ratio {} outside (0, 1]", r.test_crop_ratio));
    check(r.model_width > 0 && r.model_depth > 0, "model width and depth must be positive".into());

    let o = &r.optimizer;
    check(o.lr > 0.0 && o.lr.is_finite(), format!("learning rate {} must be positive", o.lr));
    check(o.weight_decay >= 0.0, format!("weight decay {} must be non-negative", o.weight_decay));
    check(unit_open(o.beta1) && unit_open(o.beta2), "betas must lie in [0, 1)".into());
    check(unit_open(o.momentum), format!("momentum {} outside [0, 1)", o.momentum));
    check(unit_open(o.rho), format!("rho {} outside [0, 1)", o.rho));
    check(o.eps >= 0.0, "optimizer eps must be non-negative".into());
    check(o.reference_batch > 0, "reference batch must be positive".into());
    if o.kind == OptimizerKind::AdamP {
        check(o.delta > 0.0 && o.wd_ratio >= 0.0, "adamp delta must be positive and wd_ratio non-negative".into());
    }
    if let Some(c) = o.trust_clip {
        check(c > 0.0, "trust clip must be positive".into());
    }

    let s = &r.schedule;
    check(
        s.warmup_epochs >= 0.0 && s.warmup_epochs <= r.epochs as f64,
        format!("warmup {} exceeds {} epochs", s.warmup_epochs, r.epochs),
    );
    check((0.0..=1.0).contains(&s.min_lr_ratio), "min lr ratio outside [0, 1]".into());
    match s.kind {
        ScheduleKind::Step => {
            check(s.decay_rate > 0.0 && s.decay_rate <= 1.0, format!("decay rate {} outside (0, 1]", s.decay_rate));
            check(s.decay_interval > 0.0, "decay interval must be positive".into());
        }
        ScheduleKind::Waterfall => {
            check(s.decay_rate > 0.0 && s.decay_rate <= 1.0, format!("decay rate {} outside (0, 1]", s.decay_rate));
            check(s.milestones.windows(2).all(|w| w[0] <= w[1]), "milestones must be ascending".into());
        }
        ScheduleKind::Cosine => {}
    }
    let (n0, n1) = s.noise_range;
    check(0.0 <= n0 && n0 <= n1 && n1 <= 1.0, format!("noise range ({n0}, {n1}) must be ordered inside [0, 1]"));
    check(s.noise_std >= 0.0, "noise std must be non-negative".into());

    check((0.0..0.5).contains(&r.smoothing), format!("label smoothing {} outside [0, 0.5)", r.smoothing));
    check(
        !(r.loss == LossKind::Ce && r.bce_style == BceStyle::Normalized),
        "bce_style = normalized only applies to the BCE loss".into(),
    );
    check(unit_open(r.dropout), format!("dropout {} outside [0, 1)", r.dropout));
    check(unit_open(r.drop_path), format!("drop path {} outside [0, 1)", r.drop_path));
    if let Some(m) = r.repeated_aug {
        check(m > 0, "repeat count must be positive".into());
        check(m == 0 || r.batch_size.is_multiple_of(m), format!("batch {} not divisible by repeats {m}", r.batch_size));
    }
    if let Some(c) = r.grad_clip {
        check(c > 0.0, format!("AGC clip factor {c} must be positive"));
    }

    let ra = &r.randaugment;
    if ra.enabled {
        check((0.0..=MAX_MAGNITUDE).contains(&ra.magnitude), format!("RandAugment magnitude {} outside [0, 10]", ra.magnitude));
        check(ra.num_ops >= 1, "RandAugment needs at least one op".into());
        if let Mstd::Gaussian(x) = ra.mstd {
            check(x >= 0.0, "RandAugment mstd must be non-negative".into());
        }
    }

    check(r.mixup_alpha >= 0.0 && r.cutmix_alpha >= 0.0, "mixing alphas must be non-negative".into());
    check(prob(r.mix_switch_prob) && prob(r.mix_apply_prob), "mixing probabilities outside [0, 1]".into());
    if r.mix_mode == MixMode::Half {
        check(r.batch_size.is_multiple_of(2), "half mixing mode needs an even batch".into());
    }
    check(prob(r.erasing_prob), format!("erasing probability {} outside [0, 1]", r.erasing_prob));
    check(r.erasing_count >= 1, "erasing count must be positive".into());
    if let Some(d) = r.ema {
        check(unit_open(d), format!("EMA decay {d} outside [0, 1)"));
    }
    let (s0, s1) = r.rrc_scale;
    check(0.0 < s0 && s0 <= s1 && s1 <= 1.0, format!("crop scale ({s0}, {s1}) must satisfy 0 < min <= max <= 1"));
    let (q0, q1) = r.rrc_ratio;
    check(0.0 < q0 && q0 <= q1, "crop ratio range must be positive and ordered".into());
    check(prob(r.flip_prob), "flip probability outside [0, 1]".into());
    v
}
