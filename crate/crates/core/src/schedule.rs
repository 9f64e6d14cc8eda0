//! Learning-rate schedules: linear warmup from zero into cosine, per-epoch
//! exponential step decay or milestone ("waterfall") decay, plus optional
//! multiplicative noise over part of training.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{Purpose, RngKey};

#[derive(Debug, Clone, PartialEq)]
pub enum DecayKind {
    Cosine,
    /// `rate^floor((epoch − warmup)/interval)`.
    Step {
        rate: f64,
        interval: f64,
    },
    /// `factor^(milestones passed)`.
    Waterfall {
        factor: f64,
        milestones: Vec<f64>,
    },
}

impl DecayKind {
    pub fn name(&self) -> &'static str {
        match self {
            DecayKind::Cosine => "cosine",
            DecayKind::Step { .. } => "step",
            DecayKind::Waterfall { .. } => "waterfall",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrNoise {
    /// Fractions of training; noise is active for `start <= epoch/total < end`.
    pub range: (f64, f64),
    pub std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub base_lr: f64,
    /// Absolute floor reached at the end of a cosine decay.
    pub min_lr: f64,
    pub warmup_epochs: f64,
    pub total_epochs: f64,
    pub kind: DecayKind,
    pub noise: Option<LrNoise>,
}

impl ScheduleConfig {
    pub fn cosine(base_lr: f64, warmup_epochs: f64, total_epochs: f64) -> Self {
        ScheduleConfig { base_lr, min_lr: 1e-6 * base_lr, warmup_epochs, total_epochs, kind: DecayKind::Cosine, noise: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::config(format!("base lr {} must be positive", self.base_lr)));
        }
        if !(0.0..=self.base_lr).contains(&self.min_lr) {
            return Err(Error::config(format!("min lr {} outside [0, base lr]", self.min_lr)));
        }
        if !(self.warmup_epochs >= 0.0 && self.warmup_epochs <= self.total_epochs) {
            return Err(Error::config(format!(
                "warmup {} must lie in [0, total epochs {}]",
                self.warmup_epochs, self.total_epochs
            )));
        }
        match &self.kind {
            DecayKind::Cosine => {}
            DecayKind::Step { rate, interval } => {
                if !(*rate > 0.0 && *rate <= 1.0) || *interval <= 0.0 {
                    return Err(Error::config("step decay needs rate in (0, 1] and a positive interval"));
                }
            }
            DecayKind::Waterfall { factor, milestones } => {
                if !(*factor > 0.0 && *factor <= 1.0) {
                    return Err(Error::config("waterfall factor must lie in (0, 1]"));
                }
                if milestones.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::config("waterfall milestones must be ascending"));
                }
            }
        }
        if let Some(n) = &self.noise {
            let (a, b) = n.range;
            if !(0.0 <= a && a <= b && b <= 1.0) || n.std < 0.0 {
                return Err(Error::config(format!("lr noise range ({a}, {b}) must lie in [0, 1] with std >= 0")));
            }
        }
        Ok(())
    }
}

/// Learning rate at real-valued `epoch`, before noise.
pub fn lr_at(cfg: &ScheduleConfig, epoch: f64) -> Result<f64> {
    if !(0.0..=cfg.total_epochs).contains(&epoch) {
        return Err(Error::contract(format!("epoch {epoch} outside [0, {}]", cfg.total_epochs)));
    }
    let w = cfg.warmup_epochs;
    if epoch < w {
        return Ok(cfg.base_lr * epoch / w);
    }
    let lr = match &cfg.kind {
        DecayKind::Cosine => {
            let span = cfg.total_epochs - w;
            let tau = if span > 0.0 { (epoch - w) / span } else { 0.0 };
            cfg.min_lr + (cfg.base_lr - cfg.min_lr) * (1.0 + (std::f64::consts::PI * tau).cos()) / 2.0
        }
        DecayKind::Step { rate, interval } => cfg.base_lr * rate.powf(((epoch - w) / interval).floor()),
        DecayKind::Waterfall { factor, milestones } => {
            let passed = milestones.iter().filter(|&&m| epoch >= m).count();
            cfg.base_lr * factor.powi(passed as i32)
        }
    };
    Ok(lr)
}

/// Multiplies `lr` by `1 + clamp(N(0, std), −0.9, 10)` when `epoch` falls in
/// the noise window. The draw depends only on `(seed, floor(epoch))`.
pub fn apply_noise(cfg: &ScheduleConfig, epoch: f64, lr: f64) -> f64 {
    let Some(n) = &cfg.noise else { return lr };
    if n.std == 0.0 || cfg.total_epochs <= 0.0 {
        return lr;
    }
    let frac = epoch / cfg.total_epochs;
    if frac < n.range.0 || frac >= n.range.1 {
        return lr;
    }
    let mut rng = RngKey::new(n.seed, epoch.floor() as u64, 0, Purpose::LrNoise).stream();
    let z: f64 = Normal::new(0.0, n.std).expect("std checked non-negative").sample(&mut rng);
    lr * (1.0 + z.clamp(-0.9, 10.0))
}

/// Rate for optimizer step `step` of `steps_per_epoch` in `epoch`: warmup is
/// interpolated per step, everything after it is held per epoch.
pub fn lr_for_step(cfg: &ScheduleConfig, epoch: usize, step: usize, steps_per_epoch: usize) -> Result<f64> {
    let e = epoch as f64;
    let at = if e < cfg.warmup_epochs && steps_per_epoch > 0 {
        (e + step as f64 / steps_per_epoch as f64).min(cfg.warmup_epochs)
    } else {
        e
    };
    Ok(apply_noise(cfg, e, lr_at(cfg, at)?))
}

/// Decimal rendering with exactly 10 significant digits.
pub fn format_sig10(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.9e}", v.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if v < 0.0 { "-" } else { "" };
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else if (exp as usize) < digits.len() - 1 {
        let split = exp as usize + 1;
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("{}{}", digits, "0".repeat(exp as usize + 1 - digits.len()))
    };
    format!("{sign}{body}")
}
