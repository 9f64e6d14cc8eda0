use super::{check_grads, ParamSlot};
use crate::error::{Error, Result};

fn check_beta(name: &str, b: f64) -> Result<()> {
    if (0.0..1.0).contains(&b) {
        Ok(())
    } else {
        Err(Error::config(format!("{name} = {b} outside [0, 1)")))
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("learning rate {lr} must be positive")))
    }
}

fn check_wd(wd: f64) -> Result<()> {
    if wd >= 0.0 && wd.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("weight decay {wd} must be non-negative")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub trust_clip: Option<f64>,
}

impl LambConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        LambConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-6, weight_decay, trust_clip: None }
    }

    pub fn validate(&self) -> Result<()> {
        check_lr(self.lr)?;
        check_beta("beta1", self.beta1)?;
        check_beta("beta2", self.beta2)?;
        check_wd(self.weight_decay)
    }
}

/// LAMB with the weight decay term inside the trust-ratio update:
/// `r = m̂/(√v̂ + eps) + wd·w`, `w ← w − lr·(‖w‖/‖r‖)·r`. The ratio is 1
/// when either norm vanishes.
pub fn lamb_step(slots: &mut [ParamSlot], cfg: &LambConfig, t: u64) -> Result<()> {
    check_grads(slots)?;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);
    for s in slots.iter_mut() {
        s.ensure_state(0.0);
        let wd = if s.decay { cfg.weight_decay } else { 0.0 };
        let w = s.value.data();
        let g = s.grad.data();
        let mut r = vec![0.0; w.len()];
        for i in 0..w.len() {
            s.m[i] = b1 * s.m[i] + (1.0 - b1) * g[i];
            s.v[i] = b2 * s.v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = if bc1 > 0.0 { s.m[i] / bc1 } else { s.m[i] };
            let v_hat = if bc2 > 0.0 { s.v[i] / bc2 } else { s.v[i] };
            r[i] = m_hat / (v_hat.sqrt() + cfg.eps) + wd * w[i];
        }
        let w_norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r_norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut trust = if w_norm > 0.0 && r_norm > 0.0 { w_norm / r_norm } else { 1.0 };
        if let Some(c) = cfg.trust_clip {
            trust = trust.min(c);
        }
        let step = cfg.lr * trust;
        for (w, r) in s.value.data_mut().iter_mut().zip(&r) {
            *w -= step * r;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        SgdConfig { lr, momentum: 0.9, weight_decay }
    }

    pub fn validate(&self) -> Result<()> {
        check_lr(self.lr)?;
        check_beta("momentum", self.momentum)?;
        check_wd(self.weight_decay)
    }
}

/// Nesterov SGD with L2 decay added to the gradient.
pub fn sgd_nesterov_step(slots: &mut [ParamSlot], cfg: &SgdConfig) -> Result<()> {
    check_grads(slots)?;
    let mu = cfg.momentum;
    for s in slots.iter_mut() {
        s.ensure_state(0.0);
        let wd = if s.decay { cfg.weight_decay } else { 0.0 };
        let g = s.grad.data();
        let w = s.value.data_mut();
        for i in 0..w.len() {
            let g = g[i] + wd * w[i];
            s.buf[i] = mu * s.buf[i] + g;
            w[i] -= cfg.lr * (g + mu * s.buf[i]);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropTfConfig {
    pub lr: f64,
    /// Decay of the squared-gradient average.
    pub rho: f64,
    pub eps: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl RmsPropTfConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        RmsPropTfConfig { lr, rho: 0.9, eps: 1e-3, momentum: 0.9, weight_decay }
    }

    pub fn validate(&self) -> Result<()> {
        check_lr(self.lr)?;
        check_beta("rho", self.rho)?;
        check_beta("momentum", self.momentum)?;
        if self.eps < 0.0 {
            return Err(Error::config("rmsprop eps must be non-negative"));
        }
        check_wd(self.weight_decay)
    }
}

/// TensorFlow-style RMSProp: the square average starts at one, `eps` sits
/// inside the root, and the learning rate is folded into the momentum
/// buffer.
pub fn rmsprop_tf_step(slots: &mut [ParamSlot], cfg: &RmsPropTfConfig) -> Result<()> {
    check_grads(slots)?;
    let rho = cfg.rho;
    for s in slots.iter_mut() {
        s.ensure_state(1.0);
        let wd = if s.decay { cfg.weight_decay } else { 0.0 };
        let g = s.grad.data();
        let w = s.value.data_mut();
        for i in 0..w.len() {
            let g = g[i] + wd * w[i];
            s.v[i] = rho * s.v[i] + (1.0 - rho) * g * g;
            let denom = (s.v[i] + cfg.eps).sqrt();
            s.buf[i] = cfg.momentum * s.buf[i] + cfg.lr * g / denom;
            w[i] -= s.buf[i];
        }
    }
    Ok(())
}

/// Updates the moments in place and returns the bias-corrected Adam
/// direction `m̂/(√v̂ + eps)`.
fn adam_direction(s: &mut ParamSlot, b1: f64, b2: f64, eps: f64, t: u64) -> Vec<f64> {
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);
    let g = s.grad.data();
    let mut u = vec![0.0; g.len()];
    for i in 0..g.len() {
        s.m[i] = b1 * s.m[i] + (1.0 - b1) * g[i];
        s.v[i] = b2 * s.v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = if bc1 > 0.0 { s.m[i] / bc1 } else { s.m[i] };
        let v_hat = if bc2 > 0.0 { s.v[i] / bc2 } else { s.v[i] };
        u[i] = m_hat / (v_hat.sqrt() + eps);
    }
    u
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamWConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamWConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay }
    }

    pub fn validate(&self) -> Result<()> {
        check_lr(self.lr)?;
        check_beta("beta1", self.beta1)?;
        check_beta("beta2", self.beta2)?;
        check_wd(self.weight_decay)
    }
}

/// Adam with decoupled decay: `w ← w − lr·u − lr·wd·w`.
pub fn adamw_step(slots: &mut [ParamSlot], cfg: &AdamWConfig, t: u64) -> Result<()> {
    check_grads(slots)?;
    for s in slots.iter_mut() {
        s.ensure_state(0.0);
        let wd = if s.decay { cfg.weight_decay } else { 0.0 };
        let u = adam_direction(s, cfg.beta1, cfg.beta2, cfg.eps, t);
        for (w, u) in s.value.data_mut().iter_mut().zip(&u) {
            *w -= cfg.lr * u + cfg.lr * wd * *w;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamPConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Projection threshold: a unit is treated as scale-invariant when
    /// `|cos(w, g)| < delta/√dim`.
    pub delta: f64,
    pub wd_ratio: f64,
}

impl AdamPConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamPConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, delta: 0.1, wd_ratio: 0.1 }
    }

    pub fn validate(&self) -> Result<()> {
        check_lr(self.lr)?;
        check_beta("beta1", self.beta1)?;
        check_beta("beta2", self.beta2)?;
        check_wd(self.weight_decay)?;
        if self.delta <= 0.0 || self.wd_ratio < 0.0 {
            return Err(Error::config("adamp delta must be positive and wd_ratio non-negative"));
        }
        Ok(())
    }
}

/// Adam update with per-unit projection. A unit whose weights are
/// (nearly) orthogonal to their gradient has the radial component removed
/// from its update and its decoupled decay scaled by `wd_ratio`.
pub fn adamp_step(slots: &mut [ParamSlot], cfg: &AdamPConfig, t: u64) -> Result<()> {
    check_grads(slots)?;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    for s in slots.iter_mut() {
        s.ensure_state(0.0);
        let wd = if s.decay { cfg.weight_decay } else { 0.0 };
        let mut u = adam_direction(s, b1, b2, cfg.eps, t);
        let groups = s.groups();
        let mut wd_eff = vec![wd; groups.count];
        {
            let w = s.value.data();
            let g = s.grad.data();
            for (k, wd_k) in wd_eff.iter_mut().enumerate() {
                let (mut ww, mut gg, mut wg) = (0.0, 0.0, 0.0);
                for i in groups.indices(k) {
                    ww += w[i] * w[i];
                    gg += g[i] * g[i];
                    wg += w[i] * g[i];
                }
                if ww == 0.0 || gg == 0.0 {
                    continue;
                }
                let cos = wg.abs() / (ww.sqrt() * gg.sqrt());
                if cos < cfg.delta / (groups.len as f64).sqrt() {
                    let wu: f64 = groups.indices(k).map(|i| w[i] * u[i]).sum();
                    for i in groups.indices(k) {
                        u[i] -= wu / ww * w[i];
                    }
                    *wd_k = wd * cfg.wd_ratio;
                }
            }
        }
        let w = s.value.data_mut();
        for k in 0..groups.count {
            for i in groups.indices(k) {
                w[i] -= cfg.lr * u[i] + cfg.lr * wd_eff[k] * w[i];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_slot(w: f64, g: f64) -> Vec<ParamSlot> {
        let mut s = ParamSlot::new("w", Tensor::from_vec(vec![w])).with_decay(true);
        s.grad = Tensor::from_vec(vec![g]);
        vec![s]
    }

    #[test]
    fn lamb_zero_grad_is_noop() {
        let mut slots = scalar_slot(0.7, 0.0);
        lamb_step(&mut slots, &LambConfig::new(0.1, 0.0), 1).unwrap();
        assert_eq!(slots[0].value.data(), &[0.7]);
    }

    #[test]
    fn lamb_hand_oracle() {
        let mut slots = scalar_slot(2.0, 1.0);
        let cfg = LambConfig { beta1: 0.0, beta2: 0.0, eps: 0.0, ..LambConfig::new(0.1, 0.0) };
        lamb_step(&mut slots, &cfg, 1).unwrap();
        assert!((slots[0].value.data()[0] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn lamb_trust_clip() {
        let mut slots = scalar_slot(2.0, 1.0);
        let cfg = LambConfig { beta1: 0.0, beta2: 0.0, eps: 0.0, trust_clip: Some(1.0), ..LambConfig::new(0.1, 0.0) };
        lamb_step(&mut slots, &cfg, 1).unwrap();
        assert!((slots[0].value.data()[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn sgd_hand_oracles() {
        let mut slots = scalar_slot(1.0, 1.0);
        sgd_nesterov_step(&mut slots, &SgdConfig { lr: 0.1, momentum: 0.9, weight_decay: 0.0 }).unwrap();
        assert!((slots[0].value.data()[0] - 0.81).abs() < 1e-15);
        assert_eq!(slots[0].buf, vec![1.0]);

        let mut slots = scalar_slot(2.0, 0.5);
        sgd_nesterov_step(&mut slots, &SgdConfig { lr: 0.1, momentum: 0.0, weight_decay: 0.1 }).unwrap();
        assert!((slots[0].value.data()[0] - (2.0 - 0.1 * (0.5 + 0.2))).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_tf_one_init() {
        let mut slots = scalar_slot(0.0, 1.0);
        let cfg = RmsPropTfConfig { lr: 0.1, rho: 0.9, eps: 0.0, momentum: 0.0, weight_decay: 0.0 };
        rmsprop_tf_step(&mut slots, &cfg).unwrap();
        assert_eq!(slots[0].v, vec![1.0]);
        assert!((slots[0].value.data()[0] + 0.1).abs() < 1e-15);

        let mut idle = scalar_slot(0.3, 0.0);
        rmsprop_tf_step(&mut idle, &RmsPropTfConfig::new(0.1, 0.0)).unwrap();
        assert_eq!(idle[0].value.data(), &[0.3]);
        // decays from one; a zero start would stay at zero
        assert_eq!(idle[0].v, vec![0.9]);
    }

    #[test]
    fn adamp_zero_weights_skip_projection() {
        let mut p = vec![ParamSlot::new("w", Tensor::zeros(&[1, 3]))];
        p[0].grad = Tensor::matrix(1, 3, vec![0.1, -0.2, 0.3]).unwrap();
        let cfg = AdamPConfig::new(0.01, 0.0);
        adamp_step(&mut p, &cfg, 1).unwrap();
        // first Adam step is lr·sign(g) up to eps
        for (w, g) in p[0].value.data().iter().zip([0.1f64, -0.2, 0.3]) {
            assert!((w + 0.01 * g / (g.abs() + 1e-8)).abs() < 1e-12);
        }
    }

    #[test]
    fn adamp_projection_removes_radial_part() {
        let mut p = vec![ParamSlot::new("w", Tensor::matrix(1, 2, vec![3.0, 0.0]).unwrap())];
        p[0].grad = Tensor::matrix(1, 2, vec![0.0, 0.5]).unwrap();
        // prime the first moment so that u has a radial component
        p[0].m = vec![0.4, 0.0];
        p[0].v = vec![0.01, 0.0];
        p[0].buf = vec![0.0, 0.0];
        let cfg = AdamPConfig { beta1: 0.5, beta2: 0.5, ..AdamPConfig::new(0.1, 0.0) };
        let w0 = p[0].value.data().to_vec();
        adamp_step(&mut p, &cfg, 3).unwrap();
        let w1 = p[0].value.data();
        let du = [(w0[0] - w1[0]) / 0.1, (w0[1] - w1[1]) / 0.1];
        assert!((w0[0] * du[0] + w0[1] * du[1]).abs() < 1e-12);
        assert!(du[1].abs() > 0.1);
    }

    #[test]
    fn configs_validate() {
        assert!(LambConfig::new(0.0, 0.0).validate().is_err());
        assert!(SgdConfig { momentum: 1.0, ..SgdConfig::new(0.1, 0.0) }.validate().is_err());
        assert!(RmsPropTfConfig::new(0.1, -1.0).validate().is_err());
        assert!(AdamPConfig::new(0.1, 0.01).validate().is_ok());
    }
}
