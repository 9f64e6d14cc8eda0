use super::ParamSlot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AgcConfig {
    pub clip_factor: f64,
    pub eps: f64,
}

impl AgcConfig {
    pub fn new(clip_factor: f64) -> Self {
        AgcConfig { clip_factor, eps: 1e-3 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clip_factor > 0.0 && self.eps >= 0.0 {
            Ok(())
        } else {
            Err(Error::config(format!("AGC clip factor {} must be positive", self.clip_factor)))
        }
    }
}

/// Unit-wise gradient clipping. For each unit, gradients with
/// `‖g‖ / max(‖w‖, eps) > λ` are rescaled to exactly that ratio. Biases
/// and other rank < 2 slots are left alone.
pub fn agc_clip(slots: &mut [ParamSlot], cfg: &AgcConfig) -> Result<()> {
    cfg.validate()?;
    for s in slots.iter_mut() {
        if s.value.rank() < 2 {
            continue;
        }
        let groups = s.groups();
        let w = s.value.data();
        let g = s.grad.data_mut();
        for k in 0..groups.count {
            let wn = groups.indices(k).map(|i| w[i] * w[i]).sum::<f64>().sqrt().max(cfg.eps);
            let gn = groups.indices(k).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
            let max = cfg.clip_factor * wn;
            // the slack keeps a second pass from rescaling by 1 − ulp
            if gn > max * (1.0 + 1e-12) {
                let scale = max / gn;
                for i in groups.indices(k) {
                    g[i] *= scale;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn scalar_oracle() {
        let mut s = ParamSlot::new("w", Tensor::matrix(1, 1, vec![1.0]).unwrap());
        s.grad = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let mut slots = vec![s];
        agc_clip(&mut slots, &AgcConfig::new(0.05)).unwrap();
        assert!((slots[0].grad.data()[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_grad_and_biases_untouched() {
        let mut w = ParamSlot::new("w", Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        w.grad = Tensor::zeros(&[2, 2]);
        let mut b = ParamSlot::new("b", Tensor::from_vec(vec![0.01, 0.01]));
        b.grad = Tensor::from_vec(vec![5.0, 5.0]);
        let mut slots = vec![w, b];
        agc_clip(&mut slots, &AgcConfig::new(0.01)).unwrap();
        assert!(slots[0].grad.data().iter().all(|&g| g == 0.0));
        assert_eq!(slots[1].grad.data(), &[5.0, 5.0]);
    }

    #[test]
    fn per_row_bound_and_idempotence() {
        let mut s = ParamSlot::new("w", Tensor::matrix(2, 3, vec![1.0, 2.0, 2.0, 0.0, 0.0, 0.0]).unwrap());
        s.grad = Tensor::matrix(2, 3, vec![0.3, 0.0, 0.4, 1.0, 1.0, 1.0]).unwrap();
        let mut slots = vec![s];
        let cfg = AgcConfig::new(0.05);
        agc_clip(&mut slots, &cfg).unwrap();
        let g = slots[0].grad.data().to_vec();
        // row 0: |w|=3, |g|=0.5 > 0.15 → scaled to 0.15
        assert!(((g[0] * g[0] + g[2] * g[2]).sqrt() - 0.15).abs() < 1e-15);
        // row 1: |w| floored at eps
        assert!(((g[3] * g[3] + g[4] * g[4] + g[5] * g[5]).sqrt() - 0.05e-3).abs() < 1e-15);
        agc_clip(&mut slots, &cfg).unwrap();
        assert_eq!(slots[0].grad.data(), &g[..]);
    }
}
