//! Parameter update rules and adaptive gradient clipping.
//!
//! Every rule works on a slice of [`ParamSlot`]s and a step counter `t`
//! (1-based, shared by all slots of one optimizer). Gradients are checked
//! for finiteness before any slot is touched, so a failed step leaves the
//! parameters and state as they were.

mod agc;
mod rules;

pub use agc::{agc_clip, AgcConfig};
pub use rules::{
    adamp_step, adamw_step, lamb_step, rmsprop_tf_step, sgd_nesterov_step, AdamPConfig, AdamWConfig, LambConfig, RmsPropTfConfig,
    SgdConfig,
};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How a parameter is cut into units for per-unit norms (AGC, AdamP).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitShape {
    /// One unit per row of a `[rows × cols]` matrix.
    Rows,
    /// One unit per column; for weights stored `[in × out]`, a column is
    /// one output unit.
    Columns,
    Whole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Whether weight decay applies to this slot.
    pub decay: bool,
    pub unit: UnitShape,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub buf: Vec<f64>,
}

impl ParamSlot {
    /// Rank ≥ 2 tensors are grouped by rows, vectors as a whole. Weight
    /// decay defaults to on for rank ≥ 2 only.
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let (unit, decay) = if value.rank() >= 2 { (UnitShape::Rows, true) } else { (UnitShape::Whole, false) };
        let grad = Tensor::zeros(value.shape());
        ParamSlot { name: name.into(), value, grad, decay, unit, m: Vec::new(), v: Vec::new(), buf: Vec::new() }
    }

    pub fn with_unit(mut self, unit: UnitShape) -> Self {
        self.unit = unit;
        self
    }

    pub fn with_decay(mut self, decay: bool) -> Self {
        self.decay = decay;
        self
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<()> {
        if grad.len() != self.value.numel() {
            return Err(Error::dim(format!(
                "gradient for {} has {} values, expected {}",
                self.name,
                grad.len(),
                self.value.numel()
            )));
        }
        self.grad = Tensor::new(self.value.shape().to_vec(), grad)?;
        Ok(())
    }

    pub(crate) fn groups(&self) -> Groups {
        let n = self.value.numel();
        let shape = self.value.shape();
        if self.value.rank() < 2 || self.unit == UnitShape::Whole {
            return Groups { count: 1, len: n, stride: 1, step: 0 };
        }
        let rows = shape[0];
        let cols = n / rows.max(1);
        match self.unit {
            UnitShape::Rows => Groups { count: rows, len: cols, stride: 1, step: cols },
            _ => Groups { count: cols, len: rows, stride: cols, step: 1 },
        }
    }

    fn ensure_state(&mut self, v_init: f64) {
        let n = self.value.numel();
        if self.m.len() != n {
            self.m = vec![0.0; n];
            self.v = vec![v_init; n];
            self.buf = vec![0.0; n];
        }
    }
}

/// Strided index sets: element `k` of group `g` is `g·step + k·stride`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Groups {
    pub count: usize,
    pub len: usize,
    stride: usize,
    step: usize,
}

impl Groups {
    pub fn indices(&self, g: usize) -> impl Iterator<Item = usize> {
        let (base, stride) = (g * self.step, self.stride);
        (0..self.len).map(move |k| base + k * stride)
    }
}

fn check_grads(slots: &[ParamSlot]) -> Result<()> {
    for s in slots {
        if s.grad.shape() != s.value.shape() {
            return Err(Error::dim(format!("gradient shape {:?} for {} of shape {:?}", s.grad.shape(), s.name, s.value.shape())));
        }
        if !s.grad.is_finite() {
            return Err(Error::numeric(format!("non-finite gradient in {}", s.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerConfig {
    Lamb(LambConfig),
    Sgd(SgdConfig),
    RmsPropTf(RmsPropTfConfig),
    AdamP(AdamPConfig),
    AdamW(AdamWConfig),
}

impl OptimizerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Lamb(_) => "lamb",
            OptimizerConfig::Sgd(_) => "sgd",
            OptimizerConfig::RmsPropTf(_) => "rmsprop_tf",
            OptimizerConfig::AdamP(_) => "adamp",
            OptimizerConfig::AdamW(_) => "adamw",
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            OptimizerConfig::Lamb(c) => c.lr,
            OptimizerConfig::Sgd(c) => c.lr,
            OptimizerConfig::RmsPropTf(c) => c.lr,
            OptimizerConfig::AdamP(c) => c.lr,
            OptimizerConfig::AdamW(c) => c.lr,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        match self {
            OptimizerConfig::Lamb(c) => c.lr = lr,
            OptimizerConfig::Sgd(c) => c.lr = lr,
            OptimizerConfig::RmsPropTf(c) => c.lr = lr,
            OptimizerConfig::AdamP(c) => c.lr = lr,
            OptimizerConfig::AdamW(c) => c.lr = lr,
        }
    }

    pub fn weight_decay(&self) -> f64 {
        match self {
            OptimizerConfig::Lamb(c) => c.weight_decay,
            OptimizerConfig::Sgd(c) => c.weight_decay,
            OptimizerConfig::RmsPropTf(c) => c.weight_decay,
            OptimizerConfig::AdamP(c) => c.weight_decay,
            OptimizerConfig::AdamW(c) => c.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::Lamb(c) => c.validate(),
            OptimizerConfig::Sgd(c) => c.validate(),
            OptimizerConfig::RmsPropTf(c) => c.validate(),
            OptimizerConfig::AdamP(c) => c.validate(),
            OptimizerConfig::AdamW(c) => c.validate(),
        }
    }
}

/// An update rule plus its shared step counter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    t: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer { config, t: 0 })
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Runs one update at learning rate `lr`. The counter only advances
    /// when the step succeeds.
    pub fn step(&mut self, slots: &mut [ParamSlot], lr: f64) -> Result<()> {
        self.config.set_lr(lr);
        let t = self.t + 1;
        match &self.config {
            OptimizerConfig::Lamb(c) => lamb_step(slots, c, t)?,
            OptimizerConfig::Sgd(c) => sgd_nesterov_step(slots, c)?,
            OptimizerConfig::RmsPropTf(c) => rmsprop_tf_step(slots, c)?,
            OptimizerConfig::AdamP(c) => adamp_step(slots, c, t)?,
            OptimizerConfig::AdamW(c) => adamw_step(slots, c, t)?,
        }
        self.t = t;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_cover_every_index_once() {
        let value = Tensor::new(vec![3, 4], (0..12).map(f64::from).collect()).unwrap();
        for unit in [UnitShape::Rows, UnitShape::Columns, UnitShape::Whole] {
            let slot = ParamSlot::new("w", value.clone()).with_unit(unit);
            let g = slot.groups();
            let mut seen: Vec<usize> = (0..g.count).flat_map(|i| g.indices(i)).collect();
            seen.sort();
            assert_eq!(seen, (0..12).collect::<Vec<_>>(), "{unit:?}");
        }
        let cols = ParamSlot::new("w", value).with_unit(UnitShape::Columns).groups();
        assert_eq!(cols.indices(1).collect::<Vec<_>>(), vec![1, 5, 9]);
    }

    #[test]
    fn nan_gradient_aborts_without_touching_state() {
        let mut slots =
            vec![ParamSlot::new("a", Tensor::from_vec(vec![1.0, 2.0])), ParamSlot::new("b", Tensor::from_vec(vec![3.0]))];
        slots[0].grad = Tensor::from_vec(vec![0.5, 0.5]);
        slots[1].grad = Tensor::from_vec(vec![f64::NAN]);
        let mut opt = Optimizer::new(OptimizerConfig::Lamb(LambConfig::new(0.1, 0.0))).unwrap();
        assert!(matches!(opt.step(&mut slots, 0.1), Err(Error::Numeric(_))));
        assert_eq!(slots[0].value.data(), &[1.0, 2.0]);
        assert!(slots.iter().all(|s| s.m.is_empty()));
        assert_eq!(opt.steps(), 0);
    }
}
