use super::{MixMethod, MixOutcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Ce,
    Bce,
}

/// How BCE targets are formed from a mixing event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BceStyle {
    /// Every class picked by mixing is a positive (1, or 1−ε), independent
    /// of the mixing weight.
    Multilabel,
    /// The CE distribution row, fed to BCE.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSemantics {
    /// Rows sum to one.
    Distribution,
    /// Entries are independent per-class probabilities.
    Multilabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    pub rows: usize,
    pub classes: usize,
    pub values: Vec<f64>,
    pub semantics: TargetSemantics,
}

impl TargetMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.classes..(r + 1) * self.classes]
    }
}

fn check_smoothing(eps: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::config(format!("label smoothing {eps} outside [0, 0.5)")));
    }
    Ok(())
}

/// Builds one target row per outcome row. `labels` are indexed by source
/// sample.
///
/// * CE and BCE-normalized: `λ·onehot(y) + (1−λ)·onehot(y_partner)`, then
///   `(1−ε)·row + ε/K`.
/// * BCE-multilabel: classes with non-zero mixing weight get `1−ε`, all
///   others `ε/K`.
pub fn build_targets(
    labels: &[usize],
    outcome: &MixOutcome,
    classes: usize,
    loss: LossKind,
    smoothing: f64,
    style: BceStyle,
) -> Result<TargetMatrix> {
    check_smoothing(smoothing)?;
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::contract(format!("label {bad} outside [0, {classes})")));
    }
    let rows = outcome.len();
    let mut values = vec![0.0; rows * classes];
    let multilabel = loss == LossKind::Bce && style == BceStyle::Multilabel;
    for r in 0..rows {
        let row = &mut values[r * classes..(r + 1) * classes];
        let y = labels[outcome.primary[r]];
        let (lam, y2) = match outcome.method[r] {
            MixMethod::None => (1.0, y),
            _ => (outcome.lambda[r], labels[outcome.partner[r]]),
        };
        if multilabel {
            row.fill(smoothing / classes as f64);
            if lam > 0.0 {
                row[y] = 1.0 - smoothing;
            }
            if lam < 1.0 {
                row[y2] = 1.0 - smoothing;
            }
        } else {
            row[y] += lam;
            row[y2] += 1.0 - lam;
            if smoothing > 0.0 {
                for v in row.iter_mut() {
                    *v = (1.0 - smoothing) * *v + smoothing / classes as f64;
                }
            }
        }
    }
    let semantics = if multilabel { TargetSemantics::Multilabel } else { TargetSemantics::Distribution };
    Ok(TargetMatrix { rows, classes, values, semantics })
}
