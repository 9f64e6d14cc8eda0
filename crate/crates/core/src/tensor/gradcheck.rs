use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Analytic gradient from the tape and the central-difference estimate, per
/// component of `x`.
pub fn grad_check_components<F>(f: F, x: &Tensor, h: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.param(x.clone())?;
    let y = f(&mut tape, xv)?;
    tape.backward(y)?;
    let analytic = tape.grad(xv).map(Tensor::into_data).unwrap_or_else(|| vec![0.0; x.numel()]);

    let eval = |probe: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.constant(probe)?;
        let y = f(&mut tape, v)?;
        tape.value(y).item()
    };
    let mut numeric = Vec::with_capacity(x.numel());
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        numeric.push((eval(plus)? - eval(minus)?) / (2.0 * h));
    }
    Ok((analytic, numeric))
}

/// Largest relative disagreement between the tape gradient of scalar `f` at
/// `x` and central differences with step `h`:
/// `max_i |a_i − n_i| / max(|a_i|, |n_i|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !x.is_finite() {
        return Err(Error::contract("grad_check at non-finite point"));
    }
    let (analytic, numeric) = grad_check_components(f, x, h)?;
    Ok(analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8)).fold(0.0, f64::max))
}
