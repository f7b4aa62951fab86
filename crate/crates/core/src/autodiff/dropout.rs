use rand::Rng;

use super::{Graph, Real, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, rate: f64) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    Ok((0..n).map(|_| if rate > 0.0 && rng.gen_bool(rate) { T::zero() } else { keep }).collect())
}

/// Dropout on `x`. Eval mode and rate 0 are the identity (no node is recorded).
///
/// Recurrent callers draw one mask with [`dropout_mask`] per sequence and
/// reuse it via [`Graph::mul_const`] at every step.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    g: &mut Graph<'_, T>,
    x: Var,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x);
    }
    let mask = dropout_mask(rng, g.value(x).len(), rate)?;
    g.mul_const(x, mask)
}
