//! Two-head dot-product attention over encoder states.

use crate::autodiff::{Graph, Real, Var};
use crate::error::{Error, Result};

pub const PREMISE_HEAD: &str = "att.premise";
pub const HYPOTHESIS_HEAD: &str = "att.hypothesis";

/// Per-sequence projections of one head; they do not depend on the decoder step.
pub struct HeadCache {
    proj1: Var,
    proj2: Var,
    wc: Var,
    bc: Var,
    mask: Vec<bool>,
}

/// `tanh(W1 h_t + b1)` and `tanh(W2 h_t + b2)` for every row of `states`.
/// `mask[t]` is true for real positions.
pub fn precompute_head<T: Real>(g: &mut Graph<'_, T>, prefix: &str, states: Var, mask: &[bool]) -> Result<HeadCache> {
    let rows = g.shape(states).first().copied().unwrap_or(0);
    if g.shape(states).len() != 2 || rows != mask.len() {
        return Err(Error::shape("attention", format!("states {:?} vs mask of {}", g.shape(states), mask.len())));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked);
    }
    let p = |g: &mut Graph<'_, T>, n: &str| g.param(&format!("{prefix}.{n}"));
    let (w1, b1, w2, b2) = (p(g, "w1")?, p(g, "b1")?, p(g, "w2")?, p(g, "b2")?);
    let (wc, bc) = (p(g, "wc")?, p(g, "bc")?);
    let a1 = g.linear(states, w1, Some(b1))?;
    let proj1 = g.tanh(a1)?;
    let a2 = g.linear(states, w2, Some(b2))?;
    let proj2 = g.tanh(a2)?;
    Ok(HeadCache { proj1, proj2, wc, bc, mask: mask.to_vec() })
}

/// Attend with decoder context `h_dec`. Scores are laid out over `width`
/// slots; slots past the sequence and masked positions get weight 0.
/// Returns the attended vector and the weights over the sequence positions.
pub fn attend<T: Real>(g: &mut Graph<'_, T>, head: &HeadCache, h_dec: Var, width: usize) -> Result<(Var, Var)> {
    let t = head.mask.len();
    if t > width {
        return Err(Error::shape("attention", format!("{t} positions exceed the attended width {width}")));
    }
    let ac = g.linear(h_dec, head.wc, Some(head.bc))?;
    let projc = g.tanh(ac)?;
    let scores = g.matvec(head.proj1, projc)?;
    let (padded, mask) = if t < width {
        let z = g.zeros(width - t)?;
        let mut m = head.mask.clone();
        m.resize(width, false);
        (g.concat(&[scores, z])?, m)
    } else {
        (scores, head.mask.clone())
    };
    let w_full = g.softmax(padded, Some(&mask))?;
    let weights = if t < width { g.slice(w_full, 0, t)? } else { w_full };
    let ctx = g.vecmat(weights, head.proj2)?;
    Ok((ctx, weights))
}

pub struct AttentionOut {
    pub p: Var,
    pub h: Var,
    pub weights_p: Var,
    pub weights_h: Var,
}

/// One attention step with both heads: `(p_tau, h_tau)` from premise states
/// `h_p`, hypothesis states `h_h` and decoder context `h_dec`.
#[allow(clippy::too_many_arguments)]
pub fn attention_step<T: Real>(
    g: &mut Graph<'_, T>,
    h_p: Var,
    mask_p: &[bool],
    h_h: Var,
    mask_h: &[bool],
    h_dec: Var,
    width: usize,
) -> Result<AttentionOut> {
    let hp = precompute_head(g, PREMISE_HEAD, h_p, mask_p)?;
    let hh = precompute_head(g, HYPOTHESIS_HEAD, h_h, mask_h)?;
    let (p, weights_p) = attend(g, &hp, h_dec, width)?;
    let (h, weights_h) = attend(g, &hh, h_dec, width)?;
    Ok(AttentionOut { p, h, weights_p, weights_h })
}
