//! LSTM explanation decoder, teacher-forced and greedy.

use rand::Rng;

use super::attention::{attend, HeadCache};
use super::layers::{argmax, embed, Lstm};
use crate::autodiff::{dropout_mask, Graph, Mode, Real, Var};
use crate::error::Result;
use crate::text::vocab::EOS;

/// What the decoder sees besides the previous word.
pub enum Conditioning {
    /// A projection of this vector is appended to every step input.
    Plain(Var),
    /// Premise and hypothesis heads, queried with the previous decoder state.
    Attention { premise: HeadCache, hypothesis: HeadCache, width: usize },
}

pub struct Decoder {
    lstm: Lstm,
    out_w: Var,
    out_b: Var,
    step_cond: Option<Var>,
    attention: Option<(HeadCache, HeadCache, usize)>,
    h: Var,
    c: Var,
    /// Recurrent-dropout mask applied to the state carried to the next step.
    mask: Option<Vec<f64>>,
}

fn affine<T: Real>(g: &mut Graph<'_, T>, name: &str, x: Var) -> Result<Var> {
    let w = g.param(&format!("{name}.w"))?;
    let b = g.param(&format!("{name}.b"))?;
    g.linear(x, w, Some(b))
}

impl Decoder {
    /// Initial state from affine projections of `init`, the vector summarising the input.
    pub fn start<T: Real, R: Rng + ?Sized>(
        g: &mut Graph<'_, T>,
        init: Var,
        cond: Conditioning,
        dropout: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Self> {
        let h = affine(g, "dec.init_h", init)?;
        let c = affine(g, "dec.init_c", init)?;
        let (step_cond, attention) = match cond {
            Conditioning::Plain(v) => (Some(affine(g, "dec.cond", v)?), None),
            Conditioning::Attention { premise, hypothesis, width } => (None, Some((premise, hypothesis, width))),
        };
        let lstm = Lstm::lookup(g, "dec.lstm")?;
        let mask = if mode == Mode::Train && dropout > 0.0 {
            Some(dropout_mask::<f64, R>(rng, g.value(h).len(), dropout)?)
        } else {
            None
        };
        Ok(Decoder {
            lstm,
            out_w: g.param("dec.out.w")?,
            out_b: g.param("dec.out.b")?,
            step_cond,
            attention,
            h,
            c,
            mask,
        })
    }

    /// Feed `prev` and return the next-token distribution.
    pub fn step<T: Real>(&mut self, g: &mut Graph<'_, T>, prev: usize) -> Result<Var> {
        let e = embed(g, prev)?;
        let x = match (&self.step_cond, &self.attention) {
            (Some(sc), _) => g.concat(&[e, *sc])?,
            (None, Some((hp, hh, width))) => {
                let (p, _) = attend(g, hp, self.h, *width)?;
                let (q, _) = attend(g, hh, self.h, *width)?;
                g.concat(&[p, q, e])?
            }
            (None, None) => unreachable!("decoder always has a conditioning source"),
        };
        let h_in = match &self.mask {
            Some(m) => g.mul_const(self.h, m.iter().map(|&v| T::lit(v)).collect())?,
            None => self.h,
        };
        let (h, c) = self.lstm.step(g, x, h_in, self.c)?;
        self.h = h;
        self.c = c;
        let logits = g.linear(h, self.out_w, Some(self.out_b))?;
        g.softmax(logits, None)
    }
}

pub struct TeacherForced {
    /// Sum of per-step cross-entropies.
    pub loss: Var,
    pub correct: usize,
    pub steps: usize,
}

/// Feed `start` then the gold tokens; `targets` is the gold body followed by `<EOS>`.
pub fn teacher_forced<T: Real>(
    g: &mut Graph<'_, T>,
    dec: &mut Decoder,
    start: usize,
    targets: &[usize],
) -> Result<TeacherForced> {
    let mut losses = Vec::with_capacity(targets.len());
    let mut correct = 0;
    let mut prev = start;
    for &t in targets {
        let probs = dec.step(g, prev)?;
        if argmax(g.value(probs)) == t {
            correct += 1;
        }
        losses.push(g.cross_entropy(probs, t)?);
        prev = t;
    }
    Ok(TeacherForced { loss: g.sum_all(&losses)?, correct, steps: targets.len() })
}

/// Emit argmax tokens until `<EOS>` or `max_len` tokens. `<EOS>` is not returned.
pub fn greedy<T: Real>(g: &mut Graph<'_, T>, dec: &mut Decoder, start: usize, max_len: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut prev = start;
    while out.len() < max_len {
        let probs = dec.step(g, prev)?;
        let next = argmax(g.value(probs));
        if next == EOS {
            break;
        }
        out.push(next);
        prev = next;
    }
    Ok(out)
}
