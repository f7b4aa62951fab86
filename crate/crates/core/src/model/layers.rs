//! Encoder, feature construction and classifier.

use crate::autodiff::{Graph, Real, Var};
use crate::error::{Error, Result};
use crate::text::vocab::LABEL_BASE;
use crate::text::Vocabulary;

use super::config::Role;

pub const WORD_EMB: &str = "emb.words";
pub const LABEL_EMB: &str = "emb.labels";

/// Embedding lookup. Label tokens read the trainable label table, every other
/// token the frozen word table.
pub fn embed<T: Real>(g: &mut Graph<'_, T>, id: usize) -> Result<Var> {
    if Vocabulary::is_label_id(id) {
        let t = g.param(LABEL_EMB)?;
        g.gather_row(t, id - LABEL_BASE)
    } else {
        let t = g.param(WORD_EMB)?;
        g.gather_row(t, id)
    }
}

pub(crate) struct Lstm {
    pub w_ih: Var,
    pub w_hh: Var,
    pub b: Var,
}

impl Lstm {
    pub fn lookup<T: Real>(g: &mut Graph<'_, T>, prefix: &str) -> Result<Self> {
        Ok(Lstm {
            w_ih: g.param(&format!("{prefix}.w_ih"))?,
            w_hh: g.param(&format!("{prefix}.w_hh"))?,
            b: g.param(&format!("{prefix}.b"))?,
        })
    }

    pub fn step<T: Real>(&self, g: &mut Graph<'_, T>, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let s = g.lstm_cell(x, h, c, self.w_ih, self.w_hh, self.b)?;
        g.lstm_split(s)
    }
}

/// Encoder output for one sentence.
pub struct Encoded {
    /// Max-pooled sentence vector, `[2H]`.
    pub u: Var,
    /// Bidirectional state per real timestep, `[len, 2H]`.
    pub states: Var,
    pub len: usize,
}

/// BiLSTM over the first `len` ids, max-pooled over those timesteps only.
/// Anything past `len` (padding) is never read.
pub fn encode_sentence<T: Real>(g: &mut Graph<'_, T>, role: Role, ids: &[usize], len: usize) -> Result<Encoded> {
    if len == 0 {
        return Err(Error::EmptySequence("encode_sentence"));
    }
    if len > ids.len() {
        return Err(Error::shape("encode_sentence", format!("length {len} exceeds {} ids", ids.len())));
    }
    let prefix = role.prefix();
    let fwd = Lstm::lookup(g, &format!("{prefix}.fwd"))?;
    let bwd = Lstm::lookup(g, &format!("{prefix}.bwd"))?;
    let hidden = g.shape(fwd.w_hh)[1];
    let xs = ids[..len].iter().map(|&id| embed(g, id)).collect::<Result<Vec<_>>>()?;

    let run = |g: &mut Graph<'_, T>, lstm: &Lstm, order: &mut dyn Iterator<Item = usize>| -> Result<Vec<Option<Var>>> {
        let mut out = vec![None; len];
        let (mut h, mut c) = (g.zeros(hidden)?, g.zeros(hidden)?);
        for t in order {
            (h, c) = lstm.step(g, xs[t], h, c)?;
            out[t] = Some(h);
        }
        Ok(out)
    };
    let f = run(g, &fwd, &mut (0..len))?;
    let b = run(g, &bwd, &mut (0..len).rev())?;
    let rows = f
        .into_iter()
        .zip(b)
        .map(|(f, b)| g.concat(&[f.expect("every step visited"), b.expect("every step visited")]))
        .collect::<Result<Vec<_>>>()?;
    let states = g.stack_rows(&rows)?;
    let u = g.max_over_time(states)?;
    Ok(Encoded { u, states, len })
}

/// `[u, v, |u - v|, u * v]`.
pub fn feature_vector<T: Real>(g: &mut Graph<'_, T>, u: Var, v: Var) -> Result<Var> {
    if g.shape(u) != g.shape(v) {
        return Err(Error::shape("feature_vector", format!("{:?} vs {:?}", g.shape(u), g.shape(v))));
    }
    let d = g.sub(u, v)?;
    let ad = g.abs(d)?;
    let p = g.mul(u, v)?;
    g.concat(&[u, v, ad, p])
}

/// Three affine layers with nothing between them; returns 3 logits.
pub fn classify<T: Real>(g: &mut Graph<'_, T>, f: Var) -> Result<Var> {
    let mut x = f;
    for layer in 0..3 {
        let w = g.param(&format!("mlp.{layer}.w"))?;
        let b = g.param(&format!("mlp.{layer}.b"))?;
        x = g.linear(x, w, Some(b))?;
    }
    Ok(x)
}

/// Index of the first maximum.
pub fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
