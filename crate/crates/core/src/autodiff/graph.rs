use std::collections::HashMap;

use super::{sigmoid, Gradients, ParamStore, Real, LOG_FLOOR};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Value<T> {
    Owned(Vec<T>),
    Param(usize),
}

#[derive(Debug)]
enum Op<T> {
    Constant,
    Param,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Vec<T>),
    Scale(Var, T),
    Abs(Var),
    Tanh(Var),
    Sigmoid(Var),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
        rows: usize,
    },
    MatVec {
        a: Var,
        x: Var,
    },
    VecMat {
        x: Var,
        a: Var,
    },
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    StackRows(Vec<Var>),
    GatherRow {
        table: Var,
        row: usize,
    },
    MaxOverTime {
        x: Var,
        argmax: Vec<usize>,
    },
    Softmax(Var),
    CrossEntropy {
        probs: Var,
        target: usize,
    },
    Sum(Var),
    SumAll(Vec<Var>),
    /// Saved post-activation gates `[i, f, g, o]` and `tanh(c')`.
    LstmCell {
        x: Var,
        h: Var,
        c: Var,
        w_ih: Var,
        w_hh: Var,
        b: Var,
        gates: Vec<T>,
        tanh_c: Vec<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    shape: Vec<usize>,
    value: Value<T>,
    op: Op<T>,
    requires_grad: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TapeState {
    Recording,
    Consumed,
}

/// Tape recording one forward pass over a borrowed parameter store.
///
/// Parameters are referenced, not copied. A tape supports exactly one
/// backward pass; call [`Graph::reset`] to record again.
pub struct Graph<'p, T: Real = f32> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: HashMap<usize, Var>,
    state: TapeState,
    clamped: usize,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph { params, nodes: Vec::new(), param_nodes: HashMap::new(), state: TapeState::Recording, clamped: 0 }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn reset(&mut self) {
        self.nodes.clear();
        self.param_nodes.clear();
        self.state = TapeState::Recording;
        self.clamped = 0;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of cross-entropy evaluations whose target probability hit the log floor.
    pub fn clamp_events(&self) -> usize {
        self.clamped
    }

    pub fn value(&self, v: Var) -> &[T] {
        match &self.nodes[v.0].value {
            Value::Owned(d) => d,
            Value::Param(id) => &self.params.by_id(*id).tensor.data,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<T>, op: Op<T>, inputs: &[Var]) -> Var {
        debug_assert_eq!(numel(&shape), data.len());
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { shape, value: Value::Owned(data), op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn check_recording(&self) -> Result<()> {
        if self.state != TapeState::Recording {
            return Err(Error::TapeState("tape already consumed by backward; reset before recording"));
        }
        Ok(())
    }

    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<T>) -> Result<Var> {
        self.check_recording()?;
        if numel(&shape) != data.len() {
            return Err(Error::shape("constant", format!("shape {shape:?} vs {} values", data.len())));
        }
        Ok(self.push(shape, data, Op::Constant, &[]))
    }

    pub fn vector(&mut self, data: Vec<T>) -> Result<Var> {
        let n = data.len();
        self.constant(vec![n], data)
    }

    pub fn zeros(&mut self, n: usize) -> Result<Var> {
        self.vector(vec![T::zero(); n])
    }

    /// Node for a named parameter; repeated lookups share one node.
    pub fn param(&mut self, name: &str) -> Result<Var> {
        let id = self.params.id(name)?;
        self.param_by_id(id)
    }

    pub fn param_by_id(&mut self, id: usize) -> Result<Var> {
        self.check_recording()?;
        if let Some(v) = self.param_nodes.get(&id) {
            return Ok(*v);
        }
        let p = self.params.by_id(id);
        self.nodes.push(Node {
            shape: p.tensor.shape.clone(),
            value: Value::Param(id),
            op: Op::Param,
            requires_grad: p.trainable,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        Ok(v)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        mk: fn(Var, Var) -> Op<T>,
    ) -> Result<Var> {
        self.check_recording()?;
        self.same_shape(op, a, b)?;
        let data = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, data, mk(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// Elementwise product with a fixed (non-differentiated) array, e.g. a dropout mask.
    pub fn mul_const(&mut self, x: Var, factor: Vec<T>) -> Result<Var> {
        self.check_recording()?;
        if factor.len() != self.value(x).len() {
            return Err(Error::shape("mul_const", format!("{} vs {}", factor.len(), self.value(x).len())));
        }
        let data = self.value(x).iter().zip(&factor).map(|(&a, &m)| a * m).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, data, Op::MulConst(x, factor), &[x]))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        self.check_recording()?;
        let data = self.value(x).iter().map(|&a| a * s).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, data, Op::Scale(x, s), &[x]))
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Result<Var> {
        self.check_recording()?;
        let data = self.value(x).iter().map(|&a| f(a)).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, data, op, &[x]))
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |a| a.abs(), Op::Abs(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |a| a.tanh(), Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    /// `W x + b` for `x` of shape `[n]` or `[rows, n]`, `W` of shape `[m, n]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        self.check_recording()?;
        let ws = self.shape(w).to_vec();
        let xs = self.shape(x).to_vec();
        if ws.len() != 2 {
            return Err(Error::shape("linear", format!("weight must be 2-D, got {ws:?}")));
        }
        let (m, n) = (ws[0], ws[1]);
        let (rows, out_shape) = match xs.as_slice() {
            [k] if *k == n => (1, vec![m]),
            [r, k] if *k == n => (*r, vec![*r, m]),
            _ => return Err(Error::shape("linear", format!("input {xs:?} vs weight {ws:?}"))),
        };
        if let Some(b) = b {
            if self.shape(b) != [m] {
                return Err(Error::shape("linear", format!("bias {:?} vs {m} outputs", self.shape(b))));
            }
        }
        let wv = self.value(w);
        let xv = self.value(x);
        let bv = b.map(|b| self.value(b));
        let mut out = vec![T::zero(); rows * m];
        for r in 0..rows {
            let xr = &xv[r * n..(r + 1) * n];
            for i in 0..m {
                let wr = &wv[i * n..(i + 1) * n];
                let mut acc = T::zero();
                for j in 0..n {
                    acc += wr[j] * xr[j];
                }
                if let Some(bv) = bv {
                    acc += bv[i];
                }
                out[r * m + i] = acc;
            }
        }
        let inputs: Vec<Var> = std::iter::once(x).chain(std::iter::once(w)).chain(b).collect();
        Ok(self.push(out_shape, out, Op::Linear { x, w, b, rows }, &inputs))
    }

    /// `A x` for `A` of shape `[t, m]` and `x` of shape `[m]`.
    pub fn matvec(&mut self, a: Var, x: Var) -> Result<Var> {
        self.check_recording()?;
        let (t, m) = match self.shape(a) {
            [t, m] if self.shape(x) == [*m] => (*t, *m),
            s => return Err(Error::shape("matvec", format!("{s:?} x {:?}", self.shape(x)))),
        };
        let av = self.value(a);
        let xv = self.value(x);
        let out =
            (0..t).map(|r| av[r * m..(r + 1) * m].iter().zip(xv).fold(T::zero(), |s, (&p, &q)| s + p * q)).collect();
        Ok(self.push(vec![t], out, Op::MatVec { a, x }, &[a, x]))
    }

    /// `x^T A` for `x` of shape `[t]` and `A` of shape `[t, m]`.
    pub fn vecmat(&mut self, x: Var, a: Var) -> Result<Var> {
        self.check_recording()?;
        let (t, m) = match self.shape(a) {
            [t, m] if self.shape(x) == [*t] => (*t, *m),
            s => return Err(Error::shape("vecmat", format!("{:?} x {s:?}", self.shape(x)))),
        };
        let av = self.value(a);
        let xv = self.value(x);
        let mut out = vec![T::zero(); m];
        for r in 0..t {
            let w = xv[r];
            for (o, &v) in out.iter_mut().zip(&av[r * m..(r + 1) * m]) {
                *o += w * v;
            }
        }
        Ok(self.push(vec![m], out, Op::VecMat { x, a }, &[x, a]))
    }

    /// Concatenate 1-D vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        self.check_recording()?;
        if parts.is_empty() {
            return Err(Error::EmptySequence("concat"));
        }
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::shape("concat", format!("expected 1-D parts, got {:?}", self.shape(p))));
            }
            out.extend_from_slice(self.value(p));
        }
        let n = out.len();
        Ok(self.push(vec![n], out, Op::Concat(parts.to_vec()), parts))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        self.check_recording()?;
        let v = self.value(x);
        if self.shape(x).len() != 1 || start + len > v.len() {
            return Err(Error::shape("slice", format!("[{start}..{}] of {:?}", start + len, self.shape(x))));
        }
        let out = v[start..start + len].to_vec();
        Ok(self.push(vec![len], out, Op::Slice { x, start }, &[x]))
    }

    /// Stack equal-length 1-D vectors into a `[t, d]` matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        self.check_recording()?;
        if rows.is_empty() {
            return Err(Error::EmptySequence("stack_rows"));
        }
        let d = self.value(rows[0]).len();
        let mut out = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            if self.shape(r) != [d] {
                return Err(Error::shape("stack_rows", format!("row {:?} vs [{d}]", self.shape(r))));
            }
            out.extend_from_slice(self.value(r));
        }
        Ok(self.push(vec![rows.len(), d], out, Op::StackRows(rows.to_vec()), rows))
    }

    /// Row `row` of a 2-D parameter (an embedding lookup).
    pub fn gather_row(&mut self, table: Var, row: usize) -> Result<Var> {
        self.check_recording()?;
        let (n, d) = match self.shape(table) {
            [n, d] => (*n, *d),
            s => return Err(Error::shape("gather_row", format!("table must be 2-D, got {s:?}"))),
        };
        if row >= n {
            return Err(Error::shape("gather_row", format!("row {row} out of {n}")));
        }
        let out = self.value(table)[row * d..(row + 1) * d].to_vec();
        Ok(self.push(vec![d], out, Op::GatherRow { table, row }, &[table]))
    }

    /// Per-column maximum over the rows of a `[t, d]` matrix.
    ///
    /// Backward routes each column's gradient to its first maximal row.
    pub fn max_over_time(&mut self, x: Var) -> Result<Var> {
        self.check_recording()?;
        let (t, d) = match self.shape(x) {
            [t, d] => (*t, *d),
            s => return Err(Error::shape("max_over_time", format!("expected [t, d], got {s:?}"))),
        };
        if t == 0 {
            return Err(Error::EmptySequence("max_over_time"));
        }
        let v = self.value(x);
        let mut out = v[..d].to_vec();
        let mut argmax = vec![0usize; d];
        for r in 1..t {
            for c in 0..d {
                let val = v[r * d + c];
                if val > out[c] {
                    out[c] = val;
                    argmax[c] = r;
                }
            }
        }
        Ok(self.push(vec![d], out, Op::MaxOverTime { x, argmax }, &[x]))
    }

    /// Softmax over a 1-D vector. Masked (`false`) positions get exactly 0.
    pub fn softmax(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var> {
        self.check_recording()?;
        let v = self.value(x);
        if self.shape(x).len() != 1 {
            return Err(Error::shape("softmax", format!("expected 1-D, got {:?}", self.shape(x))));
        }
        let out = softmax_values(v, mask)?;
        let n = out.len();
        Ok(self.push(vec![n], out, Op::Softmax(x), &[x]))
    }

    /// `-ln(max(probs[target], 1e-12))`.
    pub fn cross_entropy(&mut self, probs: Var, target: usize) -> Result<Var> {
        self.check_recording()?;
        let v = self.value(probs);
        if target >= v.len() {
            return Err(Error::shape("cross_entropy", format!("target {target} out of {}", v.len())));
        }
        let floor = T::lit(LOG_FLOOR);
        let p = v[target];
        if p <= floor {
            self.clamped += 1;
            log::warn!("cross_entropy: target probability {:?} clamped to the log floor", p.as_f64());
        }
        // NaN must survive the floor so divergence stays visible.
        let loss = if p.is_nan() { p } else { -(p.max(floor)).ln() };
        Ok(self.push(vec![1], vec![loss], Op::CrossEntropy { probs, target }, &[probs]))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check_recording()?;
        let s = self.value(x).iter().copied().sum();
        Ok(self.push(vec![1], vec![s], Op::Sum(x), &[x]))
    }

    /// Sum of scalar nodes, accumulated left to right.
    pub fn sum_all(&mut self, xs: &[Var]) -> Result<Var> {
        self.check_recording()?;
        let mut s = T::zero();
        for &x in xs {
            if self.value(x).len() != 1 {
                return Err(Error::shape("sum_all", format!("expected scalars, got {:?}", self.shape(x))));
            }
            s += self.value(x)[0];
        }
        Ok(self.push(vec![1], vec![s], Op::SumAll(xs.to_vec()), xs))
    }

    /// One LSTM step with gates ordered `[input, forget, cell-candidate, output]`.
    ///
    /// Returns the concatenated state `[h', c']` of length `2H`; see
    /// [`Graph::lstm_split`].
    pub fn lstm_cell(&mut self, x: Var, h: Var, c: Var, w_ih: Var, w_hh: Var, b: Var) -> Result<Var> {
        self.check_recording()?;
        let hs = self.value(h).len();
        let ds = self.value(x).len();
        if self.shape(w_ih) != [4 * hs, ds]
            || self.shape(w_hh) != [4 * hs, hs]
            || self.shape(b) != [4 * hs]
            || self.value(c).len() != hs
        {
            return Err(Error::shape(
                "lstm_cell",
                format!(
                    "x [{ds}], h [{hs}], c [{}], w_ih {:?}, w_hh {:?}, b {:?}",
                    self.value(c).len(),
                    self.shape(w_ih),
                    self.shape(w_hh),
                    self.shape(b)
                ),
            ));
        }
        let (xv, hv, cv) = (self.value(x), self.value(h), self.value(c));
        let (wi, wh, bv) = (self.value(w_ih), self.value(w_hh), self.value(b));
        let mut gates = bv.to_vec();
        for (r, g) in gates.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (a, &xx) in wi[r * ds..(r + 1) * ds].iter().zip(xv) {
                acc += *a * xx;
            }
            for (a, &hh) in wh[r * hs..(r + 1) * hs].iter().zip(hv) {
                acc += *a * hh;
            }
            *g += acc;
        }
        for (k, g) in gates.iter_mut().enumerate() {
            *g = if (2 * hs..3 * hs).contains(&k) { g.tanh() } else { sigmoid(*g) };
        }
        let mut out = vec![T::zero(); 2 * hs];
        let mut tanh_c = vec![T::zero(); hs];
        for j in 0..hs {
            let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
            let cn = f * cv[j] + i * g;
            tanh_c[j] = cn.tanh();
            out[j] = o * tanh_c[j];
            out[hs + j] = cn;
        }
        Ok(self.push(
            vec![2 * hs],
            out,
            Op::LstmCell { x, h, c, w_ih, w_hh, b, gates, tanh_c },
            &[x, h, c, w_ih, w_hh, b],
        ))
    }

    /// Split an `lstm_cell` state into `(h, c)`.
    pub fn lstm_split(&mut self, state: Var) -> Result<(Var, Var)> {
        let hs = self.value(state).len() / 2;
        Ok((self.slice(state, 0, hs)?, self.slice(state, hs, hs)?))
    }

    /// Reverse pass from a scalar loss. Returns gradients for every trainable
    /// parameter the loss depends on and consumes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.state == TapeState::Consumed {
            return Err(Error::TapeState("backward already ran on this tape"));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::TapeState("backward before forward: loss node not recorded"));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", format!("loss must be scalar, got {:?}", self.shape(loss))));
        }
        if !self.scalar(loss).is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        self.state = TapeState::Consumed;

        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Param) {
                grads[idx] = Some(gy);
                continue;
            }
            self.backprop_node(idx, &gy, &mut grads);
        }

        let mut entries = Vec::with_capacity(self.param_nodes.len());
        for (&pid, &v) in &self.param_nodes {
            if let Some(g) = grads.get_mut(v.0).and_then(Option::take) {
                entries.push((pid, g));
            }
        }
        Ok(Gradients::from_entries(entries))
    }

    fn grad_slot<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut Vec<T>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let n = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n]))
    }

    fn backprop_node(&self, idx: usize, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        let y = self.value(Var(idx));
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::Add(a, b) => {
                if let Some(g) = self.grad_slot(grads, *a) {
                    g.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
                if let Some(g) = self.grad_slot(grads, *b) {
                    g.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
            }
            Op::Sub(a, b) => {
                if let Some(g) = self.grad_slot(grads, *a) {
                    g.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
                if let Some(g) = self.grad_slot(grads, *b) {
                    g.iter_mut().zip(gy).for_each(|(g, &d)| *g -= d);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(g) = self.grad_slot(grads, *a) {
                    for k in 0..g.len() {
                        g[k] += gy[k] * bv[k];
                    }
                }
                if let Some(g) = self.grad_slot(grads, *b) {
                    for k in 0..g.len() {
                        g[k] += gy[k] * av[k];
                    }
                }
            }
            Op::MulConst(x, m) => {
                if let Some(g) = self.grad_slot(grads, *x) {
                    for k in 0..g.len() {
                        g[k] += gy[k] * m[k];
                    }
                }
            }
            Op::Scale(x, s) => {
                if let Some(g) = self.grad_slot(grads, *x) {
                    g.iter_mut().zip(gy).for_each(|(g, &d)| *g += d * *s);
                }
            }
            Op::Abs(x) => {
                let xv = self.value(*x);
                if let Some(g) = self.grad_slot(grads, *x) {
                    for k in 0..g.len() {
                        let s = if xv[k] > T::zero() {
                            T::one()
                        } else if xv[k] < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        };
                        g[k] += gy[k] * s;
                    }
                }
            }
            Op::Tanh(x) => {
                if let Some(g) = self.grad_slot(grads, *x) {
                    for k in 0..g.len() {
                        g[k] += gy[k] * (T::one() - y[k] * y[k]);
                    }
                }
            }
            Op::Sigmoid(x) => {
                if let Some(g) = self.grad_slot(grads, *x) {
                    for k in 0..g.len() {
                        g[k] += gy[k] * y[k] * (T::one() - y[k]);
                    }
                }
            }
            Op::Linear { x, w, b, rows } => {
                let (m, n) = (self.shape(*w)[0], self.shape(*w)[1]);
                let (xv, wv) = (self.value(*x), self.value(*w));
                if let Some(g) = self.grad_slot(grads, *x) {
                    for r in 0..*rows {
                        for i in 0..m {
                            let d = gy[r * m + i];
                            if d == T::zero() {
                                continue;
                            }
                            for (gj, &wj) in g[r * n..(r + 1) * n].iter_mut().zip(&wv[i * n..(i + 1) * n]) {
                                *gj += d * wj;
                            }
                        }
                    }
                }
                if let Some(g) = self.grad_slot(grads, *w) {
                    for r in 0..*rows {
                        let xr = &xv[r * n..(r + 1) * n];
                        for i in 0..m {
                            let d = gy[r * m + i];
                            if d == T::zero() {
                                continue;
                            }
                            for (gj, &xj) in g[i * n..(i + 1) * n].iter_mut().zip(xr) {
                                *gj += d * xj;
                            }
                        }
                    }
                }
                if let Some(b) = b {
                    if let Some(g) = self.grad_slot(grads, *b) {
                        for r in 0..*rows {
                            for i in 0..m {
                                g[i] += gy[r * m + i];
                            }
                        }
                    }
                }
            }
            Op::MatVec { a, x } => {
                let (t, m) = (self.shape(*a)[0], self.shape(*a)[1]);
                let (av, xv) = (self.value(*a), self.value(*x));
                if let Some(g) = self.grad_slot(grads, *a) {
                    for r in 0..t {
                        for k in 0..m {
                            g[r * m + k] += gy[r] * xv[k];
                        }
                    }
                }
                if let Some(g) = self.grad_slot(grads, *x) {
                    for r in 0..t {
                        for k in 0..m {
                            g[k] += gy[r] * av[r * m + k];
                        }
                    }
                }
            }
            Op::VecMat { x, a } => {
                let (t, m) = (self.shape(*a)[0], self.shape(*a)[1]);
                let (av, xv) = (self.value(*a), self.value(*x));
                if let Some(g) = self.grad_slot(grads, *x) {
                    for r in 0..t {
                        let mut s = T::zero();
                        for k in 0..m {
                            s += gy[k] * av[r * m + k];
                        }
                        g[r] += s;
                    }
                }
                if let Some(g) = self.grad_slot(grads, *a) {
                    for r in 0..t {
                        for k in 0..m {
                            g[r * m + k] += xv[r] * gy[k];
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if let Some(g) = self.grad_slot(grads, p) {
                        g.iter_mut().zip(&gy[off..off + n]).for_each(|(g, &d)| *g += d);
                    }
                    off += n;
                }
            }
            Op::Slice { x, start } => {
                if let Some(g) = self.grad_slot(grads, *x) {
                    g[*start..*start + gy.len()].iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
            }
            Op::StackRows(rows) => {
                let d = node.shape[1];
                for (r, &row) in rows.iter().enumerate() {
                    if let Some(g) = self.grad_slot(grads, row) {
                        g.iter_mut().zip(&gy[r * d..(r + 1) * d]).for_each(|(g, &v)| *g += v);
                    }
                }
            }
            Op::GatherRow { table, row } => {
                let d = gy.len();
                if let Some(g) = self.grad_slot(grads, *table) {
                    g[row * d..(row + 1) * d].iter_mut().zip(gy).for_each(|(g, &v)| *g += v);
                }
            }
            Op::MaxOverTime { x, argmax } => {
                let d = argmax.len();
                if let Some(g) = self.grad_slot(grads, *x) {
                    for (c, &r) in argmax.iter().enumerate() {
                        g[r * d + c] += gy[c];
                    }
                }
            }
            Op::Softmax(x) => {
                let dot: T = y.iter().zip(gy).map(|(&p, &d)| p * d).sum();
                if let Some(g) = self.grad_slot(grads, *x) {
                    for k in 0..g.len() {
                        g[k] += y[k] * (gy[k] - dot);
                    }
                }
            }
            Op::CrossEntropy { probs, target } => {
                let p = self.value(*probs)[*target];
                if p > T::lit(LOG_FLOOR) {
                    if let Some(g) = self.grad_slot(grads, *probs) {
                        g[*target] += -gy[0] / p;
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(g) = self.grad_slot(grads, *x) {
                    g.iter_mut().for_each(|g| *g += gy[0]);
                }
            }
            Op::SumAll(xs) => {
                for &x in xs {
                    if let Some(g) = self.grad_slot(grads, x) {
                        g[0] += gy[0];
                    }
                }
            }
            Op::LstmCell { x, h, c, w_ih, w_hh, b, gates, tanh_c } => {
                let hs = tanh_c.len();
                let ds = self.value(*x).len();
                let cv = self.value(*c);
                let mut dpre = vec![T::zero(); 4 * hs];
                let mut dc_prev = vec![T::zero(); hs];
                for j in 0..hs {
                    let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
                    let dh = gy[j];
                    let dc = gy[hs + j] + dh * o * (T::one() - tanh_c[j] * tanh_c[j]);
                    let d_o = dh * tanh_c[j];
                    let d_i = dc * g;
                    let d_g = dc * i;
                    let d_f = dc * cv[j];
                    dc_prev[j] = dc * f;
                    dpre[j] = d_i * i * (T::one() - i);
                    dpre[hs + j] = d_f * f * (T::one() - f);
                    dpre[2 * hs + j] = d_g * (T::one() - g * g);
                    dpre[3 * hs + j] = d_o * o * (T::one() - o);
                }
                if let Some(gc) = self.grad_slot(grads, *c) {
                    gc.iter_mut().zip(&dc_prev).for_each(|(g, &d)| *g += d);
                }
                if let Some(gb) = self.grad_slot(grads, *b) {
                    gb.iter_mut().zip(&dpre).for_each(|(g, &d)| *g += d);
                }
                let (xv, hv) = (self.value(*x), self.value(*h));
                let (wi, wh) = (self.value(*w_ih), self.value(*w_hh));
                if let Some(gw) = self.grad_slot(grads, *w_ih) {
                    for (r, &d) in dpre.iter().enumerate() {
                        for (g, &xx) in gw[r * ds..(r + 1) * ds].iter_mut().zip(xv) {
                            *g += d * xx;
                        }
                    }
                }
                if let Some(gw) = self.grad_slot(grads, *w_hh) {
                    for (r, &d) in dpre.iter().enumerate() {
                        for (g, &hh) in gw[r * hs..(r + 1) * hs].iter_mut().zip(hv) {
                            *g += d * hh;
                        }
                    }
                }
                if let Some(gx) = self.grad_slot(grads, *x) {
                    for (r, &d) in dpre.iter().enumerate() {
                        for (g, &w) in gx.iter_mut().zip(&wi[r * ds..(r + 1) * ds]) {
                            *g += d * w;
                        }
                    }
                }
                if let Some(gh) = self.grad_slot(grads, *h) {
                    for (r, &d) in dpre.iter().enumerate() {
                        for (g, &w) in gh.iter_mut().zip(&wh[r * hs..(r + 1) * hs]) {
                            *g += d * w;
                        }
                    }
                }
            }
        }
    }
}

/// Max-subtracted softmax with optional mask; masked entries are exactly zero.
pub(crate) fn softmax_values<T: Real>(v: &[T], mask: Option<&[bool]>) -> Result<Vec<T>> {
    if let Some(m) = mask {
        if m.len() != v.len() {
            return Err(Error::shape("softmax", format!("mask {} vs logits {}", m.len(), v.len())));
        }
    }
    let live = |k: usize| mask.is_none_or(|m| m[k]);
    if v.iter().enumerate().any(|(k, x)| live(k) && x.is_nan()) {
        return Ok(vec![T::nan(); v.len()]);
    }
    let mut max = T::neg_infinity();
    for (k, &x) in v.iter().enumerate() {
        if live(k) && x > max {
            max = x;
        }
    }
    if max == T::neg_infinity() {
        return Err(if v.is_empty() { Error::EmptySequence("softmax") } else { Error::AllMasked });
    }
    let mut out: Vec<T> =
        v.iter().enumerate().map(|(k, &x)| if live(k) { (x - max).exp() } else { T::zero() }).collect();
    let z: T = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p = *p / z);
    Ok(out)
}
