//! Reverse-mode differentiation over a linear tape of matrix operations.
//!
//! Every operation appends one node holding its forward value. `backward`
//! walks the nodes in exact reverse order of recording and accumulates
//! vector-Jacobian products; parameter leaves hand their gradients back as a
//! [`ParamGrads`]. Values and constants may be borrowed, so a tape over a large
//! parameter store does not copy any weights.

use std::borrow::Cow;
use std::collections::HashMap;

use super::matrix::{matmul_at_into, matmul_bt_into, sigmoid, Matrix};
use super::params::{ParamGrads, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Logit assigned to masked positions before normalisation.
pub const MASK_LOGIT: f64 = -1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// matrix + column vector broadcast over columns
    AddCol(Var, Var),
    /// matrix * column vector broadcast over columns
    MulCol(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    /// Softmax down each column (`by_rows == false`) or along each row.
    Softmax {
        input: Var,
        by_rows: bool,
    },
    VConcat(Vec<Var>),
    HConcat(Vec<Var>),
    SliceRows {
        input: Var,
        start: usize,
    },
    /// Flat-index gather; `None` slots are filled with a constant and get no gradient.
    Gather {
        input: Var,
        index: Vec<Option<usize>>,
    },
    /// Column `i` of the output is row `ids[i]` of the table.
    Lookup {
        table: Var,
        ids: Vec<usize>,
    },
    Sum(Var),
    SumAt {
        input: Var,
        index: Vec<usize>,
    },
    /// `J x 1` vector spread into a `J x K` matrix, entry j placed in column `groups[j]`.
    Spread {
        input: Var,
        groups: Vec<usize>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddCol(..) => "add_col",
            Op::MulCol(..) => "mul_col",
            Op::Scale(..) => "scale",
            Op::OneMinus(_) => "one_minus",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Softmax { .. } => "softmax",
            Op::VConcat(_) => "vconcat",
            Op::HConcat(_) => "hconcat",
            Op::SliceRows { .. } => "slice_rows",
            Op::Gather { .. } => "gather",
            Op::Lookup { .. } => "lookup",
            Op::Sum(_) => "sum",
            Op::SumAt { .. } => "sum_at",
            Op::Spread { .. } => "spread",
        }
    }
}

struct Node<'a> {
    value: Cow<'a, Matrix>,
    op: Op,
}

/// Single-owner recording of a forward computation.
pub struct Tape<'a> {
    store: Option<&'a ParamStore>,
    nodes: Vec<Node<'a>>,
    param_vars: HashMap<ParamId, Var>,
    failure: Option<String>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Tape<'a> {
    /// A tape without parameters (constants only).
    pub fn new() -> Self {
        Tape {
            store: None,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
            failure: None,
        }
    }

    pub fn with_params(store: &'a ParamStore) -> Self {
        Tape {
            store: Some(store),
            ..Tape::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    /// Name of the first operation that produced a non-finite value, if any.
    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    pub fn check_finite(&self) -> Result<()> {
        match &self.failure {
            Some(op) => Err(Error::Numeric(format!("non-finite value produced by {op}"))),
            None => Ok(()),
        }
    }

    fn push(&mut self, value: Cow<'a, Matrix>, op: Op) -> Var {
        if self.failure.is_none() && !value.is_finite() {
            self.failure = Some(op.name().to_string());
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Cow::Owned(m), Op::Leaf)
    }

    pub fn borrowed(&mut self, m: &'a Matrix) -> Var {
        self.push(Cow::Borrowed(m), Op::Leaf)
    }

    /// Leaf for a stored parameter; repeated calls return the same variable.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let store = self.store.expect("tape has no parameter store");
        let v = self.push(Cow::Borrowed(store.value(id)), Op::Param(id));
        self.param_vars.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Cow::Owned(out), Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(Cow::Owned(out), Op::Transpose(a))
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        op: Op,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), name, f)?;
        Ok(self.push(Cow::Owned(out), op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Div(a, b), "div", |x, y| x / y)
    }

    fn col_broadcast(&mut self, m: Var, v: Var, name: &'static str) -> Result<()> {
        let (mr, _) = self.shape(m);
        let vs = self.shape(v);
        if vs != (mr, 1) {
            return Err(Error::dim(name, self.shape(m), vs));
        }
        Ok(())
    }

    /// Adds column vector `v` to every column of `m`.
    pub fn add_col(&mut self, m: Var, v: Var) -> Result<Var> {
        self.col_broadcast(m, v, "add_col")?;
        let mut out = self.value(m).clone();
        let cols = out.cols();
        let vd = self.value(v).data().to_vec();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x += vd[i / cols];
        }
        Ok(self.push(Cow::Owned(out), Op::AddCol(m, v)))
    }

    /// Multiplies every column of `m` elementwise by column vector `v`.
    pub fn mul_col(&mut self, m: Var, v: Var) -> Result<Var> {
        self.col_broadcast(m, v, "mul_col")?;
        let mut out = self.value(m).clone();
        let cols = out.cols();
        let vd = self.value(v).data().to_vec();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x *= vd[i / cols];
        }
        Ok(self.push(Cow::Owned(out), Op::MulCol(m, v)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(Cow::Owned(out), Op::Scale(a, factor))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 1.0 - x);
        self.push(Cow::Owned(out), Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(Cow::Owned(out), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(Cow::Owned(out), Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(Cow::Owned(out), Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(Cow::Owned(out), Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::ln);
        self.push(Cow::Owned(out), Op::Log(a))
    }

    /// Column-wise softmax. Entries where `mask` is `false` get [`MASK_LOGIT`].
    pub fn softmax(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        self.softmax_impl(a, mask, false)
    }

    /// Row-wise softmax with the same masking rule.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        self.softmax_impl(a, mask, true)
    }

    fn softmax_impl(&mut self, a: Var, mask: Option<&[bool]>, by_rows: bool) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::Domain("softmax of an empty vector".into()));
        }
        if let Some(m) = mask {
            if m.len() != x.len() {
                return Err(Error::dim("softmax mask", x.shape(), (m.len(), 1)));
            }
        }
        let (rows, cols) = x.shape();
        let mut logits = x.data().to_vec();
        if let Some(m) = mask {
            for (l, &keep) in logits.iter_mut().zip(m) {
                if !keep {
                    *l = MASK_LOGIT;
                }
            }
        }
        let mut out = vec![0.0; logits.len()];
        let (groups, len, stride_in, stride_group) = if by_rows {
            (rows, cols, 1, cols)
        } else {
            (cols, rows, cols, 1)
        };
        for g in 0..groups {
            let idx = |i: usize| g * stride_group + i * stride_in;
            let max = (0..len)
                .map(|i| logits[idx(i)])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for i in 0..len {
                let e = (logits[idx(i)] - max).exp();
                out[idx(i)] = e;
                total += e;
            }
            for i in 0..len {
                out[idx(i)] /= total;
            }
        }
        let out = Matrix::from_vec(rows, cols, out)?;
        Ok(self.push(Cow::Owned(out), Op::Softmax { input: a, by_rows }))
    }

    /// Stacks matrices vertically (same column count).
    pub fn vconcat(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            if m.cols() != cols {
                return Err(Error::dim("vconcat", self.shape(parts[0]), m.shape()));
            }
            rows += m.rows();
            data.extend_from_slice(m.data());
        }
        let out = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(Cow::Owned(out), Op::VConcat(parts.to_vec())))
    }

    /// Stacks matrices horizontally (same row count).
    pub fn hconcat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        let mut total_cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::dim("hconcat", self.shape(parts[0]), s));
            }
            total_cols += s.1;
        }
        let mut out = Matrix::zeros(rows, total_cols);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            for r in 0..rows {
                for c in 0..m.cols() {
                    out.set(r, offset + c, m.get(r, c));
                }
            }
            offset += m.cols();
        }
        Ok(self.push(Cow::Owned(out), Op::HConcat(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let m = self.value(a);
        if start + len > m.rows() {
            return Err(Error::dim("slice_rows", m.shape(), (start + len, m.cols())));
        }
        let cols = m.cols();
        let data = m.data()[start * cols..(start + len) * cols].to_vec();
        let out = Matrix::from_vec(len, cols, data)?;
        Ok(self.push(Cow::Owned(out), Op::SliceRows { input: a, start }))
    }

    /// Output of shape `rows x cols` with `out[i] = a[index[i]]` (flat indices) or `fill`.
    pub fn gather(
        &mut self,
        a: Var,
        index: Vec<Option<usize>>,
        rows: usize,
        cols: usize,
        fill: f64,
    ) -> Result<Var> {
        let m = self.value(a);
        if index.len() != rows * cols {
            return Err(Error::dim("gather", (rows, cols), (index.len(), 1)));
        }
        let mut data = Vec::with_capacity(index.len());
        for ix in &index {
            match ix {
                Some(i) if *i < m.len() => data.push(m.data()[*i]),
                Some(i) => return Err(Error::dim("gather", m.shape(), (*i, 0))),
                None => data.push(fill),
            }
        }
        let out = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(Cow::Owned(out), Op::Gather { input: a, index }))
    }

    /// Embedding lookup: column `i` of the result is row `ids[i]` of `table`.
    pub fn lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let dim = t.cols();
        let mut out = Matrix::zeros(dim, ids.len());
        for (c, &id) in ids.iter().enumerate() {
            if id >= t.rows() {
                return Err(Error::dim("lookup", t.shape(), (id, dim)));
            }
            for (r, &v) in t.row(id).iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok(self.push(
            Cow::Owned(out),
            Op::Lookup {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Cow::Owned(Matrix::scalar(s)), Op::Sum(a))
    }

    /// Scalar sum of the entries at the given flat indices.
    pub fn sum_at(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let m = self.value(a);
        let mut s = 0.0;
        for &i in index {
            if i >= m.len() {
                return Err(Error::dim("sum_at", m.shape(), (i, 0)));
            }
            s += m.data()[i];
        }
        Ok(self.push(
            Cow::Owned(Matrix::scalar(s)),
            Op::SumAt {
                input: a,
                index: index.to_vec(),
            },
        ))
    }

    /// Single entry as a `1 x 1` scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        self.sum_at(a, &[index])
    }

    /// Spreads a `J x 1` vector into `J x groups_count`, entry j in column `groups[j]`.
    pub fn spread(&mut self, a: Var, groups: &[usize], groups_count: usize) -> Result<Var> {
        let m = self.value(a);
        if m.shape() != (groups.len(), 1) {
            return Err(Error::dim("spread", m.shape(), (groups.len(), 1)));
        }
        let mut out = Matrix::zeros(groups.len(), groups_count);
        for (j, &k) in groups.iter().enumerate() {
            out.set(j, k, m.data()[j]);
        }
        Ok(self.push(
            Cow::Owned(out),
            Op::Spread {
                input: a,
                groups: groups.to_vec(),
            },
        ))
    }

    /// Reverse pass from a scalar output. Returns gradients of every parameter leaf.
    pub fn backward(&self, output: Var) -> Result<ParamGrads> {
        Ok(self.backward_all(output)?.0)
    }

    /// Reverse pass returning parameter gradients and the per-node adjoints.
    pub fn backward_all(&self, output: Var) -> Result<(ParamGrads, Vec<Option<Matrix>>)> {
        if self.shape(output) != (1, 1) {
            return Err(Error::Usage(format!(
                "backward needs a scalar output, got {:?}",
                self.shape(output)
            )));
        }
        self.check_finite()?;
        let n = output.0 + 1;
        let mut grads: Vec<Option<Matrix>> = vec![None; n];
        grads[output.0] = Some(Matrix::scalar(1.0));
        let mut param_grads = ParamGrads::new(self.store.map_or(0, ParamStore::len));

        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let y = node.value.as_ref();
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => param_grads.add(*id, &g),
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let (m, k) = av.shape();
                    let ncols = bv.cols();
                    {
                        let ga = slot(&mut grads, *a, m, k);
                        matmul_bt_into(ga.data_mut(), g.data(), bv.data(), m, ncols, k);
                    }
                    let gb = slot(&mut grads, *b, k, ncols);
                    matmul_at_into(gb.data_mut(), av.data(), g.data(), m, k, ncols);
                }
                Op::Transpose(a) => add_to(&mut grads, *a, &g.transpose()),
                Op::Add(a, b) => {
                    add_to(&mut grads, *a, &g);
                    add_to(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    add_to(&mut grads, *a, &g);
                    add_to(&mut grads, *b, &g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    let ga = zip(&g, self.value(*b), |gv, bv| gv * bv);
                    let gb = zip(&g, self.value(*a), |gv, av| gv * av);
                    add_to(&mut grads, *a, &ga);
                    add_to(&mut grads, *b, &gb);
                }
                Op::Div(a, b) => {
                    let bv = self.value(*b);
                    let ga = zip(&g, bv, |gv, bv| gv / bv);
                    let gb = zip(&zip(&g, y, |gv, yv| gv * yv), bv, |t, bv| -t / bv);
                    add_to(&mut grads, *a, &ga);
                    add_to(&mut grads, *b, &gb);
                }
                Op::AddCol(m, v) => {
                    add_to(&mut grads, *m, &g);
                    let cols = g.cols();
                    let gv: Vec<f64> = (0..g.rows()).map(|r| g.row(r).iter().sum()).collect();
                    debug_assert_eq!(cols * gv.len(), g.len());
                    add_to(&mut grads, *v, &Matrix::column(gv));
                }
                Op::MulCol(m, v) => {
                    let mv = self.value(*m);
                    let vv = self.value(*v);
                    let cols = g.cols();
                    let mut gm = g.clone();
                    let mut gvec = vec![0.0; vv.rows()];
                    for (idx, x) in gm.data_mut().iter_mut().enumerate() {
                        let r = idx / cols;
                        gvec[r] += *x * mv.data()[idx];
                        *x *= vv.data()[r];
                    }
                    add_to(&mut grads, *m, &gm);
                    add_to(&mut grads, *v, &Matrix::column(gvec));
                }
                Op::Scale(a, f) => add_to(&mut grads, *a, &g.map(|v| v * f)),
                Op::OneMinus(a) => add_to(&mut grads, *a, &g.map(|v| -v)),
                Op::Sigmoid(a) => {
                    add_to(&mut grads, *a, &zip(&g, y, |gv, yv| gv * yv * (1.0 - yv)))
                }
                Op::Tanh(a) => add_to(&mut grads, *a, &zip(&g, y, |gv, yv| gv * (1.0 - yv * yv))),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    add_to(
                        &mut grads,
                        *a,
                        &zip(&g, x, |gv, xv| if xv > 0.0 { gv } else { 0.0 }),
                    );
                }
                Op::Exp(a) => add_to(&mut grads, *a, &zip(&g, y, |gv, yv| gv * yv)),
                Op::Log(a) => {
                    let x = self.value(*a);
                    add_to(&mut grads, *a, &zip(&g, x, |gv, xv| gv / xv));
                }
                Op::Softmax { input, by_rows } => {
                    let (rows, cols) = y.shape();
                    let mut gx = Matrix::zeros(rows, cols);
                    let (groups, len, stride_in, stride_group) = if *by_rows {
                        (rows, cols, 1, cols)
                    } else {
                        (cols, rows, cols, 1)
                    };
                    let yd = y.data();
                    let gd = g.data();
                    for grp in 0..groups {
                        let idx = |i: usize| grp * stride_group + i * stride_in;
                        let dot: f64 = (0..len).map(|i| yd[idx(i)] * gd[idx(i)]).sum();
                        for i in 0..len {
                            gx.data_mut()[idx(i)] = yd[idx(i)] * (gd[idx(i)] - dot);
                        }
                    }
                    add_to(&mut grads, *input, &gx);
                }
                Op::VConcat(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = self.shape(p);
                        let piece = Matrix::from_vec(
                            r,
                            c,
                            g.data()[offset * cols..(offset + r) * cols].to_vec(),
                        )?;
                        add_to(&mut grads, p, &piece);
                        offset += r;
                    }
                }
                Op::HConcat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = self.shape(p);
                        let mut piece = Matrix::zeros(r, c);
                        for rr in 0..r {
                            for cc in 0..c {
                                piece.set(rr, cc, g.get(rr, offset + cc));
                            }
                        }
                        add_to(&mut grads, p, &piece);
                        offset += c;
                    }
                }
                Op::SliceRows { input, start } => {
                    let (r, c) = self.shape(*input);
                    let gi = slot(&mut grads, *input, r, c);
                    let dst = &mut gi.data_mut()[start * c..start * c + g.len()];
                    for (d, s) in dst.iter_mut().zip(g.data()) {
                        *d += s;
                    }
                }
                Op::Gather { input, index } => {
                    let (r, c) = self.shape(*input);
                    let gi = slot(&mut grads, *input, r, c);
                    for (o, ix) in index.iter().enumerate() {
                        if let Some(i) = ix {
                            gi.data_mut()[*i] += g.data()[o];
                        }
                    }
                }
                Op::Lookup { table, ids } => {
                    let (r, c) = self.shape(*table);
                    let gt = slot(&mut grads, *table, r, c);
                    for (col, &id) in ids.iter().enumerate() {
                        for d in 0..c {
                            gt.data_mut()[id * c + d] += g.get(d, col);
                        }
                    }
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    add_to(&mut grads, *a, &Matrix::filled(r, c, g.data()[0]));
                }
                Op::SumAt { input, index } => {
                    let (r, c) = self.shape(*input);
                    let gi = slot(&mut grads, *input, r, c);
                    for &ix in index {
                        gi.data_mut()[ix] += g.data()[0];
                    }
                }
                Op::Spread { input, groups } => {
                    let gv: Vec<f64> = groups
                        .iter()
                        .enumerate()
                        .map(|(j, &k)| g.get(j, k))
                        .collect();
                    add_to(&mut grads, *input, &Matrix::column(gv));
                }
            }
            // adjoint kept for inspection
            grads[i] = Some(g);
        }
        Ok((param_grads, grads))
    }
}

fn slot(grads: &mut [Option<Matrix>], v: Var, rows: usize, cols: usize) -> &mut Matrix {
    grads[v.0].get_or_insert_with(|| Matrix::zeros(rows, cols))
}

fn add_to(grads: &mut [Option<Matrix>], v: Var, g: &Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(g),
        s => *s = Some(g.clone()),
    }
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    a.zip_map(b, "backward", f)
        .expect("backward shapes agree with forward")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let mut store = ParamStore::new();
        let x = store.add("x", Matrix::scalar(3.0)).unwrap();
        let mut t = Tape::with_params(&store);
        let xv = t.param(x);
        let y = t.mul(xv, xv).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().data()[0], 6.0);
    }

    #[test]
    fn non_scalar_backward_is_usage_error() {
        let mut t = Tape::new();
        let v = t.constant(Matrix::zeros(2, 1));
        assert!(matches!(t.backward(v), Err(Error::Usage(_))));
    }

    #[test]
    fn non_finite_values_are_reported() {
        let mut t = Tape::new();
        let v = t.constant(Matrix::scalar(0.0));
        let l = t.log(v);
        assert!(matches!(t.check_finite(), Err(Error::Numeric(_))));
        assert!(t.backward(l).is_err());
    }

    #[test]
    fn masked_softmax_gives_exact_zero() {
        let mut t = Tape::new();
        let v = t.constant(Matrix::column(vec![1.0, 2.0, 3.0]));
        let p = t.softmax(v, Some(&[true, false, true])).unwrap();
        assert_eq!(t.value(p).data()[1], 0.0);
        assert!((t.value(p).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backward_visits_in_reverse_order() {
        // (a * b) + a, reused operand accumulates both paths
        let mut store = ParamStore::new();
        let a = store.add("a", Matrix::scalar(2.0)).unwrap();
        let b = store.add("b", Matrix::scalar(5.0)).unwrap();
        let mut t = Tape::with_params(&store);
        let av = t.param(a);
        let bv = t.param(b);
        let p = t.mul(av, bv).unwrap();
        let s = t.add(p, av).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(a).unwrap().data()[0], 6.0);
        assert_eq!(g.get(b).unwrap().data()[0], 2.0);
    }
}
