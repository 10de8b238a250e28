use super::conv;
use super::gru::{self, GruCache};
use super::tensor::{check_shape, ParamId, ParamStore, Tensor};
use super::DiffError;

/// Handle to a value recorded on a [`Tape`].
///
/// A `Var` is only meaningful for the tape that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(super) usize);

pub(super) enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    ScaleBy(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Sin(Var),
    Softmax(Var),
    Sum(Var),
    Mean(Var),
    Variance(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Reverse { input: Var, axis: usize },
    Narrow { input: Var, axis: usize, start: usize },
    Reshape(Var),
    Conv1dSame(Var, Var),
    Ccc(Var, Var),
    CrossCcc { x: Var, y: Var, lags: Vec<usize> },
    Gru(Box<GruCache>),
}

pub(super) struct Node {
    pub(super) shape: Vec<usize>,
    pub(super) value: Vec<f64>,
    pub(super) op: Op,
}

/// Linear record of primitive operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every operation's inputs
/// precede it and a single reverse sweep visits each node once.
#[derive(Default)]
pub struct Tape {
    pub(super) nodes: Vec<Node>,
}

/// Adjoints of every node reachable from a loss.
pub struct Gradients {
    adjoints: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros if `v` does not
    /// influence the loss.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.adjoints.get(v.0).and_then(|a| a.as_deref())
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> DiffError {
    DiffError::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(super) fn sigmoid_f64(x: f64) -> f64 {
    sigmoid(x)
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    var_x: f64,
    var_y: f64,
    cov: f64,
}

fn moments(x: &[f64], y: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut c) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let da = a - mean_x;
        let db = b - mean_y;
        vx += da * da;
        vy += db * db;
        c += da * db;
    }
    Moments {
        mean_x,
        mean_y,
        var_x: vx / n,
        var_y: vy / n,
        cov: c / n,
    }
}

fn ccc_value(x: &[f64], y: &[f64]) -> Result<(f64, Moments), DiffError> {
    let m = moments(x, y);
    let gap = m.mean_x - m.mean_y;
    let denom = m.var_x + m.var_y + gap * gap;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(DiffError::Degenerate("ccc of two identical constant sequences"));
    }
    Ok((2.0 * m.cov / denom, m))
}

/// Accumulates d ccc / d(x, y) scaled by `g` into `gx`, `gy`.
fn ccc_backward(x: &[f64], y: &[f64], g: f64, gx: &mut [f64], gy: &mut [f64]) {
    let m = moments(x, y);
    let gap = m.mean_x - m.mean_y;
    let denom = m.var_x + m.var_y + gap * gap;
    let ccc = 2.0 * m.cov / denom;
    let k = g * 2.0 / (x.len() as f64 * denom);
    for i in 0..x.len() {
        let dx = x[i] - m.mean_x;
        let dy = y[i] - m.mean_y;
        gx[i] += k * (dy - ccc * (dx + gap));
        gy[i] += k * (dx - ccc * (dy - gap));
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(super) fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(&n.shape, n.value.clone()).expect("tape nodes have valid shapes")
    }

    /// Records a differentiable input that is not tied to a parameter store.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.values().to_vec(), Op::Leaf)
    }

    pub fn constant(&mut self, shape: &[usize], values: Vec<f64>) -> Result<Var, DiffError> {
        check_shape(shape, values.len())?;
        Ok(self.push(shape.to_vec(), values, Op::Leaf))
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let t = store.get(id);
        self.push(t.shape().to_vec(), t.values().to_vec(), Op::Param(id))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, sa, sb));
        }
        Ok(())
    }

    fn zip_map(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, rec: Op) -> Result<Var, DiffError> {
        self.same_shape(op, a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, value, rec))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, rec: Op) -> Var {
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, rec)
    }

    /// `a [.., k] x b [k, m] -> [.., m]`; leading dims of `a` act as rows.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let k = *sa.last().unwrap();
        if sb.len() != 2 || sb[0] != k {
            return Err(mismatch("matmul", &sa, &sb));
        }
        let m = sb[1];
        let rows = self.value(a).len() / k;
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; rows * m];
        for r in 0..rows {
            let arow = &av[r * k..(r + 1) * k];
            let orow = &mut out[r * m..(r + 1) * m];
            for (p, &x) in arow.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (o, &w) in orow.iter_mut().zip(&bv[p * m..(p + 1) * m]) {
                    *o += x * w;
                }
            }
        }
        let mut shape = sa;
        *shape.last_mut().unwrap() = m;
        Ok(self.push(shape, out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_map("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_map("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_map("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_map("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// Adds `row [m]` to every row of `a [.., m]`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, DiffError> {
        let sa = self.shape(a).to_vec();
        let sr = self.shape(row).to_vec();
        let m = *sa.last().unwrap();
        if sr.iter().product::<usize>() != m {
            return Err(mismatch("add_row", &sa, &sr));
        }
        let rv = self.value(row);
        let value = self
            .value(a)
            .chunks(m)
            .flat_map(|c| c.iter().zip(rv).map(|(&x, &y)| x + y))
            .collect();
        Ok(self.push(sa, value, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x + c, Op::Offset(a))
    }

    /// Multiplies every element of `a` by the single-element node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var, DiffError> {
        if self.value(s).len() != 1 {
            return Err(mismatch("scale_by", self.shape(a), self.shape(s)));
        }
        let c = self.scalar(s);
        Ok(self.map(a, |x| x * c, Op::ScaleBy(a, s)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.map(a, f64::sin, Op::Sin(a))
    }

    /// Softmax over all elements of a vector.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let value = exps.into_iter().map(|e| e / total).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, Op::Softmax(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(vec![1], vec![s], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.push(vec![1], vec![m], Op::Mean(a))
    }

    /// Population variance (divide by n) over all elements.
    pub fn variance(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        self.push(vec![1], vec![var], Op::Variance(a))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var, DiffError> {
        let first = inputs
            .first()
            .ok_or_else(|| DiffError::InvalidArgument("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(DiffError::InvalidArgument(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(mismatch("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut value = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let d = self.shape(v)[axis];
                let src = self.value(v);
                value.extend_from_slice(&src[o * d * inner..(o + 1) * d * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        Ok(self.push(shape, value, Op::Concat { inputs: inputs.to_vec(), axis }))
    }

    /// Reverses element order along `axis` (time reversal).
    pub fn reverse(&mut self, a: Var, axis: usize) -> Result<Var, DiffError> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(DiffError::InvalidArgument(format!("reverse axis {axis} out of range for {shape:?}")));
        }
        let value = reverse_axis(self.value(a), &shape, axis);
        Ok(self.push(shape, value, Op::Reverse { input: a, axis }))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, DiffError> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(DiffError::InvalidArgument(format!(
                "narrow [{start}, {}) on axis {axis} of {shape:?}",
                start + len
            )));
        }
        let (outer, d, inner) = split_axis(&shape, axis);
        let src = self.value(a);
        let mut value = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * d * inner + start * inner;
            value.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        Ok(self.push(out_shape, value, Op::Narrow { input: a, axis, start }))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, DiffError> {
        check_shape(shape, self.value(a).len()).map_err(|_| mismatch("reshape", self.shape(a), shape))?;
        let value = self.value(a).to_vec();
        Ok(self.push(shape.to_vec(), value, Op::Reshape(a)))
    }

    /// Same-length 1-D filtering of `signal [t]` with an odd-length
    /// `kernel [k]`, zero padded by `(k - 1) / 2` on both sides.
    pub fn conv1d_same(&mut self, signal: Var, kernel: Var) -> Result<Var, DiffError> {
        let ss = self.shape(signal);
        let sk = self.shape(kernel);
        if ss.len() != 1 || sk.len() != 1 || sk[0].is_multiple_of(2) {
            return Err(mismatch("conv1d_same", ss, sk));
        }
        let value = conv::filter_same(self.value(signal), self.value(kernel));
        let shape = ss.to_vec();
        Ok(self.push(shape, value, Op::Conv1dSame(signal, kernel)))
    }

    /// Concordance correlation coefficient of two equal-length vectors,
    /// population moments.
    pub fn ccc(&mut self, x: Var, y: Var) -> Result<Var, DiffError> {
        self.same_shape("ccc", x, y)?;
        if self.value(x).len() < 2 {
            return Err(DiffError::InvalidArgument("ccc needs at least two samples".into()));
        }
        let (c, _) = ccc_value(self.value(x), self.value(y))?;
        Ok(self.push(vec![1], vec![c], Op::Ccc(x, y)))
    }

    /// Mean over `lags` (in samples) of `ccc(x[k..], y[..t - k])`.
    pub fn cross_ccc(&mut self, x: Var, y: Var, lags: &[usize]) -> Result<Var, DiffError> {
        self.same_shape("cross_ccc", x, y)?;
        let t = self.value(x).len();
        if lags.is_empty() {
            return Err(DiffError::InvalidArgument("cross_ccc with an empty lag grid".into()));
        }
        if let Some(&k) = lags.iter().find(|&&k| k + 2 > t) {
            return Err(DiffError::InvalidArgument(format!(
                "lag of {k} samples leaves fewer than two overlapping samples in a sequence of {t}"
            )));
        }
        let (xv, yv) = (self.value(x), self.value(y));
        let mut total = 0.0;
        for &k in lags {
            total += ccc_value(&xv[k..], &yv[..t - k])?.0;
        }
        let value = total / lags.len() as f64;
        Ok(self.push(vec![1], vec![value], Op::CrossCcc { x, y, lags: lags.to_vec() }))
    }

    /// Adjoints of every node with respect to the scalar `loss`.
    pub fn gradients(&self, loss: Var) -> Result<Gradients, DiffError> {
        let shape = self.shape(loss);
        if self.value(loss).len() != 1 {
            return Err(DiffError::NonScalarLoss(shape.to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        adj.resize_with(loss.0 + 1, || None);
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            self.propagate(idx, &g, &mut adj);
            adj[idx] = Some(g);
        }
        Ok(Gradients { adjoints: adj })
    }

    /// Accumulates d loss / d param into every parameter of `store` that
    /// was read onto this tape. Calling twice adds twice.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<(), DiffError> {
        let grads = self.gradients(loss)?;
        let tensors = store.tensors_mut();
        for (i, node) in self.nodes.iter().enumerate().take(loss.0 + 1) {
            if let Op::Param(id) = node.op {
                if let Some(g) = grads.adjoints[i].as_deref() {
                    tensors[id.0].accumulate_grad(g);
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let sb = self.shape(*b);
                let (k, m) = (sb[0], sb[1]);
                let rows = av.len() / k;
                let mut ga = vec![0.0; av.len()];
                let mut gb = vec![0.0; bv.len()];
                for r in 0..rows {
                    let grow = &g[r * m..(r + 1) * m];
                    let arow = &av[r * k..(r + 1) * k];
                    for p in 0..k {
                        let brow = &bv[p * m..(p + 1) * m];
                        ga[r * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        let x = arow[p];
                        if x != 0.0 {
                            for (o, &gv) in gb[p * m..(p + 1) * m].iter_mut().zip(grow) {
                                *o += x * gv;
                            }
                        }
                    }
                }
                accumulate(adj, *a, ga);
                accumulate(adj, *b, gb);
            }
            Op::Add(a, b) => {
                accumulate(adj, *a, g.to_vec());
                accumulate(adj, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                accumulate(adj, *a, g.to_vec());
                accumulate(adj, *b, g.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(adj, *a, g.iter().zip(bv).map(|(g, y)| g * y).collect());
                accumulate(adj, *b, g.iter().zip(av).map(|(g, x)| g * x).collect());
            }
            Op::Div(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(adj, *a, g.iter().zip(bv).map(|(g, y)| g / y).collect());
                let gb = g.iter().zip(av.iter().zip(bv)).map(|(g, (x, y))| -g * x / (y * y)).collect();
                accumulate(adj, *b, gb);
            }
            Op::AddRow(a, row) => {
                accumulate(adj, *a, g.to_vec());
                let m = self.value(*row).len();
                let mut gr = vec![0.0; m];
                for chunk in g.chunks(m) {
                    for (o, v) in gr.iter_mut().zip(chunk) {
                        *o += v;
                    }
                }
                accumulate(adj, *row, gr);
            }
            Op::Scale(a, c) => accumulate(adj, *a, g.iter().map(|x| x * c).collect()),
            Op::Offset(a) => accumulate(adj, *a, g.to_vec()),
            Op::ScaleBy(a, s) => {
                let c = self.scalar(*s);
                accumulate(adj, *a, g.iter().map(|x| x * c).collect());
                let ds = g.iter().zip(self.value(*a)).map(|(g, x)| g * x).sum();
                accumulate(adj, *s, vec![ds]);
            }
            Op::Tanh(a) => {
                let y = &node.value;
                accumulate(adj, *a, g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect());
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                accumulate(adj, *a, g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect());
            }
            Op::Sin(a) => {
                let x = self.value(*a);
                accumulate(adj, *a, g.iter().zip(x).map(|(g, x)| g * x.cos()).collect());
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
                accumulate(adj, *a, g.iter().zip(y).map(|(g, y)| y * (g - dot)).collect());
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                accumulate(adj, *a, vec![g[0]; n]);
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                accumulate(adj, *a, vec![g[0] / n as f64; n]);
            }
            Op::Variance(a) => {
                let x = self.value(*a);
                let n = x.len() as f64;
                let m = x.iter().sum::<f64>() / n;
                accumulate(adj, *a, x.iter().map(|v| g[0] * 2.0 * (v - m) / n).collect());
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_axis(&node.shape, *axis);
                let mut offset = 0;
                for &v in inputs {
                    let d = self.shape(v)[*axis];
                    let mut gv = Vec::with_capacity(outer * d * inner);
                    for o in 0..outer {
                        let base = o * total * inner + offset * inner;
                        gv.extend_from_slice(&g[base..base + d * inner]);
                    }
                    accumulate(adj, v, gv);
                    offset += d;
                }
            }
            Op::Reverse { input, axis } => {
                accumulate(adj, *input, reverse_axis(g, &node.shape, *axis));
            }
            Op::Narrow { input, axis, start } => {
                let in_shape = self.shape(*input);
                let (outer, d, inner) = split_axis(in_shape, *axis);
                let len = node.shape[*axis];
                let mut gi = vec![0.0; outer * d * inner];
                for o in 0..outer {
                    let base = o * d * inner + start * inner;
                    gi[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                accumulate(adj, *input, gi);
            }
            Op::Reshape(a) => accumulate(adj, *a, g.to_vec()),
            Op::Conv1dSame(s, k) => {
                let (ds, dk) = conv::filter_same_backward(self.value(*s), self.value(*k), g);
                accumulate(adj, *s, ds);
                accumulate(adj, *k, dk);
            }
            Op::Ccc(x, y) => {
                let (xv, yv) = (self.value(*x), self.value(*y));
                let mut gx = vec![0.0; xv.len()];
                let mut gy = vec![0.0; yv.len()];
                ccc_backward(xv, yv, g[0], &mut gx, &mut gy);
                accumulate(adj, *x, gx);
                accumulate(adj, *y, gy);
            }
            Op::CrossCcc { x, y, lags } => {
                let (xv, yv) = (self.value(*x), self.value(*y));
                let t = xv.len();
                let w = g[0] / lags.len() as f64;
                let mut gx = vec![0.0; t];
                let mut gy = vec![0.0; t];
                for &k in lags {
                    ccc_backward(&xv[k..], &yv[..t - k], w, &mut gx[k..], &mut gy[..t - k]);
                }
                accumulate(adj, *x, gx);
                accumulate(adj, *y, gy);
            }
            Op::Gru(cache) => gru::backward(self, cache, g, adj),
        }
    }
}

pub(super) fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut adj[v.0] {
        Some(existing) => {
            for (a, b) in existing.iter_mut().zip(&g) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn reverse_axis(src: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let (outer, d, inner) = split_axis(shape, axis);
    let mut out = vec![0.0; src.len()];
    for o in 0..outer {
        for i in 0..d {
            let from = o * d * inner + i * inner;
            let to = o * d * inner + (d - 1 - i) * inner;
            out[to..to + inner].copy_from_slice(&src[from..from + inner]);
        }
    }
    out
}
