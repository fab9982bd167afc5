use super::{shape_err, NnError, Real, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    Relu { x: Var },
    MaxPoolRows { x: Var, argmax: Vec<usize> },
    GroupMaxPool { x: Var, argmax: Vec<usize> },
    GatherRows { x: Var, idx: Vec<usize> },
    ConcatCols { a: Var, b: Var },
    StackRows { parts: Vec<Var> },
    SoftmaxRows { x: Var },
    CrossEntropy { logits: Var, scale: Vec<f64>, probs: Vec<f64>, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    needs_grad: bool,
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// list is already topologically sorted.
#[derive(Debug)]
pub struct Graph<T: Real = f64> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// `out[i, :] = bias + sum_k x[i, k] * w[k, :]`; zero inputs are skipped.
fn affine_rows<T: Real>(x: &[T], rows: usize, din: usize, w: &[T], bias: &[T], out: &mut [T]) {
    let dout = bias.len();
    for i in 0..rows {
        let o = &mut out[i * dout..(i + 1) * dout];
        o.copy_from_slice(bias);
        for (k, &a) in x[i * din..(i + 1) * din].iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            for (oj, &wj) in o.iter_mut().zip(&w[k * dout..(k + 1) * dout]) {
                *oj += a * wj;
            }
        }
    }
}

fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A constant; no gradient flows into it.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A trainable leaf whose gradient is kept after [`Graph::backward`].
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass, if any reached `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Affine map of `x: [B, D_in]` by `w: [D_in, D_out]` and `b: [D_out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if wv.shape().len() != 2 || xv.shape().len() != 2 {
            return Err(shape_err("linear", "x [B, D_in] and w [D_in, D_out]", wv.shape()));
        }
        let (rows, din) = (xv.shape()[0], xv.shape()[1]);
        let dout = wv.shape()[1];
        if wv.shape()[0] != din {
            return Err(shape_err("linear", format!("w [{din}, _]"), wv.shape()));
        }
        if bv.shape() != [dout] {
            return Err(shape_err("linear", format!("b [{dout}]"), bv.shape()));
        }
        let mut out = vec![T::zero(); rows * dout];
        affine_rows(xv.data(), rows, din, wv.data(), bv.data(), &mut out);
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(Tensor::new(vec![rows, dout], out)?, Op::Linear { x, w, b }, needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
        let t = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(t, Op::Relu { x }, needs)
    }

    /// Per-column maximum over the rows of `x: [N, D]`, giving `[D]`, plus
    /// the winning row of each column (lowest index on ties).
    pub fn max_pool_rows(&mut self, x: Var) -> Result<(Var, Vec<usize>), NnError> {
        let xv = self.value(x);
        if xv.shape().len() != 2 {
            return Err(shape_err("max_pool_rows", "[N, D]", xv.shape()));
        }
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        if n == 0 {
            return Err(NnError::EmptyInput { op: "max_pool_rows" });
        }
        let mut best = xv.row(0).to_vec();
        let mut argmax = vec![0usize; d];
        for i in 1..n {
            for (j, &v) in xv.row(i).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = i;
                }
            }
        }
        let needs = self.needs(x);
        let out = self.push(
            Tensor::vector(best),
            Op::MaxPoolRows {
                x,
                argmax: argmax.clone(),
            },
            needs,
        );
        Ok((out, argmax))
    }

    /// Max over consecutive blocks of `group` rows: `[G * group, D] -> [G, D]`.
    pub fn group_max_pool(&mut self, x: Var, group: usize) -> Result<Var, NnError> {
        let xv = self.value(x);
        if xv.shape().len() != 2 || group == 0 || !xv.shape()[0].is_multiple_of(group) {
            return Err(shape_err("group_max_pool", format!("[G * {group}, D]"), xv.shape()));
        }
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        if n == 0 {
            return Err(NnError::EmptyInput { op: "group_max_pool" });
        }
        let g = n / group;
        let mut out = Vec::with_capacity(g * d);
        let mut argmax = Vec::with_capacity(g * d);
        for gi in 0..g {
            let first = gi * group;
            let mut best = xv.row(first).to_vec();
            let mut arg = vec![first; d];
            for i in first + 1..first + group {
                for (j, &v) in xv.row(i).iter().enumerate() {
                    if v > best[j] {
                        best[j] = v;
                        arg[j] = i;
                    }
                }
            }
            out.extend(best);
            argmax.extend(arg);
        }
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![g, d], out)?, Op::GroupMaxPool { x, argmax }, needs))
    }

    /// Rows of `x: [N, D]` at `idx`, giving `[idx.len(), D]`.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, NnError> {
        let xv = self.value(x);
        if xv.shape().len() != 2 {
            return Err(shape_err("gather_rows", "[N, D]", xv.shape()));
        }
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(shape_err("gather_rows", format!("row index < {n}"), &[bad]));
        }
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            out.extend_from_slice(xv.row(i));
        }
        let needs = self.needs(x);
        Ok(self.push(
            Tensor::new(vec![idx.len(), d], out)?,
            Op::GatherRows { x, idx: idx.to_vec() },
            needs,
        ))
    }

    /// `[N, Da]` beside `[N, Db]` gives `[N, Da + Db]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape().len() != 2 || bv.shape().len() != 2 || av.shape()[0] != bv.shape()[0] {
            return Err(shape_err(
                "concat_cols",
                format!("[{}, _]", av.shape().first().copied().unwrap_or(0)),
                bv.shape(),
            ));
        }
        let (n, da, db) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
        let mut out = Vec::with_capacity(n * (da + db));
        for i in 0..n {
            out.extend_from_slice(av.row(i));
            out.extend_from_slice(bv.row(i));
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(vec![n, da + db], out)?, Op::ConcatCols { a, b }, needs))
    }

    /// Stacks equal-length vectors into a `[parts.len(), D]` matrix.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let Some(&first) = parts.first() else {
            return Err(NnError::EmptyInput { op: "stack_rows" });
        };
        let d = self.value(first).len();
        let mut out = Vec::with_capacity(parts.len() * d);
        for &p in parts {
            let pv = self.value(p);
            if pv.len() != d {
                return Err(shape_err("stack_rows", format!("{d} values"), pv.shape()));
            }
            out.extend_from_slice(pv.data());
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Tensor::new(vec![parts.len(), d], out)?,
            Op::StackRows { parts: parts.to_vec() },
            needs,
        ))
    }

    /// Row-wise softmax, computed with the row maximum subtracted.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, NnError> {
        let xv = self.value(x);
        if xv.is_empty() {
            return Err(NnError::EmptyInput { op: "softmax_rows" });
        }
        let (rows, cols) = (xv.rows(), xv.cols());
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            out.extend(softmax(xv.row(i)));
        }
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(xv.shape().to_vec(), out)?, Op::SoftmaxRows { x }, needs))
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax of
    /// `logits: [B, C]`, each row scaled by `weights[label]` when given.
    /// Uses log-sum-exp and accumulates in `f64`. The result has shape `[1]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize], weights: Option<&[f64]>) -> Result<Var, NnError> {
        let lv = self.value(logits);
        if lv.shape().len() != 2 || lv.shape()[0] != labels.len() {
            return Err(shape_err("cross_entropy", format!("[{}, C]", labels.len()), lv.shape()));
        }
        let (b, c) = (lv.shape()[0], lv.shape()[1]);
        if b == 0 || c == 0 {
            return Err(NnError::EmptyInput { op: "cross_entropy" });
        }
        if let Some(w) = weights {
            if w.len() != c {
                return Err(shape_err("cross_entropy", format!("{c} class weights"), &[w.len()]));
            }
        }
        let mut loss = 0.0;
        let mut probs = Vec::with_capacity(b * c);
        let mut scale = Vec::with_capacity(b);
        for (i, &y) in labels.iter().enumerate() {
            if y >= c {
                return Err(NnError::LabelOutOfRange { label: y, classes: c });
            }
            let row: Vec<f64> = lv.row(i).iter().map(|v| v.as_f64()).collect();
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&z| (z - m).exp()).sum();
            let lse = m + sum.ln();
            let s = weights.map_or(1.0, |w| w[y]) / b as f64;
            loss += s * (lse - row[y]);
            probs.extend(row.iter().map(|&z| (z - lse).exp()));
            scale.push(s);
        }
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::vector(vec![T::of(loss)]),
            Op::CrossEntropy {
                logits,
                scale,
                probs,
                labels: labels.to_vec(),
            },
            needs,
        ))
    }

    fn grad_buf(&mut self, v: Var) -> &mut Vec<T> {
        let n = self.nodes[v.0].value.len();
        self.grads[v.0].get_or_insert_with(|| vec![T::zero(); n])
    }

    /// Backpropagates from a scalar output seeded with `seed`.
    pub fn backward(&mut self, out: Var, seed: T) -> Result<(), NnError> {
        let n = self.value(out).len();
        self.backward_with(out, vec![seed; n])
    }

    /// Backpropagates `d(out)` = `seed` (same length as `out`). Gradients of
    /// earlier passes are cleared first.
    pub fn backward_with(&mut self, out: Var, seed: Vec<T>) -> Result<(), NnError> {
        if seed.len() != self.value(out).len() {
            return Err(shape_err("backward", format!("{} seed values", self.value(out).len()), &[seed.len()]));
        }
        self.grads.iter_mut().for_each(|g| *g = None);
        self.grads[out.0] = Some(seed);
        for i in (0..=out.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(dy) = self.grads[i].take() else {
                continue;
            };
            self.backprop_node(i, &dy);
            self.grads[i] = Some(dy);
        }
        Ok(())
    }

    fn backprop_node(&mut self, i: usize, dy: &[T]) {
        // The op is moved out for the duration of the step so parent gradient
        // buffers can be borrowed mutably.
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => self.backprop_linear(*x, *w, *b, dy),
            Op::Relu { x } => {
                if self.needs(*x) {
                    let y = std::mem::replace(&mut self.nodes[i].value, Tensor::zeros(vec![0]));
                    let g = self.grad_buf(*x);
                    for ((gi, &d), &yv) in g.iter_mut().zip(dy).zip(y.data()) {
                        if yv > T::zero() {
                            *gi += d;
                        }
                    }
                    self.nodes[i].value = y;
                }
            }
            Op::MaxPoolRows { x, argmax } => {
                if self.needs(*x) {
                    let d = argmax.len();
                    let g = self.grad_buf(*x);
                    for (j, (&r, &dj)) in argmax.iter().zip(dy).enumerate() {
                        g[r * d + j] += dj;
                    }
                }
            }
            Op::GroupMaxPool { x, argmax } => {
                if self.needs(*x) {
                    let d = self.value(*x).cols();
                    let g = self.grad_buf(*x);
                    for (k, (&r, &dk)) in argmax.iter().zip(dy).enumerate() {
                        g[r * d + k % d] += dk;
                    }
                }
            }
            Op::GatherRows { x, idx } => {
                if self.needs(*x) {
                    let d = self.value(*x).cols();
                    let g = self.grad_buf(*x);
                    for (r, &src) in idx.iter().enumerate() {
                        for (gv, &dv) in g[src * d..(src + 1) * d].iter_mut().zip(&dy[r * d..(r + 1) * d]) {
                            *gv += dv;
                        }
                    }
                }
            }
            Op::ConcatCols { a, b } => {
                let da = self.value(*a).cols();
                let db = self.value(*b).cols();
                let rows = self.value(*a).rows();
                for (part, off, width) in [(*a, 0, da), (*b, da, db)] {
                    if self.needs(part) {
                        let g = self.grad_buf(part);
                        for r in 0..rows {
                            let src = &dy[r * (da + db) + off..r * (da + db) + off + width];
                            for (gv, &dv) in g[r * width..(r + 1) * width].iter_mut().zip(src) {
                                *gv += dv;
                            }
                        }
                    }
                }
            }
            Op::StackRows { parts } => {
                let d = dy.len() / parts.len();
                for (r, &p) in parts.iter().enumerate() {
                    if self.needs(p) {
                        let g = self.grad_buf(p);
                        for (gv, &dv) in g.iter_mut().zip(&dy[r * d..(r + 1) * d]) {
                            *gv += dv;
                        }
                    }
                }
            }
            Op::SoftmaxRows { x } => {
                if self.needs(*x) {
                    let y = std::mem::replace(&mut self.nodes[i].value, Tensor::zeros(vec![0]));
                    let cols = self.value(*x).cols();
                    let g = self.grad_buf(*x);
                    for ((gr, yr), dr) in g.chunks_mut(cols).zip(y.data().chunks(cols)).zip(dy.chunks(cols)) {
                        let dot: T = yr.iter().zip(dr).map(|(&a, &b)| a * b).sum();
                        for ((gv, &yv), &dv) in gr.iter_mut().zip(yr).zip(dr) {
                            *gv += yv * (dv - dot);
                        }
                    }
                    self.nodes[i].value = y;
                }
            }
            Op::CrossEntropy {
                logits,
                scale,
                probs,
                labels,
            } => {
                if self.needs(*logits) {
                    let c = probs.len() / labels.len();
                    let up = dy[0].as_f64();
                    let g = self.grad_buf(*logits);
                    for (r, (&y, &s)) in labels.iter().zip(scale).enumerate() {
                        for k in 0..c {
                            let target = if k == y { 1.0 } else { 0.0 };
                            g[r * c + k] += T::of(up * s * (probs[r * c + k] - target));
                        }
                    }
                }
            }
        }
        self.nodes[i].op = op;
    }

    fn backprop_linear(&mut self, x: Var, w: Var, b: Var, dy: &[T]) {
        // buffers are sized from the values, so create them before the swap
        for v in [x, w, b] {
            if self.needs(v) {
                self.grad_buf(v);
            }
        }
        let xv = std::mem::replace(&mut self.nodes[x.0].value, Tensor::zeros(vec![0]));
        let wv = std::mem::replace(&mut self.nodes[w.0].value, Tensor::zeros(vec![0]));
        let (rows, din) = (xv.shape()[0], xv.shape()[1]);
        let dout = wv.shape()[1];
        let live: Vec<usize> = (0..rows)
            .filter(|&r| dy[r * dout..(r + 1) * dout].iter().any(|&v| v != T::zero()))
            .collect();

        if self.needs(w) {
            let gw = self.grad_buf(w);
            for &r in &live {
                let dyr = &dy[r * dout..(r + 1) * dout];
                for (k, &a) in xv.row(r).iter().enumerate() {
                    if a != T::zero() {
                        axpy(a, dyr, &mut gw[k * dout..(k + 1) * dout]);
                    }
                }
            }
        }
        if self.needs(b) {
            let gb = self.grad_buf(b);
            for &r in &live {
                axpy(T::one(), &dy[r * dout..(r + 1) * dout], gb);
            }
        }
        if self.needs(x) {
            // dx[r, :] = sum_j dy[r, j] * w[:, j], via the transpose so the
            // inner loop runs over contiguous memory
            let mut wt = vec![T::zero(); din * dout];
            for k in 0..din {
                for j in 0..dout {
                    wt[j * din + k] = wv.data()[k * dout + j];
                }
            }
            let gx = self.grad_buf(x);
            for &r in &live {
                let g = &mut gx[r * din..(r + 1) * din];
                for (j, &d) in dy[r * dout..(r + 1) * dout].iter().enumerate() {
                    if d != T::zero() {
                        axpy(d, &wt[j * din..(j + 1) * din], g);
                    }
                }
            }
        }
        self.nodes[x.0].value = xv;
        self.nodes[w.0].value = wv;
    }
}

/// Numerically stable softmax of one row.
pub fn softmax<T: Real>(row: &[T]) -> Vec<T> {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = row.iter().map(|&z| (z - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}
