//! Reverse-mode automatic differentiation over row-major `f64` matrices.
//!
//! A [`Tape`] records every operation eagerly: each call computes its value
//! immediately and appends a node. [`Tape::backward`] then walks the nodes
//! in reverse and returns gradients for every parameter that was read.

use std::collections::HashMap;

use ndarray::{s, Array2, Axis};

use super::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    /// `a` (n×m) plus row vector `b` (1×m) on every row.
    AddRow(Var, Var),
    Mul(Var, Var),
    /// `a` (n×m) times row vector `b` (1×m).
    MulRow(Var, Var),
    /// `a` (n×m) times column vector `b` (n×1).
    MulCol(Var, Var),
    /// `a` times the single entry of a 1×1 node.
    MulScalar(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Transpose(Var),
    MaskedSoftmax(Var),
    LogSoftmax(Var),
    LayerNorm {
        input: Var,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Sum(Var),
}

enum Value {
    Owned(Array2<f64>),
    Param(ParamId),
}

/// Recorded computation. Parameter values are borrowed from the store, never copied.
pub struct Tape<'a> {
    store: &'a ParamStore,
    values: Vec<Value>,
    ops: Vec<Op>,
    param_nodes: HashMap<ParamId, Var>,
}

/// Gradients indexed by parameter; `None` for parameters the loss never read.
#[derive(Debug, Clone)]
pub struct Gradients(pub Vec<Option<Array2<f64>>>);

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.0.get(id.index()).and_then(Option::as_ref)
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

fn softmax_rows(x: &Array2<f64>, mask: Option<&Array2<bool>>) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    for (r, row) in x.rows().into_iter().enumerate() {
        let keep = |c: usize| mask.is_none_or(|m| m[[r, c]]);
        let max = (0..row.len())
            .filter(|&c| keep(c))
            .map(|c| row[c])
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            continue;
        }
        let mut total = 0.0;
        for c in (0..row.len()).filter(|&c| keep(c)) {
            let e = (row[c] - max).exp();
            out[[r, c]] = e;
            total += e;
        }
        out.row_mut(r).mapv_inplace(|v| v / total);
    }
    out
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape {
            store,
            values: Vec::new(),
            ops: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(Value::Owned(value));
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        match &self.values[v.0] {
            Value::Owned(a) => a,
            Value::Param(id) => self.store.value(*id),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        self.values.push(Value::Param(id));
        self.ops.push(Op::Param(id));
        let v = Var(self.values.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(b), (1, self.shape(a).1), "add_row shape mismatch");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::AddRow(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn mul_row(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(b), (1, self.shape(a).1), "mul_row shape mismatch");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::MulRow(a, b))
    }

    pub fn mul_col(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(b), (self.shape(a).0, 1), "mul_col shape mismatch");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::MulCol(a, b))
    }

    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.shape(s), (1, 1), "mul_scalar needs a 1x1 node");
        let v = self.value(a) * self.value(s)[[0, 0]];
        self.push(v, Op::MulScalar(a, s))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    /// Row-wise softmax. Masked-out entries (`false`) are exactly zero and a
    /// fully masked row is all zeros.
    pub fn masked_softmax(&mut self, a: Var, mask: Option<&Array2<bool>>) -> Var {
        if let Some(m) = mask {
            assert_eq!(m.dim(), self.shape(a), "mask shape mismatch");
        }
        let v = softmax_rows(self.value(a), mask);
        self.push(v, Op::MaskedSoftmax(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        self.masked_softmax(a, None)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = x.clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = max + row.mapv(|x| (x - max).exp()).sum().ln();
            row.mapv_inplace(|x| x - lse);
        }
        self.push(v, Op::LogSoftmax(a))
    }

    /// Per-row standardization (no affine part).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let x = self.value(a);
        let cols = x.ncols() as f64;
        let mut xhat = x.clone();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / cols;
            let var = row.mapv(|v| (v - mean).powi(2)).sum() / cols;
            let inv = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            inv_std.push(inv);
        }
        self.push(
            xhat.clone(),
            Op::LayerNorm {
                input: a,
                xhat,
                inv_std,
            },
        )
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows column mismatch");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// `x W + b` for a row-stacked input.
    pub fn affine(&mut self, x: Var, w: ParamId, b: ParamId) -> Var {
        let w = self.param(w);
        let b = self.param(b);
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    /// Gradients of the scalar node `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.values.len()];
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut params: Vec<Option<Array2<f64>>> = vec![None; self.store.len()];
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let out = self.value(Var(i));
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Param(id) => accumulate(&mut params[id.index()], g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[b.0], g.clone());
                    accumulate(&mut grads[a.0], g);
                }
                Op::AddRow(a, b) => {
                    accumulate(&mut grads[b.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads[a.0], g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::MulRow(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::MulCol(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = (&g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::MulScalar(a, sc) => {
                    let s = self.value(*sc)[[0, 0]];
                    let gs = (&g * self.value(*a)).sum();
                    accumulate(&mut grads[sc.0], Array2::from_elem((1, 1), gs));
                    accumulate(&mut grads[a.0], g * s);
                }
                Op::Scale(a, c) => accumulate(&mut grads[a.0], g * *c),
                Op::Tanh(a) => accumulate(&mut grads[a.0], g * &out.mapv(|y| 1.0 - y * y)),
                Op::Sigmoid(a) => accumulate(&mut grads[a.0], g * &out.mapv(|y| y * (1.0 - y))),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let ga = ndarray::Zip::from(&g)
                        .and(x)
                        .map_collect(|&g, &x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Transpose(a) => accumulate(&mut grads[a.0], g.t().to_owned()),
                Op::MaskedSoftmax(a) => {
                    let mut ga = &g * out;
                    for (mut row, y) in ga.rows_mut().into_iter().zip(out.rows()) {
                        let dot = row.sum();
                        row.zip_mut_with(&y, |v, &y| *v -= y * dot);
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::LogSoftmax(a) => {
                    let mut ga = g.clone();
                    for ((mut row, y), gr) in ga.rows_mut().into_iter().zip(out.rows()).zip(g.rows()) {
                        let total = gr.sum();
                        row.zip_mut_with(&y, |v, &y| *v -= y.exp() * total);
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::LayerNorm { input, xhat, inv_std } => {
                    let cols = xhat.ncols() as f64;
                    let mut ga = g.clone();
                    for (r, mut row) in ga.rows_mut().into_iter().enumerate() {
                        let xr = xhat.row(r);
                        let mean_g = row.sum() / cols;
                        let mean_gx = row.iter().zip(xr).map(|(g, x)| g * x).sum::<f64>() / cols;
                        let inv = inv_std[r];
                        row.zip_mut_with(&xr, |v, &x| *v = inv * (*v - mean_g - x * mean_gx));
                    }
                    accumulate(&mut grads[input.0], ga);
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let n = self.shape(*p).0;
                        accumulate(&mut grads[p.0], g.slice(s![start..start + n, ..]).to_owned());
                        start += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let n = self.shape(*p).1;
                        accumulate(&mut grads[p.0], g.slice(s![.., start..start + n]).to_owned());
                        start += n;
                    }
                }
                Op::SliceRows(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    accumulate(&mut grads[a.0], ga);
                }
                Op::SliceCols(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Sum(a) => accumulate(&mut grads[a.0], Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]])),
            }
        }
        Gradients(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    /// Central-difference check of `f` w.r.t. every entry of every parameter.
    fn check(store: &mut ParamStore, f: impl Fn(&mut Tape) -> Var) {
        let analytic = {
            let mut t = Tape::new(store);
            let loss = f(&mut t);
            t.backward(loss)
        };
        let h = 1e-5;
        for id in store.ids() {
            let (rows, cols) = store.value(id).dim();
            for r in 0..rows {
                for c in 0..cols {
                    let orig = store.value(id)[[r, c]];
                    let mut eval = |x: f64| {
                        store.value_mut(id)[[r, c]] = x;
                        let mut t = Tape::new(store);
                        let l = f(&mut t);
                        t.value(l)[[0, 0]]
                    };
                    let numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
                    store.value_mut(id)[[r, c]] = orig;
                    let a = analytic.get(id).map_or(0.0, |g| g[[r, c]]);
                    let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        err < 1e-6,
                        "{} [{r},{c}]: analytic {a} numeric {numeric}",
                        store.name(id)
                    );
                }
            }
        }
    }

    #[test]
    fn elementwise_and_matrix_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::default();
        let a = store.add("a", random(&mut rng, 3, 4));
        let b = store.add("b", random(&mut rng, 4, 2));
        let row = store.add("row", random(&mut rng, 1, 2));
        let col = store.add("col", random(&mut rng, 3, 1));
        let s = store.add("s", random(&mut rng, 1, 1));
        check(&mut store, |t| {
            let (a, b, row, col, s) = (t.param(a), t.param(b), t.param(row), t.param(col), t.param(s));
            let x = t.matmul(a, b);
            let x = t.add_row(x, row);
            let x = t.mul_row(x, row);
            let x = t.mul_col(x, col);
            let x = t.mul_scalar(x, s);
            let y = t.tanh(x);
            let z = t.sigmoid(x);
            let x = t.mul(y, z);
            let x = t.add(x, y);
            let x = t.scale(x, 0.7);
            let xt = t.transpose(x);
            let x = t.matmul(xt, x);
            t.sum(x)
        });
    }

    #[test]
    fn normalizing_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::default();
        let a = store.add("a", random(&mut rng, 3, 5));
        let w = store.add("w", random(&mut rng, 3, 5));
        let mask = array![
            [true, false, true, true, false],
            [false, false, false, false, false],
            [true, true, true, true, true]
        ];
        check(&mut store, |t| {
            let (a, w) = (t.param(a), t.param(w));
            let sm = t.masked_softmax(a, Some(&mask));
            let ln = t.layer_norm(a, 1e-5);
            let ls = t.log_softmax(a);
            let r = t.relu(a);
            let parts = t.concat_rows(&[sm, ln]);
            let parts2 = t.concat_rows(&[ls, r]);
            let both = t.concat_cols(&[parts, parts2]);
            let left = t.slice_cols(both, 2, 5);
            let top = t.slice_rows(left, 1, 3);
            let ww = t.mul(top, w);
            t.sum(ww)
        });
    }

    #[test]
    fn masked_softmax_values() {
        let store = ParamStore::default();
        let mut t = Tape::new(&store);
        let x = t.constant(array![[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]]);
        let mask = array![[true, false, true], [false, false, false]];
        let y = t.masked_softmax(x, Some(&mask));
        let v = t.value(y);
        assert_eq!(v[[0, 1]], 0.0);
        assert!((v[[0, 0]] + v[[0, 2]] - 1.0).abs() < 1e-15);
        assert!((v[[0, 2]] - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-15);
        assert_eq!(v.row(1).sum(), 0.0);
    }

    #[test]
    fn param_read_twice_accumulates() {
        let mut store = ParamStore::default();
        let p = store.add("p", array![[2.0]]);
        let mut t = Tape::new(&store);
        let a = t.param(p);
        let b = t.param(p);
        let sq = t.mul(a, b);
        let g = t.backward(sq);
        assert_eq!(g.get(p).unwrap()[[0, 0]], 4.0);
    }
}
