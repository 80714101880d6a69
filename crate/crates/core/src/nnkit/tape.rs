//! Reverse-mode differentiation over a recorded sequence of coarse operations.

use super::ops::{self, LOSS_EPS};
use super::{ParamId, ParamStore};
use std::collections::BTreeMap;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Embed {
        table: ParamId,
        indices: Vec<u32>,
    },
    /// Convolution with bias and ReLU over rows of `input`.
    Conv {
        input: Var,
        filters: Var,
        bias: Var,
        k: usize,
        width: usize,
    },
    /// Row-wise max of an `F × P` input.
    MaxPoolRows {
        input: Var,
        argmax: Vec<usize>,
    },
    Concat(Vec<Var>),
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    Dense {
        input: Var,
        w: Var,
        b: Var,
    },
    Dot(Var, Var),
    Sigmoid(Var),
    Bce {
        z: Var,
        y: f64,
    },
    Sum(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    /// Empty for parameter nodes, whose values live in the store.
    value: Vec<f64>,
}

/// Gradient of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamGrad {
    Zero,
    Dense(Vec<f64>),
    /// Accumulated rows of an embedding table.
    Rows(BTreeMap<u32, Vec<f64>>),
}

/// Gradients for every parameter of a store, indexed by [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<ParamGrad>);

impl Grads {
    /// Adds these gradients into dense per-parameter buffers.
    pub fn add_to(&self, store: &ParamStore, acc: &mut [Vec<f64>]) {
        for (id, g) in self.0.iter().enumerate() {
            match g {
                ParamGrad::Zero => {}
                ParamGrad::Dense(v) => {
                    for (a, x) in acc[id].iter_mut().zip(v) {
                        *a += x;
                    }
                }
                ParamGrad::Rows(rows) => {
                    let w = store.tensor(ParamId(id)).row_width();
                    for (&r, v) in rows {
                        let dst = &mut acc[id][r as usize * w..(r as usize + 1) * w];
                        for (a, x) in dst.iter_mut().zip(v) {
                            *a += x;
                        }
                    }
                }
            }
        }
    }

    /// Dense copy of every gradient.
    pub fn to_dense(&self, store: &ParamStore) -> Vec<Vec<f64>> {
        let mut acc: Vec<Vec<f64>> = store.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        self.add_to(store, &mut acc);
        acc
    }
}

/// Records operations against a borrowed parameter store.
pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, shape, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match self.nodes[v.0].op {
            Op::Param(id) => &self.store.tensor(id).data,
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// The single value of a scalar node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn constant(&mut self, shape: &[usize], value: Vec<f64>) -> Var {
        assert_eq!(value.len(), shape.iter().product::<usize>());
        self.push(Op::Constant, shape.to_vec(), value)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let shape = self.store.tensor(id).shape.clone();
        self.push(Op::Param(id), shape, Vec::new())
    }

    pub fn embed(&mut self, table: ParamId, indices: &[u32]) -> Var {
        let out = ops::embed_lookup(self.store.tensor(table), indices);
        self.push(
            Op::Embed {
                table,
                indices: indices.to_vec(),
            },
            out.shape,
            out.data,
        )
    }

    /// `input` is `rows × …`, `filters` is `F × k × …` with matching trailing
    /// extents, `bias` is `F`. Output is `F × (rows − k + 1)`.
    pub fn conv(&mut self, input: Var, filters: Var, bias: Var) -> Var {
        let fshape = self.shape(filters).to_vec();
        let ishape = self.shape(input).to_vec();
        assert_eq!(&ishape[1..], &fshape[2..], "conv shape mismatch");
        let width: usize = ishape[1..].iter().product();
        let k = fshape[1];
        let out = ops::conv_rows(self.value(input), width, self.value(filters), k, self.value(bias));
        let f = fshape[0];
        let shape = vec![f, out.len() / f.max(1)];
        self.push(
            Op::Conv {
                input,
                filters,
                bias,
                k,
                width,
            },
            shape,
            out,
        )
    }

    pub fn max_pool_rows(&mut self, input: Var) -> Var {
        let shape = self.shape(input).to_vec();
        let (f, p) = (shape[0], shape[1]);
        let x = self.value(input);
        let (vals, argmax): (Vec<f64>, Vec<usize>) =
            (0..f).map(|r| ops::max_pool(&x[r * p..(r + 1) * p])).unzip();
        self.push(Op::MaxPoolRows { input, argmax }, vec![f], vals)
    }

    /// Concatenates values in order; `shape` must cover the total length.
    pub fn concat(&mut self, parts: &[Var], shape: &[usize]) -> Var {
        let mut out = Vec::with_capacity(shape.iter().product());
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        assert_eq!(out.len(), shape.iter().product::<usize>(), "concat shape mismatch");
        self.push(Op::Concat(parts.to_vec()), shape.to_vec(), out)
    }

    /// Elementwise product with a fixed mask (already scaled by `1/(1−rate)`).
    pub fn dropout(&mut self, input: Var, mask: Vec<f64>) -> Var {
        let out: Vec<f64> = self.value(input).iter().zip(&mask).map(|(x, m)| x * m).collect();
        assert_eq!(out.len(), mask.len(), "dropout mask length mismatch");
        let shape = self.shape(input).to_vec();
        self.push(Op::Dropout { input, mask }, shape, out)
    }

    pub fn dense(&mut self, input: Var, w: Var, b: Var) -> Var {
        let out = ops::dense(self.value(input), self.param_tensor(w), self.value(b));
        let n = out.len();
        self.push(Op::Dense { input, w, b }, vec![n], out)
    }

    fn param_tensor(&self, v: Var) -> &super::Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => self.store.tensor(id),
            _ => panic!("dense weights must be a parameter"),
        }
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let out = ops::dot(self.value(a), self.value(b));
        self.push(Op::Dot(a, b), vec![1], vec![out])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = ops::sigmoid(self.scalar(x));
        self.push(Op::Sigmoid(x), vec![1], vec![out])
    }

    pub fn bce(&mut self, z: Var, y: f64) -> Var {
        let out = ops::bce(self.scalar(z), y);
        self.push(Op::Bce { z, y }, vec![1], vec![out])
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let mut acc = 0.0;
        for &x in xs {
            acc += self.scalar(x);
        }
        self.push(Op::Sum(xs.to_vec()), vec![1], vec![acc])
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Grads {
        let mut pgrads: Vec<ParamGrad> = vec![ParamGrad::Zero; self.store.len()];
        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        fn acc<'g>(grads: &'g mut [Option<Vec<f64>>], v: Var, len: usize) -> &'g mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let slot = &mut pgrads[id.0];
                    match slot {
                        ParamGrad::Dense(d) => d.iter_mut().zip(&g).for_each(|(a, x)| *a += x),
                        _ => *slot = ParamGrad::Dense(g),
                    }
                }
                Op::Embed { table, indices } => {
                    let d = node.shape[1];
                    if !matches!(pgrads[table.0], ParamGrad::Rows(_)) {
                        pgrads[table.0] = ParamGrad::Rows(BTreeMap::new());
                    }
                    let ParamGrad::Rows(rows) = &mut pgrads[table.0] else { unreachable!() };
                    for (pos, &r) in indices.iter().enumerate() {
                        let src = &g[pos * d..(pos + 1) * d];
                        if src.iter().all(|&x| x == 0.0) {
                            continue;
                        }
                        let dst = rows.entry(r).or_insert_with(|| vec![0.0; d]);
                        dst.iter_mut().zip(src).for_each(|(a, x)| *a += x);
                    }
                }
                Op::Conv {
                    input,
                    filters,
                    bias,
                    k,
                    width,
                } => {
                    let (f_n, p) = (node.shape[0], node.shape[1]);
                    let win = k * width;
                    let x = self.value(*input);
                    let w = self.value(*filters);
                    let mut gx = vec![0.0; x.len()];
                    let mut gw = vec![0.0; w.len()];
                    let mut gb = vec![0.0; f_n];
                    for f in 0..f_n {
                        for pos in 0..p {
                            let o = f * p + pos;
                            let go = g[o];
                            // ReLU passes gradient only where the output is positive.
                            if go == 0.0 || node.value[o] <= 0.0 {
                                continue;
                            }
                            gb[f] += go;
                            let xs = &x[pos * width..pos * width + win];
                            let ws = &w[f * win..(f + 1) * win];
                            let gxs = &mut gx[pos * width..pos * width + win];
                            let gws = &mut gw[f * win..(f + 1) * win];
                            for t in 0..win {
                                gxs[t] += go * ws[t];
                                gws[t] += go * xs[t];
                            }
                        }
                    }
                    add(acc(&mut grads, *input, gx.len()), &gx);
                    add(acc(&mut grads, *filters, gw.len()), &gw);
                    add(acc(&mut grads, *bias, gb.len()), &gb);
                }
                Op::MaxPoolRows { input, argmax } => {
                    let p = self.shape(*input)[1];
                    let len = self.value(*input).len();
                    let gi = acc(&mut grads, *input, len);
                    for (r, &a) in argmax.iter().enumerate() {
                        gi[r * p + a] += g[r];
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &part in parts {
                        let n = self.value(part).len();
                        add(acc(&mut grads, part, n), &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Dropout { input, mask } => {
                    let gi = acc(&mut grads, *input, mask.len());
                    for ((a, x), m) in gi.iter_mut().zip(&g).zip(mask) {
                        *a += x * m;
                    }
                }
                Op::Dense { input, w, b } => {
                    let e = self.value(*input);
                    let wv = self.value(*w);
                    let n = e.len();
                    let mut ge = vec![0.0; n];
                    let mut gw = vec![0.0; wv.len()];
                    let mut gb = vec![0.0; g.len()];
                    for j in 0..g.len() {
                        if node.value[j] <= 0.0 || g[j] == 0.0 {
                            continue;
                        }
                        gb[j] = g[j];
                        for t in 0..n {
                            ge[t] += g[j] * wv[j * n + t];
                            gw[j * n + t] = g[j] * e[t];
                        }
                    }
                    add(acc(&mut grads, *input, n), &ge);
                    add(acc(&mut grads, *w, gw.len()), &gw);
                    add(acc(&mut grads, *b, gb.len()), &gb);
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.value(*a).to_vec(), self.value(*b).to_vec());
                    let ga: Vec<f64> = bv.iter().map(|x| x * g[0]).collect();
                    let gb: Vec<f64> = av.iter().map(|x| x * g[0]).collect();
                    add(acc(&mut grads, *a, ga.len()), &ga);
                    add(acc(&mut grads, *b, gb.len()), &gb);
                }
                Op::Sigmoid(x) => {
                    let z = node.value[0];
                    acc(&mut grads, *x, 1)[0] += g[0] * z * (1.0 - z);
                }
                Op::Bce { z, y } => {
                    let zv = self.scalar(*z);
                    let d = if zv < LOSS_EPS || zv > 1.0 - LOSS_EPS {
                        0.0
                    } else {
                        (zv - y) / (zv * (1.0 - zv))
                    };
                    acc(&mut grads, *z, 1)[0] += g[0] * d;
                }
                Op::Sum(xs) => {
                    for &x in xs {
                        acc(&mut grads, x, 1)[0] += g[0];
                    }
                }
            }
        }
        Grads(pgrads)
    }
}

fn add(dst: &mut [f64], src: &[f64]) {
    for (a, x) in dst.iter_mut().zip(src) {
        *a += x;
    }
}
