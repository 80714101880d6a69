//! Forward computations shared by the tape and by direct callers.
//!
//! Reductions always run in index order so results are reproducible
//! bit-for-bit against straightforward loops.

use super::Tensor;

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Overflow-safe logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Rows of `w` selected by `indices`. Panics on an out-of-range index.
pub fn embed_lookup(w: &Tensor, indices: &[u32]) -> Tensor {
    let d = w.row_width();
    let mut data = Vec::with_capacity(indices.len() * d);
    for &i in indices {
        assert!((i as usize) < w.shape[0], "embedding index {i} out of range");
        data.extend_from_slice(w.row(i as usize));
    }
    Tensor::from_vec(&[indices.len(), d], data)
}

/// Convolution over consecutive rows of `input` (`rows × width`), with
/// `filters` laid out as `F × k × width`. Returns `F × (rows - k + 1)`
/// after bias and ReLU.
pub fn conv_rows(
    input: &[f64],
    width: usize,
    filters: &[f64],
    k: usize,
    bias: &[f64],
) -> Vec<f64> {
    let rows = if width == 0 { 0 } else { input.len() / width };
    assert!(rows >= k && k >= 1, "convolution needs at least {k} rows, got {rows}");
    let n_filters = bias.len();
    let win = k * width;
    assert_eq!(filters.len(), n_filters * win, "filter shape mismatch");
    let positions = rows - k + 1;
    let mut out = vec![0.0; n_filters * positions];
    // Four filters at a time give independent accumulation chains while each
    // chain still sums in index order.
    let mut f = 0;
    while f + 4 <= n_filters {
        let w0 = &filters[f * win..(f + 1) * win];
        let w1 = &filters[(f + 1) * win..(f + 2) * win];
        let w2 = &filters[(f + 2) * win..(f + 3) * win];
        let w3 = &filters[(f + 3) * win..(f + 4) * win];
        for i in 0..positions {
            let x = &input[i * width..i * width + win];
            let (mut a0, mut a1, mut a2, mut a3) = (0.0, 0.0, 0.0, 0.0);
            for t in 0..win {
                let v = x[t];
                a0 += v * w0[t];
                a1 += v * w1[t];
                a2 += v * w2[t];
                a3 += v * w3[t];
            }
            out[f * positions + i] = relu(a0 + bias[f]);
            out[(f + 1) * positions + i] = relu(a1 + bias[f + 1]);
            out[(f + 2) * positions + i] = relu(a2 + bias[f + 2]);
            out[(f + 3) * positions + i] = relu(a3 + bias[f + 3]);
        }
        f += 4;
    }
    for f in f..n_filters {
        let w = &filters[f * win..(f + 1) * win];
        for i in 0..positions {
            let x = &input[i * width..i * width + win];
            let mut acc = 0.0;
            for t in 0..win {
                acc += x[t] * w[t];
            }
            out[f * positions + i] = relu(acc + bias[f]);
        }
    }
    out
}

/// Text convolution: `m` is `n × d`, `filters` is `F × k × d`.
pub fn conv_text(m: &Tensor, filters: &Tensor, bias: &Tensor) -> Tensor {
    let (k, d) = (filters.shape[1], filters.shape[2]);
    assert_eq!(m.shape[1], d, "conv_text width mismatch");
    let out = conv_rows(&m.data, d, &filters.data, k, &bias.data);
    let f = bias.len();
    Tensor::from_vec(&[f, out.len() / f.max(1)], out)
}

/// Convolution over windows of `k` hunks: `b` is `H × N × E`,
/// `filters` is `F × k × N × E`.
pub fn conv3d_hunks(b: &Tensor, filters: &Tensor, bias: &Tensor) -> Tensor {
    assert_eq!(&b.shape[1..], &filters.shape[2..], "conv3d_hunks shape mismatch");
    let width = b.row_width();
    let out = conv_rows(&b.data, width, &filters.data, filters.shape[1], &bias.data);
    let f = bias.len();
    Tensor::from_vec(&[f, out.len() / f.max(1)], out)
}

/// Maximum and its first index. Panics on empty input.
pub fn max_pool(t: &[f64]) -> (f64, usize) {
    assert!(!t.is_empty(), "max_pool of an empty tensor");
    let mut best = (t[0], 0);
    for (i, &x) in t.iter().enumerate().skip(1) {
        if x > best.0 {
            best = (x, i);
        }
    }
    best
}

/// `ReLU(w·e + b)` with `w` shaped `m × n`.
pub fn dense(e: &[f64], w: &Tensor, b: &[f64]) -> Vec<f64> {
    let n = e.len();
    assert_eq!(w.shape, [b.len(), n], "dense shape mismatch");
    (0..b.len())
        .map(|j| {
            let row = &w.data[j * n..(j + 1) * n];
            let mut acc = 0.0;
            for t in 0..n {
                acc += row[t] * e[t];
            }
            relu(acc + b[j])
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot shape mismatch");
    let mut acc = 0.0;
    for t in 0..a.len() {
        acc += a[t] * b[t];
    }
    acc
}

/// `σ(h·w_o)`.
pub fn sigmoid_score(h: &[f64], w_o: &[f64]) -> f64 {
    sigmoid(dot(h, w_o))
}

pub const LOSS_EPS: f64 = 1e-12;

/// Binary cross-entropy with `z` clamped to `[ε, 1 − ε]`.
pub fn bce(z: f64, y: f64) -> f64 {
    let z = z.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    -(y * z.ln() + (1.0 - y) * (1.0 - z).ln())
}

/// `(λ/2)·‖θ‖²` over every parameter.
pub fn l2_penalty<'a>(params: impl IntoIterator<Item = &'a [f64]>, lambda: f64) -> f64 {
    let mut sq = 0.0;
    for p in params {
        for &x in p {
            sq += x * x;
        }
    }
    0.5 * lambda * sq
}

/// Regularized loss for a batch: summed cross-entropy plus one penalty term.
pub fn loss<'a>(
    scores: &[f64],
    labels: &[f64],
    params: impl IntoIterator<Item = &'a [f64]>,
    lambda: f64,
) -> f64 {
    assert_eq!(scores.len(), labels.len(), "loss shape mismatch");
    let data: f64 = scores.iter().zip(labels).map(|(&z, &y)| bce(z, y)).sum();
    data + l2_penalty(params, lambda)
}
