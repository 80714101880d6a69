//! Central finite-difference gradient checking.

use super::toy::random_patch;
use patchnet::model::{HyperParams, Mode, Model, Variant};
use patchnet::nnkit::{dropout_mask, ParamStore, Tape, Tensor, Var};
use patchnet::preprocess::{PatchShape, PreprocessedPatch};
use patchnet::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor for the relative error, so that gradients that are
/// zero up to rounding compare on an absolute scale.
pub const FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.max_rel < TOLERANCE
    }
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

/// Compares `analytic[p][i]` with `(f(θ + h e_i) − f(θ − h e_i)) / 2h` for
/// every parameter element.
pub fn check(store: &ParamStore, analytic: &[Vec<f64>], loss: impl Fn(&ParamStore) -> f64) -> GradReport {
    let mut s = store.clone();
    let mut report = GradReport {
        checked: 0,
        max_rel: 0.0,
        worst: String::new(),
    };
    let ids: Vec<_> = store.iter().map(|(id, name, _)| (id, name.to_string())).collect();
    for (id, name) in ids {
        for i in 0..store.tensor(id).len() {
            let orig = s.tensor(id).data[i];
            s.tensor_mut(id).data[i] = orig + STEP;
            let up = loss(&s);
            s.tensor_mut(id).data[i] = orig - STEP;
            let down = loss(&s);
            s.tensor_mut(id).data[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[id.0][i];
            let r = rel_error(a, numeric);
            report.checked += 1;
            if r > report.max_rel {
                report.max_rel = r;
                report.worst = format!("{name}[{i}]: analytic {a:e}, numeric {numeric:e}");
            }
        }
    }
    report
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Checks the gradients of the scalar graph recorded by `build`.
pub fn check_graph(store: &ParamStore, build: impl Fn(&mut Tape<'_>) -> Var) -> GradReport {
    let mut tape = Tape::new(store);
    let loss = build(&mut tape);
    let analytic = tape.backward(loss).to_dense(store);
    check(store, &analytic, |s| {
        let mut t = Tape::new(s);
        let l = build(&mut t);
        t.scalar(l)
    })
}

fn random_store(rng: &mut ChaCha8Rng, specs: &[(&str, &[usize])]) -> ParamStore {
    let mut s = ParamStore::new();
    for (name, shape) in specs {
        let n = shape.iter().product();
        s.add(*name, Tensor::from_vec(shape, random_vec(rng, n)));
    }
    s
}

/// Embedding, text convolutions, pooling, concatenation, dropout, dense
/// layer, dot product, sigmoid, cross-entropy and sum in one graph.
pub fn text_pipeline_report(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let store = random_store(
        &mut rng,
        &[
            ("emb", &[6, 3]),
            ("w1", &[4, 1, 3]),
            ("b1", &[4]),
            ("w2", &[4, 2, 3]),
            ("b2", &[4]),
            ("fc", &[5, 8]),
            ("fcb", &[5]),
            ("out", &[5]),
        ],
    );
    let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
    let mask = dropout_mask(8, 0.5, &mut rng, true);
    check_graph(&store, |t| {
        // index 2 appears twice so embedding rows accumulate
        let x = t.embed(ids[0], &[2, 0, 5, 2, 1]);
        let mut pooled = Vec::new();
        for (w, b) in [(ids[1], ids[2]), (ids[3], ids[4])] {
            let (w, b) = (t.param(w), t.param(b));
            let c = t.conv(x, w, b);
            pooled.push(t.max_pool_rows(c));
        }
        let e = t.concat(&pooled, &[8]);
        let e = t.dropout(e, mask.clone());
        let (fw, fb, ow) = (t.param(ids[5]), t.param(ids[6]), t.param(ids[7]));
        let h = t.dense(e, fw, fb);
        let s = t.dot(h, ow);
        let z = t.sigmoid(s);
        let l1 = t.bce(z, 1.0);
        let l2 = t.bce(z, 0.0);
        t.sum(&[l1, l2, l1])
    })
}

/// A hunk-shaped (three-axis) convolution feeding a scalar loss.
pub fn hunk_conv_report(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let store = random_store(&mut rng, &[("x", &[4, 3, 2]), ("w", &[3, 2, 3, 2]), ("b", &[3]), ("o", &[3])]);
    let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
    check_graph(&store, |t| {
        let (x, w, b, o) = (t.param(ids[0]), t.param(ids[1]), t.param(ids[2]), t.param(ids[3]));
        let c = t.conv(x, w, b);
        let p = t.max_pool_rows(c);
        let s = t.dot(p, o);
        let z = t.sigmoid(s);
        t.bce(z, 1.0)
    })
}

/// Reduced model dimensions for end-to-end checks.
pub fn small_hp(share: bool) -> HyperParams {
    HyperParams {
        d_m: 4,
        d_c: 4,
        n_filters: 2,
        fc_size: 3,
        lambda: 1e-2,
        share_line_filters: share,
        ..HyperParams::default()
    }
    .with_shape(PatchShape {
        msg_len: 6,
        files: 2,
        hunks: 3,
        lines: 3,
        words: 4,
    })
}

/// Summed cross-entropy over `batch` plus the penalty, under fixed dropout masks.
pub fn batch_objective(model: &Model, batch: &[PreprocessedPatch], train: bool) -> (f64, Vec<Vec<f64>>) {
    let mut acc: Vec<Vec<f64>> = model.params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
    let mut total = 0.0;
    for (i, p) in batch.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let mut mode = if train { Mode::Train(&mut rng) } else { Mode::Infer };
        let target = p.label.unwrap().target();
        let (l, g) = model.loss_and_grads(p, target, &mut mode);
        total += l;
        g.add_to(&model.params, &mut acc);
    }
    total += model.params.l2_penalty(model.hp.lambda);
    model.params.add_l2_grad(model.hp.lambda, &mut acc);
    (total, acc)
}

/// End-to-end check of a 2-patch batch through the whole model.
pub fn model_report(variant: Variant, share: bool, train: bool) -> GradReport {
    let hp = small_hp(share);
    let mut params = Model::new(hp.clone(), variant, 7, 9).unwrap().params;
    // larger weights keep more ReLUs active so more paths are exercised
    params.init_uniform(0.6, 5);
    let model = Model::from_params(hp.clone(), variant, params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let batch = vec![
        random_patch(&mut rng, hp.shape(), (7, 9), Label::Stable),
        random_patch(&mut rng, hp.shape(), (7, 9), Label::NonStable),
    ];
    let (_, analytic) = batch_objective(&model, &batch, train);
    check(&model.params, &analytic, |s: &ParamStore| {
        let m = Model::from_params(hp.clone(), variant, s.clone()).unwrap();
        batch_objective(&m, &batch, train).0
    })
}
