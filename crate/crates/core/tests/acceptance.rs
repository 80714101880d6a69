//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Runs with `harness = false`, so `cargo test --test acceptance` executes `main`.

mod common;

use common::toy::{self, Plant};
use common::{example_patches, gradcheck, line_kind_fixtures, reference};
use patchnet::eval::{auc_roc, chrono_folds, keyword_baseline, metrics};
use patchnet::ingest::parse_unified_diff;
use patchnet::model::{ablation_variant, Ablation, Mode, Model, Variant};
use patchnet::nnkit::ops::{conv3d_hunks, conv_text};
use patchnet::nnkit::Tensor;
use patchnet::preprocess::{classify_line_kinds, index_patch, tokenize_patch, PatchShape};
use patchnet::trainer::{decode_checkpoint, encode_checkpoint, train, TrainConfig};
use patchnet::vocab::Vocabularies;
use patchnet::{Label, LineKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

enum Outcome {
    Pass(String),
    Fail(String),
    /// Not attainable here; replaced by the checks named in the message.
    Substituted(String),
}

type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, started: Instant, detail: String) -> Outcome {
    let took = started.elapsed();
    if took <= limit {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; took {took:.1?}, limit {limit:?}"))
    }
}

fn from_result(r: Result<String, String>, limit: Duration, started: Instant) -> Outcome {
    match r {
        Ok(d) => within(limit, started, d),
        Err(e) => Outcome::Fail(e),
    }
}

fn full_corpus() -> Outcome {
    Outcome::Substituted(
        "full-corpus accuracy/precision/recall/F1/AUC need the ~82k-patch kernel corpus and about a day of \
         GPU time; covered instead by the oracle, learnability and invariant checks below"
            .into(),
    )
}

fn gradient_oracle() -> Outcome {
    let started = Instant::now();
    let mut reports = vec![
        ("op graph (text)", gradcheck::text_pipeline_report(3)),
        ("op graph (hunk)", gradcheck::hunk_conv_report(4)),
    ];
    for (name, variant, share, train) in [
        ("model full, dropout", Variant::Full, true, true),
        ("model full, inference", Variant::Full, true, false),
        ("model unshared lines", Variant::Full, false, true),
        ("model code-only", Variant::CodeOnly, true, true),
        ("model message-only", Variant::MessageOnly, true, true),
    ] {
        reports.push((name, gradcheck::model_report(variant, share, train)));
    }
    let checked: usize = reports.iter().map(|(_, r)| r.checked).sum();
    let worst = reports.iter().map(|(_, r)| r.max_rel).fold(0.0, f64::max);
    if let Some((name, r)) = reports.iter().find(|(_, r)| !r.passed()) {
        return Outcome::Fail(format!("{name}: {}", r.worst));
    }
    within(
        Duration::from_secs(60),
        started,
        format!("{checked} partials, max rel err {worst:.2e}"),
    )
}

fn conv_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut run = || -> Result<String, String> {
        for i in 0..100 {
            let f = rng.random_range(1..=16);
            let b = gradcheck::random_vec(&mut rng, f);
            if i % 2 == 0 {
                let (n, d) = (rng.random_range(1..=10), rng.random_range(1..=16));
                let k = rng.random_range(1..=n.min(3));
                let m = gradcheck::random_vec(&mut rng, n * d);
                let w = gradcheck::random_vec(&mut rng, f * k * d);
                let got = conv_text(
                    &Tensor::from_vec(&[n, d], m.clone()),
                    &Tensor::from_vec(&[f, k, d], w.clone()),
                    &Tensor::from_vec(&[f], b.clone()),
                );
                ensure(got.data == reference::conv_text_naive(&m, n, d, &w, f, k, &b), format!("text instance {i}"))?;
            } else {
                let (h, n, e) = (rng.random_range(1..=8), rng.random_range(1..=10), rng.random_range(1..=16));
                let k = rng.random_range(1..=h.min(3));
                let x = gradcheck::random_vec(&mut rng, h * n * e);
                let w = gradcheck::random_vec(&mut rng, f * k * n * e);
                let got = conv3d_hunks(
                    &Tensor::from_vec(&[h, n, e], x.clone()),
                    &Tensor::from_vec(&[f, k, n, e], w.clone()),
                    &Tensor::from_vec(&[f], b.clone()),
                );
                ensure(got.data == reference::conv3d_naive(&x, h, n, e, &w, f, k, &b), format!("hunk instance {i}"))?;
            }
        }
        Ok("100 instances bit-exact".into())
    };
    from_result(run(), Duration::from_secs(10), started)
}

fn train_accuracy(plant: Plant, seed: u64, wiring: Option<Ablation>) -> Result<(f64, usize), String> {
    let (variant, names) = match wiring {
        Some(a) => {
            let w = ablation_variant(a);
            (w.variant, w.function_names)
        }
        None => (Variant::Full, true),
    };
    let prepared = toy::prepare(&toy::toy_commits(plant, 32, seed), names, toy::toy_shape());
    let sizes = (prepared.vocabs.message.len(), prepared.vocabs.code.len());
    let (model, history) =
        train(&prepared.patches, &toy::toy_hp(), variant, sizes, &toy::toy_cfg(seed)).map_err(|e| e.to_string())?;
    Ok((toy::accuracy(&model, &prepared.patches), history.stopped_epoch))
}

fn learnability() -> Outcome {
    let mut details = Vec::new();
    for (name, plant, seed) in [("message", Plant::Message, 1), ("code", Plant::Code, 2)] {
        let started = Instant::now();
        let (acc, epochs) = match train_accuracy(plant, seed, None) {
            Ok(v) => v,
            Err(e) => return Outcome::Fail(e),
        };
        let took = started.elapsed();
        if acc < 0.95 || took > Duration::from_secs(300) {
            return Outcome::Fail(format!("{name} corpus: accuracy {acc:.3} after {epochs} epochs in {took:.1?}"));
        }
        details.push(format!("{name} {acc:.2} ({epochs} ep, {took:.1?})"));
    }
    let run = || -> Result<String, String> {
        let (full, _) = train_accuracy(Plant::Split, 3, None)?;
        let (c, _) = train_accuracy(Plant::Split, 3, Some(Ablation::C))?;
        let (m, _) = train_accuracy(Plant::Split, 3, Some(Ablation::M))?;
        ensure(full >= c && full >= m, format!("split corpus full {full:.3} < C {c:.3} or M {m:.3}"))?;
        Ok(format!("split full {full:.2} ≥ C {c:.2}, M {m:.2}"))
    };
    match run() {
        Ok(d) => {
            details.push(d);
            Outcome::Pass(details.join("; "))
        }
        Err(e) => Outcome::Fail(e),
    }
}

fn metric_oracles() -> Outcome {
    let started = Instant::now();
    let run = || -> Result<String, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut done = 0;
        while done < 1000 {
            let scores: Vec<f64> = (0..20).map(|_| rng.random_range(0..8) as f64 / 7.0).collect();
            let labels: Vec<bool> = (0..20).map(|_| rng.random_bool(0.5)).collect();
            if !labels.contains(&true) || !labels.contains(&false) {
                continue;
            }
            let a = auc_roc(&scores, &labels).map_err(|e| e.to_string())?;
            ensure(a == reference::auc_pairwise(&scores, &labels), format!("instance {done}"))?;
            done += 1;
        }
        let r = metrics(&[0.9, 0.6, 0.4, 0.3, 0.8], &[true, false, true, false, true], 0.5);
        ensure((r.tp, r.fp, r.tn, r.fn_) == (2, 1, 1, 1), "confusion counts")?;
        ensure(r.accuracy == 0.6 && r.precision == 2.0 / 3.0 && r.recall == 2.0 / 3.0, "closed forms")?;
        ensure((r.f1 - 2.0 / 3.0).abs() < 1e-15, "f1")?;
        Ok("1000 AUC instances exact; confusion closed forms hold".into())
    };
    from_result(run(), Duration::from_secs(10), started)
}

fn parser_fixtures() -> Outcome {
    let run = || -> Result<String, String> {
        let commits = example_patches();
        ensure(commits.len() == 3, "three fixtures")?;
        let expected = [(1, 1, 1), (1, 4, 3), (1, 4, 0)];
        for (c, (hunks, removed, added)) in commits.iter().zip(expected) {
            let files = parse_unified_diff(&c.diff_text).map_err(|e| e.to_string())?;
            ensure(files.len() == 1 && files[0].hunks.len() == hunks, format!("{} structure", c.commit_id))?;
            let h = &files[0].hunks[0];
            ensure(
                (h.removed.len(), h.added.len()) == (removed, added),
                format!("{} line counts {:?}", c.commit_id, (h.removed.len(), h.added.len())),
            )?;
            ensure(keyword_baseline(&c.message()) == Label::NonStable, format!("{} keyword baseline", c.commit_id))?;
        }
        let h = &parse_unified_diff(&commits[0].diff_text).unwrap()[0].hunks[0];
        ensure(h.removed[0].text.trim() == "return 1;", "removed line")?;
        ensure(h.added[0].text.trim() == "return err;", "added line")?;
        Ok("structures, placement and keyword labels as expected".into())
    };
    match run() {
        Ok(d) => Outcome::Pass(d),
        Err(e) => Outcome::Fail(e),
    }
}

fn line_kind_oracle() -> Outcome {
    let run = || -> Result<String, String> {
        let fixtures = line_kind_fixtures();
        ensure(fixtures.len() >= 30, "at least 30 snippets")?;
        for (title, src, expected) in &fixtures {
            let got: String = classify_line_kinds(src)
                .into_iter()
                .map(|k| match k {
                    LineKind::ErrorChecking => 'C',
                    LineKind::ErrorHandling => 'H',
                    LineKind::Normal => 'N',
                })
                .collect();
            let want: String = expected.iter().collect();
            let oracle: String = reference::line_kinds(src).into_iter().collect();
            ensure(got == oracle, format!("`{title}`: classifier {got}, reference {oracle}"))?;
            ensure(got == want, format!("`{title}`: classifier {got}, hand label {want}"))?;
        }
        let t = tokenize_patch(&example_patches()[0], &Default::default());
        let h = &t.files[0].hunks[0];
        ensure(h.added[0].iter().all(|tok| tok.ends_with("@hnd")), "example `return err;` not error handling")?;
        let src = "\t\tif (err)\n\t\t\treturn err;";
        ensure(
            classify_line_kinds(src) == [LineKind::ErrorChecking, LineKind::ErrorHandling],
            "example `if (err)` lines",
        )?;
        Ok(format!("{} snippets agree with reference and hand labels", fixtures.len()))
    };
    match run() {
        Ok(d) => Outcome::Pass(d),
        Err(e) => Outcome::Fail(e),
    }
}

fn shape_fuzz() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let shape = PatchShape::default();
    let mut warmup: Vec<_> = (0..50).map(|_| toy::random_commit(&mut rng)).collect();
    let table = patchnet::preprocess::build_function_table(&warmup);
    let tokenized: Vec<_> = warmup.iter().map(|c| tokenize_patch(c, &table)).collect();
    let vocabs = Vocabularies::from_training(&tokenized, table, 1);
    warmup.clear();
    let (mv, cv) = (vocabs.message.len() as u32, vocabs.code.len() as u32);
    for i in 0..10_000 {
        let c = toy::random_commit(&mut rng);
        let p = index_patch(&tokenize_patch(&c, &vocabs.functions), &vocabs, shape);
        let ok = p.message.len() == 512
            && p.removed.len() == 5 * 8 * 10 * 120
            && p.added.len() == 5 * 8 * 10 * 120
            && p.message.iter().all(|&x| x < mv)
            && p.removed.iter().chain(&p.added).all(|&x| x < cv);
        if !ok {
            return Outcome::Fail(format!("patch {i} has a malformed tensor"));
        }
    }
    Outcome::Pass(format!("10000 patches shaped (512) and (5,8,10,120) in {:.1?}", started.elapsed()))
}

fn split_protocol() -> Outcome {
    let run = || -> Result<String, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ids: Vec<String> = (0..1000).map(|_| toy::hex_id(&mut rng)).collect();
        let dates: Vec<i64> = (0..1000).map(|_| rng.random_range(1_100_000_000..1_500_000_000)).collect();
        let keys: Vec<(i64, &str)> = dates.iter().zip(&ids).map(|(&d, id)| (d, id.as_str())).collect();
        let folds = chrono_folds(&keys, 5);
        ensure(folds.len() == 5, "five folds")?;
        let mut seen = BTreeSet::new();
        for f in &folds {
            ensure(f.test.len() == 200, "equal sizes")?;
            ensure(f.train.len() + f.test.len() == 1000, "train is the complement")?;
            let test: BTreeSet<_> = f.test.iter().collect();
            ensure(f.train.iter().all(|i| !test.contains(i)), "train and test overlap")?;
            for &i in &f.test {
                ensure(seen.insert(i), "test sets overlap")?;
            }
        }
        ensure(seen.len() == 1000, "test sets not exhaustive")?;
        for w in folds.windows(2) {
            let last = w[0].test.iter().map(|&i| keys[i]).max().unwrap();
            let first = w[1].test.iter().map(|&i| keys[i]).min().unwrap();
            ensure(last < first, "test sets not date ordered")?;
        }
        Ok("5 disjoint, exhaustive, date-ordered test sets of 200".into())
    };
    match run() {
        Ok(d) => Outcome::Pass(d),
        Err(e) => Outcome::Fail(e),
    }
}

fn determinism_and_persistence() -> Outcome {
    let run = || -> Result<String, String> {
        let prepared = toy::prepare(&toy::toy_commits(Plant::Split, 24, 4), true, toy::toy_shape());
        let sizes = (prepared.vocabs.message.len(), prepared.vocabs.code.len());
        let cfg = TrainConfig {
            max_epochs: 6,
            patience: 6,
            ..toy::toy_cfg(13)
        };
        let go = || train(&prepared.patches, &toy::toy_hp(), Variant::Full, sizes, &cfg).map_err(|e| e.to_string());
        let (a, ha) = go()?;
        let (b, hb) = go()?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
        let (c, hc) = pool.install(go)?;
        ensure(a.params == b.params && a.params == c.params, "parameters differ between runs")?;
        ensure(ha.losses() == hb.losses() && ha.losses() == hc.losses(), "loss histories differ")?;

        let bytes = encode_checkpoint(&a, &prepared.vocabs).map_err(|e| e.to_string())?;
        let loaded = decode_checkpoint(&bytes).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut worst: f64 = 0.0;
        for p in &prepared.patches {
            worst = worst.max(score_gap(&a, &loaded.model, p));
        }
        for _ in 0..100 {
            let p = toy::random_patch(&mut rng, toy::toy_shape(), sizes, Label::Stable);
            worst = worst.max(score_gap(&a, &loaded.model, &p));
        }
        ensure(worst < 1e-6, format!("checkpoint changes scores by {worst:e}"))?;
        Ok(format!("bit-identical across runs and 1 thread; checkpoint score gap {worst:.1e}"))
    };
    match run() {
        Ok(d) => Outcome::Pass(d),
        Err(e) => Outcome::Fail(e),
    }
}

fn score_gap(a: &Model, b: &Model, p: &patchnet::preprocess::PreprocessedPatch) -> f64 {
    (a.predict(p, &mut Mode::Infer).z - b.predict(p, &mut Mode::Infer).z).abs()
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("full-corpus results", full_corpus),
        ("gradient oracle", gradient_oracle),
        ("convolution oracle", conv_oracle),
        ("toy-corpus learnability", learnability),
        ("metric oracles", metric_oracles),
        ("parser fixtures", parser_fixtures),
        ("line-kind oracle", line_kind_oracle),
        ("shape invariants", shape_fuzz),
        ("split protocol", split_protocol),
        ("determinism & persistence", determinism_and_persistence),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let started = Instant::now();
        let outcome = check();
        let took = started.elapsed();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Substituted(d) => ("SUBSTITUTED", d),
        };
        println!("{tag:<11} {name:<26} [{took:>8.2?}] {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
