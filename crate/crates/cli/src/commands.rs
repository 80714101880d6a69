use crate::config::Settings;
use crate::manifest::{now, RunManifest};
use crate::{Cli, Command, Sources, UsageError};
use anyhow::{bail, Context, Result};
use patchnet::eval::{chrono_folds, keyword_baseline, metrics, pr_curve, summarize, EvalReport, Summary};
use patchnet::ingest::{
    build_balanced_dataset, extract_stable_evidence, label_eligible, parse_rc_ids, read_commits,
    write_commit_jsonl,
};
use patchnet::model::{Mode, Model, Variant};
use patchnet::preprocess::{assemble_tensors, build_function_table, tokenize_patch, FunctionNameTable};
use patchnet::trainer::{load_checkpoint, read_tensors, save_checkpoint, train_model, write_tensors, TENSORS_MAGIC};
use patchnet::vocab::{VocabFile, Vocabularies};
use patchnet::{Label, RawCommit};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// One line of a score file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreLine {
    pub commit_id: String,
    pub score: f64,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Label>,
}

struct Run {
    command: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started_at: f64,
}

impl Run {
    fn finish(self) -> Result<()> {
        RunManifest {
            command: self.command.to_string(),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at,
            finished_at: now(),
        }
        .write()
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_commits(path: &Path) -> Result<Vec<RawCommit>> {
    read_commits(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn write_scores(path: &Path, mut lines: Vec<ScoreLine>) -> Result<()> {
    lines.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.commit_id.cmp(&b.commit_id)));
    let mut out = String::new();
    for l in &lines {
        out.push_str(&serde_json::to_string(l)?);
        out.push('\n');
    }
    write_text(path, &out)
}

fn read_scores(path: &Path) -> Result<Vec<ScoreLine>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn load_vocabs(path: &Path) -> Result<Vocabularies> {
    let file: VocabFile =
        serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Vocabularies::from_file(file))
}

pub fn run(cli: Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.resolve_seed(cli.seed)?;
    let mut run = Run {
        command: "",
        config: serde_json::to_value(&settings)?,
        seed: None,
        inputs: cli.config.iter().cloned().collect(),
        outputs: Vec::new(),
        started_at: now(),
    };
    match cli.command {
        Command::Ingest { sources, out } => {
            run.command = "ingest";
            run.seed = Some(seed);
            let labeled = label(&sources, &mut run)?;
            let dataset = build_balanced_dataset(&labeled, seed);
            for w in &dataset.provenance.warnings {
                eprintln!("warning: {w}");
            }
            let stable = dataset.items.iter().filter(|(_, l)| l.is_stable()).count();
            eprintln!("{} commits ({stable} stable) of {} eligible", dataset.len(), labeled.len());
            write_text(&out, &write_commit_jsonl(&dataset.into_commits())?)?;
            run.outputs.push(out);
        }
        Command::Label { sources, out } => {
            run.command = "label";
            let labeled = label(&sources, &mut run)?;
            let commits: Vec<RawCommit> = labeled
                .into_iter()
                .map(|(mut c, l)| {
                    c.label = Some(l);
                    c
                })
                .collect();
            write_text(&out, &write_commit_jsonl(&commits)?)?;
            run.outputs.push(out);
        }
        Command::Preprocess {
            dataset,
            out,
            vocab_out,
            vocab,
            no_function_names,
        } => {
            run.command = "preprocess";
            let commits = load_commits(&dataset)?;
            run.inputs.push(dataset);
            let shape = settings.hyperparams.shape();
            let vocabs = match vocab {
                Some(path) => {
                    let v = load_vocabs(&path)?;
                    run.inputs.push(path);
                    v
                }
                None => {
                    let table = if no_function_names || !settings.function_names {
                        FunctionNameTable::empty()
                    } else {
                        build_function_table(&commits)
                    };
                    let tokenized: Vec<_> = commits.iter().map(|c| tokenize_patch(c, &table)).collect();
                    let v = Vocabularies::from_training(&tokenized, table, settings.min_count);
                    let path = vocab_out.expect("clap requires --vocab-out without --vocab");
                    write_json(&path, &v.to_file())?;
                    run.outputs.push(path);
                    v
                }
            };
            let patches: Vec<_> = commits.iter().map(|c| assemble_tensors(c, &vocabs, shape)).collect();
            eprintln!(
                "{} patches; vocabularies {} message / {} code",
                patches.len(),
                vocabs.message.len(),
                vocabs.code.len()
            );
            write_tensors(&out, shape, &patches)?;
            run.outputs.insert(0, out);
        }
        Command::Train {
            tensors,
            vocab,
            out,
            variant,
            epochs,
            batch_size,
            patience,
            lr,
            history,
        } => {
            run.command = "train";
            run.seed = Some(seed);
            let variant: Variant = serde_json::from_value(serde_json::Value::String(variant.clone()))
                .map_err(|_| UsageError(format!("unknown variant `{variant}`")))?;
            let mut cfg = settings.train.clone();
            cfg.seed = seed;
            cfg.max_epochs = epochs.unwrap_or(cfg.max_epochs);
            cfg.batch_size = batch_size.unwrap_or(cfg.batch_size);
            cfg.patience = patience.unwrap_or(cfg.patience).min(cfg.max_epochs);
            cfg.learning_rate = lr.unwrap_or(cfg.learning_rate);
            let (shape, data) = read_tensors(&tensors).with_context(|| format!("reading {}", tensors.display()))?;
            let vocabs = load_vocabs(&vocab)?;
            run.inputs.extend([tensors, vocab]);
            let hp = settings.hyperparams.clone().with_shape(shape);
            let model = Model::initialized(hp, variant, vocabs.message.len(), vocabs.code.len(), seed)?;
            let (model, hist) = train_model(model, &data, &cfg, |e| {
                eprintln!("epoch {:>3}  loss {:.6}  {:.1}s", e.epoch, e.mean_loss, e.wall_seconds)
            })?;
            eprintln!("best epoch {} of {}", hist.best_epoch, hist.stopped_epoch);
            save_checkpoint(&model, &vocabs, &out)?;
            run.outputs.push(out);
            if let Some(path) = history {
                write_json(&path, &hist)?;
                run.outputs.push(path);
            }
            run.config["train"] = serde_json::to_value(&cfg)?;
            run.config["variant"] = serde_json::to_value(variant)?;
        }
        Command::Predict {
            checkpoint,
            input,
            out,
            threshold,
        } => {
            run.command = "predict";
            let ck = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let threshold = threshold.unwrap_or(ck.model.hp.threshold);
            let shape = ck.model.hp.shape();
            let bytes = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let patches = if bytes.starts_with(TENSORS_MAGIC) {
                let (s, p) = patchnet::trainer::decode_tensors(&bytes)?;
                if s != shape {
                    bail!("tensor shape {s:?} does not match the checkpoint's {shape:?}");
                }
                p
            } else {
                let text = String::from_utf8(bytes).context("input is neither tensors nor UTF-8 commits")?;
                read_commits(&text)?
                    .iter()
                    .map(|c| assemble_tensors(c, &ck.vocabs, shape))
                    .collect()
            };
            let lines = patches
                .iter()
                .map(|p| {
                    let z = ck.model.predict(p, &mut Mode::Infer).z;
                    ScoreLine {
                        commit_id: p.commit_id.clone(),
                        score: z,
                        label: Label::from_bool(z >= threshold),
                        truth: p.label,
                    }
                })
                .collect();
            write_scores(&out, lines)?;
            run.inputs.extend([checkpoint, input]);
            run.outputs.push(out);
            run.config["threshold"] = threshold.into();
        }
        Command::Evaluate {
            scores,
            report,
            pr_csv,
            threshold,
        } => {
            run.command = "evaluate";
            if pr_csv.is_some() && scores.len() > 1 {
                return Err(UsageError("--pr-csv needs exactly one --scores file".into()).into());
            }
            let mut reports = Vec::new();
            for path in &scores {
                let lines = read_scores(path)?;
                let (s, y) = truths(&lines, path)?;
                let r = metrics(&s, &y, threshold);
                eprintln!(
                    "{}: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} auc {}",
                    path.display(),
                    r.accuracy,
                    r.precision,
                    r.recall,
                    r.f1,
                    r.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"))
                );
                if let Some(csv) = &pr_csv {
                    let points = pr_curve(&s, &y).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
                    let mut text = String::from("recall,precision\n");
                    for (r, p) in points {
                        text.push_str(&format!("{r},{p}\n"));
                    }
                    write_text(csv, &text)?;
                }
                reports.push(r);
            }
            if let [single] = reports.as_slice() {
                write_json(&report, single)?;
            } else {
                write_json(&report, &MultiReport::new(&scores, reports))?;
            }
            run.inputs.extend(scores);
            run.outputs.push(report);
            run.outputs.extend(pr_csv);
            run.config["threshold"] = threshold.into();
        }
        Command::Baseline { dataset, out } => {
            run.command = "baseline";
            let lines = load_commits(&dataset)?
                .into_iter()
                .map(|c| {
                    let label = keyword_baseline(&c.message());
                    ScoreLine {
                        commit_id: c.commit_id,
                        score: label.target(),
                        label,
                        truth: c.label,
                    }
                })
                .collect();
            write_scores(&out, lines)?;
            run.inputs.push(dataset);
            run.outputs.push(out);
        }
        Command::Folds {
            dataset,
            n,
            out_dir,
            materialize,
        } => {
            run.command = "folds";
            if n == 0 {
                return Err(UsageError("--n must be positive".into()).into());
            }
            let commits = load_commits(&dataset)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let keys: Vec<(i64, &str)> = commits.iter().map(|c| (c.date, c.commit_id.as_str())).collect();
            for fold in chrono_folds(&keys, n) {
                let ids = |ix: &[usize]| ix.iter().map(|&i| commits[i].commit_id.clone()).collect::<Vec<_>>();
                let path = out_dir.join(format!("fold-{}.json", fold.fold));
                write_json(
                    &path,
                    &serde_json::json!({ "fold": fold.fold, "train": ids(&fold.train), "test": ids(&fold.test) }),
                )?;
                run.outputs.push(path);
                if materialize {
                    for (part, ix) in [("train", &fold.train), ("test", &fold.test)] {
                        let subset: Vec<RawCommit> = ix.iter().map(|&i| commits[i].clone()).collect();
                        let path = out_dir.join(format!("fold-{}.{part}.jsonl", fold.fold));
                        write_text(&path, &write_commit_jsonl(&subset)?)?;
                        run.outputs.push(path);
                    }
                }
            }
            run.inputs.push(dataset);
            run.outputs.insert(0, out_dir);
            run.config["n"] = n.into();
        }
    }
    run.finish()
}

fn label(sources: &Sources, run: &mut Run) -> Result<Vec<(RawCommit, Label)>> {
    let mainline = load_commits(&sources.mainline)?;
    let stable = load_commits(&sources.stable)?;
    let rc_ids = match &sources.rc_ids {
        Some(path) => parse_rc_ids(&read_text(path)?),
        None => Default::default(),
    };
    run.inputs.extend([sources.mainline.clone(), sources.stable.clone()]);
    run.inputs.extend(sources.rc_ids.clone());
    let ev = extract_stable_evidence(&stable, &rc_ids);
    Ok(label_eligible(&mainline, &ev))
}

fn truths(lines: &[ScoreLine], path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut s = Vec::with_capacity(lines.len());
    let mut y = Vec::with_capacity(lines.len());
    for l in lines {
        let truth = l
            .truth
            .with_context(|| format!("{}: {} has no ground-truth label", path.display(), l.commit_id))?;
        s.push(l.score);
        y.push(truth.is_stable());
    }
    Ok((s, y))
}

#[derive(Serialize)]
struct RunReport<'a> {
    scores: &'a Path,
    report: EvalReport,
}

#[derive(Serialize)]
struct MultiReport<'a> {
    runs: Vec<RunReport<'a>>,
    accuracy: Summary,
    precision: Summary,
    recall: Summary,
    f1: Summary,
    /// Over the runs where AUC is defined.
    auc: Summary,
}

impl<'a> MultiReport<'a> {
    fn new(paths: &'a [PathBuf], reports: Vec<EvalReport>) -> Self {
        let col = |f: fn(&EvalReport) -> f64| summarize(&reports.iter().map(f).collect::<Vec<_>>());
        let auc: Vec<f64> = reports.iter().filter_map(|r| r.auc).collect();
        MultiReport {
            accuracy: col(|r| r.accuracy),
            precision: col(|r| r.precision),
            recall: col(|r| r.recall),
            f1: col(|r| r.f1),
            auc: summarize(&auc),
            runs: paths
                .iter()
                .zip(reports)
                .map(|(p, report)| RunReport { scores: p, report })
                .collect(),
        }
    }
}
