use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{PromptSplit, RunConfig, SweepKind};
use super::plots;
use super::rundir::{RunManifest, RunWriter};
use crate::corpus::{
    class_weights, dataset_size, emotion_distribution, flip_counts, load_dataset, split_dataset,
    Dialogue, EmotionLabel, NUM_LABELS,
};
use crate::error::{Error, Result};
use crate::evalkit::{build_report, EvaluationReport};
use crate::model::{
    extract_features, fit_baseline, save_checkpoint, write_features_csv, ClassifierHead, EncoderAdapter,
};
use crate::promptlab::{
    classify_via_prompt, write_transcript, CompletionClient, HttpCompletionClient, ReplayClient,
};
use crate::textprep::{encode_batch, sweep_max_length, token_length_histogram, TokenizerAdapter, TruncationPolicy};
use crate::training::{epoch_sweep, evaluate, train_staged, LabeledBatch, TrainingData};

/// Where a command wrote its artifacts, plus the manifest it left there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
}

fn with_run<F>(out: &Path, command: &str, config: &RunConfig, body: F) -> Result<RunOutcome>
where
    F: FnOnce(&mut RunWriter) -> Result<()>,
{
    let mut writer = RunWriter::create(out, command, config)?;
    match body(&mut writer) {
        Ok(()) => Ok(RunOutcome {
            run_dir: out.to_path_buf(),
            manifest: writer.finish(None)?,
        }),
        Err(e) => {
            if let Err(m) = writer.finish(Some(&e)) {
                log::error!("could not write failure manifest: {m}");
            }
            Err(e)
        }
    }
}

fn load_all(config: &RunConfig, expect_labels: bool) -> Result<Vec<Dialogue>> {
    if config.data.paths.is_empty() {
        return Err(Error::Config("data.paths lists no dataset files".into()));
    }
    let mut all = Vec::new();
    for p in &config.data.paths {
        all.extend(load_dataset(p, expect_labels)?);
    }
    Ok(all)
}

fn labeled_batch(
    dialogues: &[Dialogue],
    tokenizer: &dyn TokenizerAdapter,
    policy: TruncationPolicy,
) -> Result<LabeledBatch> {
    let mut texts = Vec::new();
    let mut labels = Vec::new();
    for d in dialogues {
        labels.extend(d.labels()?);
        texts.extend(d.utterances.iter().map(|u| u.text.as_str()));
    }
    LabeledBatch::new(encode_batch(&texts, tokenizer, policy)?, labels)
}

fn label_table(values: &[f64; NUM_LABELS], column: &str) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["label", column])?;
    for l in EmotionLabel::ALL {
        out.write_record([l.to_string(), values[l.index()].to_string()])?;
    }
    out.into_inner().map_err(|e| Error::Serialize(e.to_string()))
}

fn write_report(w: &mut RunWriter, prefix: &str, report: &EvaluationReport) -> Result<()> {
    w.write_json(&format!("{prefix}report.json"), report)?;
    w.write_with(&format!("{prefix}report_per_class.csv"), |b| report.write_csv(b))
}

#[derive(Debug, Serialize)]
struct StatsSummary {
    dialogues: usize,
    utterances: usize,
    labeled: bool,
    distribution: Option<BTreeMap<String, usize>>,
    ranked_emotions: Vec<String>,
    top_flips: Vec<(String, String, usize)>,
    length_total: usize,
    length_max: Option<usize>,
    fraction_longer_than_30: f64,
}

/// Label distribution, emotion flips and utterance lengths.
pub fn cmd_stats(config: &RunConfig, out: &Path) -> Result<RunOutcome> {
    with_run(out, "stats", config, |w| {
        let dialogues = load_all(config, false)?;
        let size = dataset_size(&dialogues);
        w.metric("dialogues", size.dialogues as f64);
        w.metric("utterances", size.utterances as f64);
        if dialogues.is_empty() {
            w.warn("dataset is empty; reports are empty");
        }
        let labeled = dialogues.iter().all(Dialogue::is_labeled);
        let mut summary = StatsSummary {
            dialogues: size.dialogues,
            utterances: size.utterances,
            labeled,
            distribution: None,
            ranked_emotions: Vec::new(),
            top_flips: Vec::new(),
            length_total: 0,
            length_max: None,
            fraction_longer_than_30: 0.0,
        };
        if labeled {
            let dist = emotion_distribution(&dialogues)?;
            let values: [f64; NUM_LABELS] = std::array::from_fn(|i| dist.0[i] as f64);
            w.write("emotion_distribution.csv", &label_table(&values, "count")?)?;
            w.write("emotion_distribution.png", &plots::bar_chart(&values)?)?;
            summary.distribution = Some(
                EmotionLabel::ALL
                    .iter()
                    .map(|l| (l.to_string(), dist[*l]))
                    .collect(),
            );
            summary.ranked_emotions = dist.ranked().into_iter().map(|(l, _)| l.to_string()).collect();

            let flips = flip_counts(&dialogues, config.stats.flip_scope)?;
            let mut csv_out = csv::Writer::from_writer(Vec::new());
            csv_out.write_record(["from", "to", "count"])?;
            for ((from, to), n) in &flips {
                csv_out.write_record([from.to_string(), to.to_string(), n.to_string()])?;
            }
            w.write("flip_counts.csv", &csv_out.into_inner().map_err(|e| Error::Serialize(e.to_string()))?)?;
            let grid: Vec<Vec<f64>> = EmotionLabel::ALL
                .iter()
                .map(|&f| {
                    EmotionLabel::ALL
                        .iter()
                        .map(|&t| *flips.get(&(f, t)).unwrap_or(&0) as f64)
                        .collect()
                })
                .collect();
            w.write("flip_counts.png", &plots::heatmap(&grid)?)?;
            let mut ranked: Vec<_> = flips.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            summary.top_flips = ranked
                .into_iter()
                .take(10)
                .map(|((f, t), n)| (f.to_string(), t.to_string(), n))
                .collect();
        } else {
            w.warn("some utterances carry no emotion label; distribution and flip statistics skipped");
        }

        let tokenizer = config.tokenizer()?;
        let texts: Vec<&str> = dialogues
            .iter()
            .flat_map(|d| d.utterances.iter().map(|u| u.text.as_str()))
            .collect();
        let hist = token_length_histogram(&texts, tokenizer.as_ref());
        w.write_with("length_histogram.csv", |b| hist.write_csv(b))?;
        let max = hist.bins.keys().next_back().copied();
        let bars: Vec<f64> = (0..=max.unwrap_or(0))
            .map(|len| *hist.bins.get(&len).unwrap_or(&0) as f64)
            .collect();
        w.write("length_histogram.png", &plots::bar_chart(&bars)?)?;
        summary.length_total = hist.total;
        summary.length_max = max;
        summary.fraction_longer_than_30 = hist.fraction_above(30);
        w.write_json("summary.json", &summary)
    })
}

#[derive(Debug, Serialize)]
struct SplitIds<'a> {
    seed: u64,
    train: Vec<&'a str>,
    validation: Vec<&'a str>,
    test: Vec<&'a str>,
}

struct Prepared {
    train: LabeledBatch,
    validation: LabeledBatch,
    test: LabeledBatch,
    weights: [f64; NUM_LABELS],
}

fn ids(part: &[Dialogue]) -> Vec<&str> {
    part.iter().map(|d| d.id.as_str()).collect()
}

fn prepare(config: &RunConfig, w: Option<&mut RunWriter>, policy: TruncationPolicy) -> Result<Prepared> {
    let dialogues = load_all(config, config.data.expect_labels)?;
    let seed = config.data.split_seed.unwrap_or(config.seed);
    let split = split_dataset(&dialogues, config.data.fractions, seed)?;
    if let Some(w) = w {
        let split_ids = SplitIds {
            seed,
            train: ids(&split.train),
            validation: ids(&split.validation),
            test: ids(&split.test),
        };
        w.write_json("split.json", &split_ids)?;
    }
    let tokenizer = config.tokenizer()?;
    let train = labeled_batch(&split.train, tokenizer.as_ref(), policy)?;
    if train.is_empty() {
        return Err(Error::Config("training split holds no utterances".into()));
    }
    let counts = emotion_distribution(&split.train)?;
    let weights = if config.training.class_weights {
        class_weights(&counts)?
    } else {
        [1.0; NUM_LABELS]
    };
    Ok(Prepared {
        validation: labeled_batch(&split.validation, tokenizer.as_ref(), policy)?,
        test: labeled_batch(&split.test, tokenizer.as_ref(), policy)?,
        train,
        weights,
    })
}

fn fresh_model(config: &RunConfig) -> Result<(Box<dyn EncoderAdapter>, ClassifierHead)> {
    let encoder = config.encoder()?;
    let head = ClassifierHead::new(
        encoder.hidden_dim(),
        config.head,
        config.training.head_seed.unwrap_or(config.seed.wrapping_add(1)),
    )?;
    Ok((encoder, head))
}

fn non_empty(b: &LabeledBatch) -> Option<&LabeledBatch> {
    (!b.is_empty()).then_some(b)
}

/// Split, encode, train in two stages and evaluate on the held-out split.
pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<RunOutcome> {
    with_run(out, "train", config, |w| {
        let data = prepare(config, Some(w), config.policy())?;
        w.write_json("class_weights.json", &data.weights)?;
        let (mut encoder, mut head) = fresh_model(config)?;

        if !config.baselines.is_empty() {
            run_baselines(config, w, encoder.as_ref(), &data)?;
        }

        let training = TrainingData {
            train: data.train.clone(),
            validation: non_empty(&data.validation).cloned(),
        };
        let history = train_staged(encoder.as_mut(), &mut head, &training, &config.training.schedule, &data.weights)?;
        w.write_with("history.csv", |b| history.write_csv(b))?;
        w.write_json("history.json", &history)?;
        if history.clamped > 0 {
            w.warn(format!("{} gold probabilities were clamped in the loss", history.clamped));
        }

        save_checkpoint(&w.root().join("checkpoint"), &head, encoder.as_ref())?;
        w.adopt("checkpoint/manifest.json")?;
        w.adopt("checkpoint/params.bin")?;

        let train_report = evaluate(encoder.as_ref(), &head, &data.train)?;
        w.metric("train_macro_f1", train_report.macro_f1);
        let mut splits = BTreeMap::new();
        splits.insert("train", train_report);
        if let Some(v) = non_empty(&data.validation) {
            let r = evaluate(encoder.as_ref(), &head, v)?;
            w.metric("val_macro_f1", r.macro_f1);
            splits.insert("validation", r);
        }
        let held_out = match non_empty(&data.test) {
            Some(t) => Some(evaluate(encoder.as_ref(), &head, t)?),
            None => {
                w.warn("test split is empty; no held-out report");
                None
            }
        };
        if let Some(r) = held_out {
            w.metric("test_macro_f1", r.macro_f1);
            w.metric("test_weighted_f1", r.weighted_f1);
            write_report(w, "", &r)?;
            splits.insert("test", r);
        }
        w.write_json("evaluation.json", &splits)
    })
}

fn run_baselines(config: &RunConfig, w: &mut RunWriter, encoder: &dyn EncoderAdapter, data: &Prepared) -> Result<()> {
    let layer = config.encoder.feature_layer;
    let train_x = extract_features(&data.train.batch, encoder, layer)?;
    if config.export_features {
        w.write_with("features_train.csv", |b| write_features_csv(b, &train_x, Some(&data.train.labels)))?;
    }
    let eval = non_empty(&data.test).unwrap_or(&data.train);
    let eval_x = extract_features(&eval.batch, encoder, layer)?;
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["classifier", "macro_f1", "weighted_f1", "error"])?;
    for kind in &config.baselines {
        let name = serde_json::to_string(kind)?;
        let row = fit_baseline(*kind, &train_x, &data.train.labels, config.seed)
            .and_then(|m| m.predict(&eval_x))
            .and_then(|p| build_report(&p, &eval.labels));
        match row {
            Ok(r) => table.write_record([name, r.macro_f1.to_string(), r.weighted_f1.to_string(), String::new()])?,
            Err(e) => table.write_record([name, String::new(), String::new(), e.to_string()])?,
        }
    }
    w.write("baselines.csv", &table.into_inner().map_err(|e| Error::Serialize(e.to_string()))?)
}

/// Max-length or epoch-grid sweep; one row per cell, best flagged.
pub fn cmd_sweep(config: &RunConfig, kind: SweepKind, out: &Path) -> Result<RunOutcome> {
    with_run(out, "sweep", config, |w| match kind {
        SweepKind::MaxLength => sweep_lengths(config, w),
        SweepKind::Epochs => sweep_epochs(config, w),
    })
}

fn sweep_lengths(config: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let mut histories = Vec::new();
    let sweep = sweep_max_length(&config.sweep.max_lengths, |max_len| {
        let data = prepare(config, None, TruncationPolicy::new(max_len)?)?;
        let validation = non_empty(&data.validation)
            .cloned()
            .ok_or_else(|| Error::Config("length sweep needs a non-empty validation split".into()))?;
        let (mut encoder, mut head) = fresh_model(config)?;
        let training = TrainingData {
            train: data.train,
            validation: Some(validation.clone()),
        };
        let history = train_staged(encoder.as_mut(), &mut head, &training, &config.training.schedule, &data.weights)?;
        histories.push((max_len, history));
        Ok(evaluate(encoder.as_ref(), &head, &validation)?.macro_f1)
    })?;
    for (i, (max_len, h)) in histories.iter().enumerate() {
        w.write_with(&format!("cells/{i:02}_max_len-{max_len}/history.csv"), |b| h.write_csv(b))?;
    }
    w.write_with("length_sweep.csv", |b| sweep.write_csv(b))?;
    w.write_json("length_sweep.json", &sweep)?;
    let scores: Vec<f64> = sweep.rows.iter().map(|r| r.score.unwrap_or(0.0)).collect();
    w.write("length_sweep.png", &plots::bar_chart(&scores)?)?;
    if let Some(best) = sweep.best {
        w.metric("best_max_len", best as f64);
    }
    Ok(())
}

fn sweep_epochs(config: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let data = prepare(config, Some(w), config.policy())?;
    let training = TrainingData {
        train: data.train.clone(),
        validation: non_empty(&data.validation).cloned(),
    };
    let factory = || fresh_model(config);
    let sweep = epoch_sweep(
        &config.sweep.epochs,
        &config.training.schedule,
        &factory,
        &training,
        non_empty(&data.test),
        &data.weights,
        config.sweep.workers,
    )?;
    for (i, row) in sweep.rows.iter().enumerate() {
        if let Some(h) = &row.history {
            let rel = format!("cells/{i:02}_k1-{}_k2-{}/history.csv", row.frozen_epochs, row.finetune_epochs);
            w.write_with(&rel, |b| h.write_csv(b))?;
        }
    }
    w.write_with("epoch_sweep.csv", |b| sweep.write_csv(b))?;
    w.write_json("epoch_sweep.json", &sweep)?;
    if let Some(best) = sweep.best {
        let row = &sweep.rows[best];
        w.metric("best_frozen_epochs", row.frozen_epochs as f64);
        w.metric("best_finetune_epochs", row.finetune_epochs as f64);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PromptSummary {
    mode: crate::promptlab::PromptMode,
    delimiters: crate::promptlab::Delimiters,
    source: String,
    items: usize,
    invalid: usize,
    failed: usize,
    invalid_rate: f64,
    failure_rate: f64,
}

/// Prompt-based classification against the configured endpoint, or
/// re-scored from a saved transcript when `replay` is given.
pub fn cmd_prompt_eval(config: &RunConfig, out: &Path, replay: Option<&Path>) -> Result<RunOutcome> {
    let (client, source): (Box<dyn CompletionClient>, String) = match replay {
        Some(path) => (Box::new(ReplayClient::from_file(path)?), format!("replay:{}", path.display())),
        None if !config.prompt.endpoint.address.is_empty() => (
            Box::new(HttpCompletionClient::new(config.prompt.endpoint.clone())?),
            config.prompt.endpoint.address.clone(),
        ),
        None => {
            return Err(Error::Config(
                "no completion endpoint configured; set prompt.endpoint.address or pass --replay <transcript>".into(),
            ))
        }
    };
    cmd_prompt_eval_with(config, out, client.as_ref(), &source)
}

/// [`cmd_prompt_eval`] with an explicit client.
pub fn cmd_prompt_eval_with(
    config: &RunConfig,
    out: &Path,
    client: &dyn CompletionClient,
    source: &str,
) -> Result<RunOutcome> {
    with_run(out, "prompt-eval", config, |w| {
        let dialogues = load_all(config, false)?;
        let items = match config.prompt.split {
            PromptSplit::All => dialogues,
            PromptSplit::Test => {
                let seed = config.data.split_seed.unwrap_or(config.seed);
                split_dataset(&dialogues, config.data.fractions, seed)?.test
            }
        };
        let sentences: Vec<&str> = items
            .iter()
            .flat_map(|d| d.utterances.iter().map(|u| u.text.as_str()))
            .collect();
        let golds: Option<Vec<EmotionLabel>> = items
            .iter()
            .flat_map(|d| d.utterances.iter().map(|u| u.emotion))
            .collect();
        let exemplars = config.prompt.exemplar_set()?;
        let run = classify_via_prompt(client, &sentences, &config.prompt.settings(), exemplars.as_ref())
            .map_err(|e| match e {
                Error::Aborted(m) => Error::Aborted(format!(
                    "{m}; check prompt.endpoint.address or rerun with --replay <transcript>"
                )),
                other => other,
            })?;
        w.write_with("transcript.jsonl", |b| write_transcript(b, &run.transcript))?;

        let mut table = csv::Writer::from_writer(Vec::new());
        table.write_record(["index", "gold", "pred", "valid", "failed"])?;
        for (i, (entry, pred)) in run.transcript.iter().zip(&run.labels).enumerate() {
            let valid = entry
                .completion
                .as_deref()
                .map(|c| crate::promptlab::parse_answer(c).valid)
                .unwrap_or(false);
            table.write_record([
                i.to_string(),
                golds.as_ref().map(|g| g[i].to_string()).unwrap_or_default(),
                pred.to_string(),
                valid.to_string(),
                entry.completion.is_none().to_string(),
            ])?;
        }
        w.write("predictions.csv", &table.into_inner().map_err(|e| Error::Serialize(e.to_string()))?)?;
        w.write_json(
            "prompt_summary.json",
            &PromptSummary {
                mode: config.prompt.mode,
                delimiters: config.prompt.delimiters,
                source: source.to_string(),
                items: run.labels.len(),
                invalid: run.invalid,
                failed: run.failed,
                invalid_rate: run.invalid_rate,
                failure_rate: run.failure_rate,
            },
        )?;
        w.metric("invalid_rate", run.invalid_rate);
        w.metric("failure_rate", run.failure_rate);
        match golds {
            Some(g) if !g.is_empty() => {
                let report = build_report(&run.labels, &g)?;
                w.metric("test_macro_f1", report.macro_f1);
                w.metric("test_weighted_f1", report.weighted_f1);
                write_report(w, "", &report)
            }
            _ => {
                w.warn("no gold labels; predictions written without a report");
                Ok(())
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub name: String,
    pub run_dir: PathBuf,
    pub train: Option<f64>,
    pub validation: Option<f64>,
    pub test: f64,
    pub test_weighted: f64,
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Figures for every run plus one comparison table sorted by test macro-F1.
pub fn cmd_report(config: &RunConfig, runs: &[PathBuf], out: &Path) -> Result<RunOutcome> {
    let runs: Vec<PathBuf> = if runs.is_empty() {
        config.report.runs.clone()
    } else {
        runs.to_vec()
    };
    if runs.is_empty() {
        return Err(Error::Config("no run directories given to report on".into()));
    }
    with_run(out, "report", config, |w| {
        let mut rows = Vec::new();
        for (i, dir) in runs.iter().enumerate() {
            let report_path = dir.join("report.json");
            let text = std::fs::read_to_string(&report_path)
                .map_err(|_| Error::Validation(format!("{} holds no report.json", dir.display())))?;
            let report: EvaluationReport = serde_json::from_str(&text)?;
            let manifest = RunManifest::load(dir).ok();
            let base = match &manifest {
                Some(m) => m.config.display_name(),
                None => dir.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            };
            let stem = format!("{i:02}_{}", file_stem(&base));
            let name = match &manifest {
                Some(m) => format!("{base} ({})", m.command),
                None => base,
            };
            let confusion: Vec<Vec<f64>> = report.confusion.iter().map(|r| r.to_vec()).collect();
            w.write(&format!("figures/{stem}_confusion.png"), &plots::heatmap(&confusion)?)?;
            w.write(
                &format!("figures/{stem}_per_emotion_accuracy.png"),
                &plots::bar_chart(&report.per_emotion_accuracy)?,
            )?;
            let mut cm = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["gold".to_string()];
            header.extend(EmotionLabel::ALL.iter().map(|l| l.to_string()));
            cm.write_record(&header)?;
            for l in EmotionLabel::ALL {
                let mut rec = vec![l.to_string()];
                rec.extend(report.confusion[l.index()].iter().map(|v| v.to_string()));
                cm.write_record(&rec)?;
            }
            w.write(
                &format!("figures/{stem}_confusion.csv"),
                &cm.into_inner().map_err(|e| Error::Serialize(e.to_string()))?,
            )?;
            let metric = |k: &str| manifest.as_ref().and_then(|m| m.metrics.get(k).copied());
            rows.push(ResultRow {
                name,
                run_dir: dir.clone(),
                train: metric("train_macro_f1"),
                validation: metric("val_macro_f1"),
                test: report.macro_f1,
                test_weighted: report.weighted_f1,
            });
        }
        rows.sort_by(|a, b| b.test.total_cmp(&a.test));

        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let mut table = csv::Writer::from_writer(Vec::new());
        table.write_record(["model", "train", "validation", "test", "test_weighted"])?;
        let mut md = String::from("| Model | Train | Validation | Test | Test (weighted) |\n|---|---|---|---|---|\n");
        for r in &rows {
            table.write_record([
                r.name.clone(),
                opt(r.train),
                opt(r.validation),
                format!("{:.4}", r.test),
                format!("{:.4}", r.test_weighted),
            ])?;
            let _ = writeln!(
                md,
                "| {} | {} | {} | {:.4} | {:.4} |",
                r.name,
                opt(r.train),
                opt(r.validation),
                r.test,
                r.test_weighted
            );
        }
        w.write("results.csv", &table.into_inner().map_err(|e| Error::Serialize(e.to_string()))?)?;
        w.write("results.md", md.as_bytes())?;
        w.write_json("results.json", &rows)
    })
}
