use std::fs;
use std::path::{Path, PathBuf};

use ediref_core::corpus::{dataset_to_json, save_dataset, synthetic, EmotionLabel};
use ediref_core::model::load_head;
use ediref_core::pipeline::{
    cmd_prompt_eval, cmd_prompt_eval_with, cmd_report, cmd_stats, cmd_sweep, cmd_train, list_files, RunConfig,
    RunManifest, RunStatus, SweepKind, MANIFEST,
};
use ediref_core::promptlab::{Exemplar, PromptMode};
use ediref_core::{Error, ErrorKind, Result};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn toy_config(dataset: &Path) -> RunConfig {
    let mut c = RunConfig::from_toml_str(&fs::read_to_string(configs_dir().join("toy.toml")).unwrap()).unwrap();
    c.data.paths = vec![dataset.to_path_buf()];
    c.resolve().unwrap()
}

fn dataset(dir: &Path) -> PathBuf {
    let path = dir.join("dialogues.json");
    save_dataset(&path, &synthetic::corpus(40, 5)).unwrap();
    path
}

/// Answers with the emotion whose keyword appears first in the target
/// sentence, in a few different surface forms.
fn scripted(prompt: &str) -> Result<String> {
    let start = prompt.rfind("following sentence: ").unwrap() + "following sentence: ".len();
    let sentence = &prompt[start..start + prompt[start..].find(". ").unwrap()];
    let hit = sentence
        .split_whitespace()
        .find_map(|w| EmotionLabel::ALL.iter().find(|l| w.starts_with(&l.as_str()[..3])));
    Ok(match hit {
        Some(l) if sentence.len().is_multiple_of(3) => format!("The emotion is {l}."),
        Some(l) => format!("{}{}", l.as_str()[..1].to_uppercase(), &l.as_str()[1..]),
        None => "hmm".to_string(),
    })
}

fn assert_manifest_complete(dir: &Path) -> RunManifest {
    let m = RunManifest::load(dir).unwrap();
    let mut listed: Vec<_> = m.artifacts.iter().map(|a| a.path.clone()).collect();
    listed.sort();
    assert_eq!(listed, list_files(dir).unwrap());
    m
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn stats_writes_tables_and_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let config = toy_config(&dataset(tmp.path()));
    let out = tmp.path().join("stats");
    cmd_stats(&config, &out).unwrap();
    let m = assert_manifest_complete(&out);
    assert_eq!(m.status, RunStatus::Ok);
    for f in ["emotion_distribution.csv", "emotion_distribution.png", "flip_counts.csv", "flip_counts.png", "length_histogram.csv", "summary.json", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(read(&out, "emotion_distribution.csv").starts_with("label,count\nneutral,"));
    let stored = RunConfig::from_json(&read(&out, "config.json")).unwrap();
    assert_eq!(stored.output_dir, PathBuf::from("."));
}

#[test]
fn stats_on_unlabeled_and_empty_data() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("unlabeled.json");
    fs::write(&path, r#"[{"episode": "e1", "speakers": ["A", "B"], "utterances": ["hi", "kya haal"]}]"#).unwrap();
    let out = tmp.path().join("a");
    cmd_stats(&toy_config(&path), &out).unwrap();
    let m = assert_manifest_complete(&out);
    assert!(!out.join("emotion_distribution.csv").exists());
    assert!(m.warnings.iter().any(|w| w.contains("label")));

    let empty = tmp.path().join("empty.json");
    fs::write(&empty, "[]").unwrap();
    let out = tmp.path().join("b");
    let m = cmd_stats(&toy_config(&empty), &out).unwrap().manifest;
    assert!(m.warnings.iter().any(|w| w.contains("empty")));
}

#[test]
fn train_is_reproducible_and_checkpointed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = toy_config(&dataset(tmp.path()));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let ma = cmd_train(&config, &a).unwrap().manifest;
    cmd_train(&config, &b).unwrap();
    assert_manifest_complete(&a);
    let files = list_files(&a).unwrap();
    assert_eq!(files, list_files(&b).unwrap());
    for f in &files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs between reruns");
    }
    for f in ["history.csv", "report.json", "report_per_class.csv", "split.json", "checkpoint/params.bin"] {
        assert!(files.iter().any(|x| x == f), "{f}");
    }
    assert!(ma.metrics["train_macro_f1"] > 0.5, "{:?}", ma.metrics);
    let (head, manifest) = load_head(&a.join("checkpoint")).unwrap();
    assert_eq!(head.input_dim(), config.encoder.hidden_dim);
    assert_eq!(manifest.labels.len(), 8);
    let history = read(&a, "history.csv");
    let stages: Vec<_> = history.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(stages.iter().filter(|s| *s == "1").count(), config.training.schedule.frozen_epochs);
    assert_eq!(stages.iter().filter(|s| *s == "2").count(), config.training.schedule.finetune_epochs);
}

#[test]
fn train_with_baselines() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = toy_config(&dataset(tmp.path()));
    config.baselines = serde_json::from_str(r#"[{"kind": "logistic_regression"}, {"kind": "nearest_neighbors", "k": 3}]"#).unwrap();
    config.export_features = true;
    let out = tmp.path().join("run");
    cmd_train(&config, &out).unwrap();
    let table = read(&out, "baselines.csv");
    assert_eq!(table.lines().count(), 3, "{table}");
    assert!(out.join("features_train.csv").exists());
}

#[test]
fn epoch_and_length_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let config = toy_config(&dataset(tmp.path()));
    let out = tmp.path().join("epochs");
    let m = cmd_sweep(&config, SweepKind::Epochs, &out).unwrap().manifest;
    let csv = read(&out, "epoch_sweep.csv");
    assert_eq!(csv.lines().count(), config.sweep.epochs.len() + 1);
    assert_eq!(csv.lines().filter(|l| l.contains(",true,")).count(), 1, "{csv}");
    assert!(m.metrics.contains_key("best_frozen_epochs"));
    assert_manifest_complete(&out);

    let out = tmp.path().join("lengths");
    let m = cmd_sweep(&config, SweepKind::MaxLength, &out).unwrap().manifest;
    let csv = read(&out, "length_sweep.csv");
    assert_eq!(csv.lines().count(), config.sweep.max_lengths.len() + 1);
    assert!(config.sweep.max_lengths.contains(&(m.metrics["best_max_len"] as usize)));
    assert_manifest_complete(&out);
}

#[test]
fn prompt_eval_and_replay_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = toy_config(&dataset(tmp.path()));
    for mode in [PromptMode::ZeroShot, PromptMode::FewShot] {
        config.prompt.mode = mode;
        let live = tmp.path().join(format!("{mode:?}-live"));
        let m = cmd_prompt_eval_with(&config, &live, &scripted, "scripted").unwrap().manifest;
        assert!(m.metrics["test_macro_f1"] > 0.5, "{:?}", m.metrics);
        assert_eq!(m.metrics["failure_rate"], 0.0);

        let replay = tmp.path().join(format!("{mode:?}-replay"));
        cmd_prompt_eval(&config, &replay, Some(&live.join("transcript.jsonl"))).unwrap();
        assert_eq!(read(&live, "predictions.csv"), read(&replay, "predictions.csv"));
        assert_eq!(read(&live, "report.json"), read(&replay, "report.json"));
        assert_manifest_complete(&replay);
    }
}

#[test]
fn prompt_eval_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = toy_config(&dataset(tmp.path()));
    config.prompt.endpoint.address = String::new();
    let err = cmd_prompt_eval(&config, &tmp.path().join("x"), None).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);

    config.prompt.endpoint.max_retries = 0;
    let down = |_: &str| -> Result<String> { Err(Error::Endpoint("connection refused".into())) };
    let out = tmp.path().join("down");
    let err = cmd_prompt_eval_with(&config, &out, &down, "down").unwrap_err();
    assert!(matches!(err, Error::Aborted(ref m) if m.contains("--replay")), "{err}");
    assert_eq!(RunManifest::load(&out).unwrap().status, RunStatus::Failed);

    config.prompt.mode = PromptMode::FewShot;
    config.prompt.exemplars = Some(vec![Exemplar { sentence: "x".into(), label: EmotionLabel::Joy }]);
    assert_eq!(config.validate().unwrap_err().kind(), ErrorKind::Config);
}

#[test]
fn report_compares_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = toy_config(&dataset(tmp.path()));
    let train = tmp.path().join("train");
    cmd_train(&config, &train).unwrap();
    let mut prompt_config = config.clone();
    prompt_config.name = Some("prompt zero-shot".into());
    let prompt = tmp.path().join("prompt");
    cmd_prompt_eval_with(&prompt_config, &prompt, &|_: &str| Ok("neutral".to_string()), "constant").unwrap();

    let out = tmp.path().join("report");
    cmd_report(&config, &[prompt.clone(), train.clone()], &out).unwrap();
    let results = read(&out, "results.csv");
    let rows: Vec<_> = results.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("toy-mock"), "{results}");
    assert!(rows[1].starts_with("prompt zero-shot (prompt-eval)"), "{results}");
    assert!(out.join("figures/00_prompt_zero-shot_confusion.png").exists());
    assert!(read(&out, "results.md").starts_with("| Model |"));
    assert_manifest_complete(&out);

    let err = cmd_report(&config, &[tmp.path().to_path_buf()], &tmp.path().join("r2")).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(cmd_report(&config, &[], &tmp.path().join("r3")).is_err());
}

#[test]
fn perfect_predictions_give_identity_confusion() {
    let tmp = tempfile::tempdir().unwrap();
    let config = toy_config(&dataset(tmp.path()));
    let run = tmp.path().join("oracle");
    cmd_prompt_eval_with(&config, &run, &scripted, "scripted").unwrap();
    let report: ediref_core::evalkit::EvaluationReport = serde_json::from_str(&read(&run, "report.json")).unwrap();
    for (i, row) in report.confusion.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

#[test]
fn failures_leave_a_failed_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"[{"episode": "e", "speakers": ["A"], "utterances": ["x"], "emotions": ["bliss"]}]"#).unwrap();
    let config = toy_config(&bad);
    let out = tmp.path().join("run");
    let err = cmd_train(&config, &out).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let m = RunManifest::load(&out).unwrap();
    assert_eq!(m.status, RunStatus::Failed);
    assert!(m.error.unwrap().contains("bliss"));

    let err = cmd_train(&config, &out).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config, "occupied directory");
    assert!(out.join(MANIFEST).exists());
}

const TOY_DIALOGUES: usize = 60;
const TOY_SEED: u64 = 2024;

#[test]
fn checked_in_toy_data_is_current() {
    let expected = dataset_to_json(&synthetic::corpus(TOY_DIALOGUES, TOY_SEED)).unwrap();
    let shipped = fs::read_to_string(configs_dir().join("data/toy_dialogues.json")).unwrap();
    assert_eq!(shipped, expected, "run the ignored regenerate_toy_assets test");
    let config = RunConfig::load(&configs_dir().join("toy.toml")).unwrap().resolve().unwrap();
    let transcript = configs_dir().join("data/toy_transcript.jsonl");
    let tmp = tempfile::tempdir().unwrap();
    let m = cmd_prompt_eval(&config, &tmp.path().join("r"), Some(&transcript)).unwrap().manifest;
    assert_eq!(m.metrics["failure_rate"], 0.0);
}

#[test]
#[ignore]
fn regenerate_toy_assets() {
    let dir = configs_dir().join("data");
    fs::create_dir_all(&dir).unwrap();
    save_dataset(&dir.join("toy_dialogues.json"), &synthetic::corpus(TOY_DIALOGUES, TOY_SEED)).unwrap();
    let config = RunConfig::load(&configs_dir().join("toy.toml")).unwrap().resolve().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("live");
    cmd_prompt_eval_with(&config, &out, &scripted, "scripted").unwrap();
    fs::copy(out.join("transcript.jsonl"), dir.join("toy_transcript.jsonl")).unwrap();
}

#[test]
fn full_scale_config_parses_but_needs_a_real_encoder() {
    let c = RunConfig::load(&configs_dir().join("full_scale.toml")).unwrap();
    assert_eq!(c.max_len, 55);
    assert_eq!((c.head.hidden, c.head.dropout), (128, 0.5));
    let s = c.training.schedule;
    assert_eq!((s.frozen_epochs, s.finetune_epochs, s.batch_size, s.warmup_steps), (4, 3, 64, 10_000));
    assert_eq!((s.lr_stage1, s.lr_stage2), (5e-5, 2e-5));
    let err = c.resolve().unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
    assert!(err.to_string().contains("xlm-roberta-large"));
}
