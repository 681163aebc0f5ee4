//! Zero- and few-shot prompt rendering, completion clients, and decoding of
//! one-word emotion answers.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmotionLabel, NUM_LABELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    #[default]
    ZeroShot,
    FewShot,
}

/// Instruction markers wrapped around every prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiters {
    /// `[INS]` ... `[\INS]`
    #[default]
    Literal,
    /// `[INST]` ... `[/INST]`
    Inst,
}

impl Delimiters {
    pub fn open(self) -> &'static str {
        match self {
            Delimiters::Literal => "[INS]",
            Delimiters::Inst => "[INST]",
        }
    }

    pub fn close(self) -> &'static str {
        match self {
            Delimiters::Literal => "[\\INS]",
            Delimiters::Inst => "[/INST]",
        }
    }
}

const OPTIONS: &str = "Chose one of the following options: neutral, anger, surprise, fear, joy, sadness, disgust, and contempt. Answer in one word only. ### Answer:";

/// Adjective used in few-shot example clauses, in label order.
pub const ADJECTIVES: [&str; NUM_LABELS] = [
    "neutral",
    "angry",
    "surprised",
    "fearful",
    "joyful",
    "sad",
    "disgusted",
    "contemptuous",
];

fn article(word: &str) -> &'static str {
    match word.as_bytes().first() {
        Some(b'a' | b'e' | b'i' | b'o' | b'u') => "an",
        _ => "a",
    }
}

fn check_sentence(sentence: &str) -> Result<()> {
    if sentence.trim().is_empty() {
        return Err(Error::Input("prompt sentence is empty".into()));
    }
    Ok(())
}

pub fn render_zero_shot(sentence: &str, delimiters: Delimiters) -> Result<String> {
    check_sentence(sentence)?;
    Ok(format!(
        "{} Given the following sentence: {sentence}. ### Predict which emotion is expressed. {OPTIONS} {}",
        delimiters.open(),
        delimiters.close()
    ))
}

/// One example sentence per emotion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Exemplar>", into = "Vec<Exemplar>")]
pub struct ExemplarSet {
    /// Indexed by label.
    sentences: [String; NUM_LABELS],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub sentence: String,
    pub label: EmotionLabel,
}

impl ExemplarSet {
    pub fn new(pairs: Vec<(String, EmotionLabel)>) -> Result<Self> {
        let mut slots: [Option<String>; NUM_LABELS] = Default::default();
        for (sentence, label) in pairs {
            if slots[label.index()].replace(sentence).is_some() {
                return Err(Error::Config(format!("exemplar set repeats '{label}'")));
            }
        }
        let missing: Vec<_> = EmotionLabel::ALL
            .iter()
            .filter(|l| slots[l.index()].is_none())
            .map(|l| l.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("exemplar set lacks {}", missing.join(", "))));
        }
        Ok(ExemplarSet {
            sentences: slots.map(|s| s.expect("checked above")),
        })
    }

    pub fn sentence(&self, label: EmotionLabel) -> &str {
        &self.sentences[label.index()]
    }
}

impl TryFrom<Vec<Exemplar>> for ExemplarSet {
    type Error = Error;
    fn try_from(v: Vec<Exemplar>) -> Result<Self> {
        ExemplarSet::new(v.into_iter().map(|e| (e.sentence, e.label)).collect())
    }
}

impl From<ExemplarSet> for Vec<Exemplar> {
    fn from(set: ExemplarSet) -> Self {
        EmotionLabel::ALL
            .iter()
            .zip(set.sentences)
            .map(|(&label, sentence)| Exemplar { sentence, label })
            .collect()
    }
}

pub fn render_few_shot(exemplars: &ExemplarSet, sentence: &str, delimiters: Delimiters) -> Result<String> {
    check_sentence(sentence)?;
    let clauses: Vec<String> = EmotionLabel::ALL
        .iter()
        .map(|&l| {
            let adj = ADJECTIVES[l.index()];
            format!(
                "This is an example of {} {adj} sentence: {}.",
                article(adj),
                exemplars.sentence(l)
            )
        })
        .collect();
    Ok(format!(
        "{} {} ### Predict the emotion of the following sentence: {sentence}. {OPTIONS} {}",
        delimiters.open(),
        clauses.join(" "),
        delimiters.close()
    ))
}

pub fn render(
    mode: PromptMode,
    exemplars: Option<&ExemplarSet>,
    sentence: &str,
    delimiters: Delimiters,
) -> Result<String> {
    match (mode, exemplars) {
        (PromptMode::ZeroShot, _) => render_zero_shot(sentence, delimiters),
        (PromptMode::FewShot, Some(set)) => render_few_shot(set, sentence, delimiters),
        (PromptMode::FewShot, None) => Err(Error::Config("few-shot prompting needs an exemplar set".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub raw: String,
    pub label: Option<EmotionLabel>,
    pub valid: bool,
}

/// Lowercases and drops punctuation; the first word wins if it is a label,
/// otherwise the earliest label occurring anywhere in the text.
pub fn parse_answer(completion: &str) -> ParsedAnswer {
    let normalized: String = completion
        .chars()
        .map(|c| {
            if c.is_ascii_punctuation() {
                ' '
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect();
    let first = normalized
        .split_whitespace()
        .next()
        .and_then(|w| EmotionLabel::ALL.iter().copied().find(|l| l.as_str() == w));
    let label = first.or_else(|| {
        EmotionLabel::ALL
            .iter()
            .filter_map(|&l| normalized.find(l.as_str()).map(|pos| (pos, l)))
            .min_by_key(|&(pos, l)| (pos, l.index()))
            .map(|(_, l)| l)
    });
    ParsedAnswer {
        raw: completion.to_string(),
        label,
        valid: label.is_some(),
    }
}

/// Prompt in, completion text out.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

impl<F> CompletionClient for F
where
    F: Fn(&str) -> Result<String> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String> {
        self(prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub address: String,
    pub timeout_secs: u64,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Environment variable holding a bearer token.
    pub auth_env: String,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub parallelism: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            address: String::new(),
            timeout_secs: 60,
            max_tokens: 8,
            temperature: 0.0,
            auth_env: "EDIREF_COMPLETION_TOKEN".into(),
            max_retries: 2,
            retry_backoff_ms: 500,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub completion: String,
}

/// JSON-over-HTTP completion endpoint: POSTs a [`CompletionRequest`] and
/// reads a [`CompletionResponse`].
pub struct HttpCompletionClient {
    agent: ureq::Agent,
    config: EndpointConfig,
    token: Option<String>,
}

impl HttpCompletionClient {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        if config.address.is_empty() {
            return Err(Error::Config("completion endpoint address is not set".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        let token = std::env::var(&config.auth_env).ok().filter(|t| !t.is_empty());
        Ok(HttpCompletionClient { agent, config, token })
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let body = CompletionRequest {
            prompt: prompt.to_string(),
            max_tokens: self.config.max_tokens,
            temperature: self.config.temperature,
        };
        let mut req = self.agent.post(&self.config.address);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| Error::Endpoint(format!("{}: {e}", self.config.address)))?;
        let parsed: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Endpoint(format!("bad completion response: {e}")))?;
        Ok(parsed.completion)
    }
}

/// One request/response pair, persisted as a JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub index: usize,
    pub sentence: String,
    pub prompt: String,
    pub completion: Option<String>,
    pub error: Option<String>,
}

pub fn write_transcript<W: Write>(mut w: W, entries: &[TranscriptEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::Serialize(e.to_string()))?;
    }
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    std::io::BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|(n, line)| {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                offset: n,
                message: format!("transcript line {}: {e}", n + 1),
            })
        })
        .collect()
}

/// Answers prompts from a saved transcript, matching on the prompt text.
pub struct ReplayClient {
    answers: HashMap<String, std::result::Result<String, String>>,
}

impl ReplayClient {
    pub fn new(entries: &[TranscriptEntry]) -> Self {
        let answers = entries
            .iter()
            .map(|e| {
                let answer = match (&e.completion, &e.error) {
                    (Some(c), _) => Ok(c.clone()),
                    (None, Some(err)) => Err(err.clone()),
                    (None, None) => Err("transcript entry has no completion".to_string()),
                };
                (e.prompt.clone(), answer)
            })
            .collect();
        ReplayClient { answers }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::new(&read_transcript(path)?))
    }
}

impl CompletionClient for ReplayClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        match self.answers.get(prompt) {
            Some(Ok(c)) => Ok(c.clone()),
            Some(Err(e)) => Err(Error::Endpoint(format!("replayed failure: {e}"))),
            None => Err(Error::Endpoint("prompt not found in replay transcript".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptSettings {
    pub mode: PromptMode,
    pub delimiters: Delimiters,
    pub parallelism: usize,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
}

impl Default for PromptSettings {
    fn default() -> Self {
        PromptSettings {
            mode: PromptMode::ZeroShot,
            delimiters: Delimiters::Literal,
            parallelism: 4,
            max_retries: 2,
            retry_backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRun {
    /// One label per input sentence; unparseable or failed items are neutral.
    pub labels: Vec<EmotionLabel>,
    pub transcript: Vec<TranscriptEntry>,
    pub invalid: usize,
    pub failed: usize,
    /// Unparseable completions over all items.
    pub invalid_rate: f64,
    pub failure_rate: f64,
}

fn with_retries(client: &dyn CompletionClient, prompt: &str, settings: &PromptSettings) -> Result<String> {
    let mut attempt = 0;
    loop {
        match client.complete(prompt) {
            Ok(c) => return Ok(c),
            Err(e) if attempt >= settings.max_retries => return Err(e),
            Err(e) => {
                log::debug!("completion attempt {attempt} failed: {e}");
                attempt += 1;
                std::thread::sleep(Duration::from_millis(settings.retry_backoff_ms * u64::from(attempt)));
            }
        }
    }
}

/// Prompts the model once per sentence, up to `settings.parallelism`
/// requests in flight, and decodes the answers. Aborts when more than half
/// of the requests fail.
pub fn classify_via_prompt<S: AsRef<str> + Sync>(
    client: &dyn CompletionClient,
    sentences: &[S],
    settings: &PromptSettings,
    exemplars: Option<&ExemplarSet>,
) -> Result<PromptRun> {
    if settings.mode == PromptMode::FewShot && exemplars.is_none() {
        return Err(Error::Config("few-shot prompting needs an exemplar set".into()));
    }
    let prompts = sentences
        .iter()
        .map(|s| render(settings.mode, exemplars, s.as_ref(), settings.delimiters))
        .collect::<Result<Vec<_>>>()?;
    let slots: Mutex<Vec<Option<TranscriptEntry>>> = Mutex::new(vec![None; prompts.len()]);
    let next = AtomicUsize::new(0);
    let workers = settings.parallelism.clamp(1, prompts.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(prompt) = prompts.get(i) else { break };
                let outcome = with_retries(client, prompt, settings);
                let entry = TranscriptEntry {
                    index: i,
                    sentence: sentences[i].as_ref().to_string(),
                    prompt: prompt.clone(),
                    completion: outcome.as_ref().ok().cloned(),
                    error: outcome.err().map(|e| e.to_string()),
                };
                slots.lock().expect("transcript lock")[i] = Some(entry);
            });
        }
    });
    let transcript: Vec<TranscriptEntry> = slots
        .into_inner()
        .expect("transcript lock")
        .into_iter()
        .map(|e| e.expect("every prompt answered"))
        .collect();

    let n = transcript.len();
    let failed = transcript.iter().filter(|e| e.completion.is_none()).count();
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    if rate(failed) > 0.5 {
        return Err(Error::Aborted(format!("{failed} of {n} completion requests failed")));
    }
    let mut invalid = 0;
    let labels = transcript
        .iter()
        .map(|e| match &e.completion {
            Some(c) => parse_answer(c).label.unwrap_or_else(|| {
                invalid += 1;
                EmotionLabel::Neutral
            }),
            None => EmotionLabel::Neutral,
        })
        .collect();
    Ok(PromptRun {
        labels,
        invalid,
        failed,
        invalid_rate: rate(invalid),
        failure_rate: rate(failed),
        transcript,
    })
}
