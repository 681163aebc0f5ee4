use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::label::EmotionLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: usize,
    pub speaker: String,
    /// Raw text, never normalized.
    pub text: String,
    pub emotion: Option<EmotionLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub utterances: Vec<Utterance>,
    pub triggers: Option<Vec<u8>>,
}

impl Dialogue {
    /// Builds a dialogue from parallel arrays, checking every invariant.
    pub fn from_parts(
        id: impl Into<String>,
        speakers: Vec<String>,
        texts: Vec<String>,
        emotions: Option<Vec<EmotionLabel>>,
        triggers: Option<Vec<u8>>,
    ) -> Result<Self> {
        let id = id.into();
        let n = texts.len();
        let schema = |message: String| Error::Schema {
            dialogue: id.clone(),
            message,
        };
        if speakers.len() != n {
            return Err(schema(format!(
                "{} speakers for {} utterances",
                speakers.len(),
                n
            )));
        }
        if let Some(e) = &emotions {
            if e.len() != n {
                return Err(schema(format!("{} emotions for {} utterances", e.len(), n)));
            }
        }
        if let Some(t) = &triggers {
            if t.len() != n {
                return Err(schema(format!("{} triggers for {} utterances", t.len(), n)));
            }
            if let Some(bad) = t.iter().find(|&&v| v > 1) {
                return Err(schema(format!("trigger flag {bad} is not 0 or 1")));
            }
        }
        if let Some(i) = speakers.iter().position(|s| s.is_empty()) {
            return Err(schema(format!("utterance {i} has an empty speaker")));
        }
        let utterances = speakers
            .into_iter()
            .zip(texts)
            .enumerate()
            .map(|(index, (speaker, text))| Utterance {
                index,
                speaker,
                text,
                emotion: emotions.as_ref().map(|e| e[index]),
            })
            .collect();
        Ok(Dialogue {
            id,
            utterances,
            triggers,
        })
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.utterances.iter().all(|u| u.emotion.is_some())
    }

    /// Gold labels, or the first unlabeled position as an error.
    pub fn labels(&self) -> Result<Vec<EmotionLabel>> {
        self.utterances
            .iter()
            .map(|u| {
                u.emotion.ok_or_else(|| Error::MissingLabel {
                    dialogue: self.id.clone(),
                    index: u.index,
                })
            })
            .collect()
    }
}

/// On-disk representation of one dialogue.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawDialogue {
    episode: String,
    speakers: Vec<String>,
    utterances: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emotions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    triggers: Option<Vec<f64>>,
}

impl RawDialogue {
    fn into_dialogue(self, expect_labels: bool) -> Result<Dialogue> {
        let emotions = match self.emotions {
            Some(list) => Some(
                list.iter()
                    .map(|s| s.parse::<EmotionLabel>())
                    .collect::<Result<Vec<_>>>()?,
            ),
            None if expect_labels => {
                return Err(Error::MissingLabel {
                    dialogue: self.episode,
                    index: 0,
                })
            }
            None => None,
        };
        let triggers = match self.triggers {
            Some(list) => Some(
                list.iter()
                    .enumerate()
                    .map(|(i, &v)| match v {
                        0.0 => Ok(0u8),
                        1.0 => Ok(1u8),
                        other => Err(Error::Schema {
                            dialogue: self.episode.clone(),
                            message: format!("trigger {i} is {other}, expected 0 or 1"),
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Dialogue::from_parts(self.episode, self.speakers, self.utterances, emotions, triggers)
    }

    fn from_dialogue(d: &Dialogue) -> Self {
        let emotions = if d.utterances.iter().any(|u| u.emotion.is_some()) {
            Some(
                d.utterances
                    .iter()
                    .map(|u| u.emotion.map(|e| e.as_str().to_string()).unwrap_or_default())
                    .collect(),
            )
        } else {
            None
        };
        RawDialogue {
            episode: d.id.clone(),
            speakers: d.utterances.iter().map(|u| u.speaker.clone()).collect(),
            utterances: d.utterances.iter().map(|u| u.text.clone()).collect(),
            emotions,
            triggers: d
                .triggers
                .as_ref()
                .map(|t| t.iter().map(|&v| f64::from(v)).collect()),
        }
    }
}

/// Converts a serde_json (line, column) position into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Parses a dataset from its JSON text. `origin` is only used in errors.
pub fn parse_dataset(text: &str, origin: &Path, expect_labels: bool) -> Result<Vec<Dialogue>> {
    let raw: Vec<RawDialogue> = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    raw.into_iter()
        .map(|r| r.into_dialogue(expect_labels))
        .collect()
}

pub fn load_dataset(path: &Path, expect_labels: bool) -> Result<Vec<Dialogue>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path, expect_labels)
}

/// Serializes dialogues back to the dataset file format.
pub fn dataset_to_json(dialogues: &[Dialogue]) -> Result<String> {
    let raw: Vec<RawDialogue> = dialogues.iter().map(RawDialogue::from_dialogue).collect();
    Ok(serde_json::to_string_pretty(&raw)?)
}

pub fn save_dataset(path: &Path, dialogues: &[Dialogue]) -> Result<()> {
    let text = dataset_to_json(dialogues)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Sizes in both units, since dataset sizes are quoted either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSize {
    pub dialogues: usize,
    pub utterances: usize,
}

pub fn dataset_size(dialogues: &[Dialogue]) -> DatasetSize {
    DatasetSize {
        dialogues: dialogues.len(),
        utterances: dialogues.iter().map(Dialogue::len).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Dialogue>> {
        parse_dataset(text, Path::new("mem.json"), true)
    }

    #[test]
    fn empty_list() {
        assert!(parse("[]").unwrap().is_empty());
    }

    #[test]
    fn parses_full_record() {
        let d = parse(
            r#"[{"episode":"e1","speakers":["A","B"],"utterances":["hi","kya hua?"],
                 "emotions":["Neutral","joy"],"triggers":[0.0,1]}]"#,
        )
        .unwrap();
        assert_eq!(d[0].id, "e1");
        assert_eq!(d[0].utterances[1].text, "kya hua?");
        assert_eq!(d[0].utterances[1].emotion, Some(EmotionLabel::Joy));
        assert_eq!(d[0].triggers, Some(vec![0, 1]));
    }

    #[test]
    fn unknown_label_rejected() {
        let err = parse(r#"[{"episode":"e","speakers":["A"],"utterances":["x"],"emotions":["joyful"]}]"#)
            .unwrap_err();
        assert!(matches!(err, Error::Label(ref s) if s == "joyful"));
    }

    #[test]
    fn length_mismatch_names_dialogue() {
        let err = parse(r#"[{"episode":"ep7","speakers":["A","B"],"utterances":["x"],"emotions":["joy"]}]"#)
            .unwrap_err();
        assert!(matches!(err, Error::Schema { ref dialogue, .. } if dialogue == "ep7"));
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = "[\n  {\"episode\": \"e\",, }\n]";
        match parse(text).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(&text[offset..offset + 1], ","),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_labels_when_expected() {
        let text = r#"[{"episode":"e","speakers":["A"],"utterances":["x"]}]"#;
        assert!(matches!(parse(text), Err(Error::MissingLabel { .. })));
        let d = parse_dataset(text, Path::new("t"), false).unwrap();
        assert_eq!(d[0].utterances[0].emotion, None);
    }

    #[test]
    fn bad_trigger_value() {
        let text = r#"[{"episode":"e","speakers":["A"],"utterances":["x"],"emotions":["joy"],"triggers":[0.5]}]"#;
        assert!(matches!(parse(text), Err(Error::Schema { .. })));
    }

    #[test]
    fn empty_speaker_rejected() {
        let text = r#"[{"episode":"e","speakers":[""],"utterances":["x"],"emotions":["joy"]}]"#;
        assert!(matches!(parse(text), Err(Error::Schema { .. })));
    }

    #[test]
    fn text_kept_verbatim() {
        let text = r#"[{"episode":"e","speakers":["A"],"utterances":["  Arre!!  the, and...  "],"emotions":["joy"]}]"#;
        assert_eq!(parse(text).unwrap()[0].utterances[0].text, "  Arre!!  the, and...  ");
    }

    #[test]
    fn size_reports_both_units() {
        let d = parse(
            r#"[{"episode":"a","speakers":["A","B"],"utterances":["x","y"],"emotions":["joy","fear"]},
                {"episode":"b","speakers":["A"],"utterances":["z"],"emotions":["joy"]}]"#,
        )
        .unwrap();
        assert_eq!(
            dataset_size(&d),
            DatasetSize {
                dialogues: 2,
                utterances: 3
            }
        );
    }
}
