//! Educational content: themes, quiz items and the short texts the training
//! reads from.
//!
//! A corpus is ingested once from a JSON content document and is immutable
//! afterwards. Sentence splits and word counts are always recomputed from the
//! body; when a document carries them (e.g. an exported corpus) they must
//! agree with the recomputed values.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ids::{QuizItemId, TextId, ThemeId};
use crate::text;

/// Target sentence count for a training text.
pub const TARGET_SENTENCES: usize = 6;
/// Advisory word-count bounds, inclusive.
pub const WORD_COUNT_BOUNDS: (usize, usize) = (60, 180);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub id: ThemeId,
    pub title: String,
    pub locale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceText {
    pub id: TextId,
    pub theme_id: ThemeId,
    pub title: String,
    pub body: String,
    pub sentences: Vec<String>,
    pub word_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_ref: Option<String>,
}

impl ResourceText {
    /// Builds a text and derives its sentence split and word count.
    pub fn new(id: impl Into<TextId>, theme_id: impl Into<ThemeId>, title: &str, body: &str) -> Self {
        Self {
            id: id.into(),
            theme_id: theme_id.into(),
            title: title.to_string(),
            sentences: text::split_sentences(body),
            word_count: text::word_count(body),
            body: body.to_string(),
            audio_ref: None,
        }
    }
}

impl From<String> for TextId {
    fn from(s: String) -> Self {
        TextId(s)
    }
}

impl From<String> for ThemeId {
    fn from(s: String) -> Self {
        ThemeId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizItem {
    pub id: QuizItemId,
    pub theme_id: ThemeId,
    pub prompt: String,
    pub reference_answer: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("content document is not valid JSON: {0}")]
    Json(String),
    #[error("schema violation in {record}: {message}")]
    Schema { record: String, message: String },
    #[error("no themes")]
    NoThemes,
    #[error("{record} references unknown theme `{theme_id}`")]
    DanglingTheme { record: String, theme_id: ThemeId },
    #[error("duplicate id `{id}` in {collection}")]
    DuplicateId { collection: &'static str, id: String },
}

/// Advisory findings for a text; never blocks ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub text_id: TextId,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

#[derive(Deserialize)]
struct TextRecord {
    id: TextId,
    theme_id: ThemeId,
    title: String,
    body: String,
    #[serde(default)]
    sentences: Option<Vec<String>>,
    #[serde(default)]
    word_count: Option<usize>,
    #[serde(default)]
    audio_ref: Option<String>,
}

/// Immutable, validated content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub themes: Vec<Theme>,
    pub texts: Vec<ResourceText>,
    pub quiz_items: Vec<QuizItem>,
}

impl Corpus {
    /// Parses and validates a content document.
    pub fn ingest(source: &[u8]) -> Result<Self, CorpusError> {
        let doc: Value = serde_json::from_slice(source).map_err(|e| CorpusError::Json(e.to_string()))?;
        let themes: Vec<Theme> = records(&doc, "themes")?;
        let text_records: Vec<TextRecord> = records(&doc, "texts")?;
        let quiz_items: Vec<QuizItem> = records(&doc, "quiz_items")?;

        let mut texts = Vec::with_capacity(text_records.len());
        for (i, r) in text_records.into_iter().enumerate() {
            let record = format!("texts[{i}] ({})", r.id);
            if r.body.trim().is_empty() {
                return Err(schema(record, "body is empty"));
            }
            let mut t = ResourceText::new(r.id, r.theme_id, &r.title, &r.body);
            t.audio_ref = r.audio_ref;
            if r.sentences.is_some_and(|s| s != t.sentences) {
                return Err(schema(record, "sentences do not match the body"));
            }
            if r.word_count.is_some_and(|w| w != t.word_count) {
                return Err(schema(record, "word_count does not match the body"));
            }
            texts.push(t);
        }
        let corpus = Corpus { themes, texts, quiz_items };
        corpus.check_integrity()?;
        Ok(corpus)
    }

    fn check_integrity(&self) -> Result<(), CorpusError> {
        if self.themes.is_empty() {
            return Err(CorpusError::NoThemes);
        }
        let mut theme_ids = HashSet::new();
        for (i, t) in self.themes.iter().enumerate() {
            if t.title.trim().is_empty() {
                return Err(schema(format!("themes[{i}] ({})", t.id), "title is empty"));
            }
            if !theme_ids.insert(&t.id) {
                return Err(CorpusError::DuplicateId { collection: "themes", id: t.id.to_string() });
            }
        }
        let mut text_ids = HashSet::new();
        for (i, t) in self.texts.iter().enumerate() {
            if !text_ids.insert(&t.id) {
                return Err(CorpusError::DuplicateId { collection: "texts", id: t.id.to_string() });
            }
            if !theme_ids.contains(&t.theme_id) {
                return Err(CorpusError::DanglingTheme { record: format!("texts[{i}] ({})", t.id), theme_id: t.theme_id.clone() });
            }
        }
        let mut item_ids = HashSet::new();
        for (i, q) in self.quiz_items.iter().enumerate() {
            if !item_ids.insert(&q.id) {
                return Err(CorpusError::DuplicateId { collection: "quiz_items", id: q.id.to_string() });
            }
            if q.prompt.trim().is_empty() {
                return Err(schema(format!("quiz_items[{i}] ({})", q.id), "prompt is empty"));
            }
            if !theme_ids.contains(&q.theme_id) {
                return Err(CorpusError::DanglingTheme { record: format!("quiz_items[{i}] ({})", q.id), theme_id: q.theme_id.clone() });
            }
        }
        Ok(())
    }

    /// Serializes the corpus as a content document that re-ingests to an
    /// identical corpus.
    pub fn export(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("corpus serializes")
    }

    pub fn theme(&self, id: &ThemeId) -> Option<&Theme> {
        self.themes.iter().find(|t| &t.id == id)
    }

    pub fn text(&self, id: &TextId) -> Option<&ResourceText> {
        self.texts.iter().find(|t| &t.id == id)
    }

    pub fn quiz_item(&self, id: &QuizItemId) -> Option<&QuizItem> {
        self.quiz_items.iter().find(|q| &q.id == id)
    }

    /// Texts of a theme in corpus order.
    pub fn texts_for_theme<'a>(&'a self, theme: &'a ThemeId) -> impl Iterator<Item = &'a ResourceText> + 'a {
        self.texts.iter().filter(move |t| &t.theme_id == theme)
    }

    pub fn locales(&self) -> BTreeSet<&str> {
        self.themes.iter().map(|t| t.locale.as_str()).collect()
    }
}

fn schema(record: String, message: &str) -> CorpusError {
    CorpusError::Schema { record, message: message.to_string() }
}

fn records<T: serde::de::DeserializeOwned>(doc: &Value, key: &str) -> Result<Vec<T>, CorpusError> {
    let items = match doc.get(key) {
        None => return Err(schema("document".into(), &format!("missing array `{key}`"))),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(schema("document".into(), &format!("`{key}` is not an array"))),
    };
    items
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let name = match v.get("id").and_then(Value::as_str) {
                Some(id) => format!("{key}[{i}] ({id})"),
                None => format!("{key}[{i}]"),
            };
            serde_json::from_value(v.clone()).map_err(|e| schema(name, &e.to_string()))
        })
        .collect()
}

/// Checks a text against the study's shape: six sentences, a word count
/// within the advisory bounds.
pub fn validate_text(t: &ResourceText) -> ValidationReport {
    let mut warnings = Vec::new();
    let n = t.sentences.len();
    if n != TARGET_SENTENCES {
        warnings.push(format!("sentence count {n} ≠ {TARGET_SENTENCES}"));
    }
    let (lo, hi) = WORD_COUNT_BOUNDS;
    if t.word_count < lo || t.word_count > hi {
        warnings.push(format!("word count {} outside [{lo}, {hi}]", t.word_count));
    }
    ValidationReport { text_id: t.id.clone(), warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc(themes: Value, texts: Value, quiz: Value) -> Vec<u8> {
        serde_json::to_vec(&json!({"themes": themes, "texts": texts, "quiz_items": quiz})).unwrap()
    }

    #[test]
    fn empty_theme_list_is_rejected() {
        let err = Corpus::ingest(&doc(json!([]), json!([]), json!([]))).unwrap_err();
        assert_eq!(err, CorpusError::NoThemes);
        assert_eq!(err.to_string(), "no themes");
    }

    #[test]
    fn dangling_theme_reference() {
        let err = Corpus::ingest(&doc(
            json!([{"id": "space", "title": "Space", "locale": "en"}]),
            json!([{"id": "t1", "theme_id": "oceans", "title": "T", "body": "Water is wet."}]),
            json!([]),
        ))
        .unwrap_err();
        assert!(matches!(err, CorpusError::DanglingTheme { ref theme_id, .. } if theme_id.as_str() == "oceans"));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = Corpus::ingest(&doc(
            json!([{"id": "a", "title": "A", "locale": "en"}, {"id": "a", "title": "B", "locale": "en"}]),
            json!([]),
            json!([]),
        ))
        .unwrap_err();
        assert_eq!(err, CorpusError::DuplicateId { collection: "themes", id: "a".into() });
    }

    #[test]
    fn schema_error_names_the_record() {
        let err = Corpus::ingest(&doc(
            json!([{"id": "a", "title": "A", "locale": "en"}]),
            json!([{"id": "t9", "theme_id": "a", "title": "T"}]),
            json!([]),
        ))
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("texts[0] (t9)"), "{msg}");
        assert!(msg.contains("body"), "{msg}");
    }

    #[test]
    fn stale_derived_fields_are_rejected() {
        let err = Corpus::ingest(&doc(
            json!([{"id": "a", "title": "A", "locale": "en"}]),
            json!([{"id": "t1", "theme_id": "a", "title": "T", "body": "One two three.", "word_count": 4}]),
            json!([]),
        ))
        .unwrap_err();
        assert!(err.to_string().contains("word_count"));
    }

    #[test]
    fn validate_flags_short_and_long_texts() {
        let one = ResourceText::new("t", "a", "T", "Only one sentence here.");
        let report = validate_text(&one);
        assert!(report.warnings.iter().any(|w| w == "sentence count 1 ≠ 6"), "{:?}", report.warnings);

        let long_body = (0..6).map(|_| format!("{}.", vec!["word"; 50].join(" "))).collect::<Vec<_>>().join(" ");
        let long = ResourceText::new("t", "a", "T", &long_body);
        assert_eq!(long.word_count, 300);
        let report = validate_text(&long);
        assert_eq!(report.warnings, vec!["word count 300 outside [60, 180]".to_string()]);
    }
}
