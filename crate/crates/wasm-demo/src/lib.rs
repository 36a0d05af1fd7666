//! Browser demo: question scoring and the study statistics, compiled to wasm.
//!
//! Each exported function takes plain strings/numbers and returns a JSON
//! string; errors come back as JS exceptions. The `*_json` functions hold the
//! logic so they can be tested natively.

use std::collections::HashSet;

use chrono::DateTime;
use kidsask_core::analytics::{fisher_z_compare, one_way_anova, summarize, welch_t};
use kidsask_core::corpus::Corpus;
use kidsask_core::cue_pipeline::{CueMode, CueSet};
use kidsask_core::ids::{QuestionId, SessionId, TextId};
use kidsask_core::samples;
use kidsask_core::scoring::{Acceptance, QuestionContext, QuestionSlot, Scorer};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

struct Demo {
    corpus: Corpus,
    cues: Vec<CueSet>,
    scorer: Scorer,
}

impl Demo {
    fn load() -> Self {
        let corpus = samples::sample_corpus();
        let cues = samples::demo_cues(&corpus, DateTime::UNIX_EPOCH);
        Self { corpus, cues, scorer: Scorer::default() }
    }
}

thread_local! {
    static DEMO: Demo = Demo::load();
}

pub fn texts_json() -> String {
    DEMO.with(|d| {
        let list: Vec<Value> = d
            .corpus
            .texts
            .iter()
            .map(|t| json!({ "id": t.id, "title": t.title, "body": t.body, "theme_id": t.theme_id }))
            .collect();
        Value::Array(list).to_string()
    })
}

/// Scores one question per non-empty line against a sample text. `cue_mode`
/// is "", "incentive" or "open"; when set, the text's demo cue of that mode
/// counts as on screen.
pub fn score_questions_json(text_id: &str, questions: &str, cue_mode: &str) -> Result<String, String> {
    DEMO.with(|d| {
        let text = d.corpus.text(&TextId::new(text_id)).ok_or_else(|| format!("unknown text `{text_id}`"))?;
        let theme = d.corpus.theme(&text.theme_id);
        let lex = d.scorer.lexicon(theme.map_or("en", |t| t.locale.as_str())).map_err(|e| e.to_string())?;
        let cue = match cue_mode.trim() {
            "" => None,
            m => {
                let mode: CueMode = m.parse()?;
                d.cues.iter().find(|c| c.text_id == text.id && c.mode() == mode)
            }
        };
        let ctx = QuestionContext { text, theme_title: theme.map(|t| t.title.as_str()), cue };
        let mut prior = HashSet::new();
        let mut out = Vec::new();
        for (i, raw) in questions.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
            let slot = QuestionSlot { id: QuestionId::new(format!("q{}", i + 1)), session_id: SessionId::new("demo"), turn_index: i };
            let q = d.scorer.score(slot, raw, &ctx, &prior, lex);
            if q.is_accepted() {
                prior.insert(q.normalized.clone());
            }
            let reason = match q.acceptance {
                Acceptance::Accepted => None,
                Acceptance::Rejected(r) => Some(r.as_str()),
            };
            out.push(json!({
                "raw": raw,
                "accepted": q.is_accepted(),
                "reject_reason": reason,
                "divergence": q.divergence,
                "used_cue": q.used_cues.map(|u| u.used),
                "quality": q.quality,
            }));
        }
        Ok(json!({ "cue": cue.map(|c| c.content.texts()), "questions": out }).to_string())
    })
}

fn parse_numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: `{t}`")))
        .collect()
}

/// One-way ANOVA over the non-empty groups, plus Welch's t for every pair.
pub fn compare_groups_json(groups: &[&str]) -> Result<String, String> {
    let parsed: Vec<Vec<f64>> =
        groups.iter().map(|g| parse_numbers(g)).collect::<Result<Vec<_>, _>>()?.into_iter().filter(|g| !g.is_empty()).collect();
    if parsed.len() < 2 {
        return Err("enter at least two groups".into());
    }
    let refs: Vec<&[f64]> = parsed.iter().map(Vec::as_slice).collect();
    let anova = one_way_anova(&refs).map_err(|e| e.to_string())?;
    let mut pairs = Vec::new();
    for i in 0..parsed.len() {
        for j in i + 1..parsed.len() {
            let t = welch_t(&parsed[i], &parsed[j]).map_err(|e| e.to_string())?;
            pairs.push(json!({ "a": i, "b": j, "t": t.t, "df": t.df, "p": t.p_two_sided }));
        }
    }
    let summaries: Vec<_> = parsed.iter().map(|g| summarize(g)).collect();
    Ok(json!({ "summaries": summaries, "anova": anova, "welch": pairs }).to_string())
}

pub fn compare_correlations_json(r1: f64, n1: u32, r2: f64, n2: u32) -> Result<String, String> {
    let z = fisher_z_compare(r1, n1.into(), r2, n2.into()).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&z).expect("plain struct"))
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn texts() -> String {
    texts_json()
}

#[wasm_bindgen]
pub fn score_questions(text_id: &str, questions: &str, cue_mode: &str) -> Result<String, JsValue> {
    js(score_questions_json(text_id, questions, cue_mode))
}

#[wasm_bindgen]
pub fn compare_groups(a: &str, b: &str, c: &str) -> Result<String, JsValue> {
    js(compare_groups_json(&[a, b, c]))
}

#[wasm_bindgen]
pub fn compare_correlations(r1: f64, n1: u32, r2: f64, n2: u32) -> Result<String, JsValue> {
    js(compare_correlations_json(r1, n1, r2, n2))
}
