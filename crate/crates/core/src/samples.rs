//! Bundled sample content: six themes with three texts each and five quiz
//! items per theme. Used by the CLI quick start, the browser demo and tests.

use chrono::{DateTime, Utc};

use crate::corpus::{Corpus, ResourceText};
use crate::cue_pipeline::{CueAnnotations, CueContent, CueSet, GenerationConfig, Provenance, ReviewStatus};
use crate::dialogue::{quiz_plan, Condition, ContentView, DialogueContext, Phase, QuizNext, Session, Stage, UtterancePool};
use crate::ids::TextId;
use crate::scoring::Scorer;

pub const SAMPLE_CORPUS_JSON: &str = include_str!("../data/sample_corpus.json");

pub fn sample_corpus() -> Corpus {
    Corpus::ingest(SAMPLE_CORPUS_JSON.as_bytes()).expect("bundled corpus is valid")
}

pub fn sample_text(id: &str) -> ResourceText {
    sample_corpus().text(&id.into()).cloned().unwrap_or_else(|| panic!("no sample text `{id}`"))
}

/// Incentive cue shown for the Big Bang text: linguistic cue "What" with the
/// temperature answer sentence.
pub fn big_bang_incentive_cue() -> CueSet {
    let mut c = CueSet::pending(
        "big-bang-hand-1",
        "big-bang".into(),
        CueContent::incentive("What", "At its start, the universe's temperature was about 10 billion degrees"),
        Provenance::Hand,
    );
    c.target_question = Some("What was the temperature of the universe at its beginning?".into());
    c
}

/// Open cue shown for the Big Bang text: "What" with "Big Bang, explosion".
pub fn big_bang_open_cue() -> CueSet {
    CueSet::pending("big-bang-open-1", "big-bang".into(), CueContent::open("What", "Big Bang", "explosion"), Provenance::Hand)
}

/// The two Pasteur cues in wire form and parsed form.
pub fn pasteur_cues() -> [(&'static str, CueContent); 2] {
    [
        (
            "What difference | The vaccine avoids the disease whilst medicine treats it",
            CueContent::incentive("What difference", "The vaccine avoids the disease whilst medicine treats it"),
        ),
        ("What other | Canning, Freezing", CueContent::open("What other", "Canning", "Freezing")),
    ]
}

/// Approved cue sets for every text and condition, built from the text's
/// own sentences: six per (text, condition). Enough to run full sessions
/// without a language model or a reviewer.
pub fn demo_cues(corpus: &Corpus, at: DateTime<Utc>) -> Vec<CueSet> {
    const WORDS: [&str; 6] = ["Why", "How", "What if", "What difference", "What would happen", "How come"];
    let mut out = Vec::new();
    for text in &corpus.texts {
        for condition in Condition::ALL {
            for (i, sentence) in text.sentences.iter().cycle().take(6).enumerate() {
                let qword = WORDS[i % WORDS.len()];
                let content = match condition {
                    Condition::AutoOpen => {
                        let (a, b) = two_keywords(sentence);
                        CueContent::open(qword, &a, &b)
                    }
                    _ => CueContent::incentive(qword, sentence.trim_end_matches(['.', '!', '?'])),
                };
                let provenance = if condition.expects_hand_cues() {
                    Provenance::Hand
                } else {
                    Provenance::Generated {
                        config: GenerationConfig::default(),
                        prompt_id: format!("demo-{}", i),
                        raw_output: crate::cue_pipeline::format_cue(&content),
                    }
                };
                let mut cue = CueSet::pending(format!("{}-{}-{}", text.id, condition.group(), i + 1), text.id.clone(), content, provenance);
                cue.screen = Some(Default::default());
                cue.annotations = Some(CueAnnotations::new(5, 2, 5));
                cue.review_status = ReviewStatus::Approved { annotator: "demo".into(), at };
                out.push(cue);
            }
        }
    }
    out
}

/// Sample corpus plus [`demo_cues`], served through [`ContentView`].
pub struct DemoContent {
    pub corpus: Corpus,
    pub cues: Vec<CueSet>,
}

impl DemoContent {
    pub fn new(at: DateTime<Utc>) -> Self {
        let corpus = sample_corpus();
        let cues = demo_cues(&corpus, at);
        Self { corpus, cues }
    }
}

impl ContentView for DemoContent {
    fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    fn approved_cues(&self, text: &TextId) -> Vec<&CueSet> {
        self.cues.iter().filter(|c| &c.text_id == text && c.is_approved()).collect()
    }
}

/// A complete session on demo content: every quiz item skipped, the given
/// theme, six scripted questions per text, and a post fluency capture with
/// the given questions one second apart.
pub fn scripted_session(
    content: &DemoContent,
    scorer: &Scorer,
    condition: Condition,
    session_id: &str,
    theme: &str,
    fluency_post: &[&str],
    at: DateTime<Utc>,
) -> Session {
    let pool = UtterancePool::default();
    let ctx = DialogueContext { content, scorer, utterances: &pool };
    let plan = quiz_plan(&content.corpus, None);
    let mut s = Session::start(session_id.into(), format!("{session_id}-child").as_str().into(), condition, plan, 0, at);
    while let QuizNext::Item { item_id } = s.quiz_next() {
        s.quiz_skip(&item_id, at).expect("quiz item");
    }
    s.choose_theme(&theme.into(), &ctx, at).expect("theme");
    while s.stage == Stage::Training {
        let text_id = s.current_text_id().expect("current text").clone();
        s.finished_reading(&text_id, at).expect("reading");
        let text = content.corpus.text(&text_id).expect("text").clone();
        for q in scripted_questions(&text) {
            s.next_cue_turn(&ctx, at).expect("cue turn");
            s.record_question(&q, &ctx, at).expect("question");
        }
    }
    let fluency_text = content.corpus.texts.last().expect("texts").id.clone();
    s.fluency_start(Phase::Post, &fluency_text, &ctx, at).expect("fluency");
    for (i, q) in fluency_post.iter().enumerate() {
        s.fluency_submit(Phase::Post, q, None, at + chrono::Duration::seconds(i as i64 + 1)).expect("fluency");
    }
    s
}

/// Six distinct on-topic questions for a text, one per sentence, for
/// scripted sessions.
pub fn scripted_questions(text: &ResourceText) -> Vec<String> {
    text.sentences
        .iter()
        .cycle()
        .take(6)
        .enumerate()
        .map(|(i, s)| {
            let (a, b) = two_keywords(s);
            let starter = ["Why", "How", "What if", "Why", "How come", "What difference"][i % 6];
            match starter {
                "What if" => format!("What if there were no {a} and {b}?"),
                "What difference" => format!("What difference is there between {a} and {b}?"),
                "How come" => format!("How come {a} and {b} go together?"),
                s => format!("{s} are {a} and {b} connected?"),
            }
        })
        .collect()
}

/// Two longest distinct words of a sentence, in sentence order.
fn two_keywords(sentence: &str) -> (String, String) {
    let mut words: Vec<(usize, String)> = Vec::new();
    for (i, w) in sentence.split_whitespace().enumerate() {
        let w: String = w.chars().filter(|c| c.is_alphanumeric() || *c == '-').collect();
        if !words.iter().any(|(_, x)| x.eq_ignore_ascii_case(&w)) && !w.is_empty() {
            words.push((i, w));
        }
    }
    let mut by_len = words.clone();
    by_len.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    let mut top: Vec<(usize, String)> = by_len.into_iter().take(2).collect();
    top.sort_by_key(|(i, _)| *i);
    let mut it = top.into_iter().map(|(_, w)| w);
    (it.next().unwrap_or_default(), it.next().unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_text;

    #[test]
    fn bundled_corpus_has_the_study_shape() {
        let c = sample_corpus();
        assert_eq!(c.themes.len(), 6);
        assert_eq!(c.texts.len(), 18);
        assert_eq!(c.quiz_items.len(), 30);
        for t in &c.texts {
            assert!(validate_text(t).is_clean(), "{}: {:?}", t.id, validate_text(t).warnings);
        }
    }
}
