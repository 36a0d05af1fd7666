use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::prompt::{OPEN_MARKER, TEXT_END, TEXT_START};
use super::GenerationConfig;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("quota exceeded: {0}")]
    Quota(String),
    #[error("backend returned an unusable response: {0}")]
    BadResponse(String),
}

/// A text-completion model.
pub trait LanguageModelBackend: Send + Sync {
    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, BackendError>;

    fn name(&self) -> &str;
}

/// Stable 64-bit digest of a prompt.
pub fn prompt_hash(prompt: &str) -> u64 {
    let digest = Sha256::digest(prompt.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Deterministic offline backend.
///
/// Scripted completions are looked up by `(prompt hash, seed)`. Prompts with
/// no script get a synthetic completion derived from the text embedded in the
/// prompt, seeded by the same key, so identical inputs always yield identical
/// bytes.
#[derive(Debug, Default)]
pub struct MockBackend {
    scripted: HashMap<(u64, Option<u64>), String>,
}

const STARTERS_INCENTIVE: &[&str] = &["What difference", "What if", "Why", "How", "What would happen", "What other", "How come"];
const STARTERS_OPEN: &[&str] = &["What other", "Why", "How", "What difference", "What if", "Where"];

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn script(mut self, prompt: &str, seed: Option<u64>, completion: &str) -> Self {
        self.scripted.insert((prompt_hash(prompt), seed), completion.to_string());
        self
    }

    fn synthesize(prompt: &str, seed: Option<u64>) -> String {
        let key = prompt_hash(prompt) ^ seed.unwrap_or(0).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let text = prompt
            .split_once(TEXT_START)
            .and_then(|(_, rest)| rest.split_once(TEXT_END))
            .map(|(t, _)| t)
            .unwrap_or(prompt);
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| w.chars().count() >= 6)
            .map(str::to_lowercase)
            .collect();
        let mut unique: Vec<String> = Vec::new();
        for w in words {
            if !unique.contains(&w) {
                unique.push(w);
            }
        }
        if prompt.contains(OPEN_MARKER) {
            let starter = STARTERS_OPEN.choose(&mut rng).expect("non-empty");
            let picked: Vec<&String> = unique.choose_multiple(&mut rng, 2).collect();
            match picked.as_slice() {
                [a, b] => format!("{starter} | {}, {}", capitalize(a), capitalize(b)),
                _ => format!("{starter} | Ideas, Questions"),
            }
        } else {
            let starter = STARTERS_INCENTIVE.choose(&mut rng).expect("non-empty");
            let subject = unique.choose(&mut rng).map(String::as_str).unwrap_or("this");
            let endings = [
                "changes the way people live every day",
                "could help us understand other places in the world",
                "is linked to many things we cannot see",
                "would be very different without the Sun",
                "depends on what happened a long time ago",
            ];
            let ending = endings[rng.gen_range(0..endings.len())];
            format!("{starter} | The {subject} {ending}")
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

impl LanguageModelBackend for MockBackend {
    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, BackendError> {
        let key = (prompt_hash(prompt), config.seed);
        Ok(match self.scripted.get(&key) {
            Some(s) => s.clone(),
            None => Self::synthesize(prompt, config.seed),
        })
    }

    fn name(&self) -> &str {
        "mock"
    }
}

/// Wraps another backend and fails the listed call numbers (1-based).
pub struct FailingBackend<B> {
    inner: B,
    fail_on: Vec<usize>,
    calls: AtomicUsize,
}

impl<B: LanguageModelBackend> FailingBackend<B> {
    pub fn new(inner: B, fail_on: impl IntoIterator<Item = usize>) -> Self {
        Self { inner, fail_on: fail_on.into_iter().collect(), calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: LanguageModelBackend> LanguageModelBackend for FailingBackend<B> {
    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if self.fail_on.contains(&n) {
            return Err(BackendError::Transport(format!("injected failure on call {n}")));
        }
        self.inner.complete(prompt, config)
    }

    fn name(&self) -> &str {
        "failing"
    }
}
