use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::backend::{BackendError, LanguageModelBackend};
use super::parse::{parse_cue_output, ParseError};
use super::prompt::{build_prompt, PromptError, PromptTemplates};
use super::review::{sample_for_review, screen_offensive, Blocklist};
use super::{CueMode, CueSet, GenerationConfig, Provenance};
use crate::corpus::ResourceText;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("n must be at least 1")]
    ZeroCandidates,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid generation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCandidate {
    pub call_index: usize,
    pub prompt_id: String,
    pub prompt: String,
    pub config: GenerationConfig,
    pub raw_output: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallFailure {
    pub call_index: usize,
    pub error: BackendError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationBatch {
    pub outputs: Vec<RawCandidate>,
    pub failures: Vec<CallFailure>,
}

fn prompt_id(mode: CueMode, prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    let hex: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    format!("{}-{hex}", mode.as_str())
}

/// Issues exactly `n` sequential backend calls for one text. Call `i` uses
/// `seed + i` when the config carries a seed. Failed calls are recorded and
/// the remaining calls still run.
pub fn generate_candidates(
    t: &ResourceText,
    mode: CueMode,
    backend: &dyn LanguageModelBackend,
    config: &GenerationConfig,
    n: usize,
    templates: &PromptTemplates,
) -> Result<GenerationBatch, PipelineError> {
    if n == 0 {
        return Err(PipelineError::ZeroCandidates);
    }
    config.validate().map_err(PipelineError::Config)?;
    let prompt = build_prompt(t, mode, templates)?;
    let pid = prompt_id(mode, &prompt);
    let mut batch = GenerationBatch::default();
    for call_index in 0..n {
        let call_config = GenerationConfig { seed: config.seed.map(|s| s.wrapping_add(call_index as u64)), ..config.clone() };
        match backend.complete(&prompt, &call_config) {
            Ok(raw_output) => batch.outputs.push(RawCandidate {
                call_index,
                prompt_id: pid.clone(),
                prompt: prompt.clone(),
                config: call_config,
                raw_output,
            }),
            Err(error) => batch.failures.push(CallFailure { call_index, error }),
        }
    }
    Ok(batch)
}

#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub config: GenerationConfig,
    pub templates: PromptTemplates,
    pub candidates_per_text: usize,
    pub sample_size: usize,
    pub sample_seed: u64,
    pub blocklist: Blocklist,
}

/// Outcome of generate → parse → sample → screen for one text and mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub batch: GenerationBatch,
    pub parse_failures: Vec<(usize, ParseError)>,
    /// Sampled, screened, still pending.
    pub cues: Vec<CueSet>,
}

impl PipelineRun {
    pub fn execute(
        t: &ResourceText,
        locale: &str,
        mode: CueMode,
        backend: &dyn LanguageModelBackend,
        settings: &PipelineSettings,
    ) -> Result<Self, PipelineError> {
        let batch = generate_candidates(t, mode, backend, &settings.config, settings.candidates_per_text, &settings.templates)?;
        let mut parsed = Vec::new();
        let mut parse_failures = Vec::new();
        for c in &batch.outputs {
            match parse_cue_output(&c.raw_output, mode) {
                Ok(content) => {
                    // seeded calls are named by seed, unseeded ones by call index
                    let tag = c.config.seed.map_or_else(|| format!("c{}", c.call_index), |s| s.to_string());
                    let id = format!("{}-{}-{}", t.id, mode.as_str(), tag);
                    let provenance = Provenance::Generated {
                        config: c.config.clone(),
                        prompt_id: c.prompt_id.clone(),
                        raw_output: c.raw_output.clone(),
                    };
                    parsed.push(CueSet::pending(id, t.id.clone(), content, provenance));
                }
                Err(e) => parse_failures.push((c.call_index, e)),
            }
        }
        let seed = settings.sample_seed ^ super::backend::prompt_hash(t.id.as_str());
        let mut cues = sample_for_review(&parsed, settings.sample_size, seed);
        for c in &mut cues {
            c.screen = Some(screen_offensive(c, &settings.blocklist, locale));
        }
        Ok(Self { batch, parse_failures, cues })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cue_pipeline::{FailingBackend, MockBackend};
    use crate::samples::sample_corpus;

    fn text() -> ResourceText {
        sample_corpus().text(&"big-bang".into()).unwrap().clone()
    }

    #[test]
    fn n_calls_are_reproducible() {
        let cfg = GenerationConfig { seed: Some(11), ..Default::default() };
        let run = || generate_candidates(&text(), CueMode::Open, &MockBackend::new(), &cfg, 5, &PromptTemplates::default()).unwrap();
        let a = run();
        assert_eq!(a.outputs.len(), 5);
        assert!(a.failures.is_empty());
        assert_eq!(a, run());
        assert!(a.outputs.iter().all(|o| o.prompt_id == a.outputs[0].prompt_id));
    }

    #[test]
    fn zero_candidates_is_rejected() {
        let cfg = GenerationConfig::default();
        assert_eq!(
            generate_candidates(&text(), CueMode::Open, &MockBackend::new(), &cfg, 0, &PromptTemplates::default()),
            Err(PipelineError::ZeroCandidates)
        );
    }

    #[test]
    fn partial_results_survive_a_failing_call() {
        let cfg = GenerationConfig { seed: Some(1), ..Default::default() };
        let backend = FailingBackend::new(MockBackend::new(), [2]);
        let batch = generate_candidates(&text(), CueMode::Incentive, &backend, &cfg, 3, &PromptTemplates::default()).unwrap();
        assert_eq!(batch.outputs.len(), 2);
        assert_eq!(batch.failures.len(), 1);
        assert_eq!(batch.failures[0].call_index, 1);
        assert_eq!(backend.calls(), 3);
    }

    #[test]
    fn invalid_temperature_is_rejected() {
        let cfg = GenerationConfig { temperature: 1.5, ..Default::default() };
        assert!(matches!(
            generate_candidates(&text(), CueMode::Open, &MockBackend::new(), &cfg, 1, &PromptTemplates::default()),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn execute_produces_screened_pending_cues() {
        let settings = PipelineSettings {
            config: GenerationConfig { seed: Some(3), ..Default::default() },
            templates: PromptTemplates::default(),
            candidates_per_text: 10,
            sample_size: 4,
            sample_seed: 9,
            blocklist: Blocklist::new("en", ["gross"]),
        };
        let run = PipelineRun::execute(&text(), "en", CueMode::Open, &MockBackend::new(), &settings).unwrap();
        assert_eq!(run.cues.len(), 4);
        assert!(run.parse_failures.is_empty());
        assert!(run.cues.iter().all(|c| c.screen.is_some() && !c.is_approved()));
    }
}
