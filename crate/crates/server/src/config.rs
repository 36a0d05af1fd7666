use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use kidsask_core::cue_pipeline::{Blocklist, GenerationConfig, PipelineSettings, PromptTemplates};
use kidsask_core::dialogue::UtterancePool;
use kidsask_core::scoring::{LexiconSet, Scorer, Thresholds};
use serde::{Deserialize, Serialize};

/// Settings read from `kidsask.toml`. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub model: GenerationConfig,
    pub pipeline: PipelineConfig,
    pub prompts: PromptTemplates,
    pub thresholds: Thresholds,
    /// Extra question lexicons (TOML files) layered over the built-in ones.
    pub lexicons: Vec<PathBuf>,
    pub utterances: UtterancePool,
    pub remote: RemoteConfig,
    pub auth: AuthConfig,
    pub server: ServerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub candidates_per_text: usize,
    pub sample_size: usize,
    pub sample_seed: u64,
    /// TOML file of `locale = ["word", ...]` entries.
    pub blocklist: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { candidates_per_text: 10, sample_size: 6, sample_seed: 42, blocklist: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// OpenAI-compatible completions endpoint.
    pub endpoint: String,
    pub timeout_secs: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self { endpoint: "https://api.openai.com/v1/completions".into(), timeout_secs: 60 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthConfig {
    pub child_tokens: Vec<String>,
    /// Reviewer token → annotator id.
    pub reviewers: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    pub quiz_shuffle_seed: Option<u64>,
    /// JSON list of survey responses used by the report.
    pub surveys: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into(), data_dir: PathBuf::from("data"), quiz_shuffle_seed: None, surveys: None }
    }
}

impl AppConfig {
    pub fn from_toml(src: &str) -> anyhow::Result<Self> {
        let mut cfg: Self = toml::from_str(src)?;
        // conditions left out of [utterances.templates] keep the built-in pool
        for (condition, templates) in UtterancePool::default().templates {
            cfg.utterances.templates.entry(condition).or_insert(templates);
        }
        cfg.model.validate().map_err(anyhow::Error::msg)?;
        if let Err(e) = cfg.utterances.validate() {
            bail!("utterances: {e}");
        }
        if cfg.pipeline.sample_size == 0 || cfg.pipeline.candidates_per_text == 0 {
            bail!("pipeline sizes must be positive");
        }
        Ok(cfg)
    }

    /// Reads the file if it exists; defaults otherwise.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&src).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn scorer(&self) -> anyhow::Result<Scorer> {
        let mut lexicons = LexiconSet::builtin();
        for path in &self.lexicons {
            let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            lexicons.insert(LexiconSet::from_toml(&src).with_context(|| format!("lexicon {}", path.display()))?);
        }
        Ok(Scorer::new(lexicons, self.thresholds.clone()))
    }

    pub fn blocklist(&self) -> anyhow::Result<Blocklist> {
        match &self.pipeline.blocklist {
            None => Ok(Blocklist::default()),
            Some(p) => {
                let src = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Blocklist::from_toml(&src).with_context(|| format!("blocklist {}", p.display()))
            }
        }
    }

    pub fn pipeline_settings(&self) -> anyhow::Result<PipelineSettings> {
        Ok(PipelineSettings {
            config: self.model.clone(),
            templates: self.prompts.clone(),
            candidates_per_text: self.pipeline.candidates_per_text,
            sample_size: self.pipeline.sample_size,
            sample_seed: self.pipeline.sample_seed,
            blocklist: self.blocklist()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kidsask_core::dialogue::Condition;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(AppConfig::from_toml("").unwrap(), AppConfig::default());
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg = AppConfig::from_toml(
            r#"
            [model]
            temperature = 0.3
            seed = 7

            [thresholds]
            needs_human_below = 0.9

            [auth]
            child_tokens = ["kid"]
            reviewers = { rev = "ann-1" }

            [utterances]
            starters = ["Why", "How"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.model.model_name, "text-davinci-002");
        assert_eq!(cfg.model.seed, Some(7));
        assert_eq!(cfg.thresholds.relatedness_min_shared, 2);
        assert_eq!(cfg.auth.reviewers["rev"], "ann-1");
        assert_eq!(cfg.utterances.starters, ["Why", "How"]);
        assert_eq!(cfg.utterances.templates[&Condition::AutoOpen].len(), 3);
    }

    #[test]
    fn utterance_pools_load_from_toml() {
        let cfg = AppConfig::from_toml(
            r#"
            [[utterances.templates.hand_incentive]]
            id = "h1"
            template = "Use \"{question_word}\"; the answer is \"{answer_sentence}\"."
            [[utterances.templates.hand_incentive]]
            id = "h2"
            template = "Start with \"{question_word}\". Answer: \"{answer_sentence}\"."
            "#,
        )
        .unwrap();
        assert_eq!(cfg.utterances.templates[&Condition::HandIncentive][1].id, "h2");
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(AppConfig::from_toml("[model]\ntemperature = 3.0").is_err());
        assert!(AppConfig::from_toml("[nonsense]\nx = 1").is_err());
    }
}
