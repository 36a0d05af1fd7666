//! Study measures per participant and per condition, the statistics the
//! comparisons rely on, and the CSV report.
//!
//! All metrics read the reconciled view: a human annotation record always
//! beats the machine label it contradicts.

mod metrics;
mod report;
pub mod special;
mod stats;
mod survey;

pub use metrics::{
    group_summary, participant_metrics, score_capture, FluencyScore, MetricsContext, ParticipantMetrics, ReportMode,
    SUMMARY_METRICS,
};
pub use report::{export_report, MACHINE_ONLY_WATERMARK};
pub use stats::{
    fisher_z_compare, mean, one_way_anova, pearson_r, summarize, two_prop_z, variance, welch_t, Anova, StatsError,
    Summary, TTest, ZTest,
};
pub use survey::{fluency_delta, pre_post_delta, survey_deltas, PrePost, SurveyPhase, SurveyResponse};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("no participants")]
    Empty,
    #[error("session `{0}` has not finished training")]
    IncompleteSession(String),
    #[error("{} machine divergence label(s) still need a human label: {}", .0.len(), .0.join(", "))]
    UnresolvedLabels(Vec<String>),
    #[error("missing {0} measurement")]
    MissingPhase(&'static str),
    #[error("pre and post responses belong to different participants or instruments")]
    MismatchedResponses,
    #[error("survey `{instrument}`: {message}")]
    InvalidSurvey { instrument: String, message: String },
    #[error("unknown text `{0}`")]
    UnknownText(String),
    #[error("no question lexicon for locale `{0}`")]
    LexiconMissing(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
