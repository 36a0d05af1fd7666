use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kidsask_core::analytics::{export_report, participant_metrics, MetricsContext, ReportMode, SurveyResponse};
use kidsask_core::corpus::{validate_text, Corpus};
use kidsask_core::cue_pipeline::{
    qword_stats, CueAnnotations, CueMode, LanguageModelBackend, MockBackend, PipelineRun, ReviewDecision, Verdict,
};
use kidsask_core::dialogue::{assign_conditions, Condition, ParticipantProfile, Session};
use kidsask_core::ids::{AnnotatorId, CueId, ParticipantId, QuestionId, SessionId, TextId};
use kidsask_core::samples;
use kidsask_core::scoring::{AnnotationLedger, LabelSource, QuestionContext, QuestionSlot, Scorer};
use kidsask_core::store::{ContentDatabase, EventStore, FileEventStore};

use crate::config::AppConfig;
use crate::remote::RemoteBackend;
use crate::state::{check_servable, AppState, ServiceOptions};

#[derive(Parser, Debug)]
#[command(name = "kidsask", version, about = "Cue pipeline, training service and study analytics")]
pub struct Cli {
    /// Configuration file (TOML). Missing file means defaults.
    #[arg(long, global = true, default_value = "kidsask.toml")]
    pub config: PathBuf,
    /// Data directory; overrides `server.data_dir`.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a content document and make it the content database.
    Ingest(IngestArgs),
    /// Generate pending cue sets for one text and publish them for review.
    GenCues(GenCuesArgs),
    /// List, approve or reject cue sets.
    Review {
        #[command(subcommand)]
        action: ReviewAction,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Score a file of questions (one per line) against a text; CSV on stdout.
    Score(ScoreArgs),
    /// Study report over completed sessions; CSV on stdout.
    Report {
        /// Use unreviewed machine labels (watermarked triage output).
        #[arg(long)]
        machine_only: bool,
    },
    /// Assign conditions from participant profiles.
    Assign(AssignArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Content document (JSON). Omit with --sample.
    pub source: Option<PathBuf>,
    /// Use the bundled sample corpus.
    #[arg(long, conflicts_with = "source")]
    pub sample: bool,
    /// Also add pre-approved demonstration cues for every text and condition.
    #[arg(long)]
    pub demo_cues: bool,
    /// Replace an existing content database.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Args, Debug)]
pub struct GenCuesArgs {
    #[arg(long)]
    pub text_id: String,
    #[arg(long, value_parser = parse_mode)]
    pub mode: CueMode,
    /// Candidates to request from the model.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "mock")]
    pub backend: BackendKind,
}

fn parse_mode(s: &str) -> Result<CueMode, String> {
    s.parse()
}

#[derive(Subcommand, Debug)]
pub enum ReviewAction {
    List {
        #[arg(long, default_value = "pending")]
        status: String,
    },
    Approve {
        cue_id: String,
        #[arg(long)]
        annotator: String,
        #[arg(long)]
        relatedness: u8,
        #[arg(long)]
        divergence_level: u8,
        /// 1 = very offensive .. 5 = not at all offensive.
        #[arg(long)]
        offensiveness: u8,
        #[arg(long)]
        override_screen: bool,
    },
    Reject {
        cue_id: String,
        #[arg(long)]
        annotator: String,
        #[arg(long)]
        reason: String,
    },
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long)]
    pub text_id: String,
    /// Cue on screen while the questions were typed (enables cue-usage).
    #[arg(long)]
    pub cue_id: Option<String>,
}

#[derive(Args, Debug)]
pub struct AssignArgs {
    /// Profiles as CSV (header row) or JSON list.
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Write the assignment here instead of `<data_dir>/assignments.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolved paths inside the data directory.
pub struct DataDir(pub PathBuf);

impl DataDir {
    pub fn content(&self) -> PathBuf {
        self.0.join("content.json")
    }

    pub fn assignments(&self) -> PathBuf {
        self.0.join("assignments.json")
    }

    pub fn load_content(&self) -> Result<ContentDatabase> {
        let path = self.content();
        ContentDatabase::load(&path).with_context(|| format!("loading {} (run `kidsask ingest` first)", path.display()))
    }

    pub fn events(&self) -> Result<FileEventStore> {
        Ok(FileEventStore::open(&self.0)?)
    }

    pub fn load_assignments(&self) -> Result<BTreeMap<ParticipantId, Condition>> {
        let path = self.assignments();
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        let src = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&src).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn ingest(data: &DataDir, args: &IngestArgs, now: DateTime<Utc>) -> Result<String> {
    let corpus = match (&args.source, args.sample) {
        (Some(p), _) => {
            let src = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            Corpus::ingest(&src).with_context(|| format!("ingesting {}", p.display()))?
        }
        (None, true) => samples::sample_corpus(),
        (None, false) => bail!("give a content document or --sample"),
    };
    if data.content().exists() && !args.force {
        bail!("{} exists; pass --force to replace it", data.content().display());
    }
    let mut out = String::new();
    for t in &corpus.texts {
        let report = validate_text(t);
        for w in &report.warnings {
            out.push_str(&format!("warning: text `{}`: {w}\n", t.id));
        }
    }
    let mut db = ContentDatabase::new(corpus);
    if args.demo_cues {
        let cues = samples::demo_cues(db.corpus(), now);
        db.import_reviewed(cues)?;
    }
    std::fs::create_dir_all(&data.0).with_context(|| format!("creating {}", data.0.display()))?;
    db.save(&data.content())?;
    let c = db.corpus();
    out.push_str(&format!(
        "ingested {} themes, {} texts, {} quiz items; {} cue sets\n",
        c.themes.len(),
        c.texts.len(),
        c.quiz_items.len(),
        db.all_cues().len()
    ));
    Ok(out)
}

pub fn gen_cues(cfg: &AppConfig, data: &DataDir, args: &GenCuesArgs, backend: &dyn LanguageModelBackend) -> Result<String> {
    let mut db = data.load_content()?;
    let text_id = TextId::new(args.text_id.clone());
    let text = db.corpus().text(&text_id).ok_or_else(|| anyhow!("unknown text `{text_id}`"))?.clone();
    let locale = db.corpus().theme(&text.theme_id).map_or("en".to_string(), |t| t.locale.clone());
    let mut settings = cfg.pipeline_settings()?;
    settings.candidates_per_text = args.n;
    let run = PipelineRun::execute(&text, &locale, args.mode, backend, &settings)?;
    let mut cues = run.cues;
    // unseeded reruns reuse call-index ids; keep them apart with the revision
    if cfg.model.seed.is_none() {
        let taken: HashSet<&CueId> = db.all_cues().iter().map(|c| &c.id).collect();
        if cues.iter().any(|c| taken.contains(&c.id)) {
            for c in &mut cues {
                c.id = CueId::new(format!("{}-r{}", c.id, db.revision));
            }
        }
    }
    let flagged = cues.iter().filter(|c| c.screen.as_ref().is_some_and(|s| s.flagged)).count();
    let stats = qword_stats(&cues, &[]);
    let published = db.publish(cues)?;
    db.save(&data.content())?;
    let mut out = format!(
        "{} calls ({} failed), {} unparseable, {} published as pending ({} flagged by the screen); {} distinct question words\n",
        run.batch.outputs.len() + run.batch.failures.len(),
        run.batch.failures.len(),
        run.parse_failures.len(),
        published,
        flagged,
        stats.histogram.len(),
    );
    for f in &run.batch.failures {
        out.push_str(&format!("call {} failed: {}\n", f.call_index, f.error));
    }
    for (i, e) in &run.parse_failures {
        out.push_str(&format!("call {i} unparseable: {e}\n"));
    }
    Ok(out)
}

pub fn review(data: &DataDir, action: &ReviewAction, now: DateTime<Utc>) -> Result<String> {
    let mut db = data.load_content()?;
    let (id, decision) = match action {
        ReviewAction::List { status } => {
            let mut out = String::new();
            for c in db.cues_with_status(status) {
                let flag = if c.screen.as_ref().is_some_and(|s| s.flagged) { " [FLAGGED]" } else { "" };
                out.push_str(&format!("{}\t{}\t{}\t{}{flag}\n", c.id, c.text_id, c.mode().as_str(), c.content.texts().join(" | ")));
            }
            return Ok(out);
        }
        ReviewAction::Approve { cue_id, annotator, relatedness, divergence_level, offensiveness, override_screen } => (
            cue_id,
            ReviewDecision {
                verdict: Verdict::Approved,
                annotations: Some(CueAnnotations::new(*relatedness, *divergence_level, *offensiveness)),
                annotator: AnnotatorId::new(annotator.clone()),
                override_screen: *override_screen,
            },
        ),
        ReviewAction::Reject { cue_id, annotator, reason } => (
            cue_id,
            ReviewDecision {
                verdict: Verdict::Rejected { reason: reason.clone() },
                annotations: None,
                annotator: AnnotatorId::new(annotator.clone()),
                override_screen: false,
            },
        ),
    };
    let status = db.review(&CueId::new(id.clone()), decision, now)?.review_status.label();
    db.save(&data.content())?;
    Ok(format!("{id}: {status} (revision {})\n", db.revision))
}

pub const SCORE_COLUMNS: [&str; 11] = [
    "question_id",
    "accepted",
    "reject_reason",
    "divergent",
    "confidence",
    "needs_human",
    "used_cues",
    "high_level",
    "construction",
    "qword_use",
    "total",
];

/// Scores questions in order; a repeat of an earlier accepted question is a
/// duplicate.
pub fn score_questions(db: &ContentDatabase, scorer: &Scorer, text_id: &str, cue_id: Option<&str>, questions: &[String]) -> Result<String> {
    let text = db.corpus().text(&TextId::new(text_id)).ok_or_else(|| anyhow!("unknown text `{text_id}`"))?;
    let theme = db.corpus().theme(&text.theme_id);
    let locale = theme.map_or("en", |t| t.locale.as_str());
    let lex = scorer.lexicon(locale)?;
    let cue = match cue_id {
        Some(id) => Some(db.cue(&CueId::new(id)).ok_or_else(|| anyhow!("unknown cue `{id}`"))?),
        None => None,
    };
    let ctx = QuestionContext { text, theme_title: theme.map(|t| t.title.as_str()), cue };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(SCORE_COLUMNS)?;
    let mut prior = HashSet::new();
    let session = SessionId::new("cli");
    for (i, raw) in questions.iter().enumerate() {
        let slot = QuestionSlot { id: QuestionId::new(format!("q{}", i + 1)), session_id: session.clone(), turn_index: i };
        let q = scorer.score(slot, raw, &ctx, &prior, lex);
        if q.is_accepted() {
            prior.insert(q.normalized.clone());
        }
        let reject = match q.acceptance {
            kidsask_core::scoring::Acceptance::Accepted => String::new(),
            kidsask_core::scoring::Acceptance::Rejected(r) => r.as_str().to_string(),
        };
        let d = q.divergence.as_ref();
        let confidence = d.map_or(String::new(), |d| match d.source {
            LabelSource::Machine { confidence } => format!("{confidence:.6}"),
            LabelSource::Human => "1.000000".into(),
        });
        let opt = |v: Option<String>| v.unwrap_or_default();
        let qual = q.quality;
        w.write_record([
            q.id.to_string(),
            q.is_accepted().to_string(),
            reject,
            opt(d.map(|d| (d.label == kidsask_core::scoring::DivergenceLabel::Divergent).to_string())),
            confidence,
            opt(d.map(|d| d.needs_human.to_string())),
            opt(q.used_cues.map(|u| u.used.to_string())),
            opt(qual.map(|b| b.high_level.to_string())),
            opt(qual.map(|b| b.construction.to_string())),
            opt(qual.map(|b| b.qword_use.to_string())),
            opt(qual.map(|b| b.total.to_string())),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn load_surveys(path: Option<&Path>) -> Result<Vec<SurveyResponse>> {
    let Some(path) = path else { return Ok(Vec::new()) };
    let src = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&src).with_context(|| format!("parsing {}", path.display()))
}

pub fn report(cfg: &AppConfig, data: &DataDir, mode: ReportMode) -> Result<String> {
    let db = data.load_content()?;
    let store = data.events()?;
    let scorer = cfg.scorer()?;
    let mut ledger = AnnotationLedger::new();
    for r in store.annotations()? {
        ledger.insert(r)?;
    }
    let surveys = load_surveys(cfg.server.surveys.as_deref())?;
    let ctx = MetricsContext { corpus: db.corpus(), scorer: &scorer, ledger: &ledger, surveys: &surveys, mode };
    let mut rows = Vec::new();
    for id in store.sessions()? {
        let s = Session::replay(&store.load(&id)?).with_context(|| format!("replaying {id}"))?;
        if s.is_complete() {
            rows.push(participant_metrics(&s, &ctx).with_context(|| format!("session {id}"))?);
        }
    }
    Ok(export_report(&rows, mode))
}

pub fn read_profiles(path: &Path) -> Result<Vec<ParticipantProfile>> {
    let src = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(serde_json::from_slice(&src)?);
    }
    let mut r = csv::Reader::from_reader(src.as_slice());
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row.with_context(|| format!("parsing {}", path.display()))?);
    }
    Ok(out)
}

pub fn assign(data: &DataDir, args: &AssignArgs) -> Result<String> {
    let profiles = read_profiles(&args.profiles)?;
    let assignment = assign_conditions(&profiles, args.seed, args.trials)?;
    let out = args.out.clone().unwrap_or_else(|| data.assignments());
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&out, serde_json::to_vec_pretty(&assignment)?).with_context(|| format!("writing {}", out.display()))?;
    let mut counts = BTreeMap::new();
    for c in assignment.values() {
        *counts.entry(*c).or_insert(0) += 1;
    }
    let summary: Vec<String> = counts.iter().map(|(c, n)| format!("{c}={n}")).collect();
    Ok(format!("assigned {} participants ({}) → {}\n", assignment.len(), summary.join(", "), out.display()))
}

pub fn build_state(cfg: &AppConfig, data: &DataDir) -> Result<Arc<AppState>> {
    let db = data.load_content()?;
    check_servable(&db)?;
    let opts = ServiceOptions {
        scorer: cfg.scorer()?,
        utterances: cfg.utterances.clone(),
        auth: cfg.auth.clone(),
        assignments: data.load_assignments()?,
        surveys: load_surveys(cfg.server.surveys.as_deref())?,
        quiz_shuffle_seed: cfg.server.quiz_shuffle_seed,
        ..ServiceOptions::default()
    };
    let store: Arc<dyn EventStore> = Arc::new(data.events()?);
    AppState::new(db, Some(data.content()), store, opts)
}

pub async fn serve(state: Arc<AppState>, bind: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, crate::api::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = AppConfig::load(&cli.config)?;
    let data = DataDir(cli.data_dir.clone().unwrap_or_else(|| cfg.server.data_dir.clone()));
    let now = Utc::now();
    let out = match &cli.command {
        Command::Ingest(args) => ingest(&data, args, now)?,
        Command::GenCues(args) => {
            let backend: Box<dyn LanguageModelBackend> = match args.backend {
                BackendKind::Mock => Box::new(MockBackend::new()),
                BackendKind::Remote => Box::new(RemoteBackend::from_env(&cfg.remote)?),
            };
            gen_cues(&cfg, &data, args, backend.as_ref())?
        }
        Command::Review { action } => review(&data, action, now)?,
        Command::Serve { bind } => {
            let state = build_state(&cfg, &data)?;
            let bind = bind.clone().unwrap_or_else(|| cfg.server.bind.clone());
            tokio::runtime::Runtime::new()?.block_on(serve(state, &bind))?;
            String::new()
        }
        Command::Score(args) => {
            let db = data.load_content()?;
            let src = std::fs::read_to_string(&args.questions).with_context(|| format!("reading {}", args.questions.display()))?;
            let questions: Vec<String> = src.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect();
            score_questions(&db, &cfg.scorer()?, &args.text_id, args.cue_id.as_deref(), &questions)?
        }
        Command::Report { machine_only } => {
            let mode = if *machine_only { ReportMode::MachineOnly } else { ReportMode::StudyGrade };
            report(&cfg, &data, mode)?
        }
        Command::Assign(args) => assign(&data, args)?,
    };
    print!("{out}");
    Ok(())
}
