use std::collections::BTreeSet;

use super::metrics::{ParticipantMetrics, ReportMode};
use super::stats::summarize;
use crate::dialogue::Condition;

pub const MACHINE_ONLY_WATERMARK: &str =
    "# MACHINE-ONLY TRIAGE REPORT: divergence labels include unreviewed machine suggestions; not study-grade";

const METRIC_COLUMNS: [&str; 10] = [
    "accepted_unique",
    "divergent_pct",
    "convergent_pct",
    "mean_quality",
    "cue_usage_pct",
    "fluency_pre",
    "fluency_post",
    "fluency_delta",
    "fluency_pre_pct",
    "fluency_post_pct",
];

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Survey keys present in any row, sorted.
fn survey_keys(rows: &[ParticipantMetrics]) -> Vec<String> {
    rows.iter().flat_map(|m| m.survey_deltas.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect()
}

fn values(m: &ParticipantMetrics, surveys: &[String]) -> Vec<Option<f64>> {
    let mut v: Vec<Option<f64>> = METRIC_COLUMNS.iter().map(|c| m.metric(c)).collect();
    for key in surveys {
        let d = m.survey_deltas.get(key);
        v.extend([d.map(|d| d.pre), d.map(|d| d.post), d.map(|d| d.delta)]);
    }
    v
}

/// CSV study report: one `participant` row per participant (sorted by id),
/// then a `summary_n` / `summary_mean` / `summary_sd` block per condition.
/// Reals use six decimals; missing values are empty cells.
pub fn export_report(rows: &[ParticipantMetrics], mode: ReportMode) -> String {
    let surveys = survey_keys(rows);
    let mut header: Vec<String> = ["section", "participant_id", "condition"].map(String::from).to_vec();
    header.extend(METRIC_COLUMNS.map(String::from));
    for key in &surveys {
        header.extend(["pre", "post", "delta"].map(|s| format!("{key}_{s}")));
    }

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");

    let mut sorted: Vec<&ParticipantMetrics> = rows.iter().collect();
    sorted.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    for m in &sorted {
        let mut rec = vec!["participant".to_string(), m.participant_id.to_string(), m.condition.to_string()];
        rec.extend(values(m, &surveys).into_iter().map(fmt));
        w.write_record(&rec).expect("in-memory write");
    }

    for c in Condition::ALL {
        let group: Vec<Vec<Option<f64>>> =
            sorted.iter().filter(|m| m.condition == c).map(|m| values(m, &surveys)).collect();
        if group.is_empty() {
            continue;
        }
        let columns = group[0].len();
        let stats: Vec<_> = (0..columns)
            .map(|i| summarize(&group.iter().filter_map(|row| row[i]).collect::<Vec<_>>()))
            .collect();
        let n: Vec<String> = stats.iter().map(|s| s.map_or(0, |s| s.n).to_string()).collect();
        let mean: Vec<String> = stats.iter().map(|s| fmt(s.map(|s| s.mean))).collect();
        let sd: Vec<String> = stats.iter().map(|s| fmt(s.and_then(|s| s.sd))).collect();
        for (section, cells) in [("summary_n", n), ("summary_mean", mean), ("summary_sd", sd)] {
            let mut rec = vec![section.to_string(), String::new(), c.to_string()];
            rec.extend(cells);
            w.write_record(&rec).expect("in-memory write");
        }
    }

    let body = String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8");
    match mode {
        ReportMode::StudyGrade => body,
        ReportMode::MachineOnly => format!("{MACHINE_ONLY_WATERMARK}\n{body}"),
    }
}
