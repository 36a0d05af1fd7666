use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Condition;
use crate::ids::ParticipantId;

/// Numeric profile measures used for balancing, in column order.
pub const PROFILE_MEASURES: [&str; 7] = [
    "age",
    "device_use",
    "curiosity_trait",
    "perception_of_curiosity",
    "reading_ability",
    "qa_fluency_pre",
    "domain_quiz_score",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub participant_id: ParticipantId,
    pub age: Option<f64>,
    pub gender: Option<String>,
    pub device_use: Option<f64>,
    pub curiosity_trait: Option<f64>,
    pub perception_of_curiosity: Option<f64>,
    pub reading_ability: Option<f64>,
    pub qa_fluency_pre: Option<f64>,
    pub domain_quiz_score: Option<f64>,
}

impl ParticipantProfile {
    fn measures(&self) -> [Option<f64>; 7] {
        [
            self.age,
            self.device_use,
            self.curiosity_trait,
            self.perception_of_curiosity,
            self.reading_ability,
            self.qa_fluency_pre,
            self.domain_quiz_score,
        ]
    }

    fn first_missing(&self) -> Option<&'static str> {
        if self.gender.as_deref().is_none_or(str::is_empty) {
            return Some("gender");
        }
        self.measures()
            .iter()
            .zip(PROFILE_MEASURES)
            .find(|(v, _)| !v.is_some_and(f64::is_finite))
            .map(|(_, name)| name)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AssignmentError {
    #[error("profile `{participant}` is missing `{field}`")]
    IncompleteProfile { participant: String, field: &'static str },
    #[error("need at least 3 participants, got {0}")]
    TooFewParticipants(usize),
    #[error("participant `{0}` appears twice")]
    DuplicateParticipant(String),
    #[error("trials must be positive")]
    NoTrials,
}

/// Measures standardized across all participants (z-scores); a constant
/// measure becomes all zeros.
fn standardized(profiles: &[ParticipantProfile]) -> Vec<[f64; 7]> {
    let rows: Vec<[f64; 7]> = profiles.iter().map(|p| p.measures().map(|v| v.unwrap_or(0.0))).collect();
    let n = rows.len() as f64;
    let mut out = rows.clone();
    for m in 0..7 {
        let mean = rows.iter().map(|r| r[m]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[m] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let sd = var.sqrt();
        for (o, r) in out.iter_mut().zip(&rows) {
            o[m] = if sd > 0.0 { (r[m] - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// Largest between-group range of standardized group means over all measures.
/// `groups[i]` is the condition index (0..3) of participant `i`.
fn objective(z: &[[f64; 7]], groups: &[usize]) -> f64 {
    let mut worst = 0.0_f64;
    for m in 0..7 {
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        for (row, &g) in z.iter().zip(groups) {
            sums[g] += row[m];
            counts[g] += 1;
        }
        let means: Vec<f64> = (0..3).filter(|&g| counts[g] > 0).map(|g| sums[g] / counts[g] as f64).collect();
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi - lo);
    }
    worst
}

fn check(profiles: &[ParticipantProfile]) -> Result<(), AssignmentError> {
    if profiles.len() < 3 {
        return Err(AssignmentError::TooFewParticipants(profiles.len()));
    }
    let mut seen = BTreeSet::new();
    for p in profiles {
        if let Some(field) = p.first_missing() {
            return Err(AssignmentError::IncompleteProfile { participant: p.participant_id.to_string(), field });
        }
        if !seen.insert(&p.participant_id) {
            return Err(AssignmentError::DuplicateParticipant(p.participant_id.to_string()));
        }
    }
    Ok(())
}

/// Balance objective of an existing assignment (lower is better).
pub fn balance_objective(
    profiles: &[ParticipantProfile],
    assignment: &BTreeMap<ParticipantId, Condition>,
) -> Result<f64, AssignmentError> {
    check(profiles)?;
    let groups: Vec<usize> = profiles
        .iter()
        .map(|p| {
            assignment
                .get(&p.participant_id)
                .map(|c| usize::from(c.group() - 1))
                .ok_or_else(|| AssignmentError::IncompleteProfile {
                    participant: p.participant_id.to_string(),
                    field: "condition",
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(objective(&standardized(profiles), &groups))
}

/// Pseudo-randomized assignment: `trials` seeded shuffles, each dealt round
/// robin into the three conditions, keeping the best-balanced partition.
/// Group sizes differ by at most one.
pub fn assign_conditions(
    profiles: &[ParticipantProfile],
    seed: u64,
    trials: usize,
) -> Result<BTreeMap<ParticipantId, Condition>, AssignmentError> {
    check(profiles)?;
    if trials == 0 {
        return Err(AssignmentError::NoTrials);
    }
    let z = standardized(profiles);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    let mut groups = vec![0usize; profiles.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..trials {
        order.shuffle(&mut rng);
        for (slot, &p) in order.iter().enumerate() {
            groups[p] = slot % 3;
        }
        let score = objective(&z, &groups);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, groups.clone()));
        }
    }
    let (_, groups) = best.expect("at least one trial");
    Ok(profiles.iter().zip(groups).map(|(p, g)| (p.participant_id.clone(), Condition::ALL[g])).collect())
}
