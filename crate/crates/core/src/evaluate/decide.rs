use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reid::{Accuracy, AccuracyTable, MatchResult};

const TAU_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    #[serde(rename = "t60")]
    Threshold60,
    #[serde(rename = "t80")]
    Threshold80,
    Vote,
}

impl DecisionRule {
    pub const ALL: [DecisionRule; 3] = [
        DecisionRule::Threshold60,
        DecisionRule::Threshold80,
        DecisionRule::Vote,
    ];

    pub fn tau(self) -> Option<f64> {
        match self {
            DecisionRule::Threshold60 => Some(0.6),
            DecisionRule::Threshold80 => Some(0.8),
            DecisionRule::Vote => None,
        }
    }
}

/// Identity assigned to one video by one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoDecision {
    pub video_id: String,
    pub method: String,
    pub rule: DecisionRule,
    /// `None` means unidentified.
    pub decided_label: Option<String>,
    pub true_label: String,
    pub correct: bool,
}

fn counts<S: AsRef<str>>(labels: &[S]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for l in labels {
        *m.entry(l.as_ref()).or_insert(0) += 1;
    }
    m
}

/// Label shared by at least a `tau` fraction of frames, if any.
pub fn decide_threshold<S: AsRef<str>>(labels: &[S], tau: f64) -> Option<String> {
    if labels.is_empty() {
        return None;
    }
    let total = labels.len() as f64;
    counts(labels)
        .into_iter()
        .filter(|&(_, n)| n as f64 / total >= tau - TAU_EPS)
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(l, _)| l.to_string())
}

/// Plurality label. Ties go to the larger summed similarity, then to the
/// lexicographically smallest label.
pub fn decide_vote<S: AsRef<str>>(labels: &[S], similarities: &[f64]) -> Result<String> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if labels.len() != similarities.len() {
        return Err(Error::LengthMismatch(labels.len(), similarities.len()));
    }
    let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for (l, &s) in labels.iter().zip(similarities) {
        let e = tally.entry(l.as_ref()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += s;
    }
    // BTreeMap iterates labels ascending; only strictly better entries replace the leader.
    let mut best: Option<(&str, usize, f64)> = None;
    for (l, (n, s)) in tally {
        let better = match best {
            None => true,
            Some((_, bn, bs)) => n > bn || (n == bn && s > bs),
        };
        if better {
            best = Some((l, n, s));
        }
    }
    Ok(best
        .map(|(l, _, _)| l.to_string())
        .expect("non-empty tally"))
}

/// Applies all three rules to one video's frame-level matches.
pub fn decide_video(
    video_id: &str,
    method: &str,
    true_label: &str,
    matches: &[MatchResult],
) -> Result<[VideoDecision; 3]> {
    let labels: Vec<&str> = matches.iter().map(|m| m.predicted_label.as_str()).collect();
    let sims: Vec<f64> = matches.iter().map(|m| m.similarity).collect();
    let make = |rule, decided: Option<String>| VideoDecision {
        video_id: video_id.to_string(),
        method: method.to_string(),
        rule,
        correct: decided.as_deref() == Some(true_label),
        decided_label: decided,
        true_label: true_label.to_string(),
    };
    let vote = if labels.is_empty() {
        None
    } else {
        Some(decide_vote(&labels, &sims)?)
    };
    Ok([
        make(DecisionRule::Threshold60, decide_threshold(&labels, 0.6)),
        make(DecisionRule::Threshold80, decide_threshold(&labels, 0.8)),
        make(DecisionRule::Vote, vote),
    ])
}

/// Video-level accuracy; unidentified videos count as incorrect.
pub fn video_accuracy(decisions: &[VideoDecision]) -> Result<AccuracyTable> {
    if decisions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut overall = Accuracy::default();
    let mut per_label: BTreeMap<String, Accuracy> = BTreeMap::new();
    for d in decisions {
        overall.record(d.correct);
        per_label
            .entry(d.true_label.clone())
            .or_default()
            .record(d.correct);
    }
    Ok(AccuracyTable { overall, per_label })
}
