//! Scoring sentiment predictions against realized response labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::labeling::{LabeledEvent, ResponseLabel};
use crate::market_data::{EventType, MarketCapClass};
use crate::sentiment::{discretize, DocKind, DocumentScore, SentimentPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownCell {
    pub event_type: EventType,
    pub cap_class: MarketCapClass,
    pub n_total: usize,
    pub n_correct: usize,
    pub success_rate: Option<f64>,
}

/// Rows and columns of `confusion` are ordered positive, negative, neutral;
/// rows are the prediction, columns the realized label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scorer_id: String,
    pub doc_kind: DocKind,
    pub n_total: usize,
    pub n_correct: usize,
    pub success_rate: Option<f64>,
    pub n_missing: usize,
    pub breakdown: Vec<BreakdownCell>,
    pub policy: SentimentPolicy,
    pub confusion: [[usize; 3]; 3],
    pub label_set_digest: String,
}

fn rate(correct: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| correct as f64 / total as f64)
}

/// Order-independent fingerprint of an event→label mapping.
pub fn label_set_digest(labels: &[LabeledEvent]) -> String {
    let sorted: BTreeMap<&str, ResponseLabel> = labels
        .iter()
        .map(|l| (l.event_id.as_str(), l.label))
        .collect();
    let mut h = Sha256::new();
    for (id, label) in sorted {
        h.update(id.as_bytes());
        h.update(b":");
        h.update(label.as_str().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Compares discretized scores of one document kind with the labels.
///
/// Events that have no score of the requested kind are left out of the
/// denominator and counted in `n_missing`.
pub fn evaluate(
    scores: &[DocumentScore],
    labels: &[LabeledEvent],
    policy: &SentimentPolicy,
    kind: DocKind,
) -> Result<EvaluationReport> {
    let by_id: BTreeMap<&str, &LabeledEvent> =
        labels.iter().map(|l| (l.event_id.as_str(), l)).collect();
    if by_id.len() != labels.len() {
        return Err(Error::Validation(
            "label set contains duplicate event ids".into(),
        ));
    }

    let of_kind: Vec<&DocumentScore> = scores.iter().filter(|s| s.doc_kind == kind).collect();
    let scorers: BTreeSet<&str> = of_kind.iter().map(|s| s.scorer_id.as_str()).collect();
    if scorers.len() > 1 {
        return Err(Error::Validation(format!(
            "scores for {kind} mix several scorers: {scorers:?}"
        )));
    }
    let scorer_id = scorers
        .into_iter()
        .next()
        .or_else(|| scores.first().map(|s| s.scorer_id.as_str()))
        .unwrap_or("unknown")
        .to_string();

    let mut seen = BTreeSet::new();
    let mut confusion = [[0usize; 3]; 3];
    let mut cells: BTreeMap<(EventType, MarketCapClass), (usize, usize)> = BTreeMap::new();
    let (mut n_total, mut n_correct) = (0, 0);
    for s in &of_kind {
        let labeled = by_id.get(s.event_id.as_str()).ok_or_else(|| {
            Error::Validation(format!(
                "document {} refers to unlabeled event {}",
                s.doc_id, s.event_id
            ))
        })?;
        if !seen.insert(s.event_id.as_str()) {
            return Err(Error::Validation(format!(
                "event {} has more than one {kind} score",
                s.event_id
            )));
        }
        let predicted = discretize(s.score, policy);
        let correct = predicted == labeled.label;
        confusion[predicted.index()][labeled.label.index()] += 1;
        let cell = cells
            .entry((labeled.event_type, labeled.cap_class))
            .or_default();
        cell.0 += 1;
        n_total += 1;
        if correct {
            cell.1 += 1;
            n_correct += 1;
        }
    }

    Ok(EvaluationReport {
        scorer_id,
        doc_kind: kind,
        n_total,
        n_correct,
        success_rate: rate(n_correct, n_total),
        n_missing: labels.len() - seen.len(),
        breakdown: cells
            .into_iter()
            .map(|((event_type, cap_class), (t, c))| BreakdownCell {
                event_type,
                cap_class,
                n_total: t,
                n_correct: c,
                success_rate: rate(c, t),
            })
            .collect(),
        policy: *policy,
        confusion,
        label_set_digest: label_set_digest(labels),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scorer_id: String,
    pub doc_kind: DocKind,
    pub n_total: usize,
    pub n_correct: usize,
    pub success_rate: Option<f64>,
    /// Difference from the first row's success rate.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub scorer_id: String,
    pub doc_kind: DocKind,
    pub event_type: EventType,
    pub cap_class: MarketCapClass,
    pub n_total: usize,
    pub n_correct: usize,
    pub success_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerComparison {
    pub policy: SentimentPolicy,
    pub label_set_digest: String,
    pub rows: Vec<ComparisonRow>,
    pub cells: Vec<ComparisonCell>,
}

/// Side-by-side success rates. Rows are sorted by (scorer, kind) and cells
/// by (scorer, kind, event type, cap class).
pub fn compare_scorers(reports: &[EvaluationReport]) -> Result<ScorerComparison> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Validation("no reports to compare".into()))?;
    for r in reports {
        if r.label_set_digest != first.label_set_digest {
            return Err(Error::Validation(format!(
                "report {}/{} was evaluated on a different label set",
                r.scorer_id, r.doc_kind
            )));
        }
        if r.policy != first.policy {
            return Err(Error::Validation(format!(
                "report {}/{} used neutral band {} instead of {}",
                r.scorer_id, r.doc_kind, r.policy.neutral_band, first.policy.neutral_band
            )));
        }
    }

    let mut sorted: Vec<&EvaluationReport> = reports.iter().collect();
    sorted.sort_by(|a, b| (&a.scorer_id, a.doc_kind).cmp(&(&b.scorer_id, b.doc_kind)));
    let baseline = sorted[0].success_rate;
    let rows = sorted
        .iter()
        .map(|r| ComparisonRow {
            scorer_id: r.scorer_id.clone(),
            doc_kind: r.doc_kind,
            n_total: r.n_total,
            n_correct: r.n_correct,
            success_rate: r.success_rate,
            delta: r.success_rate.zip(baseline).map(|(a, b)| a - b),
        })
        .collect();
    let cells = sorted
        .iter()
        .flat_map(|r| {
            r.breakdown.iter().map(|c| ComparisonCell {
                scorer_id: r.scorer_id.clone(),
                doc_kind: r.doc_kind,
                event_type: c.event_type,
                cap_class: c.cap_class,
                n_total: c.n_total,
                n_correct: c.n_correct,
                success_rate: c.success_rate,
            })
        })
        .collect();
    Ok(ScorerComparison {
        policy: first.policy,
        label_set_digest: first.label_set_digest.clone(),
        rows,
        cells,
    })
}
