//! Sentence posteriors, document scores, and the score-file wire format.
//!
//! A document score is the mean over sentences of `p_positive - p_negative`,
//! so it always lies in [-1, 1]. Scores are produced either by the built-in
//! lexicon scorer or by an external classifier that writes score files.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::ResponseLabel;

const PROB_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub p_positive: f64,
    pub p_negative: f64,
    pub p_neutral: f64,
}

impl SentenceScore {
    pub fn new(p_positive: f64, p_negative: f64, p_neutral: f64) -> Result<Self> {
        let s = Self {
            p_positive,
            p_negative,
            p_neutral,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [self.p_positive, self.p_negative, self.p_neutral];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain(format!(
                "probabilities must lie in [0, 1]: {ps:?}"
            )));
        }
        let sum: f64 = ps.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Same posterior with the positive and negative mass exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            p_positive: self.p_negative,
            p_negative: self.p_positive,
            p_neutral: self.p_neutral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    PressRelease,
    FilingPre,
    FilingPost,
}

impl DocKind {
    pub const ALL: [DocKind; 3] = [Self::PressRelease, Self::FilingPre, Self::FilingPost];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PressRelease => "press_release",
            Self::FilingPre => "filing_pre",
            Self::FilingPost => "filing_post",
        }
    }
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DocKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "press_release" => Ok(Self::PressRelease),
            "filing_pre" => Ok(Self::FilingPre),
            "filing_post" => Ok(Self::FilingPost),
            _ => Err(format!("unknown doc_kind {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentScore {
    pub doc_id: String,
    pub event_id: String,
    pub doc_kind: DocKind,
    pub score: f64,
    pub n_sentences: u32,
    pub scorer_id: String,
}

impl DocumentScore {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.score.is_finite() || !(-1.0..=1.0).contains(&self.score) {
            return Err(format!("score {} outside [-1, 1]", self.score));
        }
        if self.n_sentences < 1 {
            return Err("n_sentences must be at least 1".into());
        }
        Ok(())
    }
}

/// Half-width of the score band that maps to a Neutral prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentPolicy {
    pub neutral_band: f64,
}

impl Default for SentimentPolicy {
    fn default() -> Self {
        Self { neutral_band: 0.05 }
    }
}

impl SentimentPolicy {
    pub fn new(neutral_band: f64) -> Result<Self> {
        if !neutral_band.is_finite() || neutral_band < 0.0 {
            return Err(Error::Validation(format!(
                "neutral band must be non-negative, got {neutral_band}"
            )));
        }
        Ok(Self { neutral_band })
    }
}

pub fn aggregate_document_score(sentences: &[SentenceScore]) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::Domain(
            "cannot score a document with no sentences".into(),
        ));
    }
    for s in sentences {
        s.validate()?;
    }
    let total = exact_sum(sentences.iter().map(|s| s.p_positive - s.p_negative));
    Ok((total / sentences.len() as f64).clamp(-1.0, 1.0))
}

/// Correctly rounded floating-point sum (Shewchuk's partials). The result
/// does not depend on input order.
fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // Round the partials to a single value, as in Python's math.fsum.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        n -= 1;
        let x = hi;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

pub fn discretize(score: f64, policy: &SentimentPolicy) -> ResponseLabel {
    if score > policy.neutral_band {
        ResponseLabel::Positive
    } else if score < -policy.neutral_band {
        ResponseLabel::Negative
    } else {
        ResponseLabel::Neutral
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    words: HashMap<String, Polarity>,
}

impl Lexicon {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Polarity)>) -> Self {
        Self {
            words: pairs
                .into_iter()
                .map(|(w, p)| (w.to_lowercase(), p))
                .collect(),
        }
    }

    /// A small hand-picked word list for biotech press releases.
    pub fn biotech_default() -> Self {
        use Polarity::*;
        const POSITIVE: &[&str] = &[
            "approval",
            "approved",
            "approves",
            "achieved",
            "beat",
            "breakthrough",
            "durable",
            "exceeded",
            "favorable",
            "granted",
            "growth",
            "improved",
            "improvement",
            "met",
            "positive",
            "promising",
            "record",
            "robust",
            "significant",
            "strong",
            "success",
            "successful",
            "superior",
        ];
        const NEGATIVE: &[&str] = &[
            "adverse",
            "decline",
            "declined",
            "delay",
            "delayed",
            "discontinue",
            "discontinued",
            "failed",
            "failure",
            "halt",
            "halted",
            "hold",
            "impairment",
            "loss",
            "missed",
            "negative",
            "rejected",
            "rejection",
            "risk",
            "safety",
            "terminated",
            "weak",
            "withdrawn",
        ];
        Self::from_pairs(
            POSITIVE
                .iter()
                .map(|w| (*w, Positive))
                .chain(NEGATIVE.iter().map(|w| (*w, Negative))),
        )
    }

    /// Reads a `word,polarity` table.
    pub fn read<R: Read>(reader: R, origin: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            word: String,
            polarity: Polarity,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut words = HashMap::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| {
                Error::parse(
                    origin,
                    crate::error::csv_line(&e, i as u64 + 2),
                    e.to_string(),
                )
            })?;
            words.insert(row.word.to_lowercase(), row.polarity);
        }
        Ok(Self { words })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(file, &path.display().to_string())
    }

    pub fn polarity(&self, token: &str) -> Option<Polarity> {
        self.words.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Splits on `.`, `?` or `!` when followed by whitespace or end of text.
/// Blank fragments are dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            let at_break = match chars.peek() {
                Some((_, next)) => next.is_whitespace(),
                None => true,
            };
            if at_break {
                let end = i + c.len_utf8();
                out.push(&text[start..end]);
                start = end;
            }
        }
    }
    out.push(&text[start..]);
    out.into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Lowercased alphanumeric runs.
pub fn tokenize(sentence: &str) -> impl Iterator<Item = String> + '_ {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn lexicon_score(text: &str, lexicon: &Lexicon) -> Result<Vec<SentenceScore>> {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return Err(Error::Domain("empty text".into()));
    }
    Ok(sentences
        .into_iter()
        .map(|s| {
            let (mut pos, mut neg) = (0u32, 0u32);
            for tok in tokenize(s) {
                match lexicon.polarity(&tok) {
                    Some(Polarity::Positive) => pos += 1,
                    Some(Polarity::Negative) => neg += 1,
                    None => {}
                }
            }
            let denom = f64::from(pos + neg + 1);
            SentenceScore {
                p_positive: f64::from(pos) / denom,
                p_negative: f64::from(neg) / denom,
                p_neutral: 1.0 / denom,
            }
        })
        .collect())
}

/// A document awaiting scoring: one JSON object per line with
/// `doc_id`, `event_id`, `doc_kind`, `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentText {
    pub doc_id: String,
    pub event_id: String,
    pub doc_kind: DocKind,
    pub text: String,
}

pub fn score_with_lexicon(
    doc: &DocumentText,
    lexicon: &Lexicon,
    scorer_id: &str,
) -> Result<DocumentScore> {
    let sentences = lexicon_score(&doc.text, lexicon)
        .map_err(|e| Error::Domain(format!("document {}: {e}", doc.doc_id)))?;
    Ok(DocumentScore {
        doc_id: doc.doc_id.clone(),
        event_id: doc.event_id.clone(),
        doc_kind: doc.doc_kind,
        score: aggregate_document_score(&sentences)?,
        n_sentences: sentences.len() as u32,
        scorer_id: scorer_id.to_string(),
    })
}

fn read_json_lines<R: Read, T: serde::de::DeserializeOwned>(
    reader: R,
    origin: &str,
    mut check: impl FnMut(&T) -> std::result::Result<(), String>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let n = i as u64 + 1;
        let line = line.map_err(|e| Error::parse(origin, n, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T =
            serde_json::from_str(&line).map_err(|e| Error::parse(origin, n, e.to_string()))?;
        check(&rec).map_err(|m| Error::Validation(format!("{origin}:{n}: {m}")))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_scores<R: Read>(reader: R, origin: &str) -> Result<Vec<DocumentScore>> {
    read_json_lines(reader, origin, DocumentScore::validate)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<DocumentScore>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_scores(file, &path.display().to_string())
}

pub fn write_scores<W: Write>(mut writer: W, scores: &[DocumentScore]) -> Result<()> {
    for s in scores {
        let line = serde_json::to_string(s).map_err(|e| Error::Serialize(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| Error::Serialize(e.to_string()))?;
    }
    Ok(())
}

pub fn load_documents(path: impl AsRef<Path>) -> Result<Vec<DocumentText>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_json_lines(file, &path.display().to_string(), |_: &DocumentText| Ok(()))
}
