//! Response labels from realized event returns and size-dependent thresholds.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{csv_line, Error, Result};
use crate::market_data::{event_window_prices, Event, EventType, MarketCapClass, PriceMap};

/// Ordered `Negative < Neutral < Positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseLabel {
    Negative,
    Neutral,
    Positive,
}

impl ResponseLabel {
    pub const ALL: [ResponseLabel; 3] = [Self::Positive, Self::Negative, Self::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Neutral => "neutral",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Self::Positive => Self::Negative,
            Self::Negative => Self::Positive,
            Self::Neutral => Self::Neutral,
        }
    }

    /// Row/column position in a confusion matrix (positive, negative, neutral).
    pub fn index(self) -> usize {
        match self {
            Self::Positive => 0,
            Self::Negative => 1,
            Self::Neutral => 2,
        }
    }
}

impl fmt::Display for ResponseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResponseLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Self::Positive),
            "negative" => Ok(Self::Negative),
            "neutral" => Ok(Self::Neutral),
            _ => Err(format!("unknown label {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold {
    pub positive: f64,
    pub negative: f64,
}

/// Per-class return cutoffs. A return strictly above `positive` is Positive,
/// strictly below `negative` is Negative, anything on the closed band between
/// is Neutral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    classes: BTreeMap<MarketCapClass, ClassThreshold>,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        let band = |x: f64| ClassThreshold {
            positive: x,
            negative: -x,
        };
        Self {
            classes: BTreeMap::from([
                (MarketCapClass::Large, band(0.01)),
                (MarketCapClass::Mid, band(0.02)),
                (MarketCapClass::Small, band(0.03)),
                (MarketCapClass::Micro, band(0.04)),
            ]),
        }
    }
}

impl LabelThresholds {
    pub fn get(&self, class: MarketCapClass) -> ClassThreshold {
        self.classes[&class]
    }

    pub fn set(&mut self, class: MarketCapClass, threshold: ClassThreshold) -> Result<()> {
        let ClassThreshold { positive, negative } = threshold;
        if !(positive.is_finite() && negative.is_finite() && negative < 0.0 && 0.0 < positive) {
            return Err(Error::Validation(format!(
                "{class}: thresholds must satisfy negative < 0 < positive, got ({negative}, {positive})"
            )));
        }
        self.classes.insert(class, threshold);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (MarketCapClass, ClassThreshold)> + '_ {
        self.classes.iter().map(|(c, t)| (*c, *t))
    }

    /// Applies overrides from a `cap_class,positive_threshold,negative_threshold`
    /// table on top of the defaults. Classes absent from the file keep their
    /// default cutoffs.
    pub fn read_overrides<R: Read>(reader: R, origin: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            cap_class: String,
            positive_threshold: f64,
            negative_threshold: f64,
        }
        let mut out = Self::default();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(origin, csv_line(&e, 1), e.to_string()))?
            .clone();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(origin, csv_line(&e, 0), e.to_string()))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let row: Row = rec
                .deserialize(Some(&headers))
                .map_err(|e| Error::parse(origin, line, e.to_string()))?;
            let class = row
                .cap_class
                .parse()
                .map_err(|m| Error::parse(origin, line, m))?;
            out.set(
                class,
                ClassThreshold {
                    positive: row.positive_threshold,
                    negative: row.negative_threshold,
                },
            )
            .map_err(|e| Error::Validation(format!("{origin}:{line}: {e}")))?;
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_overrides(file, &path.display().to_string())
    }
}

pub fn classify_response(
    ret: f64,
    cap_class: MarketCapClass,
    thresholds: &LabelThresholds,
) -> Result<ResponseLabel> {
    if !ret.is_finite() {
        return Err(Error::Domain(format!("return must be finite, got {ret}")));
    }
    let t = thresholds.get(cap_class);
    Ok(if ret > t.positive {
        ResponseLabel::Positive
    } else if ret < t.negative {
        ResponseLabel::Negative
    } else {
        ResponseLabel::Neutral
    })
}

/// One row of a label report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEvent {
    pub event_id: String,
    pub ticker: String,
    pub date: NaiveDate,
    pub event_type: EventType,
    pub cap_class: MarketCapClass,
    pub prior_price: f64,
    pub post_price: f64,
    pub event_return: f64,
    pub label: ResponseLabel,
}

/// Labels every event, keeping the window prices and return alongside.
pub fn label_ledger(
    events: &[Event],
    prices: &PriceMap,
    thresholds: &LabelThresholds,
) -> Result<Vec<LabeledEvent>> {
    events
        .iter()
        .map(|e| {
            let (prior, post) = event_window_prices(prices.get(&e.ticker), e)?;
            let ret = (post - prior) / prior;
            let label = classify_response(ret, e.cap_class, thresholds)
                .map_err(|err| Error::Domain(format!("event {}: {err}", e.event_id)))?;
            Ok(LabeledEvent {
                event_id: e.event_id.clone(),
                ticker: e.ticker.clone(),
                date: e.date,
                event_type: e.event_type,
                cap_class: e.cap_class,
                prior_price: prior,
                post_price: post,
                event_return: ret,
                label,
            })
        })
        .collect()
}

pub fn label_events(
    events: &[Event],
    prices: &PriceMap,
    thresholds: &LabelThresholds,
) -> Result<BTreeMap<String, ResponseLabel>> {
    Ok(label_ledger(events, prices, thresholds)?
        .into_iter()
        .map(|l| (l.event_id, l.label))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCount {
    pub event_type: EventType,
    pub label: ResponseLabel,
    pub cap_class: MarketCapClass,
    pub count: usize,
}

/// Event counts by (event type, label, cap class), every combination listed.
pub fn label_counts(labeled: &[LabeledEvent]) -> Vec<LabelCount> {
    let mut counts: BTreeMap<(EventType, ResponseLabel, MarketCapClass), usize> = BTreeMap::new();
    for t in EventType::ALL {
        for l in ResponseLabel::ALL {
            for c in MarketCapClass::ALL {
                counts.insert((t, l, c), 0);
            }
        }
    }
    for e in labeled {
        *counts
            .entry((e.event_type, e.label, e.cap_class))
            .or_default() += 1;
    }
    counts
        .into_iter()
        .map(|((event_type, label, cap_class), count)| LabelCount {
            event_type,
            label,
            cap_class,
            count,
        })
        .collect()
}
