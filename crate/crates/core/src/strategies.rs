//! Entry signals and position lifecycles.
//!
//! Every signal enters at the open of a trading day that is strictly later
//! than any bar the decision looked at, so a strategy never trades on the
//! close it conditions on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{LabeledEvent, ResponseLabel};
use crate::market_data::{Event, MarketCapClass, PriceMap};
use crate::sentiment::{discretize, DocKind, DocumentScore, SentimentPolicy};

pub const MAX_HOLD_DAYS: u32 = 90;
pub const MAX_HOLD_MONTHS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Self::Long => 1.0,
            Self::Short => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Long => "long",
            Self::Short => "short",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signal {
    pub event_id: String,
    pub ticker: String,
    pub cap_class: MarketCapClass,
    pub entry_date: NaiveDate,
    pub direction: Direction,
    pub strategy_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "length")]
pub enum HoldingPeriod {
    TradingDays(u32),
    CalendarMonths(u32),
}

impl HoldingPeriod {
    pub fn days(n: u32) -> Result<Self> {
        if !(1..=MAX_HOLD_DAYS).contains(&n) {
            return Err(Error::Validation(format!(
                "holding period must be 1..={MAX_HOLD_DAYS} trading days, got {n}"
            )));
        }
        Ok(Self::TradingDays(n))
    }

    pub fn months(m: u32) -> Result<Self> {
        if !(1..=MAX_HOLD_MONTHS).contains(&m) {
            return Err(Error::Validation(format!(
                "holding period must be 1..={MAX_HOLD_MONTHS} months, got {m}"
            )));
        }
        Ok(Self::CalendarMonths(m))
    }
}

impl fmt::Display for HoldingPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TradingDays(n) => write!(f, "{n}d"),
            Self::CalendarMonths(m) => write!(f, "{m}m"),
        }
    }
}

impl FromStr for HoldingPeriod {
    type Err = Error;

    /// `"<n>d"` for trading days, `"<m>m"` for calendar months.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Validation(format!("bad holding period {s:?}"));
        let parse = |n: &str| n.parse::<u32>().map_err(|_| bad());
        if let Some(n) = s.strip_suffix('d') {
            Self::days(parse(n)?)
        } else if let Some(m) = s.strip_suffix('m') {
            Self::months(parse(m)?)
        } else {
            Err(bad())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy_id: String,
    pub holding_period: HoldingPeriod,
    pub momentum_threshold: f64,
    pub allow_short: bool,
    pub sentiment_policy: SentimentPolicy,
}

impl StrategyConfig {
    pub fn new(strategy_id: impl Into<String>, holding_period: HoldingPeriod) -> Self {
        Self {
            strategy_id: strategy_id.into(),
            holding_period,
            momentum_threshold: 0.05,
            allow_short: false,
            sentiment_policy: SentimentPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalSet {
    pub signals: Vec<Signal>,
    /// Events that could not be mapped onto an entry bar.
    pub skipped: usize,
}

impl SignalSet {
    fn finish(mut self) -> Self {
        self.signals
            .sort_by(|a, b| (a.entry_date, &a.event_id).cmp(&(b.entry_date, &b.event_id)));
        self
    }
}

fn gate(label: ResponseLabel, allow_short: bool) -> Option<Direction> {
    match label {
        ResponseLabel::Positive => Some(Direction::Long),
        ResponseLabel::Negative if allow_short => Some(Direction::Short),
        _ => None,
    }
}

fn skip(set: &mut SignalSet, event: &Event, why: &str) {
    log::warn!(
        "skipping event {} ({}): {why}",
        event.event_id,
        event.ticker
    );
    set.skipped += 1;
}

/// Signals from press-release sentiment. Entry is the first trading day
/// strictly after the release date.
pub fn signals_from_sentiment(
    scores: &[DocumentScore],
    events: &[Event],
    prices: &PriceMap,
    cfg: &StrategyConfig,
) -> Result<SignalSet> {
    let by_id: BTreeMap<&str, &Event> = events.iter().map(|e| (e.event_id.as_str(), e)).collect();
    let mut seen = BTreeSet::new();
    let mut out = SignalSet::default();
    for s in scores
        .iter()
        .filter(|s| s.doc_kind == DocKind::PressRelease)
    {
        let event = by_id.get(s.event_id.as_str()).ok_or_else(|| {
            Error::Validation(format!(
                "score {} refers to unknown event {}",
                s.doc_id, s.event_id
            ))
        })?;
        if !seen.insert(s.event_id.as_str()) {
            return Err(Error::Validation(format!(
                "event {} has more than one press-release score",
                s.event_id
            )));
        }
        let Some(direction) = gate(discretize(s.score, &cfg.sentiment_policy), cfg.allow_short)
        else {
            continue;
        };
        let Some(series) = prices.get(&event.ticker) else {
            skip(&mut out, event, "no price series");
            continue;
        };
        let Some(i) = series.index_after(event.date) else {
            skip(&mut out, event, "no trading day after release");
            continue;
        };
        out.signals.push(Signal {
            event_id: event.event_id.clone(),
            ticker: event.ticker.clone(),
            cap_class: event.cap_class,
            entry_date: series.bars()[i].date,
            direction,
            strategy_id: cfg.strategy_id.clone(),
        });
    }
    Ok(out.finish())
}

/// Signals gated on the realized response label. The label is only known at
/// the close of the post-event bar, so entry is the trading day after that.
pub fn signals_from_labels(
    labeled: &[LabeledEvent],
    events: &[Event],
    prices: &PriceMap,
    cfg: &StrategyConfig,
) -> Result<SignalSet> {
    let by_id: BTreeMap<&str, &Event> = events.iter().map(|e| (e.event_id.as_str(), e)).collect();
    let mut out = SignalSet::default();
    for l in labeled {
        let event = by_id
            .get(l.event_id.as_str())
            .ok_or_else(|| Error::Validation(format!("label for unknown event {}", l.event_id)))?;
        let Some(direction) = gate(l.label, cfg.allow_short) else {
            continue;
        };
        let Some(series) = prices.get(&event.ticker) else {
            skip(&mut out, event, "no price series");
            continue;
        };
        let entry = series
            .index_on_or_after(event.date)
            .and_then(|post| series.index_after(series.bars()[post].date));
        let Some(i) = entry else {
            skip(&mut out, event, "no trading day after the post-event close");
            continue;
        };
        out.signals.push(Signal {
            event_id: event.event_id.clone(),
            ticker: event.ticker.clone(),
            cap_class: event.cap_class,
            entry_date: series.bars()[i].date,
            direction,
            strategy_id: cfg.strategy_id.clone(),
        });
    }
    Ok(out.finish())
}

/// Open-to-close momentum on the release day (or the next trading day when
/// the release is not on one). Entry is the following trading day.
pub fn signals_from_momentum(
    events: &[Event],
    prices: &PriceMap,
    cfg: &StrategyConfig,
) -> SignalSet {
    let mut out = SignalSet::default();
    for event in events {
        let Some(series) = prices.get(&event.ticker) else {
            skip(&mut out, event, "no price series");
            continue;
        };
        let Some(d) = series.index_on_or_after(event.date) else {
            skip(&mut out, event, "no release-day bar");
            continue;
        };
        let bar = &series.bars()[d];
        let gap = (bar.close - bar.open) / bar.open;
        let direction = if gap > cfg.momentum_threshold {
            Direction::Long
        } else if cfg.allow_short && gap < -cfg.momentum_threshold {
            Direction::Short
        } else {
            continue;
        };
        let Some(entry) = series.bars().get(d + 1) else {
            skip(&mut out, event, "no trading day after release day");
            continue;
        };
        out.signals.push(Signal {
            event_id: event.event_id.clone(),
            ticker: event.ticker.clone(),
            cap_class: event.cap_class,
            entry_date: entry.date,
            direction,
            strategy_id: cfg.strategy_id.clone(),
        });
    }
    out.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub signal: Signal,
    pub entry_price: f64,
    pub exit_date: NaiveDate,
    pub exit_price: f64,
    pub holding_days: u32,
    pub realized_return: f64,
    /// Exit fell past the end of the data and was taken at the last close.
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TradeSet {
    pub trades: Vec<Trade>,
    pub skipped: usize,
    pub truncated: usize,
}

/// Fills each signal at the entry-day open and exits at the close of the
/// holding-period end. Prices are on the adjusted-close scale.
pub fn execute_trades(signals: &[Signal], prices: &PriceMap, cfg: &StrategyConfig) -> TradeSet {
    let mut out = TradeSet::default();
    for sig in signals {
        let Some((series, entry_idx)) = prices
            .get(&sig.ticker)
            .and_then(|s| s.index_of(sig.entry_date).map(|i| (s, i)))
        else {
            log::warn!(
                "signal {} has no {} bar on {}",
                sig.event_id,
                sig.ticker,
                sig.entry_date
            );
            out.skipped += 1;
            continue;
        };
        let bars = series.bars();
        let last = bars.len() - 1;
        let target = match cfg.holding_period {
            HoldingPeriod::TradingDays(n) => Some(entry_idx + n as usize).filter(|&i| i <= last),
            HoldingPeriod::CalendarMonths(m) => sig
                .entry_date
                .checked_add_months(Months::new(m))
                .and_then(|d| series.index_on_or_after(d)),
        };
        let (exit_idx, truncated) = match target {
            Some(i) => (i, false),
            None => (last, true),
        };
        let entry_price = bars[entry_idx].adj_open();
        let exit_price = bars[exit_idx].adj_close;
        out.truncated += usize::from(truncated);
        out.trades.push(Trade {
            signal: sig.clone(),
            entry_price,
            exit_date: bars[exit_idx].date,
            exit_price,
            holding_days: (exit_idx - entry_idx) as u32,
            realized_return: sig.direction.sign() * (exit_price / entry_price - 1.0),
            truncated,
        });
    }
    out
}

pub const TRADE_HEADER: [&str; 11] = [
    "strategy_id",
    "event_id",
    "ticker",
    "direction",
    "entry_date",
    "entry_price",
    "exit_date",
    "exit_price",
    "holding_days",
    "realized_return",
    "truncated",
];

pub fn write_trades<W: Write>(writer: W, trades: &[Trade]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    wtr.write_record(TRADE_HEADER).map_err(ser)?;
    for t in trades {
        wtr.write_record([
            t.signal.strategy_id.clone(),
            t.signal.event_id.clone(),
            t.signal.ticker.clone(),
            t.signal.direction.as_str().to_string(),
            t.signal.entry_date.to_string(),
            t.entry_price.to_string(),
            t.exit_date.to_string(),
            t.exit_price.to_string(),
            t.holding_days.to_string(),
            t.realized_return.to_string(),
            t.truncated.to_string(),
        ])
        .map_err(ser)?;
    }
    wtr.flush().map_err(|e| Error::Serialize(e.to_string()))
}
