//! Daily price series, the event ledger, and event-window returns.
//!
//! Prices are read from a flat `ticker,date,open,high,low,close,adj_close,volume`
//! file that may hold many tickers. Series are immutable once built and keep
//! their bars strictly ordered by date, so every calendar lookup is a binary
//! search.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{csv_line, Error, Result};

pub const PRICE_HEADER: [&str; 8] = [
    "ticker",
    "date",
    "open",
    "high",
    "low",
    "close",
    "adj_close",
    "volume",
];
pub const EVENT_HEADER: [&str; 7] = [
    "event_id",
    "ticker",
    "date",
    "event_type",
    "cap_class",
    "prior_price",
    "post_price",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: u64,
}

impl PriceBar {
    /// Open price expressed on the adjusted-close scale.
    pub fn adj_open(&self) -> f64 {
        self.open * (self.adj_close / self.close)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let fields = [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
            ("adj_close", self.adj_close),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(format!("{name} must be positive and finite, got {value}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    ticker: String,
    bars: Vec<PriceBar>,
}

impl PriceSeries {
    /// Builds a series, sorting bars by date. Rejects empty input, duplicate
    /// dates, and non-positive prices.
    pub fn new(ticker: impl Into<String>, mut bars: Vec<PriceBar>) -> Result<Self> {
        let ticker = ticker.into();
        if bars.is_empty() {
            return Err(Error::NotFound(format!(
                "no price bars for ticker {ticker}"
            )));
        }
        for bar in &bars {
            bar.validate()
                .map_err(|m| Error::Validation(format!("{ticker} {}: {m}", bar.date)))?;
        }
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::Validation(format!(
                "{ticker}: duplicate bar date {}",
                w[0].date
            )));
        }
        Ok(Self { ticker, bars })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn bars(&self) -> &[PriceBar] {
        &self.bars
    }

    pub fn first_date(&self) -> NaiveDate {
        self.bars[0].date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.bars[self.bars.len() - 1].date
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.bars.binary_search_by_key(&date, |b| b.date).ok()
    }

    /// Index of the first bar dated on or after `date`.
    pub fn index_on_or_after(&self, date: NaiveDate) -> Option<usize> {
        let i = self.bars.partition_point(|b| b.date < date);
        (i < self.bars.len()).then_some(i)
    }

    /// Index of the first bar dated strictly after `date`.
    pub fn index_after(&self, date: NaiveDate) -> Option<usize> {
        let i = self.bars.partition_point(|b| b.date <= date);
        (i < self.bars.len()).then_some(i)
    }

    /// Index of the last bar dated strictly before `date`.
    pub fn index_before(&self, date: NaiveDate) -> Option<usize> {
        self.bars.partition_point(|b| b.date < date).checked_sub(1)
    }

    pub fn bar_on(&self, date: NaiveDate) -> Option<&PriceBar> {
        self.index_of(date).map(|i| &self.bars[i])
    }

    /// Returns a copy with every price multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let bars = self
            .bars
            .iter()
            .map(|b| PriceBar {
                open: b.open * factor,
                high: b.high * factor,
                low: b.low * factor,
                close: b.close * factor,
                adj_close: b.adj_close * factor,
                ..*b
            })
            .collect();
        Self::new(self.ticker.clone(), bars)
    }
}

pub type PriceMap = BTreeMap<String, PriceSeries>;

/// Smallest bar date on or after `date`.
pub fn next_trading_day(series: &PriceSeries, date: NaiveDate) -> Result<NaiveDate> {
    series
        .index_on_or_after(date)
        .map(|i| series.bars[i].date)
        .ok_or_else(|| {
            Error::Coverage(format!(
                "{}: no trading day on or after {date} (last bar {})",
                series.ticker,
                series.last_date()
            ))
        })
}

#[derive(Debug, Deserialize)]
struct RawPriceRow {
    ticker: String,
    date: String,
    open: String,
    high: String,
    low: String,
    close: String,
    adj_close: String,
    volume: String,
}

fn parse_date(origin: &str, line: u64, field: &str, value: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d")
        .map_err(|e| Error::parse(origin, line, format!("bad {field} {value:?}: {e}")))
}

fn parse_price(origin: &str, line: u64, field: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::parse(origin, line, format!("bad {field} {value:?}: {e}")))
}

/// Iterates rows deserialized against `headers`, yielding each with its
/// 1-based physical line number.
fn typed_rows<'r, R: Read, T: serde::de::DeserializeOwned>(
    rdr: &'r mut csv::Reader<R>,
    headers: csv::StringRecord,
    origin: &'r str,
) -> impl Iterator<Item = Result<(u64, T)>> + 'r {
    rdr.records().map(move |rec| {
        let rec = rec.map_err(|e| Error::parse(origin, csv_line(&e, 0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row = rec
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(origin, line, e.to_string()))?;
        Ok((line, row))
    })
}

fn check_header(origin: &str, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::parse(
            origin,
            1,
            format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

fn read_price_rows<R: Read>(
    reader: R,
    origin: &str,
    mut keep: impl FnMut(&str) -> bool,
) -> Result<BTreeMap<String, Vec<PriceBar>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(origin, csv_line(&e, 1), e.to_string()))?
        .clone();
    check_header(origin, &headers, &PRICE_HEADER)?;

    let mut out: BTreeMap<String, Vec<PriceBar>> = BTreeMap::new();
    for row in typed_rows::<_, RawPriceRow>(&mut rdr, headers, origin) {
        let (line, row) = row?;
        if !keep(&row.ticker) {
            continue;
        }
        let bar = PriceBar {
            date: parse_date(origin, line, "date", &row.date)?,
            open: parse_price(origin, line, "open", &row.open)?,
            high: parse_price(origin, line, "high", &row.high)?,
            low: parse_price(origin, line, "low", &row.low)?,
            close: parse_price(origin, line, "close", &row.close)?,
            adj_close: parse_price(origin, line, "adj_close", &row.adj_close)?,
            volume: row.volume.parse().map_err(|e| {
                Error::parse(origin, line, format!("bad volume {:?}: {e}", row.volume))
            })?,
        };
        bar.validate()
            .map_err(|m| Error::Validation(format!("{origin}:{line}: {m}")))?;
        out.entry(row.ticker).or_default().push(bar);
    }
    Ok(out)
}

/// Reads the bars for one ticker from a price file.
pub fn read_price_series<R: Read>(reader: R, origin: &str, ticker: &str) -> Result<PriceSeries> {
    let mut rows = read_price_rows(reader, origin, |t| t == ticker)?;
    match rows.remove(ticker) {
        Some(bars) => PriceSeries::new(ticker, bars),
        None => Err(Error::NotFound(format!(
            "{origin}: no rows for ticker {ticker}"
        ))),
    }
}

pub fn load_price_series(path: impl AsRef<Path>, ticker: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_price_series(file, &path.display().to_string(), ticker)
}

/// Reads every ticker in a price file.
pub fn read_price_map<R: Read>(reader: R, origin: &str) -> Result<PriceMap> {
    read_price_rows(reader, origin, |_| true)?
        .into_iter()
        .map(|(ticker, bars)| Ok((ticker.clone(), PriceSeries::new(ticker, bars)?)))
        .collect()
}

pub fn load_price_map(path: impl AsRef<Path>) -> Result<PriceMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_price_map(file, &path.display().to_string())
}

pub fn write_price_series<'a, W: Write>(
    writer: W,
    series: impl IntoIterator<Item = &'a PriceSeries>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    wtr.write_record(PRICE_HEADER).map_err(ser)?;
    for s in series {
        for b in &s.bars {
            wtr.write_record([
                s.ticker.clone(),
                b.date.to_string(),
                b.open.to_string(),
                b.high.to_string(),
                b.low.to_string(),
                b.close.to_string(),
                b.adj_close.to_string(),
                b.volume.to_string(),
            ])
            .map_err(ser)?;
        }
    }
    wtr.flush().map_err(|e| Error::Serialize(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketCapClass {
    Large,
    Mid,
    Small,
    Micro,
}

impl MarketCapClass {
    pub const ALL: [MarketCapClass; 4] = [Self::Large, Self::Mid, Self::Small, Self::Micro];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Large => "large",
            Self::Mid => "mid",
            Self::Small => "small",
            Self::Micro => "micro",
        }
    }

    /// Size bucket for a market capitalisation in millions of dollars:
    /// micro < 250M <= small < 2B <= mid < 10B <= large.
    pub fn from_market_cap_musd(musd: f64) -> Self {
        if musd < 250.0 {
            Self::Micro
        } else if musd < 2_000.0 {
            Self::Small
        } else if musd < 10_000.0 {
            Self::Mid
        } else {
            Self::Large
        }
    }
}

impl fmt::Display for MarketCapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MarketCapClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace("-cap", "").as_str() {
            "large" => Ok(Self::Large),
            "mid" => Ok(Self::Mid),
            "small" => Ok(Self::Small),
            "micro" => Ok(Self::Micro),
            _ => Err(format!("unknown cap_class {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Clinical,
    Regulatory,
    Financial,
    Other,
}

impl EventType {
    pub const ALL: [EventType; 4] = [
        Self::Clinical,
        Self::Regulatory,
        Self::Financial,
        Self::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Clinical => "clinical",
            Self::Regulatory => "regulatory",
            Self::Financial => "financial",
            Self::Other => "other",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = String;

    /// Accepts the four canonical names plus the longer labels used in
    /// hand-curated ledgers ("Quarter Financial Results", "Commercial").
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clinical" => Ok(Self::Clinical),
            "regulatory" => Ok(Self::Regulatory),
            "financial" | "quarter financial results" => Ok(Self::Financial),
            "other" | "commercial" => Ok(Self::Other),
            _ => Err(format!("unknown event_type {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: String,
    pub ticker: String,
    pub date: NaiveDate,
    pub event_type: EventType,
    pub cap_class: MarketCapClass,
    pub prior_price: Option<f64>,
    pub post_price: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub documents: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawEventRow {
    event_id: String,
    ticker: String,
    date: String,
    event_type: String,
    cap_class: String,
    prior_price: String,
    post_price: String,
}

fn optional_price(origin: &str, line: u64, field: &str, value: &str) -> Result<Option<f64>> {
    if value.trim().is_empty() {
        return Ok(None);
    }
    let p = parse_price(origin, line, field, value)?;
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::Validation(format!(
            "{origin}:{line}: {field} must be positive, got {p}"
        )));
    }
    Ok(Some(p))
}

pub fn read_event_ledger<R: Read>(reader: R, origin: &str) -> Result<Vec<Event>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(origin, csv_line(&e, 1), e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    check_header(origin, &headers, &EVENT_HEADER)?;

    let mut events = Vec::new();
    let mut ids = HashSet::new();
    let mut classes: BTreeMap<String, MarketCapClass> = BTreeMap::new();
    for row in typed_rows::<_, RawEventRow>(&mut rdr, headers, origin) {
        let (line, row) = row?;
        let event_type = row
            .event_type
            .parse()
            .map_err(|m| Error::parse(origin, line, m))?;
        let cap_class: MarketCapClass = row
            .cap_class
            .parse()
            .map_err(|m| Error::parse(origin, line, m))?;
        if row.event_id.is_empty() {
            return Err(Error::parse(origin, line, "empty event_id"));
        }
        if !ids.insert(row.event_id.clone()) {
            return Err(Error::Validation(format!(
                "{origin}:{line}: duplicate event_id {}",
                row.event_id
            )));
        }
        match classes.get(&row.ticker) {
            Some(&c) if c != cap_class => {
                return Err(Error::Validation(format!(
                    "{origin}:{line}: ticker {} listed as both {c} and {cap_class}",
                    row.ticker
                )))
            }
            _ => {
                classes.insert(row.ticker.clone(), cap_class);
            }
        }
        events.push(Event {
            date: parse_date(origin, line, "date", &row.date)?,
            prior_price: optional_price(origin, line, "prior_price", &row.prior_price)?,
            post_price: optional_price(origin, line, "post_price", &row.post_price)?,
            event_id: row.event_id,
            ticker: row.ticker,
            event_type,
            cap_class,
            documents: Vec::new(),
        });
    }
    Ok(events)
}

pub fn load_event_ledger(path: impl AsRef<Path>) -> Result<Vec<Event>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_event_ledger(file, &path.display().to_string())
}

pub fn write_event_ledger<W: Write>(writer: W, events: &[Event]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    wtr.write_record(EVENT_HEADER).map_err(ser)?;
    let opt = |p: Option<f64>| p.map(|v| v.to_string()).unwrap_or_default();
    for e in events {
        wtr.write_record([
            e.event_id.clone(),
            e.ticker.clone(),
            e.date.to_string(),
            e.event_type.to_string(),
            e.cap_class.to_string(),
            opt(e.prior_price),
            opt(e.post_price),
        ])
        .map_err(ser)?;
    }
    wtr.flush().map_err(|e| Error::Serialize(e.to_string()))
}

/// Prior and post prices bracketing an event.
///
/// Explicit prices on the event win. Otherwise prior is the adjusted close of
/// the last bar strictly before the event date and post is the adjusted close
/// of the event date, or of the next trading day when the event falls on a
/// non-trading day.
pub fn event_window_prices(series: Option<&PriceSeries>, event: &Event) -> Result<(f64, f64)> {
    let missing = || {
        Error::Coverage(format!(
            "event {}: no price series for {} and no explicit prices",
            event.event_id, event.ticker
        ))
    };
    let prior = match event.prior_price {
        Some(p) => p,
        None => {
            let s = series.ok_or_else(missing)?;
            let i = s.index_before(event.date).ok_or_else(|| {
                Error::Coverage(format!(
                    "event {}: no {} bar before {}",
                    event.event_id, event.ticker, event.date
                ))
            })?;
            s.bars[i].adj_close
        }
    };
    let post = match event.post_price {
        Some(p) => p,
        None => {
            let s = series.ok_or_else(missing)?;
            let i = s.index_on_or_after(event.date).ok_or_else(|| {
                Error::Coverage(format!(
                    "event {}: no {} bar on or after {}",
                    event.event_id, event.ticker, event.date
                ))
            })?;
            s.bars[i].adj_close
        }
    };
    Ok((prior, post))
}

/// Simple return `(post - prior) / prior` across the event window.
pub fn event_return(series: Option<&PriceSeries>, event: &Event) -> Result<f64> {
    let (prior, post) = event_window_prices(series, event)?;
    Ok((post - prior) / prior)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseEntry {
    pub ticker: String,
    pub company: String,
    pub market_cap_musd: f64,
    pub cap_class: MarketCapClass,
}

/// Reads a `ticker,company,market_cap_musd,cap_class` table. The declared
/// class must agree with the size bucket of the stated market cap.
pub fn load_universe(path: impl AsRef<Path>) -> Result<Vec<UniverseEntry>> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(&origin, csv_line(&e, 1), e.to_string()))?
        .clone();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in typed_rows::<_, UniverseEntry>(&mut rdr, headers, &origin) {
        let (line, row) = row?;
        let bucket = MarketCapClass::from_market_cap_musd(row.market_cap_musd);
        if bucket != row.cap_class {
            return Err(Error::Validation(format!(
                "{origin}:{line}: {} declared {} but ${}M is {bucket}",
                row.ticker, row.cap_class, row.market_cap_musd
            )));
        }
        if !seen.insert(row.ticker.clone()) {
            return Err(Error::Validation(format!(
                "{origin}:{line}: duplicate ticker {}",
                row.ticker
            )));
        }
        out.push(row);
    }
    Ok(out)
}
