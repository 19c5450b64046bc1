#![allow(dead_code)]

use std::path::PathBuf;

use bioevent_core::market_data::{
    Event, EventType, MarketCapClass, PriceBar, PriceMap, PriceSeries,
};
use bioevent_core::sentiment::{DocKind, DocumentScore};
use bioevent_core::strategies::Trade;
use bioevent_core::MetricsConfig;
use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

pub struct Market {
    pub prices: PriceMap,
    pub events: Vec<Event>,
    pub scores: Vec<DocumentScore>,
}

const CLASSES: [MarketCapClass; 4] = MarketCapClass::ALL;
const TYPES: [EventType; 4] = [
    EventType::Clinical,
    EventType::Regulatory,
    EventType::Financial,
    EventType::Other,
];

/// Random walk bars on a weekday calendar with the odd holiday removed and
/// occasional large opening gaps. Adjusted closes use a constant factor.
pub fn random_series<R: Rng>(rng: &mut R, ticker: &str, dates: &[NaiveDate]) -> PriceSeries {
    let factor = rng.gen_range(0.5..=1.0);
    let mut close: f64 = rng.gen_range(2.0..50.0);
    let mut bars = Vec::new();
    for &d in dates {
        if rng.gen_bool(0.04) {
            continue;
        }
        let open = close * (1.0 + rng.gen_range(-0.02..0.02));
        let drift = if rng.gen_bool(0.1) {
            rng.gen_range(-0.15..0.15)
        } else {
            rng.gen_range(-0.03..0.03)
        };
        close = (open * (1.0 + drift)).max(0.05);
        bars.push(PriceBar {
            date: d,
            open,
            high: open.max(close),
            low: open.min(close),
            close,
            adj_close: close * factor,
            volume: rng.gen_range(1000..1_000_000),
        });
    }
    PriceSeries::new(ticker, bars).unwrap()
}

pub fn random_market<R: Rng>(
    rng: &mut R,
    n_tickers: usize,
    n_days: usize,
    n_events: usize,
) -> Market {
    let dates = weekdays(date("2021-03-01"), n_days);
    let mut prices = PriceMap::new();
    let tickers: Vec<String> = (0..n_tickers).map(|i| format!("T{i}")).collect();
    for t in &tickers {
        prices.insert(t.clone(), random_series(rng, t, &dates));
    }
    let first = dates[0];
    let span = (dates[dates.len() - 1] - first).num_days() as u64;
    let mut events = Vec::new();
    let mut scores = Vec::new();
    for i in 0..n_events {
        let k = rng.gen_range(0..n_tickers);
        let event_id = format!("E{i:04}");
        events.push(Event {
            event_id: event_id.clone(),
            ticker: tickers[k].clone(),
            date: first + Days::new(rng.gen_range(1..=span)),
            event_type: TYPES[rng.gen_range(0..4)],
            cap_class: CLASSES[k % 4],
            prior_price: None,
            post_price: None,
            documents: Vec::new(),
        });
        scores.push(DocumentScore {
            doc_id: format!("{event_id}-pr"),
            event_id,
            doc_kind: DocKind::PressRelease,
            score: (rng.gen_range(-1.0f64..=1.0) * 1000.0).round() / 1000.0,
            n_sentences: rng.gen_range(1..40),
            scorer_id: "random".into(),
        });
    }
    Market {
        prices,
        events,
        scores,
    }
}

/// Day-by-day recomputation of the equal-weight curve using only linear
/// scans over the raw bars.
pub fn brute_force_equity(
    trades: &[Trade],
    prices: &PriceMap,
    cfg: &MetricsConfig,
) -> (Vec<NaiveDate>, Vec<f64>) {
    let mut calendar: Vec<NaiveDate> = Vec::new();
    for s in prices.values() {
        for b in s.bars() {
            if b.date >= cfg.backtest_start
                && b.date <= cfg.backtest_end
                && !calendar.contains(&b.date)
            {
                calendar.push(b.date);
            }
        }
    }
    calendar.sort();
    let mut level = 1.0;
    let mut equity = Vec::new();
    for &d in &calendar {
        let mut total = 0.0;
        let mut open = 0;
        for t in trades {
            if d < t.signal.entry_date || d > t.exit_date {
                continue;
            }
            open += 1;
            let bars = prices[&t.signal.ticker].bars();
            let Some(today) = bars.iter().find(|b| b.date == d) else {
                continue;
            };
            let r = if d == t.signal.entry_date {
                let fill = today.open * today.adj_close / today.close;
                today.adj_close / fill - 1.0
            } else {
                let prev = bars.iter().rfind(|b| b.date < d).unwrap();
                today.adj_close / prev.adj_close - 1.0
            };
            let sign = match t.signal.direction {
                bioevent_core::Direction::Long => 1.0,
                bioevent_core::Direction::Short => -1.0,
            };
            total += sign * r;
        }
        if open > 0 {
            level *= 1.0 + total / open as f64;
        }
        equity.push(level);
    }
    (calendar, equity)
}
