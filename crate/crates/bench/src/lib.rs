//! Shared inputs for the pipeline benchmarks.

use std::path::PathBuf;

use bioevent_core::market_data::{load_event_ledger, load_price_map, Event, PriceMap};
use bioevent_core::sentiment::{load_scores, DocumentScore};

pub struct Corpus {
    pub events: Vec<Event>,
    pub prices: PriceMap,
    pub scores: Vec<DocumentScore>,
}

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

/// The synthetic 15-ticker, 105-event market.
pub fn synthetic() -> Corpus {
    Corpus {
        events: load_event_ledger(fixture("synthetic/events.csv")).expect("synthetic events"),
        prices: load_price_map(fixture("synthetic/prices.csv")).expect("synthetic prices"),
        scores: load_scores(fixture("synthetic/scores_finphrase.jsonl")).expect("synthetic scores"),
    }
}
