//! Event study and event-driven backtesting for biotech equities.
//!
//! The pipeline runs in five steps:
//!
//! 1. [`market_data`] loads daily bars and the event ledger.
//! 2. [`labeling`] turns each event-window return into a Positive, Negative
//!    or Neutral response using market-cap-dependent thresholds.
//! 3. [`sentiment`] holds document scores, either from the built-in lexicon
//!    scorer or from score files written by an external classifier.
//! 4. [`evaluation`] measures how often discretized scores match the labels.
//! 5. [`strategies`] and [`metrics`] backtest momentum, sentiment-gated and
//!    label-gated entries over fixed holding periods.
//!
//! [`report`] wires the steps together for the command-line tool.

pub mod error;
pub mod evaluation;
pub mod labeling;
pub mod market_data;
pub mod metrics;
pub mod report;
pub mod sentiment;
pub mod strategies;

pub use error::{Error, Result};
pub use evaluation::{compare_scorers, evaluate, EvaluationReport, ScorerComparison};
pub use labeling::{
    classify_response, label_events, label_ledger, LabelThresholds, LabeledEvent, ResponseLabel,
};
pub use market_data::{
    event_return, load_event_ledger, load_price_map, load_price_series, next_trading_day, Event,
    EventType, MarketCapClass, PriceBar, PriceMap, PriceSeries,
};
pub use metrics::{
    annualized_return, annualized_volatility, build_equity_curve, cumulative_return, sharpe_ratio,
    EquityCurve, MetricsConfig, StrategyMetrics,
};
pub use sentiment::{
    aggregate_document_score, discretize, lexicon_score, load_scores, DocKind, DocumentScore,
    Lexicon, SentenceScore, SentimentPolicy,
};
pub use strategies::{
    execute_trades, signals_from_labels, signals_from_momentum, signals_from_sentiment, Direction,
    HoldingPeriod, Signal, StrategyConfig, Trade,
};
