//! Run orchestration and report assembly shared by the command-line tool.
//!
//! Report bodies are deterministic functions of their inputs and
//! configuration. The only non-deterministic field, the wall-clock
//! timestamp, lives in [`RunManifest`], which is written beside the body and
//! never inside it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{EvaluationReport, ScorerComparison};
use crate::labeling::{LabelCount, LabelThresholds, LabeledEvent};
use crate::market_data::{Event, MarketCapClass, PriceMap};
use crate::metrics::{
    build_equity_curve, equity_curve_on, strategy_metrics, trading_calendar, EquityCurve,
    MetricsConfig,
};
use crate::sentiment::DocumentScore;
use crate::strategies::{
    execute_trades, signals_from_labels, signals_from_momentum, signals_from_sentiment, Direction,
    HoldingPeriod, Signal, StrategyConfig, Trade, MAX_HOLD_DAYS,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&buf))
}

pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
    pub timestamp: String,
}

/// Every knob that can change a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub thresholds: LabelThresholds,
    pub neutral_band: f64,
    pub metrics: MetricsConfig,
    pub momentum_threshold: f64,
    pub allow_short: bool,
    pub holding_periods: Vec<String>,
    pub strategies: Vec<String>,
    pub portfolio: String,
    pub entry_rule: String,
}

impl RunConfig {
    pub fn new(thresholds: LabelThresholds, neutral_band: f64, metrics: MetricsConfig) -> Self {
        Self {
            thresholds,
            neutral_band,
            metrics,
            momentum_threshold: 0.05,
            allow_short: false,
            holding_periods: Vec::new(),
            strategies: Vec::new(),
            portfolio: "equal weight across open positions, rebalanced daily, 0 when flat".into(),
            entry_rule: "open of the first trading day after the signal's last observed close"
                .into(),
        }
    }
}

/// Deterministic report document: configuration, input fingerprints, body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub command: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub config_digest: String,
    pub inputs: BTreeMap<String, String>,
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(
        command: &str,
        config: RunConfig,
        inputs: BTreeMap<String, String>,
        body: T,
    ) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_digest: config_digest(&config)?,
            config,
            inputs,
            body,
        })
    }

    pub fn manifest(&self, timestamp: impl Into<String>) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            config_digest: self.config_digest.clone(),
            input_digests: self.inputs.clone(),
            tool_version: self.tool_version.clone(),
            timestamp: timestamp.into(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub events: Vec<LabeledEvent>,
    pub counts: Vec<LabelCount>,
}

/// Reads labeled events from either a structured label report or the flat
/// label table.
pub fn load_labeled_events(path: impl AsRef<Path>) -> Result<Vec<LabeledEvent>> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('{') {
        let report: Report<LabelReport> =
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                origin,
                line: e.line() as u64,
                message: e.to_string(),
            })?;
        return Ok(report.body.events);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(&origin, 1, e.to_string()))?
        .clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| Error::parse(&origin, crate::error::csv_line(&e, 0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push(
            rec.deserialize(Some(&headers))
                .map_err(|e| Error::parse(&origin, line, e.to_string()))?,
        );
    }
    Ok(out)
}

pub fn write_labels_csv<W: Write>(writer: W, events: &[LabeledEvent]) -> Result<()> {
    write_rows(writer, events)
}

pub fn write_label_counts_csv<W: Write>(writer: W, counts: &[LabelCount]) -> Result<()> {
    write_rows(writer, counts)
}

fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in rows {
        wtr.serialize(r)
            .map_err(|e| Error::Serialize(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Serialize(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-cell rows plus one `all,all` row per report.
pub fn write_evaluation_csv<W: Write>(writer: W, reports: &[EvaluationReport]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    wtr.write_record([
        "scorer_id",
        "doc_kind",
        "event_type",
        "cap_class",
        "n_total",
        "n_correct",
        "success_rate",
        "n_missing",
        "neutral_band",
    ])
    .map_err(ser)?;
    for r in reports {
        let band = r.policy.neutral_band.to_string();
        wtr.write_record([
            r.scorer_id.as_str(),
            r.doc_kind.as_str(),
            "all",
            "all",
            &r.n_total.to_string(),
            &r.n_correct.to_string(),
            &opt(r.success_rate),
            &r.n_missing.to_string(),
            &band,
        ])
        .map_err(ser)?;
        for c in &r.breakdown {
            wtr.write_record([
                r.scorer_id.as_str(),
                r.doc_kind.as_str(),
                c.event_type.as_str(),
                c.cap_class.as_str(),
                &c.n_total.to_string(),
                &c.n_correct.to_string(),
                &opt(c.success_rate),
                "",
                &band,
            ])
            .map_err(ser)?;
        }
    }
    wtr.flush().map_err(|e| Error::Serialize(e.to_string()))
}

pub fn write_comparison_csv<W: Write>(writer: W, cmp: &ScorerComparison) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    wtr.write_record([
        "scorer_id",
        "doc_kind",
        "n_total",
        "n_correct",
        "success_rate",
        "delta",
    ])
    .map_err(ser)?;
    for r in &cmp.rows {
        wtr.write_record([
            r.scorer_id.clone(),
            r.doc_kind.to_string(),
            r.n_total.to_string(),
            r.n_correct.to_string(),
            opt(r.success_rate),
            opt(r.delta),
        ])
        .map_err(ser)?;
    }
    wtr.flush().map_err(|e| Error::Serialize(e.to_string()))
}

/// Where a strategy's entry decisions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategySource {
    /// Open-to-close gap on the release day.
    Momentum,
    /// Press-release sentiment scores from one scorer.
    Sentiment(Vec<DocumentScore>),
    /// Realized response labels.
    Labels(Vec<LabeledEvent>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub strategy_id: String,
    pub source: StrategySource,
}

impl StrategySpec {
    pub fn new(strategy_id: impl Into<String>, source: StrategySource) -> Self {
        Self {
            strategy_id: strategy_id.into(),
            source,
        }
    }

    pub fn signals(
        &self,
        events: &[Event],
        prices: &PriceMap,
        cfg: &StrategyConfig,
    ) -> Result<(Vec<Signal>, usize)> {
        let set = match &self.source {
            StrategySource::Momentum => signals_from_momentum(events, prices, cfg),
            StrategySource::Sentiment(scores) => {
                signals_from_sentiment(scores, events, prices, cfg)?
            }
            StrategySource::Labels(labeled) => signals_from_labels(labeled, events, prices, cfg)?,
        };
        Ok((set.signals, set.skipped))
    }
}

/// Strategy knobs shared by every cell of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub momentum_threshold: f64,
    pub allow_short: bool,
    pub neutral_band: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            momentum_threshold: 0.05,
            allow_short: false,
            neutral_band: 0.05,
        }
    }
}

impl StrategyParams {
    fn config(&self, strategy_id: &str, hold: HoldingPeriod) -> Result<StrategyConfig> {
        let mut cfg = StrategyConfig::new(strategy_id, hold);
        cfg.momentum_threshold = self.momentum_threshold;
        cfg.allow_short = self.allow_short;
        cfg.sentiment_policy = crate::sentiment::SentimentPolicy::new(self.neutral_band)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub strategy_id: String,
    /// `None` for cells that span every class, such as a benchmark series.
    #[serde(with = "cap_or_all")]
    pub cap_class: Option<MarketCapClass>,
    pub holding_period: String,
    pub cumulative_return: f64,
    pub annualized_return: Option<f64>,
    pub volatility: Option<f64>,
    pub sharpe: Option<f64>,
    pub n_trades: usize,
    pub rf: f64,
    pub span_years: f64,
    pub bankrupt: bool,
}

mod cap_or_all {
    use super::MarketCapClass;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<MarketCapClass>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v.map(|c| c.as_str()).unwrap_or("all"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<MarketCapClass>, D::Error> {
        let s = String::deserialize(d)?;
        if s == "all" {
            return Ok(None);
        }
        s.parse().map(Some).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub strategy_id: String,
    #[serde(with = "cap_or_all")]
    pub cap_class: Option<MarketCapClass>,
    pub holding_period: String,
    pub curve: EquityCurve,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunWarnings {
    pub skipped_signals: usize,
    pub skipped_trades: usize,
    pub truncated_trades: usize,
    pub gap_days: usize,
}

impl RunWarnings {
    fn absorb(&mut self, other: &RunWarnings) {
        self.skipped_signals += other.skipped_signals;
        self.skipped_trades += other.skipped_trades;
        self.truncated_trades += other.truncated_trades;
        self.gap_days += other.gap_days;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestBody {
    pub metrics: Vec<MetricsRecord>,
    pub trades: Vec<Trade>,
    pub curves: Vec<CurveRecord>,
    pub warnings: RunWarnings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBody {
    pub grid: Vec<MetricsRecord>,
    pub warnings: RunWarnings,
}

struct CellOutput {
    metrics: Vec<MetricsRecord>,
    trades: Vec<Trade>,
    curves: Vec<CurveRecord>,
    warnings: RunWarnings,
}

fn record(
    strategy_id: &str,
    cap_class: Option<MarketCapClass>,
    hold: &str,
    curve: &EquityCurve,
    n_trades: usize,
    cfg: &MetricsConfig,
) -> Result<MetricsRecord> {
    let m = strategy_metrics(curve, n_trades, cfg)?;
    Ok(MetricsRecord {
        strategy_id: strategy_id.to_string(),
        cap_class,
        holding_period: hold.to_string(),
        cumulative_return: m.cumulative_return,
        annualized_return: m.annualized_return,
        volatility: m.annualized_volatility,
        sharpe: m.sharpe,
        n_trades: m.n_trades,
        rf: cfg.risk_free_rate,
        span_years: m.span_years,
        bankrupt: m.bankrupt,
    })
}

/// Inputs shared by every cell of one run.
struct CellContext<'a> {
    events: &'a [Event],
    prices: &'a PriceMap,
    params: &'a StrategyParams,
    metrics_cfg: &'a MetricsConfig,
    calendar: Vec<NaiveDate>,
    keep_detail: bool,
}

fn run_cell(spec: &StrategySpec, hold: HoldingPeriod, ctx: &CellContext) -> Result<CellOutput> {
    let CellContext {
        events,
        prices,
        params,
        metrics_cfg,
        keep_detail,
        ..
    } = *ctx;
    let cfg = params.config(&spec.strategy_id, hold)?;
    let (signals, skipped_signals) = spec.signals(events, prices, &cfg)?;
    let executed = execute_trades(&signals, prices, &cfg);
    let hold_label = hold.to_string();
    let mut out = CellOutput {
        metrics: Vec::new(),
        trades: Vec::new(),
        curves: Vec::new(),
        warnings: RunWarnings {
            skipped_signals,
            skipped_trades: executed.skipped,
            truncated_trades: executed.truncated,
            gap_days: 0,
        },
    };
    for class in MarketCapClass::ALL {
        let trades: Vec<Trade> = executed
            .trades
            .iter()
            .filter(|t| t.signal.cap_class == class)
            .cloned()
            .collect();
        let curve = equity_curve_on(&trades, prices, &ctx.calendar)?;
        out.warnings.gap_days += curve.gaps;
        out.metrics.push(record(
            &spec.strategy_id,
            Some(class),
            &hold_label,
            &curve,
            trades.len(),
            metrics_cfg,
        )?);
        if keep_detail {
            out.curves.push(CurveRecord {
                strategy_id: spec.strategy_id.clone(),
                cap_class: Some(class),
                holding_period: hold_label.clone(),
                curve,
            });
        }
    }
    if keep_detail {
        out.trades = executed.trades;
    }
    Ok(out)
}

fn run_cells(
    strategies: &[StrategySpec],
    holds: &[HoldingPeriod],
    events: &[Event],
    prices: &PriceMap,
    params: &StrategyParams,
    metrics_cfg: &MetricsConfig,
    keep_detail: bool,
) -> Result<Vec<CellOutput>> {
    metrics_cfg.validate()?;
    let ctx = CellContext {
        events,
        prices,
        params,
        metrics_cfg,
        calendar: trading_calendar(prices, metrics_cfg),
        keep_detail,
    };
    let cells: Vec<(&StrategySpec, HoldingPeriod)> = strategies
        .iter()
        .flat_map(|s| holds.iter().map(move |h| (s, *h)))
        .collect();
    // Parallel map preserves input order, so the merge is deterministic.
    cells
        .par_iter()
        .map(|(spec, hold)| run_cell(spec, *hold, &ctx))
        .collect()
}

/// Buy-and-hold of one ticker over the backtest window, entered at the first
/// open and exited at the last close inside the window.
pub fn benchmark_cell(
    ticker: &str,
    prices: &PriceMap,
    cfg: &MetricsConfig,
) -> Result<(MetricsRecord, CurveRecord)> {
    let series = prices
        .get(ticker)
        .ok_or_else(|| Error::NotFound(format!("benchmark ticker {ticker} not in price file")))?;
    let bars: Vec<_> = series
        .bars()
        .iter()
        .filter(|b| (cfg.backtest_start..=cfg.backtest_end).contains(&b.date))
        .collect();
    let (first, last) = match (bars.first(), bars.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => {
            return Err(Error::Coverage(format!(
                "benchmark {ticker} has no bars inside the backtest window"
            )))
        }
    };
    let strategy_id = format!("buy_and_hold:{ticker}");
    let trade = Trade {
        signal: Signal {
            event_id: strategy_id.clone(),
            ticker: ticker.to_string(),
            cap_class: MarketCapClass::Large,
            entry_date: first.date,
            direction: Direction::Long,
            strategy_id: strategy_id.clone(),
        },
        entry_price: first.adj_open(),
        exit_date: last.date,
        exit_price: last.adj_close,
        holding_days: (bars.len() - 1) as u32,
        realized_return: last.adj_close / first.adj_open() - 1.0,
        truncated: false,
    };
    let curve = build_equity_curve(std::slice::from_ref(&trade), prices, cfg)?;
    let rec = record(&strategy_id, None, "span", &curve, 1, cfg)?;
    Ok((
        rec,
        CurveRecord {
            strategy_id,
            cap_class: None,
            holding_period: "span".into(),
            curve,
        },
    ))
}

/// Metrics per (strategy, holding period, cap class), with trades and
/// equity curves.
pub fn run_backtest(
    strategies: &[StrategySpec],
    holds: &[HoldingPeriod],
    events: &[Event],
    prices: &PriceMap,
    params: &StrategyParams,
    metrics_cfg: &MetricsConfig,
    benchmark: Option<&str>,
) -> Result<BacktestBody> {
    let mut body = BacktestBody {
        metrics: Vec::new(),
        trades: Vec::new(),
        curves: Vec::new(),
        warnings: RunWarnings::default(),
    };
    for cell in run_cells(strategies, holds, events, prices, params, metrics_cfg, true)? {
        body.metrics.extend(cell.metrics);
        body.trades.extend(cell.trades);
        body.curves.extend(cell.curves);
        body.warnings.absorb(&cell.warnings);
    }
    if let Some(ticker) = benchmark {
        let (rec, curve) = benchmark_cell(ticker, prices, metrics_cfg)?;
        body.metrics.push(rec);
        body.curves.push(curve);
    }
    Ok(body)
}

pub fn sweep_holds() -> Vec<HoldingPeriod> {
    (1..=MAX_HOLD_DAYS)
        .map(HoldingPeriod::TradingDays)
        .collect()
}

/// Metric grid over trading-day holding periods. Rows are ordered by
/// strategy, then holding period, then cap class.
pub fn run_sweep(
    strategies: &[StrategySpec],
    holds: &[HoldingPeriod],
    events: &[Event],
    prices: &PriceMap,
    params: &StrategyParams,
    metrics_cfg: &MetricsConfig,
) -> Result<SweepBody> {
    let mut body = SweepBody {
        grid: Vec::new(),
        warnings: RunWarnings::default(),
    };
    for cell in run_cells(
        strategies,
        holds,
        events,
        prices,
        params,
        metrics_cfg,
        false,
    )? {
        body.grid.extend(cell.metrics);
        body.warnings.absorb(&cell.warnings);
    }
    Ok(body)
}

pub fn write_metrics_csv<W: Write>(writer: W, records: &[MetricsRecord]) -> Result<()> {
    write_rows(writer, records)
}

pub fn write_curves_csv<W: Write>(writer: W, curves: &[CurveRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    wtr.write_record([
        "strategy_id",
        "cap_class",
        "holding_period",
        "date",
        "daily_return",
        "equity",
        "open_positions",
    ])
    .map_err(ser)?;
    for c in curves {
        let class = c.cap_class.map(|k| k.as_str()).unwrap_or("all");
        for i in 0..c.curve.dates.len() {
            wtr.write_record([
                c.strategy_id.as_str(),
                class,
                c.holding_period.as_str(),
                &c.curve.dates[i].to_string(),
                &c.curve.daily_returns[i].to_string(),
                &c.curve.equity[i].to_string(),
                &c.curve.open_positions[i].to_string(),
            ])
            .map_err(ser)?;
        }
    }
    wtr.flush().map_err(|e| Error::Serialize(e.to_string()))
}
