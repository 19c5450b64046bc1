use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bioevent",
    version,
    about = "Event labeling, sentiment evaluation and event-driven backtests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Label every event from its event-window return.
    Label,
    /// Score discretized sentiment against event labels.
    Evaluate,
    /// Backtest strategies over fixed holding periods.
    Backtest,
    /// Metric grid over 1..90 trading-day holds.
    Sweep,
    /// Label, evaluate and backtest in one run, writing everything to --out.
    Report,
    /// Score documents with the lexicon scorer and write a score file.
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Structured,
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// Open-to-close momentum on the release day.
    Benchmark,
    /// Entries gated on the realized response label.
    Labels,
}

#[derive(Debug, Default, clap::Args)]
pub struct Flags {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "FILE")]
    pub prices: Option<PathBuf>,

    #[arg(long, global = true, value_name = "FILE")]
    pub events: Option<PathBuf>,

    /// Score file, optionally named: `finbert=scores.jsonl`. Repeatable.
    #[arg(long, global = true, value_name = "[NAME=]FILE")]
    pub scores: Vec<String>,

    /// Labels from an earlier `label` run (JSON report or CSV table).
    #[arg(long, global = true, value_name = "FILE")]
    pub labels: Option<PathBuf>,

    /// Threshold overrides: `cap_class,positive_threshold,negative_threshold`.
    #[arg(long, global = true, value_name = "FILE")]
    pub thresholds: Option<PathBuf>,

    /// Neutral band for discretizing scores.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,

    /// Annual risk-free rate.
    #[arg(long, global = true)]
    pub rf: Option<f64>,

    /// Trading-day holds: `5`, `1..90` or `5,10,20`.
    #[arg(
        long,
        global = true,
        conflicts_with = "hold_months",
        value_name = "SPEC"
    )]
    pub hold_days: Option<String>,

    /// Calendar-month holds: `1`, `1..3` or `1,3`.
    #[arg(long, global = true, value_name = "SPEC")]
    pub hold_months: Option<String>,

    #[arg(long, global = true)]
    pub allow_short: bool,

    /// Release-day open-to-close move needed for a momentum entry.
    #[arg(long, global = true)]
    pub momentum_threshold: Option<f64>,

    /// Non-sentiment strategies to run. Each score file adds a sentiment strategy.
    #[arg(long = "strategy", global = true, value_enum)]
    pub strategies: Vec<StrategyKind>,

    /// Add a buy-and-hold row for this ticker.
    #[arg(long, global = true, value_name = "TICKER")]
    pub benchmark: Option<String>,

    /// Document kind to evaluate: press_release, filing_pre, filing_post or all.
    #[arg(long, global = true)]
    pub kind: Option<String>,

    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// First day of the backtest window.
    #[arg(long, global = true, value_name = "DATE")]
    pub start: Option<chrono::NaiveDate>,

    /// Last day of the backtest window.
    #[arg(long, global = true, value_name = "DATE")]
    pub end: Option<chrono::NaiveDate>,

    /// Documents to score (JSONL with doc_id, event_id, doc_kind, text).
    #[arg(long, global = true, value_name = "FILE")]
    pub documents: Option<PathBuf>,

    /// Lexicon CSV (`word,polarity`); defaults to the built-in biotech list.
    #[arg(long, global = true, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,

    #[arg(long, global = true)]
    pub scorer_id: Option<String>,
}
