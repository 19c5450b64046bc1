use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bioevent_core::evaluation::{compare_scorers, evaluate, EvaluationReport, ScorerComparison};
use bioevent_core::labeling::{label_counts, label_ledger, LabelThresholds, LabeledEvent};
use bioevent_core::market_data::{load_event_ledger, load_price_map, Event, PriceMap};
use bioevent_core::report::{
    self, digest_file, load_labeled_events, run_backtest, run_sweep, sweep_holds, LabelReport,
    Report, RunConfig, StrategyParams, StrategySource, StrategySpec,
};
use bioevent_core::sentiment::{
    load_documents, load_scores, score_with_lexicon, write_scores, DocumentScore, Lexicon,
};
use bioevent_core::strategies::{write_trades, HoldingPeriod};
use bioevent_core::SentimentPolicy;
use serde::{Deserialize, Serialize};

use crate::args::StrategyKind;
use crate::output::Output;
use crate::settings::Settings;

/// Digests of every input file a command read, keyed by role.
#[derive(Default)]
struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn add(&mut self, role: impl Into<String>, path: &Path) -> Result<()> {
        self.0.insert(role.into(), digest_file(path)?);
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateBody {
    pub reports: Vec<EvaluationReport>,
    /// One per document kind with at least two scorers.
    pub comparisons: Vec<ScorerComparison>,
}

fn load_events(s: &Settings, inputs: &mut Inputs) -> Result<Vec<Event>> {
    let path = s.events.as_deref().context("--events is required")?;
    inputs.add("events", path)?;
    Ok(load_event_ledger(path)?)
}

fn load_prices(s: &Settings, inputs: &mut Inputs, required: bool) -> Result<PriceMap> {
    match s.prices.as_deref() {
        Some(path) => {
            inputs.add("prices", path)?;
            Ok(load_price_map(path)?)
        }
        None if required => bail!("--prices is required"),
        None => Ok(PriceMap::new()),
    }
}

fn load_thresholds(s: &Settings, inputs: &mut Inputs) -> Result<LabelThresholds> {
    match s.thresholds.as_deref() {
        Some(path) => {
            inputs.add("thresholds", path)?;
            Ok(LabelThresholds::load(path)?)
        }
        None => Ok(LabelThresholds::default()),
    }
}

/// Labels from `--labels` when given, otherwise computed from the ledger.
fn obtain_labels(
    s: &Settings,
    inputs: &mut Inputs,
    events: Option<&[Event]>,
    prices: &PriceMap,
    thresholds: &LabelThresholds,
) -> Result<Vec<LabeledEvent>> {
    if let Some(path) = s.labels.as_deref() {
        inputs.add("labels", path)?;
        return Ok(load_labeled_events(path)?);
    }
    let Some(events) = events else {
        bail!("either --labels or --events is required");
    };
    Ok(label_ledger(events, prices, thresholds)?)
}

/// Loads each score file; a `NAME=` prefix renames the scorer.
fn load_score_sets(s: &Settings, inputs: &mut Inputs) -> Result<Vec<(String, Vec<DocumentScore>)>> {
    let mut out: Vec<(String, Vec<DocumentScore>)> = Vec::new();
    for input in &s.scores {
        let mut scores = load_scores(&input.path)?;
        let name = match &input.name {
            Some(n) => n.clone(),
            None => scores
                .first()
                .map(|r| r.scorer_id.clone())
                .unwrap_or_else(|| {
                    input
                        .path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default()
                }),
        };
        if let Some(n) = &input.name {
            scores.iter_mut().for_each(|r| r.scorer_id = n.clone());
        }
        if out.iter().any(|(n, _)| *n == name) {
            bail!("two score files use scorer id {name:?}; name them with NAME=FILE");
        }
        inputs.add(format!("scores:{name}"), &input.path)?;
        out.push((name, scores));
    }
    Ok(out)
}

fn run_config(
    s: &Settings,
    thresholds: &LabelThresholds,
    holds: &[HoldingPeriod],
    strategies: Vec<String>,
) -> RunConfig {
    let mut c = RunConfig::new(thresholds.clone(), s.epsilon, s.metrics.clone());
    c.momentum_threshold = s.momentum_threshold;
    c.allow_short = s.allow_short;
    c.holding_periods = holds.iter().map(ToString::to_string).collect();
    c.strategies = strategies;
    c
}

fn csv_table(write: impl FnOnce(&mut Vec<u8>) -> bioevent_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

pub fn label(s: &Settings) -> Result<Output> {
    let mut inputs = Inputs::default();
    let events = load_events(s, &mut inputs)?;
    let prices = load_prices(s, &mut inputs, false)?;
    let thresholds = load_thresholds(s, &mut inputs)?;
    let labeled = label_ledger(&events, &prices, &thresholds)?;
    let body = LabelReport {
        counts: label_counts(&labeled),
        events: labeled,
    };
    let tables = vec![
        (
            "labels.csv".to_string(),
            csv_table(|w| report::write_labels_csv(w, &body.events))?,
        ),
        (
            "label_counts.csv".to_string(),
            csv_table(|w| report::write_label_counts_csv(w, &body.counts))?,
        ),
    ];
    let rep = Report::new(
        "label",
        run_config(s, &thresholds, &[], Vec::new()),
        inputs.0,
        body,
    )?;
    Output::new(&rep, tables)
}

pub fn evaluate_cmd(s: &Settings) -> Result<Output> {
    let mut inputs = Inputs::default();
    if s.scores.is_empty() {
        bail!("evaluate needs at least one --scores file");
    }
    let thresholds = load_thresholds(s, &mut inputs)?;
    let (events, prices) = if s.labels.is_some() {
        (None, PriceMap::new())
    } else {
        (
            Some(load_events(s, &mut inputs)?),
            load_prices(s, &mut inputs, false)?,
        )
    };
    let labels = obtain_labels(s, &mut inputs, events.as_deref(), &prices, &thresholds)?;
    let sets = load_score_sets(s, &mut inputs)?;
    let policy = SentimentPolicy::new(s.epsilon)?;

    let mut reports = Vec::new();
    let mut comparisons = Vec::new();
    for &kind in &s.kinds {
        let per_kind = sets
            .iter()
            .map(|(name, scores)| {
                evaluate(scores, &labels, &policy, kind)
                    .with_context(|| format!("evaluating {name}"))
            })
            .collect::<Result<Vec<_>>>()?;
        if per_kind.len() > 1 {
            comparisons.push(compare_scorers(&per_kind)?);
        }
        reports.extend(per_kind);
    }
    let mut tables = vec![(
        "evaluation.csv".to_string(),
        csv_table(|w| report::write_evaluation_csv(w, &reports))?,
    )];
    for c in &comparisons {
        let kind = c
            .rows
            .first()
            .map(|r| r.doc_kind.as_str())
            .unwrap_or("none");
        tables.push((
            format!("comparison_{kind}.csv"),
            csv_table(|w| report::write_comparison_csv(w, c))?,
        ));
    }
    let names = sets.iter().map(|(n, _)| n.clone()).collect();
    let rep = Report::new(
        "evaluate",
        run_config(s, &thresholds, &[], names),
        inputs.0,
        EvaluateBody {
            reports,
            comparisons,
        },
    )?;
    Output::new(&rep, tables)
}

struct Backtestable {
    inputs: Inputs,
    events: Vec<Event>,
    prices: PriceMap,
    thresholds: LabelThresholds,
    specs: Vec<StrategySpec>,
    params: StrategyParams,
}

fn prepare_backtest(s: &Settings) -> Result<Backtestable> {
    let mut inputs = Inputs::default();
    let events = load_events(s, &mut inputs)?;
    let prices = load_prices(s, &mut inputs, true)?;
    let thresholds = load_thresholds(s, &mut inputs)?;
    let kinds = if s.strategies.is_empty() {
        vec![StrategyKind::Benchmark]
    } else {
        s.strategies.clone()
    };
    let mut specs = Vec::new();
    for kind in kinds {
        specs.push(match kind {
            StrategyKind::Benchmark => StrategySpec::new("benchmark", StrategySource::Momentum),
            StrategyKind::Labels => {
                let labels = obtain_labels(s, &mut inputs, Some(&events), &prices, &thresholds)?;
                StrategySpec::new("labels", StrategySource::Labels(labels))
            }
        });
    }
    for (name, scores) in load_score_sets(s, &mut inputs)? {
        if specs.iter().any(|p| p.strategy_id == name) {
            bail!("scorer id {name:?} clashes with a built-in strategy name");
        }
        specs.push(StrategySpec::new(name, StrategySource::Sentiment(scores)));
    }
    let params = StrategyParams {
        momentum_threshold: s.momentum_threshold,
        allow_short: s.allow_short,
        neutral_band: s.epsilon,
    };
    Ok(Backtestable {
        inputs,
        events,
        prices,
        thresholds,
        specs,
        params,
    })
}

fn default_months() -> Vec<HoldingPeriod> {
    (1..=3).map(HoldingPeriod::CalendarMonths).collect()
}

pub fn backtest(s: &Settings) -> Result<Output> {
    let b = prepare_backtest(s)?;
    let holds = s.holds.clone().unwrap_or_else(default_months);
    let body = run_backtest(
        &b.specs,
        &holds,
        &b.events,
        &b.prices,
        &b.params,
        &s.metrics,
        s.benchmark.as_deref(),
    )?;
    log_warnings(&body.warnings);
    let tables = vec![
        (
            "metrics.csv".to_string(),
            csv_table(|w| report::write_metrics_csv(w, &body.metrics))?,
        ),
        (
            "trades.csv".to_string(),
            csv_table(|w| write_trades(w, &body.trades))?,
        ),
        (
            "curves.csv".to_string(),
            csv_table(|w| report::write_curves_csv(w, &body.curves))?,
        ),
    ];
    let names = b.specs.iter().map(|p| p.strategy_id.clone()).collect();
    let rep = Report::new(
        "backtest",
        run_config(s, &b.thresholds, &holds, names),
        b.inputs.0,
        body,
    )?;
    Output::new(&rep, tables)
}

pub fn sweep(s: &Settings) -> Result<Output> {
    let b = prepare_backtest(s)?;
    let holds = s.holds.clone().unwrap_or_else(sweep_holds);
    let body = run_sweep(
        &b.specs, &holds, &b.events, &b.prices, &b.params, &s.metrics,
    )?;
    log_warnings(&body.warnings);
    let tables = vec![(
        "grid.csv".to_string(),
        csv_table(|w| report::write_metrics_csv(w, &body.grid))?,
    )];
    let names = b.specs.iter().map(|p| p.strategy_id.clone()).collect();
    let rep = Report::new(
        "sweep",
        run_config(s, &b.thresholds, &holds, names),
        b.inputs.0,
        body,
    )?;
    Output::new(&rep, tables)
}

fn log_warnings(w: &report::RunWarnings) {
    if w.skipped_signals + w.skipped_trades + w.truncated_trades + w.gap_days > 0 {
        log::warn!(
            "{} signals skipped, {} trades skipped, {} trades truncated at the data end, {} flat gap days",
            w.skipped_signals,
            w.skipped_trades,
            w.truncated_trades,
            w.gap_days
        );
    }
}

/// Every stage in sequence; each stage writes under its own name.
pub fn full_report(s: &Settings) -> Result<Vec<Output>> {
    if s.out.is_none() {
        bail!("report writes several files and needs --out DIR");
    }
    let mut outputs = vec![label(s)?];
    if !s.scores.is_empty() {
        outputs.push(evaluate_cmd(s)?);
    }
    outputs.push(backtest(s)?);
    Ok(outputs)
}

pub fn score(s: &Settings) -> Result<Output> {
    let mut inputs = Inputs::default();
    let path = s.documents.as_deref().context("--documents is required")?;
    inputs.add("documents", path)?;
    let docs = load_documents(path)?;
    let lexicon = match s.lexicon.as_deref() {
        Some(p) => {
            inputs.add("lexicon", p)?;
            Lexicon::load(p)?
        }
        None => Lexicon::biotech_default(),
    };
    let scores = docs
        .iter()
        .map(|d| score_with_lexicon(d, &lexicon, &s.scorer_id))
        .collect::<bioevent_core::Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_scores(&mut buf, &scores)?;
    let digest = report::config_digest(&s.scorer_id)?;
    Ok(Output::raw(
        "score",
        format!("scores_{}.jsonl", s.scorer_id),
        buf,
        inputs.0,
        digest,
    ))
}
