//! Run settings: config file values overlaid with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bioevent_core::strategies::HoldingPeriod;
use bioevent_core::{DocKind, MetricsConfig};
use chrono::NaiveDate;
use serde::Deserialize;

use crate::args::{Flags, Format, StrategyKind};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    prices: Option<PathBuf>,
    events: Option<PathBuf>,
    #[serde(default)]
    scores: Vec<String>,
    labels: Option<PathBuf>,
    thresholds: Option<PathBuf>,
    epsilon: Option<f64>,
    rf: Option<f64>,
    hold_days: Option<HoldValue>,
    hold_months: Option<HoldValue>,
    allow_short: Option<bool>,
    momentum_threshold: Option<f64>,
    #[serde(default)]
    strategies: Vec<StrategyKind>,
    benchmark: Option<String>,
    kind: Option<String>,
    out: Option<PathBuf>,
    format: Option<Format>,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
    documents: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    scorer_id: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum HoldValue {
    One(u32),
    Spec(String),
}

impl HoldValue {
    fn spec(&self) -> String {
        match self {
            HoldValue::One(n) => n.to_string(),
            HoldValue::Spec(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreInput {
    pub name: Option<String>,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hold {
    Days,
    Months,
}

#[derive(Debug)]
pub struct Settings {
    pub prices: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub scores: Vec<ScoreInput>,
    pub labels: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub epsilon: f64,
    /// Holding periods from flags or config; `None` means the command default.
    pub holds: Option<Vec<HoldingPeriod>>,
    pub allow_short: bool,
    pub momentum_threshold: f64,
    pub strategies: Vec<StrategyKind>,
    pub benchmark: Option<String>,
    pub kinds: Vec<DocKind>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub metrics: MetricsConfig,
    pub documents: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub scorer_id: String,
}

/// Parses `N`, `A..B` (inclusive) or `A,B,C`.
pub fn parse_hold_spec(spec: &str, unit: Hold) -> Result<Vec<HoldingPeriod>> {
    let spec = spec.trim();
    let nums: Vec<u32> = if let Some((a, b)) = spec.split_once("..") {
        let a: u32 = a
            .trim()
            .parse()
            .with_context(|| format!("bad range start in {spec:?}"))?;
        let b: u32 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .with_context(|| format!("bad range end in {spec:?}"))?;
        if b < a {
            bail!("empty holding range {spec:?}");
        }
        (a..=b).collect()
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .with_context(|| format!("bad holding period {s:?} in {spec:?}"))
            })
            .collect::<Result<_>>()?
    };
    nums.into_iter()
        .map(|n| match unit {
            Hold::Days => HoldingPeriod::days(n),
            Hold::Months => HoldingPeriod::months(n),
        })
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}

fn parse_score_input(s: &str, base: &Path) -> ScoreInput {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !name.contains(['/', '\\']) => ScoreInput {
            name: Some(name.to_string()),
            path: base.join(path),
        },
        _ => ScoreInput {
            name: None,
            path: base.join(s),
        },
    }
}

fn parse_kinds(s: &str) -> Result<Vec<DocKind>> {
    if s == "all" {
        return Ok(DocKind::ALL.to_vec());
    }
    s.split(',')
        .map(|k| k.trim().parse::<DocKind>().map_err(anyhow::Error::msg))
        .collect()
}

impl Settings {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let (file, base) = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                let cfg: FileConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, base)
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        // Relative paths in the config file are relative to the file itself.
        let rel = |p: Option<PathBuf>| p.map(|p| base.join(p));

        let holds = match (&flags.hold_days, &flags.hold_months) {
            (Some(d), _) => Some(parse_hold_spec(d, Hold::Days)?),
            (None, Some(m)) => Some(parse_hold_spec(m, Hold::Months)?),
            (None, None) => match (&file.hold_days, &file.hold_months) {
                (Some(_), Some(_)) => bail!("config sets both hold_days and hold_months"),
                (Some(d), None) => Some(parse_hold_spec(&d.spec(), Hold::Days)?),
                (None, Some(m)) => Some(parse_hold_spec(&m.spec(), Hold::Months)?),
                (None, None) => None,
            },
        };

        let scores = if flags.scores.is_empty() {
            file.scores
                .iter()
                .map(|s| parse_score_input(s, &base))
                .collect()
        } else {
            flags
                .scores
                .iter()
                .map(|s| parse_score_input(s, Path::new("")))
                .collect()
        };

        let defaults = MetricsConfig::default();
        let metrics = MetricsConfig {
            risk_free_rate: flags.rf.or(file.rf).unwrap_or(defaults.risk_free_rate),
            backtest_start: flags
                .start
                .or(file.start)
                .unwrap_or(defaults.backtest_start),
            backtest_end: flags.end.or(file.end).unwrap_or(defaults.backtest_end),
            ..defaults
        };
        metrics.validate()?;

        let epsilon = flags.epsilon.or(file.epsilon).unwrap_or(0.05);
        if !epsilon.is_finite() || epsilon < 0.0 {
            bail!("--epsilon must be a finite value >= 0, got {epsilon}");
        }
        let momentum_threshold = flags
            .momentum_threshold
            .or(file.momentum_threshold)
            .unwrap_or(0.05);
        if !momentum_threshold.is_finite() {
            bail!("--momentum-threshold must be finite");
        }

        let kind = flags
            .kind
            .clone()
            .or(file.kind)
            .unwrap_or_else(|| "press_release".into());

        let mut strategies = if flags.strategies.is_empty() {
            file.strategies
        } else {
            flags.strategies.clone()
        };
        strategies.dedup();

        Ok(Settings {
            prices: flags.prices.clone().or(rel(file.prices)),
            events: flags.events.clone().or(rel(file.events)),
            scores,
            labels: flags.labels.clone().or(rel(file.labels)),
            thresholds: flags.thresholds.clone().or(rel(file.thresholds)),
            epsilon,
            holds,
            allow_short: flags.allow_short || file.allow_short.unwrap_or(false),
            momentum_threshold,
            strategies,
            benchmark: flags.benchmark.clone().or(file.benchmark),
            kinds: parse_kinds(&kind)?,
            out: flags.out.clone().or(rel(file.out)),
            format: flags.format.or(file.format).unwrap_or(Format::Structured),
            metrics,
            documents: flags.documents.clone().or(rel(file.documents)),
            lexicon: flags.lexicon.clone().or(rel(file.lexicon)),
            scorer_id: flags
                .scorer_id
                .clone()
                .or(file.scorer_id)
                .unwrap_or_else(|| "lexicon".into()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hold_specs() {
        assert_eq!(
            parse_hold_spec("5", Hold::Days).unwrap(),
            [HoldingPeriod::TradingDays(5)]
        );
        assert_eq!(parse_hold_spec("1..90", Hold::Days).unwrap().len(), 90);
        assert_eq!(
            parse_hold_spec("1,3", Hold::Months).unwrap(),
            [
                HoldingPeriod::CalendarMonths(1),
                HoldingPeriod::CalendarMonths(3)
            ]
        );
        assert!(parse_hold_spec("0", Hold::Days).is_err());
        assert!(parse_hold_spec("1..91", Hold::Days).is_err());
        assert!(parse_hold_spec("4", Hold::Months).is_err());
        assert!(parse_hold_spec("3..1", Hold::Days).is_err());
        assert!(parse_hold_spec("x", Hold::Days).is_err());
    }

    #[test]
    fn score_inputs() {
        let s = parse_score_input("finbert=a/b.jsonl", Path::new(""));
        assert_eq!(s.name.as_deref(), Some("finbert"));
        assert_eq!(s.path, PathBuf::from("a/b.jsonl"));
        let s = parse_score_input("a/x=y.jsonl", Path::new(""));
        assert_eq!(s.name, None);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "prices = \"p.csv\"\nepsilon = 0.1\nhold_months = 2\nrf = 0.02\n",
        )
        .unwrap();
        let flags = Flags {
            config: Some(path),
            rf: Some(0.0),
            ..Flags::default()
        };
        let s = Settings::resolve(&flags).unwrap();
        assert_eq!(s.prices, Some(dir.path().join("p.csv")));
        assert_eq!(s.epsilon, 0.1);
        assert_eq!(s.metrics.risk_free_rate, 0.0);
        assert_eq!(s.holds, Some(vec![HoldingPeriod::CalendarMonths(2)]));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "epsilonn = 0.1\n").unwrap();
        let flags = Flags {
            config: Some(path),
            ..Flags::default()
        };
        assert!(Settings::resolve(&flags).is_err());
    }
}
