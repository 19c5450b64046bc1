//! Equity curves and the four headline performance metrics.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::PriceMap;
use crate::strategies::Trade;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub risk_free_rate: f64,
    pub trading_days_per_year: u32,
    pub backtest_start: NaiveDate,
    pub backtest_end: NaiveDate,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            risk_free_rate: 0.01,
            trading_days_per_year: 252,
            backtest_start: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            backtest_end: NaiveDate::from_ymd_opt(2023, 12, 31).unwrap(),
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.risk_free_rate.is_finite() {
            return Err(Error::Validation("risk-free rate must be finite".into()));
        }
        if self.trading_days_per_year == 0 {
            return Err(Error::Validation(
                "trading_days_per_year must be positive".into(),
            ));
        }
        if self.backtest_end < self.backtest_start {
            return Err(Error::Validation(format!(
                "backtest window ends ({}) before it starts ({})",
                self.backtest_end, self.backtest_start
            )));
        }
        Ok(())
    }

    /// Inclusive window length in Julian years; 2020-01-01..2023-12-31 is
    /// exactly 4.0.
    pub fn span_years(&self) -> f64 {
        ((self.backtest_end - self.backtest_start).num_days() + 1) as f64 / 365.25
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    pub dates: Vec<NaiveDate>,
    pub daily_returns: Vec<f64>,
    pub equity: Vec<f64>,
    /// Number of positions open on each date.
    pub open_positions: Vec<u32>,
    /// Position-days carried flat because the ticker had no bar that day.
    pub gaps: usize,
    /// Equity reached zero; the curve stops on that day.
    pub bankrupt: bool,
}

/// Sorted union of every bar date inside the backtest window.
pub fn trading_calendar(prices: &PriceMap, cfg: &MetricsConfig) -> Vec<NaiveDate> {
    let mut dates: Vec<NaiveDate> = prices
        .values()
        .flat_map(|s| s.bars().iter().map(|b| b.date))
        .filter(|d| (cfg.backtest_start..=cfg.backtest_end).contains(d))
        .collect();
    dates.sort_unstable();
    dates.dedup();
    dates
}

/// Equal-weight portfolio of open positions, rebalanced daily.
///
/// A position is open from its entry date through its exit date. On the
/// entry day it earns close over entry open; afterwards close over previous
/// close. Days with nothing open return 0.
pub fn build_equity_curve(
    trades: &[Trade],
    prices: &PriceMap,
    cfg: &MetricsConfig,
) -> Result<EquityCurve> {
    cfg.validate()?;
    equity_curve_on(trades, prices, &trading_calendar(prices, cfg))
}

/// As [`build_equity_curve`] over a precomputed calendar, for callers that
/// build many curves from one price map.
pub fn equity_curve_on(
    trades: &[Trade],
    prices: &PriceMap,
    dates: &[NaiveDate],
) -> Result<EquityCurve> {
    let mut sums = vec![0.0; dates.len()];
    let mut counts = vec![0u32; dates.len()];
    let mut gaps = 0;

    for t in trades {
        let series = prices.get(&t.signal.ticker).ok_or_else(|| {
            Error::Coverage(format!(
                "trade {} has no {} price series",
                t.signal.event_id, t.signal.ticker
            ))
        })?;
        let entry_idx = series.index_of(t.signal.entry_date).ok_or_else(|| {
            Error::Coverage(format!(
                "trade {}: no {} bar on entry date {}",
                t.signal.event_id, t.signal.ticker, t.signal.entry_date
            ))
        })?;
        let sign = t.signal.direction.sign();
        let lo = dates.partition_point(|d| *d < t.signal.entry_date);
        let hi = dates.partition_point(|d| *d <= t.exit_date);
        let bars = series.bars();
        let mut j = entry_idx;
        for c in lo..hi {
            while j < bars.len() && bars[j].date < dates[c] {
                j += 1;
            }
            let r = if j < bars.len() && bars[j].date == dates[c] {
                if j == entry_idx {
                    bars[j].adj_close / t.entry_price - 1.0
                } else {
                    bars[j].adj_close / bars[j - 1].adj_close - 1.0
                }
            } else {
                gaps += 1;
                0.0
            };
            sums[c] += sign * r;
            counts[c] += 1;
        }
    }
    if gaps > 0 {
        log::warn!("{gaps} position-days carried flat over missing bars");
    }

    let mut curve = EquityCurve {
        dates: Vec::with_capacity(dates.len()),
        daily_returns: Vec::with_capacity(dates.len()),
        equity: Vec::with_capacity(dates.len()),
        open_positions: Vec::with_capacity(dates.len()),
        gaps,
        bankrupt: false,
    };
    let mut level = 1.0;
    for (i, &date) in dates.iter().enumerate() {
        let r = if counts[i] == 0 {
            0.0
        } else {
            sums[i] / f64::from(counts[i])
        };
        level *= 1.0 + r;
        curve.dates.push(date);
        curve.daily_returns.push(r);
        curve.equity.push(level);
        curve.open_positions.push(counts[i]);
        if level <= 0.0 {
            curve.bankrupt = true;
            break;
        }
    }
    Ok(curve)
}

pub fn cumulative_return(curve: &EquityCurve) -> Result<f64> {
    curve
        .equity
        .last()
        .map(|e| e - 1.0)
        .ok_or_else(|| Error::Domain("empty equity curve".into()))
}

/// Geometric annualisation `(1 + CR)^(1/T) - 1`.
pub fn annualized_return(cumulative: f64, years: f64) -> Result<f64> {
    if !years.is_finite() || years <= 0.0 {
        return Err(Error::Domain(format!(
            "span must be positive, got {years} years"
        )));
    }
    if cumulative.is_nan() || cumulative <= -1.0 {
        return Err(Error::Domain(format!(
            "cumulative return {cumulative} means the portfolio went bankrupt"
        )));
    }
    if years == 1.0 {
        return Ok(cumulative);
    }
    Ok((cumulative.ln_1p() / years).exp_m1())
}

/// Sample standard deviation of daily returns, scaled by the square root of
/// the trading days per year.
pub fn annualized_volatility(daily_returns: &[f64], cfg: &MetricsConfig) -> Result<f64> {
    let n = daily_returns.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "volatility needs at least 2 observations, got {n}"
        )));
    }
    // Constant series: the mean below would carry rounding residue.
    if daily_returns.iter().all(|r| *r == daily_returns[0]) {
        return Ok(0.0);
    }
    let mean = daily_returns.iter().sum::<f64>() / n as f64;
    let var = daily_returns
        .iter()
        .map(|r| (r - mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    Ok(var.sqrt() * f64::from(cfg.trading_days_per_year).sqrt())
}

/// `(AR - rf) / sigma`; absent when sigma is not positive.
pub fn sharpe_ratio(annual_return: f64, volatility: f64, cfg: &MetricsConfig) -> Option<f64> {
    (volatility > 0.0).then(|| (annual_return - cfg.risk_free_rate) / volatility)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyMetrics {
    pub cumulative_return: f64,
    pub annualized_return: Option<f64>,
    pub annualized_volatility: Option<f64>,
    pub sharpe: Option<f64>,
    pub span_years: f64,
    pub n_trades: usize,
    pub bankrupt: bool,
}

pub fn strategy_metrics(
    curve: &EquityCurve,
    n_trades: usize,
    cfg: &MetricsConfig,
) -> Result<StrategyMetrics> {
    let span_years = cfg.span_years();
    let cumulative = cumulative_return(curve)?;
    let annual = if curve.bankrupt {
        None
    } else {
        annualized_return(cumulative, span_years).ok()
    };
    let vol = annualized_volatility(&curve.daily_returns, cfg).ok();
    let sharpe = annual.zip(vol).and_then(|(a, v)| sharpe_ratio(a, v, cfg));
    Ok(StrategyMetrics {
        cumulative_return: cumulative,
        annualized_return: annual,
        annualized_volatility: vol,
        sharpe,
        span_years,
        n_trades,
        bankrupt: curve.bankrupt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{MarketCapClass, PriceBar, PriceSeries};
    use crate::strategies::{Direction, Signal};

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn series(ticker: &str, rows: &[(&str, f64, f64)]) -> PriceSeries {
        let bars = rows
            .iter()
            .map(|&(date, open, close)| PriceBar {
                date: d(date),
                open,
                high: open.max(close),
                low: open.min(close),
                close,
                adj_close: close,
                volume: 0,
            })
            .collect();
        PriceSeries::new(ticker, bars).unwrap()
    }

    fn trade(
        ticker: &str,
        entry: &str,
        exit: &str,
        entry_price: f64,
        direction: Direction,
    ) -> Trade {
        Trade {
            signal: Signal {
                event_id: format!("{ticker}-{entry}"),
                ticker: ticker.into(),
                cap_class: MarketCapClass::Mid,
                entry_date: d(entry),
                direction,
                strategy_id: "t".into(),
            },
            entry_price,
            exit_date: d(exit),
            exit_price: f64::NAN,
            holding_days: 0,
            realized_return: f64::NAN,
            truncated: false,
        }
    }

    #[test]
    fn zero_trades_flat_curve() {
        let prices = PriceMap::from([(
            "A".into(),
            series("A", &[("2021-01-04", 1.0, 1.0), ("2021-01-05", 1.0, 2.0)]),
        )]);
        let c = build_equity_curve(&[], &prices, &MetricsConfig::default()).unwrap();
        assert_eq!(c.daily_returns, vec![0.0, 0.0]);
        assert_eq!(c.equity.last(), Some(&1.0));
        let m = strategy_metrics(&c, 0, &MetricsConfig::default()).unwrap();
        assert_eq!(m.cumulative_return, 0.0);
        assert_eq!(m.annualized_return, Some(0.0));
        assert_eq!(m.annualized_volatility, Some(0.0));
        assert_eq!(m.sharpe, None);
    }

    #[test]
    fn one_long_two_days() {
        let prices = PriceMap::from([(
            "A".into(),
            series(
                "A",
                &[("2021-01-04", 10.0, 11.0), ("2021-01-05", 11.0, 12.1)],
            ),
        )]);
        let t = trade("A", "2021-01-04", "2021-01-05", 10.0, Direction::Long);
        let c = build_equity_curve(&[t], &prices, &MetricsConfig::default()).unwrap();
        assert!((c.daily_returns[0] - 0.1).abs() < 1e-12);
        assert!((c.daily_returns[1] - 0.1).abs() < 1e-12);
        assert!((c.equity[1] - 1.21).abs() < 1e-12);
    }

    #[test]
    fn offsetting_positions_cancel() {
        let prices = PriceMap::from([
            ("A".into(), series("A", &[("2021-01-04", 10.0, 11.0)])),
            ("B".into(), series("B", &[("2021-01-04", 10.0, 9.0)])),
        ]);
        let trades = [
            trade("A", "2021-01-04", "2021-01-04", 10.0, Direction::Long),
            trade("B", "2021-01-04", "2021-01-04", 10.0, Direction::Long),
        ];
        let c = build_equity_curve(&trades, &prices, &MetricsConfig::default()).unwrap();
        assert!(c.daily_returns[0].abs() < 1e-15);
        assert_eq!(c.open_positions, vec![2]);
    }

    #[test]
    fn missing_bar_is_a_flat_gap_day() {
        let prices = PriceMap::from([
            (
                "A".into(),
                series(
                    "A",
                    &[("2021-01-04", 10.0, 10.0), ("2021-01-06", 10.0, 12.0)],
                ),
            ),
            (
                "B".into(),
                series(
                    "B",
                    &[
                        ("2021-01-04", 1.0, 1.0),
                        ("2021-01-05", 1.0, 1.0),
                        ("2021-01-06", 1.0, 1.0),
                    ],
                ),
            ),
        ]);
        let t = trade("A", "2021-01-04", "2021-01-06", 10.0, Direction::Long);
        let c = build_equity_curve(&[t], &prices, &MetricsConfig::default()).unwrap();
        assert_eq!(c.gaps, 1);
        assert_eq!(c.daily_returns[1], 0.0);
        assert!((c.daily_returns[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn short_blowup_flags_bankruptcy() {
        let prices = PriceMap::from([(
            "A".into(),
            series(
                "A",
                &[("2021-01-04", 10.0, 25.0), ("2021-01-05", 25.0, 30.0)],
            ),
        )]);
        let t = trade("A", "2021-01-04", "2021-01-05", 10.0, Direction::Short);
        let c = build_equity_curve(&[t], &prices, &MetricsConfig::default()).unwrap();
        assert!(c.bankrupt);
        assert_eq!(c.dates.len(), 1);
        let m = strategy_metrics(&c, 1, &MetricsConfig::default()).unwrap();
        assert!(m.annualized_return.is_none() && m.sharpe.is_none());
    }

    #[test]
    fn cumulative_examples() {
        let curve = |last: f64| EquityCurve {
            dates: vec![d("2021-01-04")],
            daily_returns: vec![last - 1.0],
            equity: vec![last],
            open_positions: vec![1],
            gaps: 0,
            bankrupt: false,
        };
        assert!((cumulative_return(&curve(1.89)).unwrap() - 0.89).abs() < 1e-12);
        assert!((cumulative_return(&curve(0.48)).unwrap() + 0.52).abs() < 1e-12);
        let mut empty = curve(1.0);
        empty.equity.clear();
        assert!(matches!(cumulative_return(&empty), Err(Error::Domain(_))));
    }

    #[test]
    fn annualization_examples() {
        assert!((annualized_return(0.89, 4.0).unwrap() - 0.1726).abs() < 1e-4);
        assert!((annualized_return(-0.23, 4.0).unwrap() + 0.0633).abs() < 1e-4);
        assert_eq!(annualized_return(0.0, 2.7).unwrap(), 0.0);
        assert_eq!(annualized_return(0.1, 1.0).unwrap(), 0.1);
        assert!(annualized_return(-1.0, 4.0).is_err());
        assert!(annualized_return(0.5, 0.0).is_err());
        assert_eq!(MetricsConfig::default().span_years(), 4.0);
    }

    #[test]
    fn volatility_examples() {
        let cfg = MetricsConfig::default();
        assert_eq!(annualized_volatility(&[0.003; 50], &cfg).unwrap(), 0.0);
        assert_eq!(annualized_volatility(&[0.0; 10], &cfg).unwrap(), 0.0);
        assert!(annualized_volatility(&[0.01], &cfg).is_err());
        // For 2n alternating ±1% the sample sd is 0.01 * sqrt(2n / (2n - 1)).
        let alt: Vec<f64> = (0..10_000)
            .map(|i| if i % 2 == 0 { 0.01 } else { -0.01 })
            .collect();
        let v = annualized_volatility(&alt, &cfg).unwrap();
        assert!((v - 0.01 * 252f64.sqrt()).abs() < 1e-4, "{v}");
        assert!((v - 0.01 * (10_000.0f64 / 9_999.0).sqrt() * 252f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sharpe_examples() {
        let cfg = MetricsConfig::default();
        let s = sharpe_ratio(-0.06, 0.14, &cfg).unwrap();
        assert_eq!(format!("{s:.2}"), "-0.50");
        let s = sharpe_ratio(0.06, 0.19, &cfg).unwrap();
        assert!((s - 0.263).abs() < 1e-3);
        assert_eq!(sharpe_ratio(cfg.risk_free_rate, 0.3, &cfg), Some(0.0));
        assert_eq!(sharpe_ratio(0.2, 0.0, &cfg), None);
    }
}
