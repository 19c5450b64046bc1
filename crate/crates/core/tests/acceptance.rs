//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fail.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bioevent_core::evaluation::evaluate;
use bioevent_core::labeling::{
    classify_response, label_ledger, LabelThresholds, LabeledEvent, ResponseLabel,
};
use bioevent_core::market_data::{
    load_event_ledger, load_price_map, EventType, MarketCapClass, PriceMap, PriceSeries,
};
use bioevent_core::metrics::{annualized_return, build_equity_curve, sharpe_ratio};
use bioevent_core::report::{run_sweep, sweep_holds, StrategyParams, StrategySource, StrategySpec};
use bioevent_core::sentiment::{load_scores, DocKind, DocumentScore, SentimentPolicy};
use bioevent_core::strategies::{
    execute_trades, signals_from_labels, signals_from_momentum, signals_from_sentiment,
    HoldingPeriod, Signal, StrategyConfig,
};
use bioevent_core::MetricsConfig;
use chrono::NaiveDate;
use common::{brute_force_equity, date, fixture, random_market};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// Published ATRA event rows: prior close, post close, label.
const ATRA: [(f64, f64, ResponseLabel); 8] = {
    use ResponseLabel::*;
    [
        (3.99, 4.14, Neutral),
        (4.69, 4.73, Neutral),
        (4.90, 3.88, Negative),
        (4.45, 4.32, Neutral),
        (5.46, 5.04, Negative),
        (2.97, 2.19, Negative),
        (1.58, 1.96, Positive),
        (1.21, 0.24, Negative),
    ]
};

// Published performance table: (class, months, CR, AR, sigma, Sharpe).
const TABLE: [(&str, u32, f64, f64, f64, f64); 12] = [
    ("large", 1, -0.23, -0.06, 0.14, -0.50),
    ("mid", 1, 0.25, 0.06, 0.19, 0.27),
    ("small", 1, 0.68, 0.14, 0.21, 0.61),
    ("micro", 1, 0.89, 0.17, 0.20, 0.81),
    ("large", 2, 2.63, 0.38, 0.16, 2.35),
    ("mid", 2, -0.52, -0.17, 0.26, -0.68),
    ("small", 2, 3.34, 0.44, 0.30, 1.45),
    ("micro", 2, 2.56, 0.37, 0.30, 1.22),
    ("large", 3, 4.15, 0.51, 0.29, 1.71),
    ("mid", 3, -0.52, -0.17, 0.26, -0.68),
    ("small", 3, 3.80, 0.48, 0.29, 1.60),
    ("micro", 3, 14.14, 0.97, 2.24, 0.43),
];

fn label_reproduction() -> Result<String, String> {
    let t = LabelThresholds::default();
    let micro = t.get(MarketCapClass::Micro);
    ensure(micro.positive == 0.04 && micro.negative == -0.04, || {
        format!("micro thresholds {micro:?}")
    })?;
    for (i, (prior, post, want)) in ATRA.iter().enumerate() {
        let got = classify_response((post - prior) / prior, MarketCapClass::Micro, &t)
            .map_err(|e| e.to_string())?;
        ensure(got == *want, || format!("row {i}: {got} != {want}"))?;
    }
    // Same labels through the ledger path, with and without price series.
    let prices = load_price_map(fixture("atra/prices.csv")).map_err(|e| e.to_string())?;
    for (file, p) in [
        ("atra/events.csv", &prices),
        ("atra/events_explicit.csv", &PriceMap::new()),
    ] {
        let events = load_event_ledger(fixture(file)).map_err(|e| e.to_string())?;
        let labeled = label_ledger(&events, p, &t).map_err(|e| e.to_string())?;
        let got: Vec<_> = labeled.iter().map(|l| l.label).collect();
        let want: Vec<_> = ATRA.iter().map(|r| r.2).collect();
        ensure(got == want, || format!("{file}: {got:?}"))?;
    }
    Ok("8/8 exact".into())
}

fn annualization_identity() -> Result<String, String> {
    let t = MetricsConfig::default().span_years();
    ensure(t == 4.0, || format!("span {t}"))?;
    let mut in_range = 0;
    let mut close = 0;
    let mut worst: f64 = 0.0;
    for (_, _, cr, ar, _, _) in TABLE {
        let implied = (1.0 + cr).ln() / (1.0 + ar).ln();
        in_range += usize::from((3.5..=4.5).contains(&implied));
        let diff = (annualized_return(cr, t).map_err(|e| e.to_string())? - ar).abs();
        worst = worst.max(diff);
        close += usize::from(diff <= 0.01);
    }
    ensure(in_range >= 10 && close >= 10, || {
        format!("T in range {in_range}/12, AR within 1pp {close}/12")
    })?;
    Ok(format!(
        "T in [3.5,4.5] {in_range}/12; |dAR|<=0.01 {close}/12 (worst {worst:.4})"
    ))
}

fn sharpe_back_solve() -> Result<String, String> {
    let ssr = |rf: f64| {
        TABLE
            .iter()
            .map(|(_, _, _, ar, s, sh)| ((ar - rf) / s - sh).powi(2))
            .sum::<f64>()
    };
    let grid: Vec<f64> = (0..=10).map(|i| f64::from(i) * 0.005).collect();
    let best = grid
        .iter()
        .copied()
        .min_by(|a, b| ssr(*a).total_cmp(&ssr(*b)))
        .unwrap();
    let cfg = MetricsConfig::default();
    ensure((best - cfg.risk_free_rate).abs() < 1e-12, || {
        format!("grid minimum at rf {best}, default {}", cfg.risk_free_rate)
    })?;
    let within = TABLE
        .iter()
        .filter(|(_, _, _, ar, s, sh)| (sharpe_ratio(*ar, *s, &cfg).unwrap() - sh).abs() <= 0.05)
        .count();
    ensure(within >= 11, || format!("{within}/12 within 0.05"))?;
    let large_1m = sharpe_ratio(-0.06, 0.14, &cfg).unwrap();
    ensure(format!("{large_1m:.2}") == "-0.50", || {
        format!("large 1m sharpe {large_1m}")
    })?;
    Ok(format!(
        "rf*={best} (SSR {:.5}); {within}/12 within 0.05; large 1m {large_1m:.2}",
        ssr(best)
    ))
}

fn evaluation_arithmetic() -> Result<String, String> {
    let d = date("2022-01-03");
    let mut labeled = Vec::new();
    let mut scores = Vec::new();
    for i in 0..105 {
        let label = [
            ResponseLabel::Positive,
            ResponseLabel::Negative,
            ResponseLabel::Neutral,
        ][i % 3];
        // First 66 predictions agree with the label, the rest are shifted by one class.
        let predicted = if i < 66 {
            label
        } else {
            [
                ResponseLabel::Negative,
                ResponseLabel::Neutral,
                ResponseLabel::Positive,
            ][i % 3]
        };
        let score = match predicted {
            ResponseLabel::Positive => 0.3,
            ResponseLabel::Negative => -0.3,
            ResponseLabel::Neutral => 0.0,
        };
        let id = format!("S{i:03}");
        labeled.push(LabeledEvent {
            event_id: id.clone(),
            ticker: "SYN".into(),
            date: d,
            event_type: EventType::Clinical,
            cap_class: MarketCapClass::Small,
            prior_price: 10.0,
            post_price: 10.0,
            event_return: 0.0,
            label,
        });
        scores.push(DocumentScore {
            doc_id: format!("{id}-pr"),
            event_id: id,
            doc_kind: DocKind::PressRelease,
            score,
            n_sentences: 1,
            scorer_id: "synthetic".into(),
        });
    }
    let r = evaluate(
        &scores,
        &labeled,
        &SentimentPolicy::default(),
        DocKind::PressRelease,
    )
    .map_err(|e| e.to_string())?;
    let rate = r.success_rate.unwrap_or(f64::NAN);
    ensure(
        r.n_correct == 66 && r.n_total == 105 && (rate - 0.6286).abs() <= 1e-4,
        || format!("{}/{} = {rate}", r.n_correct, r.n_total),
    )?;

    let prices = load_price_map(fixture("atra/prices.csv")).map_err(|e| e.to_string())?;
    let events = load_event_ledger(fixture("atra/events.csv")).map_err(|e| e.to_string())?;
    let atra =
        label_ledger(&events, &prices, &LabelThresholds::default()).map_err(|e| e.to_string())?;
    let finbert = load_scores(fixture("atra/scores_finbert.jsonl")).map_err(|e| e.to_string())?;
    let f = evaluate(
        &finbert,
        &atra,
        &SentimentPolicy::new(0.0).unwrap(),
        DocKind::PressRelease,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        f.n_correct == 1 && f.n_total == 8 && f.success_rate == Some(0.125),
        || format!("finbert {}/{}", f.n_correct, f.n_total),
    )?;
    Ok(format!("66/105 = {rate:.4}; ATRA finbert eps=0 1/8"))
}

fn perturb_from(prices: &PriceMap, cutoff: NaiveDate, rng: &mut ChaCha8Rng) -> PriceMap {
    prices
        .iter()
        .map(|(t, s)| {
            let bars = s
                .bars()
                .iter()
                .map(|b| {
                    let mut b = *b;
                    if b.date >= cutoff {
                        let k: f64 = rng.gen_range(0.3..3.0);
                        b.open *= rng.gen_range(0.5..2.0);
                        b.close *= k;
                        b.adj_close *= k;
                        b.high = b.open.max(b.close);
                        b.low = b.open.min(b.close);
                    }
                    b
                })
                .collect();
            (t.clone(), PriceSeries::new(t, bars).unwrap())
        })
        .collect()
}

fn labels_where_possible(m: &common::Market, prices: &PriceMap) -> Vec<LabeledEvent> {
    m.events
        .iter()
        .filter_map(|e| {
            label_ledger(std::slice::from_ref(e), prices, &LabelThresholds::default()).ok()
        })
        .flatten()
        .collect()
}

fn all_signals(m: &common::Market, prices: &PriceMap, cfg: &StrategyConfig) -> Vec<Signal> {
    let mut out = signals_from_momentum(&m.events, prices, cfg).signals;
    out.extend(
        signals_from_sentiment(&m.scores, &m.events, prices, cfg)
            .unwrap()
            .signals,
    );
    out.extend(
        signals_from_labels(&labels_where_possible(m, prices), &m.events, prices, cfg)
            .unwrap()
            .signals,
    );
    out
}

fn property_suites() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20231231);

    // (a) no look-ahead
    let mut cfg = StrategyConfig::new("audit", HoldingPeriod::days(5).unwrap());
    cfg.allow_short = true;
    let mut compared = 0;
    for set in 0..1000 {
        let m = random_market(&mut rng, 3, 90, 12);
        let dates: Vec<NaiveDate> = m
            .prices
            .values()
            .next()
            .unwrap()
            .bars()
            .iter()
            .map(|b| b.date)
            .collect();
        let cutoff = dates[rng.gen_range(1..dates.len())];
        let perturbed = perturb_from(&m.prices, cutoff, &mut rng);
        let before: Vec<_> = all_signals(&m, &m.prices, &cfg)
            .into_iter()
            .filter(|s| s.entry_date <= cutoff)
            .collect();
        let after: Vec<_> = all_signals(&m, &perturbed, &cfg)
            .into_iter()
            .filter(|s| s.entry_date <= cutoff)
            .collect();
        ensure(before == after, || {
            format!("look-ahead in set {set} at cutoff {cutoff}")
        })?;
        compared += before.len();
    }
    ensure(compared > 1000, || {
        format!("only {compared} signals audited")
    })?;

    // (b) equity curve against brute force
    let window = MetricsConfig {
        backtest_start: date("2021-01-01"),
        backtest_end: date("2021-12-31"),
        ..MetricsConfig::default()
    };
    let mut worst: f64 = 0.0;
    let mut nonempty = 0;
    for set in 0..500 {
        let m = random_market(&mut rng, 2, 30, 5);
        let mut c =
            StrategyConfig::new("oracle", HoldingPeriod::days(rng.gen_range(1..10)).unwrap());
        c.allow_short = true;
        c.sentiment_policy = SentimentPolicy::new(0.0).unwrap();
        let signals = signals_from_sentiment(&m.scores, &m.events, &m.prices, &c)
            .unwrap()
            .signals;
        let trades = execute_trades(&signals, &m.prices, &c).trades;
        ensure(trades.len() <= 5, || "too many trades".into())?;
        nonempty += usize::from(!trades.is_empty());
        let curve = build_equity_curve(&trades, &m.prices, &window).map_err(|e| e.to_string())?;
        let (dates, equity) = brute_force_equity(&trades, &m.prices, &window);
        ensure(curve.dates == dates || curve.bankrupt, || {
            format!("calendar differs in set {set}")
        })?;
        for (x, y) in curve.equity.iter().zip(&equity) {
            worst = worst.max((x - y).abs());
        }
    }
    ensure(worst <= 1e-12 && nonempty > 400, || {
        format!("max equity diff {worst:e}, {nonempty} non-empty sets")
    })?;

    // (c) labeling grid
    let t = LabelThresholds::default();
    let n = 100_000;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| -0.1 + 0.2 * f64::from(i) / f64::from(n - 1))
        .collect();
    for (_, th) in t.iter() {
        grid.extend([
            th.positive,
            th.negative,
            th.positive.next_up(),
            th.negative.next_down(),
            th.positive.next_down(),
            th.negative.next_up(),
        ]);
    }
    grid.sort_by(f64::total_cmp);
    let order = [
        MarketCapClass::Micro,
        MarketCapClass::Small,
        MarketCapClass::Mid,
        MarketCapClass::Large,
    ];
    let mut prev: Option<[ResponseLabel; 4]> = None;
    for &r in &grid {
        let labels = order.map(|c| classify_response(r, c, &t).unwrap());
        for (c, l) in order.iter().zip(labels) {
            let th = t.get(*c);
            let want = if r > th.positive {
                ResponseLabel::Positive
            } else if r < th.negative {
                ResponseLabel::Negative
            } else {
                ResponseLabel::Neutral
            };
            ensure(l == want, || format!("{c} at {r}: {l}"))?;
        }
        for w in labels.windows(2) {
            let nested = match w[0] {
                ResponseLabel::Positive => w[1] == ResponseLabel::Positive,
                ResponseLabel::Negative => w[1] == ResponseLabel::Negative,
                ResponseLabel::Neutral => true,
            };
            ensure(nested, || format!("nesting broken at {r}"))?;
        }
        if let Some(p) = prev {
            ensure(p.iter().zip(&labels).all(|(a, b)| a <= b), || {
                format!("monotonicity broken at {r}")
            })?;
        }
        prev = Some(labels);
    }

    // (d) momentum threshold monotonicity
    let mut nontrivial = 0;
    for set in 0..500 {
        let m = random_market(&mut rng, 3, 120, 30);
        let mut c = StrategyConfig::new("m", HoldingPeriod::days(5).unwrap());
        c.allow_short = rng.gen_bool(0.5);
        let t1 = rng.gen_range(0.0..0.15);
        c.momentum_threshold = t1;
        let loose: Vec<_> = signals_from_momentum(&m.events, &m.prices, &c).signals;
        c.momentum_threshold = t1 + rng.gen_range(0.0..0.1);
        let tight = signals_from_momentum(&m.events, &m.prices, &c).signals;
        ensure(tight.iter().all(|s| loose.contains(s)), || {
            format!("momentum set {set} not nested")
        })?;
        nontrivial += usize::from(tight.len() < loose.len());
    }
    ensure(nontrivial > 0, || "threshold never bound".into())?;

    Ok(format!(
        "(a) 1000 sets, {compared} signals; (b) 500 sets, max diff {worst:.1e}; (c) {} returns x 4 classes; (d) 500 markets",
        grid.len()
    ))
}

fn sweep_shape() -> Result<String, String> {
    let mut rows = 0;
    for (dir, scorers) in [
        ("atra", ["finbert", "biobert-ft"]),
        ("synthetic", ["finphrase", "biopharma"]),
    ] {
        let prices =
            load_price_map(fixture(&format!("{dir}/prices.csv"))).map_err(|e| e.to_string())?;
        let events =
            load_event_ledger(fixture(&format!("{dir}/events.csv"))).map_err(|e| e.to_string())?;
        let labeled = label_ledger(&events, &prices, &LabelThresholds::default())
            .map_err(|e| e.to_string())?;
        let mut specs = vec![
            StrategySpec::new("benchmark", StrategySource::Momentum),
            StrategySpec::new("labels", StrategySource::Labels(labeled)),
        ];
        for s in scorers {
            let scores = load_scores(fixture(&format!("{dir}/scores_{s}.jsonl")))
                .map_err(|e| e.to_string())?;
            specs.push(StrategySpec::new(s, StrategySource::Sentiment(scores)));
        }
        let body = run_sweep(
            &specs,
            &sweep_holds(),
            &events,
            &prices,
            &StrategyParams::default(),
            &MetricsConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let mut cells: BTreeMap<(String, Option<MarketCapClass>), Vec<String>> = BTreeMap::new();
        for r in &body.grid {
            cells
                .entry((r.strategy_id.clone(), r.cap_class))
                .or_default()
                .push(r.holding_period.clone());
        }
        let want: Vec<String> = (1..=90).map(|d| format!("{d}d")).collect();
        ensure(cells.len() == specs.len() * 4, || {
            format!("{dir}: {} cells", cells.len())
        })?;
        for (k, holds) in &cells {
            let mut h = holds.clone();
            h.sort_by_key(|s| s.trim_end_matches('d').parse::<u32>().unwrap_or(0));
            ensure(h == want, || format!("{dir} {k:?}: {} rows", holds.len()))?;
        }
        rows += body.grid.len();
    }
    Ok(format!("{rows} rows, 90 per (strategy, cap_class)"))
}

fn main() {
    let checks: [(&str, Check, Duration); 6] = [
        (
            "label reproduction",
            label_reproduction,
            Duration::from_secs(1),
        ),
        (
            "annualization identity",
            annualization_identity,
            Duration::from_secs(1),
        ),
        (
            "sharpe back-solve",
            sharpe_back_solve,
            Duration::from_secs(1),
        ),
        (
            "evaluation arithmetic",
            evaluation_arithmetic,
            Duration::from_secs(1),
        ),
        ("property suites", property_suites, Duration::from_secs(30)),
        ("sweep shape", sweep_shape, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (name, check, budget) in checks {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            ensure(took <= budget, || {
                format!("took {took:.2?}, budget {budget:?}")
            })?;
            Ok(detail)
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
