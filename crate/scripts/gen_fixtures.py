#!/usr/bin/env python3
"""Regenerate the CSV/JSONL fixtures under fixtures/.

atra/      eight ATRA events with their reference prior/post closes and the
           three reference scorer columns. Closes between anchor days are
           log-linearly interpolated on a weekday calendar.
synthetic/ a seeded multi-ticker market (2020-2023) with event jumps and two
           noisy press-release scorers, used for sweeps and benchmarks.
"""
import datetime as dt
import json
import math
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

ATRA_EVENTS = [
    # date, type (as printed), prior, post, three scorers x (event, pre, post)
    ("2022-10-14", "Regulatory", 3.99, 4.14,
     (0.263, -0.106, -0.036), (0.237, -0.159, -0.069), (0.158, -0.029, -0.007)),
    ("2022-10-26", "Clinical", 4.69, 4.73,
     (0.216, -0.106, -0.036), (0.405, -0.159, -0.069), (0.081, -0.029, -0.007)),
    ("2022-11-09", "Quarter Financial Results", 4.90, 3.88,
     (0.385, -0.106, -0.036), (0.192, -0.159, -0.069), (0.115, -0.029, -0.007)),
    ("2022-12-12", "Clinical", 4.45, 4.32,
     (0.186, -0.106, -0.036), (0.163, -0.159, -0.069), (0.070, -0.029, -0.007)),
    ("2023-02-08", "Commercial", 5.46, 5.04,
     (0.156, -0.036, -0.138), (0.200, -0.069, -0.191), (0.133, -0.007, -0.040)),
    ("2023-05-09", "Quarter Financial Results", 2.97, 2.19,
     (0.250, -0.138, -0.143), (0.050, -0.191, -0.194), (0.100, -0.040, -0.041)),
    ("2023-09-20", "Regulatory", 1.58, 1.96,
     (0.182, -0.143, -0.116), (0.273, -0.194, -0.153), (0.136, -0.041, -0.031)),
    ("2023-11-09", "Clinical", 1.21, 0.24,
     (0.148, -0.116, None), (0.111, -0.153, None), (0.148, -0.031, None)),
]
SCORERS = ["finbert", "biobert-ft", "biobert-ft-2"]
KINDS = ["press_release", "filing_pre", "filing_post"]
KIND_TAG = {"press_release": "pr", "filing_pre": "pre", "filing_post": "post"}


def d(s):
    return dt.date.fromisoformat(s)


def weekdays(start, end):
    out = []
    cur = start
    while cur <= end:
        if cur.weekday() < 5:
            out.append(cur)
        cur += dt.timedelta(days=1)
    return out


def prev_weekday(day):
    day -= dt.timedelta(days=1)
    while day.weekday() >= 5:
        day -= dt.timedelta(days=1)
    return day


def fmt(x):
    return f"{x:.4f}".rstrip("0").rstrip(".")


def write_atra():
    anchors = {}
    for date, _, prior, post, *_ in ATRA_EVENTS:
        anchors[prev_weekday(d(date))] = prior
        anchors[d(date)] = post
    days = weekdays(min(anchors), d("2023-12-29"))
    keys = sorted(anchors)
    closes = []
    for day in days:
        if day in anchors:
            closes.append(anchors[day])
            continue
        left = max(k for k in keys if k < day)
        right = [k for k in keys if k > day]
        if not right:
            closes.append(anchors[left])
            continue
        right = right[0]
        li, ri, di = days.index(left), days.index(right), days.index(day)
        w = (di - li) / (ri - li)
        closes.append(round(math.exp((1 - w) * math.log(anchors[left]) + w * math.log(anchors[right])), 4))
    with open(ROOT / "atra" / "prices.csv", "w") as f:
        f.write("ticker,date,open,high,low,close,adj_close,volume\n")
        for i, (day, c) in enumerate(zip(days, closes)):
            o = closes[i - 1] if i > 0 else c
            f.write(f"ATRA,{day},{fmt(o)},{fmt(max(o, c))},{fmt(min(o, c))},{fmt(c)},{fmt(c)},1500000\n")
    with open(ROOT / "atra" / "events.csv", "w") as f:
        f.write("event_id,ticker,date,event_type,cap_class,prior_price,post_price\n")
        for date, kind, *_ in ATRA_EVENTS:
            f.write(f"ATRA-{date},ATRA,{date},{kind},micro,,\n")
    with open(ROOT / "atra" / "events_explicit.csv", "w") as f:
        f.write("event_id,ticker,date,event_type,cap_class,prior_price,post_price\n")
        for date, kind, prior, post, *_ in ATRA_EVENTS:
            f.write(f"ATRA-{date},ATRA,{date},{kind},micro,{prior:.2f},{post:.2f}\n")
    for si, scorer in enumerate(SCORERS):
        with open(ROOT / "atra" / f"scores_{scorer}.jsonl", "w") as f:
            for date, _, _, _, *cols in ATRA_EVENTS:
                for kind, value in zip(KINDS, cols[si]):
                    if value is None:
                        continue
                    rec = {
                        "doc_id": f"ATRA-{date}-{KIND_TAG[kind]}",
                        "event_id": f"ATRA-{date}",
                        "doc_kind": kind,
                        "score": value,
                        "n_sentences": 1,
                        "scorer_id": scorer,
                    }
                    f.write(json.dumps(rec) + "\n")


UNIVERSE = [
    ("Moderna, Inc.", "MRNA", 37846.0),
    ("BioNTech", "BNTX", 24725.0),
    ("Alnylam Pharmaceuticals", "ALNY", 22108.0),
    ("BioMarin Pharmaceutical", "BMRN", 17005.0),
    ("Sarepta Therapeutics, Inc.", "SRPT", 11514.0),
    ("Ionis Pharmaceuticals", "IONS", 6755.0),
    ("Ascendis Pharma", "ASND", 5289.0),
    ("Apellis Pharmaceuticals", "APLS", 4572.0),
    ("CRISPR Therapeutics", "CRSP", 3743.0),
    ("Intellia Therapeutics", "NTLA", 2840.0),
    ("Verve Therapeutics", "VERV", 804.8),
    ("Sana Biotechnology", "SANA", 781.9),
    ("Exscientia", "EXAI", 585.2),
    ("Taysha Gene Therapies", "TSHA", 555.3),
    ("Atara Biotherapeutics", "ATRA", 158.7),
]


def cap_class(mc):
    if mc < 250:
        return "micro"
    if mc < 2000:
        return "small"
    if mc < 10000:
        return "mid"
    return "large"


def write_universe():
    with open(ROOT / "universe.csv", "w") as f:
        f.write("ticker,company,market_cap_musd,cap_class\n")
        for name, ticker, mc in UNIVERSE:
            f.write(f"{ticker},\"{name}\",{mc:.1f},{cap_class(mc)}\n")


def write_synthetic(seed=20231231):
    rng = np.random.default_rng(seed)
    days = weekdays(d("2020-01-01"), d("2023-12-31"))
    vol = {"large": 0.022, "mid": 0.03, "small": 0.04, "micro": 0.05}
    types = ["clinical", "regulatory", "financial", "other"]
    price_rows, event_rows, score_rows = [], [], {"finphrase": [], "biopharma": []}
    for _, ticker, mc in UNIVERSE:
        cls = cap_class(mc)
        n = len(days)
        event_idx = sorted(rng.choice(np.arange(30, n - 5), size=7, replace=False))
        drift = rng.normal(0.0004, 0.0003)
        rets = rng.normal(drift, vol[cls], size=n)
        gaps = rng.normal(0.0, vol[cls] / 3, size=n)
        jumps = {}
        for k, i in enumerate(event_idx):
            direction = rng.choice([-1.0, 0.0, 1.0], p=[0.3, 0.25, 0.45])
            jump = direction * abs(rng.normal(0.08, 0.06)) + rng.normal(0.0, 0.01)
            jumps[i] = jump
            eid = f"{ticker}-E{k + 1}"
            release = days[i]
            # a third of releases land on the weekend before the trading day
            if rng.random() < 0.33 and release.weekday() == 0:
                release -= dt.timedelta(days=2)
            event_rows.append((eid, ticker, release.isoformat(), types[rng.integers(0, 4)], cls))
            for scorer, noise in (("finphrase", 0.12), ("biopharma", 0.16)):
                s = float(np.clip(0.6 * jump / 0.08 * 0.3 + rng.normal(0.0, noise), -1.0, 1.0))
                score_rows[scorer].append({
                    "doc_id": f"{eid}-pr",
                    "event_id": eid,
                    "doc_kind": "press_release",
                    "score": round(s, 4),
                    "n_sentences": int(rng.integers(8, 60)),
                    "scorer_id": scorer,
                })
        close = 5.0 + mc / 500.0
        for i, day in enumerate(days):
            if i == 0:
                o = close
            else:
                o = close * (1.0 + gaps[i])
            c = o * (1.0 + rets[i] + jumps.get(i, 0.0))
            c = max(c, 0.05)
            hi = max(o, c) * (1.0 + abs(rng.normal(0, 0.004)))
            lo = min(o, c) * (1.0 - abs(rng.normal(0, 0.004)))
            vol_shares = int(rng.integers(200_000, 5_000_000))
            price_rows.append((ticker, day.isoformat(), o, hi, lo, c, c, vol_shares))
            close = c
    with open(ROOT / "synthetic" / "prices.csv", "w") as f:
        f.write("ticker,date,open,high,low,close,adj_close,volume\n")
        for t, day, o, hi, lo, c, a, v in price_rows:
            f.write(f"{t},{day},{o:.4f},{hi:.4f},{lo:.4f},{c:.4f},{a:.4f},{v}\n")
    with open(ROOT / "synthetic" / "events.csv", "w") as f:
        f.write("event_id,ticker,date,event_type,cap_class,prior_price,post_price\n")
        for eid, t, day, et, cls in event_rows:
            f.write(f"{eid},{t},{day},{et},{cls},,\n")
    for scorer, rows in score_rows.items():
        with open(ROOT / "synthetic" / f"scores_{scorer}.jsonl", "w") as f:
            for rec in rows:
                f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    write_atra()
    write_universe()
    write_synthetic()
