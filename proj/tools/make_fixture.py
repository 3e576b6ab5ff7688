#!/usr/bin/env python3
"""Regenerate data/fixture/ and its frozen expected metrics.

The stub rulebook keys every completion on a strategy marker plus an event
phrase that only ever appears in test-article headlines, so the completion each
article receives follows from (strategy, event) alone.  Expected metrics are
computed here by a plain per-item loop, independent of the C++ scorer.
"""
import csv
import io
import json
import random
import re
import sys
from collections import Counter
from datetime import date, timedelta
from pathlib import Path

SEED = 20230101
TICKERS = ["ACME", "BOLT", "CRUX", "DYNA", "EVRA"]
CUTOFF = "2023-01-01T00:00:00Z"

EVENTS = {
    "A": ("record revenue", "{t} posts record revenue for the quarter",
          "Sales rose across all segments and management reiterated its targets."),
    "B": ("product recall", "{t} announces product recall of a flagship device",
          "The company expects to replace affected units over the coming months."),
    "C": ("supply agreement", "{t} signs supply agreement with a regional distributor",
          "Financial terms of the multi-year deal were not disclosed."),
    "D": ("officer departs", "{t} chief financial officer departs",
          "An interim replacement was named while the board runs a search."),
}

# Evaluable test items per event: (ups, downs)
EVALUABLE = {"A": (7, 2), "B": (2, 7), "C": (5, 4), "D": (3, 5)}
FLAT_EVENTS = ["A", "C", "D"]
UNLABELED_EVENTS = ["B", "C"]

MARKERS = {
    "FewShot": "Here are labeled examples",
    "DKCoT": "### Background knowledge",
    "ADFCoT": "Reason by analogy",
    "CoT": "Think step-by-step: What events happen",
    "ZeroShot": "Answer with exactly one word",
}
# Rule order matters: Few-Shot prompts also carry the Zero-Shot instruction and
# DK-CoT prompts also carry the CoT cue.
RULE_ORDER = ["FewShot", "DKCoT", "ADFCoT", "CoT", "ZeroShot"]

FALLBACK = "The impact is hard to judge without more detail."

COMPLETIONS = {
    "ZeroShot": {"A": "Positive", "B": "Neutral", "C": "Neutral", "D": "Negative"},
    "FewShot": {"A": "Positive", "B": "Negative", "C": "Neutral", "D": "Positive"},
    "CoT": {
        "A": "1. Record sales point to strong demand.\n2. Investors tend to reward a clear beat.\nFinal answer: Positive",
        # B: no rule, falls through to the unparseable fallback
        "C": "1. A new contract could lift volumes.\n2. Terms are undisclosed.\nOn balance this reads as positive.",
        "D": "1. A planned handover may be orderly.\nFinal answer: Positive",
    },
    "DKCoT": {
        "A": "1. Revenue beat.\n2. Margins look stable.\nFinal answer: Positive",
        "B": "1. Recall costs weigh on earnings.\nFinal answer: Negative",
        "C": "1. Distribution deals are common in this sector.\nFinal answer: Neutral",
        "D": "1. Finance leadership turnover adds uncertainty.\nFinal answer: **Negative**",
    },
    "ADFCoT": {
        "A": "1. Like the positive case, strong results lift expectations.\nFinal answer: Positive",
        "B": "1. Like the negative case, a costly setback hurts the outlook.\nFinal answer: Negative",
        "C": "1. New volume resembles the positive case.\nFinal answer: Positive",
        "D": "1. Sudden departures resemble the negative case.\nFinal answer: Negative",
    },
}

DEV_HEADLINES = [
    ("{t} lifts full-year outlook after strong holiday demand", "Shares climbed in early trading."),
    ("{t} misses earnings estimates as costs climb", "Input prices squeezed margins."),
    ("{t} opens new manufacturing site", "The plant adds capacity for the next decade."),
    ("{t} faces regulatory probe over pricing", "Authorities requested internal documents."),
]

EXEMPLARS = [
    ("Shares climbed after the company lifted its full-year outlook on strong holiday demand.",
     ["Higher guidance signals management confidence.", "Analysts revise estimates upward.",
      "The stock tends to rise on upgraded expectations."], "Positive"),
    ("The firm missed earnings estimates as input costs squeezed margins.",
     ["Margin pressure lowers profit expectations.", "Missed estimates erode investor trust.",
      "The stock tends to fall on disappointing results."], "Negative"),
    ("Regulators opened a probe into the company's pricing practices.",
     ["A probe raises the risk of fines.", "Uncertainty weighs on valuation."], "Negative"),
    ("The company opened a new plant that expands production capacity.",
     ["More capacity supports future sales.", "Investors price in growth."], "Positive"),
    ("A major customer cancelled a long-term order.",
     ["Lost orders cut expected revenue.", "Guidance may be lowered."], "Negative"),
    ("The board approved a larger share buyback programme.",
     ["Buybacks reduce share count.", "They signal that management sees value."], "Positive"),
]

KNOWLEDGE = {
    "ACME": ["ACME makes industrial sensors sold mostly to automakers.",
             "Roughly 60% of ACME sales come from North America."],
    "BOLT": ["BOLT designs consumer electronics and outsources assembly.",
             "BOLT's gross margin has hovered near 38% for three years."],
    "CRUX": ["CRUX is a mid-size chemicals producer with exposure to energy prices."],
    "DYNA": ["DYNA sells fitness equipment through its own stores and online.",
             "DYNA carries little debt."],
    "EVRA": ["EVRA operates a chain of veterinary clinics.", "EVRA grows mainly through acquisitions."],
}


def business_days(start, n, rng):
    d, out = start, []
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=rng.choice([1, 1, 2]))
    return out


def parse_label(text):
    """Reference parser: last 'Final answer' line, else last keyword, else None."""
    finals = re.findall(r"final\s+answer\s*:[\s*_\"'`]*(positive|negative|neutral)\b", text, re.I)
    if finals:
        return finals[-1].capitalize()
    words = re.findall(r"\b(positive|negative|neutral)\b", text, re.I)
    return words[-1].capitalize() if words else None


def expected_metrics(items):
    out = {}
    for strategy in RULE_ORDER:
        tp = fp = tn = fn = 0
        unparseable = 0
        for event, direction in items:
            text = COMPLETIONS[strategy].get(event, FALLBACK)
            label = parse_label(text)
            if label is None:
                unparseable += 1
                label = "Neutral"
            call_up = label == "Positive"
            if call_up and direction == "Up":
                tp += 1
            elif call_up:
                fp += 1
            elif direction == "Down":
                tn += 1
            else:
                fn += 1
        total = tp + fp + tn + fn
        out[strategy] = {
            "tp": tp, "fp": fp, "tn": tn, "fn": fn, "unparseable": unparseable,
            "accuracy": (tp + tn) / total,
            "precision": tp / (tp + fp) if tp + fp else None,
            "recall": tp / (tp + fn) if tp + fn else None,
        }
    return out


def fmt(v):
    return "—" if v is None else f"{v * 100:.2f}"


def report_text(metrics):
    names = {"ZeroShot": "Zero-Shot", "FewShot": "Few-Shot", "CoT": "CoT", "DKCoT": "DK-CoT", "ADFCoT": "AD-FCoT"}
    lines = ["Method     Accuracy  Precision  Recall"]
    for s in ["ZeroShot", "FewShot", "CoT", "DKCoT", "ADFCoT"]:
        m = metrics[s]
        lines.append(f"{names[s]:<9}  {fmt(m['accuracy']):>8}  {fmt(m['precision']):>9}  {fmt(m['recall']):>6}")
    return "\n".join(lines) + "\n"


def main(out_dir):
    rng = random.Random(SEED)
    out_dir.mkdir(parents=True, exist_ok=True)

    # Test side: (event, direction or None for unlabeled)
    test_specs = []
    for event, (ups, downs) in EVALUABLE.items():
        test_specs += [(event, "Up")] * ups + [(event, "Down")] * downs
    test_specs += [(e, "Flat") for e in FLAT_EVENTS]
    test_specs += [(e, None) for e in UNLABELED_EVENTS]
    rng.shuffle(test_specs)

    dev_specs = [(i % len(DEV_HEADLINES), rng.choice(["Up", "Down", "Up", "Down", "Flat"])) for i in range(20)]

    news, bars = [], []

    def add(prefix, idx, day, ticker, headline, body, direction, when="14:30:00Z"):
        aid = f"{prefix}{idx:03d}"
        news.append({"id": aid, "timestamp": f"{day.isoformat()}T{when}", "ticker": ticker,
                     "headline": headline, "body": body, "source": "fixture-wire"})
        if direction is None:
            return aid
        move = {"Up": 1.5, "Down": -1.3, "Flat": 0.05}[direction]
        open_ = round(rng.uniform(20, 200), 2)
        close = round(open_ * (1 + move / 100), 4)
        bars.append({"ticker": ticker, "date": day.isoformat(), "open": open_, "close": close})
        return aid

    dev_days = business_days(date(2022, 2, 1), len(dev_specs), rng)
    dev_ids = []
    for i, ((h, d), day) in enumerate(zip(dev_specs, dev_days)):
        t = TICKERS[i % len(TICKERS)]
        headline, body = DEV_HEADLINES[h]
        dev_ids.append(add("d", i + 1, day, t, headline.format(t=t), body, d))

    test_days = business_days(date(2023, 1, 3), len(test_specs), rng)
    truth = []
    for i, ((event, d), day) in enumerate(zip(test_specs, test_days)):
        t = TICKERS[i % len(TICKERS)]
        _, headline, body = EVENTS[event]
        when = "14:30:00Z"
        if i % 11 == 3:
            when = "16:30:00+02:00"  # same UTC instant as the default, written with an offset
        elif i % 11 == 7:
            when = "14:30:00.250Z"
        dated = f"{body} The statement was issued on {day.strftime('%B')} {day.day}."
        add("t", i + 1, day, t, headline.format(t=t), dated, d, when)
        if d in ("Up", "Down"):
            truth.append((event, d))

    # Malformed rows the loader must reject without aborting.
    bad_rows = [
        {"id": "bad001", "timestamp": "2023-02-30T10:00:00Z", "ticker": "ACME", "headline": "Impossible date",
         "body": "", "source": "fixture-wire"},
        {"id": "bad002", "timestamp": "2023-03-01T10:00:00Z", "ticker": "BOLT", "headline": "",
         "body": "No headline here.", "source": "fixture-wire"},
        {"id": "bad003", "timestamp": "2099-01-01T00:00:00Z", "ticker": "CRUX", "headline": "Dispatch from the future",
         "body": "", "source": "fixture-wire"},
    ]
    rows = news[:25] + bad_rows[:2] + news[25:] + bad_rows[2:]

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["id", "timestamp", "ticker", "headline", "body", "source"],
                       lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    (out_dir / "news.csv").write_text(buf.getvalue())

    bars.sort(key=lambda b: (b["ticker"], b["date"]))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["ticker", "date", "open", "close"], lineterminator="\n")
    w.writeheader()
    w.writerows(bars)
    (out_dir / "prices.csv").write_text(buf.getvalue())

    with (out_dir / "exemplars.jsonl").open("w") as f:
        for i, (excerpt, rationale, label) in enumerate(EXEMPLARS):
            f.write(json.dumps({"source_article_id": dev_ids[i], "excerpt": excerpt, "rationale": rationale,
                                "label": label, "timestamp": news[i]["timestamp"]}) + "\n")

    with (out_dir / "knowledge.jsonl").open("w") as f:
        for t, facts in KNOWLEDGE.items():
            f.write(json.dumps({"ticker": t, "facts": facts, "as_of": "2022-12-31T00:00:00Z"}) + "\n")

    rules = []
    for strategy in RULE_ORDER:
        for event in "ABCD":
            if event in COMPLETIONS[strategy]:
                rules.append({"pattern": [MARKERS[strategy], EVENTS[event][0]],
                              "completion": COMPLETIONS[strategy][event]})
    (out_dir / "stub_rules.json").write_text(json.dumps({"rules": rules, "fallback": FALLBACK}, indent=2) + "\n")

    config = {
        "news": {"path": "news.csv", "format": "csv"},
        "prices": "prices.csv",
        "exemplars": "exemplars.jsonl",
        "knowledge": "knowledge.jsonl",
        "cutoff": CUTOFF,
        "threshold": 0.001,
        "strategies": ["ZeroShot", "FewShot", "CoT", "DKCoT", "ADFCoT"],
        "provider": {"kind": "stub", "rulebook": "stub_rules.json", "model_name": "stub-model"},
        "budget": 1024,
        "scoring_mode": "neutral-as-negative-signal",
        "unparseable": "neutral",
        "output_dir": "out",
        "workers": 4,
        "seed": SEED,
    }
    (out_dir / "config.json").write_text(json.dumps(config, indent=2) + "\n")

    metrics = expected_metrics(truth)
    (out_dir / "expected_metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    (out_dir / "expected_report.txt").write_text(report_text(metrics))

    counts = Counter(d for _, d in test_specs)
    print(f"{len(news)} articles ({len(dev_ids)} dev), test directions {dict(counts)}, {len(bars)} bars")
    print(report_text(metrics), end="")


if __name__ == "__main__":
    root = Path(__file__).resolve().parent.parent
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else root / "data" / "fixture")
