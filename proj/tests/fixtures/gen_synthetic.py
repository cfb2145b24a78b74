#!/usr/bin/env python3
"""Builds the bundled synthetic fixtures and freezes oracle values for them.

Outputs below tests/fixtures/:
  ml_slots/records.jsonl, ml_slots/texts.jsonl  68 labeled data-driven texts
  synthetic/*.csv                                judgement data of survey shape
  synthetic/expected.json                        oracle values (numpy/scipy, exact Fisher)
  shapiro_reference.json                         scipy Shapiro-Wilk on 10 vectors
  grammar/*                                      recorded checker responses

The oracle side never imports the C++ code: filtering, averages, winners and
tests are recomputed here from the written CSV.
"""

import csv
import json
import math
import random
from collections import defaultdict
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np
from scipy import stats

HERE = Path(__file__).resolve().parent
SEED = 20231

LABELS = ["very bad", "bad", "neutral", "good", "very good"]
SOURCES = ["TT", "TML", "TH"]
N_SNIPPETS = 70
MISSING = {"TT": {13, 41}, "TML": {13}, "TH": {55, 62}}
UNLABELED_TML = 41  # judged but left out of the slot annotation

# Package layout: (items per source, passing raters, failing raters).
PACKAGES = [
    ({"TT": 15, "TML": 16, "TH": 14}, 8, 2),
    ({"TT": 14, "TML": 16, "TH": 15}, 8, 2),
    ({"TT": 16, "TML": 13, "TH": 16}, 7, 3),
    ({"TT": 13, "TML": 14, "TH": 13}, 3, 7),
    ({"TT": 10, "TML": 10, "TH": 10}, 3, 7),
]
SOURCE_MEAN = {"TT": (3.75, 3.72), "TML": (3.62, 3.58), "TH": (3.55, 3.6)}

GIVEN = ["Aldo", "Berit", "Casimir", "Dagny", "Eamon", "Fenna", "Goran", "Halima", "Ivo",
         "Jorun", "Kasimir", "Liesel", "Mateus", "Nilufar", "Osric", "Pernille", "Quillon",
         "Rasmus", "Solveig", "Tarek"]
FAMILY = ["Abernethy", "Brannigan", "Castellano", "Drummond", "Eriksen", "Foxworth",
          "Gallardo", "Hovland", "Iskander", "Jablonski", "Kavanagh", "Lindqvist",
          "Marchetti", "Nakashima", "Okonkwo", "Pellegrini", "Quintero", "Rautio",
          "Szabados", "Thorvaldsen"]
CITIES = ["Aalborg", "Bergamo", "Coimbra", "Dundee", "Eindhoven", "Freiburg", "Gdansk",
          "Hobart", "Innsbruck", "Jyvaskyla", "Kaunas", "Leuven", "Maribor", "Nantes",
          "Odense", "Poznan", "Qormi", "Rennes", "Salzburg", "Tartu"]
COUNTRIES = ["Denmark", "Italy", "Portugal", "Scotland", "Netherlands", "Austria", "Poland",
             "Estonia", "Lithuania", "Belgium", "Slovenia", "France"]
OCCUPATIONS = ["Painter", "Chemist", "Architect", "Cellist", "Botanist", "Engraver",
               "Surveyor", "Novelist"]
MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August",
          "September", "October", "November", "December"]
HALLUCINATIONS = ["member of the Royal Academy", "winner of the Golden Lyre",
                  "founder of the Harbour Guild"]


# ---------------------------------------------------------------- records and slot texts

def make_records(rng):
    names = [f"{g} {f}" for g, f in product(GIVEN, FAMILY)]
    rng.shuffle(names)
    recs = []
    for k in range(1, N_SNIPPETS + 1):
        sex = rng.choice(["male", "female"])
        recs.append({
            "Name_ID": names[k - 1],
            "instance of": [{"mainsnak": "Human"}],
            "sex or gender": [{"mainsnak": sex}],
            "date of birth": [{"mainsnak": f"{rng.choice(MONTHS)} {rng.randint(1, 28)} "
                                           f"{rng.randint(1890, 1990)}"}],
            "place of birth": [{"mainsnak": rng.choice(CITIES)}],
            "country of citizenship": [{"mainsnak": rng.choice(COUNTRIES)}],
            "occupation": [{"mainsnak": rng.choice(OCCUPATIONS)}],
        })
    return recs


def val(rec, prop):
    return rec[prop][0]["mainsnak"]


def slot_text(rec, cat, rng):
    """Data-driven style text with the requested slot-error category."""
    name, dob, pob = rec["Name_ID"], val(rec, "date of birth"), val(rec, "place of birth")
    country, occ = val(rec, "country of citizenship"), val(rec, "occupation")
    pron = "He" if val(rec, "sex or gender") == "male" else "She"
    if cat == 1:
        return f"{name} (born {dob}) was a {occ} from {country}. {pron} was born in {pob}.", []
    if cat == 3:
        return f"{name} (born {dob}) was born in {pob}, {country}.", []
    phrase = rng.choice(HALLUCINATIONS)
    return f"{name} (born {dob}) was a {phrase}. {pron} was born in {pob}.", [phrase]


# ---------------------------------------------------------------- exact Fisher (oracle)

def fisher_exact_rational(table):
    """Two-sided r x c Fisher p as a Fraction (probability-mass rule)."""
    rows = [sum(r) for r in table if sum(r) > 0]
    cols = [sum(c) for c in zip(*table) if sum(c) > 0]
    table = [[v for v, c in zip(r, zip(*table)) if sum(c) > 0] for r in table if sum(r) > 0]
    if len(rows) < 2 or len(cols) < 2:
        return Fraction(1)
    n = sum(rows)

    def prob(t):
        num = math.prod(math.factorial(r) for r in rows) * math.prod(math.factorial(c) for c in cols)
        den = math.factorial(n) * math.prod(math.factorial(v) for r in t for v in r)
        return Fraction(num, den)

    p_obs = prob(table)
    total = Fraction(0)

    def rec(i, left, acc):
        nonlocal total
        if i == len(rows) - 1:
            t = acc + [list(left)]
            p = prob(t)
            if p <= p_obs:
                total += p
            return
        for cells in _compositions(rows[i], left):
            rec(i + 1, [l - c for l, c in zip(left, cells)], acc + [list(cells)])

    rec(0, list(cols), [])
    return total


def _compositions(total, caps):
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for v in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - v, caps[1:]):
            yield (v,) + rest


# ---------------------------------------------------------------- judgements

def clamp_label(x):
    return int(min(5, max(1, round(x))))


def squash(v):
    return "positive" if v >= 4 else ("neutral" if v == 3 else "negative")


def majority(vals):
    """True good, False bad, None neither (strict plurality, neutral excluded)."""
    c = defaultdict(int)
    for v in vals:
        c[squash(v)] += 1
    pos, neu, neg = c["positive"], c["neutral"], c["negative"]
    if pos > neu and pos > neg:
        return True
    if neg > neu and neg > pos:
        return False
    return None


def build_judgements(rng, slot_cat):
    texts = {s: [f"{s}{k}" for k in range(1, N_SNIPPETS + 1) if k not in MISSING[s]]
             for s in SOURCES}
    pool = {s: rng.sample(texts[s], len(texts[s])) for s in SOURCES}

    packages = []
    for p, (counts, n_pass, n_fail) in enumerate(PACKAGES, start=1):
        items = []
        for s in SOURCES:
            items += [(pool[s].pop(), s) for _ in range(counts[s])]
        rng.shuffle(items)
        packages.append({"id": f"P{p}", "items": items, "pass": n_pass, "fail": n_fail})
    assert all(not v for v in pool.values())

    # Target verdicts for labeled data-driven texts: the bad counts sit at the
    # mode of the hypergeometric so the category x verdict table gives p = 1.
    bad_per_cat = {3: 7, 2: 2, 1: 1}
    target = {}
    by_cat = defaultdict(list)
    for tid, cat in sorted(slot_cat.items()):
        by_cat[cat].append(tid)
    for cat, ids in by_cat.items():
        chosen = set(rng.sample(ids, bad_per_cat[cat]))
        for tid in ids:
            target[tid] = tid not in chosen

    latent = {}
    for s in SOURCES:
        for tid in texts[s]:
            if tid in target:
                mu = (3.85, 3.8) if target[tid] else (2.2, 2.3)
            else:
                mq, mn = SOURCE_MEAN[s]
                mu = (rng.gauss(mq, 0.45), rng.gauss(mn, 0.45))
            latent[tid] = mu

    rater_ids = [f"R{i:02d}" for i in range(1, 51)]
    rng.shuffle(rater_ids)
    assignments = []
    it = iter(rater_ids)
    for pkg in packages:
        for _ in range(pkg["pass"]):
            assignments.append((next(it), pkg, True))
        for _ in range(pkg["fail"]):
            assignments.append((next(it), pkg, False))
    bias = {r: rng.gauss(0, 0.25) for r in rater_ids}

    checks = {}
    for pkg in packages:
        checks[f"CHECK-{pkg['id']}"] = (rng.randint(1, 5), rng.randint(1, 5))

    def sample_ratings(tid, raters):
        mq, mn = latent[tid]
        out = {}
        for r in raters:
            q = clamp_label(rng.gauss(mq + bias[r], 0.85))
            n = clamp_label(0.45 * (q - mq) + rng.gauss(mn + bias[r], 0.7))
            out[r] = (q, n)
        return out

    ratings = {}
    for pkg in packages:
        passing = [r for r, p, ok in assignments if p is pkg and ok]
        everyone = [r for r, p, _ in assignments if p is pkg]
        for tid, _ in pkg["items"]:
            while True:
                rs = sample_ratings(tid, everyone)
                if tid not in target:
                    break
                want = target[tid]
                if all(majority([rs[r][m] for r in passing]) is want for m in (0, 1)):
                    break
            ratings[tid] = rs

    rows = []
    for rater, pkg, ok in assignments:
        order = list(pkg["items"])
        rng.shuffle(order)
        check_id = f"CHECK-{pkg['id']}"
        order.insert(rng.randint(0, len(order)), (check_id, "TH"))
        for seq, (tid, src) in enumerate(order, start=1):
            if tid == check_id:
                eq, en = checks[check_id]
                if ok:
                    q, n = eq, en
                else:
                    q = eq if rng.random() < 0.4 else (eq % 5) + 1
                    n = (en % 5) + 1 if q == eq else en
                rows.append([rater, tid, src, LABELS[q - 1], LABELS[n - 1], "true", seq])
            else:
                q, n = ratings[tid][rater]
                rows.append([rater, tid, src, LABELS[q - 1], LABELS[n - 1], "false", seq])
    rows.sort(key=lambda r: (r[0], r[6]))
    return rows, checks, target


# ---------------------------------------------------------------- oracle

def oracle(rows, checks, slot_cat, grammar_rows):
    num = {l: i + 1 for i, l in enumerate(LABELS)}
    by_rater = defaultdict(list)
    for r in rows:
        by_rater[r[0]].append(r)
    passing = set()
    for rater, rs in by_rater.items():
        cks = [r for r in rs if r[5] == "true"]
        if cks and all((num[r[3]], num[r[4]]) == checks[r[1]] for r in cks):
            passing.add(rater)
    # No rater in the fixture answers constantly after the tenth text.
    for rater, rs in by_rater.items():
        tail = [(r[3], r[4]) for r in sorted(rs, key=lambda r: r[6]) if r[5] == "false"][10:]
        assert len(set(tail)) > 1, rater
    kept = [r for r in rows if r[0] in passing and r[5] == "false"]

    out = {"raters": {"total": len(by_rater), "passed_attention_check": len(passing)}}
    summary = {}
    for s in SOURCES:
        js = [r for r in kept if r[2] == s]
        entry = {"ratings": len(js)}
        for m, col in (("quality", 3), ("naturalness", 4)):
            v = np.array([num[r[col]] for r in js], dtype=float)
            entry[m] = {
                "average": float(v.mean()),
                "percent": {LABELS[k]: float(np.mean(v == k + 1) * 100) for k in range(5)},
            }
        summary[s] = entry
    out["summary"] = summary

    text_vals = defaultdict(lambda: {"q": [], "n": [], "source": None})
    for r in kept:
        t = text_vals[r[1]]
        t["q"].append(num[r[3]])
        t["n"].append(num[r[4]])
        t["source"] = r[2]
    means = {tid: (np.mean(t["q"]), np.mean(t["n"])) for tid, t in text_vals.items()}

    def snippet(tid):
        for s in ("TML", "TT", "TH"):
            if tid.startswith(s):
                return tid[len(s):]
        raise ValueError(tid)

    per_snippet = defaultdict(dict)
    for tid, t in text_vals.items():
        per_snippet[snippet(tid)][t["source"]] = means[tid]
    winners = {}
    compared = 0
    for mi, m in enumerate(("quality", "naturalness")):
        w = {s: 0 for s in SOURCES}
        compared = 0
        for sn, srcs in per_snippet.items():
            if len(srcs) < 2:
                continue
            compared += 1
            best = max(v[mi] for v in srcs.values())
            for s, v in srcs.items():
                if abs(v[mi] - best) <= 1e-9:
                    w[s] += 1
        winners[m] = w
    winners["snippets_compared"] = compared
    out["winners"] = winners

    neg = {}
    for m, key in (("quality", "q"), ("naturalness", "n")):
        neg[m] = {s: sum(1 for t in text_vals.values()
                         if t["source"] == s and sum(v <= 2 for v in t[key]) >= 2)
                  for s in SOURCES}
    out["negative_texts"] = neg

    out["correlations"] = {}
    for s in SOURCES:
        js = [r for r in kept if r[2] == s]
        out["correlations"][s] = float(stats.pearsonr([num[r[3]] for r in js],
                                                      [num[r[4]] for r in js])[0])

    out["paired_t_tests"] = []
    for a, b in (("TT", "TML"), ("TT", "TH"), ("TML", "TH")):
        for mi, m in enumerate(("quality", "naturalness")):
            both = sorted(sn for sn, srcs in per_snippet.items() if a in srcs and b in srcs)
            x = [per_snippet[sn][a][mi] for sn in both]
            y = [per_snippet[sn][b][mi] for sn in both]
            res = stats.ttest_rel(x, y)
            out["paired_t_tests"].append({"pair": f"{a}-{b}", "metric": m, "snippets": len(both),
                                          "statistic": float(res.statistic),
                                          "p_value": float(res.pvalue)})

    out["shapiro_wilk"] = {}
    for s in SOURCES:
        js = [r for r in kept if r[2] == s]
        out["shapiro_wilk"][s] = {}
        for m, col in (("quality", 3), ("naturalness", 4)):
            res = stats.shapiro([num[r[col]] for r in js])
            out["shapiro_wilk"][s][m] = {"statistic": float(res.statistic),
                                         "p_value": float(res.pvalue)}

    # Slot category x verdict on the labeled data-driven texts.
    tallies = defaultdict(int)
    for c in slot_cat.values():
        tallies[c] += 1
    out["slot_categories"] = {f"Cat{c}": tallies[c] for c in (1, 2, 3, 4)}
    out["slot_association"] = {}
    for mi, (m, key) in enumerate((("quality", "q"), ("naturalness", "n"))):
        table = []
        for c in (3, 2, 1):
            good = bad = 0
            for tid, cat in slot_cat.items():
                if cat != c:
                    continue
                v = majority(text_vals[tid][key])
                good += v is True
                bad += v is False
            table.append([good, bad])
        p = fisher_exact_rational(table)
        out["slot_association"][m] = {"rows": ["Cat3", "Cat2", "Cat1"], "counts": table,
                                      "p_value": float(p), "p_exact": str(p)}

    tally = {s: {} for s in SOURCES}
    for g in grammar_rows:
        src = "TML" if g[0].startswith("TML") else g[0][:2]
        t = tally[src].setdefault(g[4], {"before": 0, "after": 0})
        t["before"] += 1
        t["after"] += g[5] == "true"
    out["grammar_tally"] = tally
    return out


# ---------------------------------------------------------------- grammar fixtures

TAXONOMY = [
    # (category, text, match substring, rule id, message, replacement)
    ("PropOrthography", "gavra played with the youth side before moving to Partizan.",
     "gavra", "UPPERCASE_SENTENCE_START",
     "This sentence does not start with an uppercase letter.", "Gavra"),
    ("Denonym", "Miller was an United States journalist and author.", "an",
     "EN_A_VS_AN", "Use 'a' instead of 'an' if the following word doesn't start with a vowel sound.",
     "a"),
    ("UnnecessarySpace", "At his peak he is a 7 ' 0 \" 240 lb centre.", " '", "WHITESPACE_RULE",
     "Possible typo: you repeated a whitespace", "'"),
    ("WrongSlotValue", "Nadine de rothschild (née Nadine de Rothschild) is a French writer.",
     "rothschild", "MORFOLOGIK_RULE_EN_US", "Possible spelling mistake found.", "Rothschild"),
    ("Agreement", "The club is an United Kingdom.", "an", "EN_A_VS_AN",
     "Use 'a' instead of 'an' if the following word doesn't start with a vowel sound.", "a"),
    ("Typo", "He stayed on as an assistanr coach along with Brown.", "assistanr",
     "MORFOLOGIK_RULE_EN_US", "Possible spelling mistake found.", "assistant"),
    ("URLInfo", "file : Fotothek df ps 0000106 Blick vom Turm des Neuen Rathauses.jpg",
     "Fotothek", "MORFOLOGIK_RULE_EN_US", "Possible spelling mistake found.", "Photothek"),
    ("Repetition", "He was born in Belleville, New jersey New jersey and raised in Ohio.",
     "jersey", "MORFOLOGIK_RULE_EN_US", "Possible spelling mistake found.", "Jersey"),
    ("MissingWordAfter", "He then served in the United States Navy Lieutenant for two years.",
     "Navy Lieutenant", "MISSING_PREPOSITION",
     "A preposition may be missing after 'Navy'.", "Navy as a Lieutenant"),
]


def match_json(text, sub, rule, msg, repl):
    off = text.index(sub)
    return {"offset": off, "length": len(sub), "message": msg,
            "rule": {"id": rule}, "replacements": [{"value": repl}]}


def grammar_fixtures():
    recs, cases = [], []
    for cat, text, sub, rule, msg, repl in TAXONOMY:
        recs.append({"text": text, "response": {"matches": [match_json(text, sub, rule, msg, repl)]}})
        cases.append({"text_id": f"TH-{cat}", "text": text, "category": cat})
    return recs, cases


def synthetic_grammar(rng, rows):
    """Verification rows for the synthetic texts: TH errors, a single verified TML error."""
    th = sorted({r[1] for r in rows if r[2] == "TH" and r[5] == "false"})
    cats = ["PropOrthography", "Denonym", "UnnecessarySpace", "WrongSlotValue", "Agreement",
            "Typo", "URLInfo", "Repetition", "MissingWordAfter"]
    out = []
    for tid in rng.sample(th, 14):
        for _ in range(rng.randint(1, 2)):
            cat = rng.choice(cats)
            out.append([tid, rng.randint(0, 40), rng.randint(1, 8), "RULE_" + cat.upper(), cat,
                        "true" if rng.random() < 0.75 else "false"])
    out.append(["TML7", 12, 5, "MORFOLOGIK_RULE_EN_US", "Typo", "true"])
    out.append(["TML30", 0, 3, "UPPERCASE_SENTENCE_START", "PropOrthography", "false"])
    out.sort(key=lambda r: (r[0], r[1]))
    return out


def shapiro_vectors(rng):
    v = [
        [1.0, 2.0, 3.0],
        [2.1, 3.4, 1.9, 5.6, 4.4],
        [float(x) for x in range(1, 11)],
        [148, 154, 158, 160, 161, 162, 166, 170, 182, 195, 236],
        [float(x) for x in np.linspace(-1, 1, 50)],
        [4.0] * 20 + [1.0],
        list(np.round(np.random.default_rng(1).normal(0, 1, 30), 6)),
        list(np.round(np.random.default_rng(2).exponential(1.0, 40), 6)),
        [float(x) for x in np.random.default_rng(3).integers(1, 6, 200)],
        list(np.round(np.random.default_rng(4).uniform(0, 10, 12), 6)),
    ]
    out = []
    for x in v:
        res = stats.shapiro(x)
        out.append({"x": [float(a) for a in x], "w": float(res.statistic),
                    "p": float(res.pvalue)})
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main():
    rng = random.Random(SEED)
    recs = make_records(rng)

    slot_ids = [k for k in range(1, N_SNIPPETS + 1)
                if k not in MISSING["TML"] and k != UNLABELED_TML]
    assert len(slot_ids) == 68
    cats = [3] * 47 + [2] * 14 + [1] * 7
    rng.shuffle(cats)
    slot_cat = {}
    (HERE / "ml_slots").mkdir(exist_ok=True)
    with open(HERE / "ml_slots/records.jsonl", "w") as f:
        for r in recs:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
    with open(HERE / "ml_slots/texts.jsonl", "w") as f:
        for k, cat in zip(slot_ids, cats):
            rec = recs[k - 1]
            text, ann = slot_text(rec, cat, rng)
            slot_cat[f"TML{k}"] = cat
            f.write(json.dumps({"text_id": f"TML{k}", "source": "TML", "name_id": rec["Name_ID"],
                                "text": text, "annotation": ann}, ensure_ascii=False) + "\n")

    rows, checks, _ = build_judgements(rng, slot_cat)
    syn = HERE / "synthetic"
    syn.mkdir(exist_ok=True)
    write_csv(syn / "judgements.csv",
              ["rater_id", "text_id", "source", "quality_label", "naturalness_label",
               "is_attention_check", "sequence_index"], rows)
    write_csv(syn / "attention_key.csv", ["text_id", "quality", "naturalness"],
              [[k, LABELS[q - 1], LABELS[n - 1]] for k, (q, n) in sorted(checks.items())])
    grammar_rows = synthetic_grammar(rng, rows)
    write_csv(syn / "grammar.csv", ["text_id", "offset", "length", "rule_id", "category", "verified"],
              grammar_rows)
    expected = oracle(rows, checks, slot_cat, grammar_rows)
    for m in ("quality", "naturalness"):
        assert expected["slot_association"][m]["p_exact"] == "1", expected["slot_association"][m]
    (syn / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")

    (HERE / "shapiro_reference.json").write_text(json.dumps(shapiro_vectors(rng), indent=1) + "\n")

    g = HERE / "grammar"
    g.mkdir(exist_ok=True)
    recordings, cases = grammar_fixtures()
    (g / "taxonomy_recordings.json").write_text(json.dumps(recordings, indent=1, ensure_ascii=False) + "\n")
    (g / "taxonomy_cases.json").write_text(json.dumps(cases, indent=1, ensure_ascii=False) + "\n")
    print("raters passing:", expected["raters"]["passed_attention_check"],
          "ratings:", {s: expected["summary"][s]["ratings"] for s in SOURCES})


if __name__ == "__main__":
    main()
