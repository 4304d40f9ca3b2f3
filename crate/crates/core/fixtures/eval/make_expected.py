"""Per-record ROUGE for ten_records.csv, averaged; written to expected.json.

Texts in the fixture are plain words, so tokenization is whitespace
splitting with edge punctuation stripped and lowercasing.
"""
import csv
import json
import string
from collections import Counter

def tokens(text):
    out = []
    for w in text.split():
        w = w.strip(string.punctuation).lower()
        if w:
            out.append(w)
    return out

def grams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))

def f1(r, p):
    return 0.0 if r + p == 0 else 2 * r * p / (r + p)

def lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            table[i + 1][j + 1] = table[i][j] + 1 if x == y else max(table[i][j + 1], table[i + 1][j])
    return table[-1][-1]

def score(cand, ref):
    out = {}
    for name, n in (("rouge1", 1), ("rouge2", 2)):
        if not cand or len(ref) < n:
            out[name] = (0.0, 0.0, 0.0)
            continue
        c, r = grams(cand, n), grams(ref, n)
        m = sum(min(v, r[g]) for g, v in c.items())
        rt, ct = len(ref) - n + 1, max(len(cand) - n + 1, 0)
        rec, prec = m / rt, (m / ct if ct else 0.0)
        out[name] = (rec, prec, f1(rec, prec))
    if not cand:
        out["rougeL"] = (0.0, 0.0, 0.0)
    else:
        l = lcs(cand, ref)
        rec, prec = l / len(ref), l / len(cand)
        out["rougeL"] = (rec, prec, f1(rec, prec))
    return out

rows = list(csv.DictReader(open("ten_records.csv", newline="")))
scored, skipped, per_record = [], 0, {}
for row in rows:
    ref = tokens(row["reference"])
    if not ref:
        skipped += 1
        continue
    s = score(tokens(row["generated"]), ref)
    per_record[row["id"]] = {k: list(v) for k, v in s.items()}
    scored.append(s)
avg = {k: [sum(s[k][i] for s in scored) / len(scored) for i in range(3)] for k in ("rouge1", "rouge2", "rougeL")}
json.dump({"n_scored": len(scored), "n_skipped": skipped, "per_record": per_record, "average": avg},
          open("expected.json", "w"), indent=2)
