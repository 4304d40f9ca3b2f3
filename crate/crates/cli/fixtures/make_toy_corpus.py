"""Writes toy_corpus.jsonl: 50 synthetic raw PR records with the noise a
real crawl carries (HTML, links, issue references, sign-offs, mentions,
markdown headings). Seeded, so the output is stable."""
import json
import random

rng = random.Random(20240501)
projects = ["esigate/esigate", "acme/ledger", "acme/router", "tools/indexer", "tools/mailer"]
areas = ["parser", "cache", "driver", "scheduler", "config loader", "http client", "index writer", "mapper"]
verbs = ["add", "fix", "refactor", "document", "remove", "speed up", "harden", "simplify"]
details = ["null handling", "timeout setting", "retry logic", "thread safety", "logging", "unit tests",
           "error messages", "encoding of headers", "connection pooling", "default values"]
comments = ["TODO remove once the old API is gone", "guard against empty input", "cache the compiled pattern",
            "keep order stable for callers", "the caller owns the stream", "retry at most three times"]
people = ["alice", "bob", "carol", "dave"]

def commit_message():
    msg = f"{rng.choice(verbs).capitalize()} {rng.choice(details)} in {rng.choice(areas)}"
    r = rng.random()
    if r < 0.2:
        msg += f"\n\nSigned-off-by: {rng.choice(people).title()} <{rng.choice(people)}@example.org>"
    elif r < 0.35:
        msg += f" (#{rng.randint(1, 900)})"
    elif r < 0.45:
        msg += f"\n\nSee https://example.org/issues/{rng.randint(1, 900)}"
    return msg

def description(messages):
    area, detail = rng.choice(areas), rng.choice(details)
    parts = []
    if rng.random() < 0.3:
        parts.append("<!-- Please describe your change -->")
    if rng.random() < 0.3:
        parts.append("## Summary")
    parts.append(f"This change touches the {area} and improves {detail}.")
    first = messages[0].split("\n")[0].lower()
    parts.append(f"It mainly does the following: {first}.")
    if rng.random() < 0.4:
        parts.append(f"Fixes #{rng.randint(1, 900)}, thanks @{rng.choice(people)}.")
    if rng.random() < 0.3:
        parts.append(f"<b>Note:</b> behaviour of the {rng.choice(areas)} is unchanged.")
    return "\n".join(parts)

records = []
for i in range(50):
    project = projects[i % len(projects)]
    messages = [commit_message() for _ in range(rng.randint(1, 5))]
    if rng.random() < 0.15:
        messages[-1] = messages[-1] + "<cm-sep>" + commit_message()
    code = [rng.choice(comments) for _ in range(rng.randint(0, 2))]
    desc = description(messages)
    if i in (7, 31):
        desc = "<!-- template left empty -->"
    if i == 19:
        messages = ["Signed-off-by: Bot <bot@example.org>"]
        code = []
    records.append({"id": f"{project}_{100 + i}", "description": desc,
                    "commits": [{"message": m} for m in messages], "code_comments": code})

with open("toy_corpus.jsonl", "w") as f:
    for r in records:
        f.write(json.dumps(r, ensure_ascii=False) + "\n")
