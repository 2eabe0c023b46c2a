#!/usr/bin/env python3
"""Check a corpus JSON file against the expected schema.

Written separately from the Rust loader so the two can be compared on the
same files. Prints one line per problem and exits 1 if there are any.

    python3 scripts/check_corpus.py fixtures/corpus.json
"""

import json
import sys
import unicodedata

KINDS = {"visual", "contextual"}
SPLITS = {"train", "val", "test"}


def blank(value):
    return not isinstance(value, str) or not value.strip()


def check(doc):
    problems = []
    if not isinstance(doc, dict):
        return ["top level must be an object"]
    for key in doc.keys() - {"records", "splits"}:
        problems.append(f"unknown top-level field {key!r}")
    records = doc.get("records")
    if not isinstance(records, list) or not records:
        return problems + ["records must be a nonempty list"]

    ids = set()
    for i, rec in enumerate(records):
        where = f"record #{i}"
        if not isinstance(rec, dict):
            problems.append(f"{where}: not an object")
            continue
        rid = rec.get("id")
        if blank(rid):
            problems.append(f"{where}: id is empty")
        else:
            rid = unicodedata.normalize("NFC", rid)
            if rid in ids:
                problems.append(f"duplicate id {rid!r}")
            ids.add(rid)
            where = f"record {rid!r}"
        if blank(rec.get("title")):
            problems.append(f"{where}: title is empty")
        for field in ("visual_sentences", "contextual_sentences"):
            sentences = rec.get(field, [])
            if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
                problems.append(f"{where}: {field} must be a list of strings")
        questions = rec.get("questions", [])
        if not isinstance(questions, list):
            problems.append(f"{where}: questions must be a list")
            continue
        for j, q in enumerate(questions):
            if not isinstance(q, dict):
                problems.append(f"{where} question #{j}: not an object")
                continue
            if blank(q.get("question")):
                problems.append(f"{where} question #{j}: question is empty")
            if blank(q.get("answer")):
                problems.append(f"{where} question #{j}: answer is empty")
            if q.get("kind") not in KINDS:
                problems.append(f"{where} question #{j}: kind must be visual or contextual")

    splits = doc.get("splits")
    if splits is not None:
        if not isinstance(splits, dict):
            problems.append("splits must be an object")
        else:
            for rid, split in splits.items():
                if unicodedata.normalize("NFC", rid) not in ids:
                    problems.append(f"split assignment for unknown id {rid!r}")
                if split not in SPLITS:
                    problems.append(f"split for {rid!r} must be train, val or test")
    return problems


def main(argv):
    if len(argv) != 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    try:
        with open(argv[1], encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, ValueError) as e:
        print(f"{argv[1]}: {e}")
        return 1
    problems = check(doc)
    for p in problems:
        print(p)
    if not problems:
        n = len(doc["records"])
        q = sum(len(r.get("questions", [])) for r in doc["records"])
        print(f"ok: {n} records, {q} questions")
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
