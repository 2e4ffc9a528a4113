#!/usr/bin/env python3
"""Convert MATRES annotations plus TimeML sources to JSONL event pairs.

Inputs are the official annotation files (one pair per line: doc id, the
two verbs, the two event-instance ids, label) and the TimeML document
directories they reference (TimeBank and AQUAINT for training, te3-platinum
for the test set). Every emitted pair has its triggers in document order,
swapping the label for its inverse when the annotation listed them
reversed, and carries the trigger sentence(s) as whitespace tokens.

There is no official dev split; pass --dev-docs to reproduce a published
one, otherwise a seeded document-level split holds out --dev-fraction of
the training documents.

Usage:
  convert_matres.py --timeml-dir TimeBank AQUAINT te3-platinum \\
      --train-annotations timebank.txt aquaint.txt \\
      --test-annotations platinum.txt --out data/
"""

import argparse
import random
import sys
from pathlib import Path

from timeml import load_timeml_dirs, pair_instance, write_jsonl

LABELS = {"BEFORE", "AFTER", "EQUAL", "VAGUE"}
INVERSE = {"BEFORE": "AFTER", "AFTER": "BEFORE", "EQUAL": "EQUAL", "VAGUE": "VAGUE"}


def read_annotations(paths):
    pairs = []
    for path in paths:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 6:
                sys.exit(f"{path}:{lineno}: expected 6 fields, got {len(fields)}")
            doc_id, _, _, ei1, ei2, label = fields
            if label not in LABELS:
                sys.exit(f"{path}:{lineno}: unknown label {label!r}")
            # The distribution writes bare instance-id numbers.
            ei1 = ei1 if ei1.startswith("ei") else f"ei{ei1}"
            ei2 = ei2 if ei2.startswith("ei") else f"ei{ei2}"
            pairs.append((doc_id, ei1, ei2, label))
    return pairs


def convert(pairs, docs):
    records, skipped = [], 0
    for doc_id, ei1, ei2, label in pairs:
        doc = docs.get(doc_id)
        if doc is None:
            skipped += 1
            continue
        eid1, eid2 = doc.instances.get(ei1), doc.instances.get(ei2)
        if eid1 is None or eid2 is None:
            skipped += 1
            continue
        rec = pair_instance(doc, eid1, eid2, label, INVERSE)
        if rec is None:
            skipped += 1
            continue
        records.append(rec)
    return records, skipped


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--timeml-dir", nargs="+", required=True,
                    help="directories containing the source .tml files")
    ap.add_argument("--train-annotations", nargs="+", required=True,
                    help="annotation files for the training documents")
    ap.add_argument("--test-annotations", nargs="+", required=True,
                    help="annotation files for the test documents")
    ap.add_argument("--dev-docs", type=Path,
                    help="file with one doc id per line to hold out as dev")
    ap.add_argument("--dev-fraction", type=float, default=0.1,
                    help="document fraction held out when --dev-docs is absent")
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()

    docs = load_timeml_dirs(args.timeml_dir)
    print(f"parsed {len(docs)} TimeML documents")

    train_pairs = read_annotations(args.train_annotations)
    test_pairs = read_annotations(args.test_annotations)

    if args.dev_docs:
        dev_ids = {l.strip() for l in args.dev_docs.read_text().splitlines() if l.strip()}
    else:
        ids = sorted({doc_id for doc_id, *_ in train_pairs})
        rng = random.Random(args.seed)
        rng.shuffle(ids)
        dev_ids = set(ids[: max(1, round(len(ids) * args.dev_fraction))])

    splits = {
        "train": [p for p in train_pairs if p[0] not in dev_ids],
        "dev": [p for p in train_pairs if p[0] in dev_ids],
        "test": test_pairs,
    }
    for split, pairs in splits.items():
        records, skipped = convert(pairs, docs)
        out = args.out / "matres" / f"{split}.jsonl"
        write_jsonl(records, out)
        note = f" ({skipped} skipped)" if skipped else ""
        print(f"{split}: {len(records)} pairs{note} -> {out}")


if __name__ == "__main__":
    main()
