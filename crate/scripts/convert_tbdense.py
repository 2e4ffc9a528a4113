#!/usr/bin/env python3
"""Convert TimeBank-Dense annotations plus TimeML sources to JSONL event pairs.

Input is the dense annotation file (one relation per line: doc id, two
element ids, relation code) and the TimeBank TimeML directory. Event-timex
and timex-timex rows are dropped; event-event rows map the codes b/a/s/i/
ii/v to BEFORE/AFTER/SIMULTANEOUS/INCLUDES/"INCLUDED IN"/VAGUE. Triggers
are put in document order with label inversion, and each record carries
the trigger sentence(s) as whitespace tokens.

The document split is the standard 22/5/9 train/dev/test partition.

Usage:
  convert_tbdense.py --timeml-dir TimeBank --annotations TimebankDense.full.txt --out data/
"""

import argparse
import sys
from pathlib import Path

from timeml import load_timeml_dirs, pair_instance, write_jsonl

CODES = {
    "b": "BEFORE",
    "a": "AFTER",
    "s": "SIMULTANEOUS",
    "i": "INCLUDES",
    "ii": "INCLUDED IN",
    "v": "VAGUE",
}
INVERSE = {
    "BEFORE": "AFTER",
    "AFTER": "BEFORE",
    "SIMULTANEOUS": "SIMULTANEOUS",
    "INCLUDES": "INCLUDED IN",
    "INCLUDED IN": "INCLUDES",
    "VAGUE": "VAGUE",
}

DEV_DOCS = {
    "APW19980227.0487",
    "CNN19980223.1130",
    "NYT19980212.0019",
    "PRI19980216.2000.0170",
    "ed980111.1130.0089",
}
TEST_DOCS = {
    "APW19980227.0489",
    "APW19980227.0494",
    "APW19980308.0201",
    "APW19980418.0210",
    "CNN19980126.1600.1104",
    "CNN19980213.2130.0155",
    "NYT19980402.0453",
    "PRI19980115.2000.0186",
    "PRI19980306.2000.1675",
}


def read_annotations(path):
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            sys.exit(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
        doc_id, id1, id2, code = fields
        if code not in CODES:
            sys.exit(f"{path}:{lineno}: unknown relation code {code!r}")
        # Timex ids start with 't'; only event-event pairs are kept.
        if not (id1.startswith("e") and id2.startswith("e")):
            continue
        pairs.append((doc_id, id1, id2, CODES[code]))
    return pairs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--timeml-dir", nargs="+", required=True,
                    help="directories containing the source .tml files")
    ap.add_argument("--annotations", type=Path, required=True,
                    help="the dense annotation file")
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()

    docs = load_timeml_dirs(args.timeml_dir)
    print(f"parsed {len(docs)} TimeML documents")

    def split_of(doc_id):
        if doc_id in TEST_DOCS:
            return "test"
        if doc_id in DEV_DOCS:
            return "dev"
        return "train"

    splits = {"train": [], "dev": [], "test": []}
    for pair in read_annotations(args.annotations):
        splits[split_of(pair[0])].append(pair)

    for split, pairs in splits.items():
        records, skipped = [], 0
        for doc_id, eid1, eid2, label in pairs:
            doc = docs.get(doc_id)
            rec = pair_instance(doc, eid1, eid2, label, INVERSE) if doc else None
            if rec is None:
                skipped += 1
                continue
            records.append(rec)
        out = args.out / "tbdense" / f"{split}.jsonl"
        write_jsonl(records, out)
        note = f" ({skipped} skipped)" if skipped else ""
        print(f"{split}: {len(records)} pairs{note} -> {out}")


if __name__ == "__main__":
    main()
