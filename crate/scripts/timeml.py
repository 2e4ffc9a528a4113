"""TimeML parsing shared by the dataset converters.

Extracts whitespace tokens from a .tml document's TEXT element, the token
span of every EVENT, and the MAKEINSTANCE eiid -> eid mapping. Sentence
segmentation is rule-based (terminal punctuation with an abbreviation
guard); the upstream corpora ship no reliable sentence markup.
"""

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

# Common abbreviations whose trailing period does not end a sentence.
ABBREVIATIONS = {
    "mr.", "mrs.", "ms.", "dr.", "prof.", "gen.", "sen.", "rep.", "gov.",
    "lt.", "col.", "sgt.", "capt.", "cmdr.", "adm.", "maj.", "st.", "jr.",
    "sr.", "co.", "corp.", "inc.", "ltd.", "dept.", "univ.", "assn.",
    "bros.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.",
    "sept.", "oct.", "nov.", "dec.", "mon.", "tue.", "wed.", "thu.",
    "fri.", "sat.", "sun.", "etc.", "vs.", "v.", "no.", "u.s.", "u.n.",
    "a.m.", "p.m.",
}

_TERMINAL = re.compile(r'[.!?]["\')\]]*$')


@dataclass
class TimemlDoc:
    doc_id: str
    tokens: list = field(default_factory=list)
    # eid -> (start, end) token span, half-open
    event_spans: dict = field(default_factory=dict)
    # eiid -> eid
    instances: dict = field(default_factory=dict)
    # sentence index for each token
    sentence_of: list = field(default_factory=list)
    # sentence index -> (start, end) token span
    sentences: list = field(default_factory=list)

    def sentence_span(self, token_idx):
        return self.sentences[self.sentence_of[token_idx]]


def _ends_sentence(token):
    if not _TERMINAL.search(token):
        return False
    bare = token.lower().rstrip('"\')]')
    if bare in ABBREVIATIONS:
        return False
    # Single-letter initials like "J." and dotted acronyms like "U.S.A.".
    if re.fullmatch(r"(\w\.)+", bare):
        return False
    return True


def _segment(doc):
    start = 0
    for i, tok in enumerate(doc.tokens):
        doc.sentence_of.append(len(doc.sentences))
        if _ends_sentence(tok):
            doc.sentences.append((start, i + 1))
            start = i + 1
    if start < len(doc.tokens):
        doc.sentences.append((start, len(doc.tokens)))


def parse_timeml(path):
    """Parse one .tml file. Raises on malformed XML."""
    path = Path(path)
    root = ET.fromstring(path.read_text(encoding="utf-8", errors="replace"))
    doc = TimemlDoc(doc_id=path.stem)

    text = root.find(".//TEXT")
    if text is None:
        raise ValueError(f"{path}: no TEXT element")

    def emit(chunk, eid=None):
        words = chunk.split()
        if eid is not None and words:
            start = len(doc.tokens)
            doc.tokens.extend(words)
            doc.event_spans[eid] = (start, len(doc.tokens))
        else:
            doc.tokens.extend(words)

    def walk(elem):
        if elem.tag == "EVENT":
            emit("".join(elem.itertext()), eid=elem.get("eid"))
        else:
            if elem.text:
                emit(elem.text)
            for child in elem:
                walk(child)
        if elem.tail:
            emit(elem.tail)

    if text.text:
        emit(text.text)
    for child in text:
        walk(child)

    for mi in root.iter("MAKEINSTANCE"):
        doc.instances[mi.get("eiid")] = mi.get("eventID")

    _segment(doc)
    return doc


def load_timeml_dirs(dirs):
    """Parse every .tml under the given directories, keyed by doc id."""
    docs = {}
    for d in dirs:
        for path in sorted(Path(d).rglob("*.tml")):
            doc = parse_timeml(path)
            docs[doc.doc_id] = doc
    return docs


def pair_instance(doc, eid1, eid2, label, inverse):
    """Build one JSONL-ready record for an event pair.

    Triggers are put in document order; a swapped pair gets the inverse
    label. Tokens are the trigger sentences joined in order (one sentence
    when the triggers share it). Returns None when either event is missing
    or the spans collide.
    """
    if eid1 not in doc.event_spans or eid2 not in doc.event_spans:
        return None
    s1, s2 = doc.event_spans[eid1], doc.event_spans[eid2]
    if s1 == s2:
        return None
    if s1[0] > s2[0]:
        s1, s2 = s2, s1
        eid1, eid2 = eid2, eid1
        label = inverse[label]
    if s1[1] > s2[0]:
        return None

    sent1 = doc.sentence_span(s1[0])
    sent2 = doc.sentence_span(s2[0])
    if sent1 == sent2:
        window = [sent1]
    else:
        window = [sent1, sent2]

    tokens = []
    offsets = {}
    for span in window:
        offsets[span] = len(tokens) - span[0]
        tokens.extend(doc.tokens[span[0]:span[1]])

    def shift(span, sent):
        off = offsets[sent]
        return [span[0] + off, span[1] + off]

    return {
        "instance_id": f"{doc.doc_id}-{eid1}-{eid2}",
        "doc_id": doc.doc_id,
        "tokens": tokens,
        "trigger1": shift(s1, sent1),
        "trigger2": shift(s2, sent2),
        "label": label,
    }


def write_jsonl(records, path):
    import json

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
