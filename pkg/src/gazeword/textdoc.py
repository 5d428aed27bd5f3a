"""Document layout, vocabulary, tokenization and candidate-word extraction."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .gaze import BoundingBox

PAD, UNK = "<pad>", "<unk>"

# closed-class words excluded from the candidate set (articles, conjunctions,
# prepositions, pronouns, auxiliaries, common particles)
FUNCTION_WORDS = frozenset("""
a an the this that these those some any each every either neither no
and or but nor so yet for because although though while whereas if unless
until since when whenever where wherever after before once as than whether
in on at by with from to of off over under above below between among through
during without within along across behind beyond near beside besides against
about around up down out into onto upon toward towards past via per
i you he she it we they me him her us them my your his its our their mine
yours hers ours theirs myself yourself himself herself itself ourselves
yourselves themselves who whom whose which what
am is are was were be been being do does did done doing have has had having
will would shall should may might must can could ought need dare
not never always often sometimes seldom rarely ever also just only very too
quite rather somewhat there here then now soon already still else even both
all many much few little more most less least such own same other another
yes no nor
""".split())


@dataclass(frozen=True)
class TokenSpan:
    token_id: int
    text: str
    box: BoundingBox


@dataclass
class LayoutWord:
    text: str
    box: BoundingBox
    line_index: int
    word_index: int = 0

    @property
    def is_function_word(self) -> bool:
        return self.text.lower() in FUNCTION_WORDS


@dataclass
class DocumentLayout:
    doc_id: str
    words: list[LayoutWord]
    line_height: float
    column_boxes: list[BoundingBox] = field(default_factory=list)

    def __post_init__(self):
        for i, w in enumerate(self.words):
            w.word_index = i


class Vocabulary:
    """Deterministic vocabulary: frequent whole words plus character-bigram
    fallback units for everything else."""

    VERSION = 1

    def __init__(self, units: Sequence[str]):
        self.units = list(units)
        self.index = {u: i for i, u in enumerate(self.units)}
        if len(self.index) != len(self.units):
            raise ValueError("duplicate vocabulary units")
        self.pad_id = self.index[PAD]
        self.unk_id = self.index[UNK]

    def __len__(self) -> int:
        return len(self.units)

    def lookup(self, unit: str) -> int:
        return self.index.get(unit, self.unk_id)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for u in self.units:
            h.update(u.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()[:16]

    def save(self, path) -> None:
        payload = {"version": self.VERSION, "units": self.units,
                   "hash": self.content_hash()}
        with open(path, "w") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path) as f:
            payload = json.load(f)
        if payload.get("version") != cls.VERSION:
            raise ValueError(f"unsupported vocabulary version "
                             f"{payload.get('version')}")
        vocab = cls(payload["units"])
        if payload.get("hash") != vocab.content_hash():
            raise ValueError("vocabulary file hash mismatch")
        return vocab


def build_vocabulary(corpus: Iterable[DocumentLayout], max_size: int = 8192,
                     min_count: int = 1) -> Vocabulary:
    """Whole words at or above min_count (by falling frequency, then
    alphabetically), plus fallback character units, plus specials."""
    if max_size < 16:
        raise ValueError(f"max_size must be >= 16, got {max_size}")
    counts: Counter[str] = Counter()
    chars: set[str] = set()
    bigrams: set[str] = set()
    n_docs = 0
    for layout in corpus:
        n_docs += 1
        for w in layout.words:
            t = w.text.lower()
            counts[t] += 1
            chars.update(t)
            bigrams.update(t[i:i + 2] for i in range(len(t) - 1))
    if n_docs == 0:
        raise ValueError("empty corpus")

    fallback = sorted(f"##{b}" for b in bigrams) + sorted(f"#{c}" for c in chars)
    budget = max_size - 2 - len(fallback)
    if budget < 0:
        raise ValueError(f"max_size {max_size} too small for "
                         f"{len(fallback)} fallback units")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    words = [w for w, c in ranked if c >= min_count][:budget]
    return Vocabulary([PAD, UNK] + words + fallback)


def _chunks(text: str) -> list[str]:
    out = [text[i:i + 2] for i in range(0, len(text) - 1, 2)]
    if len(text) % 2 == 1:
        out.append(text[-1])
    return out


def tokenize(word: LayoutWord, vocab: Vocabulary) -> list[TokenSpan]:
    """One token for in-vocabulary words, else a character-bigram
    decomposition with boxes split proportionally to character counts."""
    text = word.text.lower()
    if not text:
        raise ValueError("cannot tokenize an empty word")
    if text in vocab.index:
        return [TokenSpan(vocab.index[text], text, word.box)]
    pieces = _chunks(text)
    total = sum(len(p) for p in pieces)
    width = word.box.x_max - word.box.x_min
    spans = []
    used = 0
    for p in pieces:
        x0 = word.box.x_min + width * used / total
        used += len(p)
        x1 = word.box.x_min + width * used / total
        unit = f"##{p}" if len(p) == 2 else f"#{p}"
        spans.append(TokenSpan(vocab.lookup(unit), p,
                               BoundingBox(x0, word.box.y_min,
                                           x1, word.box.y_max)))
    return spans


def candidate_words(layout: DocumentLayout, roi: BoundingBox) -> list[LayoutWord]:
    """Non-function words whose boxes intersect the region of interest,
    in reading order."""
    return [w for w in layout.words
            if not w.is_function_word and w.box.intersects(roi)]


def context_words(layout: DocumentLayout, roi: BoundingBox) -> list[LayoutWord]:
    """All words (function words included) intersecting the region of
    interest; they provide textual context even when not candidates."""
    return [w for w in layout.words if w.box.intersects(roi)]


# ------------------------------------------------------------------ file IO

def layout_to_json(layout: DocumentLayout) -> dict:
    return {
        "doc_id": layout.doc_id,
        "line_height": layout.line_height,
        "words": [{"text": w.text, "box": w.box.as_list(), "line": w.line_index}
                  for w in layout.words],
        "columns": [b.as_list() for b in layout.column_boxes],
    }


def layout_from_json(obj: dict) -> DocumentLayout:
    words = [LayoutWord(text=w["text"], box=BoundingBox(*w["box"]),
                        line_index=int(w["line"]))
             for w in obj["words"]]
    cols = [BoundingBox(*b) for b in obj.get("columns", [])]
    return DocumentLayout(doc_id=obj["doc_id"], words=words,
                          line_height=float(obj["line_height"]),
                          column_boxes=cols)


def write_layout(path, layout: DocumentLayout) -> None:
    with open(path, "w") as f:
        json.dump(layout_to_json(layout), f)


def read_layout(path) -> DocumentLayout:
    with open(path) as f:
        return layout_from_json(json.load(f))


def write_labels(path, labels: Iterable[dict]) -> None:
    with open(path, "w") as f:
        for row in labels:
            f.write(json.dumps(row) + "\n")


def read_labels(path) -> dict[tuple[str, str, int], bool]:
    """Map (user_id, doc_id, word_index) -> unknown flag."""
    out = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            out[(row["user_id"], row["doc_id"], int(row["word_index"]))] = \
                bool(row["unknown"])
    return out
