"""Word-level knowledge features: term frequency, part of speech, named
entities. Deterministic heuristics; each feature only feeds a categorical
embedding downstream."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

# 12-tag universal part-of-speech set
POS_TAGS = ["NOUN", "VERB", "ADJ", "ADV", "PRON", "DET",
            "ADP", "NUM", "CONJ", "PRT", "X", "PUNCT"]
POS_INDEX = {t: i for i, t in enumerate(POS_TAGS)}

NER_TAGS = ["none", "person", "place", "org", "other"]
NER_INDEX = {t: i for i, t in enumerate(NER_TAGS)}

N_TF_BINS = 16

_POS_LEXICON = {
    "DET": {"a", "an", "the", "this", "that", "these", "those", "some",
            "any", "each", "every", "either", "neither", "no"},
    "PRON": {"i", "you", "he", "she", "it", "we", "they", "me", "him",
             "her", "us", "them", "my", "your", "his", "its", "our",
             "their", "who", "whom", "whose", "which", "what", "mine",
             "yours", "hers", "ours", "theirs"},
    "ADP": {"in", "on", "at", "by", "with", "from", "to", "of", "over",
            "under", "above", "below", "between", "among", "through",
            "during", "without", "within", "along", "across", "behind",
            "beyond", "near", "against", "about", "around", "into",
            "onto", "upon", "toward", "towards", "past", "via", "per"},
    "CONJ": {"and", "or", "but", "nor", "so", "yet", "for", "because",
             "although", "though", "while", "whereas", "if", "unless",
             "until", "since", "when", "where", "after", "before",
             "once", "as", "than", "whether"},
    "VERB": {"am", "is", "are", "was", "were", "be", "been", "being",
             "do", "does", "did", "done", "have", "has", "had", "having",
             "will", "would", "shall", "should", "may", "might", "must",
             "can", "could", "go", "goes", "went", "make", "makes",
             "made", "say", "says", "said", "get", "gets", "got"},
    "PRT": {"not", "n't", "up", "out", "off", "down"},
    "ADV": {"very", "too", "quite", "rather", "always", "often", "never",
            "sometimes", "here", "there", "now", "then", "soon",
            "already", "still", "just", "only", "also", "else", "even"},
}

_ADJ_SUFFIXES = ("ous", "ful", "ive", "al", "ic", "able", "ible", "ant",
                 "ent", "less", "ish", "ary")
_ADV_SUFFIXES = ("ly",)
_VERB_SUFFIXES = ("ize", "ise", "ate", "ify", "ing", "ed")
_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ism", "ist",
                  "ance", "ence", "ship", "hood", "dom", "er", "or")

_GAZETTEER = {
    "person": {"alice", "bob", "carol", "david", "emma", "frank", "grace",
               "henry", "john", "mary", "newton", "darwin", "einstein",
               "curie", "shakespeare"},
    "place": {"paris", "london", "tokyo", "beijing", "america", "europe",
              "asia", "africa", "china", "france", "england", "japan",
              "rome", "berlin", "atlantis"},
    "org": {"nasa", "unesco", "google", "microsoft", "harvard", "oxford",
            "cambridge", "senate", "congress", "parliament"},
}


@dataclass(frozen=True)
class KnowledgeVector:
    log_term_frequency: float
    tf_bin: int
    pos_tag: str
    ner_tag: str

    @property
    def pos_index(self) -> int:
        return POS_INDEX[self.pos_tag]

    @property
    def ner_index(self) -> int:
        return NER_INDEX[self.ner_tag]


class FrequencyTable:
    """Corpus word counts; built from the training corpus only."""

    def __init__(self, counts: dict[str, int]):
        self.counts = dict(counts)
        self.max_count = max(counts.values()) if counts else 0

    @classmethod
    def from_corpus(cls, layouts: Iterable) -> "FrequencyTable":
        counts: Counter[str] = Counter()
        for layout in layouts:
            for w in layout.words:
                counts[w.text.lower()] += 1
        return cls(dict(counts))

    def count(self, word: str) -> int:
        return self.counts.get(word.lower(), 0)

    def rank(self, word: str) -> int:
        """1-based frequency rank; unseen words rank below everything."""
        c = self.count(word)
        if c == 0:
            return len(self.counts) + 1
        return 1 + sum(1 for v in self.counts.values() if v > c)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.counts, f)

    @classmethod
    def load(cls, path) -> "FrequencyTable":
        with open(path) as f:
            return cls(json.load(f))


def tf_bin(count: int, max_count: int) -> int:
    """Monotone log binning into [0, 15]; the most frequent word gets 15."""
    if count <= 0 or max_count <= 0:
        return 0
    frac = math.log1p(count) / math.log1p(max_count)
    return min(N_TF_BINS - 1, int(frac * (N_TF_BINS - 1) + 1e-12))


def pos_tag(word: str) -> str:
    t = word.lower()
    if not t:
        return "X"
    if all(not ch.isalnum() for ch in t):
        return "PUNCT"
    if t[0].isdigit():
        return "NUM"
    for tag, words in _POS_LEXICON.items():
        if t in words:
            return tag
    for suf in _ADV_SUFFIXES:
        if t.endswith(suf) and len(t) > len(suf) + 1:
            return "ADV"
    for suf in _VERB_SUFFIXES:
        if t.endswith(suf) and len(t) > len(suf) + 1:
            return "VERB"
    for suf in _ADJ_SUFFIXES:
        if t.endswith(suf) and len(t) > len(suf) + 1:
            return "ADJ"
    for suf in _NOUN_SUFFIXES:
        if t.endswith(suf) and len(t) > len(suf) + 1:
            return "NOUN"
    return "NOUN"


def ner_tag(word: str, sentence_initial: bool = False) -> str:
    t = word.lower()
    for tag in ("person", "place", "org"):
        if t in _GAZETTEER[tag]:
            return tag
    if word[:1].isupper() and not sentence_initial:
        return "other"
    return "none"


def knowledge_features(word, freq_table: FrequencyTable,
                       sentence_initial: bool = False) -> KnowledgeVector:
    """Deterministic knowledge vector for a layout word."""
    text = word.text if hasattr(word, "text") else str(word)
    c = freq_table.count(text)
    log_tf = math.log1p(c)
    return KnowledgeVector(
        log_term_frequency=log_tf,
        tf_bin=tf_bin(c, freq_table.max_count),
        pos_tag=pos_tag(text),
        ner_tag=ner_tag(text, sentence_initial=sentence_initial),
    )
