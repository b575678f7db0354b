"""Cognate-coded wordlists: parsing, validation and summary statistics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

from .errors import FormatError, ValidationError

COLUMNS = ("ID", "LANGUAGE", "CONCEPT", "TOKENS", "COGID")


@dataclass(frozen=True)
class WordForm:
    id: str
    language: str
    concept: str
    tokens: tuple[str, ...]
    cognate_id: str

    @property
    def cognate_key(self) -> tuple[str, str]:
        # cognate ids are scoped per concept
        return (self.concept, self.cognate_id)


@dataclass
class Wordlist:
    forms: list[WordForm]
    languages: list[str] = field(default_factory=list)
    concepts: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.languages:
            self.languages = list(dict.fromkeys(f.language for f in self.forms))
        if not self.concepts:
            self.concepts = list(dict.fromkeys(f.concept for f in self.forms))
        seen = set()
        langs, concepts = set(self.languages), set(self.concepts)
        for form in self.forms:
            if form.id in seen:
                raise ValidationError(f"duplicate form id {form.id!r}")
            seen.add(form.id)
            if not form.tokens:
                raise ValidationError(f"form {form.id!r} has no tokens")
            if form.language not in langs:
                raise ValidationError(f"form {form.id!r}: unknown language {form.language!r}")
            if form.concept not in concepts:
                raise ValidationError(f"form {form.id!r}: unknown concept {form.concept!r}")

    def __len__(self):
        return len(self.forms)

    def forms_of(self, language: str) -> list[WordForm]:
        return [f for f in self.forms if f.language == language]

    def cognate_sets(self) -> dict[tuple[str, str], list[WordForm]]:
        """Forms grouped by (concept, cognate_id), in first-appearance order."""
        sets: dict[tuple[str, str], list[WordForm]] = {}
        for form in self.forms:
            sets.setdefault(form.cognate_key, []).append(form)
        return sets

    def attested(self) -> dict[str, set[str]]:
        """Map language -> set of concepts it has at least one form for."""
        out: dict[str, set[str]] = {lang: set() for lang in self.languages}
        for form in self.forms:
            out[form.language].add(form.concept)
        return out


@dataclass(frozen=True)
class SummaryStats:
    words: int
    concepts: int
    languages: int
    avg_distance: float
    avg_sounds: float
    avg_word_length: float


def parse_wordlist(text: str) -> Wordlist:
    """Parse a tab-separated wordlist with columns ID, LANGUAGE, CONCEPT, TOKENS, COGID.

    Blank lines and lines starting with ``#`` are skipped. Extra columns are
    ignored. Row numbers in error messages count data rows from 1 (the header
    is row 0), matching what a user sees after stripping comments.
    """
    lines = [
        line.rstrip("\r")
        for line in text.split("\n")
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise FormatError("empty wordlist: header row missing")
    header = [h.strip() for h in lines[0].split("\t")]
    index = {}
    for col in COLUMNS:
        if col not in header:
            raise FormatError(f"missing column {col}")
        index[col] = header.index(col)

    forms = []
    for rownum, line in enumerate(lines[1:], start=1):
        cells = line.split("\t")
        if len(cells) < len(header):
            cells += [""] * (len(header) - len(cells))
        values = {col: cells[i].strip() for col, i in index.items()}
        for col in ("ID", "LANGUAGE", "CONCEPT", "TOKENS", "COGID"):
            if not values[col]:
                raise ValidationError(f"row {rownum}: empty {col}")
        forms.append(
            WordForm(
                id=values["ID"],
                language=values["LANGUAGE"],
                concept=values["CONCEPT"],
                tokens=tuple(values["TOKENS"].split()),
                cognate_id=values["COGID"],
            )
        )
    ids = set()
    for rownum, form in enumerate(forms, start=1):
        if form.id in ids:
            raise ValidationError(f"row {rownum}: duplicate ID {form.id!r}")
        ids.add(form.id)
    return Wordlist(forms)


def read_wordlist(path) -> Wordlist:
    with open(path, encoding="utf-8", newline="") as handle:
        return parse_wordlist(handle.read())


def serialize_wordlist(wordlist: Wordlist) -> str:
    rows = ["\t".join(COLUMNS)]
    for f in wordlist.forms:
        rows.append("\t".join([f.id, f.language, f.concept, " ".join(f.tokens), f.cognate_id]))
    return "\n".join(rows) + "\n"


def cognate_distance(wordlist: Wordlist, lang_a: str, lang_b: str) -> float:
    """Fraction of commonly attested concepts in which two languages share no cognate set."""
    for lang in (lang_a, lang_b):
        if lang not in wordlist.languages:
            raise ValidationError(f"language {lang!r} not in wordlist")
    sets_a: dict[str, set[str]] = {}
    sets_b: dict[str, set[str]] = {}
    for form in wordlist.forms:
        if form.language == lang_a:
            sets_a.setdefault(form.concept, set()).add(form.cognate_id)
        if form.language == lang_b:
            sets_b.setdefault(form.concept, set()).add(form.cognate_id)
    common = [c for c in sets_a if c in sets_b]
    if not common:
        raise ValidationError(f"{lang_a!r} and {lang_b!r} share no attested concept")
    shared = sum(1 for c in common if sets_a[c] & sets_b[c])
    return 1.0 - shared / len(common)


def _pairwise_distances(wordlist: Wordlist) -> Iterable[float]:
    for a, b in itertools.combinations(wordlist.languages, 2):
        try:
            yield cognate_distance(wordlist, a, b)
        except ValidationError:
            # pairs without common concepts carry no distance
            continue


def summarize(wordlist: Wordlist) -> SummaryStats:
    if not wordlist.forms:
        raise ValidationError("cannot summarize an empty wordlist")
    inventories: dict[str, set[str]] = {lang: set() for lang in wordlist.languages}
    for form in wordlist.forms:
        inventories[form.language].update(form.tokens)
    dists = list(_pairwise_distances(wordlist))
    return SummaryStats(
        words=len(wordlist.forms),
        concepts=len(wordlist.concepts),
        languages=len(wordlist.languages),
        avg_distance=sum(dists) / len(dists) if dists else 0.0,
        avg_sounds=sum(len(s) for s in inventories.values()) / len(inventories),
        avg_word_length=sum(len(f.tokens) for f in wordlist.forms) / len(wordlist.forms),
    )
