"""Binary presence/absence matrices from cognate sets and correspondence patterns."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Wordlist
from .errors import ParseError, ValidationError
from .patterns import Pattern

PROVENANCES = ("cognate", "pattern", "combined")
MISSING = "?"


@dataclass
class BinaryMatrix:
    """Taxa x characters over '0', '1' and '?'; each row is stored as a string."""

    taxa: list[str]
    characters: list[str]
    rows: list[str]
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.provenance:
            self.provenance = ["cognate"] * len(self.characters)
        if len(set(self.taxa)) != len(self.taxa):
            raise ValidationError("taxon names must be unique")
        if len(self.rows) != len(self.taxa):
            raise ValidationError("row count differs from taxon count")
        if len(self.provenance) != len(self.characters):
            raise ValidationError("provenance length differs from character count")
        for taxon, row in zip(self.taxa, self.rows):
            if len(row) != len(self.characters):
                raise ValidationError(f"row of {taxon!r} has {len(row)} cells, expected {len(self.characters)}")
            bad = set(row) - {"0", "1", MISSING}
            if bad:
                raise ValidationError(f"row of {taxon!r} has illegal states {sorted(bad)}")
        for p in set(self.provenance) - set(PROVENANCES):
            raise ValidationError(f"unknown provenance {p!r}")
        for j, label in enumerate(self.characters):
            if self.rows and all(r[j] == MISSING for r in self.rows):
                raise ValidationError(f"character {label!r} has no observed cell")

    @property
    def ntax(self) -> int:
        return len(self.taxa)

    @property
    def nchar(self) -> int:
        return len(self.characters)

    def cell(self, taxon: str, char: int) -> str:
        return self.rows[self.taxa.index(taxon)][char]

    def column(self, char: int) -> str:
        return "".join(r[char] for r in self.rows)

    def to_array(self) -> np.ndarray:
        """int8 array with 0/1 and -1 for missing."""
        table = {"0": 0, "1": 1, MISSING: -1}
        return np.array([[table[c] for c in row] for row in self.rows], dtype=np.int8).reshape(
            self.ntax, self.nchar
        )

    @classmethod
    def from_array(cls, taxa, array, characters=None, provenance=None) -> "BinaryMatrix":
        symbols = {0: "0", 1: "1", -1: MISSING}
        array = np.asarray(array)
        rows = ["".join(symbols[int(v)] for v in r) for r in array]
        if characters is None:
            characters = [str(j + 1) for j in range(array.shape[1])]
        return cls(list(taxa), list(characters), rows, list(provenance or []))


def _natural_key(text: str):
    return [(0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.split(r"(\d+)", text) if t]


def encode_cognates(wordlist: Wordlist) -> BinaryMatrix:
    attested = wordlist.attested()
    members: dict[tuple[str, str], set[str]] = {}
    for form in wordlist.forms:
        members.setdefault(form.cognate_key, set()).add(form.language)
    keys = sorted(
        members,
        key=lambda k: (wordlist.concepts.index(k[0]), _natural_key(k[1])),
    )
    cols = []
    for concept, cogid in keys:
        langs = members[(concept, cogid)]
        cols.append(
            [
                "1" if lang in langs else ("0" if concept in attested[lang] else MISSING)
                for lang in wordlist.languages
            ]
        )
    rows = ["".join(col[i] for col in cols) for i in range(len(wordlist.languages))]
    return BinaryMatrix(
        taxa=list(wordlist.languages),
        characters=[f"{c}:{k}" for c, k in keys],
        rows=rows,
        provenance=["cognate"] * len(keys),
    )


def encode_patterns(patterns: Sequence[Pattern], wordlist: Wordlist) -> BinaryMatrix:
    attested = wordlist.attested()
    cols = []
    for p in patterns:
        concepts = p.concepts
        cols.append(
            [
                "1" if lang in p.assignment else ("0" if attested[lang] & concepts else MISSING)
                for lang in wordlist.languages
            ]
        )
    rows = ["".join(col[i] for col in cols) for i in range(len(wordlist.languages))]
    return BinaryMatrix(
        taxa=list(wordlist.languages),
        characters=[f"pattern{p.id}" for p in patterns],
        rows=rows,
        provenance=["pattern"] * len(patterns),
    )


def concatenate(a: BinaryMatrix, b: BinaryMatrix) -> BinaryMatrix:
    taxa = list(a.taxa) + [t for t in b.taxa if t not in a.taxa]
    a_rows = dict(zip(a.taxa, a.rows))
    b_rows = dict(zip(b.taxa, b.rows))
    rows = [
        a_rows.get(t, MISSING * a.nchar) + b_rows.get(t, MISSING * b.nchar) for t in taxa
    ]
    return BinaryMatrix(
        taxa=taxa,
        characters=list(a.characters) + list(b.characters),
        rows=rows,
        provenance=list(a.provenance) + list(b.provenance),
    )


# --- Nexus -----------------------------------------------------------------

_PLAIN = re.compile(r"^[A-Za-z0-9]+$")


def _quote(label: str) -> str:
    if _PLAIN.match(label):
        return label
    return "'" + label.replace("'", "''") + "'"


def _ranges(indices: list[int]) -> str:
    parts = []
    start = prev = None
    for i in indices:
        if start is None:
            start = prev = i
        elif i == prev + 1:
            prev = i
        else:
            parts.append(f"{start}-{prev}" if prev > start else str(start))
            start = prev = i
    if start is not None:
        parts.append(f"{start}-{prev}" if prev > start else str(start))
    return " ".join(parts)


def write_nexus(matrix: BinaryMatrix) -> str:
    labels = [_quote(t) for t in matrix.taxa]
    pad = max((len(x) for x in labels), default=0) + 2
    out = [
        "#NEXUS",
        "",
        "BEGIN DATA;",
        f"\tDIMENSIONS NTAX={matrix.ntax} NCHAR={matrix.nchar};",
        '\tFORMAT DATATYPE=STANDARD SYMBOLS="01" MISSING=? GAP=-;',
    ]
    if matrix.nchar:
        out.append("\tCHARLABELS")
        out += [f"\t\t{_quote(c)}" for c in matrix.characters]
        out.append("\t;")
    out.append("\tMATRIX")
    out += [f"{label.ljust(pad)}{row}" for label, row in zip(labels, matrix.rows)]
    out += ["\t;", "END;", ""]
    groups: dict[str, list[int]] = {}
    for j, p in enumerate(matrix.provenance, start=1):
        groups.setdefault(p, []).append(j)
    if groups:
        out.append("BEGIN SETS;")
        for name in PROVENANCES:
            if name in groups:
                out.append(f"\tCHARSET {name} = {_ranges(groups[name])};")
        out += ["END;", ""]
    return "\n".join(out)


_TOKEN = re.compile(r"""'(?:[^']|'')*'|"[^"]*"|[;=]|[^\s;='"]+""")


def _tokenize(text: str):
    """Yield (token, line) pairs; bracket comments are dropped."""
    depth = 0
    cleaned = []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]" and depth:
            depth -= 1
        elif depth:
            cleaned.append("\n" if ch == "\n" else " ")
        else:
            cleaned.append(ch)
    for lineno, line in enumerate("".join(cleaned).split("\n"), start=1):
        for m in _TOKEN.finditer(line):
            yield m.group(0), lineno


def _unquote(tok: str) -> str:
    if len(tok) >= 2 and tok[0] == tok[-1] == "'":
        return tok[1:-1].replace("''", "'")
    return tok


def _split_commands(tokens):
    """Group tokens into commands terminated by ';'."""
    cmd = []
    for tok, line in tokens:
        if tok == ";":
            yield cmd
            cmd = []
        else:
            cmd.append((tok, line))
    if cmd:
        yield cmd


def _expand_ranges(tokens, nchar, line) -> list[int]:
    out = []
    for tok in tokens:
        m = re.fullmatch(r"(\d+)(?:-(\d+|\.))?", tok)
        if not m:
            raise ParseError(f"bad character range {tok!r}", line=line)
        lo = int(m.group(1))
        hi = lo if m.group(2) is None else (nchar if m.group(2) == "." else int(m.group(2)))
        out.extend(range(lo, hi + 1))
    return out


def read_nexus(text: str) -> BinaryMatrix:
    tokens = list(_tokenize(text))
    if not tokens or tokens[0][0].upper() != "#NEXUS":
        raise ParseError("missing #NEXUS header", line=tokens[0][1] if tokens else 1)
    ntax = nchar = None
    char_labels: list[str] | None = None
    taxa: list[str] = []
    rows: list[str] = []
    charsets: dict[str, list[int]] = {}
    block = None
    saw_data = False
    for cmd in _split_commands(tokens[1:]):
        if not cmd:
            continue
        head, line = cmd[0][0].upper(), cmd[0][1]
        if head == "BEGIN":
            if len(cmd) < 2:
                raise ParseError("BEGIN without block name", line=line)
            block = cmd[1][0].upper()
            saw_data |= block in ("DATA", "CHARACTERS")
            continue
        if head in ("END", "ENDBLOCK"):
            block = None
            continue
        if block is None:
            raise ParseError(f"command {head} outside a block", line=line)
        if block in ("DATA", "CHARACTERS"):
            if head == "DIMENSIONS":
                for key, val in _keyvals(cmd[1:]):
                    try:
                        if key == "NTAX":
                            ntax = int(val)
                        elif key == "NCHAR":
                            nchar = int(val)
                    except ValueError:
                        raise ParseError(f"non-integer {key}", line=line) from None
            elif head == "FORMAT":
                for key, val in _keyvals(cmd[1:]):
                    if key == "DATATYPE" and val.upper() != "STANDARD":
                        raise ParseError(f"unsupported DATATYPE {val}", line=line)
            elif head == "CHARLABELS":
                char_labels = [_unquote(t) for t, _ in cmd[1:]]
            elif head == "MATRIX":
                if nchar is None or ntax is None:
                    raise ParseError("MATRIX before DIMENSIONS", line=line)
                by_line: dict[int, list[str]] = {}
                for tok, ln in cmd[1:]:
                    by_line.setdefault(ln, []).append(tok)
                for ln, toks in by_line.items():
                    label = _unquote(toks[0])
                    states = "".join(toks[1:]).replace("-", MISSING)
                    bad = set(states) - {"0", "1", MISSING}
                    if bad:
                        raise ParseError(
                            f"illegal state {sorted(bad)[0]!r} for taxon {label!r}", line=ln
                        )
                    if len(states) != nchar:
                        raise ParseError(
                            f"taxon {label!r} has {len(states)} states, NCHAR={nchar}", line=ln
                        )
                    taxa.append(label)
                    rows.append(states)
                if len(taxa) != ntax:
                    raise ParseError(f"matrix has {len(taxa)} taxa, NTAX={ntax}", line=line)
        elif block in ("SETS", "ASSUMPTIONS") and head == "CHARSET":
            if len(cmd) < 4 or cmd[2][0] != "=":
                raise ParseError("malformed CHARSET", line=line)
            name = _unquote(cmd[1][0]).lower()
            charsets[name] = _expand_ranges([t for t, _ in cmd[3:]], nchar or 0, line)
    if block is not None:
        raise ParseError(f"unterminated {block} block", line=tokens[-1][1])
    if not saw_data or nchar is None:
        raise ParseError("no DATA block with DIMENSIONS found", line=tokens[-1][1])
    if not rows and ntax:
        raise ParseError("no MATRIX found", line=tokens[-1][1])
    if char_labels is None:
        char_labels = [str(j + 1) for j in range(nchar)]
    elif len(char_labels) != nchar:
        raise ParseError(f"{len(char_labels)} CHARLABELS for NCHAR={nchar}", line=tokens[-1][1])
    provenance = ["cognate"] * nchar
    for name, idx in charsets.items():
        if name in PROVENANCES:
            for j in idx:
                provenance[j - 1] = name
    try:
        return BinaryMatrix(taxa, char_labels, rows, provenance)
    except ValidationError as exc:
        raise ParseError(str(exc)) from exc


def _keyvals(cmd):
    toks = [t for t, _ in cmd]
    i = 0
    while i < len(toks):
        key = toks[i].upper()
        if i + 2 < len(toks) and toks[i + 1] == "=":
            yield key, toks[i + 2].strip('"')
            i += 3
        else:
            yield key, ""
            i += 1
