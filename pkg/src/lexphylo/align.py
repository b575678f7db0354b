"""Phonetic alignment of cognate sets and gap-based column trimming.

Alignments are scored on coarse sound classes with a linear gap penalty.
Multiple alignments are built progressively along an average-linkage guide
tree; profiles are compared with a sum-of-pairs column score.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Sequence

from .errors import FormatError, ValidationError

GAP = "-"


@functools.lru_cache(maxsize=1)
def default_class_map() -> dict[str, str]:
    text = resources.files("lexphylo").joinpath("data/sound_classes.tsv").read_text("utf-8")
    table = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        symbol, cls = line.split("\t")
        table[symbol] = cls
    return table


@dataclass(frozen=True)
class ScoringScheme:
    match: float = 1.0
    mismatch: float = -1.0
    gap: float = -1.0
    class_map: dict[str, str] = field(default_factory=default_class_map, hash=False)

    def __post_init__(self):
        if not self.match > self.mismatch:
            raise ValueError("match score must exceed mismatch score")
        if not self.gap < 0:
            raise ValueError("gap penalty must be negative")

    def sound_class(self, token: str) -> str:
        cls = self.class_map.get(token)
        if cls is None and token:
            cls = self.class_map.get(token[0])
        return token if cls is None else cls

    def pair(self, a: str, b: str) -> float:
        if a == GAP and b == GAP:
            return 0.0
        if a == GAP or b == GAP:
            return self.gap
        return self.match if self.sound_class(a) == self.sound_class(b) else self.mismatch


@dataclass(frozen=True)
class Alignment:
    cognate_key: tuple[str, str]
    rows: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        widths = {len(r) for _, r in self.rows}
        if len(widths) > 1:
            raise ValidationError(f"ragged alignment for {self.cognate_key}")
        for col in range(self.width):
            if all(r[col] == GAP for _, r in self.rows):
                raise ValidationError(f"all-gap column {col} in {self.cognate_key}")

    @property
    def width(self) -> int:
        return len(self.rows[0][1]) if self.rows else 0

    @property
    def languages(self) -> list[str]:
        return [lang for lang, _ in self.rows]

    def column(self, index: int) -> list[str]:
        return [r[index] for _, r in self.rows]

    def gap_fraction(self, index: int) -> float:
        col = self.column(index)
        return col.count(GAP) / len(col)


def _profile_align(
    prof_a: Sequence[Sequence[str]],
    prof_b: Sequence[Sequence[str]],
    scheme: ScoringScheme,
) -> tuple[list[list[str]], list[list[str]], float]:
    """Needleman-Wunsch over two profiles (lists of equal-width rows).

    Column pairs are scored by the mean pairwise token score. Traceback
    prefers diagonal, then up (column of A against gaps), then left.
    """
    cols_a = list(zip(*prof_a)) if prof_a and prof_a[0] else []
    cols_b = list(zip(*prof_b)) if prof_b and prof_b[0] else []
    n, m = len(cols_a), len(cols_b)

    def col_score(ca, cb):
        return sum(scheme.pair(x, y) for x in ca for y in cb) / (len(ca) * len(cb))

    def gap_score(col):
        return sum(scheme.pair(x, GAP) for x in col) / len(col)

    gap_a = [gap_score(c) for c in cols_a]
    gap_b = [gap_score(c) for c in cols_b]

    score = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        score[i][0] = score[i - 1][0] + gap_a[i - 1]
    for j in range(1, m + 1):
        score[0][j] = score[0][j - 1] + gap_b[j - 1]
    diag = [[0.0] * m for _ in range(n)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d = col_score(cols_a[i - 1], cols_b[j - 1])
            diag[i - 1][j - 1] = d
            score[i][j] = max(
                score[i - 1][j - 1] + d,
                score[i - 1][j] + gap_a[i - 1],
                score[i][j - 1] + gap_b[j - 1],
            )

    eps = 1e-9
    out_a: list[tuple[str, ...]] = []
    out_b: list[tuple[str, ...]] = []
    blank_a = (GAP,) * len(prof_a)
    blank_b = (GAP,) * len(prof_b)
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and abs(score[i][j] - (score[i - 1][j - 1] + diag[i - 1][j - 1])) < eps:
            out_a.append(cols_a[i - 1])
            out_b.append(cols_b[j - 1])
            i, j = i - 1, j - 1
        elif i > 0 and abs(score[i][j] - (score[i - 1][j] + gap_a[i - 1])) < eps:
            out_a.append(cols_a[i - 1])
            out_b.append(blank_b)
            i -= 1
        else:
            out_a.append(blank_a)
            out_b.append(cols_b[j - 1])
            j -= 1
    out_a.reverse()
    out_b.reverse()
    rows_a = [list(r) for r in zip(*out_a)] if out_a else [[] for _ in prof_a]
    rows_b = [list(r) for r in zip(*out_b)] if out_b else [[] for _ in prof_b]
    return rows_a, rows_b, score[n][m]


def pairwise_align(
    seq_a: Sequence[str], seq_b: Sequence[str], scheme: ScoringScheme | None = None
) -> tuple[list[str], list[str], float]:
    """Global alignment of two token sequences with linear gaps."""
    scheme = scheme or ScoringScheme()
    rows_a, rows_b, score = _profile_align([list(seq_a)], [list(seq_b)], scheme)
    return rows_a[0], rows_b[0], score


def alignment_distance(seq_a, seq_b, scheme: ScoringScheme) -> float:
    """1 - normalized score, normalized by the mean of the two self-scores."""
    _, _, s_ab = pairwise_align(seq_a, seq_b, scheme)
    self_total = scheme.match * (len(seq_a) + len(seq_b))
    if self_total == 0:
        return 0.0
    return 1.0 - 2.0 * s_ab / self_total


def guide_order(distances: list[list[float]]) -> list[tuple[int, int]]:
    """Average-linkage merge order.

    Returns (cluster_i, cluster_j) pairs; clusters 0..n-1 are the inputs and
    each merge creates the next cluster id. Ties go to the lowest pair of ids.
    """
    n = len(distances)
    members = {i: [i] for i in range(n)}
    merges = []
    next_id = n
    while len(members) > 1:
        ids = sorted(members)
        best = None
        for x_pos, x in enumerate(ids):
            for y in ids[x_pos + 1 :]:
                mx, my = members[x], members[y]
                d = sum(distances[a][b] for a in mx for b in my) / (len(mx) * len(my))
                if best is None or d < best[0] - 1e-12:
                    best = (d, x, y)
        _, x, y = best
        members[next_id] = members.pop(x) + members.pop(y)
        merges.append((x, y))
        next_id += 1
    return merges


def progressive_msa(
    forms: Sequence[tuple[str, Sequence[str]]],
    scheme: ScoringScheme | None = None,
    cognate_key: tuple[str, str] = ("", ""),
) -> Alignment:
    """Align all forms of one cognate set; one row per language (first synonym wins)."""
    scheme = scheme or ScoringScheme()
    if not forms:
        raise ValidationError("cannot align an empty cognate set")
    seqs: list[tuple[str, list[str]]] = []
    seen = set()
    for lang, tokens in forms:
        if lang in seen:
            continue
        seen.add(lang)
        seqs.append((lang, list(tokens)))

    n = len(seqs)
    profiles: dict[int, tuple[list[int], list[list[str]]]] = {
        i: ([i], [seq]) for i, (_, seq) in enumerate(seqs)
    }
    if n > 1:
        dist = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                dist[i][j] = dist[j][i] = alignment_distance(seqs[i][1], seqs[j][1], scheme)
        next_id = n
        for x, y in guide_order(dist):
            idx_x, rows_x = profiles.pop(x)
            idx_y, rows_y = profiles.pop(y)
            ax, ay, _ = _profile_align(rows_x, rows_y, scheme)
            profiles[next_id] = (idx_x + idx_y, ax + ay)
            next_id += 1
    (order, rows), = profiles.values()
    by_input = dict(zip(order, rows))
    ordered = [by_input[i] for i in range(n)]
    keep = [c for c in range(len(ordered[0])) if any(r[c] != GAP for r in ordered)]
    return Alignment(
        cognate_key=cognate_key,
        rows=tuple(
            (seqs[i][0], tuple(ordered[i][c] for c in keep)) for i in range(n)
        ),
    )


def trim_alignment(alignment: Alignment, tau: float = 0.5) -> Alignment:
    """Drop columns whose gap fraction exceeds ``tau``; never drop all columns."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if alignment.width == 0:
        return alignment
    fractions = [alignment.gap_fraction(c) for c in range(alignment.width)]
    keep = [c for c, f in enumerate(fractions) if f <= tau]
    if not keep:
        keep = [min(range(len(fractions)), key=lambda c: (fractions[c], c))]
    if len(keep) == alignment.width:
        return alignment
    rows = tuple((lang, tuple(r[c] for c in keep)) for lang, r in alignment.rows)
    return replace(alignment, rows=rows)


def align_wordlist(wordlist, scheme: ScoringScheme | None = None) -> list[Alignment]:
    """Progressive alignment of every cognate set, in first-appearance order."""
    scheme = scheme or ScoringScheme()
    return [
        progressive_msa([(f.language, f.tokens) for f in forms], scheme, cognate_key=key)
        for key, forms in wordlist.cognate_sets().items()
    ]


def write_alignments(alignments: Sequence[Alignment]) -> str:
    blocks = []
    for aln in alignments:
        lines = [f"# {aln.cognate_key[0]}\t{aln.cognate_key[1]}"]
        lines += [f"{lang}\t{' '.join(row)}" for lang, row in aln.rows]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def read_alignments(text: str) -> list[Alignment]:
    out = []
    key = None
    rows: list[tuple[str, tuple[str, ...]]] = []

    def flush():
        if key is not None and rows:
            out.append(Alignment(key, tuple(rows)))

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        if line.startswith("# "):
            flush()
            parts = line[2:].split("\t")
            if len(parts) != 2:
                raise FormatError(f"line {lineno}: malformed block header")
            key, rows = (parts[0], parts[1]), []
            continue
        if key is None:
            raise FormatError(f"line {lineno}: alignment row before block header")
        lang, _, tokens = line.partition("\t")
        rows.append((lang, tuple(tokens.split())))
    flush()
    return out

