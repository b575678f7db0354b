"""Correspondence sites and greedy grouping into sound-correspondence patterns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .align import GAP, Alignment


@dataclass(frozen=True)
class Site:
    source: tuple[tuple[str, str], int]
    assignment: Mapping[str, str]
    concept: str

    def __len__(self):
        return len(self.assignment)


@dataclass
class Pattern:
    id: int
    assignment: dict[str, str] = field(default_factory=dict)
    members: list[Site] = field(default_factory=list)

    @property
    def sources(self) -> list[tuple[tuple[str, str], int]]:
        return [s.source for s in self.members]

    @property
    def concepts(self) -> set[str]:
        return {s.concept for s in self.members}

    def add(self, site: Site) -> None:
        self.members.append(site)
        self.assignment.update(site.assignment)


def extract_sites(alignments: Iterable[Alignment]) -> list[Site]:
    sites = []
    for aln in alignments:
        for col in range(aln.width):
            assignment = {lang: row[col] for lang, row in aln.rows}
            if all(v == GAP for v in assignment.values()):
                continue
            sites.append(Site((aln.cognate_key, col), assignment, aln.cognate_key[0]))
    return sites


def site_compatible(site: Site | Mapping[str, str], pattern: Pattern | Mapping[str, str]) -> bool:
    """True iff no language shared by both maps is assigned different sounds."""
    a = site.assignment if isinstance(site, Site) else site
    b = pattern.assignment if isinstance(pattern, Pattern) else pattern
    if len(b) < len(a):
        a, b = b, a
    return all(b.get(lang, sound) == sound for lang, sound in a.items())


def detect_patterns(sites: Sequence[Site]) -> list[Pattern]:
    """Greedy compatibility clustering.

    Sites are visited largest-first (stable on extraction order); each joins
    the first compatible pattern when patterns are ranked by member count
    (descending) then id, otherwise opens a new pattern.
    """
    order = sorted(range(len(sites)), key=lambda i: (-len(sites[i].assignment), i))
    patterns: list[Pattern] = []
    for i in order:
        site = sites[i]
        ranked = sorted(patterns, key=lambda p: (-len(p.members), p.id))
        for pattern in ranked:
            if site_compatible(site, pattern):
                pattern.add(site)
                break
        else:
            pattern = Pattern(id=len(patterns))
            pattern.add(site)
            patterns.append(pattern)
    return patterns


def write_patterns(patterns: Iterable[Pattern]) -> str:
    lines = []
    for p in patterns:
        pairs = ",".join(f"{lang}:{sound}" for lang, sound in sorted(p.assignment.items()))
        lines.append(f"{p.id}\t{len(p.members)}\t{pairs}")
    return "\n".join(lines) + ("\n" if lines else "")
