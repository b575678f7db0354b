"""Tree comparison: splits, ASDSF, quartet topologies and the generalized quartet distance."""

from __future__ import annotations

import enum
import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .phylo.tree import Node, Tree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Split:
    """A non-trivial bipartition keyed by the side that excludes the first taxon (sorted order)."""

    side: frozenset
    taxa: frozenset

    def __post_init__(self):
        if not 1 < len(self.side) < len(self.taxa) - 1:
            raise ValidationError("trivial split")
        if min(self.taxa) in self.side:
            raise ValidationError("split side must exclude the first taxon")

    @classmethod
    def from_side(cls, side: Iterable[str], taxa: Iterable[str]) -> "Split":
        taxa = frozenset(taxa)
        side = frozenset(side)
        if min(taxa) in side:
            side = taxa - side
        return cls(side, taxa)

    @property
    def other(self) -> frozenset:
        return self.taxa - self.side

    def __str__(self):
        return ",".join(sorted(self.other)) + "|" + ",".join(sorted(self.side))


def _clusters(tree: Tree, taxa: frozenset | None = None) -> list[frozenset]:
    """Leaf sets below every node, restricted to ``taxa``."""
    below: dict[int, frozenset] = {}
    out = []
    for node in tree.postorder():
        if node.is_leaf():
            s = frozenset([node.name]) if taxa is None or node.name in taxa else frozenset()
        else:
            s = frozenset().union(*(below.pop(id(c)) for c in node.children))
        below[id(node)] = s
        out.append(s)
    return out


def tree_splits(tree: Tree, taxa: Iterable[str] | None = None) -> set[Split]:
    """Splits of the unrooted view of ``tree``, optionally restricted to a taxon subset."""
    names = frozenset(tree.leaf_names())
    taxa = names if taxa is None else frozenset(taxa)
    if not taxa <= names:
        raise ValidationError(f"taxa {sorted(taxa - names)} are not in the tree")
    if len(taxa) < 4:
        raise ValidationError("splits need at least 4 taxa")
    out = set()
    for cluster in _clusters(tree, taxa):
        if 1 < len(cluster) < len(taxa) - 1:
            out.add(Split.from_side(cluster, taxa))
    return out


def split_frequencies(split_sets: Sequence[set]) -> Counter:
    counts: Counter = Counter()
    for s in split_sets:
        counts.update(s)
    n = len(split_sets)
    return Counter({k: v / n for k, v in counts.items()})


def asdsf_from_splits(runs: Sequence[Sequence[set]], min_freq: float = 0.1) -> float:
    """ASDSF from per-run lists of split sets (see :func:`asdsf`)."""
    if len(runs) < 2:
        raise ValidationError("ASDSF needs at least 2 runs")
    if any(len(r) == 0 for r in runs):
        raise ValidationError("every run needs at least one sample")
    freqs = [split_frequencies(r) for r in runs]
    keys = set().union(*freqs)
    sds = []
    for key in sorted(keys, key=str):
        values = [f.get(key, 0.0) for f in freqs]
        if max(values) >= min_freq:
            sds.append(float(np.std(values, ddof=1)))
    return float(np.mean(sds)) if sds else 0.0


def asdsf(run_samples: Sequence[Sequence[Tree]], min_freq: float = 0.1) -> float:
    """Average standard deviation of split frequencies across runs.

    Only splits reaching ``min_freq`` in at least one run count; the standard
    deviation uses divisor runs - 1.
    """
    if len(run_samples) < 2:
        raise ValidationError("ASDSF needs at least 2 runs")
    taxa = {frozenset(t.leaf_names()) for run in run_samples for t in run}
    if len(taxa) > 1:
        raise ValidationError("all sampled trees must share one taxon set")
    return asdsf_from_splits([[tree_splits(t) for t in run] for run in run_samples], min_freq)


class QuartetTopology(enum.Enum):
    AB_CD = "AB|CD"
    AC_BD = "AC|BD"
    AD_BC = "AD|BC"
    STAR = "STAR"


def _membership(tree: Tree, taxa: Sequence[str]) -> np.ndarray:
    """Boolean matrix (n_splits, n_taxa): which side of each split each taxon is on."""
    index = {t: i for i, t in enumerate(taxa)}
    splits = tree_splits(tree, taxa)
    m = np.zeros((len(splits), len(taxa)), dtype=bool)
    for row, split in enumerate(sorted(splits, key=str)):
        m[row, [index[t] for t in split.side]] = True
    return m


def _quartet_codes(member: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """0 = AB|CD, 1 = AC|BD, 2 = AD|BC, 3 = star for each row of ``quads``."""
    codes = np.full(len(quads), 3, dtype=np.int8)
    if member.shape[0] == 0 or len(quads) == 0:
        return codes
    a, b, c, d = (member[:, quads[:, i]] for i in range(4))  # (n_splits, n_quads)
    for code, (x, y, z, w) in enumerate([(a, b, c, d), (a, c, b, d), (a, d, b, c)]):
        hit = ((x == y) & (z == w) & (x != z)).any(axis=0)
        codes[hit] = code
    return codes


def quartet_topology(tree: Tree, quartet: Sequence[str]) -> QuartetTopology:
    """Induced topology of the four named taxa, in the order given (A, B, C, D)."""
    quartet = list(quartet)
    if len(set(quartet)) != 4:
        raise ValidationError("a quartet needs four distinct taxa")
    names = set(tree.leaf_names())
    absent = [t for t in quartet if t not in names]
    if absent:
        raise ValidationError(f"taxa {absent} are not in the tree")
    member = _membership(tree, quartet)
    code = _quartet_codes(member, np.array([[0, 1, 2, 3]]))[0]
    return list(QuartetTopology)[code]


@dataclass(frozen=True)
class GqdResult:
    distance: float
    butterflies_gold: int
    discordant: int

    def __post_init__(self):
        if self.discordant > self.butterflies_gold:
            raise ValidationError("discordant quartets cannot exceed gold butterflies")


def common_taxa(a: Tree, b: Tree) -> list[str]:
    na, nb = set(a.leaf_names()), set(b.leaf_names())
    common = sorted(na & nb)
    if na != nb:
        log.warning(
            "taxon sets differ; comparing on %d shared taxa (%d and %d only in one tree)",
            len(common), len(na - nb), len(nb - na),
        )
    return common


def gqd(inferred: Tree, gold: Tree) -> GqdResult:
    """Fraction of gold-resolved quartets that the inferred tree resolves differently."""
    taxa = common_taxa(inferred, gold)
    if len(taxa) < 4:
        raise ValidationError(f"need at least 4 shared taxa, got {len(taxa)}")
    quads = np.array(list(itertools.combinations(range(len(taxa)), 4)), dtype=np.intp)
    gold_codes = _quartet_codes(_membership(gold, taxa), quads)
    inferred_codes = _quartet_codes(_membership(inferred, taxa), quads)
    butterflies = gold_codes != 3
    n_butterflies = int(butterflies.sum())
    if n_butterflies == 0:
        raise DomainError("gold tree resolves no quartet; distance is undefined")
    discordant = int((butterflies & (inferred_codes != gold_codes)).sum())
    return GqdResult(discordant / n_butterflies, n_butterflies, discordant)


def posterior_gqd_median(tree_samples: Sequence[Tree], gold: Tree) -> float:
    if not tree_samples:
        raise ValidationError("need at least one tree sample")
    return float(np.median([gqd(t, gold).distance for t in tree_samples]))


def majority_consensus(trees: Sequence[Tree], threshold: float = 0.5) -> Tree:
    """Majority-rule consensus: splits found in more than ``threshold`` of the trees."""
    if not trees:
        raise ValidationError("need at least one tree")
    taxa = sorted(trees[0].leaf_names())
    freqs = split_frequencies([tree_splits(t) for t in trees])
    kept = [s for s, f in freqs.items() if f > threshold]
    # larger clusters first so each cluster nests under the smallest enclosing one
    first = taxa[0]
    clusters = sorted((s.side for s in kept), key=lambda c: (-len(c), sorted(c)))
    root = Node()
    nodes = [(frozenset(taxa) - {first}, root)]
    for cluster in clusters:
        parent = min((n for n in nodes if cluster < n[0]), key=lambda n: len(n[0]))[1]
        node = parent.add_child(Node())
        nodes.append((cluster, node))
    for taxon in taxa:
        if taxon == first:
            root.add_child(Node(taxon))
            continue
        holders = [n for n in nodes if taxon in n[0]]
        min(holders, key=lambda n: len(n[0]))[1].add_child(Node(taxon))
    return Tree(root, rooted=False)


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    character_type: str
    statistic: str
    value: float | str


CHARACTER_TYPES = ("cognates", "patterns", "combined")


def write_report(rows: Iterable[ReportRow]) -> str:
    """Tab-separated report; rows are ordered by dataset, then cognates, patterns, combined."""
    order = {t: i for i, t in enumerate(CHARACTER_TYPES)}
    rows = sorted(
        rows, key=lambda r: (r.dataset, order.get(r.character_type, len(order)), r.character_type)
    )
    lines = ["dataset\tcharacter_type\tstatistic\tvalue"]
    for r in rows:
        value = f"{r.value:.6f}" if isinstance(r.value, float) else str(r.value)
        lines.append(f"{r.dataset}\t{r.character_type}\t{r.statistic}\t{value}")
    return "\n".join(lines) + "\n"
