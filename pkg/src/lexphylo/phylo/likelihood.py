"""Felsenstein pruning under the binary CTMC with discrete Gamma rates.

Partials are stored as arrays of shape ``(2, k, n_patterns)``: state first,
then rate category, then site pattern. For the binary chain the transition
step has a closed form: with ``s = pi0*m0 + pi1*m1`` and ``d = m0 - m1``,
``P(t) m = (s + pi1*e*d, s - pi0*e*d)`` where ``e = exp(-mu*r*t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..encode import MISSING, BinaryMatrix
from ..errors import ValidationError
from .model import BinaryCTMC, GammaRates
from .tree import Tree
from .unrooted import UnrootedTree

_TIP = {"0": (1.0, 0.0), "1": (0.0, 1.0), MISSING: (1.0, 1.0)}


@dataclass
class PatternData:
    """Site patterns of a binary matrix with multiplicities.

    With ``conditioned=True`` two zero-weight constant patterns (all 0, all 1)
    are appended so the likelihood can be conditioned on variability.
    """

    taxa: list[str]
    tips: np.ndarray  # (n_taxa, 2, n_patterns)
    weights: np.ndarray
    conditioned: bool = False

    @classmethod
    def from_matrix(cls, matrix: BinaryMatrix, conditioned: bool = False) -> "PatternData":
        counts: dict[str, int] = {}
        for j in range(matrix.nchar):
            col = matrix.column(j)
            counts[col] = counts.get(col, 0) + 1
        columns = list(counts)
        weights = [counts[c] for c in columns]
        if conditioned:
            columns += ["0" * matrix.ntax, "1" * matrix.ntax]
            weights += [0, 0]
        tips = np.zeros((matrix.ntax, 2, len(columns)))
        for p, col in enumerate(columns):
            for i, state in enumerate(col):
                tips[i, :, p] = _TIP[state]
        return cls(list(matrix.taxa), tips, np.asarray(weights, dtype=float), conditioned)

    @property
    def n_patterns(self) -> int:
        return len(self.weights)

    def tip(self, taxon: str) -> np.ndarray:
        try:
            i = self.taxa.index(taxon)
        except ValueError:
            return np.ones((2, 1, self.n_patterns))
        return self.tips[i][:, None, :]


def _decay(model: BinaryCTMC, gamma: GammaRates, t: float) -> np.ndarray:
    return np.exp(-model.mu * t * np.asarray(gamma.rates))[:, None]


def propagate(m: np.ndarray, e: np.ndarray, pi0: float, pi1: float) -> np.ndarray:
    """Apply the transition matrix (decay factors ``e``, shape (k, 1)) to partial ``m``."""
    m0, m1 = m[0], m[1]
    s = pi0 * m0 + pi1 * m1
    d = e * (m0 - m1)
    out = np.empty((2,) + d.shape)
    np.add(s, pi1 * d, out=out[0])
    np.subtract(s, pi0 * d, out=out[1])
    return out


def _site_logs(site_lik: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(site_lik, 1e-300))


def _total(data: PatternData, site_lik: np.ndarray) -> float:
    """Weighted log-likelihood from per-pattern likelihoods (averaged over categories)."""
    logs = _site_logs(site_lik)
    total = float(np.dot(data.weights, logs))
    if data.conditioned:
        constant = site_lik[-2] + site_lik[-1]
        total -= data.weights.sum() * float(np.log(max(1.0 - constant, 1e-300)))
    return total


def log_likelihood(
    tree: Tree,
    matrix: BinaryMatrix | PatternData,
    model: BinaryCTMC,
    gamma: GammaRates,
    conditioned: bool = False,
) -> float:
    """Log-likelihood of the matrix on a (rooted or unrooted) tree by pruning from its root."""
    data = matrix if isinstance(matrix, PatternData) else PatternData.from_matrix(matrix, conditioned)
    leaves = set(tree.leaf_names())
    absent = [t for t in data.taxa if t not in leaves]
    if absent:
        raise ValidationError(f"taxa {absent} are not leaves of the tree")
    pi0, pi1 = model.pi0, model.pi1
    partial: dict[int, np.ndarray] = {}
    for node in tree.postorder():
        if node.is_leaf():
            cur = data.tip(node.name)
        else:
            cur = None
            for child in node.children:
                if child.length is None:
                    raise ValidationError("every branch needs a length")
                msg = propagate(partial.pop(id(child)), _decay(model, gamma, child.length), pi0, pi1)
                cur = msg if cur is None else cur * msg
        partial[id(node)] = cur
    root = partial[id(tree.root)]
    site_lik = (pi0 * root[0] + pi1 * root[1]).mean(axis=0)
    if site_lik.ndim == 0 or site_lik.shape[0] != data.n_patterns:
        site_lik = np.broadcast_to(site_lik, (data.n_patterns,))
    return _total(data, site_lik)


class LikelihoodEngine:
    """Cached directional partials on an unrooted tree.

    ``msg(u, v)`` is the conditional likelihood at ``u`` of the subtree on
    ``u``'s side of edge (u, v). Changing an edge length or the topology
    invalidates exactly the messages whose subtree contains the edge.
    """

    def __init__(self, topo: UnrootedTree, data: PatternData, model: BinaryCTMC, gamma: GammaRates):
        absent = set(data.taxa) - set(topo.taxa)
        if absent:
            raise ValidationError(f"taxa {sorted(absent)} are not leaves of the tree")
        self.topo = topo
        self.data = data
        self.model = model
        self.gamma = gamma
        self._rates = np.asarray(gamma.rates)[:, None]
        self._tips = [data.tip(t) for t in topo.taxa]
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    # -- state changes --------------------------------------------------------

    def set_model(self, model: BinaryCTMC | None = None, gamma: GammaRates | None = None) -> None:
        if model is not None:
            self.model = model
        if gamma is not None:
            self.gamma = gamma
            self._rates = np.asarray(gamma.rates)[:, None]
        self._cache.clear()

    def _invalidate_outward(self, a: int, prev: int) -> None:
        stack = [(a, prev)]
        while stack:
            a, prev = stack.pop()
            for b in self.topo.adj[a]:
                if b != prev and self._cache.pop((a, b), None) is not None:
                    stack.append((b, a))

    def invalidate_edge(self, u: int, v: int) -> None:
        self._invalidate_outward(u, v)
        self._invalidate_outward(v, u)

    def set_length(self, u: int, v: int, t: float) -> None:
        self.topo.set_length(u, v, t)
        self.invalidate_edge(u, v)

    def swap(self, u: int, b: int, v: int, c: int) -> None:
        # messages that cross the (u, v) neighborhood become stale
        for x, y in ((u, b), (v, c), (u, v)):
            self.invalidate_edge(x, y)
        self.topo.swap(u, b, v, c)
        for x, y in ((u, c), (v, b), (u, v)):
            self.invalidate_edge(x, y)

    # -- evaluation -------------------------------------------------------------

    def decay(self, t: float) -> np.ndarray:
        return np.exp(-self.model.mu * t * self._rates)

    def msg(self, u: int, v: int) -> np.ndarray:
        cached = self._cache.get((u, v))
        if cached is not None:
            return cached
        # iterative post-order to avoid deep recursion on large trees
        stack = [(u, v, False)]
        while stack:
            a, b, ready = stack.pop()
            if (a, b) in self._cache:
                continue
            if self.topo.is_leaf(a):
                self._cache[(a, b)] = self._tips[a]
                continue
            kids = [w for w in self.topo.adj[a] if w != b]
            if not ready:
                stack.append((a, b, True))
                stack.extend((w, a, False) for w in kids if (w, a) not in self._cache)
                continue
            pi0, pi1 = self.model.pi0, self.model.pi1
            out = None
            for w in kids:
                m = propagate(self._cache[(w, a)], self.decay(self.topo.length(a, w)), pi0, pi1)
                if out is None:
                    out = m
                else:
                    out *= m
            self._cache[(a, b)] = out
        return self._cache[(u, v)]

    def edge_terms(self, u: int, v: int) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) such that the site likelihood on edge (u, v) is X + e(t) @ Y.

        X is already averaged over rate categories; Y keeps one row per
        category, pre-divided by the category count.
        """
        a, b = self.msg(u, v), self.msg(v, u)
        pi0, pi1 = self.model.pi0, self.model.pi1
        k = self._rates.shape[0]
        x = (pi0 * a[0] + pi1 * a[1]) * (pi0 * b[0] + pi1 * b[1])
        y = (pi0 * pi1 / k) * (a[0] - a[1]) * (b[0] - b[1])
        x = np.broadcast_to(x, (k, x.shape[-1])).mean(axis=0)
        y = np.broadcast_to(y, (k, y.shape[-1]))
        return x, y

    def edge_loglik(self, terms, t: float) -> float:
        x, y = terms
        return _total(self.data, x + np.exp(-self.model.mu * t * self._rates[:, 0]) @ y)

    def loglik(self) -> float:
        u = 0
        v = self.topo.adj[0][0]
        return self.edge_loglik(self.edge_terms(u, v), self.topo.length(u, v))

    def site_likelihoods(self) -> np.ndarray:
        u, v = 0, self.topo.adj[0][0]
        x, y = self.edge_terms(u, v)
        return x + np.exp(-self.model.mu * self.topo.length(u, v) * self._rates[:, 0]) @ y
