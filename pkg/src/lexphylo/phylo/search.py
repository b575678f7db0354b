"""Starting trees and NNI hill-climbing maximum-likelihood search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..encode import BinaryMatrix
from ..errors import ValidationError
from .likelihood import LikelihoodEngine, PatternData
from .model import BinaryCTMC, GammaRates, discretize_gamma
from .optimize import ALL_PARAMETERS, FitSettings, empirical_pi1, fit_engine, optimize_branch
from .tree import Tree
from .unrooted import UnrootedTree

INITIAL_LENGTH = 0.1


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def fitch_score(topo: UnrootedTree, data: PatternData) -> float:
    """Weighted Fitch parsimony length of the connected part of ``topo``; '?' is {0, 1}."""
    index = {t: i for i, t in enumerate(data.taxa)}

    def tipset(u):
        # bitmask state sets: 1 = {0}, 2 = {1}, 3 = {0, 1}
        i = index.get(topo.taxa[u])
        if i is None:
            return np.full(data.n_patterns, 3, dtype=np.int8)
        return (data.tips[i, 0] > 0).astype(np.int8) | ((data.tips[i, 1] > 0).astype(np.int8) << 1)

    edges = topo.edges()
    if not edges:
        return 0.0
    root = edges[0][0]
    cost = np.zeros(data.n_patterns)
    sets: dict[int, np.ndarray] = {}
    for parent, child in reversed(edges):
        if topo.is_leaf(child):
            sets[child] = tipset(child)
        cur = sets[child]
        if parent in sets:
            inter = sets[parent] & cur
            empty = inter == 0
            cost += empty
            sets[parent] = np.where(empty, sets[parent] | cur, inter)
        else:
            sets[parent] = cur
    # the root is a leaf: reconcile its own state with its subtree
    cost += (sets[root] & tipset(root)) == 0
    return float(np.dot(data.weights, cost))


def _star(order, taxa) -> UnrootedTree:
    topo = UnrootedTree(taxa)
    hub = topo.new_node()
    for leaf in order[:3]:
        topo.connect(hub, leaf, INITIAL_LENGTH)
    return topo


def random_topology(taxa, rng) -> UnrootedTree:
    """Uniform random unrooted binary topology by stepwise random attachment."""
    order = [int(i) for i in rng.permutation(len(taxa))]
    topo = _star(order, taxa)
    for leaf in order[3:]:
        edges = topo.edges()
        u, v = edges[int(rng.integers(len(edges)))]
        topo.insert_leaf(leaf, u, v, INITIAL_LENGTH)
    return topo


def parsimony_topology(data: PatternData, rng) -> UnrootedTree:
    """Randomized stepwise-addition parsimony tree (first best edge wins ties)."""
    taxa = data.taxa
    order = [int(i) for i in rng.permutation(len(taxa))]
    topo = _star(order, taxa)
    for leaf in order[3:]:
        best = None
        for u, v in topo.edges():
            trial = topo.copy()
            trial.insert_leaf(leaf, u, v, INITIAL_LENGTH)
            score = fitch_score(trial, data)
            if best is None or score < best[0]:
                best = (score, u, v)
        topo.insert_leaf(leaf, best[1], best[2], INITIAL_LENGTH)
    return topo


def starting_tree(kind: str, matrix: BinaryMatrix, seed=0) -> Tree:
    if matrix.ntax < 3:
        raise ValidationError("need at least 3 taxa")
    rng = _rng(seed)
    if kind == "random":
        topo = random_topology(matrix.taxa, rng)
    elif kind == "parsimony":
        topo = parsimony_topology(PatternData.from_matrix(matrix), rng)
    else:
        raise ValueError(f"unknown starting tree kind {kind!r}")
    return topo.to_tree()


@dataclass
class SearchResult:
    start: str
    tree: Tree
    loglik: float
    model: BinaryCTMC
    gamma: GammaRates
    trajectory: list[float] = field(default_factory=list)
    start_loglik: float = float("nan")


@dataclass
class MLResult:
    tree: Tree
    loglik: float
    model: BinaryCTMC
    gamma: GammaRates
    results: list[SearchResult]

    @property
    def best(self) -> SearchResult:
        return max(self.results, key=lambda r: r.loglik)


@dataclass(frozen=True)
class SearchSettings:
    categories: int = 4
    conditioned: bool = False
    nni_epsilon: float = 1e-3
    # length tolerance while screening NNI neighbors
    nni_length_tol: float = 1e-4
    max_nni_rounds: int = 1000
    # coordinate-ascent rounds after each accepted NNI; a converged fit follows at the end
    quick_rounds: int = 1
    fit: FitSettings = FitSettings()
    optimize: frozenset = ALL_PARAMETERS


def _nni_local(engine: LikelihoodEngine, u: int, v: int, tol: float) -> float:
    """Optimize the central edge and its four neighbors; returns the log-likelihood."""
    adj = engine.topo.adj
    ll = optimize_branch(engine, u, v, tol)
    for w in list(adj[u]):
        if w != v:
            ll = optimize_branch(engine, u, w, tol)
    for w in list(adj[v]):
        if w != u:
            ll = optimize_branch(engine, v, w, tol)
    return optimize_branch(engine, u, v, tol)


def nni_round(engine: LikelihoodEngine, current: float, settings: SearchSettings):
    """Evaluate every NNI neighbor; returns the best improving move or None."""
    topo = engine.topo
    best = None
    tol = settings.nni_length_tol
    for u, v in topo.internal_edges():
        b = next(w for w in topo.adj[u] if w != v)
        for c in [w for w in topo.adj[v] if w != u]:
            around = [(u, w) for w in topo.adj[u]] + [(v, w) for w in topo.adj[v] if w != u]
            saved = {(x, y): topo.length(x, y) for x, y in around}
            engine.swap(u, b, v, c)
            ll = _nni_local(engine, u, v, tol)
            lengths = {
                (x, y): topo.length(x, y)
                for x, y in [(u, w) for w in topo.adj[u]] + [(v, w) for w in topo.adj[v] if w != u]
            }
            if ll > current + settings.nni_epsilon and (best is None or ll > best[0]):
                best = (ll, u, b, v, c, lengths)
            engine.swap(u, c, v, b)
            for (x, y), t in saved.items():
                if topo.length(x, y) != t:
                    engine.set_length(x, y, t)
    return best


def hill_climb(engine: LikelihoodEngine, settings: SearchSettings) -> list[float]:
    """Apply best improving NNIs until none is left; returns the log-likelihood trajectory.

    Parameters are refit briefly after every accepted move. Once no NNI
    improves, a converged fit is run; if it gains more than the tolerance the
    NNI phase resumes.
    """
    quick = dict(max_rounds=settings.quick_rounds)
    trajectory = [fit_engine(engine, settings.optimize, settings.fit, **quick)]
    for _ in range(settings.max_nni_rounds):
        move = nni_round(engine, trajectory[-1], settings)
        if move is not None:
            _, u, b, v, c, lengths = move
            engine.swap(u, b, v, c)
            for (x, y), t in lengths.items():
                engine.set_length(x, y, t)
            trajectory.append(fit_engine(engine, settings.optimize, settings.fit, **quick))
            continue
        ll = fit_engine(engine, settings.optimize, settings.fit)
        gained = ll - trajectory[-1]
        trajectory.append(ll)
        if gained < settings.fit.loglik_tol:
            break
    return trajectory


def ml_search(
    matrix: BinaryMatrix,
    n_random: int = 10,
    n_parsimony: int = 10,
    seed=0,
    settings: SearchSettings = SearchSettings(),
) -> MLResult:
    """Independent hill-climbing searches from random and parsimony starting trees.

    Each search gets its own child seed, so results do not depend on the
    order in which searches are run.
    """
    if matrix.ntax < 4:
        raise ValidationError("ML search needs at least 4 taxa")
    data = PatternData.from_matrix(matrix, settings.conditioned)
    children = np.random.SeedSequence(seed).spawn(n_random + n_parsimony)
    kinds = ["random"] * n_random + ["parsimony"] * n_parsimony
    results = []
    for kind, child in zip(kinds, children):
        rng = np.random.default_rng(child)
        if kind == "random":
            topo = random_topology(matrix.taxa, rng)
        else:
            topo = parsimony_topology(data, rng)
        engine = LikelihoodEngine(
            topo,
            data,
            BinaryCTMC.from_pi1(empirical_pi1(matrix)),
            discretize_gamma(1.0, settings.categories) if settings.categories > 1 else GammaRates.uniform(),
        )
        start_ll = engine.loglik()
        trajectory = hill_climb(engine, settings)
        results.append(
            SearchResult(
                start=kind,
                tree=topo.to_tree(),
                loglik=trajectory[-1],
                model=engine.model,
                gamma=engine.gamma,
                trajectory=trajectory,
                start_loglik=start_ll,
            )
        )
    best = max(results, key=lambda r: r.loglik)
    return MLResult(best.tree, best.loglik, best.model, best.gamma, results)
