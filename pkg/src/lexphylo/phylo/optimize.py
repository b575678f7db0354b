"""Maximum-likelihood fitting of branch lengths, Gamma shape and frequencies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..encode import BinaryMatrix
from .likelihood import LikelihoodEngine, PatternData
from .model import ALPHA_MAX, ALPHA_MIN, BinaryCTMC, GammaRates, discretize_gamma
from .tree import Tree
from .unrooted import UnrootedTree

MIN_LENGTH = 1e-8
MAX_LENGTH = 10.0
PI1_BOUNDS = (0.001, 0.999)
ALL_PARAMETERS = frozenset({"branch_lengths", "alpha", "frequencies"})


@dataclass(frozen=True)
class FitSettings:
    length_tol: float = 1e-6
    loglik_tol: float = 1e-4
    alpha_tol: float = 1e-5  # on log(alpha)
    pi_tol: float = 1e-6
    max_rounds: int = 50


_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))


def brent_max(
    f, lo: float, hi: float, tol: float = 1e-6, x0: float | None = None, f0: float | None = None,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Bounded Brent maximization (golden section with parabolic steps).

    Same scheme as the classical ``fminbound``; written out here because it is
    called thousands of times per search and the wrapper overhead dominates.
    An interior ``x0`` (with its value ``f0``) replaces the golden-section
    starting point, which saves evaluations when x0 is already close.
    """
    a, b = lo, hi
    if x0 is not None and lo < x0 < hi:
        x = w = v = x0
        fx = fw = fv = -(f(x0) if f0 is None else f0)
    else:
        x = w = v = a + _GOLDEN * (b - a)
        fx = fw = fv = -f(x)
    d = e = 0.0
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        tol1 = 1.5e-8 * abs(x) + tol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            break
        golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            if abs(p) < abs(0.5 * q * e) and q * (a - x) < p < q * (b - x):
                e, d = d, p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if m >= x else -tol1
                golden = False
        if golden:
            e = (b - x) if x < m else (a - x)
            d = _GOLDEN * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        fu = -f(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, -fx


def _maximize(f, lo, hi, x0, f0, tol):
    """Bounded Brent maximization that never returns a point worse than x0."""
    x, fx = brent_max(f, lo, hi, tol, x0, f0)
    if fx > f0:
        return x, fx
    return x0, f0


def optimize_branch(engine: LikelihoodEngine, u: int, v: int, tol: float = 1e-6) -> float:
    terms = engine.edge_terms(u, v)
    t0 = engine.topo.length(u, v)
    f0 = engine.edge_loglik(terms, t0)
    t, f = _maximize(lambda t: engine.edge_loglik(terms, t), MIN_LENGTH, MAX_LENGTH, t0, f0, tol)
    if t != t0:
        engine.set_length(u, v, t)
    return f


def optimize_branches(engine: LikelihoodEngine, edges=None, tol: float = 1e-6) -> float:
    """One sweep of per-branch optimization; returns the final log-likelihood."""
    ll = None
    for u, v in edges if edges is not None else engine.topo.edges():
        ll = optimize_branch(engine, u, v, tol)
    return engine.loglik() if ll is None else ll


def optimize_alpha(engine: LikelihoodEngine, tol: float = 1e-5) -> float:
    g0 = engine.gamma
    f0 = engine.loglik()
    x0 = math.log(min(max(g0.alpha, ALPHA_MIN), ALPHA_MAX))

    def f(log_alpha):
        engine.set_model(gamma=discretize_gamma(math.exp(log_alpha), g0.k))
        return engine.loglik()

    x, fx = _maximize(f, math.log(ALPHA_MIN), math.log(ALPHA_MAX), x0, f0, tol)
    engine.set_model(gamma=g0 if x == x0 else discretize_gamma(math.exp(x), g0.k))
    return fx


def optimize_frequencies(engine: LikelihoodEngine, tol: float = 1e-6) -> float:
    m0 = engine.model
    f0 = engine.loglik()

    def f(pi1):
        engine.set_model(model=BinaryCTMC.from_pi1(pi1))
        return engine.loglik()

    x, fx = _maximize(f, *PI1_BOUNDS, m0.pi1, f0, tol)
    engine.set_model(model=m0 if x == m0.pi1 else BinaryCTMC.from_pi1(x))
    return fx


def fit_engine(
    engine: LikelihoodEngine,
    optimize=ALL_PARAMETERS,
    settings: FitSettings = FitSettings(),
    max_rounds: int | None = None,
) -> float:
    """Coordinate ascent until a full round gains less than ``loglik_tol``."""
    optimize = frozenset(optimize)
    ll = engine.loglik()
    rounds = settings.max_rounds if max_rounds is None else max_rounds
    for _ in range(rounds):
        start = ll
        if "branch_lengths" in optimize:
            ll = optimize_branches(engine, tol=settings.length_tol)
        if "alpha" in optimize and engine.gamma.k > 1:
            ll = optimize_alpha(engine, settings.alpha_tol)
        if "frequencies" in optimize:
            ll = optimize_frequencies(engine, settings.pi_tol)
        if ll - start < settings.loglik_tol:
            break
    return ll


def empirical_pi1(matrix: BinaryMatrix) -> float:
    ones = sum(r.count("1") for r in matrix.rows)
    zeros = sum(r.count("0") for r in matrix.rows)
    if ones + zeros == 0:
        return 0.5
    return float(np.clip(ones / (ones + zeros), *PI1_BOUNDS))


def fit_parameters(
    tree: Tree,
    matrix: BinaryMatrix,
    optimize=ALL_PARAMETERS,
    model: BinaryCTMC | None = None,
    gamma: GammaRates | None = None,
    categories: int = 4,
    conditioned: bool = False,
    settings: FitSettings = FitSettings(),
) -> tuple[Tree, BinaryCTMC, GammaRates, float]:
    """Fit the selected parameters on a fixed topology.

    Missing branch lengths start at 0.1. The returned tree is unrooted (a
    bifurcating root is merged into a single edge).
    """
    model = model or BinaryCTMC.from_pi1(empirical_pi1(matrix))
    gamma = gamma or discretize_gamma(1.0, categories)
    data = PatternData.from_matrix(matrix, conditioned)
    topo = UnrootedTree.from_tree(tree, taxa=_leaf_order(tree, matrix))
    engine = LikelihoodEngine(topo, data, model, gamma)
    ll = fit_engine(engine, optimize, settings)
    return topo.to_tree(), engine.model, engine.gamma, ll


def _leaf_order(tree: Tree, matrix: BinaryMatrix) -> list[str]:
    names = tree.leaf_names()
    first = [t for t in matrix.taxa if t in names]
    return first + [n for n in names if n not in set(first)]
