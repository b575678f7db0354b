"""Strict-clock Bayesian MCMC over rooted trees under the binary CTMC with Gamma rates.

Priors (log densities are reported up to an additive constant):

* rooted topology uniform; given the root age, the other internal ages are
  uniform subject to the ordering the topology imposes. The joint density is
  ``m! / (R(top) * root**m)`` with ``m = n - 2`` and ``R`` the number of
  rankings of the topology, which keeps the topology marginal uniform;
* root age ~ Exponential(1), clock rate ~ Exponential(1);
* pi ~ Dirichlet(1, 1), i.e. pi1 uniform on (0, 1);
* alpha ~ Uniform(0.01, 100) or Exponential(1) truncated to the same range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..encode import BinaryMatrix
from ..errors import ValidationError
from .likelihood import PatternData, _total, propagate
from .model import BinaryCTMC, discretize_gamma
from .tree import Node, Tree, write_newick

ALPHA_BOUNDS = (0.01, 100.0)
MOVES = ("narrow", "slide", "tree_scale", "rate_scale", "alpha", "pi1")


@dataclass(frozen=True)
class McmcConfig:
    generations_max: int = 1_000_000
    sample_every: int = 1000
    burnin_fraction: float = 0.25
    asdsf_target: float = 0.01
    runs: int = 2
    alpha_prior: str = "uniform"  # or "exponential"
    seed: int = 0
    categories: int = 4
    prior_only: bool = False
    # convergence is only checked once every run holds this many samples
    min_samples: int = 20
    n_posterior: int = 1000
    alpha_windows: tuple[float, ...] = (0.5, 5.0, 50.0)
    pi1_windows: tuple[float, ...] = (0.02, 0.2)
    # scale moves multiply by exp(lambda * (u - 0.5)), lambda drawn from this mixture
    scale_tunings: tuple[float, ...] = (0.3, 4.0)
    check_convergence: bool = True

    def __post_init__(self):
        if not 0 < self.burnin_fraction < 1:
            raise ValidationError("burnin_fraction must be in (0, 1)")
        if self.sample_every < 1:
            raise ValidationError("sample_every must be at least 1")
        if self.runs < 1:
            raise ValidationError("need at least one run")
        if self.alpha_prior not in ("uniform", "exponential"):
            raise ValidationError(f"unknown alpha prior {self.alpha_prior!r}")
        if self.generations_max < 1:
            raise ValidationError("generations_max must be positive")


class ClockTree:
    """Rooted binary clock tree: leaves 0..n-1 at age 0, internal nodes n..2n-2."""

    def __init__(self, taxa, parent, children, age):
        self.taxa = list(taxa)
        self.parent = parent
        self.children = children
        self.age = age
        self.root = next(i for i, p in enumerate(parent) if p < 0)

    @property
    def n(self) -> int:
        return len(self.taxa)

    def copy(self) -> "ClockTree":
        return ClockTree(self.taxa, list(self.parent), [list(c) for c in self.children], list(self.age))

    @classmethod
    def random(cls, taxa, rng, root_age: float = 1.0) -> "ClockTree":
        """Random coalescence order with evenly spaced internal ages."""
        n = len(taxa)
        parent = [-1] * (2 * n - 1)
        children = [[] for _ in range(2 * n - 1)]
        age = [0.0] * (2 * n - 1)
        active = list(range(n))
        for k, node in enumerate(range(n, 2 * n - 1)):
            i, j = sorted(rng.choice(len(active), size=2, replace=False), reverse=True)
            a, b = active.pop(i), active.pop(j)
            children[node] = [b, a]
            parent[a] = parent[b] = node
            age[node] = root_age * (k + 1) / (n - 1)
            active.append(node)
        return cls(taxa, parent, children, age)

    def internal_by_age(self) -> list[int]:
        return sorted(range(self.n, 2 * self.n - 1), key=lambda u: self.age[u])

    def log_rankings(self) -> float:
        """log of the number of age orderings compatible with the topology."""
        size = [0] * len(self.parent)
        total = 0.0
        for u in self.internal_by_age():
            size[u] = 1 + sum(size[c] for c in self.children[u])
            total -= math.log(size[u])
        return total + math.lgamma(self.n)

    def to_tree(self, rate: float = 1.0) -> Tree:
        """Rooted tree with branch lengths age difference times ``rate``."""
        nodes = [Node(self.taxa[u] if u < self.n else None, age=self.age[u]) for u in range(len(self.parent))]
        for u in range(self.n, len(self.parent)):
            for c in self.children[u]:
                nodes[c].length = (self.age[u] - self.age[c]) * rate
                nodes[u].add_child(nodes[c])
        return Tree(nodes[self.root], rooted=True)


@dataclass
class State:
    tree: ClockTree
    rate: float
    alpha: float
    pi1: float


@dataclass
class Sample:
    generation: int
    loglik: float
    log_prior: float
    alpha: float
    pi1: float
    rate: float
    root_age: float
    tree: Tree
    splits: set = field(repr=False, default_factory=set)

    @property
    def log_posterior(self) -> float:
        return self.loglik + self.log_prior


class _Likelihood:
    """Pruning on a clock tree with per-node partial caching."""

    def __init__(self, data: PatternData, taxa, categories: int):
        self.data = data
        self.k = categories
        self.tips = [data.tip(t) for t in taxa]
        self.partials: dict[int, np.ndarray] = {}
        self.gamma = None
        self.model = None

    def set_parameters(self, alpha: float, pi1: float) -> None:
        if self.gamma is None or self.gamma.alpha != alpha:
            self.gamma = discretize_gamma(alpha, self.k)
            self.rates = np.asarray(self.gamma.rates)[:, None]
        if self.model is None or self.model.pi1 != pi1:
            self.model = BinaryCTMC.from_pi1(pi1)

    def compute(self, state: State, dirty: set[int] | None) -> float:
        """Log-likelihood; ``dirty`` lists internal nodes to recompute (None = all)."""
        t = state.tree
        self.set_parameters(state.alpha, state.pi1)
        pi0, pi1, mu = self.model.pi0, self.model.pi1, self.model.mu
        for u in t.internal_by_age():
            if dirty is not None and u not in dirty and u in self.partials:
                continue
            out = None
            for c in t.children[u]:
                m = self.tips[c] if c < t.n else self.partials[c]
                e = np.exp(-mu * state.rate * (t.age[u] - t.age[c]) * self.rates)
                p = propagate(m, e, pi0, pi1)
                if out is None:
                    out = p
                else:
                    out *= p
            self.partials[u] = out
            if dirty is not None and t.parent[u] >= 0:
                dirty.add(t.parent[u])
        root = self.partials[t.root]
        return _total(self.data, (pi0 * root[0] + pi1 * root[1]).mean(axis=0))


def log_prior(state: State, config: McmcConfig) -> float:
    t = state.tree
    root = t.age[t.root]
    m = t.n - 2
    lp = -m * math.log(root) - t.log_rankings() - root - state.rate
    lo, hi = ALPHA_BOUNDS
    if not (lo <= state.alpha <= hi and 0 < state.pi1 < 1):
        return -math.inf
    if config.alpha_prior == "exponential":
        lp -= state.alpha
    return lp


def _reflect(x: float, lo: float, hi: float) -> float:
    width = hi - lo
    y = (x - lo) % (2 * width)
    return lo + (y if y <= width else 2 * width - y)


def _eligible_narrow(t: ClockTree) -> list[int]:
    """Non-root internal nodes whose sibling is younger than themselves."""
    out = []
    for u in range(t.n, 2 * t.n - 1):
        p = t.parent[u]
        if p < 0:
            continue
        sib = t.children[p][0] if t.children[p][1] == u else t.children[p][1]
        if t.age[sib] < t.age[u]:
            out.append(u)
    return out


class Chain:
    """One Metropolis-Hastings chain. Moves are picked uniformly at random."""

    def __init__(self, data: PatternData | None, taxa, config: McmcConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.state = State(ClockTree.random(taxa, rng), 1.0, 1.0, 0.5)
        self.lik = None if config.prior_only else _Likelihood(data, taxa, config.categories)
        self.loglik = self._loglik(self.state, None)
        self.log_prior = log_prior(self.state, config)
        self.proposed = {m: 0 for m in MOVES}
        self.accepted = {m: 0 for m in MOVES}

    def _loglik(self, state: State, dirty) -> float:
        return 0.0 if self.lik is None else self.lik.compute(state, dirty)

    def _scale(self) -> float:
        tunings = self.config.scale_tunings
        lam = tunings[int(self.rng.integers(len(tunings)))]
        return math.exp(lam * (self.rng.random() - 0.5))

    def propose(self, move: str):
        """Returns (new state, log Hastings ratio, dirty internal nodes or None for all)."""
        rng = self.rng
        s = self.state
        t = s.tree.copy()
        new = State(t, s.rate, s.alpha, s.pi1)
        if move == "narrow":
            before = _eligible_narrow(t)
            u = before[int(rng.integers(len(before)))]
            p = t.parent[u]
            iu = t.children[p].index(u)
            sib = t.children[p][1 - iu]
            ic = int(rng.integers(2))
            c = t.children[u][ic]
            t.children[p][1 - iu] = c
            t.children[u][ic] = sib
            t.parent[c], t.parent[sib] = p, u
            after = _eligible_narrow(t)
            return new, math.log(len(before) / len(after)), {u, p}
        if move == "slide":
            internal = [u for u in range(t.n, 2 * t.n - 1) if u != t.root]
            if not internal:
                return new, 0.0, set()
            u = internal[int(rng.integers(len(internal)))]
            lo = max(t.age[c] for c in t.children[u])
            t.age[u] = lo + rng.random() * (t.age[t.parent[u]] - lo)
            return new, 0.0, {u}
        if move == "tree_scale":
            f = self._scale()
            for u in range(t.n, 2 * t.n - 1):
                t.age[u] *= f
            # Jacobian of scaling the n - 1 internal ages
            return new, (t.n - 1) * math.log(f), None
        if move == "rate_scale":
            f = self._scale()
            new.rate = s.rate * f
            return new, math.log(f), None
        if move == "alpha":
            w = self.config.alpha_windows[int(rng.integers(len(self.config.alpha_windows)))]
            new.alpha = _reflect(s.alpha + w * (rng.random() - 0.5) * 2, *ALPHA_BOUNDS)
            return new, 0.0, None
        if move == "pi1":
            w = self.config.pi1_windows[int(rng.integers(len(self.config.pi1_windows)))]
            new.pi1 = _reflect(s.pi1 + w * (rng.random() - 0.5) * 2, 0.0, 1.0)
            return new, 0.0, None
        raise ValueError(move)

    def step(self) -> None:
        move = MOVES[int(self.rng.integers(len(MOVES)))]
        new, log_hr, dirty = self.propose(move)
        self.proposed[move] += 1
        lp = log_prior(new, self.config)
        if lp == -math.inf:
            return
        saved = dict(self.lik.partials) if self.lik is not None else None
        ll = self._loglik(new, None if dirty is None else set(dirty))
        log_ratio = ll - self.loglik + lp - self.log_prior + log_hr
        if log_ratio >= 0 or self.rng.random() < math.exp(log_ratio):
            self.state, self.loglik, self.log_prior = new, ll, lp
            self.accepted[move] += 1
        elif self.lik is not None:
            self.lik.partials = saved
            self.lik.set_parameters(self.state.alpha, self.state.pi1)

    def sample(self, generation: int) -> Sample:
        from ..eval import tree_splits

        s = self.state
        tree = s.tree.to_tree(s.rate)
        return Sample(
            generation,
            self.loglik,
            self.log_prior,
            s.alpha,
            s.pi1,
            s.rate,
            s.tree.age[s.tree.root],
            tree,
            tree_splits(tree),
        )


@dataclass
class McmcResult:
    runs: list[list[Sample]]
    converged: bool
    asdsf: float
    generations: int
    posterior_trees: list[Tree]
    acceptance: list[dict[str, float]]

    def retained(self, burnin_fraction: float = 0.25) -> list[list[Sample]]:
        return [_retained(run, burnin_fraction) for run in self.runs]


def _retained(run: list[Sample], fraction: float) -> list[Sample]:
    return run[int(len(run) * fraction):]


def mcmc_run(matrix: BinaryMatrix, config: McmcConfig = McmcConfig()) -> McmcResult:
    """Run ``config.runs`` chains in lockstep until ASDSF < target or generations_max.

    Every chain owns a child seed of ``config.seed``; one extra child seed
    drives the final draw of posterior trees.
    """
    from ..eval import asdsf_from_splits

    if matrix.ntax < 4:
        raise ValidationError("MCMC needs at least 4 taxa")
    data = None if config.prior_only else PatternData.from_matrix(matrix)
    streams = np.random.SeedSequence(config.seed).spawn(config.runs + 1)
    chains = [Chain(data, matrix.taxa, config, np.random.default_rng(s)) for s in streams[:-1]]
    runs: list[list[Sample]] = [[] for _ in chains]
    value = float("nan")
    converged = False
    generation = 0
    while generation < config.generations_max:
        generation += 1
        for chain in chains:
            chain.step()
        if generation % config.sample_every:
            continue
        for chain, run in zip(chains, runs):
            run.append(chain.sample(generation))
        if config.check_convergence and config.runs > 1 and len(runs[0]) >= config.min_samples:
            value = asdsf_from_splits(
                [[s.splits for s in _retained(run, config.burnin_fraction)] for run in runs]
            )
            if value < config.asdsf_target:
                converged = True
                break
    if config.runs > 1 and all(runs) and not converged:
        value = asdsf_from_splits([[s.splits for s in _retained(run, config.burnin_fraction)] for run in runs])
    pool = [s.tree for run in runs for s in _retained(run, config.burnin_fraction)]
    draw_rng = np.random.default_rng(streams[-1])
    posterior = []
    if pool:
        replace = len(pool) < config.n_posterior
        idx = draw_rng.choice(len(pool), size=config.n_posterior, replace=replace)
        posterior = [pool[i] for i in idx]
    acceptance = [
        {m: c.accepted[m] / c.proposed[m] if c.proposed[m] else float("nan") for m in MOVES}
        for c in chains
    ]
    return McmcResult(runs, converged, value, generation, posterior, acceptance)


def write_trace(samples: list[Sample]) -> str:
    lines = ["generation\tlogL\tlogPrior\talpha\tpi1\trate\troot_age"]
    for s in samples:
        lines.append(
            f"{s.generation}\t{s.loglik:.6f}\t{s.log_prior:.6f}\t{s.alpha:.6f}\t{s.pi1:.6f}"
            f"\t{s.rate:.6f}\t{s.root_age:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_trees(trees: list[Tree]) -> str:
    return "".join(write_newick(t) + "\n" for t in trees)
