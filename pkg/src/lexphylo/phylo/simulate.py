"""Forward simulation of binary characters under the gain/loss chain."""

from __future__ import annotations

import numpy as np

from ..encode import BinaryMatrix
from .model import BinaryCTMC, GammaRates
from .tree import Tree


def simulate_matrix(
    tree: Tree,
    model: BinaryCTMC,
    gamma: GammaRates,
    n_chars: int,
    missing_fraction: float = 0.0,
    seed: int | np.random.SeedSequence | None = 0,
) -> BinaryMatrix:
    """Simulate ``n_chars`` independent characters; taxa are the tree's leaves in preorder.

    Each character draws a rate category uniformly and a root state from the
    stationary distribution. Cells are then hidden as '?' independently with
    probability ``missing_fraction`` (a fully hidden column keeps its first cell).
    """
    if n_chars < 1:
        raise ValueError("n_chars must be positive")
    rng = np.random.default_rng(seed)
    rates = np.asarray(gamma.rates)[rng.integers(0, gamma.k, size=n_chars)]
    states = {}
    root = tree.root
    states[id(root)] = (rng.random(n_chars) < model.pi1).astype(np.int8)
    for node in tree.preorder():
        if node is root:
            continue
        if node.length is None:
            raise ValueError("simulation needs branch lengths")
        parent = states[id(node.parent)]
        e = np.exp(-model.mu * rates * node.length)
        # P(child = 1 | parent): P01 for parent 0, P11 for parent 1
        p_one = np.where(parent == 1, model.pi1 + model.pi0 * e, model.pi1 * (1.0 - e))
        states[id(node)] = (rng.random(n_chars) < p_one).astype(np.int8)
    leaves = tree.leaves()
    data = np.stack([states[id(leaf)] for leaf in leaves])
    if missing_fraction > 0:
        mask = rng.random(data.shape) < missing_fraction
        mask[0, mask.all(axis=0)] = False
        data = np.where(mask, -1, data)
    return BinaryMatrix.from_array([leaf.name for leaf in leaves], data)
