"""Independent reference implementations used to check the package.

Nothing here imports the code under test except plain data containers, so a
shared bug cannot make an implementation agree with its own oracle.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np
from scipy import integrate, linalg, stats


# --- transition probabilities and Gamma rates ---------------------------------------


def rate_matrix(pi1: float) -> np.ndarray:
    """Binary rate matrix scaled to one expected change per unit time at stationarity."""
    pi0 = 1.0 - pi1
    q = np.array([[-pi1, pi1], [pi0, -pi0]])
    return q / (2 * pi0 * pi1)


def expm_transition(pi1: float, t: float, r: float = 1.0) -> np.ndarray:
    return linalg.expm(rate_matrix(pi1) * t * r)


def gamma_rates_by_quadrature(alpha: float, k: int = 4) -> np.ndarray:
    """Mean of Gamma(alpha, mean 1) within each of k equal-probability intervals."""
    dist = stats.gamma(alpha, scale=1.0 / alpha)
    edges = [0.0] + [float(dist.ppf(i / k)) for i in range(1, k)] + [math.inf]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mass, _ = integrate.quad(lambda x: x * dist.pdf(x), lo, hi, limit=200, epsabs=1e-13, epsrel=1e-12)
        out.append(mass * k)
    return np.array(out)


# --- brute-force likelihood -----------------------------------------------------------


def _nested_edges(tree):
    """(parent, child, length) triples and the leaf/internal ids of a nested-tuple tree.

    A tree is either a leaf name (str) or a tuple of (subtree, length) pairs.
    """
    edges, leaves, internal = [], {}, []
    counter = itertools.count()

    def walk(node):
        nid = next(counter)
        if isinstance(node, str):
            leaves[nid] = node
            return nid
        internal.append(nid)
        for child, length in node:
            cid = walk(child)
            edges.append((nid, cid, length))
        return nid

    root = walk(tree)
    return root, edges, leaves, internal


def brute_force_loglik(tree, columns: list[dict[str, str]], pi1: float, rates) -> float:
    """Sum over every assignment of interior states; '?' leaves sum over both states."""
    root, edges, leaves, internal = _nested_edges(tree)
    pi = np.array([1.0 - pi1, pi1])
    total = 0.0
    for col in columns:
        site = 0.0
        for r in rates:
            probs = {(p, c): expm_transition(pi1, t, r) for p, c, t in edges}
            leaf_ids = list(leaves)
            leaf_options = [
                (0, 1) if col[leaves[i]] == "?" else (int(col[leaves[i]]),) for i in leaf_ids
            ]
            lik = 0.0
            for inner in itertools.product((0, 1), repeat=len(internal)):
                state = dict(zip(internal, inner))
                for leaf_states in itertools.product(*leaf_options):
                    full = dict(state)
                    full.update(zip(leaf_ids, leaf_states))
                    p = pi[full[root]]
                    for a, b, _ in edges:
                        p *= probs[(a, b)][full[a], full[b]]
                    lik += p
            site += lik / len(rates)
        total += math.log(site)
    return total


def nested_to_newick(tree) -> str:
    if isinstance(tree, str):
        return tree
    return "(" + ",".join(f"{nested_to_newick(c)}:{t!r}" for c, t in tree) + ")"


def random_nested_tree(rng, taxa, lo=0.01, hi=2.0):
    """Random rooted binary tree as nested tuples (random joins of random pairs)."""
    nodes = list(taxa)
    while len(nodes) > 1:
        i, j = sorted(rng.choice(len(nodes), size=2, replace=False), reverse=True)
        a, b = nodes.pop(i), nodes.pop(j)
        nodes.append(((a, float(rng.uniform(lo, hi))), (b, float(rng.uniform(lo, hi)))))
    return nodes[0]


# --- quartets via the four-point condition ----------------------------------------------


def _adjacency(newick_tree):
    """Undirected adjacency of a parsed tree (uses only Node.children / Node.name)."""
    adj: dict[int, list[int]] = {}
    names: dict[str, int] = {}
    stack = [newick_tree.root]
    while stack:
        node = stack.pop()
        adj.setdefault(id(node), [])
        if node.name is not None and not node.children:
            names[node.name] = id(node)
        for child in node.children:
            adj[id(node)].append(id(child))
            adj.setdefault(id(child), []).append(id(node))
            stack.append(child)
    return adj, names


def _edge_distances(adj, source):
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def four_point_topology(newick_tree, quartet) -> str:
    """'AB|CD', 'AC|BD', 'AD|BC' or 'STAR' for taxa (A, B, C, D) from path lengths."""
    adj, names = _adjacency(newick_tree)
    a, b, c, d = (names[x] for x in quartet)
    da, db, dc = _edge_distances(adj, a), _edge_distances(adj, b), _edge_distances(adj, c)
    sums = {
        "AB|CD": da[b] + dc[d],
        "AC|BD": da[c] + db[d],
        "AD|BC": da[d] + db[c],
    }
    best = min(sums.values())
    winners = [k for k, v in sums.items() if v == best]
    return winners[0] if len(winners) == 1 else "STAR"


def brute_force_gqd(inferred, gold) -> tuple[int, int]:
    """(butterflies in gold, discordant) over all 4-subsets of the shared taxa."""
    taxa = sorted(set(inferred.leaf_names()) & set(gold.leaf_names()))
    butterflies = discordant = 0
    for quartet in itertools.combinations(taxa, 4):
        g = four_point_topology(gold, quartet)
        if g == "STAR":
            continue
        butterflies += 1
        if four_point_topology(inferred, quartet) != g:
            discordant += 1
    return butterflies, discordant


# --- alignment ------------------------------------------------------------------------


def all_pairwise_alignments(a, b):
    """Every global alignment of a and b as (row_a, row_b) tuples."""
    if not a and not b:
        yield (), ()
        return
    if a and b:
        for ra, rb in all_pairwise_alignments(a[1:], b[1:]):
            yield (a[0],) + ra, (b[0],) + rb
    if a:
        for ra, rb in all_pairwise_alignments(a[1:], b):
            yield (a[0],) + ra, ("-",) + rb
    if b:
        for ra, rb in all_pairwise_alignments(a, b[1:]):
            yield ("-",) + ra, (b[0],) + rb


def column_pair_score(x, y, classes, match=1.0, mismatch=-1.0, gap=-1.0):
    if x == "-" and y == "-":
        return 0.0
    if x == "-" or y == "-":
        return gap
    return match if classes(x) == classes(y) else mismatch


def best_pairwise_score(a, b, classes, **scores) -> float:
    return max(
        sum(column_pair_score(x, y, classes, **scores) for x, y in zip(ra, rb))
        for ra, rb in all_pairwise_alignments(tuple(a), tuple(b))
    )


def gapped_versions(seq, width):
    """All ways to pad ``seq`` with gaps to ``width`` columns."""
    for positions in itertools.combinations(range(width), len(seq)):
        row = ["-"] * width
        for p, tok in zip(positions, seq):
            row[p] = tok
        yield tuple(row)


def best_msa(seqs, width, classes):
    """Sum-of-pairs optimal alignments of exactly ``width`` columns (all ties returned)."""
    best, winners = -math.inf, []
    for rows in itertools.product(*(list(gapped_versions(s, width)) for s in seqs)):
        if any(all(r[j] == "-" for r in rows) for j in range(width)):
            continue
        score = sum(
            column_pair_score(rows[i][j], rows[k][j], classes)
            for j in range(width)
            for i in range(len(rows))
            for k in range(i + 1, len(rows))
        )
        if score > best:
            best, winners = score, [rows]
        elif score == best:
            winners.append(rows)
    return best, winners


# --- patterns -------------------------------------------------------------------------


def compatible(a: dict, b: dict) -> bool:
    return all(b[k] == v for k, v in a.items() if k in b)


def minimum_clique_cover(assignments: list[dict]) -> int:
    """Fewest groups of pairwise-compatible sites (exhaustive over set partitions)."""
    n = len(assignments)
    best = n

    def place(i, groups):
        nonlocal best
        if len(groups) >= best:
            return
        if i == n:
            best = len(groups)
            return
        for g in groups:
            if all(compatible(assignments[i], assignments[j]) for j in g):
                g.append(i)
                place(i + 1, groups)
                g.pop()
        groups.append([i])
        place(i + 1, groups)
        groups.pop()

    place(0, [])
    return best


# --- parsimony ------------------------------------------------------------------------


def fitch_length(nested, column: dict[str, str]) -> int:
    """Textbook Fitch count on a rooted nested-tuple tree ('?' is {0, 1})."""

    def walk(node):
        if isinstance(node, str):
            s = column[node]
            return ({"0", "1"} if s == "?" else {s}), 0
        sets, cost = None, 0
        for child, _ in node:
            cs, cc = walk(child)
            cost += cc
            if sets is None:
                sets = cs
            elif sets & cs:
                sets = sets & cs
            else:
                sets, cost = sets | cs, cost + 1
        return sets, cost

    return walk(nested)[1]


# --- clock-tree rankings ----------------------------------------------------------------


def count_rankings(children: dict[int, list[int]]) -> int:
    """Age orderings of internal nodes in which every parent is older than its children."""
    internal = list(children)
    count = 0
    for order in itertools.permutations(internal):
        rank = {u: i for i, u in enumerate(order)}
        if all(rank[c] < rank[u] for u in internal for c in children[u] if c in rank):
            count += 1
    return count
