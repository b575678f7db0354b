"""Unrooted trees as adjacency lists, used by likelihood optimization and search.

Leaves are nodes ``0..n-1`` (in taxon order), internal nodes follow. Edge
lengths are keyed by the sorted node pair.
"""

from __future__ import annotations

from typing import Sequence

from ..errors import ValidationError
from .tree import Node, Tree


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class UnrootedTree:
    def __init__(self, taxa: Sequence[str]):
        self.taxa = list(taxa)
        self.adj: list[list[int]] = [[] for _ in self.taxa]
        self.lengths: dict[tuple[int, int], float] = {}

    @property
    def n_leaves(self) -> int:
        return len(self.taxa)

    @property
    def n_nodes(self) -> int:
        return len(self.adj)

    def is_leaf(self, u: int) -> bool:
        return u < len(self.taxa)

    def new_node(self) -> int:
        self.adj.append([])
        return len(self.adj) - 1

    def connect(self, u: int, v: int, length: float) -> None:
        self.adj[u].append(v)
        self.adj[v].append(u)
        self.lengths[_key(u, v)] = length

    def length(self, u: int, v: int) -> float:
        return self.lengths[_key(u, v)]

    def set_length(self, u: int, v: int, t: float) -> None:
        self.lengths[_key(u, v)] = t

    def copy(self) -> "UnrootedTree":
        other = UnrootedTree(self.taxa)
        other.adj = [list(a) for a in self.adj]
        other.lengths = dict(self.lengths)
        return other

    def edges(self) -> list[tuple[int, int]]:
        """Edges as (parent, child) in preorder from leaf 0 (or the first connected leaf)."""
        start = next((u for u in range(self.n_leaves) if self.adj[u]), 0)
        out = []
        stack = [(start, -1)]
        while stack:
            u, prev = stack.pop()
            if prev >= 0:
                out.append((prev, u))
            stack.extend((w, u) for w in reversed(self.adj[u]) if w != prev)
        return out

    def internal_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, v in self.edges() if not self.is_leaf(u) and not self.is_leaf(v)]

    def insert_leaf(self, leaf: int, u: int, v: int, length: float = 0.1) -> int:
        """Attach ``leaf`` to the middle of edge (u, v); returns the new internal node."""
        t = self.lengths.pop(_key(u, v))
        w = self.new_node()
        iu, iv = self.adj[u].index(v), self.adj[v].index(u)
        self.adj[u][iu] = w
        self.adj[v][iv] = w
        self.adj[w] = [u, v]
        self.lengths[_key(u, w)] = t
        self.lengths[_key(w, v)] = length if length is not None else t
        self.connect(w, leaf, length)
        return w

    def swap(self, u: int, b: int, v: int, c: int) -> None:
        """NNI across edge (u, v): neighbor b of u trades places with neighbor c of v."""
        tb, tc = self.lengths.pop(_key(u, b)), self.lengths.pop(_key(v, c))
        self.adj[u][self.adj[u].index(b)] = c
        self.adj[v][self.adj[v].index(c)] = b
        self.adj[b][self.adj[b].index(u)] = v
        self.adj[c][self.adj[c].index(v)] = u
        self.lengths[_key(u, c)] = tc
        self.lengths[_key(v, b)] = tb

    def splits(self) -> set[frozenset[str]]:
        """Non-trivial splits keyed by the side without taxon 0."""
        out = set()
        n = self.n_leaves

        def below(u, prev):
            if self.is_leaf(u):
                return {u}
            s = set()
            for w in self.adj[u]:
                if w != prev:
                    s |= below(w, u)
            if 1 < len(s) < n - 1:
                out.add(frozenset(self.taxa[i] for i in s))
            return s

        below(self.adj[0][0], 0)
        return out

    def to_tree(self, root: int | None = None) -> Tree:
        """Rooted view hanging from ``root`` (default: the neighbor of leaf 0)."""
        if root is None:
            root = self.adj[0][0] if self.n_nodes > 1 else 0

        def build(u, prev):
            node = Node(self.taxa[u] if self.is_leaf(u) else None)
            if prev >= 0:
                node.length = self.length(u, prev)
            for w in self.adj[u]:
                if w != prev:
                    node.add_child(build(w, u))
            return node

        return Tree(build(root, -1), rooted=False)

    @classmethod
    def from_tree(cls, tree: Tree, taxa: Sequence[str] | None = None, default_length=0.1):
        """Unrooted copy of ``tree``; a degree-2 root is suppressed by merging its edges."""
        names = tree.leaf_names()
        if any(n is None for n in names):
            raise ValidationError("all leaves need labels")
        taxa = list(taxa) if taxa is not None else names
        missing = set(names) - set(taxa)
        if missing:
            raise ValidationError(f"tree leaves {sorted(missing)} not in taxon list")
        out = cls(taxa)
        index = {t: i for i, t in enumerate(taxa)}

        def blen(node):
            return default_length if node.length is None else float(node.length)

        def build(node) -> int:
            if node.is_leaf():
                return index[node.name]
            u = out.new_node()
            for child in node.children:
                w = build(child)
                out.connect(u, w, blen(child))
            return u

        root = tree.root
        if len(root.children) == 2:
            a, b = root.children
            ua, ub = build(a), build(b)
            out.connect(ua, ub, blen(a) + blen(b))
        else:
            build(root)
        out._compact()
        return out

    def _compact(self):
        """Suppress internal nodes of degree 2 (e.g. unary nodes from Newick)."""
        changed = True
        while changed:
            changed = False
            for u in range(self.n_leaves, self.n_nodes):
                if len(self.adj[u]) == 2:
                    a, b = self.adj[u]
                    t = self.lengths.pop(_key(u, a)) + self.lengths.pop(_key(u, b))
                    self.adj[a][self.adj[a].index(u)] = b
                    self.adj[b][self.adj[b].index(u)] = a
                    self.lengths[_key(a, b)] = t
                    self.adj[u] = []
                    changed = True
        # renumber away emptied internal nodes
        alive = list(range(self.n_leaves)) + [
            u for u in range(self.n_leaves, self.n_nodes) if self.adj[u]
        ]
        if len(alive) == self.n_nodes:
            return
        remap = {old: new for new, old in enumerate(alive)}
        self.adj = [[remap[w] for w in self.adj[old]] for old in alive]
        self.lengths = {_key(remap[a], remap[b]): t for (a, b), t in self.lengths.items()}
