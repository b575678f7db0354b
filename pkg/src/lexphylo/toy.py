"""Deterministic generator for the bundled 8-language toy wordlist.

Words evolve down a planted tree: on each branch a word is replaced by an
unrelated one (a new cognate set) with probability ``1 - exp(-rate * length)``,
and every branch applies its own regular sound changes to all inherited words.
"""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .corpus import WordForm, Wordlist, parse_wordlist, serialize_wordlist
from .phylo.tree import Tree, parse_newick

TOY_TREE = (
    "(((L1:0.08,L2:0.08):0.25,L3:0.15):0.25,((L4:0.08,L5:0.08):0.25,L6:0.15):0.25,"
    "(L7:0.1,L8:0.1):0.3);"
)
CONSONANTS = ["p", "b", "t", "d", "k", "g", "m", "n", "s", "l", "r", "w", "j", "h", "f", "x"]
VOWELS = ["a", "e", "i", "o", "u"]


def _random_word(rng: np.random.Generator) -> list[str]:
    tokens = []
    for _ in range(int(rng.integers(2, 4))):
        tokens.append(CONSONANTS[int(rng.integers(len(CONSONANTS)))])
        tokens.append(VOWELS[int(rng.integers(len(VOWELS)))])
    if rng.random() < 0.5:
        tokens.append(CONSONANTS[int(rng.integers(len(CONSONANTS)))])
    return tokens


def _sound_law(rng: np.random.Generator, n_changes: int) -> dict[str, str]:
    """Regular changes: consonants shift to consonants, vowels to vowels."""
    law = {}
    for inventory in (CONSONANTS, VOWELS):
        k = n_changes if inventory is CONSONANTS else max(1, n_changes // 2)
        for s in rng.choice(len(inventory), size=k, replace=False):
            target = int(rng.integers(len(inventory) - 1))
            target += target >= s
            law[inventory[s]] = inventory[target]
    return law


def generate_toy_wordlist(
    n_concepts: int = 200,
    replacement_rate: float = 1.0,
    changes_per_branch: int = 4,
    missing_fraction: float = 0.03,
    seed: int = 7,
    tree: str = TOY_TREE,
) -> Wordlist:
    rng = np.random.default_rng(seed)
    planted = parse_newick(tree)
    nodes = list(planted.preorder())
    laws = {id(n): _sound_law(rng, changes_per_branch) for n in nodes if n is not planted.root}
    languages = planted.leaf_names()
    concepts = [f"concept{i:03d}" for i in range(1, n_concepts + 1)]
    forms = []
    for concept in concepts:
        next_id = 1
        words = {id(planted.root): (_random_word(rng), next_id)}
        for node in nodes:
            if node is planted.root:
                continue
            tokens, cogid = words[id(node.parent)]
            if rng.random() < 1.0 - math.exp(-replacement_rate * node.length):
                next_id += 1
                tokens, cogid = _random_word(rng), next_id
            law = laws[id(node)]
            words[id(node)] = ([law.get(t, t) for t in tokens], cogid)
        for leaf in planted.leaves():
            if rng.random() < missing_fraction:
                continue
            tokens, cogid = words[id(leaf)]
            forms.append(
                WordForm(str(len(forms) + 1), leaf.name, concept, tuple(tokens), str(cogid))
            )
    return Wordlist(forms, languages, concepts)


def toy_tree() -> Tree:
    return parse_newick(resources.files("lexphylo").joinpath("data/toy_tree.nwk").read_text())


def toy_wordlist_path():
    return resources.files("lexphylo").joinpath("data/toy_wordlist.tsv")


def load_toy_wordlist() -> Wordlist:
    return parse_wordlist(toy_wordlist_path().read_text(encoding="utf-8"))


def write_toy_files(directory) -> None:
    """Regenerate the bundled files (used once to create them)."""
    from pathlib import Path

    directory = Path(directory)
    header = "# toy wordlist generated by lexphylo.toy.generate_toy_wordlist()\n"
    (directory / "toy_wordlist.tsv").write_text(header + serialize_wordlist(generate_toy_wordlist()), encoding="utf-8")
    (directory / "toy_tree.nwk").write_text(TOY_TREE + "\n", encoding="utf-8")
