"""Rooted (multi)furcating trees and Newick I/O."""

from __future__ import annotations

import re
from typing import Iterator

from ..errors import ParseError


class Node:
    __slots__ = ("name", "length", "children", "parent", "age")

    def __init__(self, name=None, length=None, children=None, age=None):
        self.name = name
        self.length = length
        self.children = []
        self.parent = None
        self.age = age
        for child in children or ():
            self.add_child(child)

    def add_child(self, child: "Node") -> "Node":
        child.parent = self
        self.children.append(child)
        return child

    def remove_child(self, child: "Node") -> None:
        self.children.remove(child)
        child.parent = None

    def is_leaf(self) -> bool:
        return not self.children

    def postorder(self) -> Iterator["Node"]:
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                yield node
            else:
                stack.append((node, True))
                stack.extend((c, False) for c in reversed(node.children))

    def preorder(self) -> Iterator["Node"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list["Node"]:
        return [n for n in self.preorder() if not n.children]

    def __repr__(self):
        return f"Node({self.name!r}, length={self.length!r}, nchildren={len(self.children)})"


class Tree:
    def __init__(self, root: Node, rooted: bool | None = None):
        self.root = root
        # a bifurcating root marks a rooted tree unless stated otherwise
        self.rooted = len(root.children) == 2 if rooted is None else rooted

    def postorder(self):
        return self.root.postorder()

    def preorder(self):
        return self.root.preorder()

    def leaves(self) -> list[Node]:
        return self.root.leaves()

    def leaf_names(self) -> list[str]:
        return [n.name for n in self.leaves()]

    def internal_nodes(self) -> list[Node]:
        return [n for n in self.preorder() if n.children]

    def find(self, name: str) -> Node:
        for n in self.preorder():
            if n.name == name and not n.children:
                return n
        raise KeyError(name)

    def copy(self) -> "Tree":
        mapping = {}
        for node in self.postorder():
            new = Node(node.name, node.length, age=node.age)
            for child in node.children:
                new.add_child(mapping[id(child)])
            mapping[id(node)] = new
        return Tree(mapping[id(self.root)], self.rooted)

    def __str__(self):
        return write_newick(self)

    def __repr__(self):
        return f"Tree({write_newick(self)!r})"


# --- Newick -----------------------------------------------------------------

_UNQUOTED_OK = re.compile(r"^[^\s(),:;'\[\]]+$")
_SPECIAL = set("(),:;[]'")


def _format_length(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _format_label(label: str) -> str:
    if _UNQUOTED_OK.match(label):
        return label
    return "'" + label.replace("'", "''") + "'"


def write_newick(tree: Tree | Node, lengths: bool = True) -> str:
    root = tree.root if isinstance(tree, Tree) else tree
    parts: dict[int, str] = {}
    for node in root.postorder():
        text = ""
        if node.children:
            text = "(" + ",".join(parts.pop(id(c)) for c in node.children) + ")"
        if node.name:
            text += _format_label(node.name)
        if lengths and node.length is not None and node is not root:
            text += ":" + _format_length(node.length)
        parts[id(node)] = text
    out = parts[id(root)]
    if lengths and root.length is not None:
        out += ":" + _format_length(root.length)
    return out + ";"


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message, pos=None):
        return ParseError(message, position=self.pos if pos is None else pos)

    def skip(self):
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch.isspace():
                self.pos += 1
            elif ch == "[":
                end = text.find("]", self.pos)
                if end < 0:
                    raise self.error("unterminated comment")
                self.pos = end + 1
            else:
                break

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def label(self) -> str | None:
        self.skip()
        text = self.text
        if self.pos < len(text) and text[self.pos] == "'":
            start = self.pos
            self.pos += 1
            out = []
            while True:
                if self.pos >= len(text):
                    raise self.error("unterminated quoted label", start)
                ch = text[self.pos]
                if ch == "'":
                    if text[self.pos + 1 : self.pos + 2] == "'":
                        out.append("'")
                        self.pos += 2
                        continue
                    self.pos += 1
                    return "".join(out)
                out.append(ch)
                self.pos += 1
        start = self.pos
        while self.pos < len(text) and text[self.pos] not in _SPECIAL and not text[self.pos].isspace():
            self.pos += 1
        return text[start : self.pos] or None

    def length(self) -> float | None:
        if self.peek() != ":":
            return None
        self.pos += 1
        self.skip()
        start = self.pos
        m = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?").match(self.text, self.pos)
        if not m:
            raise self.error("expected branch length")
        self.pos = m.end()
        value = float(m.group(0))
        if value < 0:
            raise self.error(f"negative branch length {m.group(0)}", start)
        return value


def parse_newick(text: str) -> Tree:
    """Parse one Newick tree; polytomies, internal labels and comments allowed."""
    r = _Reader(text)
    stack: list[Node] = []
    root = None
    node = Node()
    if r.peek() != "(":
        # single-leaf tree
        node.name = r.label()
        node.length = r.length()
        root = node
    else:
        current = None
        while True:
            ch = r.peek()
            if ch == "(":
                r.pos += 1
                child = Node()
                if current is not None:
                    current.add_child(child)
                    stack.append(current)
                current = child
                continue
            if ch == "":
                raise r.error("unexpected end of input: unbalanced parentheses")
            if ch in ",)":
                raise r.error(f"unexpected {ch!r}")
            # leaf
            leaf = current.add_child(Node())
            leaf.name = r.label()
            leaf.length = r.length()
            while True:
                ch = r.peek()
                if ch == ",":
                    r.pos += 1
                    break
                if ch == ")":
                    r.pos += 1
                    current.name = r.label()
                    current.length = r.length()
                    if not stack:
                        root = current
                        break
                    current = stack.pop()
                    continue
                if ch == "":
                    raise r.error("unexpected end of input: unbalanced parentheses")
                raise r.error(f"unexpected {ch!r}")
            if root is not None:
                break
            if r.peek() == "(":
                continue
    if r.peek() != ";":
        if r.peek() == "":
            raise r.error("missing terminating ';'")
        raise r.error(f"unexpected {r.peek()!r} after tree")
    r.pos += 1
    if r.peek():
        raise r.error("trailing characters after ';'")
    names = [n.name for n in root.leaves()]
    seen = set()
    for n in names:
        if n is None:
            continue
        if n in seen:
            raise ParseError(f"duplicate leaf label {n!r}")
        seen.add(n)
    return Tree(root)


def parse_newick_many(text: str) -> list[Tree]:
    """Parse a file holding one tree per ';'-terminated statement."""
    trees = []
    for chunk in text.split(";"):
        if chunk.strip():
            trees.append(parse_newick(chunk + ";"))
    return trees
