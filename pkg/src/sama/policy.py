"""Threshold access trees over attribute leaves, with a text grammar.

Grammar (OR binds loosest, AND tighter, threshold gates explicit):

    expr  := term | expr "OR" term
    term  := factor | term "AND" factor
    factor := ATTR | "(" expr ")" | INT "of" "(" expr "," expr... ")"

AND over d children is the gate k = d, OR is k = 1. Operator chains are
flattened into one n-ary gate, so parse(print(parse(s))) == parse(s).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import MalformedTree, PolicySyntaxError

Node = Union["Leaf", "Gate"]


@dataclass(frozen=True)
class Leaf:
    attribute: str


@dataclass(frozen=True)
class Gate:
    """Threshold gate: satisfied when at least k children are satisfied."""

    k: int
    children: tuple[Node, ...]

    def __post_init__(self):
        if not self.children:
            raise MalformedTree("gate needs at least one child")
        if not 1 <= self.k <= len(self.children):
            raise MalformedTree(
                f"threshold {self.k} outside 1..{len(self.children)}"
            )


def and_of(children) -> Gate:
    children = tuple(children)
    return Gate(k=len(children), children=children)


def or_of(children) -> Gate:
    return Gate(k=1, children=tuple(children))


def leaves(node: Node) -> list[str]:
    """Leaf attributes in left-to-right order (with repeats)."""
    if isinstance(node, Leaf):
        return [node.attribute]
    out: list[str] = []
    for child in node.children:
        out.extend(leaves(child))
    return out


def leaf_count(node: Node) -> int:
    return len(leaves(node))


def satisfies(node: Node, attrs) -> bool:
    """Recursive threshold evaluation: leaf true iff its attribute is held."""
    attrs = frozenset(attrs)
    if isinstance(node, Leaf):
        return node.attribute in attrs
    hits = sum(1 for child in node.children if satisfies(child, attrs))
    return hits >= node.k


def min_satisfying_leaves(node: Node, attrs) -> int | None:
    """Leaf count of the cheapest satisfying subtree, or None if unsatisfied.

    Gates pick their k cheapest satisfied children, leftmost on ties, which
    also fixes the subtree decryption walks.
    """
    attrs = frozenset(attrs)
    cost = _min_cost(node, attrs)
    return cost


def _min_cost(node: Node, attrs: frozenset) -> int | None:
    if isinstance(node, Leaf):
        return 1 if node.attribute in attrs else None
    costs = sorted(
        (c for c in (_min_cost(child, attrs) for child in node.children) if c is not None)
    )
    if len(costs) < node.k:
        return None
    return sum(costs[: node.k])


def _tokenize(text: str) -> Iterator[tuple[str, str, int]]:
    token_re = re.compile(r"\s*(?:(\()|(\))|(,)|(\d+)|([A-Za-z_][A-Za-z0-9_]*))")
    pos = 0
    while pos < len(text):
        m = token_re.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise PolicySyntaxError(f"unexpected character {stripped[0]!r}", pos)
        pos = m.end()
        lparen, rparen, comma, number, word = m.groups()
        start = pos - len(m.group().lstrip())
        if lparen:
            yield "(", "(", start
        elif rparen:
            yield ")", ")", start
        elif comma:
            yield ",", ",", start
        elif number:
            yield "INT", number, start
        elif word in ("AND", "OR", "of"):
            yield word, word, start
        else:
            yield "ATTR", word, start
    yield "END", "", len(text)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = list(_tokenize(text))
        self.idx = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.idx]

    def take(self, kind: str | None = None) -> tuple[str, str, int]:
        tok = self.tokens[self.idx]
        if kind is not None and tok[0] != kind:
            raise PolicySyntaxError(f"expected {kind}, found {tok[1] or 'end of input'!r}", tok[2])
        self.idx += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "END":
            raise PolicySyntaxError(f"trailing input {value!r}", pos)
        return node

    def expr(self) -> Node:
        children = [self.term()]
        while self.peek()[0] == "OR":
            self.take()
            children.append(self.term())
        return children[0] if len(children) == 1 else _chain(1, children)

    def term(self) -> Node:
        children = [self.factor()]
        while self.peek()[0] == "AND":
            self.take()
            children.append(self.factor())
        if len(children) == 1:
            return children[0]
        return _chain(len(children), children)

    def factor(self) -> Node:
        kind, value, pos = self.peek()
        if kind == "ATTR":
            self.take()
            return Leaf(attribute=value)
        if kind == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if kind == "INT":
            self.take()
            k = int(value)
            self.take("of")
            self.take("(")
            children = [self.expr()]
            while self.peek()[0] == ",":
                self.take()
                children.append(self.expr())
            self.take(")")
            if not 1 <= k <= len(children):
                raise PolicySyntaxError(
                    f"threshold {k} outside 1..{len(children)}", pos
                )
            if len(children) == 1:
                return children[0]
            return Gate(k=k, children=tuple(children))
        raise PolicySyntaxError(f"expected attribute, group or threshold, found {value or 'end of input'!r}", pos)


def _chain(k: int, children: list[Node]) -> Gate:
    """n-ary AND (k = len) or OR (k = 1) with same-kind children folded in."""
    flat: list[Node] = []
    for child in children:
        if isinstance(child, Gate) and _gate_kind(child) == ("AND" if k > 1 else "OR"):
            flat.extend(child.children)
        else:
            flat.append(child)
    return Gate(k=len(flat) if k > 1 else 1, children=tuple(flat))


def _gate_kind(gate: Gate) -> str:
    if gate.k == len(gate.children) and gate.k > 1:
        return "AND"
    if gate.k == 1 and len(gate.children) > 1:
        return "OR"
    return "THRESHOLD"


def parse_policy(text: str) -> Node:
    """Parse policy text to its canonical tree.

    Raises:
      PolicySyntaxError: with the offending position.
    """
    return _Parser(text).parse()


def format_policy(node: Node) -> str:
    """Canonical text form; parse(format_policy(t)) == t for parser output."""
    return _format(node, parent=None)


def _format(node: Node, parent: str | None) -> str:
    if isinstance(node, Leaf):
        return node.attribute
    kind = _gate_kind(node)
    if kind == "THRESHOLD":
        inner = ", ".join(_format(c, parent=None) for c in node.children)
        return f"{node.k} of ({inner})"
    op = " AND " if kind == "AND" else " OR "
    text = op.join(_format(c, parent=kind) for c in node.children)
    # OR under AND needs parens; AND under OR does not.
    if kind == "OR" and parent == "AND":
        return f"({text})"
    return text
