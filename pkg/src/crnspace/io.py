"""Line-oriented ``.crn`` network files.

Grammar (``#`` starts a comment)::

    species <name>+
    init <name>=<nonneg-int> ...          # omitted names default to 0
    reaction <side> -> <side> @ <rate>
    fast <reaction-index>+                 # 1-based
    slow <reaction-index>+
    balanced_r <name>=<positive-rational> ...

``<side>`` is ``0`` or ``+``-separated terms ``[<int> ]<name>`` and
``<rate>`` is ``mass_action(<positive-rational>)`` or ``expr(<expression>)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .expr import ExpressionSyntaxError, parse_expression
from .model import GuardedExpression, MassAction, ReactionNetwork


class CrnParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected: Sequence[str] = ()):
        where = f"line {line}, column {column}"
        exp = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{where}: {message}{exp}")
        self.line = line
        self.column = column
        self.expected = tuple(expected)


@dataclass(eq=False)
class NetworkFile:
    network: ReactionNetwork
    x0: tuple[int, ...]
    fast: tuple[int, ...] = ()  # 0-based reaction indices
    slow: tuple[int, ...] = ()
    balanced_r: dict[str, Fraction] = field(default_factory=dict)
    path: str | None = None


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_RATIONAL = re.compile(r"\d+(?:/\d+)?|\d*\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+")


def _rational(text: str, line: int, col: int, positive: bool) -> Fraction:
    if not _RATIONAL.fullmatch(text):
        raise CrnParseError(f"invalid rational {text!r}", line, col, ("<int>", "<int>/<int>", "<decimal>"))
    value = Fraction(text)
    if positive and value <= 0:
        raise CrnParseError(f"value {text} must be positive", line, col)
    return value


class _Line:
    """Cursor over one line of text with 1-based columns in errors."""

    def __init__(self, text: str, lineno: int):
        self.text = text
        self.lineno = lineno
        self.pos = 0

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def error(self, message: str, expected: Sequence[str] = ()):
        raise CrnParseError(message, self.lineno, self.pos + 1, expected)

    def name(self) -> tuple[str, int]:
        self.skip()
        m = _NAME.match(self.text, self.pos)
        if not m:
            found = self.text[self.pos:self.pos + 1] or "end of line"
            self.error(f"unexpected {found!r}", ("<name>",))
        col = self.pos + 1
        self.pos = m.end()
        return m.group(), col

    def literal(self, token: str) -> None:
        self.skip()
        if not self.text.startswith(token, self.pos):
            found = self.text[self.pos:self.pos + 1] or "end of line"
            self.error(f"unexpected {found!r}", (repr(token),))
        self.pos += len(token)

    def peek(self, token: str) -> bool:
        self.skip()
        return self.text.startswith(token, self.pos)

    def word(self) -> tuple[str, int]:
        self.skip()
        start = self.pos
        while self.pos < len(self.text) and not self.text[self.pos].isspace():
            self.pos += 1
        return self.text[start:self.pos], start + 1


def _parse_side(cur: _Line, stop: str) -> list[tuple[int, str, int]]:
    cur.skip()
    if cur.peek("0"):
        m = re.match(r"0(?=\s|$|-|@)", cur.text[cur.pos:])
        if m:
            cur.pos += 1
            return []
    terms = []
    while True:
        cur.skip()
        coef = 1
        m = re.match(r"\d+", cur.text[cur.pos:])
        if m:
            coef = int(m.group())
            cur.pos += m.end()
            if coef == 0:
                cur.error("stoichiometric coefficient must be positive")
        name, col = cur.name()
        terms.append((coef, name, col))
        if cur.peek("+"):
            cur.pos += 1
            continue
        if cur.peek(stop):
            return terms
        cur.error(
            f"unexpected {cur.text[cur.pos:cur.pos + 1] or 'end of line'!r}",
            ("'+'", repr(stop)),
        )


def _balanced_paren(cur: _Line) -> str:
    """Text inside parentheses starting at the cursor (which is on '(')."""
    cur.literal("(")
    depth = 1
    start = cur.pos
    while cur.pos < len(cur.text):
        ch = cur.text[cur.pos]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                inner = cur.text[start:cur.pos]
                cur.pos += 1
                return inner
        cur.pos += 1
    cur.error("unbalanced parentheses", ("')'",))
    raise AssertionError


def parse_network(text: str, path: str | None = None) -> NetworkFile:
    species: list[str] = []
    init: dict[str, int] = {}
    init_pos: dict[str, tuple[int, int]] = {}
    reactions = []  # (lhs, rhs, propensity, lineno)
    fast: list[tuple[int, int, int]] = []
    slow: list[tuple[int, int, int]] = []
    balanced: dict[str, Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        cur = _Line(line, lineno)
        if cur.at_end():
            continue
        keyword, kcol = cur.word()
        if keyword == "species":
            if cur.at_end():
                cur.error("species list is empty", ("<name>",))
            while not cur.at_end():
                name, col = cur.name()
                if name in species:
                    raise CrnParseError(f"duplicate species {name!r}", lineno, col)
                species.append(name)
        elif keyword in ("init", "balanced_r"):
            while not cur.at_end():
                name, col = cur.name()
                cur.literal("=")
                value, vcol = cur.word()
                if keyword == "init":
                    if not value.isdigit():
                        raise CrnParseError(f"invalid count {value!r}", lineno, vcol, ("<nonneg-int>",))
                    if name in init:
                        raise CrnParseError(f"species {name!r} initialized twice", lineno, col)
                    init[name] = int(value)
                    init_pos[name] = (lineno, col)
                else:
                    balanced[name] = _rational(value, lineno, vcol, positive=True)
                    init_pos.setdefault("@r:" + name, (lineno, col))
        elif keyword == "reaction":
            lhs = _parse_side(cur, "->")
            cur.literal("->")
            rhs = _parse_side(cur, "@")
            cur.literal("@")
            kind, col = cur.name()
            if kind == "mass_action":
                start = cur.pos
                inner = _balanced_paren(cur).strip()
                prop = MassAction(_rational(inner, lineno, start + 2, positive=True))
            elif kind == "expr":
                start = cur.pos
                inner = _balanced_paren(cur)
                try:
                    prop = GuardedExpression(parse_expression(inner))
                except ExpressionSyntaxError as exc:
                    raise CrnParseError(str(exc), lineno, start + 1 + exc.column, exc.expected) from None
            else:
                raise CrnParseError(f"unknown rate kind {kind!r}", lineno, col, ("mass_action", "expr"))
            if not cur.at_end():
                cur.error("trailing text after rate", ("end of line",))
            reactions.append((lhs, rhs, prop, lineno))
        elif keyword in ("fast", "slow"):
            target = fast if keyword == "fast" else slow
            if cur.at_end():
                cur.error("reaction index list is empty", ("<reaction-index>",))
            while not cur.at_end():
                value, col = cur.word()
                if not value.isdigit() or int(value) < 1:
                    raise CrnParseError(f"invalid reaction index {value!r}", lineno, col, ("<reaction-index>",))
                target.append((int(value) - 1, lineno, col))
        else:
            raise CrnParseError(
                f"unknown directive {keyword!r}", lineno, kcol,
                ("species", "init", "reaction", "fast", "slow", "balanced_r"),
            )
    if not species:
        raise CrnParseError("no species declared", 1, 1, ("species",))
    if not reactions:
        raise CrnParseError("no reactions declared", 1, 1, ("reaction",))
    index = {n: i for i, n in enumerate(species)}
    for name, (ln, col) in init_pos.items():
        key = name[3:] if name.startswith("@r:") else name
        if key not in index:
            raise CrnParseError(f"unknown species {key!r}", ln, col, ("declared species",))
    d, K = len(species), len(reactions)
    V = np.zeros((d, K), dtype=np.int64)
    O = np.zeros((d, K), dtype=np.int64)
    props = []
    for k, (lhs, rhs, prop, ln) in enumerate(reactions):
        for M, side in ((V, lhs), (O, rhs)):
            for coef, name, col in side:
                if name not in index:
                    raise CrnParseError(f"unknown species {name!r}", ln, col, ("declared species",))
                M[index[name], k] += coef
        if isinstance(prop, GuardedExpression):
            unknown = sorted(prop.expr.species() - set(species))
            if unknown:
                raise CrnParseError(f"expression refers to unknown species {unknown}", ln, 1)
        props.append(prop)
    for idx, ln, col in fast + slow:
        if idx >= K:
            raise CrnParseError(f"reaction index {idx + 1} out of range 1..{K}", ln, col)
    network = ReactionNetwork(tuple(species), V, O, tuple(props))
    x0 = tuple(init.get(n, 0) for n in species)
    return NetworkFile(
        network,
        x0,
        tuple(i for i, _, _ in fast),
        tuple(i for i, _, _ in slow),
        balanced,
        path,
    )


def _side_text(network: ReactionNetwork, M: np.ndarray, k: int) -> str:
    terms = [f"{int(M[i, k])} {name}" for i, name in enumerate(network.species) if M[i, k]]
    return " + ".join(terms) if terms else "0"


def _rational_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def print_network(nf: NetworkFile) -> str:
    net = nf.network
    lines = ["species " + " ".join(net.species)]
    lines.append("init " + " ".join(f"{n}={v}" for n, v in zip(net.species, nf.x0)))
    for k in range(net.K):
        lines.append(
            f"reaction {_side_text(net, net.reactants, k)} -> {_side_text(net, net.products, k)}"
            f" @ {net.propensities[k].to_text()}"
        )
    if nf.fast:
        lines.append("fast " + " ".join(str(i + 1) for i in nf.fast))
    if nf.slow:
        lines.append("slow " + " ".join(str(i + 1) for i in nf.slow))
    if nf.balanced_r:
        lines.append("balanced_r " + " ".join(f"{n}={_rational_text(v)}" for n, v in nf.balanced_r.items()))
    return "\n".join(lines) + "\n"


def read_network(path: str | Path) -> NetworkFile:
    p = Path(path)
    if not p.exists():
        bundled = corpus_path(p.name if p.suffix else p.name + ".crn")
        if bundled is not None:
            p = bundled
    return parse_network(p.read_text(encoding="utf-8"), str(path))


def corpus_path(name: str) -> Path | None:
    root = resources.files("crnspace") / "corpus"
    candidate = root / name
    return Path(str(candidate)) if candidate.is_file() else None


def corpus_names() -> list[str]:
    root = resources.files("crnspace") / "corpus"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".crn"))


def load_corpus(name: str) -> NetworkFile:
    path = corpus_path(name if name.endswith(".crn") else name + ".crn")
    if path is None:
        raise FileNotFoundError(f"no bundled network named {name!r}")
    return parse_network(path.read_text(encoding="utf-8"), str(path))
