"""Metrics on a single coordinate chart: an expression language and builtins.

A metric document looks like::

    # round 2-sphere, polar chart
    dim 2;
    g11 = 1;
    g12 = 0;
    g22 = sin(x1)^2;
    bounds x1 = [0.1, 3.0];

Statements end with ``;`` or a newline.  Only the upper triangle
``gij`` with ``i <= j`` is written.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
CONSTANTS = {"pi": math.pi, "inf": math.inf}


class MetricSyntaxError(ValueError):
    def __init__(self, message, line=None, col=None):
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.col = col


class MetricDomainError(ValueError):
    """Evaluation outside the chart or at a non positive-definite point."""


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Num:
    value: float

    def evaluate(self, x):
        return self.value

    def to_text(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Const:
    name: str

    def evaluate(self, x):
        return CONSTANTS[self.name]

    def to_text(self):
        return self.name


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written

    def evaluate(self, x):
        return x[..., self.index - 1]

    def to_text(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Neg:
    arg: object

    def evaluate(self, x):
        return -self.arg.evaluate(x)

    def to_text(self):
        return f"(-{self.arg.to_text()})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def evaluate(self, x):
        a = self.left.evaluate(x)
        b = self.right.evaluate(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return np.power(a, b)

    def to_text(self):
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"


@dataclass(frozen=True)
class Call:
    name: str
    arg: object

    def evaluate(self, x):
        return FUNCTIONS[self.name](self.arg.evaluate(x))

    def to_text(self):
        return f"{self.name}({self.arg.to_text()})"


def variables_used(node) -> set:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, (Neg, Call)):
        return variables_used(node.arg)
    if isinstance(node, BinOp):
        return variables_used(node.left) | variables_used(node.right)
    return set()


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),;=\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise MetricSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            tokens.append(Token("end", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "op" and m.group() == ";":
            tokens.append(Token("end", ";", line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    """Precedence climbing: ^ (right) > unary - > * / > + -."""

    def __init__(self, tokens, dim=None):
        self.toks = tokens
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok.text != text:
            raise MetricSyntaxError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return tok

    def expression(self):
        node = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek().text == "-" and self.peek().kind == "op":
            self.take()
            return Neg(self.unary())
        if self.peek().text == "+" and self.peek().kind == "op":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            op = self.take()
            if self.peek().kind in ("end", "eof") or self.peek().text in (")", ","):
                raise MetricSyntaxError("expected operand after '^'", op.line, op.col)
            # right associative; exponent may carry its own unary minus
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in CONSTANTS:
                return Const(tok.text)
            m = re.fullmatch(r"x([1-9]\d*)", tok.text)
            if m:
                k = int(m.group(1))
                if self.dim is not None and k > self.dim:
                    raise MetricSyntaxError(f"undeclared variable {tok.text} in dimension {self.dim}", tok.line, tok.col)
                return Var(k)
            raise MetricSyntaxError(f"unknown name {tok.text!r}", tok.line, tok.col)
        if tok.text == "(":
            node = self.expression()
            self.expect(")")
            return node
        if tok.kind in ("end", "eof"):
            prev = self.toks[self.i - 2] if self.i >= 2 else tok
            raise MetricSyntaxError(f"expected operand after {prev.text!r}", prev.line, prev.col)
        raise MetricSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)


def parse_expression(text: str, dim: Optional[int] = None):
    toks = [t for t in tokenize(text) if not (t.kind == "end" and t.text == "\n")]
    p = _Parser(toks, dim)
    node = p.expression()
    tok = p.peek()
    if tok.kind != "eof":
        raise MetricSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)
    return node


# ---------------------------------------------------------------- metric spec


@dataclass(frozen=True)
class Builtin:
    """A model metric given by a vectorised function of chart points."""

    tag: str
    params: tuple
    dim: int
    metric: Callable = field(compare=False, repr=False)
    bounds: tuple = field(compare=False, repr=False, default=None)
    curvature: float | None = field(compare=False, default=None)
    analytic: Callable | None = field(compare=False, repr=False, default=None)
    expression_text: str | None = field(compare=False, repr=False, default=None)


@dataclass(frozen=True)
class MetricSpec:
    """A metric on one chart.

    Exactly one of ``components`` (upper-triangular expression trees, keyed
    ``(i, j)`` with ``i <= j``, 1-based) or ``builtin`` is set.
    """

    dim: int
    components: Optional[tuple] = None
    builtin: Optional[Builtin] = None
    bounds: tuple = ()

    @property
    def name(self):
        return self.builtin.tag if self.builtin else "expression"

    @property
    def has_analytic_curvature(self):
        return self.builtin is not None and self.builtin.analytic is not None

    def component(self, i, j):
        i, j = min(i, j), max(i, j)
        return dict(self.components)[(i, j)]

    def matrix(self, x):
        """Metric matrices at points ``x`` of shape (..., n) -> (..., n, n), unchecked."""
        x = np.asarray(x, dtype=float)
        if self.builtin is not None:
            return self.builtin.metric(x)
        n = self.dim
        out = np.empty(x.shape[:-1] + (n, n))
        for (i, j), node in self.components:
            val = node.evaluate(x)
            out[..., i - 1, j - 1] = val
            out[..., j - 1, i - 1] = val
        return out

    def in_bounds(self, x, margin=0.0):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for k, (lo, hi) in enumerate(self.bounds):
            ok &= (x[..., k] >= lo + margin) & (x[..., k] <= hi - margin)
        return ok

    def to_text(self) -> str:
        if self.components is None:
            if self.builtin.expression_text is None:
                raise ValueError(f"builtin {self.builtin.tag} has no expression form")
            return self.builtin.expression_text
        lines = [f"dim {self.dim};"]
        for (i, j), node in self.components:
            lines.append(f"g{i}{j} = {node.to_text()};")
        for k, (lo, hi) in enumerate(self.bounds, start=1):
            if np.isfinite(lo) or np.isfinite(hi):
                lines.append(f"bounds x{k} = [{_fmt(lo)}, {_fmt(hi)}];")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _statements(tokens):
    stmt = []
    for tok in tokens:
        if tok.kind in ("end", "eof"):
            if stmt:
                yield stmt, tok
            stmt = []
        else:
            stmt.append(tok)


def parse_metric(text: str) -> MetricSpec:
    """Parse a metric-definition document into a validated MetricSpec."""
    tokens = tokenize(text)
    dim = None
    comps = {}
    bounds = {}
    for stmt, terminator in _statements(tokens):
        head = stmt[0]
        if head.text == "dim":
            if dim is not None:
                raise MetricSyntaxError("dimension declared twice", head.line, head.col)
            if len(stmt) != 2 or stmt[1].kind != "num" or not stmt[1].text.isdigit():
                raise MetricSyntaxError("expected 'dim <integer>'", head.line, head.col)
            dim = int(stmt[1].text)
            if dim < 1:
                raise MetricSyntaxError("dimension must be positive", head.line, head.col)
            continue
        if dim is None:
            raise MetricSyntaxError("'dim n' must come first", head.line, head.col)
        if head.text == "bounds":
            m = re.fullmatch(r"x([1-9]\d*)", stmt[1].text) if len(stmt) > 1 else None
            if m is None:
                raise MetricSyntaxError("expected 'bounds xk = [lo, hi]'", head.line, head.col)
            k = int(m.group(1))
            if k > dim:
                raise MetricSyntaxError(f"undeclared variable x{k} in dimension {dim}", stmt[1].line, stmt[1].col)
            p = _Parser(stmt[2:] + [terminator], dim)
            p.expect("=")
            p.expect("[")
            lo = p.expression()
            p.expect(",")
            hi = p.expression()
            p.expect("]")
            if p.peek().kind not in ("end", "eof"):
                t = p.peek()
                raise MetricSyntaxError(f"unexpected token {t.text!r}", t.line, t.col)
            lo_v = float(lo.evaluate(np.zeros(dim)))
            hi_v = float(hi.evaluate(np.zeros(dim)))
            if not lo_v < hi_v:
                raise MetricSyntaxError(f"empty bounds for x{k}", head.line, head.col)
            bounds[k] = (lo_v, hi_v)
            continue
        m = re.fullmatch(r"g([1-9])([1-9])", head.text)
        if m is None:
            raise MetricSyntaxError(f"unexpected statement starting with {head.text!r}", head.line, head.col)
        i, j = int(m.group(1)), int(m.group(2))
        if i > dim or j > dim:
            raise MetricSyntaxError(f"component g{i}{j} out of range for dimension {dim}", head.line, head.col)
        if i > j:
            raise MetricSyntaxError(f"write the upper-triangle component g{j}{i} instead of g{i}{j}", head.line, head.col)
        if (i, j) in comps:
            raise MetricSyntaxError(f"component g{i}{j} given twice", head.line, head.col)
        p = _Parser(stmt[1:] + [terminator], dim)
        p.expect("=")
        node = p.expression()
        if p.peek().kind not in ("end", "eof"):
            t = p.peek()
            raise MetricSyntaxError(f"unexpected token {t.text!r}", t.line, t.col)
        comps[(i, j)] = node
    if dim is None:
        raise MetricSyntaxError("missing 'dim n' declaration")
    for i in range(1, dim + 1):
        for j in range(i, dim + 1):
            if (i, j) not in comps:
                raise MetricSyntaxError(f"missing component g{i}{j}")
    ordered = tuple(((i, j), comps[(i, j)]) for i in range(1, dim + 1) for j in range(i, dim + 1))
    bnds = tuple(bounds.get(k, (-math.inf, math.inf)) for k in range(1, dim + 1))
    return MetricSpec(dim=dim, components=ordered, bounds=bnds)


def eval_metric(spec: MetricSpec, x) -> np.ndarray:
    """Metric matrix at one chart point, checked for bounds and positivity."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"point must have {spec.dim} coordinates")
    if not spec.in_bounds(x):
        raise MetricDomainError(f"point {x.tolist()} is outside the chart bounds {spec.bounds}")
    g = spec.matrix(x)
    if not np.all(np.isfinite(g)):
        raise MetricDomainError(f"metric is not finite at {x.tolist()}")
    w = np.linalg.eigvalsh(g)
    if w[0] <= 0:
        raise MetricDomainError(f"metric is not positive definite at {x.tolist()} (eigenvalue {w[0]:.6g})")
    return g


# ---------------------------------------------------------------- builtins
# Builtins live in models.py; re-exported here for the MetricSpec factory.


def load_metric(source: str, **params) -> MetricSpec:
    """Resolve ``source`` as a builtin tag or a path to a metric document."""
    from . import models

    if source in models.BUILTINS:
        return models.builtin(source, **params)
    with open(source, encoding="utf-8") as fh:
        return parse_metric(fh.read())
