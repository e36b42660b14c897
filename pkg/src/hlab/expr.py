"""Expression language for fields on the tangent space, with exact 2-jets.

Grammar (EBNF)::

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = ("-" | "+") unary | power ;
    power  = atom [ "^" unary ] ;               (* right associative *)
    atom   = number | var | func "(" expr ")" | "(" expr ")" ;
    var    = ("x" | "y") digit { digit } ;       (* x1..xn, y1..yn *)
    func   = "sqrt" | "sin" | "cos" | "exp" | "log" ;
    number = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;

``-y1^2`` parses as ``-(y1^2)``. ``abs`` and every other function name are
rejected so that all fields stay twice differentiable.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .jets import JetBatch

FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log")


class HlabError(Exception):
    """Base class for all library errors."""


class ExprSyntaxError(HlabError):
    def __init__(self, message: str, pos: int, src: str = ""):
        self.pos = pos
        self.src = src
        super().__init__(f"{message} at position {pos}" + (f" in {src!r}" if src else ""))


class DimensionError(HlabError):
    pass


class UnsupportedFunction(HlabError):
    pass


class EvalError(HlabError):
    def __init__(self, message: str, subexpr: str = ""):
        self.subexpr = subexpr
        super().__init__(message + (f" (in {subexpr})" if subexpr else ""))


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "y"
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Call]


def serialize(node: Node) -> str:
    """Fully parenthesised text that re-parses to the same tree shape."""
    if isinstance(node, Num):
        s = repr(float(node.value))
        return f"({s})" if node.value < 0 else s
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        return f"(-{serialize(node.arg)})"
    if isinstance(node, BinOp):
        return f"({serialize(node.left)} {node.op} {serialize(node.right)})"
    if isinstance(node, Pow):
        return f"({serialize(node.base)}^{serialize(node.exponent)})"
    if isinstance(node, Call):
        return f"{node.fn}({serialize(node.arg)})"
    raise TypeError(node)


def variables(node: Node) -> set[tuple[str, int]]:
    if isinstance(node, Var):
        return {(node.kind, node.index)}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return variables(node.arg)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return variables(node.base) | variables(node.exponent)


# --- parser ----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(src: str):
    pos = 0
    out = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, dim: int):
        self.src = src
        self.dim = dim
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, pos = self.take()
        if val != text or kind not in ("op",):
            raise ExprSyntaxError(f"expected {text!r}, found {val or 'end of input'!r}", pos, self.src)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos, self.src)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            m = re.fullmatch(r"([xy])(\d+)", val)
            if m:
                idx = int(m.group(2))
                if idx < 1:
                    raise ExprSyntaxError(f"variable index must be >= 1: {val}", pos, self.src)
                if idx > self.dim:
                    raise DimensionError(f"{val} exceeds dimension {self.dim}")
                return Var(m.group(1), idx)
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise UnsupportedFunction(
                        f"function {val!r} is not supported (allowed: {', '.join(FUNCTIONS)})")
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ExprSyntaxError(f"unknown identifier {val!r}", pos, self.src)
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", pos, self.src)


@dataclass(frozen=True)
class ScalarField:
    dim: int
    ast: Node

    def __str__(self) -> str:
        return serialize(self.ast)

    def uses_y(self) -> bool:
        return any(kind == "y" for kind, _ in variables(self.ast))

    def evaluate(self, X: np.ndarray, Y: np.ndarray) -> "FieldEval":
        return evaluate(self, X, Y)


def parse_scalar_field(src: str, dim: int, *, basic: bool = False) -> ScalarField:
    """Parse ``src`` as a field in x1..x{dim}, y1..y{dim}.

    With ``basic=True`` any y-variable raises DimensionError.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", 0, "")
    field = ScalarField(dim, _Parser(src, dim).parse())
    if basic and field.uses_y():
        raise DimensionError(f"basic field {src!r} must not depend on y")
    return field


def as_field(f, dim: int) -> ScalarField:
    if isinstance(f, ScalarField):
        return f
    if isinstance(f, (int, float)):
        return ScalarField(dim, Num(float(f)))
    return parse_scalar_field(f, dim)


# --- evaluation ------------------------------------------------------------

@dataclass
class FieldEval:
    jet: JetBatch
    bad: np.ndarray  # samples with a domain violation or non-finite entry
    culprit: Optional[str]


def _int_exponent(node: Node) -> Optional[int]:
    sign = 1
    if isinstance(node, Neg):
        sign, node = -1, node.arg
    if isinstance(node, Num) and float(node.value).is_integer():
        return sign * int(node.value)
    return None


class _Evaluator:
    def __init__(self, X: np.ndarray, Y: np.ndarray):
        self.X = X
        self.Y = Y
        self.m, self.n = X.shape
        self.d = 2 * self.n
        self.bad = np.zeros(self.m, dtype=bool)
        self.culprit: Optional[str] = None

    def flag(self, mask: np.ndarray, node: Node) -> None:
        new = mask & ~self.bad
        if new.any() and self.culprit is None:
            self.culprit = serialize(node)
        self.bad |= mask

    def run(self, node: Node) -> JetBatch:
        out = self.visit(node)
        self.flag(~out.finite_mask(), node)
        return out

    def visit(self, node: Node) -> JetBatch:
        if isinstance(node, Num):
            return JetBatch.constant(node.value, self.m, self.d)
        if isinstance(node, Var):
            k = node.index - 1
            if node.kind == "x":
                return JetBatch.coordinate(self.X[:, k], k, self.d)
            return JetBatch.coordinate(self.Y[:, k], self.n + k, self.d)
        if isinstance(node, Neg):
            return -self.visit(node.arg)
        if isinstance(node, BinOp):
            a = self.visit(node.left)
            b = self.visit(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            self.flag(b.v == 0.0, node)
            return a * self._recip(b)
        if isinstance(node, Pow):
            return self._pow(node)
        if isinstance(node, Call):
            return self._call(node)
        raise TypeError(node)

    @staticmethod
    def _recip(b: JetBatch) -> JetBatch:
        r = 1.0 / b.v
        return b.apply(r, -r * r, 2.0 * r * r * r)

    def _pow(self, node: Pow) -> JetBatch:
        b = self.visit(node.base)
        k = _int_exponent(node.exponent)
        if k is not None:
            if k < 0:
                self.flag(b.v == 0.0, node)
            f0 = np.power(b.v, float(k))
            f1 = k * np.power(b.v, float(k - 1)) if k != 0 else np.zeros(self.m)
            f2 = (k * (k - 1) * np.power(b.v, float(k - 2))
                  if k not in (0, 1) else np.zeros(self.m))
            return b.apply(f0, f1, f2)
        # real exponent: exp(e * log b), requires b > 0
        e = self.visit(node.exponent)
        self.flag(~(b.v > 0.0), node)
        lb = np.log(b.v)
        logb = b.apply(lb, 1.0 / b.v, -1.0 / (b.v * b.v))
        prod = e * logb
        ev = np.exp(prod.v)
        return prod.apply(ev, ev, ev)

    def _call(self, node: Call) -> JetBatch:
        u = self.visit(node.arg)
        v = u.v
        fn = node.fn
        if fn == "sin":
            s, c = np.sin(v), np.cos(v)
            return u.apply(s, c, -s)
        if fn == "cos":
            s, c = np.sin(v), np.cos(v)
            return u.apply(c, -s, -c)
        if fn == "exp":
            e = np.exp(v)
            return u.apply(e, e, e)
        if fn == "log":
            self.flag(~(v > 0.0), node)
            return u.apply(np.log(v), 1.0 / v, -1.0 / (v * v))
        if fn == "sqrt":
            self.flag(~(v >= 0.0), node)
            s = np.sqrt(v)
            return u.apply(s, 0.5 / s, -0.25 / (s * v))
        raise UnsupportedFunction(fn)


def evaluate(field: ScalarField, X, Y) -> FieldEval:
    """Evaluate ``field`` with 2-jets at every row of (X, Y), shape (m, n)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape or X.shape[1] != field.dim:
        raise DimensionError(f"point arrays {X.shape}/{Y.shape} do not match dim {field.dim}")
    ev = _Evaluator(X, Y)
    with np.errstate(all="ignore"):
        jet = ev.run(field.ast)
    return FieldEval(jet, ev.bad, ev.culprit)


def values(field: ScalarField, X, Y) -> np.ndarray:
    """Plain values (no derivatives); non-finite where the field is undefined."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))

    def go(node):
        if isinstance(node, Num):
            return np.full(X.shape[0], node.value)
        if isinstance(node, Var):
            return (X if node.kind == "x" else Y)[:, node.index - 1]
        if isinstance(node, Neg):
            return -go(node.arg)
        if isinstance(node, BinOp):
            a, b = go(node.left), go(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            return np.where(b == 0.0, np.nan, a / np.where(b == 0.0, 1.0, b))
        if isinstance(node, Pow):
            b = go(node.base)
            k = _int_exponent(node.exponent)
            if k is not None:
                return np.power(b, float(k))
            return np.where(b > 0.0, np.exp(go(node.exponent) * np.log(np.abs(b))), np.nan)
        if isinstance(node, Call):
            u = go(node.arg)
            if node.fn == "log":
                return np.where(u > 0.0, np.log(np.abs(u)), np.nan)
            if node.fn == "sqrt":
                return np.where(u >= 0.0, np.sqrt(np.abs(u)), np.nan)
            return getattr(np, node.fn)(u)
        raise TypeError(node)

    with np.errstate(all="ignore"):
        return np.asarray(go(field.ast), dtype=float)


@dataclass(frozen=True)
class Point:
    x: np.ndarray
    y: np.ndarray

    def __init__(self, x, y):
        object.__setattr__(self, "x", np.asarray(x, dtype=float).reshape(-1))
        object.__setattr__(self, "y", np.asarray(y, dtype=float).reshape(-1))
        if self.x.shape != self.y.shape:
            raise DimensionError("x and y must have the same length")

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class Jet2:
    value: float
    dx: np.ndarray
    dy: np.ndarray
    dxdx: np.ndarray
    dxdy: np.ndarray
    dydy: np.ndarray


def eval_jet2(f: ScalarField, p: Point) -> Jet2:
    res = evaluate(f, p.x[None, :], p.y[None, :])
    if res.bad[0]:
        raise EvalError("field is not evaluable at this point", res.culprit or str(f))
    n = f.dim
    H = res.jet.hessian()[0]
    g = res.jet.g[0]
    return Jet2(float(res.jet.v[0]), g[:n].copy(), g[n:].copy(),
                H[:n, :n].copy(), H[:n, n:].copy(), H[n:, n:].copy())


def euler_residual(f: ScalarField, p: Point, deg: float) -> float:
    """C(f) - deg * f at p, with C = y^i d/dy^i."""
    j = eval_jet2(f, p)
    return float(p.y @ j.dy - deg * j.value)
