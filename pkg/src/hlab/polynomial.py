"""Sparse real polynomials in (x1..xn, y1..yn).

Used for exact radial integration when reconstructing Lagrangians and
dissipation functions from polynomial data.
"""
from __future__ import annotations

from collections import defaultdict

from .expr import BinOp, HlabError, Neg, Num, Pow, ScalarField, Var, _int_exponent, parse_scalar_field


class NotPolynomial(HlabError):
    pass


class Poly:
    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms=None):
        self.n = n
        self.terms: dict[tuple[int, ...], float] = {}
        for e, c in (terms or {}).items():
            if c != 0.0:
                self.terms[tuple(e)] = float(c)

    @classmethod
    def const(cls, n: int, c: float) -> "Poly":
        return cls(n, {(0,) * (2 * n): c})

    @classmethod
    def var(cls, n: int, kind: str, index: int) -> "Poly":
        e = [0] * (2 * n)
        e[(index - 1) + (n if kind == "y" else 0)] = 1
        return cls(n, {tuple(e): 1.0})

    @classmethod
    def from_field(cls, f: ScalarField) -> "Poly":
        return _from_ast(f.ast, f.dim)

    def __add__(self, o: "Poly") -> "Poly":
        out = defaultdict(float, self.terms)
        for e, c in o.terms.items():
            out[e] += c
        return Poly(self.n, out)

    def __neg__(self) -> "Poly":
        return Poly(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, o: "Poly") -> "Poly":
        return self + (-o)

    def __mul__(self, o) -> "Poly":
        if isinstance(o, (int, float)):
            return Poly(self.n, {e: c * o for e, c in self.terms.items()})
        out = defaultdict(float)
        for e1, c1 in self.terms.items():
            for e2, c2 in o.terms.items():
                out[tuple(a + b for a, b in zip(e1, e2))] += c1 * c2
        return Poly(self.n, out)

    __rmul__ = __mul__

    def diff(self, kind: str, index: int) -> "Poly":
        k = (index - 1) + (self.n if kind == "y" else 0)
        out = {}
        for e, c in self.terms.items():
            if e[k]:
                e2 = list(e)
                e2[k] -= 1
                out[tuple(e2)] = c * e[k]
        return Poly(self.n, out)

    def y_degree(self, e) -> int:
        return sum(e[self.n:])

    def drop_pure_x(self) -> "Poly":
        return Poly(self.n, {e: c for e, c in self.terms.items() if self.y_degree(e) > 0})

    def cleaned(self, rel: float = 1e-13) -> "Poly":
        if not self.terms:
            return self
        big = max(abs(c) for c in self.terms.values())
        return Poly(self.n, {e: c for e, c in self.terms.items() if abs(c) > rel * big})

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def to_expr(self) -> str:
        if not self.terms:
            return "0"
        n = self.n
        names = [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
        parts = []
        for e in sorted(self.terms, key=lambda e: (sum(e), tuple(-a for a in e))):
            c = self.terms[e]
            if c == 1.0 and any(e):
                factors = []
            else:
                factors = [repr(int(c)) if c.is_integer() and abs(c) < 2**53 else repr(c)]
            for name, k in zip(names, e):
                if k == 1:
                    factors.append(name)
                elif k > 1:
                    factors.append(f"{name}^{k}")
            parts.append("*".join(factors))
        out = parts[0]
        for part in parts[1:]:
            out += " - " + part[1:] if part.startswith("-") else " + " + part
        return out

    def to_field(self) -> ScalarField:
        return parse_scalar_field(self.to_expr(), self.n)


def _from_ast(node, n: int) -> Poly:
    if isinstance(node, Num):
        return Poly.const(n, node.value)
    if isinstance(node, Var):
        return Poly.var(n, node.kind, node.index)
    if isinstance(node, Neg):
        return -_from_ast(node.arg, n)
    if isinstance(node, BinOp):
        a = _from_ast(node.left, n)
        b = _from_ast(node.right, n)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        zero = (0,) * (2 * n)
        if set(b.terms) <= {zero} and b.terms.get(zero, 0.0) != 0.0:
            return a * (1.0 / b.terms[zero])
        raise NotPolynomial("division by a non-constant")
    if isinstance(node, Pow):
        k = _int_exponent(node.exponent)
        if k is None or k < 0:
            raise NotPolynomial("non-integer or negative exponent")
        base = _from_ast(node.base, n)
        out = Poly.const(n, 1.0)
        for _ in range(k):
            out = out * base
        return out
    raise NotPolynomial(f"{type(node).__name__} is not polynomial")


def radial_integral(comps: list[Poly]) -> Poly:
    """P with dP/dy^i = comps[i] when the comps are d_J-closed; P(x, 0) = 0.

    Each y-monomial of total degree k in comps[i], times y^i, is divided by
    k + 1 (exact integral over t in [0, 1] of comps[i](x, t y) y^i).
    """
    n = comps[0].n
    out = Poly(n)
    for i, p in enumerate(comps):
        yi = Poly.var(n, "y", i + 1)
        scaled = Poly(n, {e: c / (p.y_degree(e) + 1) for e, c in p.terms.items()})
        out = out + scaled * yi
    return out
