"""Search for semi-basic 1-forms satisfying a condition set.

Every supported condition set is affine in theta, so with theta expanded in
a monomial basis the sampled residuals form a linear system ``A c = b``.
Near-nullspace directions of ``A`` (plus a least-squares particular solution
when ``b != 0``) are the candidate multipliers; the ones with vanishing
``g_ij = d theta_i/dy^j`` are basic 1-forms and get filtered out.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import conditions as C
from .expr import HlabError, ScalarField, parse_scalar_field
from .geometry import FieldStack, SemiBasicOneForm, SodeSystem
from .polynomial import NotPolynomial, Poly, radial_integral

log = logging.getLogger(__name__)

CONDITION_SETS = ("D1", "H", "GH", "G2-core")
DEFAULT_RANK_TOL = 1e-9
ROWS_PER_UNKNOWN = 4


class RankWarning(UserWarning):
    pass


class ClosednessError(HlabError):
    pass


def _monomials(n: int, deg: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(deg + 1):
        for e in itertools.product(range(total + 1), repeat=n):
            if sum(e) == total:
                out.append(e)
    return out


@dataclass(frozen=True)
class AnsatzBasis:
    """theta_i = sum over (component, x^a y^b) of c_m * monomial, one component per element."""
    n: int
    deg_y: int
    deg_x: int
    elements: tuple  # (component index, exponent tuple of length 2n)

    @classmethod
    def monomial(cls, n: int, deg_y: int, deg_x: int) -> "AnsatzBasis":
        elems = []
        for i in range(n):
            for b in _monomials(n, deg_y):
                for a in _monomials(n, deg_x):
                    elems.append((i, tuple(a) + tuple(b)))
        return cls(n, deg_y, deg_x, tuple(elems))

    @classmethod
    def empty(cls, n: int) -> "AnsatzBasis":
        return cls(n, 0, 0, ())

    def __len__(self) -> int:
        return len(self.elements)

    def monomial_strings(self) -> list[str]:
        return [Poly(self.n, {e: 1.0}).to_expr() for _, e in self.elements]

    def describe(self) -> list[dict]:
        return [{"component": i + 1, "monomial": s}
                for (i, _), s in zip(self.elements, self.monomial_strings())]

    def element_stacks(self, X: np.ndarray, Y: np.ndarray) -> list[FieldStack]:
        """Jets of each basis element as an n-component 1-form."""
        m = X.shape[0]
        monos = sorted({e for _, e in self.elements})
        if not monos:
            return []
        fields = [Poly(self.n, {e: 1.0}).to_field() for e in monos]
        ms = FieldStack(fields, X, Y)
        pos = {e: k for k, e in enumerate(monos)}
        out = []
        for comp, e in self.elements:
            fs = C.zero_stack(m, self.n, self.n)
            k = pos[e]
            for attr in ("v", "dx", "dy", "dxdx", "dxdy", "dydy"):
                getattr(fs, attr)[:, comp] = getattr(ms, attr)[:, k]
            out.append(fs)
        return out

    def gram_rank(self, X: np.ndarray, Y: np.ndarray) -> int:
        """Numerical rank of the sampled basis functions (full rank = independent)."""
        if not self.elements:
            return 0
        M = np.stack([fs.v.reshape(-1) for fs in self.element_stacks(X, Y)], axis=1)
        return int(np.linalg.matrix_rank(M))

    def theta_polys(self, c: np.ndarray) -> list[Poly]:
        polys = [Poly(self.n) for _ in range(self.n)]
        for coef, (comp, e) in zip(c, self.elements):
            if coef != 0.0:
                polys[comp] = polys[comp] + Poly(self.n, {e: float(coef)})
        return [p.cleaned() for p in polys]

    def theta(self, c: np.ndarray) -> SemiBasicOneForm:
        return SemiBasicOneForm(self.n, tuple(p.to_field() for p in self.theta_polys(c)))


@dataclass
class LinearSystem:
    A: np.ndarray
    b: np.ndarray
    labels: list  # (part name, sample index, component index) per row
    condition_set: str
    samples: tuple = None  # (X, Y) actually used

    @property
    def shape(self):
        return self.A.shape


def _residual_parts(cset: str, ctx: C.Context, th: FieldStack, sg) -> dict:
    if cset == "D1":
        return C.res_d1(ctx, th)
    if cset in ("H", "GH"):
        s = sg if cset == "GH" else None
        out = {}
        for tag, parts in (("LGH1", C.res_lgh1(ctx, th)), ("LGH2", C.res_lgh2(ctx, th, s)),
                           ("LGH3", C.res_lgh3(ctx, th, s))):
            out.update({f"{tag}.{k}": v for k, v in parts.items()})
        return out
    if cset == "G2-core":
        return C.res_g2(ctx, th)
    raise ValueError(f"unknown condition set {cset!r}; expected one of {CONDITION_SETS}")


def _flatten(parts: dict, keep: np.ndarray) -> tuple[np.ndarray, list]:
    cols, labels = [], []
    idx = np.flatnonzero(keep)
    for name, arr in parts.items():
        a = np.asarray(arr).reshape(keep.shape[0], -1)[keep]
        cols.append(a.reshape(-1))
        labels.extend((name, int(s), int(k)) for s in idx for k in range(a.shape[1]))
    return (np.concatenate(cols) if cols else np.zeros(0)), labels


def assemble(sode: SodeSystem, sigma, basis: AnsatzBasis, condition_set: str,
             domain: C.SampleDomain) -> LinearSystem:
    """Collocation system of ``condition_set`` for theta = sum c_m basis_m."""
    if condition_set not in CONDITION_SETS:
        raise ValueError(f"unknown condition set {condition_set!r}")
    if condition_set == "GH" and sigma is None:
        raise ValueError("condition set GH needs sigma")
    k = len(basis)
    if k == 0:
        warnings.warn("empty ansatz basis: nothing to solve for", RankWarning, stacklevel=2)
        return LinearSystem(np.zeros((0, 0)), np.zeros(0), [], condition_set)
    # enough samples for ROWS_PER_UNKNOWN rows per unknown
    probe = C.Context.from_domain(sode, C.SampleDomain(**{**domain.as_dict(), "count": 1}))
    zero = C.zero_stack(1, sode.dim, sode.dim)
    rows_per_sample = sum(np.asarray(v).reshape(1, -1).shape[1]
                          for v in _residual_parts(condition_set, probe, zero, None).values())
    count = max(domain.count, math.ceil(ROWS_PER_UNKNOWN * k / max(rows_per_sample, 1)))
    if count != domain.count:
        domain = C.SampleDomain(**{**domain.as_dict(), "count": count})
    ctx = C.Context.from_domain(sode, domain)
    if basis.gram_rank(ctx.X, ctx.Y) < k:
        warnings.warn("ansatz basis is degenerate on the samples", RankWarning, stacklevel=2)
    sg = ctx.oneform(sigma) if condition_set == "GH" else None
    keep = ~ctx.mask(sg)
    if (~keep).sum() > C.MAX_SKIP_FRACTION * ctx.m:
        log.warning("%d of %d samples skipped while assembling", (~keep).sum(), ctx.m)
    zero = C.zero_stack(ctx.m, ctx.n, ctx.n)
    r0, labels = _flatten(_residual_parts(condition_set, ctx, zero, sg), keep)
    cols = []
    for fs in basis.element_stacks(ctx.X, ctx.Y):
        r, _ = _flatten(_residual_parts(condition_set, ctx, fs, sg), keep)
        cols.append(r - r0)
    A = np.stack(cols, axis=1)
    b = -r0
    if A.shape[0] < 2 * k:
        warnings.warn(f"only {A.shape[0]} rows for {k} unknowns", RankWarning, stacklevel=2)
    return LinearSystem(A, b, labels, condition_set, (ctx.X, ctx.Y))


@dataclass
class NullspaceResult:
    particular: Optional[np.ndarray]
    null: list
    singular_values: np.ndarray
    rank: int

    def vectors(self) -> list:
        return ([self.particular] if self.particular is not None else []) + list(self.null)


def solve_nullspace(ls: LinearSystem, rank_tol: float = DEFAULT_RANK_TOL) -> NullspaceResult:
    """Orthonormal near-nullspace of A (s <= rank_tol * s_max) and, if b != 0,
    the minimum-norm least-squares solution."""
    A, b = ls.A, ls.b
    if A.size == 0:
        return NullspaceResult(None, [], np.zeros(0), 0)
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > rank_tol * smax)) if smax > 0 else 0
    null = [Vt[i].copy() for i in range(rank, Vt.shape[0])]
    part = None
    if np.any(b != 0.0):
        coef = (U[:, :rank].T @ b) / s[:rank]
        part = Vt[:rank].T @ coef
    return NullspaceResult(part, null, s, rank)


def multiplier_map(basis: AnsatzBasis, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Linear map c -> all g_ij values at the samples, as a matrix."""
    return np.stack([fs.dy.reshape(-1) for fs in basis.element_stacks(X, Y)], axis=1)


def filter_nontrivial(vectors: list, basis: AnsatzBasis, X: np.ndarray, Y: np.ndarray,
                      tol: float = C.NONTRIVIAL_TOL) -> list:
    """Drop basic (g = 0) directions and normalise so that max |g_ij| = 1.

    The family spanned by ``vectors`` is split into its g = 0 part and the
    orthogonal complement; only the latter is returned.
    """
    if not vectors:
        return []
    K = np.stack(vectors, axis=1)
    Q, _ = np.linalg.qr(K)
    Gm = multiplier_map(basis, X, Y)
    GK = Gm @ Q
    _, s, Vt = np.linalg.svd(GK, full_matrices=False)
    out = []
    for sv, v in zip(s, Vt):
        c = Q @ v
        g = Gm @ c
        gmax = np.max(np.abs(g)) if g.size else 0.0
        if gmax <= tol:
            continue
        c = c / gmax
        if g[np.argmax(np.abs(g))] < 0:
            c = -c
        c[np.abs(c) < 1e-13] = 0.0
        out.append(c)
    return out


# --- reconstruction -----------------------------------------------------------

def _as_polys(theta, n: int) -> list[Poly]:
    if isinstance(theta, SemiBasicOneForm):
        return [Poly.from_field(c) for c in theta.comp]
    return [p if isinstance(p, Poly) else Poly.from_field(parse_scalar_field(str(p), n))
            for p in theta]


def reconstruct_lagrangian(theta, domain: Optional[C.SampleDomain] = None,
                           tol: float = C.DEFAULT_TOL, post_tol: float = 1e-10) -> ScalarField:
    """L with dL/dy^i = theta_i and L(x, 0) = 0, for polynomial d_J-closed theta."""
    n = theta.dim if isinstance(theta, SemiBasicOneForm) else len(theta)
    polys = _as_polys(theta, n)
    form = SemiBasicOneForm(n, tuple(p.to_field() for p in polys))
    sode = SodeSystem.flat(n)
    domain = domain or C.SampleDomain(n)
    ctx = C.Context.from_domain(sode, domain)
    th = ctx.oneform(form)
    pre = C.make_report("LGH1", C.res_lgh1(ctx, th), ctx.mask(th), tol)
    if not pre.passed:
        raise ClosednessError(f"theta is not d_J-closed (max residual {pre.max:.3e})")
    L = radial_integral(polys).cleaned()
    Lf = L.to_field()
    Ls = ctx.stack([Lf])
    err = np.abs(Ls.dy[:, 0] - th.v)[~ctx.mask(th, Ls)]
    scale = max(1.0, float(np.abs(th.v).max()) if th.v.size else 1.0)
    if err.size and err.max() > post_tol * scale:
        raise ClosednessError(f"post-check failed: |dL/dy - theta| = {err.max():.3e}")
    return Lf


def reconstruct_dissipation(sode: SodeSystem, L, domain: Optional[C.SampleDomain] = None,
                            tol: float = C.DEFAULT_TOL) -> ScalarField:
    """D = S(L) - 2 f with df/dy^i = delta L/delta x^i, pure-x part dropped."""
    n = sode.dim
    Lp = L if isinstance(L, Poly) else Poly.from_field(
        L if isinstance(L, ScalarField) else parse_scalar_field(str(L), n))
    try:
        G = [Poly.from_field(g) for g in sode.G]
    except NotPolynomial as exc:
        raise NotPolynomial(f"spray coefficients must be polynomial: {exc}") from None
    Ly = [Lp.diff("y", i + 1) for i in range(n)]
    hL = []
    for i in range(n):
        acc = Lp.diff("x", i + 1)
        for l in range(n):
            acc = acc - G[l].diff("y", i + 1) * Ly[l]
        hL.append(acc)
    scale = max([p.max_abs_coeff() for p in hL] + [1.0])
    for i in range(n):
        for j in range(i + 1, n):
            asym = hL[i].diff("y", j + 1) - hL[j].diff("y", i + 1)
            if asym.max_abs_coeff() > tol * scale:
                raise ClosednessError("delta L/delta x is not d_J-closed (D1 fails for d_J L)")
    f = radial_integral(hL)
    SL = Poly(n)
    for k in range(n):
        SL = SL + Poly.var(n, "y", k + 1) * Lp.diff("x", k + 1) - G[k] * Ly[k] * 2.0
    D = (SL - f * 2.0).drop_pure_x().cleaned()
    Df = D.to_field()
    Lf = Lp.to_field()
    domain = domain or C.SampleDomain(n)
    rep = C.check_lagrange(sode, domain, tol, L=Lf, D=Df)
    if not rep.passed:
        raise ClosednessError(f"post-check delta_S L = d_J D failed (max {rep.max:.3e})")
    return Df


# --- pipeline ------------------------------------------------------------------

@dataclass
class Solution:
    coefficients: np.ndarray
    theta: SemiBasicOneForm
    L: Optional[ScalarField] = None
    D: Optional[ScalarField] = None
    reports: list = dc_field(default_factory=list)
    note: str = ""

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_json(self) -> dict:
        return {"coefficients": [float(c) for c in self.coefficients],
                "theta": [str(c) for c in self.theta.comp],
                "theta_poly": [Poly.from_field(c).to_expr() for c in self.theta.comp],
                "L": Poly.from_field(self.L).to_expr() if self.L is not None else None,
                "D": Poly.from_field(self.D).to_expr() if self.D is not None else None,
                "verification": [r.to_json() for r in self.reports],
                "note": self.note}


@dataclass
class SolveResult:
    condition_set: str
    basis: AnsatzBasis
    system_shape: tuple
    rank: int
    nullity: int
    solutions: list

    @property
    def status(self) -> str:
        return "ok" if self.solutions else "no solutions"

    def to_json(self) -> dict:
        return {"condition_set": self.condition_set,
                "basis": {"deg_y": self.basis.deg_y, "deg_x": self.basis.deg_x,
                          "size": len(self.basis), "elements": self.basis.describe()},
                "system_shape": list(self.system_shape), "rank": self.rank,
                "nullity": self.nullity, "status": self.status,
                "solutions": [s.to_json() for s in self.solutions]}


def verify_solution(sode: SodeSystem, cset: str, theta: SemiBasicOneForm, sigma,
                    domain: C.SampleDomain, tol: float, L=None, D=None) -> list:
    if cset == "D1":
        reps = [C.check_d1(sode, domain, tol, theta=theta)]
        if L is not None and D is not None:
            reps.append(C.check_lagrange(sode, domain, tol, L=L, D=D, cid="DISSIPATIVE"))
        return reps
    if cset == "H":
        return C.check_classic(sode, domain, tol, theta=theta)
    if cset == "GH":
        return C.check_lgh(sode, domain, tol, theta=theta, sigma=sigma)
    return [C.check_g2(sode, domain, tol, theta=theta)]


def solve(sode: SodeSystem, basis: AnsatzBasis, condition_set: str, domain: C.SampleDomain,
          sigma=None, rank_tol: float = DEFAULT_RANK_TOL,
          verify_tol: float = 10 * C.DEFAULT_TOL) -> SolveResult:
    """assemble -> nullspace -> non-trivial filter -> reconstruct L (and D for D1)."""
    ls = assemble(sode, sigma, basis, condition_set, domain)
    ns = solve_nullspace(ls, rank_tol)
    if ls.A.size == 0:
        return SolveResult(condition_set, basis, ls.shape, 0, 0, [])
    X, Y = ls.samples
    if ns.particular is not None:
        # inhomogeneous: the particular solution is the candidate, null directions are gauge
        resid = np.linalg.norm(ls.A @ ns.particular - ls.b)
        cands = [ns.particular] if resid <= 1e-6 * max(1.0, np.linalg.norm(ls.b)) else []
        cands = [c for c in cands if np.abs(multiplier_map(basis, X, Y) @ c).max() > C.NONTRIVIAL_TOL]
    else:
        cands = filter_nontrivial(ns.null, basis, X, Y)
    sols = []
    for c in cands:
        theta = basis.theta(c)
        sol = Solution(c, theta)
        try:
            sol.L = reconstruct_lagrangian(theta, domain)
            if condition_set == "D1":
                sol.D = reconstruct_dissipation(sode, sol.L, domain)
        except (ClosednessError, NotPolynomial) as exc:
            sol.note = str(exc)
        sol.reports = verify_solution(sode, condition_set, theta, sigma, domain, verify_tol,
                                      sol.L, sol.D)
        sols.append(sol)
    return SolveResult(condition_set, basis, ls.shape, ns.rank, len(ns.null), sols)
