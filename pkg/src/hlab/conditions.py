"""Sampled verification of the Helmholtz-type condition sets.

Every checker evaluates signed residual components on a batch of sample
points and reduces them to a :class:`ConditionReport`. The residual kernels
(``res_*``) take jets of theta and sigma as :class:`FieldStack` objects and
are affine in theta, which is what the solver relies on.

Semi-basic 2-form components follow one convention everywhere: for a 1-form
a, ``(d_h a)_ij = delta a_i/delta x^j - delta a_j/delta x^i`` and
``(d_J a)_ij = d a_i/dy^j - d a_j/dy^i``; a basic 2-form omega is given by
the same kind of components, so that i_S omega has components
``omega_ik y^k`` and d_h(g_ij y^j dx^i) reproduces
``omega_ij = N^k_i g_kj - N^k_j g_ki`` for gyroscopic systems.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .expr import (DimensionError, Num, Point, ScalarField, as_field, parse_scalar_field,
                   serialize)
from .geometry import (FieldStack, GeometryBatch, SemiBasicOneForm, SodeSystem, Trajectory,
                       sode_batch)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
FD_TOL = 1e-5
NONTRIVIAL_TOL = 1e-6
REGULAR_TOL = 1e-8
MAX_SKIP_FRACTION = 0.10


# --- sampling ----------------------------------------------------------------

@dataclass(frozen=True)
class SampleDomain:
    n: int
    x_low: tuple = None
    x_high: tuple = None
    r_min: float = 0.5
    r_max: float = 2.0
    count: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.x_low is None:
            object.__setattr__(self, "x_low", (-1.0,) * self.n)
        if self.x_high is None:
            object.__setattr__(self, "x_high", (1.0,) * self.n)
        object.__setattr__(self, "x_low", tuple(float(v) for v in self.x_low))
        object.__setattr__(self, "x_high", tuple(float(v) for v in self.x_high))
        if len(self.x_low) != self.n or len(self.x_high) != self.n:
            raise DimensionError("x bounds must have n entries")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0.0 <= self.r_min <= self.r_max:
            raise ValueError("need 0 <= r_min <= r_max")

    def sample(self, homogeneous: bool = False) -> tuple[np.ndarray, np.ndarray]:
        if homogeneous and self.r_min <= 0.0:
            raise ValueError("homogeneous data needs r_min > 0 (slit tangent space)")
        rng = np.random.default_rng(self.seed)
        X = rng.uniform(self.x_low, self.x_high, size=(self.count, self.n))
        d = rng.standard_normal((self.count, self.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = rng.uniform(self.r_min, self.r_max, size=(self.count, 1))
        return X, d * r

    def as_dict(self) -> dict:
        return {"n": self.n, "x_low": list(self.x_low), "x_high": list(self.x_high),
                "r_min": self.r_min, "r_max": self.r_max, "count": self.count, "seed": self.seed}


# --- reports -----------------------------------------------------------------

@dataclass
class ConditionReport:
    id: str
    per_sample: np.ndarray
    tol: float
    skipped: int = 0
    parts: dict = dc_field(default_factory=dict)
    note: str = ""

    @property
    def count(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.per_sample)))

    @property
    def max(self) -> float:
        ok = self.per_sample[~np.isnan(self.per_sample)]
        return float(ok.max()) if ok.size else float("nan")

    @property
    def mean(self) -> float:
        ok = self.per_sample[~np.isnan(self.per_sample)]
        return float(ok.mean()) if ok.size else float("nan")

    @property
    def passed(self) -> bool:
        total = self.count + self.skipped
        if self.count == 0 or self.skipped > MAX_SKIP_FRACTION * total:
            return False
        return self.max <= self.tol

    def to_json(self) -> dict:
        out = {"id": self.id, "max": _num(self.max), "mean": _num(self.mean),
               "count": self.count, "skipped": self.skipped, "tol": self.tol,
               "pass": self.passed}
        if self.parts:
            out["parts"] = {k: _num(v) for k, v in self.parts.items()}
        if self.note:
            out["note"] = self.note
        return out

    def __str__(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{self.id:<12} {flag}  max={self.max:.3e} mean={self.mean:.3e} "
                f"tol={self.tol:.1e} n={self.count} skipped={self.skipped}")


def _num(v: float):
    return None if not np.isfinite(v) else float(v)


def make_report(cid: str, parts: dict[str, np.ndarray], bad: np.ndarray, tol: float,
                note: str = "") -> ConditionReport:
    """Reduce named (m, K) signed residual arrays to one report."""
    m = bad.shape[0]
    per = np.zeros(m)
    summary = {}
    for name, arr in parts.items():
        a = np.abs(np.asarray(arr, dtype=float).reshape(m, -1))
        ps = a.max(axis=1) if a.shape[1] else np.zeros(m)
        ps = np.where(bad, np.nan, ps)
        per = np.fmax(per, ps)
        ok = ps[~bad]
        summary[name] = float(ok.max()) if ok.size else float("nan")
    per[bad] = np.nan
    # a sample whose residual is non-finite despite evaluable inputs counts as skipped
    skipped_mask = bad | ~np.isfinite(per)
    per[skipped_mask] = np.nan
    return ConditionReport(cid, per, tol, int(skipped_mask.sum()), summary, note)


# --- basic 2-forms -----------------------------------------------------------

@dataclass(frozen=True)
class BasicTwoForm:
    """Antisymmetric matrix of x-only fields; only i < j entries are stored."""
    dim: int
    upper: tuple[ScalarField, ...]  # row-major over i < j

    @classmethod
    def from_upper(cls, n: int, entries: dict) -> "BasicTwoForm":
        """``entries`` maps 1-based (i, j), i < j, to expressions; others are 0."""
        ups = []
        for i in range(n):
            for j in range(i + 1, n):
                src = entries.get((i + 1, j + 1), "0")
                f = src if isinstance(src, ScalarField) else parse_scalar_field(str(src), n, basic=True)
                if f.uses_y():
                    raise DimensionError("basic 2-form components must not depend on y")
                ups.append(f)
        return cls(n, tuple(ups))

    @classmethod
    def zero(cls, n: int) -> "BasicTwoForm":
        return cls.from_upper(n, {})

    def entry(self, i: int, j: int) -> Optional[tuple[ScalarField, float]]:
        """(field, sign) for 0-based (i, j), or None on the diagonal."""
        if i == j:
            return None
        a, b, s = (i, j, 1.0) if i < j else (j, i, -1.0)
        n = self.dim
        k = a * n - a * (a + 1) // 2 + (b - a - 1)
        return self.upper[k], s

    def jets(self, X, Y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values (m,n,n), x-derivatives (m,n,n,n) [i,j,k] = d omega_ij/dx^k, bad mask."""
        n = self.dim
        fs = FieldStack(list(self.upper), X, Y) if self.upper else None
        m = X.shape[0]
        W = np.zeros((m, n, n))
        dW = np.zeros((m, n, n, n))
        bad = np.zeros(m, dtype=bool) if fs is None else fs.bad
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                W[:, i, j] = fs.v[:, k]
                W[:, j, i] = -fs.v[:, k]
                dW[:, i, j] = fs.dx[:, k]
                dW[:, j, i] = -fs.dx[:, k]
                k += 1
        return W, dW, bad

    def matrix_strings(self) -> list[list[str]]:
        n = self.dim
        out = [["0"] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                e = self.entry(i, j)
                if e is not None:
                    out[i][j] = str(e[0]) if e[1] > 0 else f"(-{e[0]})"
        return out


# --- evaluation context ------------------------------------------------------

class Context:
    """Samples plus the geometry of one semispray on them."""

    def __init__(self, sode: SodeSystem, X: np.ndarray, Y: np.ndarray):
        self.sode = sode
        self.X = X
        self.Y = Y
        self.geo: GeometryBatch = sode_batch(sode, X, Y)
        self.bad = self.geo.bad.copy()

    @classmethod
    def from_domain(cls, sode: SodeSystem, domain: SampleDomain,
                    homogeneous: bool = False) -> "Context":
        X, Y = domain.sample(homogeneous or sode.homog2)
        return cls(sode, X, Y)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def stack(self, fields) -> FieldStack:
        fs = FieldStack([as_field(f, self.n) for f in fields], self.X, self.Y)
        return fs

    def oneform(self, a) -> Optional[FieldStack]:
        if a is None:
            return None
        if isinstance(a, FieldStack):
            return a
        comps = a.comp if isinstance(a, SemiBasicOneForm) else a
        return self.stack(comps)

    def mask(self, *stacks) -> np.ndarray:
        bad = self.bad.copy()
        for s in stacks:
            if s is not None:
                bad |= s.bad
        return bad


def zero_stack(m: int, c: int, n: int) -> FieldStack:
    fs = FieldStack.__new__(FieldStack)
    fs.n = n
    fs.v = np.zeros((m, c))
    fs.dx = np.zeros((m, c, n))
    fs.dy = np.zeros((m, c, n))
    fs.dxdx = np.zeros((m, c, n, n))
    fs.dxdy = np.zeros((m, c, n, n))
    fs.dydy = np.zeros((m, c, n, n))
    fs.bad = np.zeros(m, dtype=bool)
    fs.culprit = None
    return fs


def _upper(A: np.ndarray) -> np.ndarray:
    n = A.shape[-1]
    iu = np.triu_indices(n, 1)
    return A[:, iu[0], iu[1]]


def _antisym(A: np.ndarray) -> np.ndarray:
    return A - np.swapaxes(A, 1, 2)


# --- residual kernels (signed, affine in theta) -----------------------------

def multiplier(th: FieldStack) -> np.ndarray:
    return th.dy


def nabla_g(ctx: Context, th: FieldStack) -> np.ndarray:
    return ctx.geo.nabla_02(th.dy, ctx.geo.spray_of_ygrad(th))


def g_phi_skew(ctx: Context, th: FieldStack) -> np.ndarray:
    """g_ik R^k_j - g_jk R^k_i."""
    gP = np.einsum("mik,mkj->mij", th.dy, ctx.geo.Phi)
    return _antisym(gP)


def d_h(ctx: Context, a: FieldStack) -> np.ndarray:
    """(d_h a)_ij = delta a_i/delta x^j - delta a_j/delta x^i."""
    return _antisym(ctx.geo.horizontal(a))


def d_J(a: FieldStack) -> np.ndarray:
    return _antisym(a.dy)


def curvature_cyclic(ctx: Context, th: FieldStack) -> np.ndarray:
    """g_il R^l_jk + g_kl R^l_ij + g_jl R^l_ki, indexed [m, i, j, k].

    The contraction is accumulated term by term in a fixed order so that the
    cyclic sum cancels exactly whenever two indices coincide.
    """
    g = th.dy
    R = ctx.geo.Curv
    n = ctx.n
    gR = np.zeros_like(R)
    for l in range(n):
        gR += g[:, :, l, None, None] * R[:, None, l, :, :]
    return gR + np.einsum("mkij->mijk", gR) + np.einsum("mjki->mijk", gR)


def res_lgh1(ctx: Context, th: FieldStack) -> dict:
    dg = th.dydy
    return {"g_sym": _upper(_antisym(th.dy)),
            "dg_sym": (dg - np.swapaxes(dg, 2, 3)).reshape(ctx.m, -1)}


def res_lgh2(ctx: Context, th: FieldStack, sg: Optional[FieldStack]) -> dict:
    r = g_phi_skew(ctx, th)
    if sg is not None:
        A = d_J(sg)
        SA = _antisym(ctx.geo.spray_of_ygrad(sg))
        r = r - 0.5 * ctx.geo.nabla_02(A, SA) + d_h(ctx, sg)
    return {"gphi": _upper(r)}


def res_lgh3(ctx: Context, th: FieldStack, sg: Optional[FieldStack]) -> dict:
    r = nabla_g(ctx, th)
    if sg is not None:
        r = r - 0.5 * (sg.dy + np.swapaxes(sg.dy, 1, 2))
    return {"nabla_g": r.reshape(ctx.m, -1)}


def res_d1(ctx: Context, th: FieldStack) -> dict:
    return {"dJ": _upper(d_J(th)), "dh": _upper(d_h(ctx, th))}


def res_d2(ctx: Context, th: FieldStack, Ds: Optional[FieldStack]) -> dict:
    out = res_lgh1(ctx, th)
    gp = g_phi_skew(ctx, th)
    ng = nabla_g(ctx, th)
    if Ds is not None:
        M = ctx.geo.horizontal_of_ygrad(Ds)[:, 0]   # [j, k] = delta_k (dD/dy^j)
        gp = gp - (np.swapaxes(M, 1, 2) - M)
        ng = ng - Ds.dydy[:, 0]
    out["gphi"] = _upper(gp)
    out["nabla_g"] = ng.reshape(ctx.m, -1)
    return out


def berwald_h_derivative(ctx: Context, th: FieldStack) -> np.ndarray:
    """g_ij|k, indexed [m, i, j, k]."""
    g = th.dy
    G = ctx.geo.Gamma
    dg = ctx.geo.horizontal_of_ygrad(th)
    return (dg - np.einsum("mil,mljk->mijk", g, G) - np.einsum("mlj,mlik->mijk", g, G))


def res_d3(ctx: Context, th: FieldStack) -> dict:
    out = res_lgh1(ctx, th)
    out["cyclic"] = curvature_cyclic(ctx, th).reshape(ctx.m, -1)
    gb = berwald_h_derivative(ctx, th)
    out["h_sym"] = (gb - np.swapaxes(gb, 2, 3)).reshape(ctx.m, -1)
    return out


def res_g1(ctx: Context, th: FieldStack, W: np.ndarray, dW: np.ndarray) -> dict:
    out = res_lgh1(ctx, th)
    cyc = dW + np.einsum("mjki->mijk", dW) + np.einsum("mkij->mijk", dW)
    out["gphi"] = _upper(g_phi_skew(ctx, th) - np.einsum("mijk,mk->mij", cyc, ctx.Y))
    out["nabla_g"] = nabla_g(ctx, th).reshape(ctx.m, -1)
    return out


def res_g2(ctx: Context, th: FieldStack) -> dict:
    out = res_lgh1(ctx, th)
    cyc = np.einsum("mijk,mk->mij", curvature_cyclic(ctx, th), ctx.Y)
    out["gphi"] = _upper(g_phi_skew(ctx, th) - cyc)
    out["nabla_g"] = nabla_g(ctx, th).reshape(ctx.m, -1)
    return out


def lagrange_differential_batch(ctx: Context, Ls: FieldStack) -> np.ndarray:
    """delta_S L components: S(dL/dy^i) - dL/dx^i, shape (m, n)."""
    return ctx.geo.spray_of_ygrad(Ls)[:, 0] - Ls.dx[:, 0]


def euler_batch(ctx: Context, fs: FieldStack, deg: float) -> np.ndarray:
    """C(f_c) - deg f_c for each field c."""
    return np.einsum("mk,mck->mc", ctx.Y, fs.dy) - deg * fs.v


# --- checkers ----------------------------------------------------------------

def _ctx(sode, domain, homogeneous=False) -> Context:
    if isinstance(domain, Context):
        return domain
    return Context.from_domain(sode, domain, homogeneous)


def _warn_trivial(ctx: Context, th: FieldStack) -> str:
    g = np.abs(th.dy[~ctx.mask(th)])
    if g.size == 0 or g.max() <= NONTRIVIAL_TOL:
        log.warning("theta is trivial on the sample set (max |g_ij| <= %g)", NONTRIVIAL_TOL)
        return "theta is trivial on the sample set"
    return ""


def check_lgh(sode, domain, tol=DEFAULT_TOL, *, theta, sigma=None,
              ids=("LGH1", "LGH2", "LGH3")) -> list[ConditionReport]:
    ctx = _ctx(sode, domain)
    th = ctx.oneform(theta)
    sg = ctx.oneform(sigma)
    bad = ctx.mask(th, sg)
    note = _warn_trivial(ctx, th)
    return [make_report(ids[0], res_lgh1(ctx, th), bad, tol, note),
            make_report(ids[1], res_lgh2(ctx, th, sg), bad, tol, note),
            make_report(ids[2], res_lgh3(ctx, th, sg), bad, tol, note)]


def check_classic(sode, domain, tol=DEFAULT_TOL, *, theta) -> list[ConditionReport]:
    return check_lgh(sode, domain, tol, theta=theta, sigma=None, ids=("H1", "H2", "H3"))


def check_d1(sode, domain, tol=DEFAULT_TOL, *, theta) -> ConditionReport:
    ctx = _ctx(sode, domain)
    th = ctx.oneform(theta)
    return make_report("D1", res_d1(ctx, th), ctx.mask(th), tol, _warn_trivial(ctx, th))


def check_d2(sode, domain, tol=DEFAULT_TOL, *, theta, D) -> ConditionReport:
    ctx = _ctx(sode, domain)
    th = ctx.oneform(theta)
    Ds = ctx.stack([D])
    return make_report("D2", res_d2(ctx, th, Ds), ctx.mask(th, Ds), tol, _warn_trivial(ctx, th))


def check_d3(sode, domain, tol=DEFAULT_TOL, *, theta) -> ConditionReport:
    ctx = _ctx(sode, domain)
    th = ctx.oneform(theta)
    return make_report("D3", res_d3(ctx, th), ctx.mask(th), tol, _warn_trivial(ctx, th))


def check_obstruction(sode, domain, tol=DEFAULT_TOL, *, theta) -> ConditionReport:
    ctx = _ctx(sode, domain)
    th = ctx.oneform(theta)
    return make_report("OBSTRUCTION",
                       {"cyclic": curvature_cyclic(ctx, th).reshape(ctx.m, -1)},
                       ctx.mask(th), tol)


def check_g1(sode, domain, tol=DEFAULT_TOL, *, theta, omega: BasicTwoForm) -> ConditionReport:
    ctx = _ctx(sode, domain)
    th = ctx.oneform(theta)
    W, dW, wbad = omega.jets(ctx.X, ctx.Y)
    return make_report("G1", res_g1(ctx, th, W, dW), ctx.mask(th) | wbad, tol,
                       _warn_trivial(ctx, th))


def check_g2(sode, domain, tol=DEFAULT_TOL, *, theta) -> ConditionReport:
    ctx = _ctx(sode, domain)
    th = ctx.oneform(theta)
    return make_report("G2", res_g2(ctx, th), ctx.mask(th), tol, _warn_trivial(ctx, th))


def omega_components(ctx: Context, th: FieldStack) -> tuple[np.ndarray, np.ndarray]:
    """omega_ij = (d_h theta)_ij and its y-derivatives [m, i, j, l]."""
    geo = ctx.geo
    # d/dy^l of delta theta_i/delta x^j
    Wy = (th.dxdy - np.einsum("mkjl,mik->mijl", geo.Gamma, th.dy)
          - np.einsum("mkj,mikl->mijl", geo.N, th.dydy))
    return d_h(ctx, th), Wy - np.swapaxes(Wy, 1, 2)


def derive_omega(sode: SodeSystem, theta, p: Point, domain=None,
                 tol=DEFAULT_TOL) -> tuple[np.ndarray, Optional[ConditionReport]]:
    """Basic 2-form d_h theta at p and a report that it does not depend on y."""
    ctx = Context(sode, p.x[None], p.y[None])
    th = ctx.oneform(theta)
    W, _ = omega_components(ctx, th)
    rep = None
    if domain is not None:
        dctx = _ctx(sode, domain)
        dth = dctx.oneform(theta)
        _, Wy = omega_components(dctx, dth)
        rep = make_report("OMEGA_BASIC", {"dy_omega": Wy.reshape(dctx.m, -1)},
                          dctx.mask(dth), tol)
    return W[0], rep


def lagrange_differential(sode: SodeSystem, L, p: Point) -> np.ndarray:
    ctx = Context(sode, p.x[None], p.y[None])
    return lagrange_differential_batch(ctx, ctx.stack([L]))[0]


def check_lagrange(sode, domain, tol=DEFAULT_TOL, *, L, sigma=None, D=None,
                   cid="LAGRANGE") -> ConditionReport:
    """delta_S L against sigma (or d_J D when D is given)."""
    ctx = _ctx(sode, domain)
    Ls = ctx.stack([L])
    dl = lagrange_differential_batch(ctx, Ls)
    stacks = [Ls]
    if D is not None:
        Ds = ctx.stack([D])
        dl = dl - Ds.dy[:, 0]
        stacks.append(Ds)
    elif sigma is not None:
        sg = ctx.oneform(sigma)
        dl = dl - sg.v
        stacks.append(sg)
    return make_report(cid, {"delta_S_L": dl}, ctx.mask(*stacks), tol)


def res_lie_closed(ctx: Context, th: FieldStack, sg: Optional[FieldStack]) -> dict:
    """Components of d(L_S theta - sigma) in (x, y) coordinates."""
    geo = ctx.geo
    Y, G = ctx.Y, geo.G
    dxS = (np.einsum("mk,mikj->mij", Y, th.dxdx)
           - 2.0 * np.einsum("mkj,mik->mij", geo.Gx, th.dy)
           - 2.0 * np.einsum("mk,mijk->mij", G, th.dxdy))
    dyS = (th.dx + np.einsum("mk,mikj->mij", Y, th.dxdy)
           - 2.0 * np.einsum("mkj,mik->mij", geo.N, th.dy)
           - 2.0 * np.einsum("mk,mikj->mij", G, th.dydy))
    if sg is not None:
        dxS = dxS - sg.dx
        dyS = dyS - sg.dy
    return {"xx": _upper(_antisym(dxS)),
            "yx": (dyS - np.swapaxes(th.dx, 1, 2)).reshape(ctx.m, -1),
            "yy": _upper(_antisym(th.dy))}


def check_lie_closed(sode, domain, tol=DEFAULT_TOL, *, theta, sigma=None) -> ConditionReport:
    ctx = _ctx(sode, domain)
    th = ctx.oneform(theta)
    sg = ctx.oneform(sigma)
    return make_report("LIE_CLOSED", res_lie_closed(ctx, th, sg), ctx.mask(th, sg), tol)


def energy_along(traj: Trajectory, L: ScalarField, n: int) -> np.ndarray:
    fs = FieldStack([as_field(L, n)], traj.xs, traj.ys)
    return np.einsum("mk,mk->m", traj.ys, fs.dy[:, 0]) - fs.v[:, 0]


def check_energy_variation(sode, traj: Trajectory, *, L, sigma=None, tol=None,
                           cid="ENERGY", stencil: int = 5) -> ConditionReport:
    """|dE_L/dt - sigma_k y^k| at interior nodes by centred differences.

    ``stencil`` is 5 (fourth order, the default) or 3 (second order). The
    default tolerance is 10 h^2 either way.
    """
    n = sode.dim
    h = traj.h
    if tol is None:
        tol = 10.0 * h * h
    E = energy_along(traj, L, n)
    if stencil == 3:
        dE = (E[2:] - E[:-2]) / (2.0 * h)
        inner = slice(1, -1)
    elif stencil == 5:
        dE = (E[:-4] - 8.0 * E[1:-3] + 8.0 * E[3:-1] - E[4:]) / (12.0 * h)
        inner = slice(2, -2)
    else:
        raise ValueError("stencil must be 3 or 5")
    xs, ys = traj.xs[inner], traj.ys[inner]
    if sigma is None:
        iss = np.zeros(len(dE))
        bad = np.zeros(len(dE), dtype=bool)
    else:
        comps = sigma.comp if isinstance(sigma, SemiBasicOneForm) else sigma
        sg = FieldStack([as_field(c, n) for c in comps], xs, ys)
        iss = np.einsum("mk,mk->m", sg.v, ys)
        bad = sg.bad
    rep = make_report(cid, {"dE_minus_iS_sigma": (dE - iss)[:, None]}, bad, tol)
    rep.parts["iS_sigma_max"] = float(iss.max()) if iss.size else float("nan")
    rep.parts["iS_sigma_min"] = float(iss.min()) if iss.size else float("nan")
    return rep


def check_energy_drift(sode, traj: Trajectory, *, L, tol=1e-6) -> ConditionReport:
    E = energy_along(traj, L, sode.dim)
    return make_report("ENERGY_DRIFT", {"drift": (E - E[0])[:, None]},
                       np.zeros(E.shape[0], dtype=bool), tol)


def check_spray_homogeneity(sode, domain, tol=DEFAULT_TOL) -> ConditionReport:
    """C(G^i) = 2 G^i at the samples (the homog2 flag is checked, not assumed)."""
    ctx = _ctx(sode, domain, True)
    fs = ctx.stack(sode.G)
    return make_report("HOMOG2", {"euler": euler_batch(ctx, fs, 2.0)}, ctx.mask(fs), tol)


def interior_product_field(theta, n: int, scale: float = 1.0) -> ScalarField:
    """The field scale * theta_k y^k, as an expression."""
    comps = theta.comp if isinstance(theta, SemiBasicOneForm) else [as_field(c, n) for c in theta]
    terms = " + ".join(f"({c}) * y{k + 1}" for k, c in enumerate(comps))
    return parse_scalar_field(f"({terms}) * {float(scale)!r}", n)


def check_homogeneous(sode, domain, p_deg: float, tol=DEFAULT_TOL, *, theta,
                      sigma) -> list[ConditionReport]:
    """p > 1 route: Euler checks, LGH1 + LGH3 only, then delta_S(i_S theta / p) = sigma."""
    if p_deg <= 1:
        raise ValueError("p_deg must be > 1")
    ctx = _ctx(sode, domain, True)
    n = ctx.n
    th = ctx.oneform(theta)
    sg = ctx.oneform(sigma)
    bad = ctx.mask(th, sg)
    reports = [make_report("HOMOG2", {"euler": euler_batch(ctx, ctx.stack(sode.G), 2.0)},
                           ctx.bad, tol),
               make_report("EULER_THETA", {"euler": euler_batch(ctx, th, p_deg - 1.0)}, bad, tol),
               make_report("EULER_SIGMA", {"euler": euler_batch(ctx, sg, p_deg)}, bad, tol),
               make_report("LGH1", res_lgh1(ctx, th), bad, tol),
               make_report("LGH3", res_lgh3(ctx, th, sg), bad, tol)]
    L = interior_product_field(theta, n, 1.0 / p_deg)
    Ls = ctx.stack([L])
    diff = lagrange_differential_batch(ctx, Ls) - sg.v
    reports.append(make_report("HOMOG_GH", {"delta_S_L_minus_sigma": diff}, bad | Ls.bad, tol))
    return reports


def check_fm(sode, domain, tol=DEFAULT_TOL, *, theta) -> list[ConditionReport]:
    """Finsler metrizability: FMD (differential) and FMA (algebraic)."""
    ctx = _ctx(sode, domain, True)
    th = ctx.oneform(theta)
    bad = ctx.mask(th)
    parts = res_lgh1(ctx, th)
    parts["nabla_g"] = nabla_g(ctx, th).reshape(ctx.m, -1)
    parts["euler"] = euler_batch(ctx, th, 1.0)
    fmd = make_report("FMD", parts, bad, tol)
    det = np.linalg.det(th.dy)
    ist = np.einsum("mk,mk->m", th.v, ctx.Y)
    viol = ((np.abs(det) <= REGULAR_TOL) | ~(ist > 0.0)).astype(float)
    fma = make_report("FMA", {"violation": viol[:, None]}, bad, 0.0)
    ok = ~bad
    fma.parts["min_abs_det_g"] = float(np.abs(det[ok]).min()) if ok.any() else float("nan")
    fma.parts["min_iS_theta"] = float(ist[ok].min()) if ok.any() else float("nan")
    return [fmd, fma]


def res_homog_dh(ctx: Context, Ls: FieldStack, sg: FieldStack, p_deg: float) -> np.ndarray:
    hL = ctx.geo.horizontal(Ls)[:, 0]
    d_iss = sg.v + np.einsum("mk,mki->mi", ctx.Y, sg.dy)
    return 2.0 * (p_deg - 1.0) * hL - (1.0 - p_deg) * sg.v - d_iss


def check_homog_dh(sode, domain, p_deg: float, tol=DEFAULT_TOL, *, L, sigma) -> ConditionReport:
    ctx = _ctx(sode, domain, True)
    Ls = ctx.stack([L])
    sg = ctx.oneform(sigma)
    return make_report("HOMOG_DH", {"dhL": res_homog_dh(ctx, Ls, sg, p_deg)}, ctx.mask(Ls, sg), tol)


def check_homog_force(sode, domain, p_deg: float, tol=DEFAULT_TOL, *, L, sigma=None) -> ConditionReport:
    ctx = _ctx(sode, domain, True)
    Ls = ctx.stack([L])
    sg = ctx.oneform(sigma)
    r = (p_deg - 1.0) * ctx.geo.horizontal(Ls)[:, 0]
    if sg is not None:
        r = r - sg.v
    return make_report("HOMOG_FORCE", {"dhL": r}, ctx.mask(Ls, sg), tol)


def check_one_homog(sode, domain, tol=DEFAULT_TOL, *, theta, sigma=None) -> list[ConditionReport]:
    """p = 1 route: precondition i_S sigma = 0, then d_J theta = 0, d_h theta = d_J sigma / 2."""
    ctx = _ctx(sode, domain, True)
    th = ctx.oneform(theta)
    sg = ctx.oneform(sigma)
    bad = ctx.mask(th, sg)
    if sg is None:
        sg = zero_stack(ctx.m, ctx.n, ctx.n)
    pre = make_report("ONE_HOMOG_PRE", {"iS_sigma": np.einsum("mk,mk->m", sg.v, ctx.Y)[:, None],
                                   "euler_sigma": euler_batch(ctx, sg, 1.0),
                                   "euler_theta": euler_batch(ctx, th, 0.0)}, bad, tol)
    main = make_report("ONE_HOMOG", {"dJ": _upper(d_J(th)),
                                "dh": _upper(d_h(ctx, th) - 0.5 * d_J(sg))},
                       bad, tol, _warn_trivial(ctx, th))
    return [pre, main]


def check_one_homog_gyro(sode, domain, tol=DEFAULT_TOL, *, theta, omega: BasicTwoForm) -> ConditionReport:
    ctx = _ctx(sode, domain, True)
    th = ctx.oneform(theta)
    W, _, wbad = omega.jets(ctx.X, ctx.Y)
    return make_report("ONE_HOMOG_GYRO", {"euler": euler_batch(ctx, th, 0.0),
                                "dJ": _upper(d_J(th)),
                                "dh_minus_omega": _upper(d_h(ctx, th) - W)},
                       ctx.mask(th) | wbad, tol, _warn_trivial(ctx, th))


# --- gyroscopic class --------------------------------------------------------

@dataclass(frozen=True)
class GyroClass:
    """d2x/dt2 + 2 N(x) dx/dt + V(x) = 0 with a constant scalar product g."""
    g: np.ndarray
    N: tuple  # n x n x-only fields
    V: tuple  # n x-only fields

    @classmethod
    def from_strings(cls, g, N, V) -> "GyroClass":
        g = np.asarray(g, dtype=float)
        n = g.shape[0]
        Nf = tuple(tuple(_basic(N[i][j], n) for j in range(n)) for i in range(n))
        Vf = tuple(_basic(v, n) for v in V)
        return cls(g, Nf, Vf)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def sode(self) -> SodeSystem:
        n = self.dim
        G = []
        for i in range(n):
            terms = [f"({self.N[i][j]}) * y{j + 1}" for j in range(n)]
            terms.append(f"0.5 * ({self.V[i]})")
            G.append(" + ".join(terms))
        return SodeSystem.from_strings(G)

    def theta(self) -> SemiBasicOneForm:
        n = self.dim
        return SemiBasicOneForm.from_strings(
            [" + ".join(f"{float(self.g[i, k])!r} * y{k + 1}" for k in range(n)) for i in range(n)])

    def omega(self) -> BasicTwoForm:
        """omega_ij = N^k_i g_kj - N^k_j g_ki."""
        n = self.dim
        entries = {}
        for i in range(n):
            for j in range(i + 1, n):
                terms = [f"({self.N[k][i]}) * {float(self.g[k, j])!r}" for k in range(n)]
                terms += [f"(-({self.N[k][j]}) * {float(self.g[k, i])!r})" for k in range(n)]
                entries[(i + 1, j + 1)] = parse_scalar_field(" + ".join(terms), n, basic=True)
        return BasicTwoForm.from_upper(n, entries)

    def sigma(self) -> SemiBasicOneForm:
        """i_S omega: sigma_i = omega_ik y^k."""
        n = self.dim
        M = self.omega().matrix_strings()
        return SemiBasicOneForm.from_strings(
            [" + ".join(f"({M[i][k]}) * y{k + 1}" for k in range(n)) for i in range(n)])


def _basic(src, n: int) -> ScalarField:
    if isinstance(src, ScalarField):
        if src.uses_y():
            raise DimensionError("gyroscopic N and V must depend on x only")
        return src
    return parse_scalar_field(str(src), n, basic=True)


def check_gyro_class(gc: GyroClass, domain, tol=DEFAULT_TOL) -> list[ConditionReport]:
    """Both algebraic conditions on (g, N, V), then G1 with theta = g y and the induced omega."""
    sode = gc.sode()
    ctx = _ctx(sode, domain)
    n = gc.dim
    g = gc.g
    Ns = ctx.stack([gc.N[i][j] for i in range(n) for j in range(n)])
    Nv = Ns.v.reshape(ctx.m, n, n)
    Vs = ctx.stack(list(gc.V))
    dV = Vs.dx  # [k, j] = dV^k/dx^j
    gN = np.einsum("ik,mkj->mij", g, Nv)
    skew = gN + np.swapaxes(gN, 1, 2)
    gdV = np.einsum("ik,mkj->mij", g, dV)
    gnv = make_report("GNV", {"gN_skew": skew.reshape(ctx.m, -1),
                              "gdV_sym": _upper(_antisym(gdV))},
                      ctx.mask(Ns, Vs), tol)
    g1 = check_g1(sode, ctx, tol, theta=gc.theta(), omega=gc.omega())
    return [gnv, g1]
