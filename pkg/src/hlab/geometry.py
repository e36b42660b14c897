"""Geometry induced by a semispray S = y^i d/dx^i - 2 G^i d/dy^i.

Everything is evaluated on batches of sample points: arrays carry a leading
sample axis ``m``; tensor indices follow in the order they are written, so
``N[:, i, j]`` is N^i_j and ``Curv[:, i, j, k]`` is R^i_{jk}.

Curvature sign: R^i_jk = delta N^i_k/delta x^j - delta N^i_j/delta x^k. This is
the orientation for which 3 R^i_jk = dR^i_j/dy^k - dR^i_k/dy^j and for which
the gyroscopic condition with the curvature cyclic sum agrees with the one
written with d(omega).

Dynamical covariant derivative on semi-basic tensors (local form used
throughout)::

    nabla a_i    = S(a_i) - a_k N^k_i
    nabla A_ij   = S(A_ij) - A_kj N^k_i - A_ik N^k_j
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .expr import (DimensionError, EvalError, HlabError, Point, ScalarField, as_field,
                   evaluate, values)


class BlowupError(HlabError):
    def __init__(self, message: str, t: float, state: tuple[np.ndarray, np.ndarray]):
        self.t = t
        self.state = state
        super().__init__(f"{message} (last finite state at t={t:g})")


@dataclass(frozen=True)
class SodeSystem:
    dim: int
    G: tuple[ScalarField, ...]
    homog2: bool = False

    @classmethod
    def from_strings(cls, exprs: Sequence, homog2: bool = False) -> "SodeSystem":
        n = len(exprs)
        return cls(n, tuple(as_field(e, n) for e in exprs), homog2)

    @classmethod
    def flat(cls, n: int) -> "SodeSystem":
        return cls.from_strings(["0"] * n, homog2=True)


@dataclass(frozen=True)
class SemiBasicOneForm:
    dim: int
    comp: tuple[ScalarField, ...]

    @classmethod
    def from_strings(cls, exprs: Sequence) -> "SemiBasicOneForm":
        n = len(exprs)
        return cls(n, tuple(as_field(e, n) for e in exprs))

    @classmethod
    def zero(cls, n: int) -> "SemiBasicOneForm":
        return cls.from_strings(["0"] * n)

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.comp) + ")"


class FieldStack:
    """2-jets of several fields on one sample batch.

    ``dx[:, c, k]`` is d f_c / dx^k, ``dxdy[:, c, k, l]`` is d2 f_c / dx^k dy^l.
    """

    def __init__(self, fields: Sequence[ScalarField], X: np.ndarray, Y: np.ndarray):
        m, n = X.shape
        self.n = n
        c = len(fields)
        self.v = np.zeros((m, c))
        self.dx = np.zeros((m, c, n))
        self.dy = np.zeros((m, c, n))
        self.dxdx = np.zeros((m, c, n, n))
        self.dxdy = np.zeros((m, c, n, n))
        self.dydy = np.zeros((m, c, n, n))
        self.bad = np.zeros(m, dtype=bool)
        self.culprit = None
        for a, f in enumerate(fields):
            if f.dim != n:
                raise DimensionError(f"field dimension {f.dim} != {n}")
            res = evaluate(f, X, Y)
            self.bad |= res.bad
            if res.culprit and self.culprit is None:
                self.culprit = res.culprit
            jet = res.jet
            H = jet.hessian()
            self.v[:, a] = jet.v
            self.dx[:, a] = jet.g[:, :n]
            self.dy[:, a] = jet.g[:, n:]
            self.dxdx[:, a] = H[:, :n, :n]
            self.dxdy[:, a] = H[:, :n, n:]
            self.dydy[:, a] = H[:, n:, n:]


@dataclass
class GeometryBatch:
    X: np.ndarray
    Y: np.ndarray
    G: np.ndarray       # (m, n)           G^i
    Gx: np.ndarray      # (m, n, n)        dG^i/dx^j
    N: np.ndarray       # (m, n, n)        N^i_j = dG^i/dy^j
    Nx: np.ndarray      # (m, n, n, n)     dN^i_j/dx^k
    Gamma: np.ndarray   # (m, n, n, n)     dN^i_j/dy^k
    Phi: np.ndarray     # (m, n, n)        R^i_j
    Curv: np.ndarray    # (m, n, n, n)     R^i_jk
    bad: np.ndarray = dc_field(default=None)
    culprit: str | None = None

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    # --- derivations on components of a FieldStack ---------------------------
    def spray(self, fs: FieldStack) -> np.ndarray:
        """S(f_c) for every field c: (m, c)."""
        return (np.einsum("mk,mck->mc", self.Y, fs.dx)
                - 2.0 * np.einsum("mk,mck->mc", self.G, fs.dy))

    def horizontal(self, fs: FieldStack) -> np.ndarray:
        """delta f_c / delta x^k: (m, c, n)."""
        return fs.dx - np.einsum("mlk,mcl->mck", self.N, fs.dy)

    def spray_of_ygrad(self, fs: FieldStack) -> np.ndarray:
        """S applied to the matrix d f_c / dy^j: (m, c, n)."""
        return (np.einsum("mk,mckj->mcj", self.Y, fs.dxdy)
                - 2.0 * np.einsum("mk,mcjk->mcj", self.G, fs.dydy))

    def horizontal_of_ygrad(self, fs: FieldStack) -> np.ndarray:
        """delta/delta x^k of d f_c / dy^j, indexed [m, c, j, k]."""
        return (np.einsum("mckj->mcjk", fs.dxdy)
                - np.einsum("mlk,mcjl->mcjk", self.N, fs.dydy))

    def nabla_form(self, a: np.ndarray, Sa: np.ndarray) -> np.ndarray:
        return Sa - np.einsum("mk,mki->mi", a, self.N)

    def nabla_02(self, A: np.ndarray, SA: np.ndarray) -> np.ndarray:
        return (SA - np.einsum("mkj,mki->mij", A, self.N)
                - np.einsum("mik,mkj->mij", A, self.N))


def sode_batch(sode: SodeSystem, X, Y) -> GeometryBatch:
    """Connection, Berwald coefficients, Jacobi endomorphism and curvature."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    fs = FieldStack(sode.G, X, Y)
    G = fs.v
    N = fs.dy
    Nx = np.einsum("mikj->mijk", fs.dxdy)
    Gamma = fs.dydy
    SN = np.einsum("mk,mijk->mij", Y, Nx) - 2.0 * np.einsum("mk,mijk->mij", G, Gamma)
    Phi = 2.0 * fs.dx - SN - np.einsum("mir,mrj->mij", N, N)
    # dN[i, j, k] = delta N^i_j / delta x^k ; R^i_jk = dN[i, k, j] - dN[i, j, k]
    dN = Nx - np.einsum("mlk,mijl->mijk", N, Gamma)
    Curv = np.swapaxes(dN, 2, 3) - dN
    return GeometryBatch(X, Y, G, fs.dx, N, Nx, Gamma, Phi, Curv, fs.bad, fs.culprit)


# --- single-point API --------------------------------------------------------

@dataclass(frozen=True)
class GeometryJet:
    point: Point
    N: np.ndarray
    Gamma: np.ndarray
    Phi: np.ndarray
    Curv: np.ndarray
    G: np.ndarray
    Gx: np.ndarray


def _one(sode: SodeSystem, p: Point) -> GeometryBatch:
    if p.dim != sode.dim:
        raise DimensionError("point dimension does not match system")
    geo = sode_batch(sode, p.x[None], p.y[None])
    if geo.bad[0]:
        raise EvalError("spray coefficients not evaluable at point", geo.culprit or "")
    return geo


def geometry_at(sode: SodeSystem, p: Point) -> GeometryJet:
    geo = _one(sode, p)
    return GeometryJet(p, geo.N[0], geo.Gamma[0], geo.Phi[0], geo.Curv[0], geo.G[0], geo.Gx[0])


def _stack_one(fields, p: Point) -> FieldStack:
    fs = FieldStack(fields, p.x[None], p.y[None])
    if fs.bad[0]:
        raise EvalError("field not evaluable at point", fs.culprit or "")
    return fs


def spray_apply(sode: SodeSystem, f, p: Point) -> float:
    geo = _one(sode, p)
    return float(geo.spray(_stack_one([as_field(f, sode.dim)], p))[0, 0])


def horizontal_derivative(sode: SodeSystem, f, p: Point) -> np.ndarray:
    geo = _one(sode, p)
    return geo.horizontal(_stack_one([as_field(f, sode.dim)], p))[0, 0]


def nabla_oneform(sode: SodeSystem, a: SemiBasicOneForm, p: Point) -> np.ndarray:
    geo = _one(sode, p)
    fs = _stack_one(a.comp, p)
    return geo.nabla_form(fs.v, geo.spray(fs))[0]


def nabla_02(sode: SodeSystem, A, p: Point) -> np.ndarray:
    """nabla of a (0,2) tensor given as an n x n array of fields/expressions."""
    n = sode.dim
    flat = [as_field(A[i][j], n) for i in range(n) for j in range(n)]
    geo = _one(sode, p)
    fs = _stack_one(flat, p)
    Av = fs.v.reshape(1, n, n)
    SA = geo.spray(fs).reshape(1, n, n)
    return geo.nabla_02(Av, SA)[0]


def multiplier_of(theta: SemiBasicOneForm, p: Point) -> tuple[np.ndarray, np.ndarray]:
    """g_ij = d theta_i / dy^j and dg_ij/dy^k (indexed [i, j, k])."""
    fs = _stack_one(theta.comp, p)
    return fs.dy[0], fs.dydy[0]


# --- geodesics ---------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray   # (steps+1,)
    xs: np.ndarray      # (steps+1, n)
    ys: np.ndarray      # (steps+1, n)
    h: float
    method: str = "rk4"

    @property
    def states(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.xs, self.ys))


def integrate_geodesic(sode: SodeSystem, init: Point, h: float, steps: int) -> Trajectory:
    """Classical RK4 for x' = y, y' = -2 G(x, y)."""
    if h <= 0 or steps < 1:
        raise ValueError("need h > 0 and steps >= 1")
    n = sode.dim

    def rhs(x, y):
        X, Y = x[None], y[None]
        acc = np.array([-2.0 * values(g, X, Y)[0] for g in sode.G])
        return y, acc

    xs = np.empty((steps + 1, n))
    ys = np.empty((steps + 1, n))
    xs[0], ys[0] = init.x, init.y
    x, y = init.x.copy(), init.y.copy()
    for s in range(steps):
        k1x, k1y = rhs(x, y)
        k2x, k2y = rhs(x + 0.5 * h * k1x, y + 0.5 * h * k1y)
        k3x, k3y = rhs(x + 0.5 * h * k2x, y + 0.5 * h * k2y)
        k4x, k4y = rhs(x + h * k3x, y + h * k3y)
        xn = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        yn = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        if not (np.isfinite(xn).all() and np.isfinite(yn).all()):
            raise BlowupError("trajectory left the finite domain", s * h, (x, y))
        x, y = xn, yn
        xs[s + 1], ys[s + 1] = x, y
    return Trajectory(np.arange(steps + 1) * h, xs, ys, h)
