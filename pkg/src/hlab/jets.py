"""Batched second-order forward-mode jets.

A :class:`JetBatch` carries, for ``m`` sample points, the value, gradient and
packed Hessian of a scalar function of ``d = 2n`` coordinates ordered
``(x1..xn, y1..yn)``. Each unordered Hessian pair is stored once, so every
Hessian expanded from it is symmetric exactly.

The product and chain-rule kernels come from the compiled ``_jetcore``
extension when it is importable; otherwise (or when ``HLAB_PURE_PYTHON`` is
set) the numpy fallback is used. ``BACKEND`` names the active one.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from . import _jetcore_py

if os.environ.get("HLAB_PURE_PYTHON"):
    _kernels = _jetcore_py
    BACKEND = "python"
else:
    try:
        from . import _jetcore as _kernels  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _kernels = _jetcore_py
        BACKEND = "python"


def use_backend(name: str) -> None:
    """Switch kernels at runtime ("cython" or "python"); used by benchmarks."""
    global _kernels, BACKEND
    if name == "python":
        _kernels, BACKEND = _jetcore_py, "python"
    elif name == "cython":
        from . import _jetcore  # type: ignore[attr-defined]
        _kernels, BACKEND = _jetcore, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


@lru_cache(maxsize=None)
def pair_index(d: int) -> tuple[np.ndarray, np.ndarray]:
    I, J = np.triu_indices(d)
    return np.ascontiguousarray(I, dtype=np.intp), np.ascontiguousarray(J, dtype=np.intp)


class JetBatch:
    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h):
        self.v = v
        self.g = g
        self.h = h

    @property
    def m(self) -> int:
        return self.v.shape[0]

    @property
    def d(self) -> int:
        return self.g.shape[1]

    @classmethod
    def constant(cls, c: float, m: int, d: int) -> "JetBatch":
        P = d * (d + 1) // 2
        return cls(np.full(m, float(c)), np.zeros((m, d)), np.zeros((m, P)))

    @classmethod
    def coordinate(cls, values: np.ndarray, k: int, d: int) -> "JetBatch":
        m = values.shape[0]
        g = np.zeros((m, d))
        g[:, k] = 1.0
        return cls(np.array(values, dtype=float), g, np.zeros((m, d * (d + 1) // 2)))

    def __add__(self, o: "JetBatch") -> "JetBatch":
        return JetBatch(self.v + o.v, self.g + o.g, self.h + o.h)

    def __sub__(self, o: "JetBatch") -> "JetBatch":
        return JetBatch(self.v - o.v, self.g - o.g, self.h - o.h)

    def __neg__(self) -> "JetBatch":
        return JetBatch(-self.v, -self.g, -self.h)

    def scale(self, c: float) -> "JetBatch":
        return JetBatch(c * self.v, c * self.g, c * self.h)

    def __mul__(self, o: "JetBatch") -> "JetBatch":
        I, J = pair_index(self.d)
        c = np.ascontiguousarray
        return JetBatch(*_kernels.jet_mul(c(self.v), c(self.g), c(self.h),
                                          c(o.v), c(o.g), c(o.h), I, J))

    def apply(self, f0, f1, f2) -> "JetBatch":
        """Outer function with value f0 and derivatives f1, f2 at ``self.v``."""
        I, J = pair_index(self.d)
        c = np.ascontiguousarray
        g, h = _kernels.jet_chain(c(self.g), c(self.h), c(f1, dtype=float),
                                  c(f2, dtype=float), I, J)
        return JetBatch(np.asarray(f0, dtype=float), g, h)

    def finite_mask(self) -> np.ndarray:
        return (np.isfinite(self.v) & np.isfinite(self.g).all(axis=1)
                & np.isfinite(self.h).all(axis=1))

    def hessian(self) -> np.ndarray:
        """Full (m, d, d) Hessian; (i, j) and (j, i) read the same packed slot."""
        I, J = pair_index(self.d)
        H = np.empty((self.m, self.d, self.d))
        H[:, I, J] = self.h
        H[:, J, I] = self.h
        return H

    def take(self, idx) -> "JetBatch":
        return JetBatch(self.v[idx], self.g[idx], self.h[idx])
