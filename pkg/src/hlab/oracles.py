"""Independent numerical oracles shared by ``hlab selftest`` and the test suite.

Nothing here uses the jet arithmetic for the reference values: derivatives
come from central finite differences of plain function values.
"""
from __future__ import annotations

import numpy as np

from .expr import Point, ScalarField, evaluate, parse_scalar_field, values
from .geometry import SodeSystem, integrate_geodesic, sode_batch


def random_field_src(rng: np.random.Generator, n: int, depth: int = 3) -> str:
    """Random smooth expression, finite on |x_i| <= 1, 0.5 <= |y| <= 2."""
    var = lambda: f"{'xy'[rng.integers(2)]}{rng.integers(1, n + 1)}"
    coef = lambda: f"{rng.uniform(-2, 2):.3f}"

    def node(d: int) -> str:
        if d == 0:
            return var() if rng.random() < 0.7 else coef()
        k = rng.integers(9)
        a = node(d - 1)
        if k == 0:
            return f"({a} + {node(d - 1)})"
        if k == 1:
            return f"({a} - {node(d - 1)})"
        if k in (2, 3):
            return f"({a} * {node(d - 1)})"
        if k == 4:
            return f"({a})^{rng.integers(2, 4)}"
        if k == 5:
            return f"sin({a})"
        if k == 6:
            return f"cos({a})"
        if k == 7:
            return f"sqrt(1 + ({a})^2)"
        return f"log(2 + sin({a}))"

    return node(depth)


def random_polynomial_sode(rng: np.random.Generator, n: int, x_degree: int = 1,
                           homogeneous: bool = False) -> SodeSystem:
    """G^i polynomial of degree <= 2 in y (exactly 2 when homogeneous) and <= x_degree in x."""
    ymonos = [(a, b) for a in range(n) for b in range(a, n)]
    G = []
    for _ in range(n):
        terms = []
        for a, b in ymonos:
            for xs in ["1"] + [f"x{k + 1}" for k in range(n)] * (x_degree >= 1):
                if rng.random() < 0.5:
                    terms.append(f"{rng.uniform(-1, 1):.3f}*{xs}*y{a + 1}*y{b + 1}")
        if not homogeneous:
            for k in range(n):
                if rng.random() < 0.5:
                    terms.append(f"{rng.uniform(-1, 1):.3f}*x{rng.integers(1, n + 1)}*y{k + 1}")
            if rng.random() < 0.5:
                terms.append(f"{rng.uniform(-1, 1):.3f}*x{rng.integers(1, n + 1)}")
        G.append(" + ".join(terms) or "0")
    return SodeSystem.from_strings(G, homog2=homogeneous)


def fd_gradient_hessian(f: ScalarField, p: Point, h1: float = 1e-5,
                        h2: float = 1e-4) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian in (x, y) order from central differences of values."""
    n = p.dim
    z0 = np.concatenate([p.x, p.y])
    d = 2 * n

    def val(z):
        return float(values(f, z[None, :n], z[None, n:])[0])

    E = np.eye(d)
    grad = np.array([(val(z0 + h1 * E[k]) - val(z0 - h1 * E[k])) / (2 * h1) for k in range(d)])
    H = np.zeros((d, d))
    f0 = val(z0)
    for a in range(d):
        H[a, a] = (val(z0 + h2 * E[a]) - 2 * f0 + val(z0 - h2 * E[a])) / h2 ** 2
        for b in range(a + 1, d):
            s = (val(z0 + h2 * (E[a] + E[b])) - val(z0 + h2 * (E[a] - E[b]))
                 - val(z0 + h2 * (E[b] - E[a])) + val(z0 - h2 * (E[a] + E[b]))) / (4 * h2 ** 2)
            H[a, b] = H[b, a] = s
    return f0, grad, H


def jet_vs_fd(count: int = 1000, seed: int = 0, n_max: int = 3) -> float:
    """Largest relative discrepancy between jets and finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(1, n_max + 1))
        f = parse_scalar_field(random_field_src(rng, n), n)
        x = rng.uniform(-1, 1, n)
        y = rng.uniform(-2, 2, n)
        jet = evaluate(f, x[None], y[None])
        if jet.bad[0]:
            continue
        v, g, H = fd_gradient_hessian(f, Point(x, y))
        scale = max(1.0, abs(v), np.abs(g).max(), np.abs(H).max())
        err = max(abs(jet.jet.v[0] - v), np.abs(jet.jet.g[0] - g).max(),
                  np.abs(jet.jet.hessian()[0] - H).max())
        worst = max(worst, err / scale)
    return worst


def rk4_order_ratio(T: float = 1.0, h: float = 0.01) -> float:
    """Error ratio err(h)/err(h/2) for x'' = -(x')^2, x(0)=0, x'(0)=1 (x = log(1+t))."""
    sode = SodeSystem.from_strings(["y1^2 / 2"])
    exact = np.log1p(T)

    def err(step):
        steps = int(round(T / step))
        tr = integrate_geodesic(sode, Point([0.0], [1.0]), step, steps)
        return abs(tr.xs[-1, 0] - exact)

    return err(h) / err(h / 2)


def rphi_residual(sode: SodeSystem, X: np.ndarray, Y: np.ndarray, h: float = 1e-5) -> float:
    """max |3 R^i_jk - (dR^i_j/dy^k - dR^i_k/dy^j)| with the y-derivatives of Phi by FD."""
    geo = sode_batch(sode, X, Y)
    n = X.shape[1]
    dPhi = np.zeros(geo.Phi.shape + (n,))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dPhi[..., k] = (sode_batch(sode, X, Y + e).Phi - sode_batch(sode, X, Y - e).Phi) / (2 * h)
    rhs = dPhi - np.swapaxes(dPhi, 2, 3)
    return float(np.abs(3.0 * geo.Curv - rhs).max())


def rphi_sweep(count: int = 50, seed: int = 0, samples: int = 20) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(count):
        n = 2 + k % 2
        sode = random_polynomial_sode(rng, n, x_degree=1)
        X = rng.uniform(-1, 1, (samples, n))
        Y = rng.uniform(-2, 2, (samples, n))
        worst = max(worst, rphi_residual(sode, X, Y))
    return worst
