"""Acceptance criteria, one test each, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""
import json
import sys
import time

import numpy as np
import pytest

from hlab import conditions as C
from hlab import oracles
from hlab.cli import main
from hlab.expr import Point, parse_scalar_field, values
from hlab.geometry import (SemiBasicOneForm, SodeSystem, geometry_at, integrate_geodesic,
                           multiplier_of)
from hlab.polynomial import Poly
from hlab.solver import AnsatzBasis, solve

EX1 = SodeSystem.from_strings(["(y1^2 + y2^2)/2", "2*y1*y2"], homog2=True)
THETA = SemiBasicOneForm.from_strings(["2*y1", "y2"])
SIGMA = SemiBasicOneForm.from_strings(["-2*y1^2 - 2*y2^2", "-4*y1*y2"])
L_EX1 = "(2*y1^2 + y2^2)/2"
D_EX1 = "-2/3*y1^3 - 2*y1*y2^2"
DOM = C.SampleDomain(2, count=200, seed=0)
F = "sqrt(y1^2 + y2^2)"


def projective(lam):
    sode = SodeSystem.from_strings([f"{lam} * {F} * y1", f"{lam} * {F} * y2"], homog2=True)
    theta = SemiBasicOneForm.from_strings(["2*y1", "2*y2"])
    sigma = SemiBasicOneForm.from_strings([f"{-4 * lam} * {F} * y1", f"{-4 * lam} * {F} * y2"])
    return sode, theta, sigma


def test_01_ex1_regression(verdict):
    t0 = time.perf_counter()
    lag = C.check_lagrange(EX1, DOM, 1e-9, L=L_EX1, D=D_EX1)
    reps = C.check_lgh(EX1, DOM, 1e-8, theta=THETA, sigma=SIGMA)
    reps += [C.check_d1(EX1, DOM, 1e-8, theta=THETA),
             C.check_d2(EX1, DOM, 1e-8, theta=THETA, D=D_EX1),
             C.check_d3(EX1, DOM, 1e-8, theta=THETA),
             C.check_lie_closed(EX1, DOM, 1e-8, theta=THETA, sigma=SIGMA)]
    dt = time.perf_counter() - t0
    ok = lag.passed and all(r.passed for r in reps) and dt < 1.0
    worst = max(r.max for r in reps)
    verdict(1, "ex1 regression", ok,
            f"lagrange {lag.max:.1e}, worst of LGH/D1-3/LIE_CLOSED {worst:.1e}, {dt:.2f}s")


def test_02_solver_recovery(tmp_path, verdict):
    out = tmp_path / "solve.json"
    prob = tmp_path / "ex1.prob"
    from hlab.builtins import EX1 as EX1_TEXT
    prob.write_text(EX1_TEXT)
    t0 = time.perf_counter()
    code = main(["solve", str(prob), "--json", str(out)])
    dt = time.perf_counter() - t0
    rep = json.loads(out.read_text())
    sols = rep["solver"]["solutions"]
    ok = code == 0 and len(sols) >= 1 and dt < 5.0
    err, post = np.inf, np.inf
    if sols:
        sol = sols[0]
        theta = SemiBasicOneForm.from_strings(sol["theta"])
        g, _ = multiplier_of(theta, Point([0.2, -0.3], [0.7, 1.1]))
        g = g / g[0, 0]
        err = np.abs(g - np.diag([1.0, 0.5])).max()
        post = max(r["max"] for r in sol["verification"] if r["id"] == "DISSIPATIVE")
        ok = ok and err <= 1e-6 and post <= 1e-8 and sol["D"] is not None
    verdict(2, "solver recovery", ok,
            f"{len(sols)} solution(s), |g/g11 - diag(1, 1/2)| = {err:.1e}, D post-check {post:.1e}, {dt:.2f}s")


def _fd_phi(sode, p, h=1e-5):
    n = sode.dim

    def G(x, y):
        return np.array([values(g, x[None], y[None])[0] for g in sode.G])

    def N(x, y):
        out = np.zeros((n, n))
        for j in range(n):
            e = np.eye(n)[j] * h
            out[:, j] = (G(x, y + e) - G(x, y - e)) / (2 * h)
        return out

    Gx = np.zeros((n, n))
    for j in range(n):
        e = np.eye(n)[j] * h
        Gx[:, j] = (G(p.x + e, p.y) - G(p.x - e, p.y)) / (2 * h)
    g0 = G(p.x, p.y)
    SN = (N(p.x + h * p.y, p.y - 2 * h * g0) - N(p.x - h * p.y, p.y + 2 * h * g0)) / (2 * h)
    Nm = N(p.x, p.y)
    return 2 * Gx - SN - Nm @ Nm


def test_03_jacobi_endomorphism(verdict):
    p = Point([0, 0], [1, 2])
    phi = geometry_at(EX1, p).Phi
    exact = np.abs(phi - np.array([[-4, 2], [4, -2]])).max()
    fd = np.abs(phi - _fd_phi(EX1, p)).max()
    verdict(3, "Jacobi endomorphism", exact <= 1e-10 and fd <= 1e-5,
            f"|Phi - exact| = {exact:.1e}, |Phi - FD| = {fd:.1e}")


def test_04_curvature_identity(verdict):
    worst = oracles.rphi_sweep(count=50, seed=0)
    verdict(4, "3R = [J, Phi] on 50 random sodes (n = 2, 3)", worst <= 1e-5, f"max residual {worst:.1e}")


def random_2d_spray(seed):
    """G quadratic in y with coefficients polynomial of degree <= 2 in x."""
    rng = np.random.default_rng(seed)
    G = []
    for _ in range(2):
        p = Poly(2)
        for b in [(2, 0), (1, 1), (0, 2)]:
            for a in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]:
                if rng.random() < 0.5:
                    p = p + Poly(2, {a + b: float(np.round(rng.uniform(-1, 1), 2))})
        G.append(p.to_expr())
    return G


def test_05_dimension_two(verdict, capsys):
    basis = AnsatzBasis.monomial(2, 2, 2)
    cyclic = 0.0
    successes = 0
    log = []
    for seed in range(20):
        G = random_2d_spray(seed)
        sode = SodeSystem.from_strings(G, homog2=True)
        dom = C.SampleDomain(2, count=200, seed=seed)
        ctx = C.Context.from_domain(sode, dom)
        th = ctx.oneform(SemiBasicOneForm.from_strings(["x2*y1^2 + y2", "x1*y1*y2"]))
        cyclic = max(cyclic, float(np.abs(C.curvature_cyclic(ctx, th)).max()))
        res = solve(sode, basis, "D1", dom)
        good = [s for s in res.solutions if s.passed]
        successes += bool(good)
        log.append(f"  seed {seed:2d}: G = ({G[0]}, {G[1]}); system {res.system_shape}, "
                   f"rank {res.rank}, nullity {res.nullity}, non-trivial {len(good)}")
    print("\n".join(log))
    rate = successes / 20
    verdict(5, "dimension two", cyclic == 0.0 and rate >= 0.8,
            f"cyclic residual {cyclic:.1e}, D1 pipeline success {successes}/20 with deg_y = 2, deg_x = 2")


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_06_projective_family(lam, verdict):
    sode, theta, sigma = projective(lam)
    lag = C.check_lagrange(sode, DOM, 1e-9, L=f"{F}^2", D=f"{-4 * lam / 3} * {F}^3")
    h3 = C.check_classic(sode, DOM, theta=theta)[2]
    force = C.check_homog_force(sode, DOM, 2.0, L=f"{F}^2", sigma=sigma)
    dh = C.check_homog_dh(sode, DOM, 2.0, L=f"{F}^2", sigma=sigma)
    ok = lag.passed and h3.max >= 0.1 and force.passed and dh.passed
    verdict(6, f"projective family lambda = {lam}", ok,
            f"dissipative residual {lag.max:.1e}, H3 residual {h3.max:.2f}, "
            f"HOMOG_FORCE {force.max:.1e}, HOMOG_DH {dh.max:.1e}")


def test_07_lgh2_redundancy(verdict):
    worst = {}
    for lam in (0.5, 1.0, 2.0):
        sode, theta, sigma = projective(lam)
        for r in C.check_lgh(sode, DOM, 1e-9, theta=theta, sigma=sigma):
            worst[r.id] = max(worst.get(r.id, 0.0), r.max)
    ok = worst["LGH1"] <= 1e-9 and worst["LGH3"] <= 1e-9 and worst["LGH2"] <= 1e-7
    verdict(7, "LGH2 follows from LGH1 and LGH3", ok,
            ", ".join(f"{k} {v:.1e}" for k, v in sorted(worst.items())))


def _gyro(n21):
    return C.GyroClass.from_strings(np.diag([2.0, 1.0]), [["0", "x2"], [n21, "0"]], ["x1/2", "x2"])


def test_08_gyroscopic_class(verdict):
    gc = _gyro("-2*x2")
    gnv, g1 = C.check_gyro_class(gc, DOM, 1e-8)
    sode = gc.sode()
    g2 = C.check_g2(sode, DOM, 1e-8, theta=gc.theta())
    traj = integrate_geodesic(sode, Point([0.3, -0.2], [0.5, 0.4]), 1e-3, 2000)
    drift = C.check_energy_drift(sode, traj, L="(2*y1^2 + y2^2)/2 - (x1^2 + x2^2)/2")
    broken = C.check_gyro_class(_gyro("2*x2"), DOM, 1e-8)[0]
    ok = gnv.passed and g1.passed and g2.passed and drift.max <= 1e-6
    ok = ok and not broken.passed and broken.max >= 1.0
    verdict(8, "gyroscopic class", ok,
            f"GNV {gnv.max:.1e}, G1 {g1.max:.1e}, G2 {g2.max:.1e}, energy drift {drift.max:.1e}, "
            f"broken GNV {broken.max:.2f}")


def test_09_energy_variation(verdict):
    traj = integrate_geodesic(EX1, Point([0, 0], [1, 2]), 1e-3, 100)
    rep = C.check_energy_variation(EX1, traj, L=L_EX1, sigma=SIGMA)
    ys = traj.ys[1:-1]
    zeros = np.zeros((ys.shape[0], 2))
    iss = sum(values(SIGMA.comp[i], zeros, ys) * ys[:, i] for i in range(2))
    D = values(parse_scalar_field(D_EX1, 2), zeros, ys)
    rel = float(np.abs(iss - 3 * D).max())
    ok = rep.max <= 1e-5 and rel <= 1e-12 and bool((iss < 0).all())
    verdict(9, "energy variation", ok,
            f"|dE/dt - i_S sigma| = {rep.max:.1e}, |i_S sigma - 3D| = {rel:.1e}, "
            f"max i_S sigma {iss.max():.2f}")


def test_10_oracle_suite(tmp_path, verdict):
    jet = oracles.jet_vs_fd(count=1000, seed=0)
    ratio = oracles.rk4_order_ratio()
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["example", "ex1", "--seed", "3", "--json", str(a)])
    main(["example", "ex1", "--seed", "3", "--json", str(b)])
    same = a.read_bytes() == b.read_bytes()
    ok = jet <= 1e-6 and 12 <= ratio <= 20 and same
    verdict(10, "oracle suite", ok,
            f"jets vs FD {jet:.1e}, RK4 ratio {ratio:.2f}, identical JSON {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
