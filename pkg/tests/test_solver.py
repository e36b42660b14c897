import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hlab import conditions as C
from hlab.expr import Point, values
from hlab.geometry import SemiBasicOneForm, SodeSystem
from hlab.polynomial import NotPolynomial, Poly, radial_integral
from hlab.solver import (AnsatzBasis, ClosednessError, LinearSystem, RankWarning, assemble,
                         filter_nontrivial, reconstruct_dissipation, reconstruct_lagrangian,
                         solve, solve_nullspace)

EX1 = SodeSystem.from_strings(["(y1^2 + y2^2)/2", "2*y1*y2"], homog2=True)
FLAT = SodeSystem.flat(2)
DOM = C.SampleDomain(2, count=200, seed=0)


def test_basis_sizes():
    assert len(AnsatzBasis.monomial(2, 1, 0)) == 6
    assert len(AnsatzBasis.monomial(2, 2, 2)) == 2 * 6 * 6
    assert len(AnsatzBasis.monomial(3, 1, 1)) == 3 * 4 * 4
    assert AnsatzBasis.monomial(2, 1, 0).monomial_strings()[:3] == ["1", "y2", "y1"]


def test_ex1_d1_nullspace_and_multiplier():
    basis = AnsatzBasis.monomial(2, 1, 0)
    ls = assemble(EX1, None, basis, "D1", DOM)
    ns = solve_nullspace(ls)
    # constants in both components plus the diag(2, 1) multiplier
    assert len(ns.null) >= 3
    X, Y = ls.samples
    sols = filter_nontrivial(ns.null, basis, X, Y)
    assert len(sols) == 1
    th = basis.theta(sols[0])
    j = [values(c, np.zeros((1, 2)), np.array([[1.0, 0.0]]))[0] for c in th.comp]
    k = [values(c, np.zeros((1, 2)), np.array([[0.0, 1.0]]))[0] for c in th.comp]
    c0 = [values(c, np.zeros((1, 2)), np.zeros((1, 2)))[0] for c in th.comp]
    G = np.array([[j[0] - c0[0], k[0] - c0[0]], [j[1] - c0[1], k[1] - c0[1]]])
    np.testing.assert_allclose(G / G[0, 0], [[1, 0], [0, 0.5]], atol=1e-10)


def test_ex1_solve_pipeline_recovers_dissipation():
    res = solve(EX1, AnsatzBasis.monomial(2, 1, 0), "D1", DOM)
    assert res.status == "ok" and len(res.solutions) == 1
    sol = res.solutions[0]
    assert sol.passed and sol.L is not None and sol.D is not None
    # normalised so max |g| = 1: theta = (y1, y2/2), L = y1^2/2 + y2^2/4, D = -(y1^3/3 + y1 y2^2)
    assert C.check_lagrange(EX1, DOM, 1e-9, L=sol.L, D=sol.D).passed
    y = np.array([[1.3, -0.4]])
    D = values(sol.D, np.zeros((1, 2)), y)[0]
    assert D == pytest.approx(-(1.3 ** 3 / 3 + 1.3 * 0.16), abs=1e-9)


def test_flat_h_family_contains_euclidean():
    res = solve(FLAT, AnsatzBasis.monomial(2, 1, 0), "H", DOM)
    assert len(res.solutions) == 3
    # the solution family spans diag(1, 1): project y onto it
    basis = res.basis
    target = np.zeros(len(basis))
    for m, (comp, e) in enumerate(basis.elements):
        if e == (0, 0) + tuple(int(i == comp) for i in range(2)):
            target[m] = 1.0
    K = np.stack([s.coefficients for s in res.solutions], axis=1)
    coef, *_ = np.linalg.lstsq(K, target, rcond=None)
    assert np.linalg.norm(K @ coef - target) <= 1e-10
    assert all(s.passed for s in res.solutions)


def test_empty_basis_warns():
    with pytest.warns(RankWarning):
        res = solve(EX1, AnsatzBasis.empty(2), "D1", DOM)
    assert res.status == "no solutions"


def test_degenerate_basis_warns():
    basis = AnsatzBasis(2, 1, 0, ((0, (0, 0, 1, 0)), (0, (0, 0, 1, 0))))
    with pytest.warns(RankWarning, match="degenerate"):
        assemble(EX1, None, basis, "D1", DOM)


def test_identity_has_empty_nullspace():
    ls = LinearSystem(np.eye(5), np.zeros(5), [], "D1")
    ns = solve_nullspace(ls)
    assert ns.rank == 5 and ns.null == [] and ns.particular is None


def test_consistent_system_matches_qr_oracle():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(10, 4))
    x = rng.normal(size=4)
    ns = solve_nullspace(LinearSystem(A, A @ x, [], "D1"))
    Q, R = np.linalg.qr(A)
    oracle = np.linalg.solve(R, Q.T @ (A @ x))
    np.testing.assert_allclose(ns.particular, oracle, atol=1e-10)
    np.testing.assert_allclose(ns.particular, x, atol=1e-10)


def test_rank_deficient_nullspace_is_exact():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(12, 3)) @ rng.normal(size=(3, 5))
    ns = solve_nullspace(LinearSystem(A, np.zeros(12), [], "D1"))
    assert ns.rank == 3 and len(ns.null) == 2
    for v in ns.null:
        assert np.linalg.norm(A @ v) <= 1e-12 * np.linalg.norm(A)


def test_rows_per_unknown():
    basis = AnsatzBasis.monomial(2, 2, 2)
    ls = assemble(EX1, None, basis, "D1", C.SampleDomain(2, count=5))
    assert ls.shape[0] >= 4 * len(basis)


@pytest.mark.parametrize("cset", ["D1", "H", "G2-core"])
def test_assembled_rows_match_condition_residuals(cset):
    """A c - b must equal the residuals that the conditions module reports for theta(c)."""
    rng = np.random.default_rng(3)
    basis = AnsatzBasis.monomial(2, 2, 1)
    dom = C.SampleDomain(2, count=40, seed=2)
    ls = assemble(EX1, None, basis, cset, dom)
    c = rng.normal(size=len(basis))
    theta = basis.theta(c)
    ctx = C.Context(EX1, *ls.samples)
    th = ctx.oneform(theta)
    if cset == "D1":
        parts = C.res_d1(ctx, th)
    elif cset == "H":
        parts = {}
        for tag, p in (("LGH1", C.res_lgh1(ctx, th)), ("LGH2", C.res_lgh2(ctx, th, None)),
                       ("LGH3", C.res_lgh3(ctx, th, None))):
            parts.update({f"{tag}.{k}": v for k, v in p.items()})
    else:
        parts = C.res_g2(ctx, th)
    ref = np.concatenate([np.asarray(v).reshape(ctx.m, -1).reshape(-1) for v in parts.values()])
    got = ls.A @ c - ls.b
    assert got.shape == ref.shape
    np.testing.assert_allclose(got, ref, atol=1e-10 * max(1.0, np.abs(ref).max()))


def test_closedness_error():
    with pytest.raises(ClosednessError):
        reconstruct_lagrangian(SemiBasicOneForm.from_strings(["y2", "0"]))


def test_reconstruct_lagrangian_values():
    L = reconstruct_lagrangian(SemiBasicOneForm.from_strings(["2*y1 + x2", "y2 + y1*0"]))
    p = Point([0.5, 3.0], [1.0, 2.0])
    assert values(L, p.x[None], p.y[None])[0] == pytest.approx(1 + 3 + 2)
    assert values(L, p.x[None], np.zeros((1, 2)))[0] == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_radial_integral_is_right_inverse(seed):
    rng = np.random.default_rng(seed)
    n = 2
    terms = {}
    for _ in range(5):
        e = tuple(int(v) for v in rng.integers(0, 3, 2 * n))
        terms[e] = terms.get(e, 0.0) + float(rng.normal())
    P = Poly(n, terms)
    comps = [P.diff("y", i + 1) for i in range(n)]
    R = radial_integral(comps)
    for i in range(n):
        assert (R.diff("y", i + 1) - comps[i]).max_abs_coeff() <= 1e-12
    diff = (R - P).drop_pure_x()
    assert diff.max_abs_coeff() <= 1e-12


def test_dissipation_flat_is_zero():
    D = reconstruct_dissipation(FLAT, "(y1^2 + y2^2)/2")
    assert Poly.from_field(D).max_abs_coeff() == 0.0


def test_dissipation_rejects_non_polynomial_spray():
    sode = SodeSystem.from_strings(["sqrt(y1^2 + y2^2)*y1", "sqrt(y1^2 + y2^2)*y2"])
    with pytest.raises(NotPolynomial):
        reconstruct_dissipation(sode, "y1^2 + y2^2")


def test_dissipation_rejects_non_d1_lagrangian():
    with pytest.raises(ClosednessError):
        reconstruct_dissipation(EX1, "(y1^2 + y2^2)/2")


def test_gh_on_projective():
    F = "sqrt(y1^2 + y2^2)"
    sode = SodeSystem.from_strings([f"{F} * y1", f"{F} * y2"], homog2=True)
    sigma = SemiBasicOneForm.from_strings([f"-4 * {F} * y1", f"-4 * {F} * y2"])
    res = solve(sode, AnsatzBasis.monomial(2, 1, 0), "GH", DOM, sigma=sigma)
    assert res.status == "ok"
    sol = res.solutions[0]
    Y = np.array([[0.7, -1.1]])
    got = [values(c, np.zeros((1, 2)), Y)[0] for c in sol.theta.comp]
    np.testing.assert_allclose(got, 2 * Y[0], atol=1e-9)
    assert sol.passed


def test_no_solutions_for_generic_x_dependent_spray():
    sode = SodeSystem.from_strings(["x1*y1^2 + y2^2", "x2*y1*y2 - y1^2"])
    res = solve(sode, AnsatzBasis.monomial(2, 1, 1), "D1", DOM)
    assert res.status == "no solutions"


def test_solve_is_deterministic():
    a = solve(EX1, AnsatzBasis.monomial(2, 1, 0), "D1", DOM).to_json()
    b = solve(EX1, AnsatzBasis.monomial(2, 1, 0), "D1", DOM).to_json()
    assert a == b


def test_unknown_condition_set():
    with pytest.raises(ValueError):
        assemble(EX1, None, AnsatzBasis.monomial(2, 1, 0), "XYZ", DOM)
    with pytest.raises(ValueError):
        assemble(EX1, None, AnsatzBasis.monomial(2, 1, 0), "GH", DOM)


def test_rank_warning_is_a_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve(EX1, AnsatzBasis.monomial(2, 1, 0), "D1", DOM)


def test_x_dependent_spray_with_known_multiplier():
    # G = dphi/dy for phi = x1 y1^2 y2 makes N symmetric, so theta = y satisfies D1
    sode = SodeSystem.from_strings(["2*x1*y1*y2", "x1*y1^2"])
    res = solve(sode, AnsatzBasis.monomial(2, 2, 2), "D1", DOM)
    assert res.status == "ok"
    assert all(s.passed for s in res.solutions)
    K = np.stack([s.coefficients for s in res.solutions], axis=1)
    target = np.zeros(len(res.basis))
    for m, (comp, e) in enumerate(res.basis.elements):
        if e == (0, 0) + tuple(int(i == comp) for i in range(2)):
            target[m] = 1.0
    coef, *_ = np.linalg.lstsq(K, target, rcond=None)
    assert np.linalg.norm(K @ coef - target) <= 1e-8


def test_poly_printer_round_trip():
    p = Poly(2, {(1, 0, 2, 0): -0.5, (0, 0, 0, 1): 1.0, (0, 0, 0, 0): 3.0})
    assert p.to_expr() == "3 + y2 - 0.5*x1*y1^2"
    q = Poly.from_field(p.to_field())
    assert q.terms == p.terms
