import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hlab import _jetcore_py, jets
from hlab.jets import JetBatch, pair_index

compiled = pytest.importorskip("hlab._jetcore", reason="compiled extension not built")


def _random_jet(rng, m, d):
    I, J = pair_index(d)
    return (rng.normal(size=m), rng.normal(size=(m, d)), rng.normal(size=(m, len(I))))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 40), d=st.integers(1, 8))
def test_compiled_product_matches_fallback(seed, m, d):
    rng = np.random.default_rng(seed)
    I, J = pair_index(d)
    a, b = _random_jet(rng, m, d), _random_jet(rng, m, d)
    ref = _jetcore_py.jet_mul(*a, *b, I, J)
    out = compiled.jet_mul(*a, *b, I, J)
    for r, o in zip(ref, out):
        np.testing.assert_allclose(np.asarray(o), r, rtol=1e-14, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 40), d=st.integers(1, 8))
def test_compiled_chain_rule_matches_fallback(seed, m, d):
    rng = np.random.default_rng(seed)
    I, J = pair_index(d)
    _, ug, uh = _random_jet(rng, m, d)
    f1, f2 = rng.normal(size=m), rng.normal(size=m)
    ref = _jetcore_py.jet_chain(ug, uh, f1, f2, I, J)
    out = compiled.jet_chain(ug, uh, f1, f2, I, J)
    for r, o in zip(ref, out):
        np.testing.assert_allclose(np.asarray(o), r, rtol=1e-14, atol=1e-14)


def test_product_rule_on_coordinates():
    m, d = 3, 4
    rng = np.random.default_rng(0)
    z = rng.normal(size=(m, d))
    a = JetBatch.coordinate(z[:, 0], 0, d)
    b = JetBatch.coordinate(z[:, 2], 2, d)
    H = (a * b).hessian()
    expected = np.zeros((d, d))
    expected[0, 2] = expected[2, 0] = 1.0
    for k in range(m):
        np.testing.assert_array_equal(H[k], expected)


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_backend_switch(backend):
    old = jets.BACKEND
    try:
        jets.use_backend(backend)
        assert jets.BACKEND == backend
    finally:
        jets.use_backend(old)


def test_unknown_backend():
    with pytest.raises(ValueError):
        jets.use_backend("fortran")
