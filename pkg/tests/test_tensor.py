import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from faacalc.errors import InputError
from faacalc.tensor import (
    Tensor,
    contract,
    dual_vector,
    is_symmetric,
    spectral_norm_bounds,
    symmetric_product,
    symmetrize,
    tensor_product,
)


def test_exact_and_float_backends():
    t = Tensor(np.array([Fraction(1, 3), 2], dtype=object), 1)
    assert t.exact and t.scalar_kind == "exact-rational"
    assert not t.to_float().exact
    assert Tensor([1.0, 2.0], 1).scalar_kind == "float"


def test_layout_and_call():
    t = Tensor(np.arange(12.0).reshape(3, 2, 2), 2)
    assert t.contra_dims == (3,) and t.cov_dim == 2
    assert np.allclose(t([1, 0], [0, 1]), [1.0, 5.0, 9.0])
    with pytest.raises(InputError):
        t([1, 0])


def test_mismatched_cov_slots_rejected():
    with pytest.raises(InputError):
        Tensor(np.zeros((2, 3)), 2)


def test_contract_matrix_example():
    mu = Tensor(np.array([[1, 2], [3, 4]], dtype=object), 1)
    nu = Tensor(np.array([[0, 1], [1, 0]], dtype=object), 1)
    assert contract(mu, nu) == Tensor(np.array([[2, 1], [4, 3]], dtype=object), 1)


def test_contract_dimension_check():
    with pytest.raises(InputError):
        contract(Tensor(np.ones((2, 3)), 1), Tensor(np.ones((2, 2)), 1))


def test_contract_is_function_composition(rng):
    mu = Tensor(rng.normal(size=(3, 2, 2)), 2)
    a, b = Tensor(rng.normal(size=(2, 4)), 1), Tensor(rng.normal(size=(2, 4)), 1)
    v, w = rng.normal(size=4), rng.normal(size=4)
    lhs = contract(mu, tensor_product(a, b))(v, w)
    assert np.allclose(lhs, mu(a(v), b(w)))


def test_symmetric_product_example():
    t = symmetric_product([np.array([1, 0], dtype=object), np.array([0, 1], dtype=object)])
    assert t == Tensor(np.array([[0, Fraction(1, 2)], [Fraction(1, 2), 0]], dtype=object), 2)
    assert t.symmetric and is_symmetric(t)


def test_empty_symmetric_product_is_one():
    t = symmetric_product([], exact=True)
    assert t.cov_arity == 0 and t.data[()] == 1


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (2, 3, 3, 3), elements=st.floats(-5, 5)))
def test_symmetrize_is_idempotent_projection(data):
    t = Tensor(data, 3)
    s = symmetrize(t)
    assert is_symmetric(s, tol=1e-12)
    assert s.allclose(symmetrize(s))


def test_is_symmetric_detects_asymmetry():
    assert not is_symmetric(Tensor(np.array([[0.0, 1.0], [0.0, 0.0]]), 2))


def test_dual_vector_attains_dual_norm(rng):
    g = rng.normal(size=5)
    for p in (1.0, 1.5, 2.0, 3.0, math.inf):
        v = dual_vector(g, p)
        q = math.inf if p == 1 else (1.0 if math.isinf(p) else p / (p - 1))
        assert np.linalg.norm(v, ord=p) == pytest.approx(1.0)
        assert g @ v == pytest.approx(np.linalg.norm(g, ord=q))


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_simple_tensor_norm_is_product(p):
    # q-norms (q conjugate to p) of the factors are 2 and 3
    q = math.inf if p == 1 else (1.0 if math.isinf(p) else p / (p - 1))
    a = np.array([2.0, 0.0, 0.0]) if not math.isinf(q) else np.array([2.0, -1.0, 0.5])
    b = np.array([0.0, 3.0, 0.0]) if not math.isinf(q) else np.array([3.0, 1.0, -2.0])
    if q == 1:
        a, b = np.array([1.0, 1.0, 0.0]), np.array([1.5, 0.0, 1.5])
    assert np.linalg.norm(a, ord=q) == pytest.approx(2) and np.linalg.norm(b, ord=q) == pytest.approx(3)
    t = Tensor(np.multiply.outer(a, b)[None], 2)
    lo, hi = spectral_norm_bounds(t, p=p, p_out=2)
    assert lo == pytest.approx(6, abs=1e-9) and hi == pytest.approx(6, abs=1e-9)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_simple_tensor_lower_estimate(p):
    q = p / (p - 1)
    a = np.array([1.0, 2.0, -1.0])
    b = np.array([0.5, 1.0, 2.0])
    a, b = 2 * a / np.linalg.norm(a, ord=q), 3 * b / np.linalg.norm(b, ord=q)
    lo, hi = spectral_norm_bounds(Tensor(np.multiply.outer(a, b)[None], 2), p=p)
    assert lo == pytest.approx(6, abs=1e-9)
    assert hi >= lo


def test_matrix_bounds_use_svd(rng):
    a = rng.normal(size=(3, 3))
    lo, hi = spectral_norm_bounds(Tensor(a, 1))
    assert lo == pytest.approx(np.linalg.svd(a, compute_uv=False)[0])
    assert hi == pytest.approx(lo)


def _brute_lower(t, p, samples, rng):
    best = 0.0
    for _ in range(samples):
        vs = [rng.normal(size=t.cov_dim) for _ in range(t.cov_arity)]
        vs = [v / np.linalg.norm(v, ord=p) for v in vs]
        best = max(best, float(np.linalg.norm(np.ravel(t(*vs)))))
    return best


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, math.inf])
def test_sandwich_on_random_tensors(rng, p):
    for _ in range(20):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(1, 4))
        t = Tensor(rng.normal(size=(2,) + (n,) * m), m)
        lo, hi = spectral_norm_bounds(t, p=p)
        flat = np.abs(t.data)
        assert lo <= hi * (1 + 1e-12)
        assert lo <= flat.sum() + 1e-12
        assert hi >= _brute_lower(t, p, 50, rng) - 1e-12
        # every coordinate evaluation is below the norm
        for ix in itertools.product(range(n), repeat=m):
            e = [np.eye(n)[i] for i in ix]
            assert np.linalg.norm(t(*e)) <= hi * (1 + 1e-12)


def test_spectral_bounds_deterministic(rng):
    t = Tensor(rng.normal(size=(2, 3, 3, 3)), 3)
    assert spectral_norm_bounds(t, p=3) == spectral_norm_bounds(t, p=3)


def test_zero_and_nan():
    assert spectral_norm_bounds(Tensor(np.zeros((2, 2)), 2)) == (0.0, 0.0)
    with pytest.raises(InputError):
        spectral_norm_bounds(Tensor(np.array([[np.nan, 0.0], [0.0, 0.0]]), 2))


def test_p_one_is_exact():
    t = Tensor(np.array([[[1.0, -4.0], [2.0, 0.5]]]), 2)
    assert spectral_norm_bounds(t, p=1) == (4.0, 4.0)
