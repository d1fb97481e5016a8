from fractions import Fraction

import numpy as np
import pytest

from faacalc.calculus import PolyMap, compose_jet, jet_of_polymap, pullback_jet
from faacalc.errors import DomainError, InputError
from faacalc.oracle import (
    brute_partition_sum,
    central_scheme,
    default_step,
    fd_jet,
    series_inverse_univariate,
    symbolic_compose,
)
from faacalc.verify import random_polymap


def test_central_scheme_coefficients():
    s = central_scheme(2, 0.1)
    assert s.offsets == (1.0, 0.0, -1.0) and s.coeffs == (1, -2, 1)
    assert s.exactness_degree == 3
    with pytest.raises(InputError):
        central_scheme(1, 0.0)


def test_default_step():
    assert default_step(0) == pytest.approx(1e-5)
    assert default_step(3) == pytest.approx(10 ** -2)


def test_fd_exact_on_low_degree():
    # order j is exact on degree j+1
    P = PolyMap.from_terms(1, [[(1, (2,)), (2, (1,))]])
    jet = fd_jet(P, [0.7], 1, h=0.1)
    assert [float(t.data.ravel()[0]) for t in jet.derivs] == pytest.approx([0.49 + 1.4, 3.4], rel=1e-12)
    Q = PolyMap.from_terms(1, [[(1, (4,))]])
    assert float(fd_jet(Q, [0.7], 3, h=0.1).derivs[3].data.ravel()[0]) == pytest.approx(24 * 0.7, rel=1e-9)


def test_fd_error_is_second_order():
    # exp-like quintic: error of the 3rd derivative shrinks by ~4 when h halves
    P = PolyMap.from_terms(1, [[(1, (5,))]])
    exact = 60 * 0.5 ** 2
    errs = [abs(float(fd_jet(P, [0.5], 3, h=h).derivs[3].data.ravel()[0]) - exact) for h in (0.1, 0.05)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_fd_richardson_improves(rng):
    P = random_polymap(rng, 2, 1, 6, exact=False)
    x = rng.uniform(-1, 1, 2)
    ref = jet_of_polymap(P, x, 3, exact=False)
    plain = fd_jet(P, x, 3, h=0.05)
    rich = fd_jet(P, x, 3, h=0.05, richardson=1)
    e0 = np.max(np.abs(plain.derivs[3].data - ref.derivs[3].data))
    e1 = np.max(np.abs(rich.derivs[3].data - ref.derivs[3].data))
    assert e1 < e0


def test_fd_order_limit():
    with pytest.raises(InputError):
        fd_jet(PolyMap.identity(1), [0.0], 5)


def test_symbolic_compose():
    sq = PolyMap.from_terms(1, [[(1, (2,))]])
    cu = PolyMap.from_terms(1, [[(1, (3,))]])
    assert symbolic_compose(sq, cu) == PolyMap.from_terms(1, [[(1, (6,))]])
    with pytest.raises(InputError):
        symbolic_compose(PolyMap.identity(2), cu)


def test_series_inverse():
    assert [str(c) for c in series_inverse_univariate([0, 1, 0, 1], 5)] == ["0", "1", "0", "-1", "0", "3"]
    # inverse of 2x + x^2 is (sqrt(1+y)-1), coefficients 1/2, -1/8, 1/16
    assert series_inverse_univariate([0, 2, 1], 3)[1:] == [Fraction(1, 2), Fraction(-1, 8), Fraction(1, 16)]
    with pytest.raises(DomainError):
        series_inverse_univariate([0, 0, 1], 3)
    with pytest.raises(InputError):
        series_inverse_univariate([1, 1], 3)


def test_brute_partition_sum_matches_engine(rng):
    for _ in range(5):
        g, f = random_polymap(rng, 2, 2, 3), random_polymap(rng, 2, 2, 3)
        x = [Fraction(1, 2), Fraction(1, 4)]
        gj = jet_of_polymap(g, x, 4)
        fj = jet_of_polymap(f, gj.value(), 4)
        counts = []
        assert brute_partition_sum(fj, gj, 4, counts).equals(compose_jet(fj, gj))
        assert counts == [1, 2, 5, 15]
    with pytest.raises(InputError):
        brute_partition_sum(fj, gj, 6)
