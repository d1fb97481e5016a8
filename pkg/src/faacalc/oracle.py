"""Independent ground truth for the chain-rule engines.

* :func:`fd_jet` - nested central finite differences (float),
* :func:`symbolic_compose` - polynomial substitution through sympy,
* :func:`series_inverse_univariate` - fixed-point reversion of a power
  series over the rationals,
* :func:`brute_partition_sum` - the chain-rule sum read literally, one
  explicit tensor product, contraction and symmetrization per partition.

None of these share accumulation code with :mod:`faacalc.calculus`; only
the tensor primitives and the partition enumerator are reused.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from faacalc.calculus import Jet, PolyMap, _check_base
from faacalc.errors import DomainError, InputError
from faacalc.partitions import enumerate_partitions
from faacalc.tensor import Tensor, as_float, contract, symmetrize, tensor_product

__all__ = [
    "FiniteDifferenceScheme",
    "central_scheme",
    "default_step",
    "fd_jet",
    "symbolic_compose",
    "series_inverse_univariate",
    "brute_partition_sum",
]


@dataclass(frozen=True)
class FiniteDifferenceScheme:
    """One-dimensional central stencil for the ``order``-th derivative.

    ``f^{(order)}(x) ~ sum_i coeffs[i] f(x + offsets[i] * step) / step**order``
    with error ``O(step**2)``; the stencil is exact on polynomials of degree
    ``order + 1``.
    """

    order: int
    step: float
    offsets: tuple[float, ...]
    coeffs: tuple[int, ...]

    @property
    def exactness_degree(self) -> int:
        return self.order + 1


def central_scheme(order: int, step: float) -> FiniteDifferenceScheme:
    """The ``order``-fold central difference with half-steps, ``delta^order``."""
    if order < 0:
        raise InputError("derivative order must be >= 0")
    if step <= 0:
        raise InputError("finite-difference step must be positive")
    offsets = tuple(order / 2 - i for i in range(order + 1))
    coeffs = tuple((-1) ** i * math.comb(order, i) for i in range(order + 1))
    return FiniteDifferenceScheme(order, step, offsets, coeffs)


def default_step(order: int) -> float:
    """Default step ``10**(-10/(order+2))`` for derivative order ``order``."""
    return 10.0 ** (-10.0 / (order + 2))


def _eval_float(P: PolyMap, pts: np.ndarray) -> np.ndarray:
    """Evaluate ``P`` at each row of ``pts`` in float arithmetic."""
    out = np.zeros((pts.shape[0], P.out_dim))
    for i, comp in enumerate(P.components):
        for c, e in comp:
            out[:, i] += float(c) * np.prod(pts ** np.asarray(e, dtype=float), axis=1)
    return out


def fd_jet(P: PolyMap, x, m: int, h: float | Sequence[float] | None = None,
           richardson: int = 0) -> Jet:
    """Float jet of ``P`` at ``x`` from nested central differences.

    The mixed derivative for a multi-index ``alpha`` applies the 1-D
    central stencil of order ``alpha_i`` along each coordinate ``i``.

    Parameters
    ----------
    h : float or sequence, optional
        Step, either one value for every order or one per order
        ``0..m``.  Defaults to :func:`default_step` per order.
    richardson : int
        Number of Richardson extrapolation levels over the steps
        ``h, h/2, ...``.  Each level removes the leading even power of
        ``h`` from the error; 0 gives the plain ``O(h**2)`` scheme.
    """
    if m > 4:
        raise InputError("fd_jet supports orders up to 4")
    x = np.asarray(as_float(np.atleast_1d(np.asarray(x, dtype=object))), dtype=float)
    n = P.in_dim
    if x.shape != (n,):
        raise InputError(f"point of dimension {x.size} for map on R^{n}")
    if h is None:
        steps = [default_step(j) for j in range(m + 1)]
    elif np.ndim(h) == 0:
        steps = [float(h)] * (m + 1)
    else:
        steps = [float(v) for v in h]
        if len(steps) < m + 1:
            raise InputError(f"need {m + 1} step sizes")
    derivs = []
    cache: dict = {}
    for j in range(m + 1):
        arr = np.empty((P.out_dim,) + (n,) * j)
        for ix in itertools.product(range(n), repeat=j):
            alpha = [0] * n
            for i in ix:
                alpha[i] += 1
            alpha = tuple(alpha)
            if alpha not in cache:
                cache[alpha] = _extrapolated(P, x, alpha, steps[j], richardson)
            arr[(slice(None),) + ix] = cache[alpha]
        derivs.append(Tensor._wrap(arr, j, n))
    return Jet(x, derivs)


def _extrapolated(P, x, alpha, step, levels):
    row = [_mixed_difference(P, x, alpha, step / 2 ** i) for i in range(levels + 1)]
    for k in range(1, levels + 1):
        f = 4.0 ** k
        row = [(f * row[i + 1] - row[i]) / (f - 1) for i in range(len(row) - 1)]
    return row[0]


def _mixed_difference(P, x, alpha, step):
    schemes = [central_scheme(a, step) for a in alpha]
    offs = [list(zip(s.offsets, s.coeffs)) for s in schemes]
    pts = []
    wts = []
    for combo in itertools.product(*offs):
        pts.append([xi + o * step for xi, (o, _) in zip(x, combo)])
        wts.append(math.prod(c for _, c in combo))
    vals = _eval_float(P, np.asarray(pts))
    return (np.asarray(wts, dtype=float) @ vals) / step ** sum(alpha)


def symbolic_compose(f: PolyMap, g: PolyMap) -> PolyMap:
    """Exact polynomial ``f o g`` by symbolic substitution (sympy).

    >>> sq = PolyMap.from_terms(1, [[(1, (2,))]])
    >>> cu = PolyMap.from_terms(1, [[(1, (3,))]])
    >>> symbolic_compose(sq, cu).components
    (((Fraction(1, 1), (6,)),),)
    """
    import sympy

    if f.in_dim != g.out_dim:
        raise InputError(f"cannot compose: f takes R^{f.in_dim}, g returns R^{g.out_dim}")
    xs = sympy.symbols(f"x0:{g.in_dim}")

    def expr(comp, args):
        return sum((sympy.Rational(c.numerator, c.denominator) * sympy.Mul(*[a ** e for a, e in zip(args, ex)])
                    for c, ex in comp), sympy.Integer(0))

    inner = [expr(comp, xs) for comp in g.components]
    comps = []
    for comp in f.components:
        e = sympy.expand(expr(comp, inner))
        poly = sympy.Poly(e, *xs)
        comps.append([(Fraction(int(c.p), int(c.q)), tuple(mon)) for mon, c in poly.terms()])
    return PolyMap.from_terms(g.in_dim, comps)


def _series_mul(a, b, m):
    out = [Fraction(0)] * (m + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j in range(0, m + 1 - i):
            if j < len(b):
                out[i + j] += ai * b[j]
    return out


def series_inverse_univariate(coeffs: Sequence, m: int) -> list[Fraction]:
    """Coefficients ``c_0..c_m`` of the compositional inverse of a power series.

    ``coeffs[i]`` is the coefficient of ``x**i``; ``coeffs[0]`` must be 0.
    Writing ``phi = a x + R(x)`` the inverse solves ``psi = (y - R(psi)) / a``;
    each fixed-point sweep fixes one more coefficient.

    >>> [str(c) for c in series_inverse_univariate([0, 1, 0, 1], 5)]
    ['0', '1', '0', '-1', '0', '3']
    """
    c = [Fraction(v) for v in coeffs] + [Fraction(0)] * (m + 2)
    if c[0] != 0:
        raise InputError("series must vanish at 0")
    a = c[1]
    if a == 0:
        raise DomainError("phi'(0) = 0: series is not invertible")
    psi = [Fraction(0)] * (m + 1)
    if m >= 1:
        psi[1] = 1 / a
    for _ in range(m):
        # R(psi) = sum_{i>=2} c_i psi^i
        acc = [Fraction(0)] * (m + 1)
        pw = psi[:]
        for i in range(2, m + 1):
            pw = _series_mul(pw, psi, m)
            if c[i]:
                acc = [s + c[i] * t for s, t in zip(acc, pw)]
        new = [-v / a for v in acc]
        if m >= 1:
            new[1] += 1 / a
        if new == psi:
            break
        psi = new
    return psi


def brute_partition_sum(f_jet: Jet, phi_jet: Jet, m: int, counts: list | None = None) -> Jet:
    """Chain-rule jet of ``f o phi`` evaluated summand by summand.

    Each partition contributes the contraction of ``grad^k f`` with the
    explicit tensor product of the block derivatives, placed on the slots
    named by the block indices and symmetrized on its own.
    """
    if m > 5:
        raise InputError("brute_partition_sum is limited to m <= 5")
    if f_jet.exact != phi_jet.exact:
        f_jet, phi_jet = f_jet.to_float(), phi_jet.to_float()
    _check_base(f_jet.base_point, phi_jet.value(), phi_jet.exact)
    n = phi_jet.in_dim
    r = len(f_jet.out_dims)
    derivs = [f_jet.derivs[0]]
    for j in range(1, m + 1):
        total = None
        c = 0
        for part in enumerate_partitions(j):
            c += 1
            prod = phi_jet.derivs[len(part.blocks[0])]
            for blk in part.blocks[1:]:
                prod = tensor_product(prod, phi_jet.derivs[len(blk)])
            term = contract(f_jet.derivs[part.k], prod)
            # slot t of term belongs to index slot_index[t]
            slot_index = [i - 1 for blk in part.blocks for i in blk]
            perm = list(range(r)) + [r + slot_index.index(t) for t in range(j)]
            placed = Tensor._wrap(np.transpose(term.data, perm), j, n)
            sym = symmetrize(placed)
            total = sym if total is None else total + sym
        if counts is not None:
            counts.append(c)
        derivs.append(Tensor._wrap(total.data, j, n))
    return Jet(phi_jet.base_point, derivs)
