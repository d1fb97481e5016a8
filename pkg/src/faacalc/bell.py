"""Scherk indices and the four families of Bell polynomials.

Coefficients are exact Python integers.  Polynomial evaluation is generic in
the scalar type: pass ``int``/``Fraction`` values for exact results or floats
for a float result.
"""
from __future__ import annotations

import functools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from faacalc.errors import InputError

__all__ = [
    "ScherkIndex",
    "GeneralizedScherkIndex",
    "HatIndex",
    "scherk_indices",
    "scherk_coefficient",
    "bell_partial",
    "bell_full",
    "generalized_scherk",
    "generalized_bell",
    "hat_condense",
    "hat_evaluate",
    "higher_level_bell",
]


@dataclass(frozen=True)
class ScherkIndex:
    """Block-size signature ``b`` of a partition of ``{1..m}``.

    ``b[j-1]`` counts the blocks of size ``j``.
    """

    m: int
    b: tuple[int, ...]

    @property
    def k(self) -> int:
        return sum(self.b)

    @property
    def coefficient(self) -> int:
        return scherk_coefficient(self)


@dataclass(frozen=True)
class GeneralizedScherkIndex:
    """Pair ``(b, h)`` with ``b`` indexed ``1..m`` and ``h`` indexed ``0..m``."""

    m: int
    k: int
    d: int
    b: tuple[int, ...]
    h: tuple[int, ...]


@dataclass(frozen=True)
class HatIndex:
    """Condensed exponent vector with its accumulated coefficient.

    ``p[j]`` is the total exponent of ``|grad^j phi|`` for ``j = 0..m+1``;
    ``p[0]`` is always zero.
    """

    m: int
    k: int
    d: int
    p: tuple[int, ...]
    coefficient: int


def _compositions(total: int, weight: int, slots: Sequence[int]):
    """Non-negative vectors ``c`` over ``slots`` with sum ``total`` and
    ``sum(slot * c) == weight``.

    Depth-first over the slots in the given order, largest count first.
    """
    n = len(slots)
    out = [0] * n

    def rec(i, tot, w):
        if i == n:
            if tot == 0 and w == 0:
                yield tuple(out)
            return
        j = slots[i]
        rest = slots[i + 1:]
        lo_w = min(rest) if rest else None
        hi_w = max(rest) if rest else None
        if j == 0:
            top = tot
        else:
            top = min(tot, w // j)
        for c in range(top, -1, -1):
            t2, w2 = tot - c, w - j * c
            if rest:
                # remaining counts t2 must realise weight w2 with weights in rest
                if t2 * lo_w > w2 or t2 * hi_w < w2:
                    continue
            elif t2 or w2:
                continue
            out[i] = c
            yield from rec(i + 1, t2, w2)
        out[i] = 0

    yield from rec(0, total, weight)


def scherk_indices(m: int, k: int) -> list[ScherkIndex]:
    """All ``b`` with ``sum(b) == k`` and ``sum(i * b_i) == m``.

    Examples
    --------
    >>> [s.b for s in scherk_indices(4, 2)]
    [(1, 0, 1, 0), (0, 2, 0, 0)]
    """
    if not (1 <= k <= m):
        return []
    return list(_scherk_cached(m, k))


@functools.lru_cache(maxsize=None)
def _scherk_cached(m, k):
    return tuple(ScherkIndex(m, b) for b in _compositions(k, m, list(range(1, m + 1))))


def scherk_coefficient(idx: ScherkIndex) -> int:
    """Number of partitions of ``{1..m}`` with block signature ``idx.b``:
    ``m! / prod(b_j! (j!)^b_j)``.
    """
    den = 1
    for j, bj in enumerate(idx.b, start=1):
        den *= math.factorial(bj) * math.factorial(j) ** bj
    return math.factorial(idx.m) // den


def _monomial(xs, b, offset=1):
    r = 1
    for j, e in enumerate(b, start=offset):
        if e:
            r = r * xs[j - 1] ** e
    return r


def bell_partial(m: int, k: int, xs: Sequence) -> object:
    """Partial Bell polynomial ``B_{m,k}(x_1, ..., x_{m-k+1})``.

    Entries of ``xs`` beyond position ``m-k+1`` never contribute.
    ``B_{0,0} = 1`` and ``B_{m,0} = 0`` for ``m >= 1``.

    >>> bell_partial(3, 2, [2, 5])
    30
    """
    if k == 0:
        return 1 if m == 0 else 0
    if k > m or k < 0:
        return 0
    need = m - k + 1
    if len(xs) < need:
        raise InputError(f"B_{{{m},{k}}} needs {need} arguments, got {len(xs)}")
    xs = list(xs[:need]) + [0] * (m - need)
    total = 0
    for s in scherk_indices(m, k):
        total = total + scherk_coefficient(s) * _monomial(xs, s.b)
    return total


def bell_full(m: int, ys: Sequence, xs: Sequence) -> object:
    """Full Bell polynomial ``sum_k y_k B_{m,k}(xs)``."""
    if len(ys) != m or len(xs) != m:
        raise InputError(f"bell_full needs two lists of length {m}, got {len(ys)} and {len(xs)}")
    total = 0
    for k in range(1, m + 1):
        total = total + ys[k - 1] * bell_partial(m, k, xs)
    return total


def _gen_coefficient(m, d, b, h):
    den = 1
    for i, bi in enumerate(b, start=1):
        den *= math.factorial(bi) * math.factorial(i) ** bi
    for j, hj in enumerate(h):
        den *= math.factorial(hj) * math.factorial(j) ** hj
    return math.factorial(m) * math.factorial(d) // den


def generalized_scherk(k: int, m: int, d: int) -> list[tuple[GeneralizedScherkIndex, int]]:
    """All ``(b, h)`` with ``sum b = k``, ``sum h = d`` and
    ``sum i b_i + sum j h_j = m``, paired with their coefficient
    ``m! d! / (prod b_i! (i!)^b_i prod h_j! (j!)^h_j)``.

    The coefficient counts pairs (ordered partition, inner partition) of
    the kind appearing in the derivative of a pulled-back ``d``-tensor field.

    >>> [(g.b, g.h, c) for g, c in generalized_scherk(1, 1, 1)]
    [((1,), (1, 0), 1)]
    """
    if k < 0 or d < 0 or m < 0 or k > m:
        return []
    return list(_generalized_cached(k, m, d))


@functools.lru_cache(maxsize=None)
def _generalized_cached(k, m, d):
    out = []
    for n in range(k, m + 1):
        bs = [()] if m == 0 else (
            [b for b in _compositions(k, n, list(range(1, m + 1)))] if k > 0
            else ([(0,) * m] if n == 0 else []))
        if not bs:
            continue
        hs = list(_compositions(d, m - n, list(range(0, m + 1))))
        for b in bs:
            for h in hs:
                idx = GeneralizedScherkIndex(m, k, d, tuple(b), tuple(h))
                out.append((idx, _gen_coefficient(m, d, b, h)))
    return tuple(out)


def _check_gen_xs(m, xs):
    if len(xs) != m + 1:
        raise InputError(f"generalized Bell polynomial of order {m} needs {m + 1} arguments, got {len(xs)}")


def generalized_bell(k: int, m: int, d: int, xs: Sequence) -> object:
    """Generalized Bell polynomial ``B_{k,m,d}(x_1, ..., x_{m+1})``.

    ``x_j`` stands for ``|grad^j phi|``.  Each index contributes
    ``prod x_i^b_i * prod x_{j+1}^h_j``.

    >>> generalized_bell(1, 1, 1, [3, 5])
    9
    """
    _check_gen_xs(m, xs)
    total = 0
    for idx, c in generalized_scherk(k, m, d):
        term = c * _monomial(xs, idx.b) * _monomial(xs, idx.h, offset=1)
        total = total + term
    return total


def hat_condense(k: int, m: int, d: int) -> list[HatIndex]:
    """Group the generalized indices by their combined exponent vector.

    The vector has length ``m+2`` and is indexed by derivative order:
    ``p[j] = b_j + h_{j-1}`` (``p[0] = 0``).  For ``d = 0`` it is the
    Scherk index with a zero in front (and an unused trailing slot for
    ``grad^{m+1} phi``).
    """
    return list(_hat_cached(k, m, d))


@functools.lru_cache(maxsize=None)
def _hat_cached(k, m, d):
    acc: dict[tuple[int, ...], int] = defaultdict(int)
    order: list[tuple[int, ...]] = []
    for idx, c in generalized_scherk(k, m, d):
        p = [0] * (m + 2)
        for i, bi in enumerate(idx.b, start=1):
            p[i] += bi
        for j, hj in enumerate(idx.h):
            p[j + 1] += hj
        key = tuple(p)
        if key not in acc:
            order.append(key)
        acc[key] += c
    return tuple(HatIndex(m, k, d, key, acc[key]) for key in order)


def hat_evaluate(k: int, m: int, d: int, xs: Sequence) -> object:
    """Evaluate ``sum_p A_p prod_{j=1}^{m+1} x_j^{p_j}``; equals :func:`generalized_bell`."""
    _check_gen_xs(m, xs)
    total = 0
    for hi in hat_condense(k, m, d):
        total = total + hi.coefficient * _monomial(xs, hi.p[1:])
    return total


def higher_level_bell(l: int, m: int, k: int | None, tables: Sequence[Sequence]) -> object:
    """Higher-level Bell polynomials.

    ``tables[i]`` holds ``x^{[i]}_1 .. x^{[i]}_m``.  Level one is the ordinary
    family; level ``l+1`` feeds the level-``l`` full polynomials of orders
    ``1..m-k+1`` into ``B_{m,k}``.  With ``k`` given the partial polynomial
    (using ``tables[0..l-1]``) is returned, otherwise the full polynomial
    (using ``tables[0..l]``).

    For univariate maps ``f_0, ..., f_l`` with ``tables[i]`` the derivatives
    of ``f_i``, the full polynomial is the ``m``-th derivative of
    ``f_l o ... o f_0``.
    """
    if l < 1:
        raise InputError("level must be >= 1")
    need = l if k is not None else l + 1
    if len(tables) < need:
        raise InputError(f"level {l} needs {need} tables, got {len(tables)}")
    for i in range(need):
        if len(tables[i]) < m:
            raise InputError(f"table {i} has {len(tables[i])} entries, needs {m}")

    # full[j-1] = B^{[i]}_j on tables[0..i], built up level by level;
    # level 0 is the identity B^{[0]}_j = x^{[0]}_j.
    full = list(tables[0][:m])
    for lev in range(1, l):
        full = [bell_full(j, list(tables[lev][:j]), full[:j]) for j in range(1, m + 1)]
    if k is not None:
        return bell_partial(m, k, full[: max(m - k + 1, 0)]) if k >= 1 else bell_partial(m, k, [])
    return bell_full(m, list(tables[l][:m]), full[:m])
