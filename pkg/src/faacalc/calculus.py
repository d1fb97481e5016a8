"""Jets and higher-order chain rules.

A :class:`Jet` stores the value and the symmetric derivative tensors of a
map at one point.  The engines here evaluate the partition sums of the
multivariate chain rule directly:

* :func:`compose_jet` sums over set partitions of the derivative slots,
* :func:`compose_chain` sums over nested partitions for longer chains,
* :func:`pullback_jet` handles covariant tensor fields, whose slots are
  fed through the Jacobian and therefore pick up one extra derivative,
* :func:`inverse_jet` solves the chain rule for the derivatives of an
  inverse map, order by order.

Summands are formed with plain (non-symmetric) tensor products in block
order and the total is symmetrized once; the full partition sum is
symmetric, so this equals the symmetrized sum of symmetric products.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from faacalc.bell import scherk_indices
from faacalc.errors import DomainError, InputError
from faacalc.partitions import (
    enumerate_nested_partitions,
    enumerate_ordered_partitions,
    enumerate_partitions,
)
from faacalc.tensor import Tensor, as_exact, as_float, symmetrize_axes

__all__ = [
    "PolyMap",
    "Jet",
    "jet_of_polymap",
    "identity_jet",
    "jets_at_points",
    "jet_from_arrays",
    "compose_jet",
    "compose_jet_counted",
    "compose_chain",
    "faa_di_bruno",
    "pullback_jet",
    "pullback_jet_counted",
    "inverse_jet",
    "BASE_POINT_TOL",
]

BASE_POINT_TOL = 1e-12


def _is_exact_scalar(v) -> bool:
    return isinstance(v, (int, Fraction, np.integer)) and not isinstance(v, bool) or isinstance(v, str)


def _vector(x, exact: bool | None):
    x = list(np.atleast_1d(np.asarray(x, dtype=object)).ravel())
    if exact is None:
        exact = all(_is_exact_scalar(v) for v in x)
    return (as_exact(x) if exact else as_float(x)), exact


@dataclass(frozen=True)
class PolyMap:
    """Polynomial map ``R^N -> R^M`` with rational coefficients.

    ``components[i]`` is a tuple of ``(coeff, exponents)`` monomials of the
    i-th output.  Exponent tuples have length ``in_dim`` and are unique per
    component (duplicates are merged on construction through
    :meth:`from_terms`).
    """

    in_dim: int
    out_dim: int
    components: tuple[tuple[tuple[Fraction, tuple[int, ...]], ...], ...]

    def __post_init__(self):
        if len(self.components) != self.out_dim:
            raise InputError(f"expected {self.out_dim} components, got {len(self.components)}")
        for comp in self.components:
            seen = set()
            for c, e in comp:
                if len(e) != self.in_dim or any(k < 0 for k in e):
                    raise InputError(f"bad exponent {e} for input dimension {self.in_dim}")
                if e in seen:
                    raise InputError(f"duplicate monomial {e}")
                seen.add(e)

    @classmethod
    def from_terms(cls, in_dim: int, components: Sequence[Sequence[tuple]]) -> "PolyMap":
        comps = []
        for comp in components:
            acc: dict[tuple[int, ...], Fraction] = {}
            for c, e in comp:
                e = tuple(int(k) for k in e)
                acc[e] = acc.get(e, Fraction(0)) + Fraction(c)
            comps.append(tuple((c, e) for e, c in sorted(acc.items()) if c != 0))
        return cls(in_dim, len(comps), tuple(comps))

    @classmethod
    def linear(cls, A, b=None) -> "PolyMap":
        """Affine map ``x -> A x + b``."""
        A = np.asarray(A, dtype=object)
        m, n = A.shape
        comps = []
        for i in range(m):
            terms = [(A[i, j], tuple(int(j == l) for l in range(n))) for j in range(n)]
            if b is not None:
                terms.append((b[i], (0,) * n))
            comps.append(terms)
        return cls.from_terms(n, comps)

    @classmethod
    def identity(cls, n: int) -> "PolyMap":
        return cls.linear(np.eye(n, dtype=int))

    @classmethod
    def from_json(cls, obj: dict) -> "PolyMap":
        try:
            n = int(obj["input_dim"])
            comps = [[(Fraction(str(t["coeff"])), tuple(t["exponents"])) for t in comp]
                     for comp in obj["components"]]
            pm = cls.from_terms(n, comps)
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise InputError(f"malformed PolyMap JSON: {exc}") from exc
        if "output_dim" in obj and int(obj["output_dim"]) != pm.out_dim:
            raise InputError("output_dim does not match number of components")
        return pm

    def to_json(self) -> dict:
        return {
            "input_dim": self.in_dim,
            "output_dim": self.out_dim,
            "components": [[{"coeff": _frac_str(c), "exponents": list(e)} for c, e in comp]
                           for comp in self.components],
        }

    def degree(self) -> int:
        return max((sum(e) for comp in self.components for _, e in comp), default=0)

    def partial(self, i: int) -> "PolyMap":
        """Exact partial derivative along coordinate ``i``."""
        comps = []
        for comp in self.components:
            terms = []
            for c, e in comp:
                if e[i]:
                    e2 = list(e)
                    e2[i] -= 1
                    terms.append((c * e[i], tuple(e2)))
            comps.append(terms)
        return PolyMap.from_terms(self.in_dim, comps)

    def eval_points(self, pts) -> np.ndarray:
        """Float values at each row of ``pts``; shape ``(n, out_dim)``."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.in_dim)
        out = np.zeros((pts.shape[0], self.out_dim))
        for i, comp in enumerate(self.components):
            for c, e in comp:
                term = np.full(pts.shape[0], float(c))
                for k, ek in enumerate(e):
                    if ek:
                        term = term * pts[:, k] ** ek
                out[:, i] += term
        return out

    def __call__(self, x, exact: bool | None = None) -> np.ndarray:
        xv, exact = _vector(x, exact)
        if len(xv) != self.in_dim:
            raise InputError(f"point of dimension {len(xv)} for map on R^{self.in_dim}")
        return _derivative_values(self, xv, (0,) * self.in_dim, exact)


def _frac_str(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _falling(e: int, a: int) -> int:
    r = 1
    for i in range(a):
        r *= e - i
    return r


def _derivative_values(P: PolyMap, x, alpha: tuple[int, ...], exact: bool) -> np.ndarray:
    """``d^alpha P(x)`` for every component."""
    out = np.empty(P.out_dim, dtype=object if exact else float)
    for i, comp in enumerate(P.components):
        acc = Fraction(0) if exact else 0.0
        for c, e in comp:
            coef = 1
            ok = True
            for ek, ak in zip(e, alpha):
                if ak > ek:
                    ok = False
                    break
                coef *= _falling(ek, ak)
            if not ok:
                continue
            term = (c if exact else float(c)) * coef
            for xk, ek, ak in zip(x, e, alpha):
                if ek - ak:
                    term = term * xk ** (ek - ak)
            acc = acc + term
        out[i] = acc
    return out


@dataclass
class Jet:
    """Value and derivatives ``grad^0 .. grad^m`` of a map at ``base_point``.

    ``derivs[j]`` has ``j + field_arity`` covariant slots: ``j``
    differentiation slots followed by the ``field_arity`` payload slots of
    a covariant tensor field.  Contravariant dims are shared by all orders.
    """

    base_point: np.ndarray
    derivs: list[Tensor]
    field_arity: int = 0

    def __post_init__(self):
        if not self.derivs:
            raise InputError("a jet needs at least the value")
        for j, t in enumerate(self.derivs):
            if t.cov_arity != j + self.field_arity:
                raise InputError(f"derivs[{j}] has cov_arity {t.cov_arity}, expected {j + self.field_arity}")

    @property
    def order(self) -> int:
        return len(self.derivs) - 1

    @property
    def in_dim(self) -> int:
        return len(self.base_point)

    @property
    def out_dims(self) -> tuple[int, ...]:
        return self.derivs[0].contra_dims

    @property
    def exact(self) -> bool:
        return self.derivs[0].exact

    def value(self) -> np.ndarray:
        return self.derivs[0].data

    def truncate(self, m: int) -> "Jet":
        if m > self.order:
            raise InputError(f"cannot truncate a jet of order {self.order} to {m}")
        return Jet(self.base_point, self.derivs[: m + 1], self.field_arity)

    def to_float(self) -> "Jet":
        return Jet(as_float(self.base_point), [t.to_float() for t in self.derivs], self.field_arity)

    def to_exact(self) -> "Jet":
        return Jet(as_exact(self.base_point), [t.to_exact() for t in self.derivs], self.field_arity)

    def equals(self, other: "Jet") -> bool:
        """Exact equality of all derivative tensors."""
        return (self.order == other.order and self.field_arity == other.field_arity
                and all(a == b for a, b in zip(self.derivs, other.derivs)))

    def allclose(self, other: "Jet", rtol=1e-9, atol=1e-9) -> bool:
        return (self.order == other.order
                and all(a.allclose(b, rtol, atol) for a, b in zip(self.derivs, other.derivs)))


def jet_of_polymap(P: PolyMap, x, m: int, field_arity: int = 0,
                   exact: bool | None = None) -> Jet:
    """Jet of order ``m`` of a polynomial map at ``x`` by exact differentiation.

    With ``field_arity = d`` the ``out_dim`` of ``P`` must be ``V * N**d``
    and the output is read as a ``d``-covariant tensor field with values in
    ``R^V`` (row-major, payload slots last).

    >>> from fractions import Fraction
    >>> cube = PolyMap.from_terms(1, [[(1, (3,))]])
    >>> [int(t.data.ravel()[0]) for t in jet_of_polymap(cube, [1], 4).derivs]
    [1, 3, 6, 6, 0]
    """
    xv, exact = _vector(x, exact)
    n = P.in_dim
    if len(xv) != n:
        raise InputError(f"point of dimension {len(xv)} for map on R^{n}")
    d = field_arity
    if P.out_dim % (n ** d):
        raise InputError(f"output dimension {P.out_dim} is not a multiple of {n}^{d}")
    v = P.out_dim // n ** d
    cache: dict[tuple[int, ...], np.ndarray] = {}
    derivs = []
    for j in range(m + 1):
        arr = np.empty((P.out_dim,) + (n,) * j, dtype=object if exact else float)
        for ix in itertools.product(range(n), repeat=j):
            alpha = [0] * n
            for i in ix:
                alpha[i] += 1
            alpha = tuple(alpha)
            if alpha not in cache:
                cache[alpha] = _derivative_values(P, xv, alpha, exact)
            arr[(slice(None),) + ix] = cache[alpha]
        arr = arr.reshape((v,) + (n,) * d + (n,) * j)
        arr = np.moveaxis(arr, list(range(1, 1 + d)), list(range(1 + j, 1 + j + d)))
        derivs.append(Tensor._wrap(np.ascontiguousarray(arr), j + d, n))
    return Jet(xv, derivs, d)


def jets_at_points(P: PolyMap, pts, m: int, field_arity: int = 0) -> list[np.ndarray]:
    """Float derivative arrays of ``P`` at many points at once.

    Entry ``j`` has shape ``(n, V) + (N,) * (j + field_arity)`` with the
    same slot convention as :func:`jet_of_polymap`.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, P.in_dim)
    n = P.in_dim
    d = field_arity
    if P.out_dim % (n ** d):
        raise InputError(f"output dimension {P.out_dim} is not a multiple of {n}^{d}")
    v = P.out_dim // n ** d
    polys: dict[tuple[int, ...], PolyMap] = {(0,) * n: P}
    vals: dict[tuple[int, ...], np.ndarray] = {}

    def poly(alpha):
        if alpha not in polys:
            i = next(k for k, a in enumerate(alpha) if a)
            prev = list(alpha)
            prev[i] -= 1
            polys[alpha] = poly(tuple(prev)).partial(i)
        return polys[alpha]

    out = []
    for j in range(m + 1):
        arr = np.empty((pts.shape[0], P.out_dim) + (n,) * j)
        for ix in itertools.product(range(n), repeat=j):
            alpha = [0] * n
            for i in ix:
                alpha[i] += 1
            alpha = tuple(alpha)
            if alpha not in vals:
                vals[alpha] = poly(alpha).eval_points(pts)
            arr[(slice(None), slice(None)) + ix] = vals[alpha]
        arr = arr.reshape((pts.shape[0], v) + (n,) * d + (n,) * j)
        arr = np.moveaxis(arr, list(range(2, 2 + d)), list(range(2 + j, 2 + j + d)))
        out.append(np.ascontiguousarray(arr))
    return out


def jet_from_arrays(base_point, arrays: Sequence[np.ndarray], field_arity: int = 0) -> Jet:
    """Wrap derivative arrays (leading contravariant axes first) as a Jet."""
    bp = np.asarray(base_point)
    n = len(bp)
    return Jet(bp, [Tensor._wrap(np.asarray(a), j + field_arity, n) for j, a in enumerate(arrays)],
               field_arity)


def identity_jet(base_point, m: int, exact: bool | None = None) -> Jet:
    """Jet of the identity map of ``R^N`` at ``base_point``."""
    xv, exact = _vector(base_point, exact)
    n = len(xv)
    dt = object if exact else float
    one = Fraction(1) if exact else 1.0
    zero = Fraction(0) if exact else 0.0
    derivs = [Tensor._wrap(xv.copy(), 0, n)]
    if m >= 1:
        eye = np.full((n, n), zero, dtype=dt)
        for i in range(n):
            eye[i, i] = one
        derivs.append(Tensor._wrap(eye, 1, n))
    for j in range(2, m + 1):
        derivs.append(Tensor._wrap(np.full((n,) * (j + 1), zero, dtype=dt), j, n))
    return Jet(xv, derivs)


# -- engines ----------------------------------------------------------------

def _zeros(shape, exact):
    if exact:
        return np.full(shape, Fraction(0), dtype=object)
    return np.zeros(shape)


def _contract_front(arr: np.ndarray, axis: int, g: np.ndarray) -> np.ndarray:
    """Contract ``arr``'s ``axis`` with the first axis of ``g``; ``g``'s other
    axes are appended at the end."""
    return np.tensordot(arr, g, axes=([axis], [0]))


def _unify(fj: Jet, gj: Jet):
    if fj.exact == gj.exact:
        return fj, gj
    return fj.to_float(), gj.to_float()


def _check_base(point, value, exact):
    point = np.asarray(point)
    value = np.asarray(value).ravel()
    if point.shape != value.shape:
        raise InputError(f"base point of dimension {point.size} does not match value of dimension {value.size}")
    if exact:
        if not all(a == b for a, b in zip(point, value)):
            raise InputError("outer jet is not based at the value of the inner jet")
    elif np.max(np.abs(as_float(point) - as_float(value)), initial=0.0) > BASE_POINT_TOL:
        raise InputError("outer jet is not based at the value of the inner jet (tolerance 1e-12)")


def _chain_sum(fd: Sequence[np.ndarray], gd: Sequence[np.ndarray], m: int, r: int, n: int,
               exact: bool, kmin: int = 1) -> tuple[np.ndarray, int]:
    """Unsymmetrized partition sum of order ``m`` and its summand count.

    ``fd[k]`` has ``r`` leading output axes and ``k`` input slots; ``gd[s]``
    has one output axis and ``s`` slots of dimension ``n``.  All set
    partitions of ``{1..m}`` are visited; summands sharing a block-size
    multiset are computed once.
    """
    shape = tuple(fd[0].shape[:r]) + (n,) * m
    total = _zeros(shape, exact)
    memo: dict[tuple[int, ...], np.ndarray] = {}
    count = 0
    for part in enumerate_partitions(m):
        count += 1
        if part.k < kmin:
            continue
        key = tuple(sorted(part.sizes()))
        term = memo.get(key)
        if term is None:
            term = fd[part.k]
            for s in key:
                term = _contract_front(term, r, gd[s])
            memo[key] = term
        total = total + term
    return total, count


def _compose(fj: Jet, gj: Jet, m: int, counts: list | None = None) -> Jet:
    if fj.field_arity or gj.field_arity:
        raise InputError("compose_jet works on maps; use pullback_jet for tensor fields")
    if m > fj.order or m > gj.order:
        raise InputError(f"order {m} exceeds jet orders ({fj.order}, {gj.order})")
    fj, gj = _unify(fj, gj)
    if len(gj.out_dims) != 1:
        raise InputError("inner jet must be vector valued")
    _check_base(fj.base_point, gj.value(), gj.exact)
    r = len(fj.out_dims)
    n = gj.in_dim
    fd = [t.data for t in fj.derivs]
    gd = [t.data for t in gj.derivs]
    derivs = [Tensor._wrap(fd[0].copy(), 0, n)]
    for j in range(1, m + 1):
        tot, c = _chain_sum(fd, gd, j, r, n, gj.exact)
        if counts is not None:
            counts.append(c)
        tot = symmetrize_axes(tot, range(r, r + j))
        derivs.append(Tensor._wrap(tot, j, n))
    return Jet(gj.base_point, derivs)


def compose_jet(f_jet: Jet, phi_jet: Jet, m: int | None = None) -> Jet:
    """Jet of ``f o phi`` at ``phi_jet.base_point``.

    Parameters
    ----------
    f_jet : Jet
        Jet of ``f`` at ``phi(x)``.
    phi_jet : Jet
        Jet of ``phi`` at ``x``.
    m : int, optional
        Order of the result; defaults to the smaller jet order.

    Notes
    -----
    Order ``j`` is the sum over all set partitions ``P`` of ``{1..j}`` of
    ``grad^k f`` applied to ``grad^{|P_1|} phi, ..., grad^{|P_k|} phi``.
    With rational inputs the result is exact.
    """
    if m is None:
        m = min(f_jet.order, phi_jet.order)
    return _compose(f_jet, phi_jet, m)


def compose_jet_counted(f_jet: Jet, phi_jet: Jet, m: int) -> tuple[Jet, list[int]]:
    """As :func:`compose_jet`, also returning the summand count per order."""
    counts: list[int] = []
    jet = _compose(f_jet, phi_jet, m, counts)
    return jet, counts


def _check_chain(jets: Sequence[Jet], m: int):
    if not jets:
        raise InputError("empty chain")
    for i, jt in enumerate(jets):
        if jt.field_arity:
            raise InputError("chains consist of maps, not tensor fields")
        if jt.order < m:
            raise InputError(f"jet {i} has order {jt.order} < {m}")
    for i in range(1, len(jets)):
        if len(jets[i - 1].out_dims) != 1 or jets[i - 1].out_dims[0] != jets[i].in_dim:
            raise InputError(f"jet {i} does not accept the output of jet {i - 1}")
        _check_base(jets[i].base_point, jets[i - 1].value(), jets[i].exact and jets[i - 1].exact)


def compose_chain(jets: Sequence[Jet], m: int | None = None, method: str = "nested") -> Jet:
    """Jet of ``f_l o ... o f_0`` where ``jets[i]`` is the jet of ``f_i``.

    ``jets[i+1]`` must be based at the value of ``jets[i]``.  With
    ``method="nested"`` every order is the sum over nested partitions of
    level ``l``; ``method="fold"`` composes pairwise from the inside out.
    """
    jets = list(jets)
    if m is None:
        m = min(j.order for j in jets)
    _check_chain(jets, m)
    if len(jets) == 1:
        return jets[0].truncate(m)
    if any(j.exact for j in jets) and not all(j.exact for j in jets):
        jets = [j.to_float() for j in jets]
    if method == "fold":
        acc = jets[0]
        for jt in jets[1:]:
            acc = _compose(jt, acc, m)
        return acc
    if method != "nested":
        raise InputError(f"unknown method {method!r}")
    return _nested_chain(jets, m)


def _nested_chain(jets: Sequence[Jet], m: int, counts: list | None = None) -> Jet:
    l = len(jets) - 1
    exact = jets[0].exact
    n = jets[0].in_dim
    top = jets[l]
    r = len(top.out_dims)
    data = [[t.data for t in jt.derivs] for jt in jets]
    memo: dict = {}

    def value(shape, level):
        # shape is an int at level 0, a tuple of child shapes otherwise
        key = (shape, level)
        if key in memo:
            return memo[key]
        if level == 0:
            out = data[0][shape]
        else:
            rr = r if level == l else 1
            out = data[level][len(shape)]
            for child in shape:
                out = _contract_front(out, rr, value(child, level - 1))
        memo[key] = out
        return out

    derivs = [Tensor._wrap(data[l][0].copy(), 0, n)]
    for j in range(1, m + 1):
        tot = _zeros(tuple(top.out_dims) + (n,) * j, exact)
        c = 0
        for nest in enumerate_nested_partitions(j, l):
            c += 1
            tot = tot + value(nest.shape(), l)
        if counts is not None:
            counts.append(c)
        derivs.append(Tensor._wrap(symmetrize_axes(tot, range(r, r + j)), j, n))
    return Jet(jets[0].base_point, derivs)


def faa_di_bruno(m: int, f_derivs: Sequence, phi_derivs: Sequence):
    """Univariate ``(f o phi)^{(m)}`` from ``f', ..., f^{(m)}`` and
    ``phi', ..., phi^{(m)}``.

    Sum over Scherk indices of ``m!/prod(b_j!) f^{(sum b)} prod (phi^{(j)}/j!)^{b_j}``.

    >>> faa_di_bruno(6, [6, 2, 0, 0, 0, 0], [3, 6, 6, 0, 0, 0])
    720
    """
    if len(f_derivs) < m or len(phi_derivs) < m:
        raise InputError(f"need {m} derivatives of each function")
    exact = all(_is_exact_scalar(v) for v in list(f_derivs[:m]) + list(phi_derivs[:m]))
    conv = Fraction if exact else float
    fs = [conv(v) for v in f_derivs[:m]]
    ps = [conv(v) for v in phi_derivs[:m]]
    total = conv(0)
    for k in range(1, m + 1):
        for s in scherk_indices(m, k):
            term = conv(math.factorial(m))
            for j, bj in enumerate(s.b, start=1):
                if bj:
                    term = term / math.factorial(bj) * (ps[j - 1] / math.factorial(j)) ** bj
            total += term * fs[k - 1]
    if exact and total.denominator == 1:
        return int(total)
    return total


def _pullback(u_jet: Jet, phi_jet: Jet, m: int, counts: list | None = None) -> Jet:
    d = u_jet.field_arity
    need = m + 1 if d > 0 else m
    if phi_jet.order < need:
        if d > 0:
            raise InputError(f"pulling back a {d}-tensor field to order {m} needs a phi jet of "
                             f"order m+1 = {m + 1}, got {phi_jet.order}")
        raise InputError(f"phi jet of order {phi_jet.order} < {m}")
    if u_jet.order < m:
        raise InputError(f"u jet of order {u_jet.order} < {m}")
    if phi_jet.field_arity:
        raise InputError("phi must be a map")
    u_jet, phi_jet = _unify(u_jet, phi_jet)
    exact = phi_jet.exact
    _check_base(u_jet.base_point, phi_jet.value(), exact)
    if len(phi_jet.out_dims) != 1 or phi_jet.out_dims[0] != u_jet.in_dim:
        raise InputError("phi does not map into the domain of u")
    r = len(u_jet.out_dims)
    n = phi_jet.in_dim
    ud = [t.data for t in u_jet.derivs]
    gd = [t.data for t in phi_jet.derivs]
    derivs = []
    for j in range(m + 1):
        shape = tuple(u_jet.out_dims) + (n,) * (j + d)
        tot = _zeros(shape, exact)
        memo: dict = {}
        c = 0
        for P in enumerate_ordered_partitions(j, d) if j else [None]:
            sizes = P.sizes() if P is not None else (0,) * (d + 1)
            field_sizes = sizes[1:]
            for C in enumerate_partitions(sizes[0]):
                c += 1
                key = (tuple(sorted(C.sizes())), field_sizes)
                term = memo.get(key)
                if term is None:
                    term = _pullback_term(ud, gd, key[0], field_sizes, r)
                    memo[key] = term
                tot = tot + term
        if counts is not None:
            counts.append(c)
        tot = symmetrize_axes(tot, range(r, r + j))
        derivs.append(Tensor._wrap(tot, j + d, n))
    return Jet(phi_jet.base_point, derivs, d)


def _pullback_term(ud, gd, csizes, field_sizes, r):
    term = ud[len(csizes)]
    # axes after r: k diff slots then d field slots, all of dimension M
    for s in csizes:
        term = _contract_front(term, r, gd[s])
    pos = r + len(field_sizes) + sum(csizes)
    diff_axes = list(range(r + len(field_sizes), pos))
    w_axes = []
    for t in field_sizes:
        term = _contract_front(term, r, gd[t + 1])
        pos -= 1  # one field axis consumed at the front
        diff_axes = [a - 1 for a in diff_axes]
        w_axes = [a - 1 for a in w_axes]
        new = list(range(pos, pos + t + 1))
        diff_axes += new[:t]
        w_axes.append(new[t])
        pos += t + 1
    order = list(range(r)) + diff_axes + w_axes
    return np.transpose(term, order)


def pullback_jet(u_jet: Jet, phi_jet: Jet, m: int | None = None, d: int | None = None) -> Jet:
    """Jet of the pullback ``phi^* u`` of a covariant tensor field.

    ``(phi^* u)(x)(w_1..w_d) = u(phi(x))(grad phi w_1, ..., grad phi w_d)``.
    Order ``j`` sums over ordered partitions ``P`` of ``{1..j}`` into
    ``d+1`` blocks and set partitions ``C`` of ``P_0``; ``P_i`` for
    ``i >= 1`` differentiates the Jacobian feeding field slot ``i``.

    Parameters
    ----------
    u_jet : Jet
        Jet of the field at ``phi(x)``, ``field_arity = d``.
    phi_jet : Jet
        Jet of ``phi`` at ``x``; order ``>= m+1`` when ``d > 0``.
    """
    if d is not None and d != u_jet.field_arity:
        raise InputError(f"d={d} but the field jet has arity {u_jet.field_arity}")
    if m is None:
        m = min(u_jet.order, phi_jet.order - (1 if u_jet.field_arity else 0))
    return _pullback(u_jet, phi_jet, m)


def pullback_jet_counted(u_jet: Jet, phi_jet: Jet, m: int) -> tuple[Jet, list[int]]:
    counts: list[int] = []
    jet = _pullback(u_jet, phi_jet, m, counts)
    return jet, counts


def _exact_inverse(a: np.ndarray) -> np.ndarray:
    import sympy

    mat = sympy.Matrix(a.shape[0], a.shape[1],
                       [sympy.Rational(v.numerator, v.denominator) for v in a.ravel()])
    if mat.det() == 0:
        raise DomainError("Jacobian is singular at the base point")
    inv = mat.inv()
    out = np.empty(a.shape, dtype=object)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            q = inv[i, j]
            out[i, j] = Fraction(int(q.p), int(q.q))
    return out


def _float_inverse(a: np.ndarray) -> np.ndarray:
    from scipy.linalg import lu_factor, lu_solve

    scale = float(np.prod(np.linalg.norm(a, axis=1)))
    if scale == 0.0:
        raise DomainError("Jacobian is singular at the base point")
    lu, piv = lu_factor(a)
    det = abs(float(np.prod(np.diag(lu))))
    if det < 1e-12 * scale:
        raise DomainError(f"Jacobian is numerically singular (|det| = {det:.3e})")
    return lu_solve((lu, piv), np.eye(a.shape[0]))


def inverse_jet(phi_jet: Jet, m: int | None = None) -> Jet:
    """Jet of ``phi^{-1}`` at ``y = phi(x)``.

    ``grad phi^{-1}`` is the matrix inverse; for ``j >= 2``,
    ``grad^j phi^{-1} = -grad phi^{-1} sum_{k>=2, P in P(j,k)}
    grad^k phi(grad^{|P_1|} phi^{-1}, ...)``.

    Raises
    ------
    DomainError
        If the Jacobian is singular (exactly, or below the relative
        determinant threshold 1e-12 in float mode).
    """
    if m is None:
        m = phi_jet.order
    if phi_jet.field_arity or len(phi_jet.out_dims) != 1 or phi_jet.out_dims[0] != phi_jet.in_dim:
        raise InputError("inverse_jet needs a square map R^N -> R^N")
    if phi_jet.order < max(m, 1):
        raise InputError(f"phi jet of order {phi_jet.order} < {m}")
    exact = phi_jet.exact
    n = phi_jet.in_dim
    fd = [t.data for t in phi_jet.derivs]
    y = fd[0].copy()
    derivs = [Tensor._wrap(phi_jet.base_point.copy(), 0, n)]
    if m >= 1:
        jac = fd[1]
        inv = _exact_inverse(jac) if exact else _float_inverse(jac)
        derivs.append(Tensor._wrap(inv, 1, n))
        gd = [derivs[0].data, inv]
        for j in range(2, m + 1):
            tot, _ = _chain_sum(fd, gd + [None] * (j - len(gd) + 1), j, 1, n, exact, kmin=2)
            tot = symmetrize_axes(tot, range(1, 1 + j))
            nxt = -np.tensordot(inv, tot, axes=([1], [0]))
            gd.append(nxt)
            derivs.append(Tensor._wrap(nxt, j, n))
    return Jet(y, derivs)
