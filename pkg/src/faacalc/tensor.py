"""Dense multilinear maps with exact-rational or float entries.

A :class:`Tensor` with ``cov_arity`` m, ``cov_dim`` N and contravariant
dimensions ``(c_1, ..., c_r)`` stores an ndarray of shape
``(c_1, ..., c_r) + (N,) * m``.  Exact tensors use ``dtype=object`` holding
:class:`fractions.Fraction` (or ``int``) entries; float tensors use float64.
With this layout ``contract`` is a plain matrix product of the flattened
shapes.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from faacalc.errors import InputError

__all__ = [
    "Tensor",
    "as_exact",
    "as_float",
    "tensor_product",
    "symmetric_product",
    "contract",
    "symmetrize",
    "symmetrize_axes",
    "is_symmetric",
    "spectral_norm_bounds",
    "dual_vector",
]


def _to_fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (float, np.floating)):
        return Fraction(float(v))
    return Fraction(v)


def as_exact(a) -> np.ndarray:
    """Object array of Fractions with the same shape as ``a``."""
    a = np.asarray(a, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for ix in np.ndindex(a.shape):
        out[ix] = _to_fraction(a[ix])
    return out


def as_float(a) -> np.ndarray:
    return np.asarray(a, dtype=object).astype(float) if np.asarray(a).dtype == object else np.asarray(a, dtype=float)


class Tensor:
    """Dense tensor in ``L^m(R^N; R^{c_1 x ... x c_r})``.

    Parameters
    ----------
    data : array_like
        Entries with shape ``contra_dims + (cov_dim,) * cov_arity``.
    cov_arity : int
        Number of covariant (input) slots.
    cov_dim : int, optional
        Dimension of each covariant slot; inferred from ``data`` when
        ``cov_arity > 0``.
    exact : bool, optional
        Force the rational (True) or float (False) backend.  By default
        object arrays stay exact and everything else becomes float64.
    """

    __slots__ = ("data", "cov_arity", "cov_dim", "symmetric")

    def __init__(self, data, cov_arity: int = 0, cov_dim: int | None = None,
                 exact: bool | None = None, symmetric: bool = False):
        arr = np.asarray(data) if not isinstance(data, np.ndarray) else data
        if exact is None:
            exact = arr.dtype == object
        arr = as_exact(arr) if exact else np.asarray(as_float(arr), dtype=float)
        if cov_arity < 0 or cov_arity > arr.ndim:
            raise InputError(f"cov_arity {cov_arity} incompatible with array of ndim {arr.ndim}")
        cov_shape = arr.shape[arr.ndim - cov_arity:]
        if cov_arity:
            if len(set(cov_shape)) != 1:
                raise InputError(f"covariant slots must share one dimension, got {cov_shape}")
            if cov_dim is not None and cov_dim != cov_shape[0]:
                raise InputError(f"cov_dim {cov_dim} does not match data shape {arr.shape}")
            cov_dim = cov_shape[0]
        elif cov_dim is None:
            cov_dim = 1
        self.data = arr
        self.cov_arity = cov_arity
        self.cov_dim = int(cov_dim)
        self.symmetric = symmetric

    @classmethod
    def _wrap(cls, arr, cov_arity, cov_dim):
        t = cls.__new__(cls)
        t.data = arr
        t.cov_arity = cov_arity
        t.cov_dim = cov_dim
        t.symmetric = False
        return t

    @property
    def contra_dims(self) -> tuple[int, ...]:
        return self.data.shape[: self.data.ndim - self.cov_arity]

    @property
    def exact(self) -> bool:
        return self.data.dtype == object

    @property
    def scalar_kind(self) -> str:
        return "exact-rational" if self.exact else "float"

    @property
    def shape(self):
        return self.data.shape

    def to_float(self) -> "Tensor":
        return Tensor._wrap(as_float(self.data), self.cov_arity, self.cov_dim)

    def to_exact(self) -> "Tensor":
        return Tensor._wrap(as_exact(self.data), self.cov_arity, self.cov_dim)

    def matrix(self) -> np.ndarray:
        """The ``prod(contra) x N**m`` unfolding."""
        rows = math.prod(self.contra_dims)
        return self.data.reshape(rows, self.cov_dim ** self.cov_arity)

    def __call__(self, *vectors) -> np.ndarray:
        """Evaluate the multilinear map on ``cov_arity`` vectors."""
        if len(vectors) != self.cov_arity:
            raise InputError(f"expected {self.cov_arity} vectors, got {len(vectors)}")
        out = self.data
        for v in reversed(vectors):
            out = np.tensordot(out, np.asarray(v, dtype=out.dtype), axes=([-1], [0]))
        return out

    def __add__(self, other: "Tensor") -> "Tensor":
        _same_layout(self, other)
        return Tensor._wrap(self.data + other.data, self.cov_arity, self.cov_dim)

    def __sub__(self, other: "Tensor") -> "Tensor":
        _same_layout(self, other)
        return Tensor._wrap(self.data - other.data, self.cov_arity, self.cov_dim)

    def __neg__(self):
        return Tensor._wrap(-self.data, self.cov_arity, self.cov_dim)

    def scale(self, c) -> "Tensor":
        return Tensor._wrap(self.data * c, self.cov_arity, self.cov_dim)

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (self.cov_arity == other.cov_arity and self.shape == other.shape
                and bool(np.all(self.data == other.data)))

    __hash__ = None

    def allclose(self, other: "Tensor", rtol=1e-12, atol=1e-12) -> bool:
        if self.shape != other.shape or self.cov_arity != other.cov_arity:
            return False
        return bool(np.allclose(as_float(self.data), as_float(other.data), rtol=rtol, atol=atol))

    def __repr__(self):
        return (f"Tensor(cov_arity={self.cov_arity}, cov_dim={self.cov_dim}, "
                f"contra_dims={self.contra_dims}, kind={self.scalar_kind})")


def _same_layout(a: Tensor, b: Tensor):
    if a.shape != b.shape or a.cov_arity != b.cov_arity:
        raise InputError(f"layout mismatch: {a!r} vs {b!r}")


def _common(a, b):
    if a.exact == b.exact:
        return a.data, b.data
    return as_float(a.data), as_float(b.data)


def tensor_product(a: Tensor, b: Tensor) -> Tensor:
    """``a ⊗ b`` with layout ``(a_contra, b_contra, a_cov, b_cov)``.

    >>> tensor_product(Tensor([1, 2], 1), Tensor([3, 4], 1)).data
    array([[3., 4.],
           [6., 8.]])
    """
    if a.cov_arity and b.cov_arity and a.cov_dim != b.cov_dim:
        raise InputError(f"cov_dim mismatch {a.cov_dim} vs {b.cov_dim}")
    if a.exact != b.exact:
        raise InputError("tensor_product needs operands of the same scalar kind")
    x, y = a.data, b.data
    out = np.multiply.outer(x, y)
    ra, rb = len(a.contra_dims), len(b.contra_dims)
    ma, mb = a.cov_arity, b.cov_arity
    # outer gives (a_contra, a_cov, b_contra, b_cov)
    perm = (list(range(ra)) + list(range(ra + ma, ra + ma + rb))
            + list(range(ra, ra + ma)) + list(range(ra + ma + rb, ra + ma + rb + mb)))
    cov_dim = a.cov_dim if a.cov_arity else b.cov_dim
    return Tensor._wrap(np.transpose(out, perm), ma + mb, cov_dim)


def symmetric_product(vectors: Sequence, exact: bool | None = None) -> Tensor:
    """Symmetric product ``v_1 ∨ ... ∨ v_m`` as a symmetric covariant tensor.

    The empty product is the scalar 1.
    """
    vecs = [np.asarray(v) for v in vectors]
    if exact is None:
        exact = bool(vecs) and all(v.dtype == object or np.issubdtype(v.dtype, np.integer) for v in vecs)
    if not vecs:
        return Tensor(np.array(Fraction(1) if exact else 1.0, dtype=object if exact else float), 0, exact=exact)
    n = {v.shape for v in vecs}
    if len(n) != 1 or len(next(iter(n))) != 1:
        raise InputError("symmetric_product needs vectors of one common dimension")
    conv = as_exact if exact else as_float
    vecs = [conv(v) for v in vecs]
    t = vecs[0]
    for v in vecs[1:]:
        t = np.multiply.outer(t, v)
    return symmetrize(Tensor._wrap(t, len(vecs), vecs[0].shape[0]))


def contract(mu: Tensor, nu: Tensor) -> Tensor:
    """Composition ``mu ⌟ nu`` of linear maps.

    ``mu``'s covariant block (flattened) must match ``nu``'s contravariant
    block (flattened).  The result has ``mu``'s contravariant dims and
    ``nu``'s covariant slots.
    """
    cin = mu.cov_dim ** mu.cov_arity
    cout = math.prod(nu.contra_dims)
    if cin != cout:
        raise InputError(f"cannot contract {mu!r} with {nu!r}: {cin} != {cout}")
    x, y = _common(mu, nu)
    prod = x.reshape(-1, cin) @ y.reshape(cout, -1)
    shape = mu.contra_dims + (nu.cov_dim,) * nu.cov_arity
    return Tensor._wrap(prod.reshape(shape), nu.cov_arity, nu.cov_dim)


def symmetrize_axes(arr: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Average ``arr`` over all permutations of the given axes."""
    axes = list(axes)
    if len(axes) < 2 or arr.shape[axes[0]] == 1:
        return arr
    base = list(range(arr.ndim))
    acc = None
    n = 0
    for perm in itertools.permutations(axes):
        order = base.copy()
        for src, dst in zip(axes, perm):
            order[src] = dst
        term = np.transpose(arr, order)
        acc = term.copy() if acc is None else acc + term
        n += 1
    if arr.dtype == object:
        return acc * Fraction(1, n)
    return acc / n


def symmetrize(t: Tensor) -> Tensor:
    """Average over all permutations of the covariant slots (idempotent)."""
    r = len(t.contra_dims)
    out = Tensor._wrap(symmetrize_axes(t.data, range(r, r + t.cov_arity)), t.cov_arity, t.cov_dim)
    out.symmetric = True
    return out


def is_symmetric(t: Tensor, tol: float = 1e-12, axes: Sequence[int] | None = None) -> bool:
    """Exact check for rational tensors, relative ``tol`` for floats."""
    r = len(t.contra_dims)
    if axes is None:
        axes = range(r, r + t.cov_arity)
    axes = list(axes)
    scale = max(1.0, float(np.max(np.abs(as_float(t.data))))) if t.data.size else 1.0
    for i, j in zip(axes, axes[1:]):
        sw = np.swapaxes(t.data, i, j)
        if t.exact:
            if not np.all(sw == t.data):
                return False
        elif np.max(np.abs(sw - t.data), initial=0.0) > tol * scale:
            return False
    # adjacent transpositions generate the full permutation group
    return True


# -- norm estimates ---------------------------------------------------------

def dual_vector(g: np.ndarray, p: float) -> np.ndarray:
    """Maximiser of ``<g, v>`` over the unit ``l^p`` ball."""
    a = np.abs(g)
    if not np.any(a):
        v = np.zeros_like(g)
        v[0] = 1.0
        return v
    if p == 1:
        v = np.zeros_like(g)
        i = int(np.argmax(a))
        v[i] = np.sign(g[i])
        return v
    if math.isinf(p):
        return np.where(g >= 0, 1.0, -1.0)
    q = p / (p - 1.0)
    s = a / a.max()
    w = np.sign(g) * s ** (q - 1.0)
    return w / np.linalg.norm(w, ord=p)


def _conjugate(p):
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1
    return p / (p - 1.0)


def _pnorm(v, p):
    return float(np.linalg.norm(v, ord=np.inf if math.isinf(p) else p))


def _fiber_norms(data, rows, p_out, ncov):
    mat = data.reshape(rows, -1)
    if math.isinf(p_out):
        return np.max(np.abs(mat), axis=0) if rows else np.zeros(mat.shape[1])
    return np.linalg.norm(mat, ord=p_out, axis=0)


def _power_iteration(data, m, n, p, p_out, start, iters, tol):
    rows = data.shape[0]
    q_out = _conjugate(p_out)
    vs = [v.copy() for v in start]

    def value():
        out = data
        for i in range(m - 1, -1, -1):
            out = out @ vs[i]
        return _pnorm(out, p_out)

    cur = value()
    for _ in range(iters):
        for i in range(m):
            out = data
            for j in range(m - 1, i, -1):
                out = out @ vs[j]
            # out has shape (rows,) + (n,) * (i + 1); contract slots before i
            for j in range(i):
                out = np.tensordot(vs[j], out, axes=([0], [1]))
            # now shape (rows, n)
            y = out @ vs[i]
            yd = dual_vector(y, q_out) if np.any(y) else np.ones(rows)
            g = yd @ out
            vs[i] = dual_vector(g, p)
        new = value()
        if abs(new - cur) <= tol * max(1.0, abs(new)):
            cur = max(cur, new)
            break
        cur = max(cur, new)
    return cur


def _frob_upper(data, m, n, p, p_out, rows):
    fro = float(np.linalg.norm(data.ravel()))
    cov_fac = n ** (m * max(0.0, 0.5 - 1.0 / p)) if not math.isinf(p) else n ** (0.5 * m)
    if math.isinf(p_out):
        out_fac = 1.0
    else:
        out_fac = rows ** max(0.0, 1.0 / p_out - 0.5)
    return fro * cov_fac * out_fac


def spectral_norm_bounds(t: Tensor, p: float = 2, p_out: float = 2, restarts: int = 8,
                         iters: int = 200, tol: float = 1e-12, seed: int = 0) -> tuple[float, float]:
    """Lower estimate and certified upper bound of the spectral norm.

    The norm is ``sup |t(v_1, ..., v_m)|_{p_out}`` over unit ``l^p`` vectors
    ``v_i``.  The lower estimate comes from alternating higher-order power
    iteration (``restarts`` random starts plus SVD- and argmax-based starts)
    and is attained by explicit feasible vectors, so it never exceeds the
    true norm.  The upper bound is the smaller of the entrywise ``l^1`` sum
    and a Frobenius bound with the norm-equivalence factors for ``p`` and
    ``p_out``.  For ``p = 1`` both values are the exact norm (the maximum
    over coordinate vectors); for matrices with ``p = p_out = 2`` both come
    from the largest singular value.

    Returns
    -------
    (lower, upper) : tuple of float
    """
    arr = as_float(t.data)
    if np.any(np.isnan(arr)):
        raise InputError("tensor contains NaN")
    m, n = t.cov_arity, t.cov_dim
    rows = math.prod(t.contra_dims)
    data = arr.reshape((rows,) + (n,) * m)
    if not np.any(data):
        return 0.0, 0.0
    fib = _fiber_norms(data, rows, p_out, m)
    best_basis = float(np.max(fib))
    if m == 0:
        return best_basis, best_basis
    if p == 1:
        return best_basis, best_basis
    l1 = float(np.sum(np.abs(data)))
    upper = min(l1, _frob_upper(data, m, n, p, p_out, rows))
    if m == 1 and p_out == 2 and p == 2:
        # the largest singular value is the norm; allow for SVD rounding
        s = float(np.linalg.norm(data.reshape(rows, n), 2))
        upper = min(upper, s * (1 + 1e-12))
        return min(s, upper), upper

    starts = []
    # argmax-entry start
    ix = np.unravel_index(int(np.argmax(fib)), (n,) * m)
    starts.append([np.eye(n)[i] for i in ix])
    # SVD start: leading singular vector of each mode unfolding
    sv = []
    for i in range(m):
        unf = np.moveaxis(data, i + 1, 0).reshape(n, -1)
        u, _, _ = np.linalg.svd(unf, full_matrices=False)
        sv.append(dual_vector(u[:, 0], p) if np.any(u[:, 0]) else np.eye(n)[0])
    starts.append(sv)
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append([dual_vector(rng.standard_normal(n), p) for _ in range(m)])

    lower = best_basis
    for st in starts:
        st = [v / _pnorm(v, p) for v in st]
        lower = max(lower, _power_iteration(data, m, n, p, p_out, st, iters, tol))
    return min(lower, upper), upper
