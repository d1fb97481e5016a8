"""Norm bounds for pullbacks and discrete (Orlicz-)Sobolev-Slobodeckij seminorms.

Function spaces are replaced by finite sample sets: a :class:`SampleSet`
carries points of a domain and positive quadrature weights, and every
integral becomes a weighted sum.  Double integrals are summed over the
off-diagonal pairs of sample points.

Field values passed to the discrete norms are arrays whose first axis runs
over the sample points; the remaining axes (if any) are measured with the
Frobenius norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from faacalc.bell import bell_partial, generalized_bell
from faacalc.calculus import PolyMap, jet_from_arrays, jets_at_points, pullback_jet
from faacalc.errors import InputError
from faacalc.tensor import spectral_norm_bounds

__all__ = [
    "SampleSet",
    "SeminormParams",
    "OrliczIntegrand",
    "TwoPointIntegrand",
    "lp_integrand",
    "exp_integrand",
    "double_phase_integrand",
    "table_integrand",
    "parse_integrand",
    "sphere_area",
    "pointwise_pullback_bound",
    "check_pullback_inequality",
    "discrete_lp_norm",
    "discrete_slobodeckij",
    "holder_seminorm",
    "InverseHolderData",
    "inverse_holder_bound",
    "luxemburg_norm",
    "integrand_pullback",
    "integrand_dual",
    "young_gap",
    "orlicz_holder_check",
    "orlicz_slobodeckij",
    "ReportEntry",
    "seminorm_transform_report",
]

BRACKET_LOW = 2.0 ** -20
BRACKET_HIGH = 2.0 ** 60
BISECTION_RTOL = 1e-12
# slack for entries whose discrete inequality is exact up to rounding
ROUNDING_SLACK = 1e-9
# relative inflation making float-evaluated upper bounds certified
OUTWARD_ROUNDING = 1e-12


# --------------------------------------------------------------------------
# sample sets and parameters


@dataclass(frozen=True)
class SampleSet:
    """Finite stand-in for a domain: points in ``R^N`` with positive weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
            raise InputError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if pts.shape[0] == 0:
            raise InputError("sample set is empty")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise InputError("sample points and weights must be finite")
        if np.any(w <= 0):
            raise InputError("quadrature weights must be strictly positive")
        if pts.shape[0] > 1:
            from scipy.spatial.distance import pdist

            if np.min(pdist(pts)) == 0.0:
                raise InputError("sample points must be pairwise distinct (distance zero)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def grid(cls, lo, hi, n: int | Sequence[int], total_mass: float | None = None) -> "SampleSet":
        """Midpoint rule on the box ``[lo, hi]`` with ``n`` cells per axis.

        Weights are the cell volumes, rescaled to ``total_mass`` if given.
        """
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        ns = [n] * len(lo) if np.ndim(n) == 0 else list(n)
        axes = [a + (b - a) * (np.arange(k) + 0.5) / k for a, b, k in zip(lo, hi, ns)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        vol = float(np.prod((hi - lo) / np.asarray(ns)))
        w = np.full(pts.shape[0], vol)
        if total_mass is not None:
            w *= total_mass / w.sum()
        return cls(pts, w)

    @classmethod
    def from_json(cls, obj: dict) -> "SampleSet":
        try:
            pts = [[float(v) for v in np.atleast_1d(p)] for p in obj["points"]]
            w = obj.get("weights")
            w = [1.0] * len(pts) if w is None else [float(v) for v in w]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed sample set: {exc}") from None
        return cls(np.asarray(pts), np.asarray(w))

    def to_json(self) -> dict:
        return {"points": [[repr(float(v)) for v in p] for p in self.points],
                "weights": [repr(float(v)) for v in self.weights]}


@dataclass(frozen=True)
class SeminormParams:
    """Exponents of a fractional seminorm: ``p`` in [1, inf], ``theta`` and
    ``sigma`` in (0, 1]."""

    p: float = 2.0
    theta: float = 0.5
    sigma: float = 1.0

    def __post_init__(self):
        _check_p(self.p)
        _check_theta(self.theta)
        if not 0 < self.sigma <= 1:
            raise InputError(f"sigma must lie in (0, 1], got {self.sigma}")

    def check_smoothness_order(self):
        """The product estimates need ``theta < sigma`` (``<=`` when p is infinite)."""
        if math.isinf(self.p):
            if self.theta > self.sigma:
                raise InputError(f"theta={self.theta} > sigma={self.sigma}: the estimate needs theta <= sigma")
        elif self.theta >= self.sigma:
            raise InputError(f"theta={self.theta} >= sigma={self.sigma}: for p < inf the estimate "
                             "requires theta < sigma")


def _check_p(p):
    if not (p >= 1):
        raise InputError(f"p must be >= 1, got {p}")


def _check_theta(theta):
    if not 0 < theta <= 1:
        raise InputError(f"theta must lie in (0, 1], got {theta}")


def sphere_area(N: int) -> float:
    """Surface area ``2 pi^(N/2) / Gamma(N/2)`` of the unit sphere in ``R^N``."""
    if N < 1:
        raise InputError("dimension must be >= 1")
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


# --------------------------------------------------------------------------
# integrands


class OrliczIntegrand:
    """Musielak-Orlicz integrand ``A(x, xi)``.

    Parameters
    ----------
    func : callable
        ``func(x, xi)`` with ``x`` of shape ``(n, N)`` and ``xi`` of shape
        ``(n,)``; returns ``(n,)`` non-negative values, ``inf`` allowed.
    name : str
    convex : bool
        Claimed convexity in ``xi`` (spot-checked by :meth:`validate`).
    x_independent : bool
        Set when ``A`` does not depend on ``x``; enables caching.
    """

    def __init__(self, func: Callable, name: str = "custom", convex: bool = True,
                 x_independent: bool = False):
        self.func = func
        self.name = name
        self.convex = convex
        self.x_independent = x_independent

    def __repr__(self):
        return f"OrliczIntegrand({self.name!r})"

    def __call__(self, x, xi) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xi = np.broadcast_to(np.atleast_1d(np.asarray(xi, dtype=float)), (x.shape[0],))
        return self.func(x, xi)

    def bind(self, points: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        """``xi -> A(points, xi)`` with any point-dependent work done once."""
        pts = np.asarray(points, dtype=float)
        return lambda xi: self.func(pts, np.asarray(xi, dtype=float))

    def validate(self, points, xi_grid=None, tol: float = 1e-12) -> None:
        """Check ``A(x, 0) = 0``, monotonicity and midpoint convexity on a grid.

        Raises :class:`InputError` on the first violation.
        """
        pts = np.asarray(points, dtype=float)
        grid = np.linspace(0.0, 10.0, 101) if xi_grid is None else np.asarray(xi_grid, dtype=float)
        f = self.bind(pts)
        zero = f(np.zeros(len(pts)))
        if np.any(np.isnan(zero)) or np.any(zero != 0):
            raise InputError(f"integrand {self.name}: A(x, 0) must vanish")
        prev = zero
        vals = []
        for g in grid:
            cur = f(np.full(len(pts), g))
            if np.any(np.isnan(cur)) or np.any(cur < 0):
                raise InputError(f"integrand {self.name}: negative or NaN value at xi={g}")
            if np.any(cur < prev - tol * np.maximum(1, np.abs(prev))):
                raise InputError(f"integrand {self.name}: not non-decreasing at xi={g}")
            prev = cur
            vals.append(cur)
        if self.convex:
            for a, b in zip(grid[:-2:2], grid[2::2]):
                mid = f(np.full(len(pts), 0.5 * (a + b)))
                fa, fb = f(np.full(len(pts), a)), f(np.full(len(pts), b))
                with np.errstate(invalid="ignore"):
                    bad = mid > 0.5 * (fa + fb) + tol * np.maximum(1, np.abs(mid))
                if np.any(bad & np.isfinite(fa + fb)):
                    raise InputError(f"integrand {self.name}: midpoint convexity fails on [{a}, {b}]")


class TwoPointIntegrand:
    """Integrand ``B(x, x', xi)`` on pairs of points, for Orlicz-Slobodeckij seminorms."""

    def __init__(self, func: Callable, name: str = "custom"):
        self.func = func
        self.name = name

    def __repr__(self):
        return f"TwoPointIntegrand({self.name!r})"

    def bind_pairs(self, points: np.ndarray, I: np.ndarray, J: np.ndarray):
        x, y = points[I], points[J]
        return lambda xi: self.func(x, y, np.asarray(xi, dtype=float))

    @classmethod
    def from_integrand(cls, A: OrliczIntegrand) -> "TwoPointIntegrand":
        """``B(x, x', xi) = A(x, xi)``."""
        return cls(lambda x, y, xi: A.func(x, xi), name=A.name)


def _power(p):
    if math.isinf(p):
        def f(x, xi):
            return np.where(xi <= 1.0, 0.0, np.inf)
    else:
        def f(x, xi):
            return xi ** p
    return f


def lp_integrand(p: float) -> OrliczIntegrand:
    """``A(x, xi) = xi^p``; for ``p = inf`` the indicator ``0`` on ``[0, 1]``, ``inf`` beyond."""
    _check_p(p)
    return OrliczIntegrand(_power(p), name=f"lp:{p:g}", x_independent=True)


def exp_integrand() -> OrliczIntegrand:
    """``A(x, xi) = exp(xi) - 1``."""
    def f(x, xi):
        with np.errstate(over="ignore"):
            return np.expm1(xi)
    return OrliczIntegrand(f, name="exp", x_independent=True)


def double_phase_integrand(p: float, q: float, a: Callable | None = None) -> OrliczIntegrand:
    """``A(x, xi) = xi^p + a(x) xi^q`` with a non-negative weight ``a`` (default 1)."""
    _check_p(p)
    _check_p(q)
    if math.isinf(p) or math.isinf(q):
        raise InputError("double-phase exponents must be finite")

    def f(x, xi):
        w = 1.0 if a is None else np.asarray(a(x), dtype=float)
        return xi ** p + w * xi ** q
    return OrliczIntegrand(f, name=f"double-phase:{p:g},{q:g}", x_independent=a is None)


def table_integrand(xi: Sequence[float], values: Sequence[float]) -> OrliczIntegrand:
    """Piecewise-linear ``A(xi)`` through a table, extended linearly beyond the last node.

    The first node must be ``(0, 0)``.
    """
    xs = np.asarray(xi, dtype=float)
    ys = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
        raise InputError("integrand table needs two equal-length lists with at least 2 nodes")
    if xs[0] != 0 or ys[0] != 0 or np.any(np.diff(xs) <= 0):
        raise InputError("integrand table must start at (0, 0) with increasing xi")
    slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])

    def f(x, z):
        out = np.interp(z, xs, ys)
        far = z > xs[-1]
        return np.where(far, ys[-1] + slope * (z - xs[-1]), out)
    return OrliczIntegrand(f, name="table", x_independent=True)


def parse_integrand(desc) -> OrliczIntegrand:
    """Build an integrand from ``"lp:p"``, ``"exp"``, ``"double-phase:p,q"``
    or a table ``{"xi": [...], "values": [...]}``."""
    if isinstance(desc, dict):
        try:
            return table_integrand([float(v) for v in desc["xi"]], [float(v) for v in desc["values"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed integrand table: {exc}") from None
    name, _, arg = str(desc).partition(":")
    try:
        if name == "lp":
            return lp_integrand(float(arg))
        if name == "exp" and not arg:
            return exp_integrand()
        if name == "double-phase":
            p, q = (float(v) for v in arg.split(","))
            return double_phase_integrand(p, q)
    except ValueError:
        pass
    raise InputError(f"unknown integrand {desc!r}; expected lp:p, exp, double-phase:p,q or a table")


# --------------------------------------------------------------------------
# pointwise bounds


def pointwise_pullback_bound(u_norms: Sequence[float], phi_norms: Sequence[float], m: int, d: int):
    """``sum_k u_norms[k] * B_{k,m,d}(phi_norms)``.

    ``u_norms[k]`` bounds ``|grad^k u|`` (k = 0..m) and ``phi_norms[j-1]``
    bounds ``|grad^j phi|`` (j = 1..m+1).

    >>> pointwise_pullback_bound([2, 3], [5, 7], 1, 1)
    89
    """
    if len(u_norms) != m + 1 or len(phi_norms) != m + 1:
        raise InputError(f"need {m + 1} norms of u and of phi, got {len(u_norms)} and {len(phi_norms)}")
    if any(v < 0 for v in list(u_norms) + list(phi_norms)):
        raise InputError("norms must be non-negative")
    total = 0
    for k in range(m + 1):
        if u_norms[k]:
            total = total + u_norms[k] * generalized_bell(k, m, d, list(phi_norms))
    return total


def check_pullback_inequality(u: PolyMap, phi: PolyMap, x, m: int, d: int, p: float = 2,
                              seed: int = 0) -> dict:
    """Compare ``|grad^m (phi^* u)(x)|`` with the pointwise Bell bound.

    Covariant slots are measured in ``l^p``, the values of ``u`` in ``l^2``
    and the values of ``phi`` in ``l^p`` (they feed the slots of ``u``).
    The left side is a spectral lower estimate and the right side uses
    certified upper bounds (rounded outward by a relative ``1e-12``), so
    ``margin >= 0`` must hold.

    Returns
    -------
    dict with keys ``lhs``, ``rhs``, ``margin``
    """
    from faacalc.calculus import jet_of_polymap

    x = np.asarray(x, dtype=float)
    phi_jet = jet_of_polymap(phi, x, m + 1, exact=False)
    y = phi_jet.value()
    u_jet = jet_of_polymap(u, y, m, field_arity=d, exact=False)
    pb = pullback_jet(u_jet, phi_jet if d else phi_jet.truncate(m), m)
    lhs, _ = spectral_norm_bounds(pb.derivs[m], p=p, p_out=2, seed=seed)
    u_norms = [spectral_norm_bounds(t, p=p, p_out=2, seed=seed)[1] for t in u_jet.derivs]
    phi_norms = [spectral_norm_bounds(t, p=p, p_out=p, seed=seed)[1] for t in phi_jet.derivs[1:]]
    # outward rounding: the float evaluation of the bound may lose a few ulps
    rhs = float(pointwise_pullback_bound(u_norms, phi_norms, m, d)) * (1 + OUTWARD_ROUNDING)
    return {"lhs": float(lhs), "rhs": rhs, "margin": rhs - float(lhs)}


# --------------------------------------------------------------------------
# discrete norms and seminorms


def _magnitudes(values, s: SampleSet) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape[0] != len(s):
        raise InputError(f"{v.shape[0]} values for {len(s)} sample points")
    v = v.reshape(len(s), -1)
    if np.any(np.isnan(v)):
        raise InputError("values contain NaN")
    return v


def _norm_rows(v):
    return np.sqrt(np.einsum("ij,ij->i", v, v)) if v.shape[1] > 1 else np.abs(v[:, 0])


def discrete_lp_norm(values, s: SampleSet, p: float) -> float:
    """``(sum_i w_i |v_i|^p)^(1/p)``; ``max_i |v_i|`` for ``p = inf``.

    >>> s = SampleSet([[0.0], [1.0]], [1.0, 1.0])
    >>> discrete_lp_norm([3.0, 4.0], s, 2)
    5.0
    """
    _check_p(p)
    mag = _norm_rows(_magnitudes(values, s))
    if math.isinf(p):
        return float(np.max(mag))
    return float(np.sum(s.weights * mag ** p) ** (1.0 / p))


def _row_blocks(n, size=256):
    for i0 in range(0, n, size):
        yield i0, min(n, i0 + size)


def _pair_quotients(vals, s: SampleSet, theta: float):
    """Yield ``(rows, |dv| / dist^theta, dist)`` blocks with the diagonal masked."""
    from scipy.spatial.distance import cdist

    n = len(s)
    for i0, i1 in _row_blocks(n):
        dist = cdist(s.points[i0:i1], s.points)
        diff = vals[i0:i1, None, :] - vals[None, :, :]
        dv = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        idx = np.arange(i0, i1)
        dist[idx - i0, idx] = np.inf
        yield slice(i0, i1), dv / dist ** theta, dist


def discrete_slobodeckij(values, s: SampleSet, theta: float, p: float) -> float:
    """Discrete Sobolev-Slobodeckij seminorm.

    ``(sum_{i != j} w_i w_j |v_i - v_j|^p / dist^(theta p + N))^(1/p)``, and
    ``max_{i != j} |v_i - v_j| / dist^theta`` for ``p = inf``.

    >>> s = SampleSet([[0.0], [1.0]], [1.0, 1.0])
    >>> round(discrete_slobodeckij([0.0, 1.0], s, 0.5, 2), 12)
    1.414213562373
    """
    _check_p(p)
    _check_theta(theta)
    vals = _magnitudes(values, s)
    if math.isinf(p):
        return holder_seminorm(values, s, theta)
    N = s.dim
    parts = []
    for rows, q, dist in _pair_quotients(vals, s, theta):
        t = (s.weights[rows, None] * s.weights[None, :]) * q ** p / dist ** N
        parts.append(float(np.sum(t)))
    return math.fsum(parts) ** (1.0 / p)


def holder_seminorm(values, s: SampleSet, theta: float) -> float:
    """``max_{i != j} |v_i - v_j| / dist(x_i, x_j)^theta``."""
    _check_theta(theta)
    vals = _magnitudes(values, s)
    if len(s) < 2:
        return 0.0
    return max(float(np.max(q)) for _, q, _ in _pair_quotients(vals, s, theta))


@dataclass
class InverseHolderData:
    """Norm data entering the Hoelder bound for ``grad^m phi^{-1}``.

    List entries are indexed by derivative order starting at 1, so
    ``phi_holder_norms[k-1]`` is ``||grad^k phi||_{C^{0,theta}}``.

    Attributes
    ----------
    inverse_holder_norm : ``||phi^{-1}||_{C^{0,theta}}``, the leading factor
    phi_holder_norms : ``||grad^k phi||_{C^{0,theta}}``, k = 1..m
    phi_holder_seminorms : ``|grad^k phi|_{C^{0,theta}}``, k = 1..m
    inverse_grad_holder_norms : ``||grad^j phi^{-1}||_{C^{0,theta}}``, j = 1..m-1
    inverse_grad_sup_norms : ``||grad^j phi^{-1}||_{C^0}``, j = 1..m-1
    inverse_lipschitz : ``|phi^{-1}|_{C^{0,1}}``
    """

    inverse_holder_norm: float
    phi_holder_norms: Sequence[float]
    phi_holder_seminorms: Sequence[float]
    inverse_grad_holder_norms: Sequence[float]
    inverse_grad_sup_norms: Sequence[float]
    inverse_lipschitz: float


def inverse_holder_bound(m: int, theta: float, data: InverseHolderData) -> float:
    """Upper bound for ``|grad^m phi^{-1}|_{C^{0,theta}}``, ``m >= 2``.

    ``||phi^{-1}||_{C^{0,theta}} sum_{k=2}^m (k+1) ||grad^k phi||_{C^{0,theta}}
    B_{m,k}(||grad^j phi^{-1}||_{C^{0,theta}})
    + ||grad phi^{-1}||_{C^0} |phi^{-1}|_{Lip}^theta sum_{k=2}^m
    |grad^k phi|_{C^{0,theta}} B_{m,k}(||grad^j phi^{-1}||_{C^0})``.
    """
    if m < 2:
        raise InputError("the inverse Hoelder bound needs m >= 2")
    _check_theta(theta)
    lists = {"phi_holder_norms": m, "phi_holder_seminorms": m,
             "inverse_grad_holder_norms": m - 1, "inverse_grad_sup_norms": m - 1}
    for name, need in lists.items():
        vals = getattr(data, name)
        if len(vals) < need:
            raise InputError(f"{name} needs {need} entries, got {len(vals)}")
        if any(v < 0 for v in vals):
            raise InputError(f"{name} must be non-negative")
    if data.inverse_holder_norm < 0 or data.inverse_lipschitz < 0:
        raise InputError("norms must be non-negative")
    first = 0.0
    second = 0.0
    for k in range(2, m + 1):
        first += (k + 1) * data.phi_holder_norms[k - 1] * bell_partial(
            m, k, list(data.inverse_grad_holder_norms[: m - k + 1]))
        second += data.phi_holder_seminorms[k - 1] * bell_partial(
            m, k, list(data.inverse_grad_sup_norms[: m - k + 1]))
    return float(data.inverse_holder_norm * first
                 + data.inverse_grad_sup_norms[0] * data.inverse_lipschitz ** theta * second)


# --------------------------------------------------------------------------
# Luxemburg norms


def _solve_gauge(modular: Callable[[float], float], scale: float) -> float:
    """Smallest ``lam`` with ``modular(lam) <= 1`` (upper bisection endpoint)."""
    if scale == 0:
        return 0.0

    def ok(lam):
        val = modular(lam)
        if math.isnan(val):
            raise InputError("integrand returned NaN")
        return val <= 1.0

    lam = scale * BRACKET_LOW
    if ok(lam):
        lo, hi = 0.0, lam
    else:
        lo = lam
        while True:
            lam *= 2.0
            if lam > scale * BRACKET_HIGH:
                return math.inf
            if ok(lam):
                hi = lam
                break
            lo = lam
    for _ in range(400):
        if hi - lo <= BISECTION_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _modular_sum(terms: np.ndarray, w: np.ndarray) -> float:
    if np.any(np.isnan(terms)):
        return math.nan
    if np.any(np.isposinf(terms)):
        return math.inf
    return float(np.sum(w * terms))


def luxemburg_norm(A: OrliczIntegrand, values, s: SampleSet) -> float:
    """``inf {lam > 0 : sum_i w_i A(x_i, |v_i| / lam) <= 1}``.

    Returns 0 for the zero function and ``inf`` when no ``lam`` up to
    ``2^60`` times the largest value works.
    """
    mag = _norm_rows(_magnitudes(values, s))
    scale = float(np.max(mag)) if len(mag) else 0.0
    nz = mag > 0
    w = s.weights
    if A.x_independent:
        # evaluate once per distinct magnitude
        uniq, inv = np.unique(mag, return_inverse=True)
        x0 = s.points[:1].repeat(len(uniq), axis=0)
        g = A.bind(x0)
        wu = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))

        def modular(lam):
            return _modular_sum(g(uniq / lam), wu)
    else:
        f = A.bind(s.points)

        def modular(lam):
            return _modular_sum(f(mag / lam), w)
    if not np.any(nz):
        return 0.0
    return _solve_gauge(modular, scale)


class _PulledBack(OrliczIntegrand):
    def __init__(self, A: OrliczIntegrand, phi: PolyMap):
        self.base = A
        self.phi = phi
        super().__init__(self._eval, name=f"pullback({A.name})", convex=A.convex)

    def _transport(self, pts):
        y = self.phi.eval_points(pts)
        jac = jets_at_points(self.phi, pts, 1)[1]
        det = np.abs(np.linalg.det(jac))
        return y, det

    def _eval(self, x, xi):
        y, det = self._transport(x)
        return self.base.func(y, xi) * det

    def bind(self, points):
        y, det = self._transport(np.asarray(points, dtype=float))
        inner = self.base.bind(y)
        return lambda xi: inner(xi) * det


class _PulledBackPair(TwoPointIntegrand):
    def __init__(self, B: TwoPointIntegrand, phi: PolyMap):
        self.base = B
        self.phi = phi
        super().__init__(self._eval, name=f"pullback({B.name})")

    def _transport(self, pts):
        y = self.phi.eval_points(pts)
        det = np.abs(np.linalg.det(jets_at_points(self.phi, pts, 1)[1]))
        return y, det

    def _eval(self, x, x2, xi):
        y, dx = self._transport(x)
        y2, dx2 = self._transport(x2)
        return self.base.func(y, y2, xi) * dx * dx2

    def bind_pairs(self, points, I, J):
        y, det = self._transport(np.asarray(points, dtype=float))
        inner = self.base.bind_pairs(y, I, J)
        fac = det[I] * det[J]

        def f(xi):
            with np.errstate(over="ignore", invalid="ignore"):
                return inner(xi) * fac
        return f


def integrand_pullback(A, phi: PolyMap, s: SampleSet | None = None):
    """Pullback ``(phi^* A)(x, xi) = A(phi(x), xi) |det grad phi(x)|``.

    Two-point integrands pick up the determinant at both points.  The
    sample set is accepted for interface symmetry; evaluation happens at
    whatever points the integrand is bound to.
    """
    if phi.in_dim != phi.out_dim:
        raise InputError("integrand pullback needs a map R^N -> R^N")
    if isinstance(A, TwoPointIntegrand):
        return _PulledBackPair(A, phi)
    return _PulledBack(A, phi)


class _Dual(OrliczIntegrand):
    GRID = 4096
    SAFETY = 2.0

    def __init__(self, A: OrliczIntegrand, xi_grid=None):
        self.base = A
        self.grid = None if xi_grid is None else np.asarray(xi_grid, dtype=float)
        if self.grid is not None and (self.grid.size == 0 or np.any(self.grid < 0)):
            raise InputError("dual grid must be a non-empty set of xi >= 0")
        super().__init__(self._eval, name=f"dual({A.name})", convex=True,
                         x_independent=A.x_independent)

    def bind(self, points):
        pts = np.asarray(points, dtype=float)
        return lambda z: self._eval(pts, np.asarray(z, dtype=float))

    def _eval(self, x, zeta):
        zeta = np.asarray(zeta, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.base.x_independent and len(zeta):
            uniq, inv = np.unique(zeta, return_inverse=True)
            return self._eval_all(np.repeat(x[:1], len(uniq), axis=0), uniq)[inv.ravel()]
        return self._eval_all(x, zeta)

    def _eval_all(self, x, zeta):
        out = np.zeros(len(zeta))
        for i0, i1 in _row_blocks(len(zeta), 64):
            out[i0:i1] = self._eval_block(x[i0:i1], zeta[i0:i1])
        return out

    def _eval_block(self, x, zeta):
        n = len(zeta)
        if self.grid is not None:
            return self._grid_max(x, zeta, np.broadcast_to(self.grid, (n, self.grid.size)), refine=True,
                                  fixed=True)
        top = 8.0 * max(float(np.max(np.abs(zeta))), 1.0) * self.SAFETY
        tops = np.full(n, top)
        res = np.full(n, np.nan)
        todo = np.arange(n)
        for _ in range(40):
            grid = np.linspace(0.0, 1.0, self.GRID)[None, :] * tops[todo, None]
            val, at_end = self._grid_max(x[todo], zeta[todo], grid, refine=True)
            res[todo] = val
            todo = todo[at_end]
            if not len(todo):
                break
            tops[todo] *= 16.0
            if np.all(tops[todo] > 1e300):
                break
        res[todo] = np.inf
        return res

    def _grid_max(self, x, zeta, grid, refine, fixed=False):
        n, G = grid.shape
        xr = np.repeat(x, G, axis=0)
        with np.errstate(over="ignore", invalid="ignore"):
            a = self.base.func(xr, grid.ravel()).reshape(n, G)
            obj = zeta[:, None] * grid - a
        obj = np.where(np.isnan(obj), -np.inf, obj)
        k = np.argmax(obj, axis=1)
        best = obj[np.arange(n), k]
        at_end = (k == G - 1) & np.isfinite(best)
        if refine:
            lo = grid[np.arange(n), np.maximum(k - 1, 0)]
            hi = grid[np.arange(n), np.minimum(k + 1, G - 1)]
            best = np.maximum(best, self._golden(x, zeta, lo, hi))
        if fixed:
            return best
        return best, at_end

    def _golden(self, x, zeta, a, b):
        """Vectorized golden-section maximization of the concave ``xi zeta - A``."""
        r = (math.sqrt(5) - 1) / 2

        def f(t):
            with np.errstate(over="ignore", invalid="ignore"):
                v = zeta * t - self.base.func(x, t)
            return np.where(np.isnan(v), -np.inf, v)

        c = b - r * (b - a)
        d = a + r * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(200):
            # ties (including -inf) keep the left part: A grows with xi
            left = fc >= fd
            a, b = np.where(left, a, c), np.where(left, d, b)
            c_new = np.where(left, b - r * (b - a), d)
            d_new = np.where(left, c, a + r * (b - a))
            fnew = f(np.where(left, c_new, d_new))
            fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
            c, d = c_new, d_new
            if np.all(b - a <= 1e-15 * np.maximum(1.0, np.abs(b))):
                break
        return np.maximum(f(c), f(d))


def integrand_dual(A: OrliczIntegrand, xi_grid=None) -> OrliczIntegrand:
    """Dual integrand ``CA(x, zeta) = sup_{xi >= 0} (xi zeta - A(x, xi))``.

    The supremum is a grid maximum (4096 points on ``[0, 16 max(zeta, 1)]``
    unless ``xi_grid`` is given) refined by golden-section search between
    the neighbours of the best grid point.  When the maximum sits at the
    end of the default grid the grid is stretched; if that never settles
    the value is ``inf``.
    """
    if xi_grid is not None and np.size(xi_grid) == 0:
        raise InputError("dual grid is empty")
    return _Dual(A, xi_grid)


def young_gap(A: OrliczIntegrand, CA: OrliczIntegrand, x, xi_grid, zeta_grid) -> float:
    """Smallest value of ``A(x, xi) + CA(x, zeta) - xi zeta`` over the grid pairs."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.asarray(xi_grid, dtype=float)
    ze = np.asarray(zeta_grid, dtype=float)
    worst = math.inf
    for p in x:
        a = A.bind(np.repeat(p[None, :], len(xi), axis=0))(xi)
        c = CA.bind(np.repeat(p[None, :], len(ze), axis=0))(ze)
        gap = a[:, None] + c[None, :] - xi[:, None] * ze[None, :]
        worst = min(worst, float(np.min(gap)))
    return worst


def orlicz_holder_check(u_vals, v_vals, A: OrliczIntegrand, s: SampleSet,
                        dual: OrliczIntegrand | None = None) -> tuple[float, float]:
    """``(sum_i w_i |u_i v_i|, 2 ||u||_A ||v||_{CA})``."""
    u = _norm_rows(_magnitudes(u_vals, s))
    v = _norm_rows(_magnitudes(v_vals, s))
    lhs = float(np.sum(s.weights * u * v))
    if lhs == 0 and (not np.any(u) or not np.any(v)):
        return 0.0, 0.0
    CA = dual if dual is not None else integrand_dual(A)
    rhs = 2.0 * luxemburg_norm(A, u, s) * luxemburg_norm(CA, v, s)
    return lhs, rhs


def orlicz_slobodeckij(values, s: SampleSet, theta: float, B: TwoPointIntegrand) -> float:
    """Discrete Orlicz-Slobodeckij seminorm.

    ``inf {lam : sum_{i != j} w_i w_j B(x_i, x_j, |v_i - v_j| / (lam dist^theta)) dist^-N <= 1}``.
    """
    _check_theta(theta)
    if isinstance(B, OrliczIntegrand):
        B = TwoPointIntegrand.from_integrand(B)
    vals = _magnitudes(values, s)
    N = s.dim
    qs, ws, Is, Js = [], [], [], []
    for rows, q, dist in _pair_quotients(vals, s, theta):
        i, j = np.nonzero(np.isfinite(dist))
        qs.append(q[i, j])
        ws.append(s.weights[rows][i] * s.weights[j] / dist[i, j] ** N)
        Is.append(i + rows.start)
        Js.append(j)
    if not qs:
        return 0.0
    q = np.concatenate(qs)
    w = np.concatenate(ws)
    I = np.concatenate(Is)
    J = np.concatenate(Js)
    scale = float(np.max(q)) if len(q) else 0.0
    f = B.bind_pairs(s.points, I, J)

    def modular(lam):
        return _modular_sum(f(q / lam), w)
    return _solve_gauge(modular, scale)


# --------------------------------------------------------------------------
# transformation report


@dataclass
class ReportEntry:
    """One row of :func:`seminorm_transform_report`.

    ``exact`` marks inequalities that hold for the finite sums themselves
    (flagged beyond rounding); the others bound continuum integrals and
    are flagged beyond the quadrature slack.
    """

    name: str
    measured: float
    bound: float
    exact: bool
    flagged: bool = False

    @property
    def ratio(self) -> float:
        if self.bound == 0:
            return 0.0 if self.measured == 0 else math.inf
        return self.measured / self.bound

    def to_json(self) -> dict:
        return {"name": self.name, "measured": repr(self.measured), "bound": repr(self.bound),
                "ratio": repr(self.ratio), "exact": self.exact, "flagged": self.flagged}


@dataclass
class _Sampled:
    phi_derivs: list          # (n, N) + (N,)*j, j = 0..m+1
    det: np.ndarray
    image: SampleSet
    u_derivs: list            # u jets at phi(x_i): (n, V) + (N,)*(k+d)
    pull_derivs: list         # derivatives of phi^* u at x_i
    lip: float


def _pullback_rows(rows, m, d):
    out = []
    for x, pd, y, ud in rows:
        pj = jet_from_arrays(x, pd)
        uj = jet_from_arrays(y, ud, field_arity=d)
        pb = pullback_jet(uj, pj if d else pj.truncate(m), m)
        out.append([t.data for t in pb.derivs])
    return out


def _sample(u: PolyMap, phi: PolyMap, s: SampleSet, m: int, d: int, jobs: int = 1) -> _Sampled:
    from scipy.spatial.distance import pdist

    N = s.dim
    if phi.in_dim != N or phi.out_dim != N:
        raise InputError(f"phi must map R^{N} to R^{N}")
    if u.in_dim != N:
        raise InputError(f"u must be defined on R^{N}")
    pd = jets_at_points(phi, s.points, m + 1)
    det = np.abs(np.linalg.det(pd[1]))
    if np.any(det == 0):
        raise InputError("phi is singular at a sample point")
    y = pd[0]
    image = SampleSet(y, det * s.weights)
    ud = jets_at_points(u, y, m, field_arity=d)
    rows = [(s.points[i], [a[i] for a in pd], y[i], [a[i] for a in ud]) for i in range(len(s))]
    if jobs > 1 and len(s) > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = [rows[i0:i1] for i0, i1 in _row_blocks(len(rows), -(-len(rows) // jobs))]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            done = list(ex.map(_pullback_rows, chunks, [m] * len(chunks), [d] * len(chunks)))
        per_point = [r for chunk in done for r in chunk]
    else:
        per_point = _pullback_rows(rows, m, d)
    pull = [np.stack([r[j] for r in per_point]) for j in range(m + 1)]
    ratio = 0.0
    if len(s) > 1:
        with np.errstate(divide="ignore"):
            ratio = float(np.max(pdist(y) / pdist(s.points)))
    ops = np.linalg.norm(pd[1], ord=2, axis=(1, 2))
    lip = max(ratio, float(np.max(ops)))
    return _Sampled(pd, det, image, ud, pull, lip)


def _op_norms(arr: np.ndarray) -> np.ndarray:
    """Per-point ``l^2`` operator norm of the ``rows x N^j`` unfolding."""
    n = arr.shape[0]
    mat = arr.reshape(n, arr.shape[1], -1)
    return np.linalg.norm(mat, ord=2, axis=(1, 2))


def _kron_powers(jac: np.ndarray, d: int) -> np.ndarray:
    n = jac.shape[0]
    out = np.ones((n, 1, 1))
    for _ in range(d):
        out = np.einsum("nab,ncd->nacbd", out, jac).reshape(n, out.shape[1] * jac.shape[1],
                                                            out.shape[2] * jac.shape[2])
    return out


def seminorm_transform_report(u: PolyMap, phi: PolyMap, s: SampleSet, params: SeminormParams,
                              d: int = 0, m: int = 0, orlicz: dict | None = None,
                              quadrature_slack: float = 0.1, jobs: int = 1) -> list[ReportEntry]:
    """Measured seminorms of pullbacks against the transformation bounds.

    The image side is the sample ``phi(x_i)`` with transported weights
    ``|det grad phi(x_i)| w_i``.  Field values are measured in the Frobenius
    norm and derivatives of ``phi`` in the operator norm of their
    unfoldings.

    Parameters
    ----------
    u : PolyMap
        Field on the image, ``out_dim = V * N**d``.
    phi : PolyMap
        Map ``R^N -> R^N``.
    d : int
        Covariant arity of the field.
    m : int
        Also report the order-``m`` derivative estimates when ``m >= 1``.
    orlicz : dict, optional
        ``{"A": OrliczIntegrand, "B": TwoPointIntegrand, "C": float}``; adds
        the Orlicz entries (``B`` defaults to ``A`` at the first point, the
        tensor entry needs ``C`` and ``d > 0``).
    quadrature_slack : float
        Relative slack before a quadrature-based entry is flagged.
    jobs : int
        Worker processes for the per-point pullback jets.

    Returns
    -------
    list of ReportEntry
    """
    params.check_smoothness_order()
    p, theta, sigma = params.p, params.theta, params.sigma
    N = s.dim
    smp = _sample(u, phi, s, m, d, jobs)
    inv_det = float(np.max(1.0 / smp.det))
    jac_ops = _op_norms(smp.phi_derivs[1])
    K_sup = float(np.max(jac_ops)) ** d
    power_det = 0.0 if math.isinf(p) else 1.0 / p
    entries: list[ReportEntry] = []

    def add(name, measured, bound, exact):
        e = ReportEntry(name, float(measured), float(bound), exact)
        e.flagged = e.ratio > 1 + (ROUNDING_SLACK if exact else quadrature_slack)
        entries.append(e)

    u0 = smp.u_derivs[0]
    pull0 = smp.pull_derivs[0]
    # Lebesgue norm of the pullback
    add("lp", discrete_lp_norm(pull0, s, p),
        discrete_lp_norm(u0, smp.image, p) * inv_det ** power_det * K_sup, True)
    # scalar Slobodeckij estimate for u o phi
    u_phi_w = discrete_slobodeckij(u0, s, theta, p)
    add("slobodeckij_scalar", u_phi_w,
        discrete_slobodeckij(u0, smp.image, theta, p) * inv_det ** (2 * power_det)
        * smp.lip ** (theta + (0.0 if math.isinf(p) else N / p)), True)

    c1, c2 = _product_constants(N, p, theta, sigma)
    if d > 0:
        K = _kron_powers(smp.phi_derivs[1], d).reshape(len(s), -1)
        K_semi = holder_seminorm(K, s, sigma)
        u_phi_p = discrete_lp_norm(u0, s, p)
        add("slobodeckij_tensor", discrete_slobodeckij(pull0, s, theta, p),
            u_phi_w * K_sup + c1 * u_phi_p * K_semi + c2 * u_phi_p * K_sup, math.isinf(p))

    if m >= 1:
        phi_ops = [_op_norms(smp.phi_derivs[j]) for j in range(1, m + 2)]
        bells = [np.array([float(generalized_bell(k, m, d, [float(a[i]) for a in phi_ops]))
                           for i in range(len(s))]) for k in range(m + 1)]
        lpk = [discrete_lp_norm(smp.u_derivs[k], s, p) for k in range(m + 1)]
        wk = [discrete_slobodeckij(smp.u_derivs[k], s, theta, p) for k in range(m + 1)]
        bsup = [float(np.max(b)) for b in bells]
        bsemi = [holder_seminorm(b, s, sigma) for b in bells]
        add("pullback_lp_m", discrete_lp_norm(smp.pull_derivs[m], s, p),
            sum(a * b for a, b in zip(lpk, bsup)), True)
        add("pullback_slobodeckij_m", discrete_slobodeckij(smp.pull_derivs[m], s, theta, p),
            sum(wk[k] * bsup[k] + c1 * lpk[k] * bsemi[k] + c2 * lpk[k] * bsup[k]
                for k in range(m + 1)), False)

    if orlicz:
        A = orlicz["A"]
        B = orlicz.get("B") or TwoPointIntegrand.from_integrand(A)
        pA = integrand_pullback(A, phi)
        pB = integrand_pullback(B, phi)
        lux_img = luxemburg_norm(A, u0, smp.image)
        add("orlicz_lp", luxemburg_norm(pA, pull0, s), lux_img * K_sup, True)
        L = max(smp.lip, 1.0)
        add("orlicz_slobodeckij_scalar", orlicz_slobodeckij(u0, s, theta, pB),
            L ** (theta + N) * orlicz_slobodeckij(u0, smp.image, theta, B), True)
        C = orlicz.get("C")
        if C is not None and d > 0:
            if C < 0:
                raise InputError("the Orlicz product constant must be non-negative")
            area = sphere_area(N)
            det_sup = float(np.max(smp.det))
            K = _kron_powers(smp.phi_derivs[1], d).reshape(len(s), -1)
            K_semi = holder_seminorm(K, s, sigma)
            bound = (L ** (theta + N) * orlicz_slobodeckij(u0, smp.image, theta, B) * K_sup
                     + C * area / (sigma - theta) * lux_img * K_semi * det_sup
                     + 2 * C * area / theta * lux_img * K_sup * det_sup)
            add("orlicz_slobodeckij_tensor", orlicz_slobodeckij(pull0, s, theta, pB), bound, False)
    return entries


def _product_constants(N, p, theta, sigma):
    if math.isinf(p):
        return 1.0, 2.0
    area = sphere_area(N)
    c1 = (area / ((sigma - theta) * p)) ** (1.0 / p)
    c2 = 2.0 * (area / (theta * p)) ** (1.0 / p)
    return c1, c2
