"""Cross-module oracle suites, one per acceptance criterion.

Each ``criterion_<n>`` function draws its random instances from the given
generator, compares an engine against an independent oracle and returns a
:class:`SuiteResult`.  ``faacalc verify`` and the acceptance tests both run
these suites.
"""
from __future__ import annotations

import itertools
import math
import os
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from faacalc import bell, calculus, norms, oracle, partitions
from faacalc.calculus import PolyMap, jet_of_polymap
from faacalc.errors import DomainError

__all__ = [
    "SuiteResult",
    "SUITES",
    "default_seed",
    "random_polymap",
    "run_suite",
    "run_all",
]


@dataclass
class SuiteResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    limit: float

    @property
    def in_time(self) -> bool:
        return self.seconds < self.limit

    def line(self) -> str:
        status = "PASS" if self.passed and self.in_time else "FAIL"
        return (f"criterion {self.number:2d} [{status}] {self.title}: {self.detail} "
                f"({self.seconds:.1f}s / {self.limit:.0f}s)")


def default_seed() -> int:
    """Seed from ``FAACALC_SEED`` (default 0)."""
    try:
        return int(os.environ.get("FAACALC_SEED", "0"))
    except ValueError:
        return 0


def _rand_coeff(rng, exact):
    if exact:
        return Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 5)))
    return float(rng.normal())


def random_polymap(rng, in_dim: int, out_dim: int, degree: int, exact: bool = True,
                   density: float = 0.6) -> PolyMap:
    """Random polynomial map with rational (or normal float) coefficients."""
    comps = []
    monos = [e for e in itertools.product(range(degree + 1), repeat=in_dim) if sum(e) <= degree]
    for _ in range(out_dim):
        terms = [(_rand_coeff(rng, exact), e) for e in monos if rng.random() < density]
        comps.append(terms)
    return PolyMap.from_terms(in_dim, comps)


def _rand_point(rng, n, exact=True):
    if exact:
        return [Fraction(int(rng.integers(-4, 5)), 4) for _ in range(n)]
    return list(rng.uniform(-1, 1, size=n))


def _stirling2(m, k):
    # triangle recurrence S(m,k) = k S(m-1,k) + S(m-1,k-1)
    S = [[0] * (m + 2) for _ in range(m + 2)]
    S[0][0] = 1
    for i in range(1, m + 1):
        for j in range(1, i + 1):
            S[i][j] = j * S[i - 1][j] + S[i - 1][j - 1]
    return S[m][k]


def _nested_count(m, l, memo=None):
    # N_l(m) = sum_j C(m-1, j-1) N_{l-1}(j) N_l(m-j) (block of element 1 has size j)
    memo = {} if memo is None else memo
    if (m, l) in memo:
        return memo[m, l]
    if l == 0 or m == 0:
        val = 1
    else:
        val = sum(math.comb(m - 1, j - 1) * _nested_count(j, l - 1, memo) * _nested_count(m - j, l, memo)
                  for j in range(1, m + 1))
    memo[m, l] = val
    return val


def _rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(a)))))


# --------------------------------------------------------------------------


def criterion_1(rng, scale=1.0):
    bad = []
    for m in range(9):
        total = 0
        for k in range(m + 1):
            c = sum(1 for _ in partitions.enumerate_partitions(m, k))
            total += c
            if c != _stirling2(m, k):
                bad.append(f"|P({m},{k})|={c}")
        bellnum = sum(_stirling2(m, k) for k in range(m + 1))
        if total != bellnum or sum(1 for _ in partitions.enumerate_partitions(m)) != bellnum:
            bad.append(f"|P({m})|")
        for d in range(5):
            c = sum(1 for _ in partitions.enumerate_ordered_partitions(m, d))
            if c != (d + 1) ** m:
                bad.append(f"|P0({m},{d})|={c}")
    memo: dict = {}
    for m in range(7):
        for l in range(4):
            c = sum(1 for _ in partitions.enumerate_nested_partitions(m, l))
            if c != _nested_count(m, l, memo):
                bad.append(f"|P^{l}({m})|={c}")
    return not bad, "all counts match" if not bad else "mismatch: " + ", ".join(bad[:5])


def criterion_2(rng, scale=1.0):
    bad = []
    for m in range(9):
        for k in range(1, m + 1):
            total = sum(s.coefficient for s in bell.scherk_indices(m, k))
            if total != sum(1 for _ in partitions.enumerate_partitions(m, k)):
                bad.append(f"sum A^b ({m},{k})")
            if bell.bell_partial(m, k, [1] * (m - k + 1)) != _stirling2(m, k):
                bad.append(f"B_{m},{k}(1..1)")
    n_inputs = max(1, int(100 * scale))
    checked = 0
    for m in range(7):
        for d in range(4):
            for k in range(m + 1):
                for _ in range(n_inputs):
                    xs = [Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 8))) for _ in range(m + 1)]
                    if bell.hat_evaluate(k, m, d, xs) != bell.generalized_bell(k, m, d, xs):
                        bad.append(f"hat ({k},{m},{d})")
                    checked += 1
    return not bad, (f"{checked} hat evaluations exact" if not bad else "mismatch: " + ", ".join(bad[:5]))


def _univariate_derivs(P: PolyMap, x, m):
    jet = jet_of_polymap(P, [x], m, exact=True)
    return [t.data.ravel()[0] for t in jet.derivs]


def criterion_3(rng, scale=1.0):
    n = max(1, int(200 * scale))
    bad = 0
    for _ in range(n):
        m = int(rng.integers(1, 8))
        f = random_polymap(rng, 1, 1, int(rng.integers(1, 6)))
        g = random_polymap(rng, 1, 1, int(rng.integers(1, 6)))
        x = _rand_point(rng, 1)[0]
        gd = _univariate_derivs(g, x, m)
        fd = _univariate_derivs(f, gd[0], m)
        a = Fraction(calculus.faa_di_bruno(m, fd[1:], gd[1:]))
        b = Fraction(bell.bell_full(m, fd[1:], gd[1:]))
        jet = calculus.compose_jet(jet_of_polymap(f, [gd[0]], m, exact=True),
                                   jet_of_polymap(g, [x], m, exact=True), m)
        c = Fraction(jet.derivs[m].data.ravel()[0])
        if not a == b == c:
            bad += 1
    return bad == 0, f"{n} pairs, {bad} mismatches"


def criterion_4(rng, scale=1.0):
    n = max(1, int(100 * scale))
    bad_exact = 0
    worst = 0.0
    for _ in range(n):
        N, M = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        m = int(rng.integers(1, 5))
        g = random_polymap(rng, N, M, 3)
        f = random_polymap(rng, M, int(rng.integers(1, 3)), 3)
        x = _rand_point(rng, N)
        gj = jet_of_polymap(g, x, m, exact=True)
        fj = jet_of_polymap(f, gj.value(), m, exact=True)
        h = oracle.symbolic_compose(f, g)
        if not calculus.compose_jet(fj, gj, m).equals(jet_of_polymap(h, x, m, exact=True)):
            bad_exact += 1
        xf = [float(v) for v in x]
        gj = jet_of_polymap(g, xf, m, exact=False)
        fj = jet_of_polymap(f, gj.value(), m, exact=False)
        cj = calculus.compose_jet(fj, gj, m)
        fdj = oracle.fd_jet(h, xf, m, richardson=1)
        for j in range(m + 1):
            worst = max(worst, _rel_err(cj.derivs[j].data, fdj.derivs[j].data))
    ok = bad_exact == 0 and worst <= 1e-5
    return ok, f"{n} instances, {bad_exact} exact mismatches, worst fd rel err {worst:.2e}"


def _chain_jets(rng, L, N, m):
    dims = [N] + [int(rng.integers(1, 3)) for _ in range(L)]
    x = _rand_point(rng, N)
    jets = []
    pt = x
    for i in range(L):
        P = random_polymap(rng, dims[i], dims[i + 1], 3)
        jt = jet_of_polymap(P, pt, m, exact=True)
        jets.append(jt)
        pt = list(jt.value())
    return jets


def criterion_5(rng, scale=1.0):
    n = max(1, int(50 * scale))
    bad = 0
    for _ in range(n):
        L = int(rng.integers(2, 5))
        m = int(rng.integers(1, 4))
        jets = _chain_jets(rng, L, int(rng.integers(1, 3)), m)
        if not calculus.compose_chain(jets, m, "nested").equals(calculus.compose_chain(jets, m, "fold")):
            bad += 1
    bad_hl = 0
    for _ in range(n):
        L = int(rng.integers(2, 5))
        m = int(rng.integers(1, 6))
        ps = [random_polymap(rng, 1, 1, int(rng.integers(1, 5))) for _ in range(L)]
        pt = _rand_point(rng, 1)
        jets, tables = [], []
        for P in ps:
            jt = jet_of_polymap(P, pt, m, exact=True)
            jets.append(jt)
            tables.append([t.data.ravel()[0] for t in jt.derivs[1:]])
            pt = list(jt.value())
        ref = calculus.compose_chain(jets, m, "fold").derivs[m].data.ravel()[0]
        if Fraction(bell.higher_level_bell(L - 1, m, None, tables)) != Fraction(ref):
            bad_hl += 1
    return bad == bad_hl == 0, f"{n} chains ({bad} mismatches), {n} level checks ({bad_hl} mismatches)"


def _hand_linear_pullback(ud: np.ndarray, A: np.ndarray, slots: int) -> np.ndarray:
    out = ud
    for s in range(slots):
        axis = 1 + s
        out = np.moveaxis(np.tensordot(out, A, axes=([axis], [0])), -1, axis)
    return out


def criterion_6(rng, scale=1.0):
    n = max(1, int(50 * scale))
    bad = {"identity": 0, "linear": 0, "functorial": 0}
    for _ in range(n):
        m = int(rng.integers(0, 4))
        d = int(rng.integers(0, 3))
        N = int(rng.integers(1, 4))
        V = int(rng.integers(1, 3))
        u = random_polymap(rng, N, V * N ** d, 3, density=0.3)
        x = _rand_point(rng, N)
        uj = jet_of_polymap(u, x, m, field_arity=d, exact=True)
        if not calculus.pullback_jet(uj, calculus.identity_jet(x, m + 1, exact=True), m).equals(uj):
            bad["identity"] += 1
        # linear phi: R^K -> R^N
        K = int(rng.integers(1, 4))
        A = np.array([[Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 3))) for _ in range(K)]
                      for _ in range(N)], dtype=object)
        b = [Fraction(int(rng.integers(-2, 3)), 2) for _ in range(N)]
        lin = PolyMap.linear(A, b)
        xk = _rand_point(rng, K)
        lj = jet_of_polymap(lin, xk, m + 1, exact=True)
        ujl = jet_of_polymap(u, lj.value(), m, field_arity=d, exact=True)
        pb = calculus.pullback_jet(ujl, lj, m)
        for j in range(m + 1):
            hand = _hand_linear_pullback(ujl.derivs[j].data, A, j + d)
            if not np.array_equal(hand, pb.derivs[j].data):
                bad["linear"] += 1
                break
        # functoriality: (psi o phi)^* u = phi^* (psi^* u)
        phi = random_polymap(rng, K, N, 2, density=0.5)
        psi = random_polymap(rng, N, N, 2, density=0.5)
        pj = jet_of_polymap(phi, xk, m + 1, exact=True)
        sj = jet_of_polymap(psi, pj.value(), m + 1, exact=True)
        comp = calculus.compose_jet(sj, pj, m + 1)
        uj2 = jet_of_polymap(u, sj.value(), m, field_arity=d, exact=True)
        left = calculus.pullback_jet(uj2, comp, m)
        right = calculus.pullback_jet(calculus.pullback_jet(uj2, sj, m), pj, m)
        if not left.equals(right):
            bad["functorial"] += 1
    ok = not any(bad.values())
    return ok, f"{n} instances, mismatches {bad}"


def criterion_7(rng, scale=1.0):
    n = max(1, int(40 * scale))
    bad = 0
    done = 0
    while done < n:
        N = int(rng.integers(1, 4))
        m = int(rng.integers(1, 5))
        P = random_polymap(rng, N, N, 3)
        x = _rand_point(rng, N)
        pj = jet_of_polymap(P, x, m, exact=True)
        try:
            inv = calculus.inverse_jet(pj, m)
        except DomainError:
            continue
        done += 1
        y = list(pj.value())
        if not calculus.compose_jet(pj, inv, m).equals(calculus.identity_jet(y, m, exact=True)):
            bad += 1
        if not calculus.compose_jet(inv, pj, m).equals(calculus.identity_jet(x, m, exact=True)):
            bad += 1
    cubic = PolyMap.from_terms(1, [[(1, (1,)), (1, (3,))]])
    inv = calculus.inverse_jet(jet_of_polymap(cubic, [0], 5, exact=True))
    derivs = [Fraction(t.data.ravel()[0]) for t in inv.derivs]
    series = oracle.series_inverse_univariate([0, 1, 0, 1], 5)
    series_ok = derivs == [c * math.factorial(i) for i, c in enumerate(series)] and derivs[3] == -6
    return bad == 0 and series_ok, (f"{n} maps, {bad} identity failures; x+x^3 inverse derivatives "
                                    f"{[str(v) for v in derivs]}")


def criterion_8(rng, scale=1.0):
    n = max(1, int(500 * scale))
    worst = math.inf
    for _ in range(n):
        N, M = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        m, d = int(rng.integers(0, 4)), int(rng.integers(0, 3))
        V = int(rng.integers(1, 3))
        phi = random_polymap(rng, N, M, 3, exact=False)
        u = random_polymap(rng, M, V * M ** d, 3, exact=False)
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0, math.inf]))
        r = norms.check_pullback_inequality(u, phi, rng.uniform(-1, 1, size=N), m, d, p=p)
        worst = min(worst, r["margin"])
    return worst >= 0, f"{n} instances, smallest margin {worst:.3e}"


def criterion_9(rng, scale=1.0):
    notes = []
    ok = True
    s = norms.SampleSet.grid([0.0], [1.0], 64)
    worst_lp = 0.0
    for _ in range(max(1, int(20 * scale))):
        v = rng.normal(size=(64,))
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0, 4.0]))
        a = norms.luxemburg_norm(norms.lp_integrand(p), v, s)
        b = norms.discrete_lp_norm(v, s, p)
        worst_lp = max(worst_lp, abs(a - b) / b)
    ok &= worst_lp <= 1e-10
    notes.append(f"lp rel err {worst_lp:.1e}")
    unit = norms.SampleSet.grid([0.0], [1.0], 100, total_mass=1.0)
    one = np.ones(100)
    A = norms.exp_integrand()
    CA = norms.integrand_dual(A)
    lux = norms.luxemburg_norm(A, one, unit)
    dual = norms.luxemburg_norm(CA, one, unit)
    ok &= abs(lux - 1 / math.log(2)) <= 1e-6 and abs(dual - 1 / math.e) <= 1e-6
    lhs, rhs = norms.orlicz_holder_check(one, one, A, unit, CA)
    ok &= lhs <= rhs and abs(rhs - 2 / (math.e * math.log(2))) <= 1e-6
    notes.append(f"exp: {lux:.9f}, dual {dual:.9f}, holder {lhs:.6f} <= {rhs:.6f}")
    grid = np.linspace(0.0, 12.0, 513)
    zetas = np.linspace(0.0, 40.0, 257)
    gaps = []
    for integ in (A, norms.lp_integrand(2.0), norms.double_phase_integrand(1.5, 3.0)):
        gaps.append(norms.young_gap(integ, norms.integrand_dual(integ, grid), [[0.0]], grid, zetas))
        gaps.append(norms.young_gap(integ, norms.integrand_dual(integ), [[0.0]], grid, zetas))
    ok &= min(gaps) >= 0
    notes.append(f"young min gap {min(gaps):.1e}")
    worst_tri = worst_hom = 0.0
    make = [lambda: norms.lp_integrand(float(rng.uniform(1, 4))), norms.exp_integrand,
            lambda: norms.double_phase_integrand(float(rng.uniform(1, 2)), float(rng.uniform(2, 4)))]
    for i in range(max(1, int(100 * scale))):
        integ = make[i % 3]()
        u, v = rng.normal(size=64), rng.normal(size=64)
        t = float(rng.uniform(-3, 3))
        nu, nv = norms.luxemburg_norm(integ, u, s), norms.luxemburg_norm(integ, v, s)
        nuv = norms.luxemburg_norm(integ, u + v, s)
        ntu = norms.luxemburg_norm(integ, t * u, s)
        worst_tri = max(worst_tri, (nuv - nu - nv) / (nu + nv))
        worst_hom = max(worst_hom, abs(ntu - abs(t) * nu) / (abs(t) * nu))
    ok &= worst_tri <= 1e-9 and worst_hom <= 1e-9
    notes.append(f"triangle excess {max(worst_tri, 0):.1e}, homogeneity err {worst_hom:.1e}")
    return bool(ok), "; ".join(notes)


def _transform_cases(rng, scale):
    P = norms.SeminormParams(p=2.0, theta=0.5, sigma=1.0)
    s1 = norms.SampleSet.grid([0.0], [1.0], 64)
    s2 = norms.SampleSet.grid([0.0, 0.0], [1.0, 1.0], 32)
    orl = {"A": norms.lp_integrand(2.0), "C": 1.0}
    affine, smooth = [], []
    u1 = random_polymap(rng, 1, 1, 3, exact=False)
    u1d = random_polymap(rng, 1, 1, 3, exact=False)
    affine.append((u1, PolyMap.linear([[2.0]]), s1, 0, 1, orl))
    affine.append((u1d, PolyMap.linear([[2.0]], [0.5]), s1, 1, 1, orl))
    A = np.eye(2) + 0.3 * rng.normal(size=(2, 2))
    u2 = random_polymap(rng, 2, 1, 3, exact=False)
    u2d = random_polymap(rng, 2, 2, 2, exact=False)
    affine.append((u2, PolyMap.linear(A, rng.normal(size=2)), s2, 0, 1, orl))
    affine.append((u2d, PolyMap.linear(A), s2, 1, 1, orl))
    n = max(1, int(3 * scale))
    for i in range(n):
        pert = random_polymap(rng, 2, 2, 3, exact=False)
        comps = []
        for c, comp in enumerate(pert.components):
            terms = [(0.05 * float(k), e) for k, e in comp if sum(e) >= 2]
            terms.append((1.0, tuple(int(j == c) for j in range(2))))
            comps.append(terms)
        phi = PolyMap.from_terms(2, comps)
        smooth.append((u2 if i % 2 == 0 else u2d, phi, s2, i % 2, 1, orl))
    return P, affine, smooth


def criterion_10(rng, scale=1.0):
    P, affine, smooth = _transform_cases(rng, scale)
    worst_aff = worst_smooth = 0.0
    for u, phi, s, d, m, orl in affine:
        for e in norms.seminorm_transform_report(u, phi, s, P, d=d, m=m, orlicz=orl):
            worst_aff = max(worst_aff, e.ratio)
    for u, phi, s, d, m, orl in smooth:
        for e in norms.seminorm_transform_report(u, phi, s, P, d=d, m=m, orlicz=orl):
            worst_smooth = max(worst_smooth, e.ratio)
    ok = worst_aff <= 1 + norms.ROUNDING_SLACK and worst_smooth <= 1.1
    return ok, (f"{len(affine)} affine cases max ratio {worst_aff:.6f}; "
                f"{len(smooth)} smooth cases max ratio {worst_smooth:.6f}")


SUITES: dict[int, tuple[str, float, Callable]] = {
    1: ("combinatorial counts", 10, criterion_1),
    2: ("Scherk and Bell identities", 10, criterion_2),
    3: ("Faa di Bruno cross-check", 30, criterion_3),
    4: ("chain rule vs symbolic and finite differences", 60, criterion_4),
    5: ("nested chains and higher-level Bell", 60, criterion_5),
    6: ("pullback identity, linear and functoriality", 60, criterion_6),
    7: ("inverse recursion", 30, criterion_7),
    8: ("pointwise bound soundness", 120, criterion_8),
    9: ("Orlicz suite", 60, criterion_9),
    10: ("seminorm transform report", 120, criterion_10),
}


def run_suite(number: int, seed: int | None = None, scale: float = 1.0) -> SuiteResult:
    title, limit, fn = SUITES[number]
    rng = np.random.default_rng([default_seed() if seed is None else seed, number])
    t0 = time.perf_counter()
    passed, detail = fn(rng, scale)
    return SuiteResult(number, title, bool(passed), detail, time.perf_counter() - t0, limit)


def run_all(seed: int | None = None, scale: float = 1.0, numbers=None, jobs: int = 1) -> list[SuiteResult]:
    """Run the suites (optionally in ``jobs`` worker processes); results in suite order."""
    numbers = sorted(SUITES) if numbers is None else list(numbers)
    if jobs > 1 and len(numbers) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = [ex.submit(run_suite, k, seed, scale) for k in numbers]
            return [f.result() for f in futs]
    return [run_suite(k, seed, scale) for k in numbers]
