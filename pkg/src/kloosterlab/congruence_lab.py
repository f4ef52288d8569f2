"""Exhaustive solution counts for the p-adic phase congruences.

For a prime power q = p^s and parameters (A, B, a, u) the phase is

    g(m)  = A u X1^{-1} - B u X2^{-1},      X1 = ((m+a)u)_{1/2}, X2 = (mu)_{1/2}
    g1(m) = -A u^2 X1^{-3}/2 + B u^2 X2^{-3}/2
    g2(m) = 3 A u^3 X1^{-5}/4 - 3 B u^3 X2^{-5}/4

defined on the m with m and m + a both in the square class of u.  Counting
is always by brute force over residues mod p^kappa.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .arith_core import (
    DomainError,
    PrimePowerModulus,
    SqrtBranch,
    inverse_table,
    mod_inverse,
    ord_p,
    padic_sqrt,
    sqrt_table,
    square_classes,
)

MAX_CENSUS_MODULUS = 10**7
CLASSIFICATIONS = ("all", "nonsingular", "singular")


@dataclass(frozen=True)
class PhaseParams:
    A: int
    B: int
    a: int
    k: int
    u: int
    q: PrimePowerModulus

    def __post_init__(self) -> None:
        if self.q.p <= 3:
            raise DomainError("phase censuses need p > 3")
        if self.u % self.q.p == 0:
            raise DomainError("u must be a unit mod p")
        if self.q.q > MAX_CENSUS_MODULUS:
            raise DomainError(f"modulus {self.q.q} exceeds census cap {MAX_CENSUS_MODULUS}")

    def with_k(self, k: int) -> "PhaseParams":
        return PhaseParams(self.A, self.B, self.a, k, self.u, self.q)


@dataclass(frozen=True)
class SolutionCensus:
    kappa: int
    count: int
    classification: str


def _check_domain(m: int, params: PhaseParams) -> None:
    p, u = params.q.p, params.u
    if m % p == 0 or (m + params.a) % p == 0:
        raise DomainError("m and m + a must be units")
    is_sq = square_classes(p)
    ub = mod_inverse(u, p)
    if not (is_sq[m * ub % p] and is_sq[(m + params.a) * ub % p]):
        raise DomainError("m or m + a lies outside the square class of u")


def phase_eval(params: PhaseParams, m: int, which: str = "g", branch: SqrtBranch | None = None) -> int:
    """One of g, g1, g2 at a single m, via scalar p-adic square roots."""
    _check_domain(m, params)
    q = params.q
    Q = q.q
    A, B, a, u = params.A, params.B, params.a, params.u
    X1 = padic_sqrt((m + a) * u % Q, q, branch)
    X2 = padic_sqrt(m * u % Q, q, branch)
    i1 = mod_inverse(X1, Q)
    i2 = mod_inverse(X2, Q)
    if which == "g":
        return (A * u * i1 - B * u * i2) % Q
    if which == "g1":
        h = mod_inverse(2, Q)
        return (-h * A * u * u * pow(i1, 3, Q) + h * B * u * u * pow(i2, 3, Q)) % Q
    if which == "g2":
        c = 3 * mod_inverse(4, Q)
        return (c * A * u**3 * pow(i1, 5, Q) - c * B * u**3 * pow(i2, 5, Q)) % Q
    raise DomainError(f"unknown phase {which!r}")


@dataclass(frozen=True)
class PhaseTables:
    """g, g1, g2 at every m mod p^s (entries outside the domain are -1)."""

    domain: np.ndarray
    g: np.ndarray
    g1: np.ndarray
    g2: np.ndarray


def _powmod(x: np.ndarray, e: int, Q: int) -> np.ndarray:
    out = np.ones_like(x)
    b = x % Q
    while e:
        if e & 1:
            out = out * b % Q
        b = b * b % Q
        e >>= 1
    return out


def phase_tables(A: int, B: int, a: int, u: int, q: PrimePowerModulus, branch: SqrtBranch | None = None) -> PhaseTables:
    p, Q = q.p, q.q
    m = np.arange(Q, dtype=np.int64)
    is_sq = square_classes(p)
    ub = mod_inverse(u, p)
    dom = is_sq[m * ub % p] & is_sq[(m + a) * ub % p]
    root = sqrt_table(q, branch)
    inv = inverse_table(Q)
    md = m[dom]
    i1 = inv[root[(md + a) * u % Q]]
    i2 = inv[root[md * u % Q]]
    A_, B_, u_ = A % Q, B % Q, u % Q
    h = mod_inverse(2, Q)
    c = 3 * mod_inverse(4, Q) % Q
    uu = u_ * u_ % Q
    uuu = uu * u_ % Q
    g = (A_ * u_ % Q * i1 - B_ * u_ % Q * i2) % Q
    t1 = _powmod(i1, 3, Q)
    t2 = _powmod(i2, 3, Q)
    g1 = ((Q - h) * A_ % Q * uu % Q * t1 + h * B_ % Q * uu % Q * t2) % Q
    t1 = _powmod(i1, 5, Q)
    t2 = _powmod(i2, 5, Q)
    g2 = (c * A_ % Q * uuu % Q * t1 - c * B_ % Q * uuu % Q * t2) % Q
    full = [np.full(Q, -1, dtype=np.int64) for _ in range(3)]
    for arr, vals in zip(full, (g, g1, g2)):
        arr[dom] = vals
    return PhaseTables(dom, *full)


def _tables_for(params: PhaseParams, branch) -> PhaseTables:
    return phase_tables(params.A, params.B, params.a, params.u, params.q, branch)


def count_solutions(params: PhaseParams, kappa: int, target: int | None = None, classification: str = "all",
                    branch: SqrtBranch | None = None, tables: PhaseTables | None = None) -> SolutionCensus:
    """Number of m mod p^kappa in the domain with g(m) = target (default params.k) mod p^kappa."""
    q = params.q
    if not 1 <= kappa <= q.s:
        raise DomainError(f"kappa must lie in 1..{q.s}")
    if classification not in CLASSIFICATIONS:
        raise DomainError(f"classification must be one of {CLASSIFICATIONS}")
    t = tables or _tables_for(params, branch)
    target = params.k if target is None else target
    pk = q.p**kappa
    dom = t.domain[:pk]
    hit = dom & (t.g[:pk] % pk == target % pk)
    if classification == "nonsingular":
        hit &= t.g1[:pk] % q.p != 0
    elif classification == "singular":
        hit &= t.g1[:pk] % q.p == 0
    return SolutionCensus(kappa, int(hit.sum()), classification)


def census_counts(tables: PhaseTables, q: PrimePowerModulus, kappa: int, classification: str = "all") -> np.ndarray:
    """Counts for every target k mod p^kappa at once."""
    pk = q.p**kappa
    dom = tables.domain[:pk].copy()
    if classification == "nonsingular":
        dom &= tables.g1[:pk] % q.p != 0
    elif classification == "singular":
        dom &= tables.g1[:pk] % q.p == 0
    return np.bincount(tables.g[:pk][dom] % pk, minlength=pk)


def hensel_census(f: Callable[[int, int], int], p: int, levels: range, domain: Callable[[int], bool] | None = None,
                  derivative: Callable[[int, int], int] | None = None, kappa_base: int | None = None):
    """Counts K(p^mu) of roots of f(x) = 0 mod p^mu for each mu in ``levels``.

    f(x, mu) must return f(x) mod p^mu.  When ``derivative`` is supplied the
    Hensel hypothesis (derivative a unit at every root at the base level) is
    checked; the returned flag is False if it fails.
    """
    counts = []
    ok = True
    base = kappa_base if kappa_base is not None else levels[0]
    for mu in levels:
        pm = p**mu
        roots = [x for x in range(pm) if (domain is None or domain(x)) and f(x, mu) % pm == 0]
        counts.append(SolutionCensus(mu, len(roots), "all"))
        if derivative is not None and mu == base:
            ok = all(derivative(x, 1) % p != 0 for x in roots)
    return counts, ok


def hensel_audit(params: PhaseParams, kappa_base: int = 1, branch: SqrtBranch | None = None,
                 nonsingular_only: bool = False) -> tuple[list[SolutionCensus], str]:
    """Counts of g(m) = k mod p^mu for kappa_base <= mu <= s.

    The lifting hypothesis is that g1 is a unit at every base-level solution.
    With ``nonsingular_only`` the domain is cut down to m with g1(m) a unit,
    which enforces the hypothesis.  Status is ``"constant"``, ``"varies"`` or
    ``"lemma hypotheses not met"``.
    """
    q = params.q
    t = _tables_for(params, branch)
    cls = "nonsingular" if nonsingular_only else "all"
    out = [count_solutions(params, mu, classification=cls, tables=t) for mu in range(kappa_base, q.s + 1)]
    pk = q.p**kappa_base
    sol = t.domain[:pk] & (t.g[:pk] % pk == params.k % pk)
    if nonsingular_only:
        sol &= t.g1[:pk] % q.p != 0
    if np.any(t.g1[:pk][sol] % q.p == 0):
        return out, "lemma hypotheses not met"
    status = "constant" if len({c.count for c in out}) <= 1 else "varies"
    return out, status


@dataclass(frozen=True)
class SingularData:
    roots: list[int]
    special_values: list[int]
    setT: list[int]
    level_counts: list[int]  # number of roots of g1 = 0 mod p^kappa, kappa = 1..s
    lifts_uniquely: bool
    k_units: bool
    g2_units: bool


def _g1_roots(tables: PhaseTables, q: PrimePowerModulus) -> tuple[list[int], list[int], bool]:
    """Roots of g1 = 0 mod p^s and per-level counts; checks each level-kappa root has one lift."""
    p = q.p
    counts = []
    prev = None
    unique = True
    for kappa in range(1, q.s + 1):
        pk = p**kappa
        idx = np.flatnonzero(tables.domain[:pk] & (tables.g1[:pk] % pk == 0))
        counts.append(len(idx))
        if prev is not None:
            parents = sorted(int(x) % (pk // p) for x in idx)
            if parents != sorted(prev):
                unique = False
        prev = [int(x) for x in idx]
    return prev or [], counts, unique


def singular_census(A: int, B: int, a: int, u: int, q: PrimePowerModulus, branch: SqrtBranch | None = None,
                    coset_reps: tuple[int, int] | None = None) -> SingularData:
    p = q.p
    if p <= 3:
        raise DomainError("needs p > 3")
    if a % p == 0:
        raise DomainError("needs p not dividing a")
    if A % p == 0 and B % p == 0:
        raise DomainError("needs p not dividing A or B")
    t = phase_tables(A, B, a, u, q, branch)
    roots, counts, unique = _g1_roots(t, q)
    ks = [int(t.g[m]) for m in roots]
    g2s = [int(t.g2[m]) for m in roots]
    setT = special_set(A, B, u, q, branch, coset_reps)
    return SingularData(
        roots=roots,
        special_values=ks,
        setT=setT,
        level_counts=counts,
        lifts_uniquely=unique and len(set(counts)) <= 1,
        k_units=all(k % p for k in ks),
        g2_units=all(g % p for g in g2s),
    )


def coset_representatives(p: int) -> tuple[int, int]:
    """Smallest positive square and smallest positive non-square mod p."""
    is_sq = square_classes(p)
    return 1, int(np.flatnonzero(~is_sq[1:])[0] + 1)


def special_set(A: int, B: int, u: int, q: PrimePowerModulus, branch: SqrtBranch | None = None,
                coset_reps: tuple[int, int] | None = None) -> list[int]:
    """{k^2 / v : k a critical value of the phase with shift v, sign-twisted B} mod p^s."""
    p, Q = q.p, q.q
    reps = coset_reps or coset_representatives(p)
    out = set()
    for v in reps:
        for eps in (1, -1):
            t = phase_tables(A, eps * B, v, u, q, branch)
            roots, _, _ = _g1_roots(t, q)
            for m in roots:
                k = int(t.g[m])
                out.add(k * k * v % Q)
    return sorted(out)


def rho(k: int, values: list[int], p: int, cap: int) -> int:
    """max over values of ord_p(k - value), capped; 0 when there are no values."""
    if not values:
        return 0
    return min(cap, max(min(ord_p(k - v, p), cap) for v in values))


def singular_bound_sweep(A: int, B: int, a: int, u: int, q: PrimePowerModulus, branch: SqrtBranch | None = None) -> tuple[float, float]:
    """Worst ratios count / p^{floor(min(rho, kappa)/2)} over every kappa and every k mod p^kappa.

    The first ratio uses distances to the special values k_i; the second uses
    distances of k^2 a to the set T.
    """
    p, s = q.p, q.s
    t = phase_tables(A, B, a, u, q, branch)
    roots, _, _ = _g1_roots(t, q)
    ks = [int(t.g[m]) for m in roots]
    T = special_set(A, B, u, q, branch)
    worst_k = worst_t = 0.0
    for kappa in range(1, s + 1):
        counts = census_counts(t, q, kappa, "singular")
        for k in np.flatnonzero(counts):
            c = int(counts[k])
            r1 = rho(int(k), ks, p, s)
            r2 = rho(int(k) * int(k) * a, T, p, s)
            worst_k = max(worst_k, c / p ** (min(r1, kappa) // 2))
            worst_t = max(worst_t, c / p ** (min(r2, kappa) // 2))
    return worst_k, worst_t


def inverse_sqrt_phase(A0: int, a0: int, k0: int, u: int, alpha: int, p: int):
    """f(x) = A0 ((1 + p^alpha a0 u / x^2)^{-1/2} - 1) / p^alpha - k0 x / u and its derivative,
    both reduced mod p^mu; the square root is the one congruent to 1 mod p."""

    one_branch = SqrtBranch.from_function(p, lambda r: 1 if r == 1 else _tonelli(r, p))

    def f(x: int, mu: int) -> int:
        Qa = p ** (mu + alpha)
        xb = mod_inverse(x, Qa)
        z = (1 + p**alpha * a0 * u * xb * xb) % Qa
        r = padic_sqrt(z, PrimePowerModulus(p, mu + alpha), one_branch)
        val = (mod_inverse(r, Qa) - 1) % Qa
        pm = p**mu
        return (A0 * (val // p**alpha) - k0 * mod_inverse(u, pm) * x) % pm

    def f1(x: int, mu: int) -> int:
        pm = p**mu
        xb = mod_inverse(x, pm)
        return (A0 * a0 * u * pow(xb, 3, pm) - k0 * mod_inverse(u, pm)) % pm

    return f, f1


def _tonelli(r: int, p: int) -> int:
    for x in range(1, p):
        if x * x % p == r:
            return x
    raise DomainError("not a square")


def singular_parameters(A: int, a: int, u: int, m0: int, q: PrimePowerModulus,
                        branch: SqrtBranch | None = None) -> int:
    """B making m0 a root of g1, that is B = A X2^3 / X1^3 at m0.

    Random (A, B) rarely produce roots of g1, so sweeps over singular points
    build B from a chosen m0 instead.
    """
    _check_domain(m0, PhaseParams(A, 0, a, 0, u, q))
    Q = q.q
    X1 = padic_sqrt((m0 + a) * u % Q, q, branch)
    X2 = padic_sqrt(m0 * u % Q, q, branch)
    return A * pow(X2, 3, Q) * pow(mod_inverse(X1, Q), 3, Q) % Q
