"""Kloosterman sums and the complete and incomplete sums built from them.

Direct summation is the reference everywhere.  Faster routes (FFT rows,
CRT factorization, the explicit prime-power evaluation) are checked against
it in the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .arith_core import (
    AuditFailure,
    DomainError,
    PrimePowerModulus,
    SqrtBranch,
    e_array,
    factorize,
    gauss_sign,
    inverse_table,
    kronecker_symbol,
    mod_inverse,
    ord_p,
    padic_sqrt,
    sqrt_table,
    square_classes,
    unit_mask,
)
from .reports import BoundReport, log_proxy

MAX_COMPLETE_MODULUS = 10**7

SIGNS4 = tuple(itertools.product((1, -1), repeat=4))
SHARP_SIGNS = tuple(eps for eps in SIGNS4 if eps[0] == eps[1] and eps[2] == eps[3])


# ---------------------------------------------------------------------------
# Kloosterman sums


def kloosterman(m: int, n: int, c: int) -> float:
    """S(m, n; c) by direct summation over units x mod c."""
    if c < 1:
        raise DomainError("modulus must be positive")
    if c == 1:
        return 1.0
    inv = inverse_table(c)
    x = np.flatnonzero(unit_mask(c)).astype(np.int64)
    phase = ((m % c) * x + (n % c) * inv[x]) % c
    vals = e_array(phase, c)
    total = vals.sum()
    if abs(total.imag) > 1e-8 * c:
        raise AuditFailure(f"S({m},{n};{c}) has imaginary part {total.imag}")
    return float(total.real)


def kloosterman_row(n: int, c: int) -> np.ndarray:
    """S(m, n; c) for every m mod c at once (discrete Fourier transform in x)."""
    if c == 1:
        return np.ones(1)
    inv = inverse_table(c)
    units = unit_mask(c)
    g = np.zeros(c, dtype=complex)
    g[units] = e_array((n % c) * inv[units], c)
    row = np.fft.ifft(g) * c
    return row.real.copy()


def kloosterman_explicit(m: int, n: int, q: PrimePowerModulus, branch: SqrtBranch | None = None) -> float:
    """S(m, n; p^s) for s >= 2 from the stationary-phase closed form."""
    p, s = q.p, q.s
    if s < 2:
        raise DomainError("closed form needs s >= 2")
    if m % p == 0:
        raise DomainError(f"closed form needs p not dividing m (p={p}, m={m})")
    if n % p == 0 or kronecker_symbol(m * n, p) != 1:
        return 0.0
    return float(sum(kloosterman_eps(m, n, q, eps, branch) for eps in (1, -1)).real)


def kloosterman_eps(m: int, n: int, q: PrimePowerModulus, eps: int, branch: SqrtBranch | None = None) -> complex:
    """The single-sign piece p^{s/2} tau(eps X, p^s) e(2 eps X / p^s), X = (mn)_{1/2}."""
    p, Q = q.p, q.q
    if (m * n) % p == 0 or kronecker_symbol(m * n, p) != 1:
        return 0j
    X = padic_sqrt((m * n) % Q, q, branch)
    tau = gauss_sign(eps * X, q)
    t = 2 * math.pi * ((2 * eps * X) % Q) / Q
    return Q**0.5 * tau * complex(math.cos(t), math.sin(t))


def kloosterman_eps_row(n: int, q: PrimePowerModulus, eps: int, branch: SqrtBranch | None = None) -> np.ndarray:
    """kloosterman_eps(m, n, q, eps) for all m mod q (zero outside the nonvanishing regime)."""
    p, s, Q = q.p, q.s, q.q
    root = sqrt_table(q, branch)
    m = np.arange(Q, dtype=np.int64)
    X = root[(m * (n % Q)) % Q]
    ok = X >= 0
    out = np.zeros(Q, dtype=complex)
    Xo = X[ok]
    if s % 2 == 0:
        tau = np.ones(Xo.shape, dtype=complex)
    else:
        is_sq = square_classes(p)
        leg = np.where(is_sq[(eps * Xo) % p], 1.0, -1.0)
        tau = leg * (1.0 if p % 4 == 1 else 1j)
    out[ok] = Q**0.5 * tau * e_array(2 * eps * Xo, Q)
    return out


def kloosterman_split(m: int, n: int, r1: int, r2: int) -> float:
    """Factored value S(r2bar m, r2bar n; r1) S(r1bar m, r1bar n; r2), checked against S(m, n; r1 r2)."""
    if math.gcd(r1, r2) != 1:
        raise DomainError(f"moduli {r1}, {r2} are not coprime")
    i2 = mod_inverse(r2, r1)
    i1 = mod_inverse(r1, r2)
    left = kloosterman(i2 * m, i2 * n, r1) * kloosterman(i1 * m, i1 * n, r2)
    whole = kloosterman(m, n, r1 * r2)
    if abs(left - whole) > 1e-8 * max(1.0, abs(whole)) + 1e-9 * r1 * r2:
        raise AuditFailure(f"twisted multiplicativity fails: {left} vs {whole}")
    return left


def weil_bound(m: int, n: int, c: int) -> float:
    f = factorize(c)
    d = math.prod(e + 1 for _, e in f.factors)
    return d * math.sqrt(math.gcd(math.gcd(m, n), c)) * math.sqrt(c)


# ---------------------------------------------------------------------------
# complete sums


@dataclass(frozen=True)
class CompleteSumSpec:
    n1: int
    n2: int
    a: int
    k: int
    q: int
    variant: str = "full"  # "full", "sharp", "eps"
    eps: tuple[int, int, int, int] | None = None

    def __post_init__(self) -> None:
        if self.variant not in ("full", "sharp", "eps"):
            raise DomainError(f"unknown variant {self.variant!r}")
        if self.variant == "eps" and (self.eps is None or len(self.eps) != 4 or any(x not in (1, -1) for x in self.eps)):
            raise DomainError("single-sign variant needs eps in {+1,-1}^4")
        if self.q < 1 or self.q > MAX_COMPLETE_MODULUS:
            raise DomainError(f"modulus {self.q} outside 1..{MAX_COMPLETE_MODULUS}")


def _prime_power(q: int) -> PrimePowerModulus:
    f = factorize(q)
    if f.omega != 1:
        raise DomainError(f"{q} is not a prime power")
    p, s = f.factors[0]
    return PrimePowerModulus(p, s)


def _sigma_full_direct(n1: int, n2: int, a: int, k: int, q: int) -> complex:
    S1 = kloosterman_row(n1, q)
    S2 = S1 if (n1 - n2) % q == 0 else kloosterman_row(n2, q)
    m = np.arange(q, dtype=np.int64)
    ma = (m + a) % q
    units = unit_mask(q)
    ok = units & units[ma]
    terms = S1[ma] * S2[ma] * S1 * S2 * e_array(-k * m, q)
    return complex(terms[ok].sum())


def _sigma_eps(n1: int, n2: int, a: int, k: int, q: PrimePowerModulus, signs: Sequence[tuple[int, ...]], branch) -> complex:
    _check_eps_regime(n1, n2, q)
    Q = q.q
    rows = {}
    for n in (n1, n2):
        for e in (1, -1):
            rows[(n, e)] = kloosterman_eps_row(n, q, e, branch)
    m = np.arange(Q, dtype=np.int64)
    ma = (m + a) % Q
    ek = e_array(-k * m, Q)
    total = 0j
    for e1, e2, e3, e4 in signs:
        t = rows[(n1, e1)][ma] * np.conj(rows[(n1, e2)]) * rows[(n2, e3)][ma] * np.conj(rows[(n2, e4)])
        total += complex((t * ek).sum())
    return total


def _check_eps_regime(n1: int, n2: int, q: PrimePowerModulus) -> None:
    p = q.p
    if q.s < 2:
        raise DomainError("sign-decomposed sums need s >= 2")
    if (n1 * n2) % p == 0 or kronecker_symbol(n1 * n2, p) != 1:
        raise DomainError("sign-decomposed sums need n1, n2 units in the same square class")


def sigma_complete(spec: CompleteSumSpec, branch: SqrtBranch | None = None, method: str = "auto") -> complex:
    """The fourfold complete Kloosterman sum, or one of its sign-decomposed pieces.

    ``method`` is ``"direct"``, ``"crt"`` or ``"auto"`` (CRT for composite
    moduli that are not prime powers).
    """
    n1, n2, a, k, q = spec.n1, spec.n2, spec.a, spec.k, spec.q
    if spec.variant == "full":
        if method == "direct" or q == 1:
            return _sigma_full_direct(n1, n2, a, k, q)
        parts = factorize(q).prime_powers()
        if len(parts) == 1 or method == "direct":
            return _sigma_full_direct(n1, n2, a, k, q)
        total = 1 + 0j
        for qj in parts:
            Qj = q // qj
            ib = mod_inverse(Qj, qj)
            total *= _sigma_full_direct(ib * ib * n1, ib * ib * n2, a, ib * k, qj)
        return total
    qq = _prime_power(q)
    if spec.variant == "sharp":
        if a % qq.p:
            raise DomainError(f"restricted sign sum needs p | a (p={qq.p}, a={a})")
        return _sigma_eps(n1, n2, a, k, qq, SHARP_SIGNS, branch)
    return _sigma_eps(n1, n2, a, k, qq, [spec.eps], branch)


def sigma_all_signs(n1: int, n2: int, a: int, k: int, q: PrimePowerModulus, branch: SqrtBranch | None = None) -> complex:
    """Sum of the sixteen single-sign pieces; equals the full sum in the nonvanishing regime."""
    return _sigma_eps(n1, n2, a, k, q, SIGNS4, branch)


# ---------------------------------------------------------------------------
# reduced sums Sigma[A, B, a, k; p^s]


def _admissible(m: np.ndarray, a: int, u: int, q: PrimePowerModulus) -> np.ndarray:
    p = q.p
    is_sq = square_classes(p)
    ub = mod_inverse(u, p)
    return is_sq[(m * ub) % p] & is_sq[((m + a) * ub) % p]


def sigma_reduced(A: int, B: int, a: int, k: int, q: PrimePowerModulus, u: int, branch: SqrtBranch | None = None) -> complex:
    """Sum over m, m+a in u * squares of e((2A((m+a)u)_{1/2} - 2B(mu)_{1/2} - km) / p^s), by brute force."""
    p, Q = q.p, q.q
    if p <= 3:
        raise DomainError("reduced sums need p > 3")
    if u % p == 0:
        raise DomainError("u must be a unit")
    root = sqrt_table(q, branch)
    m = np.arange(Q, dtype=np.int64)
    ok = _admissible(m, a, u, q)
    m = m[ok]
    X1 = root[((m + a) * u) % Q]
    X2 = root[(m * u) % Q]
    f = (2 * (A % Q) * X1 - 2 * (B % Q) * X2 - (k % Q) * m) % Q
    return complex(e_array(f, Q).sum())


def sigma_reduced_by_reduction(A: int, B: int, a: int, k: int, q: PrimePowerModulus, u: int, branch: SqrtBranch | None = None) -> complex:
    """Evaluate Sigma[A,B,a,k;p^s] by stripping the common p-power of A and B first."""
    p, s = q.p, q.s
    nu = min(ord_p(A % q.q, p), ord_p(B % q.q, p))
    if nu == 0:
        return sigma_reduced(A, B, a, k, q, u, branch)
    if nu < s:
        if k % p**nu:
            return 0j
        pn = p**nu
        return pn * sigma_reduced(A // pn, B // pn, a, k // pn, q.at(s - nu), u, branch)
    # A, B vanish mod p^s: only the linear term survives, and it is periodic mod p
    if k % p ** (s - 1):
        return 0j
    m = np.arange(p, dtype=np.int64)
    ok = _admissible(m, a, u, q.at(1))
    return p ** (s - 1) * complex(e_array(-(k // p ** (s - 1)) * m[ok], p).sum())


def admissible_count(a: int, u: int, q: PrimePowerModulus) -> int:
    m = np.arange(q.p, dtype=np.int64)
    return int(_admissible(m, a, u, q.at(1)).sum()) * q.p ** (q.s - 1)


def tau_product(eps: tuple[int, int, int, int], N1: int, N2: int, q: PrimePowerModulus) -> complex:
    e1, e2, e3, e4 = eps
    return (
        gauss_sign(e1 * N1, q)
        * np.conj(gauss_sign(e2 * N1, q))
        * gauss_sign(e3 * N2, q)
        * np.conj(gauss_sign(e4 * N2, q))
    )


def decomposition_terms(n1: int, n2: int, q: PrimePowerModulus, u: int | None, branch: SqrtBranch | None, signs=SIGNS4):
    """(eps, tau-product, A^eps, B^eps) for each sign pattern."""
    p, Q = q.p, q.q
    u = n1 % p if u is None else u
    ub = mod_inverse(u, Q)
    N1 = padic_sqrt(n1 * ub % Q, q, branch)
    N2 = padic_sqrt(n2 * ub % Q, q, branch)
    out = []
    for eps in signs:
        e1, e2, e3, e4 = eps
        out.append((eps, tau_product(eps, N1, N2, q), e1 * N1 + e3 * N2, e2 * N1 + e4 * N2))
    return u, out


def sigma_by_decomposition(n1: int, n2: int, a: int, k: int, q: PrimePowerModulus, u: int | None = None,
                           branch: SqrtBranch | None = None, signs=SIGNS4) -> complex:
    u, terms = decomposition_terms(n1, n2, q, u, branch, signs)
    total = 0j
    for _eps, tau, A, B in terms:
        total += tau * sigma_reduced(A, B, a, k, q, u, branch)
    return q.q**2 * total


def decomposition_audit(n1: int, n2: int, a: int, k: int, q: PrimePowerModulus, u: int | None = None,
                        branch: SqrtBranch | None = None) -> BoundReport:
    """Residual between the direct complete sum and its reduced-sum decomposition."""
    p, Q = q.p, q.q
    if p <= 3 or q.s < 2:
        raise DomainError("decomposition needs p > 3 and s >= 2")
    direct = sigma_complete(CompleteSumSpec(n1, n2, a, k, Q))
    meta = dict(p=p, s=q.s, n1=n1, n2=n2, a=a, k=k)
    tol = 1e-6 * Q**2.5
    if (n1 * n2) % p == 0 or kronecker_symbol(n1 * n2, p) != 1:
        # at least one Kloosterman factor vanishes identically
        return BoundReport("decomposition", abs(direct), tol, dict(meta, degenerate=True))
    via = sigma_by_decomposition(n1, n2, a, k, q, u, branch)
    return BoundReport("decomposition", abs(direct - via), tol, dict(meta, degenerate=False))


def sharp_sum_reduced(A: int, a: int, k: int, q: PrimePowerModulus, u: int, branch: SqrtBranch | None = None) -> complex:
    """sum over eps = +-1 of Sigma[eps A, eps A, a, k; q]."""
    return sum(sigma_reduced(e * A, e * A, a, k, q, u, branch) for e in (1, -1))


def sigma_prime_bound(n1: int, n2: int, a: int, k: int, q: int) -> BoundReport:
    """|Sigma| against q^{5/2} (q, a(n1-n2), k)^{1/2} for prime q."""
    lhs = abs(sigma_complete(CompleteSumSpec(n1, n2, a, k, q)))
    g = math.gcd(math.gcd(q, a * (n1 - n2)), k)
    return BoundReport("prime-complete", lhs, q**2.5 * math.sqrt(g), dict(q=q, n1=n1, n2=n2, a=a, k=k))


# ---------------------------------------------------------------------------
# a one-variable rational phase sum over F_p


def _trim(c: list[int], p: int) -> list[int]:
    c = [x % p for x in c]
    while c and c[-1] == 0:
        c.pop()
    return c


def rational_phase(A: int, B: int, a: int, k: int, u: int, p: int) -> tuple[list[int], list[int]]:
    """Coprime (f1, f2) mod p with R(v) = f1(v)/f2(v), coefficients lowest degree first.

    R(v) = A(v + a u/v) + B(v - a u/v) - k/(4u) (v - a u/v)^2.
    """
    import flint

    c4 = (-k * mod_inverse(4 * u, p)) % p
    au = a * u % p
    # numerator over v^2: A(v^3 + au v) + B(v^3 - au v) + c4 (v^2 - au)^2
    num = [c4 * au * au, (A - B) * au, -2 * c4 * au, A + B, c4]
    f1 = flint.nmod_poly(_trim(num, p), p)
    f2 = flint.nmod_poly([0, 0, 1], p)
    g = f1.gcd(f2)
    f1 = f1 // g
    f2 = f2 // g
    lead = f2.coeffs()[-1]
    inv = mod_inverse(int(lead), p)
    f1 = f1 * inv
    f2 = f2 * inv
    return [int(x) for x in f1.coeffs()], [int(x) for x in f2.coeffs()]


def _poly_eval(c: list[int], v: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros_like(v)
    for coef in reversed(c):
        out = (out * v + coef) % p
    return out


def rational_phase_report(A: int, B: int, a: int, k: int, u: int, p: int) -> tuple[BoundReport, complex, complex]:
    """Weil-type bound check for sum_{f2(v) != 0} e(f1/f2 (v) / p).

    Also returns the restricted sum over v != 0 with v^2 != +-au, and the sum of
    the four reduced sums Sigma[e1 A, e2 B, a, k; p] it should equal.
    """
    f1, f2 = rational_phase(A, B, a, k, u, p)
    if len(f1) <= 1 and len(f2) <= 1:
        raise DomainError("both polynomials are constant")
    v = np.arange(p, dtype=np.int64)
    den = _poly_eval(f2, v, p)
    ok = den != 0
    inv = inverse_table(p)
    vals = _poly_eval(f1, v[ok], p) * inv[den[ok]] % p
    full = complex(e_array(vals, p).sum())
    deg1 = max(len(f1) - 1, 0)
    deg2 = max(len(f2) - 1, 0)
    rhs = (deg1 + 2 * deg2 - 1) * math.sqrt(p) + 1
    au = a * u % p
    keep = (v != 0) & ((v * v - au) % p != 0) & ((v * v + au) % p != 0)
    den_all = _poly_eval(f2, v, p)
    vals_r = _poly_eval(f1, v[keep], p) * inv[den_all[keep]] % p
    restricted = complex(e_array(vals_r, p).sum())
    q = PrimePowerModulus(p, 1)
    hat = sum(sigma_reduced(e1 * A, e2 * B, a, k, q, u) for e1 in (1, -1) for e2 in (1, -1))
    rep = BoundReport("rational-phase", abs(full), rhs, dict(p=p, A=A, B=B, a=a, k=k, u=u, deg1=deg1, deg2=deg2))
    return rep, restricted, hat


# ---------------------------------------------------------------------------
# short sums and the bound for them


@dataclass(frozen=True)
class ShortSumSpec:
    A: float
    M: float
    r: int
    n1: int
    n2: int
    s: int
    q: int | None = None

    def __post_init__(self) -> None:
        if self.M <= 1:
            raise DomainError("length M must exceed 1")
        if self.r % self.s:
            raise DomainError(f"s={self.s} does not divide r={self.r}")
        six = factorize(self.r).part_supported_on(6)
        if self.s % six:
            raise DomainError(f"(r, 6^inf)={six} must divide s={self.s}")
        if self.modulus % self.r:
            raise DomainError("q must be a multiple of r")

    @property
    def modulus(self) -> int:
        return self.r if self.q is None else self.q


def short_product_sum(spec: ShortSumSpec) -> float:
    r = spec.r
    lo = math.floor(spec.A) + 1
    hi = math.floor(spec.A + spec.M)
    if hi < lo:
        return 0.0
    m = np.arange(lo, hi + 1, dtype=np.int64)
    m = m[np.gcd(m, spec.modulus) == 1]
    S1 = kloosterman_row(spec.n1, r)
    S2 = S1 if (spec.n1 - spec.n2) % r == 0 else kloosterman_row(spec.n2, r)
    return float(np.sum(S1[m % r] * S2[m % r]))


def theorem5_rhs(spec: ShortSumSpec, eps_power: float = 2.0) -> tuple[float, dict]:
    r, s, M = spec.r, spec.s, spec.M
    rest = r // factorize(r).part_supported_on(s)
    fr = factorize(rest)
    sigma = 0.0 if fr.is_cube_free() else r**1.25 * s**0.25 * fr.square_part**0.25
    g = math.gcd(r, spec.n1 - spec.n2)
    terms = dict(
        t1=M**0.5 * r * s**0.5,
        t2=M**0.5 * r**1.25 / s**0.25,
        t3=M * r**0.75 * g**0.25 * s**0.25,
        t4=float(r * s),
        sigma=sigma,
    )
    proxy = log_proxy(r, eps_power)
    return proxy * sum(terms.values()), dict(terms, proxy=proxy)


def theorem5_bound(spec: ShortSumSpec, eps_power: float = 2.0) -> BoundReport:
    lhs = abs(short_product_sum(spec))
    rhs, terms = theorem5_rhs(spec, eps_power)
    meta = dict(r=spec.r, s=spec.s, n1=spec.n1, n2=spec.n2, A=spec.A, M=spec.M, eps_power=eps_power)
    meta.update(terms)
    return BoundReport("theorem5", lhs, rhs, meta)


# ---------------------------------------------------------------------------
# Weyl differencing and completion


def bhat_sum(b1: np.ndarray, h: int, H: int, r1: int, r2: int, k: int | None = None):
    """sum_i sum_{m mod r1} b1i(m + hHr2) conj(b1i(m)) e(-km/r1); all k when k is None."""
    b1 = np.atleast_2d(np.asarray(b1, dtype=complex))
    if b1.shape[1] != r1:
        raise DomainError("b1 tables must have period r1")
    shift = (h * H * r2) % r1
    prod = (np.roll(b1, -shift, axis=1) * np.conj(b1)).sum(axis=0)
    if k is None:
        return np.fft.fft(prod)
    m = np.arange(r1)
    return complex(np.sum(prod * e_array(-k * m, r1)))


def _completion_weights(M: float, r1: int) -> np.ndarray:
    """min(M/r1, 1/|k|) indexed by k mod r1, with k taken in (-r1/2, r1/2]."""
    k = np.arange(r1)
    ks = np.where(k > r1 // 2, k - r1, k).astype(float)
    w = np.full(r1, M / r1)
    nz = ks != 0
    w[nz] = np.minimum(M / r1, 1.0 / np.abs(ks[nz]))
    return w


def completion_rhs(c: np.ndarray, M: float) -> float:
    """Sum over |k| <= r1/2 of |c^(k)| min(M/r1, 1/|k|) for an r1-periodic c."""
    r1 = len(c)
    chat = np.fft.fft(c)
    total = float(np.sum(np.abs(chat) * _completion_weights(M, r1)))
    if r1 % 2 == 0:
        # k = -r1/2 and k = r1/2 are both in range
        total += abs(chat[r1 // 2]) * min(M / r1, 2.0 / r1)
    return total


@dataclass(frozen=True)
class WeylCompletionReport:
    differencing: BoundReport
    completion: BoundReport
    weyl_completion: BoundReport

    def reports(self) -> list[BoundReport]:
        return [self.differencing, self.completion, self.weyl_completion]


def weyl_completion_audit(b1: np.ndarray, b2: np.ndarray, r1: int, r2: int, H: int, M: int, A: int,
                          R1: float | None = None, R2: float | None = None) -> WeylCompletionReport:
    """Exact left sides and unit-constant right sides of the differencing and completion inequalities.

    b1 has shape (I, r1), b2 has shape (I, r2); b(m) = sum_i b1i(m) b2i(m) summed over A < m <= A + M.
    """
    b1 = np.atleast_2d(np.asarray(b1, dtype=complex))
    b2 = np.atleast_2d(np.asarray(b2, dtype=complex))
    if b1.shape[1] != r1 or b2.shape[1] != r2 or b1.shape[0] != b2.shape[0]:
        raise DomainError("table shapes do not match (I, r1) and (I, r2)")
    if H < 1 or M < 1:
        raise DomainError("H and M must be positive")
    I = b1.shape[0]
    R1 = float(np.abs(b1).max()) if R1 is None else R1
    R2 = float(np.abs(b2).max()) if R2 is None else R2
    m = np.arange(A + 1, A + M + 1, dtype=np.int64)
    B1 = b1[:, m % r1]
    B2 = b2[:, m % r2]
    total = complex(np.sum(B1 * B2))
    lhs = abs(total) ** 2
    step = H * r2
    hmax = int(M // step)
    meta = dict(r1=r1, r2=r2, H=H, M=M, A=A, I=I, R1=R1, R2=R2)

    # differencing with b1 truncated to (A, A+M]
    diag = float(np.sum(np.abs(B1) ** 2))
    corr = 0.0
    for h in range(1, hmax + 1):
        d = step * h
        c = abs(complex(np.sum(B1[:, d:] * np.conj(B1[:, :-d]))))
        corr += 2 * c  # h and -h give conjugate sums
    rhs_diff = (step * R2**2 + R2**2 * step**2 / M) * I * diag + step * R2**2 * I * corr
    differencing = BoundReport("differencing", lhs, rhs_diff, dict(meta))

    # completion of c_h(m) = sum_i b1i(m + hHr2) conj(b1i(m)) for every shift, worst ratio kept
    worst = None
    weyl_tail = 0.0
    weights = _completion_weights(M, r1)
    for h in range(-hmax, hmax + 1):
        shift = (h * step) % r1
        c_per = (np.roll(b1, -shift, axis=1) * np.conj(b1)).sum(axis=0)
        part = abs(complex(np.sum(c_per[m % r1])))
        rhs_comp = completion_rhs(c_per, M)
        rep = BoundReport("completion", part, rhs_comp, dict(meta, h=h))
        if worst is None or rep.ratio > worst.ratio:
            worst = rep
        if h != 0:
            bh = np.abs(bhat_sum(b1, h, H, r1, r2))
            weyl_tail += float(np.sum(bh * weights))
            if r1 % 2 == 0:
                weyl_tail += bh[r1 // 2] * min(M / r1, 2.0 / r1)
    rhs_weyl = (M + step) * step * (R1 * R2) ** 2 * I**2 + step * R2**2 * I * weyl_tail
    weyl_completion = BoundReport("weyl-completion", lhs, rhs_weyl, dict(meta))
    return WeylCompletionReport(differencing, worst, weyl_completion)


def kloosterman_b_tables(n1: int, n2: int, r1: int, r2: int) -> tuple[np.ndarray, np.ndarray]:
    """Tables b1 (period r1), b2 (period r2) with b1 b2 = S(m,n1;r)S(m,n2;r) 1_{(m,r)=1}, r = r1 r2."""
    if math.gcd(r1, r2) != 1:
        raise DomainError("r1 and r2 must be coprime")
    i2 = mod_inverse(r2, r1) if r1 > 1 else 0
    i1 = mod_inverse(r1, r2) if r2 > 1 else 0
    b1 = kloosterman_row(i2 * i2 * n1, r1) * kloosterman_row(i2 * i2 * n2, r1) * unit_mask(r1)
    b2 = kloosterman_row(i1 * i1 * n1, r2) * kloosterman_row(i1 * i1 * n2, r2) * unit_mask(r2)
    return b1[None, :].astype(complex), b2[None, :].astype(complex)


def kloosterman_sign_tables(n1: int, n2: int, r1: int, r2: int, sharp: Sequence[int], branch_for=None) -> np.ndarray:
    """Sign-decomposed b1 tables: on each prime power of r1 whose prime is in ``sharp`` the
    Kloosterman factors are replaced by their single-sign pieces, one table per sign choice."""
    i2 = mod_inverse(r2, r1) if r1 > 1 else 0
    N1, N2 = i2 * i2 * n1, i2 * i2 * n2
    pieces: list[list[np.ndarray]] = []
    m = np.arange(r1, dtype=np.int64)
    for qj in factorize(r1).prime_powers():
        Qj = r1 // qj
        ib = mod_inverse(Qj, qj)
        a1, a2 = ib * ib * N1, ib * ib * N2
        p = factorize(qj).factors[0][0]
        if p in sharp:
            qq = _prime_power(qj)
            br = branch_for(p) if branch_for else None
            opts = []
            for e1 in (1, -1):
                for e2 in (1, -1):
                    row = kloosterman_eps_row(a1, qq, e1, br) * kloosterman_eps_row(a2, qq, e2, br)
                    opts.append(row[m % qj])
            pieces.append(opts)
        else:
            row = kloosterman_row(a1, qj) * kloosterman_row(a2, qj) * unit_mask(qj)
            pieces.append([row[m % qj].astype(complex)])
    tables = [np.prod(np.vstack(combo), axis=0) for combo in itertools.product(*pieces)]
    return np.vstack(tables) if tables else np.ones((1, r1), dtype=complex)


def bhat_product_formula(n1: int, n2: int, h: int, H: int, r1: int, r2: int, k: int, sharp: Sequence[int] = (),
                         branch_for=None) -> complex:
    """CRT product of prime-power complete sums for the Kloosterman instantiation."""
    i2 = mod_inverse(r2, r1) if r1 > 1 else 0
    a = h * H * r2
    total = 1 + 0j
    for qj in factorize(r1).prime_powers():
        Qj = r1 // qj
        ib = mod_inverse(Qj, qj)
        N1 = ib * ib * i2 * i2 * n1
        N2 = ib * ib * i2 * i2 * n2
        p = factorize(qj).factors[0][0]
        variant = "sharp" if p in sharp else "full"
        br = branch_for(p) if (branch_for and variant == "sharp") else None
        total *= sigma_complete(CompleteSumSpec(N1, N2, a, ib * k, qj, variant), br)
    return total
