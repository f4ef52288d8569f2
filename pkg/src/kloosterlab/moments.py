"""The second moment of twisted central values at desk scale.

The moment over primitive characters mod q is computed from a residue-class
matrix: K[a, b] collects lam1(m) lam2(n) W(nm/q^2)/sqrt(nm) over m = a, n = b
mod q, and every character value is then a quadratic form chi^T (K + K^T) conj(chi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Literal

import mpmath
import numpy as np
from scipy.special import loggamma

from .analytic_kernels import WeightW, weight_w
from .arith_core import AuditFailure, DomainError, euler_phi, factorize
from .characters import DirichletCharacter, character_matrix, primitive_characters, psi_count
from .hecke_forms import Newform, TableExhausted, compute_coefficients
from .reports import BoundReport, log_proxy

ZETA2 = math.pi**2 / 6
ZETA2_LOGDERIV = float(mpmath.zeta(2, derivative=1) / mpmath.zeta(2))
EULER_GAMMA = float(mpmath.euler)
THETA = 7 / 64
# W(x) < 1e-13 beyond this many multiples of q^2, for every supported weight pair
_W_TAIL = 1e-13

Convention = Literal["derived", "printed"]


def _same_form(f1: Newform, f2: Newform) -> bool:
    return f1.weight == f2.weight


def _check_pair(f1: Newform, f2: Newform) -> None:
    if (f1.weight - f2.weight) % 4:
        raise DomainError("weights must agree mod 4 (otherwise the root number forces the product to vanish)")


# ---------------------------------------------------------------------------
# local factors at p | q


def _hecke_prime_powers(lam_p: float, top: int) -> list[float]:
    out = [1.0, lam_p]
    for _ in range(top - 1):
        out.append(lam_p * out[-1] - out[-2])
    return out[: top + 1]


def _local(poly: list[float], p: int, s: float) -> tuple[float, float]:
    """(value, d/ds log) of poly(p^-s) / (1 - p^-2s)."""
    x = p ** (-s)
    val = sum(c * x**j for j, c in enumerate(poly))
    dval = sum(j * c * x**j for j, c in enumerate(poly))
    lp = math.log(p)
    logderiv = -lp * (dval / val + 2 * x * x / (1 - x * x))
    return val / (1 - x * x), logderiv


@dataclass(frozen=True)
class LocalFactors:
    P: float
    P_logderiv: float
    Q: float
    Q_logderiv: float
    unit_density: float  # phi(q)/q
    unit_logderiv: float  # sum over p | q of log p/(p-1)


def local_factors(f1: Newform, f2: Newform, q: int, s: float = 1.0) -> LocalFactors:
    """Finite Euler products P(s), Q(s) over p | q and their log-derivatives at s."""
    primes = factorize(q).primes if q > 1 else []
    P = Q = 1.0
    dP = dQ = 0.0
    for p in primes:
        l1 = _hecke_prime_powers(f1.eigenvalue(p), 2)
        l2 = _hecke_prime_powers(f2.eigenvalue(p), 2)
        v, d = _local([1.0, -l1[2], l1[2], -1.0], p, s)
        P *= v
        dP += d
        ab = l1[1] * l2[1]
        v, d = _local([1.0, -ab, l1[2] + l2[2], -ab, 1.0], p, s)
        Q *= v
        dQ += d
    density = euler_phi(q) / q if q > 1 else 1.0
    return LocalFactors(P, dP, Q, dQ, density, sum(math.log(p) / (p - 1) for p in primes))


# ---------------------------------------------------------------------------
# L(1, sym^2 f) and L(1, f1 x f2) by the approximate functional equation


def _multiplicative(n_max: int, prime_power: Callable[[int, int], float]) -> np.ndarray:
    """Table of a multiplicative function from its values at prime powers."""
    spf = np.zeros(n_max + 1, dtype=np.int64)
    for p in range(2, n_max + 1):
        if spf[p] == 0:
            spf[p::p][spf[p::p] == 0] = p
    out = np.zeros(n_max + 1)
    out[1] = 1.0
    for n in range(2, n_max + 1):
        p = int(spf[n])
        m, e = n, 0
        while m % p == 0:
            m //= p
            e += 1
        out[n] = out[m] * prime_power(p, e)
    return out


def sym2_coefficients(f: Newform, n_max: int) -> np.ndarray:
    """Dirichlet coefficients of L(s, sym^2 f) = zeta(2s) sum lam(n^2) n^-s."""

    def pp(p: int, e: int) -> float:
        lam = _hecke_prime_powers(f.eigenvalue(p), 2 * e)
        return sum(lam[2 * (e - 2 * i)] for i in range(e // 2 + 1))

    return _multiplicative(n_max, pp)


def rankin_coefficients(f1: Newform, f2: Newform, n_max: int) -> np.ndarray:
    """Dirichlet coefficients of L(s, f1 x f2) = zeta(2s) sum lam1(n) lam2(n) n^-s."""

    def pp(p: int, e: int) -> float:
        a = _hecke_prime_powers(f1.eigenvalue(p), e)
        b = _hecke_prime_powers(f2.eigenvalue(p), e)
        return sum(a[e - 2 * i] * b[e - 2 * i] for i in range(e // 2 + 1))

    return _multiplicative(n_max, pp)


@dataclass(frozen=True)
class _SelfDualL:
    """A self-dual L-function of conductor 1 and root number 1.

    gamma lists factors ("R", shift) for Gamma_R(s + shift) and ("C", shift)
    for Gamma_C(s + shift).
    """

    coeffs: np.ndarray
    gamma: tuple[tuple[str, float], ...]

    def log_gamma(self, s: np.ndarray) -> np.ndarray:
        out = np.zeros_like(s, dtype=complex)
        for kind, shift in self.gamma:
            z = s + shift
            if kind == "R":
                out += -z / 2 * math.log(math.pi) + loggamma(z / 2)
            else:
                out += math.log(2) - z * math.log(2 * math.pi) + loggamma(z)
        return out

    def _cutoff(self, s: float, y: np.ndarray, kernel: str, norm: float | None = None) -> np.ndarray:
        """(1/2 pi i) int G(u) gamma(s+u)/gamma(norm) y^-u du/u on Re u = 1 (norm defaults to s)."""
        norm = s if norm is None else norm
        if kernel == "gaussian":
            T, step = 9.0, 0.01
        else:
            T, step = 120.0, 0.01
        t = np.arange(step / 2, T, step)
        u = 1.0 + 1j * t
        g = np.exp(self.log_gamma(s + u) - self.log_gamma(np.array([norm + 0j]))[0]) / u
        if kernel == "gaussian":
            g = g * np.exp(u * u)
        out = np.empty(len(y))
        logy = np.log(y)
        for i in range(0, len(y), 500):
            ly = logy[i : i + 500, None]
            out[i : i + 500] = (g[None, :] * np.exp(-u[None, :] * ly)).real.sum(axis=1) * step / math.pi
        return out

    def value(self, s: float, kernel: str = "gaussian") -> float:
        n = np.arange(1, len(self.coeffs), dtype=float)
        a = self.coeffs[1:]
        first = a * n ** (-s) * self._cutoff(s, n, kernel)
        # the dual sum carries gamma(1-s)/gamma(s) from the functional equation
        second = a * n ** (s - 1) * self._cutoff(1 - s, n, kernel, norm=s)
        return math.fsum(first) + math.fsum(second)

    def value_and_logderiv(self, kernel: str = "gaussian", h: float = 1e-3) -> tuple[float, float]:
        v = self.value(1.0, kernel)
        d = (self.value(1 + h, kernel) - self.value(1 - h, kernel)) / (2 * h)
        return v, d / v


@dataclass(frozen=True)
class LValues:
    sym2: float
    sym2_logderiv: float
    rankin: float | None
    rankin_logderiv: float | None
    n_terms: int
    kernel: str


def _sym2_L(f: Newform, n_terms: int) -> _SelfDualL:
    return _SelfDualL(sym2_coefficients(f, n_terms), (("R", 1.0), ("C", f.weight - 1.0)))


def _rankin_L(f1: Newform, f2: Newform, n_terms: int) -> _SelfDualL:
    k1, k2 = f1.weight, f2.weight
    return _SelfDualL(rankin_coefficients(f1, f2, n_terms), (("C", (k1 + k2) / 2 - 1), ("C", abs(k1 - k2) / 2)))


def rankin_l_value(f1: Newform, f2: Newform, n_terms: int = 3000, kernel: str = "gaussian") -> tuple[float, float]:
    if _same_form(f1, f2):
        raise DomainError("L(s, f x f) has a pole at s = 1")
    if f1.n_max < n_terms or f2.n_max < n_terms:
        raise TableExhausted("coefficient table shorter than the requested number of terms")
    return _rankin_L(f1, f2, n_terms).value_and_logderiv(kernel)


def l_values(f1: Newform, f2: Newform, n_terms: int = 3000, kernel: str = "gaussian") -> LValues:
    """L(1, sym^2 f1) and, for f1 != f2, L(1, f1 x f2), with log-derivatives at 1.

    Both come from a balanced approximate functional equation with cutoff
    kernel exp(u^2) ("gaussian") or 1 ("sharp"); the two kernels give an
    independent check on each other.
    """
    if f1.n_max < n_terms:
        raise TableExhausted("coefficient table shorter than the requested number of terms")
    s2, d2 = _sym2_L(f1, n_terms).value_and_logderiv(kernel)
    r = dr = None
    if not _same_form(f1, f2):
        r, dr = rankin_l_value(f1, f2, n_terms, kernel)
    return LValues(s2, d2, r, dr, n_terms, kernel)


@lru_cache(maxsize=16)
def _cached_l_values(k1: int, k2: int, n_terms: int) -> LValues:
    f1 = compute_coefficients(k1, n_terms)
    f2 = compute_coefficients(k2, n_terms)
    return l_values(f1, f2, n_terms)


def constant_c(f1: Newform, lv: LValues | None = None, convention: Convention = "derived") -> float:
    """The constant c of the f1 = f2 main term.

    "derived" uses -log(2 pi), which is what the residue of the weight above
    produces; "printed" keeps -log(2 pi)/2.
    """
    lv = lv or _cached_l_values(f1.weight, f1.weight, 3000)
    log2pi = math.log(2 * math.pi) * (1.0 if convention == "derived" else 0.5)
    digamma = float(mpmath.digamma(f1.weight / 2))
    return EULER_GAMMA - log2pi + digamma + lv.sym2_logderiv - 2 * ZETA2_LOGDERIV


@dataclass(frozen=True)
class MainTermParams:
    P1: float
    logderiv_P: float
    Q1: float
    L_sym2: float
    L_rankin: float | None
    c: float
    which: str  # "f1=f2" or "f1!=f2"
    unit_density: float = 1.0
    unit_logderiv: float = 0.0

    def M(self, q: int, convention: Convention = "derived") -> float:
        if self.which == "f1!=f2":
            return self.Q1 * self.L_rankin
        if convention == "printed":
            return self.P1 * self.L_sym2 * (math.log(q) + self.c + self.logderiv_P)
        return self.unit_density * self.P1 * self.L_sym2 * (
            math.log(q) + self.c + self.logderiv_P + self.unit_logderiv
        )


def main_term_params(f1: Newform, f2: Newform, q: int, lv: LValues | None = None,
                     convention: Convention = "derived") -> MainTermParams:
    lv = lv or _cached_l_values(f1.weight, f2.weight, 3000)
    lf = local_factors(f1, f2, q)
    same = _same_form(f1, f2)
    return MainTermParams(
        P1=lf.P, logderiv_P=lf.P_logderiv, Q1=lf.Q, L_sym2=lv.sym2, L_rankin=lv.rankin,
        c=constant_c(f1, lv, convention) if same else 0.0,
        which="f1=f2" if same else "f1!=f2",
        unit_density=lf.unit_density, unit_logderiv=lf.unit_logderiv,
    )


# ---------------------------------------------------------------------------
# central values


@lru_cache(maxsize=8)
def _weight(k1: int, k2: int) -> WeightW:
    return WeightW(min(k1, k2), max(k1, k2))


@lru_cache(maxsize=8)
def w_support(k1: int, k2: int) -> float:
    """x beyond which W(x) < 1e-13."""
    W = _weight(k1, k2)
    x = 1.0
    while weight_w(W, x) > _W_TAIL:
        x *= 1.1
    return x


def _coprime_lam(f: Newform, q: int, n_max: int) -> np.ndarray:
    if n_max > f.n_max:
        raise TableExhausted(f"need eigenvalues up to {n_max}, table has {f.n_max}")
    lam = np.array(f.lam[: n_max + 1], dtype=float)
    if q > 1:
        lam[np.gcd(np.arange(n_max + 1), q) != 1] = 0.0
    return lam


def central_product(f1: Newform, f2: Newform, chi: DirichletCharacter, W: WeightW | None = None,
                    x_cut: float | None = None) -> float:
    """L(1/2, f1 x chi) conj L(1/2, f2 x chi) from the double Dirichlet series (direct evaluation)."""
    _check_pair(f1, f2)
    if not chi.is_primitive:
        raise DomainError("character must be primitive")
    q = chi.q
    W = W or _weight(f1.weight, f2.weight)
    x_cut = x_cut or w_support(f1.weight, f2.weight)
    P_max = int(x_cut * q * q)
    lam1 = _coprime_lam(f1, q, P_max)
    lam2 = _coprime_lam(f2, q, P_max)
    Wtab = np.zeros(P_max + 1)
    P = np.arange(1, P_max + 1)
    Wtab[1:] = weight_w(W, P / (q * q)) / np.sqrt(P)
    chiv = chi.values
    total = 0j
    for n in range(1, P_max + 1):
        m = np.arange(1, P_max // n + 1)
        w = Wtab[n * m]
        cross = lam1[m] * lam2[n] + lam2[m] * lam1[n]
        total += np.sum(cross * w * chiv[m % q]) * np.conj(chiv[n % q])
    if abs(total.imag) > 1e-6 * (1 + abs(total)):
        raise AuditFailure(f"central product not real: {total}")
    return float(total.real)


def residue_matrix(f1: Newform, f2: Newform, q: int, x_cut: float | None = None,
                   weight_table: np.ndarray | None = None) -> np.ndarray:
    """K[a, b] = sum over m = a, n = b mod q, (mn, q) = 1 of lam1(m) lam2(n) W(mn/q^2)/sqrt(mn)."""
    x_cut = x_cut or w_support(f1.weight, f2.weight)
    P_max = int(x_cut * q * q)
    lam1 = _coprime_lam(f1, q, P_max)
    lam2 = _coprime_lam(f2, q, P_max)
    if weight_table is None:
        W = _weight(f1.weight, f2.weight)
        P = np.arange(1, P_max + 1)
        weight_table = np.zeros(P_max + 1)
        weight_table[1:] = W.interpolant(P / (q * q)) / np.sqrt(P)
    Wtab = weight_table
    S = math.isqrt(P_max)
    K = np.zeros((q, q))
    for n in range(1, S + 1):
        if lam2[n] == 0:
            continue
        m = np.arange(1, P_max // n + 1)
        K[:, n % q] += lam2[n] * np.bincount(m % q, weights=lam1[m] * Wtab[n * m], minlength=q)
    for m in range(1, S + 1):
        if lam1[m] == 0 or P_max // m <= S:
            continue
        n = np.arange(S + 1, P_max // m + 1)
        K[m % q, :] += lam1[m] * np.bincount(n % q, weights=lam2[n] * Wtab[m * n], minlength=q)
    return K


def moment_values(f1: Newform, f2: Newform, q: int, x_cut: float | None = None) -> tuple[list[DirichletCharacter], np.ndarray]:
    """Every primitive character mod q with its central product."""
    _check_pair(f1, f2)
    chars = primitive_characters(q)
    if not chars:
        return [], np.zeros(0, dtype=complex)
    K = residue_matrix(f1, f2, q, x_cut)
    M = K + K.T
    X = character_matrix(chars)
    vals = np.einsum("ia,ia->i", X @ M, X.conj())
    return chars, vals


@dataclass
class MomentResult:
    q: int
    psi: int
    empirical: float
    main_term: float
    imag_residue: float
    values: np.ndarray | None = field(default=None, repr=False)

    @property
    def ratio(self) -> float:
        return self.empirical / self.main_term

    def as_row(self) -> dict:
        return dict(q=self.q, psi=self.psi, empirical=self.empirical, main_term=self.main_term,
                    ratio=self.ratio, imag_residue=self.imag_residue)


def moment_experiment(f1: Newform, f2: Newform, q: int, lv: LValues | None = None,
                      convention: Convention = "derived", keep_values: bool = False) -> MomentResult:
    """The moment over primitive characters mod q against 2/zeta(2) psi(q) M(f1, f2, q)."""
    if q % 4 == 2:
        raise DomainError(f"q={q} is inadmissible (no primitive characters)")
    _, vals = moment_values(f1, f2, q)
    imag = float(np.max(np.abs(vals.imag) / (1 + np.abs(vals)))) if len(vals) else 0.0
    if imag > 1e-6:
        raise AuditFailure(f"non-real central product at q={q}: relative imaginary part {imag}")
    empirical = math.fsum(vals.real)
    mt = main_term_params(f1, f2, q, lv, convention)
    main = 2 / ZETA2 * psi_count(q) * mt.M(q, convention)
    return MomentResult(q, psi_count(q), empirical, main, imag, vals.real.copy() if keep_values else None)


# ---------------------------------------------------------------------------
# diagonal term


def diagonal_term(f1: Newform, f2: Newform, q: int, W: WeightW | None = None) -> float:
    """2 psi(q) sum over (n, q) = 1 of lam1(n) lam2(n) W(n^2/q^2)/n."""
    W = W or _weight(f1.weight, f2.weight)
    n_max = int(q * math.sqrt(w_support(f1.weight, f2.weight))) + 1
    lam1 = _coprime_lam(f1, q, n_max)
    lam2 = _coprime_lam(f2, q, n_max)
    n = np.arange(1, n_max + 1)
    terms = lam1[n] * lam2[n] / n * weight_w(W, (n / q) ** 2)
    return 2 * psi_count(q) * math.fsum(terms)


def diagonal_closed_form(f1: Newform, f2: Newform, q: int, lv: LValues | None = None,
                         convention: Convention = "derived") -> float:
    mt = main_term_params(f1, f2, q, lv, convention)
    return 2 / ZETA2 * psi_count(q) * mt.M(q, convention)


def diagonal_report(f1: Newform, f2: Newform, q: int, lv: LValues | None = None,
                    convention: Convention = "derived") -> BoundReport:
    """Relative deviation of the diagonal term from its closed form against q^-1/2 (log q)^2."""
    d = diagonal_term(f1, f2, q)
    closed = diagonal_closed_form(f1, f2, q, lv, convention)
    dev = abs(d - closed) / abs(closed)
    return BoundReport("diagonal", dev, q**-0.5 * math.log(q) ** 2,
                       dict(q=q, k1=f1.weight, k2=f2.weight, diagonal=d, closed_form=closed))


# ---------------------------------------------------------------------------
# shifted convolution sums


def shifted_convolution(f1: Newform, f2: Newform, l1: int, l2: int, h: int, N: float, M: float,
                        V1: Callable, V2: Callable) -> float:
    """Sum over l1 n - l2 m = h of lam1(m) lam2(n) V1(l2 m/M) V2(l1 n/N), for V1, V2 supported in [1, 2]."""
    m = np.arange(max(1, math.ceil(M / l2)), math.floor(2 * M / l2) + 1)
    top = l2 * m + h
    m = m[top % l1 == 0]
    n = (l2 * m + h) // l1
    keep = (n >= 1) & (l1 * n <= 2 * N) & (l1 * n >= N)
    m, n = m[keep], n[keep]
    if len(m) == 0:
        return 0.0
    need = max(int(m.max()), int(n.max()))
    if need > min(f1.n_max, f2.n_max):
        raise TableExhausted(f"shifted sum needs eigenvalues up to {need}")
    vals = f1.lam[m] * f2.lam[n] * V1(l2 * m / M) * V2(l1 * n / N)
    return math.fsum(vals)


def average_shifted(f1: Newform, f2: Newform, l1: int, l2: int, d: int, N: float, M: float,
                    V1: Callable, V2: Callable) -> float:
    """Sum over r >= 1 of the shifted sum at h = r d (nonzero only for r d <= 2N)."""
    return math.fsum(
        shifted_convolution(f1, f2, l1, l2, r * d, N, M, V1, V2) for r in range(1, int(2 * N // d) + 2)
    )


def individual_bound_report(value: float, N: float, M: float, eps_power: float = 2.0, **meta) -> BoundReport:
    rhs = (N + M) ** (0.5 + THETA) * log_proxy(N * M, eps_power)
    return BoundReport("indivbound", abs(value), rhs, dict(N=N, M=M, **meta))


def average_bound_report(value: float, d: int, N: float, M: float, eps_power: float = 2.0, **meta) -> BoundReport:
    """Against N/d^1/2 + N^5/4 M^1/4/d + N^3/4 M^1/4/d^1/4 + N M^1/2/d^3/4 (needs N >= 20M)."""
    if N < 20 * M:
        raise DomainError("the averaged bound needs N >= 20 M")
    rhs = (N / d**0.5 + N**1.25 * M**0.25 / d + N**0.75 * M**0.25 / d**0.25 + N * M**0.5 / d**0.75)
    rhs *= log_proxy(d * N, eps_power)
    return BoundReport("average-shifted", abs(value), rhs, dict(d=d, N=N, M=M, **meta))
