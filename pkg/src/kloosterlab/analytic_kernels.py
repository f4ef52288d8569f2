"""Special functions and analytic devices: Bessel J, the weight W, Hankel
transforms, a Voronoi-summation residual, and a Farey-arc approximation of
the unit interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Mapping

import mpmath
import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import jv, kve, loggamma

from .arith_core import DomainError, euler_phi, mod_inverse
from .hecke_forms import Newform, TableExhausted

# ---------------------------------------------------------------------------
# Bessel functions


def bessel_switch_point(nu: int) -> float:
    """Argument above which the Hankel asymptotic expansion is used."""
    return max(30.0, nu * nu / 2.0)


def _bessel_series(nu: int, x: float) -> float:
    # terms reach size ~e^x before cancelling, so carry enough extra digits
    dps = 20 + int(x * 0.45) + 5
    with mpmath.workdps(dps):
        z = mpmath.mpf(x) / 2
        z2 = -z * z
        term = z**nu / mpmath.factorial(nu)
        total = term
        k = 0
        while True:
            k += 1
            term = term * z2 / (k * (k + nu))
            total += term
            if abs(term) < abs(total) * mpmath.mpf(10) ** (-(dps - 5)) and k > x:
                break
        return float(total)


def _bessel_asymptotic(nu: int, x: float) -> tuple[float, float]:
    """Hankel expansion truncated at its smallest term; returns (value, size of that term)."""
    mu = 4.0 * nu * nu
    terms = [1.0]
    t = 1.0
    k = 0
    while True:
        k += 1
        t_next = t * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(t_next) >= abs(t) and k > 1 and (2 * k - 1) ** 2 > mu:
            break
        t = t_next
        terms.append(t)
        if abs(t) < 1e-18 or k > 400:
            break
    P = sum(terms[i] * (-1) ** (i // 2) for i in range(0, len(terms), 2))
    Q = sum(terms[i] * (-1) ** (i // 2) for i in range(1, len(terms), 2))
    w = x - nu * math.pi / 2 - math.pi / 4
    val = math.sqrt(2.0 / (math.pi * x)) * (P * math.cos(w) - Q * math.sin(w))
    return val, abs(terms[-1]) * math.sqrt(2.0 / (math.pi * x))


def bessel_j(nu: int, x: float) -> float:
    """J_nu(x) for integer nu >= 0 and x >= 0."""
    if nu < 0 or int(nu) != nu:
        raise DomainError("order must be a nonnegative integer")
    if x < 0:
        raise DomainError("argument must be nonnegative")
    nu = int(nu)
    if x == 0:
        return 1.0 if nu == 0 else 0.0
    if x > bessel_switch_point(nu):
        val, err = _bessel_asymptotic(nu, x)
        if err < 1e-12:
            return val
    return _bessel_series(nu, x)


# ---------------------------------------------------------------------------
# the weight W(x) of the approximate functional equation


@dataclass(frozen=True)
class WeightW:
    k1: int
    k2: int
    T_mellin: float = 40.0
    sigma: float = 2.0
    step: float = 0.02

    def _gamma_ratio(self, s: np.ndarray) -> np.ndarray:
        a, b = self.k1 / 2, self.k2 / 2
        lg = loggamma(a + s) + loggamma(b + s) - loggamma(a) - loggamma(b) - 2 * s * math.log(2 * math.pi)
        return np.exp(lg)

    def _left_abscissa(self) -> float:
        return -min(self.sigma, min(self.k1, self.k2) / 2 - 0.5)

    def _integrate(self, x: np.ndarray, T: float, abscissa: float) -> np.ndarray:
        t = np.arange(self.step / 2, T, self.step)
        s = abscissa + 1j * t
        g = self._gamma_ratio(s) / s
        logx = np.log(x)[:, None]
        vals = (g[None, :] * np.exp(-s[None, :] * logx)).real
        # integrand is conjugate-symmetric in t; midpoint rule on (0, T)
        return vals.sum(axis=1) * self.step / math.pi

    def tail_estimate(self, x: np.ndarray, T: float, abscissa: float | None = None) -> float:
        c = self.sigma if abscissa is None else abscissa
        s = c + 1j * T
        mag = abs(self._gamma_ratio(np.array([s]))[0] / s)
        return float(mag * np.max(np.asarray(x, dtype=float) ** -c) / math.pi)

    def __call__(self, x) -> np.ndarray | float:
        return weight_w(self, x)

    @cached_property
    def interpolant(self) -> "_WInterp":
        return _WInterp(self)


def weight_w(W: WeightW, x) -> np.ndarray | float:
    """W(x) by a truncated Mellin inversion.

    For x >= 1 the line Re s = sigma is used directly.  For x < 1 that line
    loses digits to cancellation, so the contour is moved left past the pole
    at s = 0 and W(x) = 1 + (integral on the left line).
    """
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise DomainError("W needs x > 0")
    out = np.empty_like(xs)
    small = xs < 1
    for mask, abscissa, offset in ((~small, W.sigma, 0.0), (small, W._left_abscissa(), 1.0)):
        if not mask.any():
            continue
        part = xs[mask]
        T = W.T_mellin
        while W.tail_estimate(part, T, abscissa) > 1e-11:
            T *= 1.5
            if T > 5000:
                raise DomainError("Mellin truncation did not converge")
        pieces = np.array_split(part, max(1, len(part) // 2000))
        out[mask] = offset + np.concatenate([W._integrate(c, T, abscissa) for c in pieces])
    return float(out[0]) if scalar else out


class _WInterp:
    """Cubic spline of W in log x; W is 1 to machine precision below x = 1e-6."""

    X_MIN = 1e-6

    def __init__(self, W: WeightW, x_max: float = 60.0, nodes_per_unit: int = 120):
        u = np.linspace(math.log(self.X_MIN), math.log(x_max), int((math.log(x_max) - math.log(self.X_MIN)) * nodes_per_unit))
        self.x_max = x_max
        self.spline = CubicSpline(u, weight_w(W, np.exp(u)))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        big = x > self.x_max
        mid = (x >= self.X_MIN) & ~big
        out[mid] = self.spline(np.log(x[mid]))
        out[big] = 0.0
        return out


def weight_w_bessel_k(k1: int, k2: int, x: float) -> float:
    """W(x) from the real-variable form: the integral over t > x of the inverse
    Mellin transform of the gamma ratio, 2 y^{(a+b)/2} K_{a-b}(2 sqrt y)/(Gamma(a)Gamma(b)), y = 4 pi^2 t."""
    from scipy.integrate import quad

    a, b = k1 / 2, k2 / 2
    log_norm = math.log(2) - math.lgamma(a) - math.lgamma(b)

    def integrand(t: float) -> float:
        y = 4 * math.pi**2 * t
        z = 2 * math.sqrt(y)
        return math.exp(log_norm + (a + b) / 2 * math.log(y) - z) * kve(a - b, z) / t

    # the integrand peaks near t = ((a+b)/2)^2 / (4 pi^2) and decays like exp(-4 pi sqrt t)
    peak = ((a + b) / 2) ** 2 / (4 * math.pi**2)
    pts = sorted({x, max(x, peak / 4), max(x, peak), max(x, 4 * peak), max(x, 16 * peak)})
    total = 0.0
    for lo, hi in zip(pts, pts[1:]):
        total += quad(integrand, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    total += quad(integrand, pts[-1], np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return total


# ---------------------------------------------------------------------------
# Hankel transforms and Voronoi summation


def smooth_bump(x, flatness: float = 2.0) -> np.ndarray:
    """exp(-1/(1-t^2)^flatness) with t = 2x - 3: smooth, supported in [1, 2]."""
    x = np.asarray(x, dtype=float)
    t = 2 * x - 3
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2) ** flatness)
    return out


def _nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ws = np.polynomial.legendre.leggauss(n)
    return 1.5 + xs / 2, ws / 2


def hankel_transform(V: Callable, kappa: int, y, nodes: int | None = None):
    """2 pi i^kappa * integral_1^2 V(x) J_{kappa-1}(4 pi sqrt(x y)) dx (Gauss-Legendre)."""
    scalar = np.ndim(y) == 0
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(ys < 0):
        raise DomainError("y must be nonnegative")
    out = np.empty(len(ys), dtype=complex)
    if nodes is not None:
        out[:] = _hankel_block(V, kappa, ys, nodes)
        return complex(out[0]) if scalar else out
    # the integrand oscillates about sqrt(y) times, so size the rule per block of y
    order = np.argsort(ys, kind="stable")
    for block in np.array_split(order, max(1, len(ys) // 2000)):
        n = int(100 + 4 * math.sqrt(max(ys[block].max(), 1.0)))
        out[block] = _hankel_block(V, kappa, ys[block], n)
    return complex(out[0]) if scalar else out


def _hankel_block(V: Callable, kappa: int, ys: np.ndarray, n: int) -> np.ndarray:
    x, w = _nodes(n)
    Vw = np.asarray(V(x), dtype=float) * w
    out = np.empty(len(ys), dtype=complex)
    chunk = max(1, 4_000_000 // n)
    for i in range(0, len(ys), chunk):
        J = jv(kappa - 1, 4 * np.pi * np.sqrt(np.outer(ys[i : i + chunk], x)))
        out[i : i + chunk] = 2 * np.pi * (1j**kappa) * (J @ Vw)
    return out


@lru_cache(maxsize=64)
def _dual_side(V: Callable, kappa: int, scale: float, n_max: int) -> np.ndarray:
    """V-ring(n * scale) for 1 <= n <= n_max, shared by every b with the same c and N."""
    vals = hankel_transform(V, kappa, np.arange(1, n_max + 1) * scale)
    vals.flags.writeable = False
    return vals


def hankel_transform_reference(V: Callable, kappa: int, y: float) -> complex:
    """Same transform by adaptive quadrature with the package's own Bessel routine."""
    from scipy.integrate import quad

    def f(x):
        return float(V(np.array([x]))[0]) * bessel_j(kappa - 1, 4 * math.pi * math.sqrt(x * y))

    val, _ = quad(f, 1, 2, limit=400, epsabs=1e-13, epsrel=1e-12)
    return 2 * math.pi * (1j**kappa) * val


@lru_cache(maxsize=64)
def hankel_cutoff(V: Callable, kappa: int, threshold: float = 1e-10) -> float:
    """A y beyond which |V-ring(y)| stays below threshold (checked on a dense grid up to 4x)."""
    y = 10.0
    while True:
        grid = np.linspace(y, 4 * y, 400)
        if np.max(np.abs(hankel_transform(V, kappa, grid))) < threshold:
            return y
        y *= 1.5
        if y > 1e7:
            raise DomainError("Hankel transform does not decay below threshold")


@dataclass
class VoronoiResult:
    lhs: complex
    rhs: complex
    terms: int

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def voronoi_residual(f: Newform, b: int, c: int, V: Callable, N: float, threshold: float = 1e-10,
                     cutoff: float | None = None) -> VoronoiResult:
    """Both sides of the level-one Voronoi formula with additive twist e(bn/c)."""
    if math.gcd(b, c) != 1:
        raise DomainError("b and c must be coprime")
    kappa = f.weight
    n_lhs = np.arange(1, int(2 * N) + 1)
    lam = f.lam
    if n_lhs[-1] > f.n_max:
        raise TableExhausted("table too short for the left side")
    lhs = complex(np.sum(lam[n_lhs] * np.exp(2j * np.pi * (b * n_lhs % c) / c) * V(n_lhs / N)))
    Y = cutoff if cutoff is not None else hankel_cutoff(V, kappa, threshold)
    n_max = int(Y * c * c / N) + 1
    if n_max > f.n_max:
        raise TableExhausted(f"right side needs coefficients up to {n_max}")
    n = np.arange(1, n_max + 1)
    bbar = mod_inverse(b, c) if c > 1 else 0
    vr = _dual_side(V, kappa, N / c**2, n_max)
    rhs = complex(N / c * np.sum(lam[n] * np.exp(-2j * np.pi * (bbar * n % c) / c) * vr))
    return VoronoiResult(lhs, rhs, n_max)


# ---------------------------------------------------------------------------
# Farey-arc approximation of [0, 1]


@dataclass(frozen=True)
class CircleApprox:
    Q: int
    delta: float
    weights: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.Q**-2 * (1 - 1e-12) <= self.delta <= self.Q**-1 * (1 + 1e-12)):
            raise DomainError("delta must lie in [Q^-2, Q^-1]")
        for c, w in self.weights.items():
            if not (self.Q <= c <= 2 * self.Q) or not (0 <= w <= 1):
                raise DomainError("weights must lie in [0, 1] and be supported on [Q, 2Q]")

    @classmethod
    def uniform(cls, Q: int, delta: float) -> "CircleApprox":
        return cls(Q, delta, {c: 1.0 for c in range(Q, 2 * Q + 1)})

    @property
    def Lambda(self) -> float:
        return float(sum(w * euler_phi(c) for c, w in self.weights.items()))


def _arc_events(ca: CircleApprox) -> tuple[np.ndarray, np.ndarray]:
    Lam = ca.Lambda
    if Lam <= 0:
        raise DomainError("empty weight")
    h = 1.0 / (2 * ca.delta * Lam)
    pos, amt = [], []
    for c, w in sorted(ca.weights.items()):
        if w == 0:
            continue
        d = np.arange(c)
        d = d[np.gcd(d, c) == 1]
        centres = d / c
        lo = centres - ca.delta
        hi = centres + ca.delta
        for a, b in zip(lo, hi):
            # wrap mod 1 onto [0, 1)
            segs = [(a, b)]
            if a < 0:
                segs = [(0.0, b), (1 + a, 1.0)]
            elif b > 1:
                segs = [(a, 1.0), (0.0, b - 1)]
            for s0, s1 in segs:
                pos += [s0, s1]
                amt += [w * h, -w * h]
    return np.asarray(pos), np.asarray(amt)


def jutila_approximation(ca: CircleApprox, eps_power: float = 2.0) -> tuple[float, float, float]:
    """(integral of (1 - I~)^2 over [0,1], the bound (log Q)^p Q^2/(delta Lambda^2), integral of I~)."""
    pos, amt = _arc_events(ca)
    order = np.argsort(pos, kind="stable")
    pos, amt = pos[order], amt[order]
    pts = np.concatenate([[0.0], pos, [1.0]])
    level = np.concatenate([[0.0], np.cumsum(amt)])
    widths = np.diff(pts)
    l2 = math.fsum((1 - level) ** 2 * widths)
    mass = math.fsum(level * widths)
    Lam = ca.Lambda
    bound = math.log(ca.Q) ** eps_power * ca.Q**2 / (ca.delta * Lam**2)
    return l2, bound, mass
