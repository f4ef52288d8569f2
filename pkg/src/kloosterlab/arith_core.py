"""Integer and modular arithmetic used throughout the package.

Covers factorization, modular inverses, Jacobi symbols, the canonical
p-adic square-root branch, quadratic Gauss-sum signs, and a few classical
multiplicative functions.  Everything here is exact; floats only appear in
:func:`e` and :func:`gauss_sign`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

import flint
import numpy as np

MAX_INT = 2**63


class DomainError(ValueError):
    """Input lies outside the mathematical domain of an operation."""


class NotCoprimeError(DomainError):
    pass


class NonResidueError(DomainError):
    pass


class AuditFailure(AssertionError):
    """Two independent computations of the same quantity disagree."""


# ---------------------------------------------------------------------------
# factorization


@dataclass(frozen=True)
class Factorization:
    value: int
    factors: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        prod = 1
        last = 1
        for p, e in self.factors:
            if p <= last or e < 1:
                raise ValueError("factors must have increasing primes and positive exponents")
            last = p
            prod *= p**e
        if prod != self.value:
            raise ValueError("factors do not multiply out to value")

    @property
    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]

    @property
    def omega(self) -> int:
        return len(self.factors)

    @property
    def rad(self) -> int:
        return math.prod(self.primes)

    @property
    def square_part(self) -> int:
        """Largest n0 with n0**2 dividing the value."""
        return math.prod(p ** (e // 2) for p, e in self.factors)

    def ord(self, p: int) -> int:
        for q, e in self.factors:
            if q == p:
                return e
        return 0

    def part_supported_on(self, m: int) -> int:
        """The largest divisor of the value built only from primes dividing m."""
        out = 1
        for p, e in self.factors:
            if m % p == 0:
                out *= p**e
        return out

    def is_cube_free(self) -> bool:
        return all(e < 3 for _, e in self.factors)

    def divisors(self) -> list[int]:
        divs = [1]
        for p, e in self.factors:
            divs = [d * p**k for d in divs for k in range(e + 1)]
        return sorted(divs)

    def prime_powers(self) -> list[int]:
        return [p**e for p, e in self.factors]


@lru_cache(maxsize=65536)
def factorize(n: int) -> Factorization:
    n = int(n)
    if n < 1:
        raise DomainError(f"factorize needs n >= 1, got {n}")
    if n > MAX_INT:
        raise OverflowError(f"factorize supports n <= 2**63, got {n}")
    if n == 1:
        return Factorization(1, ())
    pairs = sorted((int(p), int(e)) for p, e in flint.fmpz(n).factor())
    return Factorization(n, tuple(pairs))


def ord_p(n: int, p: int) -> int:
    """p-adic valuation; ord_p(0) is reported as a large sentinel."""
    if n == 0:
        return 10**9
    v = 0
    n = abs(n)
    while n % p == 0:
        n //= p
        v += 1
    return v


def coprime_part_gcd(n: int, m: int) -> int:
    """(n, m^infinity): the part of n supported on the primes of m."""
    return factorize(n).part_supported_on(m)


def is_prime(n: int) -> bool:
    return n >= 2 and bool(flint.fmpz(n).is_prime())


# ---------------------------------------------------------------------------
# classical multiplicative functions


def euler_phi(n: int) -> int:
    out = 1
    for p, e in factorize(n).factors:
        out *= (p - 1) * p ** (e - 1)
    return out


def mobius(n: int) -> int:
    f = factorize(n)
    if any(e > 1 for _, e in f.factors):
        return 0
    return -1 if f.omega % 2 else 1


def num_divisors(n: int) -> int:
    return math.prod(e + 1 for _, e in factorize(n).factors)


def divisors(n: int) -> list[int]:
    return factorize(n).divisors()


def divisor_count_table(n_max: int) -> np.ndarray:
    """d(n) for 0 <= n <= n_max (d(0) set to 0)."""
    d = np.zeros(n_max + 1, dtype=np.int64)
    for k in range(1, n_max + 1):
        d[k::k] += 1
    return d


def mobius_table(n_max: int) -> np.ndarray:
    mu = np.ones(n_max + 1, dtype=np.int64)
    mu[0] = 0
    sieve = np.ones(n_max + 1, dtype=bool)
    for p in range(2, n_max + 1):
        if not sieve[p]:
            continue
        sieve[p * p :: p] = False
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
    return mu


def primes_up_to(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(n**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve)


# ---------------------------------------------------------------------------
# modular arithmetic


def mod_inverse(a: int, m: int) -> int:
    if m < 1:
        raise DomainError("modulus must be positive")
    if m == 1:
        return 0
    try:
        return pow(int(a), -1, int(m))
    except ValueError:
        raise NotCoprimeError(f"{a} is not invertible modulo {m}") from None


def kronecker_symbol(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd positive n, by quadratic reciprocity."""
    if n <= 0 or n % 2 == 0:
        raise DomainError(f"Jacobi symbol needs odd positive n, got {n}")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def crt(residues: Iterable[int], moduli: Iterable[int]) -> int:
    x, m = 0, 1
    for r, n in zip(residues, moduli):
        t = ((r - x) * mod_inverse(m, n)) % n
        x += m * t
        m *= n
    return x % m


def inverse_table(q: int) -> np.ndarray:
    """inv[x] = x^{-1} mod q for units x, 0 elsewhere."""
    return _inverse_table(int(q)).copy()


@lru_cache(maxsize=64)
def _inverse_table(q: int) -> np.ndarray:
    inv = np.zeros(q, dtype=np.int64)
    if q == 1:
        return inv
    xs = np.arange(q, dtype=np.int64)
    units = np.gcd(xs, q) == 1
    # Fermat-Euler exponentiation, vectorized; q < 2**31 keeps products in int64.
    if q >= 2**31:
        raise OverflowError("inverse tables limited to q < 2**31")
    exp = euler_phi(q) - 1
    base = xs[units] % q
    acc = np.ones_like(base)
    while exp:
        if exp & 1:
            acc = acc * base % q
        base = base * base % q
        exp >>= 1
    inv[units] = acc
    inv.flags.writeable = False
    return inv


def unit_mask(q: int) -> np.ndarray:
    return np.gcd(np.arange(q, dtype=np.int64), q) == 1


def e(x: float) -> complex:
    """exp(2 pi i x), reducing x mod 1 first."""
    t = 2.0 * math.pi * (x - math.floor(x))
    return complex(math.cos(t), math.sin(t))


def e_frac(num: int, den: int) -> complex:
    """exp(2 pi i num/den) with exact reduction of the numerator."""
    t = 2.0 * math.pi * ((num % den) / den)
    return complex(math.cos(t), math.sin(t))


def e_array(num: np.ndarray, den: int) -> np.ndarray:
    t = (2.0 * np.pi / den) * (np.asarray(num, dtype=np.int64) % den)
    return np.cos(t) + 1j * np.sin(t)


# ---------------------------------------------------------------------------
# prime-power moduli and square roots


@dataclass(frozen=True)
class PrimePowerModulus:
    p: int
    s: int

    def __post_init__(self) -> None:
        if self.p == 2 or not is_prime(self.p):
            raise DomainError(f"need an odd prime, got {self.p}")
        if self.s < 1:
            raise DomainError(f"exponent must be >= 1, got {self.s}")

    @property
    def q(self) -> int:
        return self.p**self.s

    def at(self, s: int) -> "PrimePowerModulus":
        return PrimePowerModulus(self.p, s)


def legendre(a: int, p: int) -> int:
    return kronecker_symbol(a, p)


def square_classes(p: int) -> np.ndarray:
    """is_sq[r] for r mod p (False at 0)."""
    is_sq = np.zeros(p, dtype=bool)
    x = np.arange(1, p, dtype=np.int64)
    is_sq[x * x % p] = True
    return is_sq


@dataclass(frozen=True)
class SqrtBranch:
    """A choice of square root mod p for every nonzero square mod p."""

    p: int
    choice: tuple[int, ...] = field(repr=False)  # indexed by residue; 0 where undefined

    def __post_init__(self) -> None:
        for r, c in enumerate(self.choice):
            if c and c * c % self.p != r:
                raise DomainError(f"choice({r}) = {c} is not a square root mod {self.p}")

    @classmethod
    def default(cls, p: int) -> "SqrtBranch":
        """Pick the root lying in [1, (p-1)/2]."""
        table = [0] * p
        for x in range(1, (p - 1) // 2 + 1):
            table[x * x % p] = x
        return cls(p, tuple(table))

    @classmethod
    def from_function(cls, p: int, fn: Callable[[int], int]) -> "SqrtBranch":
        is_sq = square_classes(p)
        table = [0] * p
        for r in range(1, p):
            if is_sq[r]:
                table[r] = fn(r) % p
        return cls(p, tuple(table))

    def flipped(self, residues: Iterable[int] | None = None) -> "SqrtBranch":
        """Negate the choice on the given residues (all squares if None)."""
        table = list(self.choice)
        targets = range(1, self.p) if residues is None else residues
        for r in targets:
            r %= self.p
            if table[r]:
                table[r] = self.p - table[r]
        return SqrtBranch(self.p, tuple(table))

    def __call__(self, r: int) -> int:
        c = self.choice[r % self.p]
        if not c:
            raise NonResidueError(f"{r} is not a nonzero square mod {self.p}")
        return c


def padic_sqrt(x: int, q: PrimePowerModulus, branch: SqrtBranch | None = None) -> int:
    p = q.p
    branch = branch or SqrtBranch.default(p)
    if branch.p != p:
        raise DomainError("branch prime does not match modulus")
    if x % p == 0:
        raise NotCoprimeError(f"{x} is not a unit mod {p}")
    if kronecker_symbol(x, p) != 1:
        raise NonResidueError(f"{x} is not a square mod {p}")
    u = branch(x)
    mod = p
    # Newton iteration doubles the precision each step.
    while mod < q.q:
        mod = min(mod * mod, q.q)
        u = (u - (u * u - x) * mod_inverse(2 * u, mod)) % mod
    return u % q.q


def sqrt_table(q: PrimePowerModulus, branch: SqrtBranch | None = None) -> np.ndarray:
    """root[x] = x_{1/2} mod q for units x that are squares, -1 elsewhere."""
    branch = branch or SqrtBranch.default(q.p)
    return _sqrt_table(q.p, q.s, branch.choice).copy()


@lru_cache(maxsize=64)
def _sqrt_table(p: int, s: int, choice: tuple[int, ...]) -> np.ndarray:
    Q = p**s
    root = np.full(Q, -1, dtype=np.int64)
    xs = np.arange(Q, dtype=np.int64)
    xs = xs[xs % p != 0]
    sq = xs * xs % Q
    ch = np.asarray(choice, dtype=np.int64)
    keep = (xs % p) == ch[sq % p]
    root[sq[keep]] = xs[keep]
    root.flags.writeable = False
    return root


def gauss_sign(A: int, q: PrimePowerModulus) -> complex:
    """tau(A, p^s) with sum_x e(A x^2 / p^s) = p^{s/2} tau(A, p^s)."""
    p, s = q.p, q.s
    if A % p == 0:
        raise NotCoprimeError(f"{A} shares a factor with {p}")
    if s % 2 == 0:
        return 1 + 0j
    leg = kronecker_symbol(A, p)
    return complex(leg, 0) if p % 4 == 1 else complex(0, leg)


def quadratic_gauss_sum(A: int, Q: int) -> complex:
    x = np.arange(Q, dtype=np.int64)
    return complex(e_array(A * x * x % Q, Q).sum())
