"""Dirichlet characters modulo q.

A character is stored as an exponent vector against fixed generators of the
unit group.  Values are integer exponents of a root of unity of order L (the
lcm of the generator orders), converted to complex numbers only on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .arith_core import AuditFailure, crt, divisors, euler_phi, factorize, mobius


@dataclass(frozen=True)
class _Component:
    p: int
    e: int
    generator: int  # generator of the cyclic factor, lifted mod q by CRT
    order: int
    log: np.ndarray  # discrete log mod p^e of each residue mod p^e (-1 on non-units)


def _primitive_root(p: int, e: int) -> int:
    n = p**e
    phi = (p - 1) * p ** (e - 1)
    prime_factors = factorize(phi).primes
    for g in range(2, n):
        if g % p and all(pow(g, phi // r, n) != 1 for r in prime_factors):
            return g
    return 1


def _cyclic_log(g: int, order: int, n: int) -> np.ndarray:
    log = np.full(n, -1, dtype=np.int64)
    x = 1
    for k in range(order):
        log[x] = k
        x = x * g % n
    return log


class CharacterGroup:
    """The group of Dirichlet characters mod q with a fixed generator basis."""

    def __init__(self, q: int):
        if q < 1:
            raise ValueError("modulus must be positive")
        self.q = q
        comps: list[_Component] = []
        pps = factorize(q).factors
        moduli = [p**e for p, e in pps]

        def lift(residue: int, idx: int) -> int:
            return crt([residue if j == idx else 1 for j in range(len(moduli))], moduli)

        for idx, (p, e) in enumerate(pps):
            n = p**e
            if p == 2:
                if e == 1:
                    continue
                log_m1 = np.full(n, -1, dtype=np.int64)
                log_5 = np.full(n, -1, dtype=np.int64)
                ord5 = 2 ** (e - 2) if e >= 3 else 1
                x = 1
                for k in range(ord5):
                    log_m1[x] = 0
                    log_5[x] = k
                    log_m1[(-x) % n] = 1
                    log_5[(-x) % n] = k
                    x = x * 5 % n
                comps.append(_Component(2, e, lift(n - 1, idx), 2, log_m1))
                if e >= 3:
                    comps.append(_Component(2, e, lift(5, idx), ord5, log_5))
            else:
                g = _primitive_root(p, e)
                order = (p - 1) * p ** (e - 1)
                comps.append(_Component(p, e, lift(g, idx), order, _cyclic_log(g, order, n)))
        self.components = comps
        self.orders = tuple(c.order for c in comps)
        self.exponent_order = math.lcm(*self.orders) if comps else 1

    @property
    def size(self) -> int:
        return math.prod(self.orders)

    @cached_property
    def log_matrix(self) -> np.ndarray:
        """logs[j, n] = discrete log of n against generator j (-1 on non-units)."""
        n = np.arange(self.q, dtype=np.int64)
        if not self.components:
            return np.zeros((0, self.q), dtype=np.int64)
        rows = []
        for c in self.components:
            rows.append(c.log[n % (c.p**c.e)])
        logs = np.vstack(rows)
        units = np.gcd(n, self.q) == 1
        logs[:, ~units] = -1
        return logs

    def characters(self) -> list["DirichletCharacter"]:
        return [DirichletCharacter(self, ex) for ex in np.ndindex(*self.orders)] if self.orders else [
            DirichletCharacter(self, ())
        ]


class DirichletCharacter:
    def __init__(self, group: CharacterGroup, exponents: tuple[int, ...]):
        self.group = group
        self.exponents = tuple(int(a) % o for a, o in zip(exponents, group.orders))

    def __repr__(self) -> str:
        return f"DirichletCharacter(q={self.group.q}, exponents={self.exponents}, conductor={self.conductor})"

    @property
    def q(self) -> int:
        return self.group.q

    @cached_property
    def value_exponents(self) -> np.ndarray:
        """chi(n) = zeta_L^{v[n]} with L = group.exponent_order; v[n] = -1 off units."""
        g = self.group
        L = g.exponent_order
        v = np.zeros(g.q, dtype=np.int64)
        logs = g.log_matrix
        for j, (a, o) in enumerate(zip(self.exponents, g.orders)):
            v = v + a * (L // o) * logs[j]
        v %= L
        units = np.gcd(np.arange(g.q), g.q) == 1
        v[~units] = -1
        return v

    @cached_property
    def values(self) -> np.ndarray:
        v = self.value_exponents
        L = self.group.exponent_order
        out = np.exp(2j * np.pi * v / L)
        out[v < 0] = 0
        return out

    def __call__(self, n: int) -> complex:
        return complex(self.values[n % self.q])

    @cached_property
    def order(self) -> int:
        return math.lcm(*(o // math.gcd(a, o) for a, o in zip(self.exponents, self.group.orders))) if self.exponents else 1

    def _trivial_on(self, residues: list[int]) -> bool:
        v = self.value_exponents
        return all(v[r % self.q] == 0 for r in residues)

    @cached_property
    def conductor(self) -> int:
        """Product over p | q of p^f, f minimal with chi trivial on 1 + p^f Z_p units."""
        cond = 1
        moduli = [p**e for p, e in factorize(self.q).factors]
        for idx, (p, e) in enumerate(factorize(self.q).factors):
            def local(x: int) -> int:
                return crt([x if j == idx else 1 for j in range(len(moduli))], moduli)

            n = p**e
            units = [x for x in range(1, n) if x % p]
            if self._trivial_on([local(x) for x in units]):
                continue
            f = e
            for t in range(1, e + 1):
                if p == 2 and t == 1:
                    continue
                if self._trivial_on([local((1 + p**t) % n)]):
                    f = t
                    break
            cond *= p**f
        return cond

    @property
    def is_primitive(self) -> bool:
        return self.conductor == self.q

    def conjugate(self) -> "DirichletCharacter":
        return DirichletCharacter(self.group, tuple(-a for a in self.exponents))


@lru_cache(maxsize=32)
def character_group(q: int) -> CharacterGroup:
    return CharacterGroup(q)


def enumerate_characters(q: int) -> list[DirichletCharacter]:
    return character_group(q).characters()


def primitive_characters(q: int) -> list[DirichletCharacter]:
    return [chi for chi in enumerate_characters(q) if chi.is_primitive]


def char_eval(chi: DirichletCharacter, n: int) -> complex:
    return chi(n)


def psi_count(q: int) -> int:
    return sum(euler_phi(d) * mobius(q // d) for d in divisors(q))


def orthogonality_sum(q: int, n: int) -> int:
    """Sum of chi(n) over primitive chi mod q, checked against the divisor formula."""
    if math.gcd(n, q) != 1:
        raise ValueError(f"n={n} must be coprime to q={q}")
    g = math.gcd(n - 1, q)
    formula = sum(euler_phi(d) * mobius(q // d) for d in divisors(q) if g % d == 0)
    # exact via exponent counts: the sum of zeta_L^v over a multiset is an integer here
    direct = sum(chi(n) for chi in primitive_characters(q))
    if abs(direct - formula) > 1e-8 * max(1, euler_phi(q)):
        raise AuditFailure(f"orthogonality mismatch at q={q}, n={n}: {direct} vs {formula}")
    return formula


def minimal_period(chi: DirichletCharacter) -> int:
    """Smallest d | q such that chi is constant on units in each class mod d (brute force)."""
    q = chi.q
    if q == 1:
        return 1
    v = chi.value_exponents
    units = [n for n in range(q) if math.gcd(n, q) == 1]
    for d in divisors(q):
        if all(v[n] == v[1] for n in units if n % d == 1 % d):
            return d
    return q


def character_matrix(chars: list[DirichletCharacter]) -> np.ndarray:
    return np.vstack([chi.values for chi in chars]) if chars else np.zeros((0, 0), dtype=complex)
