"""Level-one Hecke eigenforms: exact Fourier coefficients and normalized eigenvalues.

Each supported weight has a one-dimensional cusp space, so the eigenform is
Delta times a product of Eisenstein series.  Series arithmetic is done with
exact integer polynomials from python-flint.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import flint
import numpy as np

from .arith_core import DomainError, divisors, mobius, AuditFailure

SUPPORTED_WEIGHTS = (12, 16, 18, 20, 22, 26)
# number of E4 and E6 factors multiplying Delta
_EISENSTEIN_FACTORS = {12: (0, 0), 16: (1, 0), 18: (0, 1), 20: (2, 0), 22: (1, 1), 26: (2, 1)}

CACHE_MAGIC = b"KLCOEF"
CACHE_VERSION = 1


class TableExhausted(DomainError):
    """A coefficient beyond the computed range was requested."""


@dataclass(frozen=True)
class Newform:
    weight: int
    n_max: int
    coefficients: list[int] = field(repr=False)  # a(0) = 0, a(1) = 1, ...
    lam: np.ndarray = field(repr=False)  # normalized eigenvalues, lam[0] = 0

    def a(self, n: int) -> int:
        self._check(n)
        return self.coefficients[n]

    def eigenvalue(self, n: int) -> float:
        self._check(n)
        return float(self.lam[n])

    def _check(self, n: int) -> None:
        if n < 1 or n > self.n_max:
            raise TableExhausted(f"n={n} outside table 1..{self.n_max} (weight {self.weight})")

    def lam_upto(self, n: int) -> np.ndarray:
        self._check(n)
        return self.lam[: n + 1]


def _delta_series(n: int) -> flint.fmpz_poly:
    """q * prod (1 - q^k)^24 truncated to degree < n, via eta^3 = sum (-1)^k (2k+1) q^{k(k+1)/2}."""
    c = [0] * n
    k = 0
    while k * (k + 1) // 2 < n:
        c[k * (k + 1) // 2] = (-1) ** k * (2 * k + 1)
        k += 1
    eta3 = flint.fmpz_poly(c)
    body = eta3.pow_trunc(8, n - 1) if n > 1 else flint.fmpz_poly([])
    return flint.fmpz_poly([0, 1]) * body


def _sigma_power_sums(n: int, k: int) -> list[int]:
    """sigma_k(m) for 0 <= m < n as Python integers."""
    sig = np.zeros(n, dtype=object)
    sig[:] = 0
    for d in range(1, n):
        sig[d::d] += d**k
    return [int(x) for x in sig]


def _eisenstein(n: int, weight: int) -> flint.fmpz_poly:
    const = {4: 240, 6: -504}[weight]
    sig = _sigma_power_sums(n, weight - 1)
    coeffs = [1] + [const * sig[m] for m in range(1, n)]
    return flint.fmpz_poly(coeffs[:n])


def _compute_exact(weight: int, n_max: int) -> list[int]:
    n = n_max + 1
    series = _delta_series(n)
    e4, e6 = _EISENSTEIN_FACTORS[weight]
    if e4:
        E4 = _eisenstein(n, 4)
        for _ in range(e4):
            series = series.mul_low(E4, n)
    if e6:
        series = series.mul_low(_eisenstein(n, 6), n)
    coeffs = [int(x) for x in series.coeffs()]
    coeffs += [0] * (n - len(coeffs))
    return coeffs[:n]


# ---------------------------------------------------------------------------
# disk cache: header (magic, version, weight, n_max, sha256 of body), body of
# length-prefixed little-endian signed integers.


def _uvarint(x: int) -> bytes:
    out = bytearray()
    while True:
        b = x & 0x7F
        x >>= 7
        if x:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def encode_coefficients(coeffs: list[int]) -> bytes:
    parts = []
    for c in coeffs:
        nbytes = (c.bit_length() + 8) // 8
        parts.append(_uvarint(nbytes))
        parts.append(c.to_bytes(nbytes, "little", signed=True))
    return b"".join(parts)


def decode_coefficients(body: bytes, limit: int | None = None) -> list[int]:
    out = []
    i = 0
    n = len(body)
    while i < n and (limit is None or len(out) < limit):
        length = 0
        shift = 0
        while True:
            b = body[i]
            i += 1
            length |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                break
        out.append(int.from_bytes(body[i : i + length], "little", signed=True))
        i += length
    return out


def write_cache(path: Path, weight: int, coeffs: list[int]) -> None:
    body = encode_coefficients(coeffs)
    header = CACHE_MAGIC + struct.pack("<HHQ", CACHE_VERSION, weight, len(coeffs) - 1)
    header += hashlib.sha256(body).digest()
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(header + body)
    tmp.replace(path)


def read_cache(path: Path, weight: int, n_max: int) -> list[int] | None:
    """Coefficients from a cache file if it is valid and covers n_max, else None."""
    try:
        raw = path.read_bytes()
    except OSError:
        return None
    hlen = len(CACHE_MAGIC) + 12 + 32
    if len(raw) < hlen or not raw.startswith(CACHE_MAGIC):
        return None
    version, w, stored_max = struct.unpack("<HHQ", raw[len(CACHE_MAGIC) : len(CACHE_MAGIC) + 12])
    checksum = raw[len(CACHE_MAGIC) + 12 : hlen]
    body = raw[hlen:]
    if version != CACHE_VERSION or w != weight or stored_max < n_max:
        return None
    if hashlib.sha256(body).digest() != checksum:
        return None
    coeffs = decode_coefficients(body, n_max + 1)
    if len(coeffs) != n_max + 1:
        return None
    return coeffs


def default_cache_dir() -> Path | None:
    env = os.environ.get("KLOOSTERLAB_CACHE")
    if env == "":
        return None
    return Path(env) if env else Path.home() / ".cache" / "kloosterlab"


_MEMO: dict[int, Newform] = {}


def compute_coefficients(weight: int, n_max: int, cache_dir: Path | str | None = "default") -> Newform:
    """The normalized eigenform of the given weight with coefficients a(n), n <= n_max."""
    if weight not in SUPPORTED_WEIGHTS:
        raise DomainError(f"unsupported weight {weight}; supported weights are {SUPPORTED_WEIGHTS}")
    if n_max < 1:
        raise DomainError("n_max must be positive")
    memo = _MEMO.get(weight)
    if memo is not None and memo.n_max >= n_max:
        return memo if memo.n_max == n_max else _truncate(memo, n_max)

    cdir = default_cache_dir() if cache_dir == "default" else (Path(cache_dir) if cache_dir else None)
    coeffs = None
    path = None
    if cdir is not None:
        path = cdir / f"weight{weight}.klc"
        coeffs = read_cache(path, weight, n_max)
    if coeffs is None:
        coeffs = _compute_exact(weight, n_max)
        if path is not None:
            try:
                cdir.mkdir(parents=True, exist_ok=True)
                write_cache(path, weight, coeffs)
            except OSError:
                pass
    form = _build(weight, coeffs)
    if memo is None or memo.n_max < n_max:
        _MEMO[weight] = form
    return form


def _build(weight: int, coeffs: list[int]) -> Newform:
    n_max = len(coeffs) - 1
    if coeffs[1] != 1:
        raise AuditFailure("leading coefficient is not 1")
    a = np.array([float(c) for c in coeffs])
    n = np.arange(n_max + 1, dtype=float)
    n[0] = 1.0
    lam = a / n ** ((weight - 1) / 2)
    lam[0] = 0.0
    lam.flags.writeable = False
    return Newform(weight, n_max, coeffs, lam)


def _truncate(form: Newform, n_max: int) -> Newform:
    lam = form.lam[: n_max + 1]
    return Newform(form.weight, n_max, form.coefficients[: n_max + 1], lam)


def hecke_composition(f: Newform, n: int, m: int, rtol: float = 1e-9) -> float:
    """Sum over d | (n, m) of mu(d) lam(n/d) lam(m/d), checked against lam(nm)."""
    g = math.gcd(n, m)
    total = sum(mobius(d) * f.eigenvalue(n // d) * f.eigenvalue(m // d) for d in divisors(g))
    target = f.eigenvalue(n * m)
    if abs(total - target) > rtol * max(1.0, abs(target)):
        raise AuditFailure(f"Hecke relation fails at n={n}, m={m}: {total} vs {target}")
    return total


def eigenvalue_statistics(f: Newform, x: int, alpha: float) -> tuple[float, complex]:
    """(sum_{n<=x} lam(n)^2, sum_{n<=x} lam(n) e(alpha n))."""
    lam = f.lam_upto(x)[1:]
    n = np.arange(1, x + 1, dtype=float)
    phase = np.mod(alpha * n, 1.0)
    rankin = math.fsum(lam * lam)
    wilton = complex(np.sum(lam * np.exp(2j * np.pi * phase)))
    return rankin, wilton
