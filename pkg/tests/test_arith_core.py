import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kloosterlab.arith_core import (
    DomainError,
    NonResidueError,
    NotCoprimeError,
    PrimePowerModulus,
    SqrtBranch,
    crt,
    divisor_count_table,
    divisors,
    e_frac,
    euler_phi,
    factorize,
    gauss_sign,
    inverse_table,
    is_prime,
    kronecker_symbol,
    mobius,
    mobius_table,
    mod_inverse,
    num_divisors,
    ord_p,
    padic_sqrt,
    primes_up_to,
    quadratic_gauss_sum,
    sqrt_table,
    square_classes,
)


def brute_phi(n):
    return sum(1 for k in range(1, n + 1) if math.gcd(k, n) == 1)


def brute_factor(n):
    out, p = [], 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        if e:
            out.append((p, e))
        p += 1
    if n > 1:
        out.append((n, 1))
    return tuple(out)


@given(st.integers(1, 10**6))
def test_factorization_matches_trial_division(n):
    assert factorize(n).factors == brute_factor(n)


def test_factorization_of_large_semiprime():
    p, q = 1_000_000_007, 998_244_353
    assert factorize(p * q).factors == ((q, 1), (p, 1))


def test_factorization_rejects_nonpositive():
    with pytest.raises(DomainError):
        factorize(0)


def test_factorization_helpers():
    f = factorize(2**3 * 3 * 5**2 * 7)
    assert f.rad == 210
    assert f.omega == 4
    assert f.ord(5) == 2 and f.ord(11) == 0
    assert f.part_supported_on(6) == 24
    assert not f.is_cube_free()
    assert factorize(2 * 9 * 25).is_cube_free()
    assert sorted(f.divisors()) == [d for d in range(1, f.value + 1) if f.value % d == 0]


def test_multiplicative_functions_against_brute_force():
    mu = mobius_table(300)
    d = divisor_count_table(300)
    for n in range(1, 301):
        assert euler_phi(n) == brute_phi(n)
        assert num_divisors(n) == len(divisors(n)) == d[n]
        assert mobius(n) == mu[n]
    assert sum(mobius(d) for d in divisors(360)) == 0


def test_primes_up_to_agrees_with_is_prime():
    ps = set(primes_up_to(2000).tolist())
    assert ps == {n for n in range(2000 + 1) if is_prime(n)}


def test_ord_p():
    assert ord_p(250, 5) == 3
    assert ord_p(7, 5) == 0
    assert ord_p(0, 3) > 100


@given(st.integers(-10**6, 10**6), st.integers(2, 10**4))
def test_mod_inverse(a, m):
    if math.gcd(a, m) != 1:
        with pytest.raises(NotCoprimeError):
            mod_inverse(a, m)
    else:
        assert a * mod_inverse(a, m) % m == 1


def test_mod_inverse_mod_one():
    assert mod_inverse(5, 1) == 0


def test_inverse_table():
    for q in (1, 2, 12, 97, 1000):
        inv = inverse_table(q)
        for a in range(q):
            if math.gcd(a, q) == 1:
                assert a * inv[a] % q == 1 % q
            else:
                assert inv[a] == 0


@given(st.integers(1, 10**4), st.integers(1, 10**4))
def test_crt(a, b):
    m1, m2 = 101, 64
    x = crt([a, b], [m1, m2])
    assert x % m1 == a % m1 and x % m2 == b % m2 and 0 <= x < m1 * m2


@given(st.integers(-500, 500), st.sampled_from([3, 5, 7, 9, 15, 21, 25, 97, 105]))
def test_kronecker_is_multiplicative_and_matches_euler(a, n):
    val = kronecker_symbol(a, n)
    expected = 1
    for p, e in factorize(n).factors:
        leg = pow(a % p, (p - 1) // 2, p)
        leg = -1 if leg == p - 1 else leg
        expected *= leg**e
    assert val == expected


def test_square_classes():
    sq = square_classes(11)
    assert set(np.flatnonzero(sq)) == {x * x % 11 for x in range(1, 11)}


def test_sqrt_branch_default_and_flip():
    b = SqrtBranch.default(13)
    for r in (1, 3, 4, 9, 10, 12):
        assert b(r) ** 2 % 13 == r and 1 <= b(r) <= 6
    f = b.flipped([4])
    assert f(4) == 13 - b(4) and f(9) == b(9)
    with pytest.raises(NonResidueError):
        b(2)
    with pytest.raises(DomainError):
        SqrtBranch(5, (0, 2, 0, 0, 3))


@given(st.sampled_from([5, 7, 11, 13]), st.integers(1, 5), st.integers(1, 10**6))
def test_padic_sqrt_is_a_root_on_the_branch(p, s, x):
    q = PrimePowerModulus(p, s)
    if x % p == 0 or kronecker_symbol(x, p) != 1:
        with pytest.raises((NotCoprimeError, NonResidueError)):
            padic_sqrt(x, q)
        return
    r = padic_sqrt(x, q)
    assert r * r % q.q == x % q.q
    assert r % p == SqrtBranch.default(p)(x)


def test_sqrt_table_matches_scalar_roots():
    q = PrimePowerModulus(7, 3)
    table = sqrt_table(q)
    for x in range(q.q):
        if x % 7 and kronecker_symbol(x, 7) == 1:
            assert table[x] == padic_sqrt(x, q)
        else:
            assert table[x] == -1


def test_prime_power_modulus_rejects_two():
    with pytest.raises(DomainError):
        PrimePowerModulus(2, 3)


def test_gauss_sign_matches_direct_sum():
    for p in (3, 5, 7, 11, 13):
        for s in range(1, 5):
            q = PrimePowerModulus(p, s)
            for A in range(1, p):
                assert abs(quadratic_gauss_sum(A, q.q) - q.q**0.5 * gauss_sign(A, q)) < 1e-9


def test_exponentials():
    assert abs(e_frac(1, 4) - 1j) < 1e-15
    assert abs(e_frac(3, 3) - 1) < 1e-15
