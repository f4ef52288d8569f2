import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kloosterlab.arith_core import AuditFailure, euler_phi
from kloosterlab.characters import (
    character_group,
    enumerate_characters,
    minimal_period,
    orthogonality_sum,
    primitive_characters,
    psi_count,
)

MODULI = [1, 3, 4, 5, 8, 9, 12, 15, 16, 20, 21, 25, 27, 32, 36, 45, 64]


@pytest.mark.parametrize("q", MODULI)
def test_group_has_phi_elements(q):
    g = character_group(q)
    assert g.size == euler_phi(q)
    assert len(enumerate_characters(q)) == euler_phi(q)


@pytest.mark.parametrize("q", MODULI)
def test_first_orthogonality(q):
    X = np.vstack([chi.values for chi in enumerate_characters(q)])
    gram = X @ X.conj().T
    assert np.allclose(gram, euler_phi(q) * np.eye(len(X)), atol=1e-9)


@pytest.mark.parametrize("q", MODULI)
def test_characters_are_homomorphisms_with_root_of_unity_values(q):
    units = [n for n in range(q) if math.gcd(n, q) == 1]
    for chi in enumerate_characters(q)[:12]:
        vals = chi.values
        for a in units[:6]:
            for b in units[:6]:
                assert abs(vals[a * b % q] - vals[a] * vals[b]) < 1e-9
        for a in units:
            assert abs(vals[a] ** chi.order - 1) < 1e-9
        assert all(vals[n] == 0 for n in range(q) if math.gcd(n, q) > 1)


@pytest.mark.parametrize("q", MODULI)
def test_conductor_is_minimal_period(q):
    for chi in enumerate_characters(q):
        assert chi.conductor == minimal_period(chi)


def brute_psi(q):
    # number of characters of exact conductor q, by inclusion over divisors
    return sum(1 for chi in enumerate_characters(q) if minimal_period(chi) == q)


@pytest.mark.parametrize("q", [1, 2, 3, 4, 6, 8, 9, 10, 12, 16, 18, 25, 30, 36])
def test_psi_count(q):
    assert psi_count(q) == brute_psi(q) == len(primitive_characters(q))


def test_no_primitive_characters_when_q_is_2_mod_4():
    for q in (2, 6, 10, 14, 50):
        assert psi_count(q) == 0
        assert primitive_characters(q) == []


def test_two_power_components_use_minus_one_and_five():
    g = character_group(32)
    assert sorted(g.orders) == [2, 8]


@given(st.sampled_from([5, 12, 16, 25, 36, 63]), st.integers(1, 10**4))
def test_primitive_orthogonality(q, n):
    if math.gcd(n, q) != 1:
        return
    orthogonality_sum(q, n)


def test_orthogonality_rejects_non_units():
    with pytest.raises(ValueError):
        orthogonality_sum(12, 6)


def test_conjugate():
    chi = primitive_characters(13)[3]
    assert np.allclose(chi.conjugate().values, chi.values.conj())


def test_audit_failure_is_assertion():
    assert issubclass(AuditFailure, AssertionError)
