import numpy as np
import pytest
from hypothesis import given, strategies as st

from kloosterlab.arith_core import DomainError, PrimePowerModulus, SqrtBranch, mod_inverse, padic_sqrt, square_classes
from kloosterlab import congruence_lab as cl

MODULI = [(5, 2), (5, 3), (7, 2), (7, 3), (11, 2), (13, 2)]


def admissible(m, a, u, p):
    sq = square_classes(p)
    ub = mod_inverse(u, p)
    return m % p and (m + a) % p and sq[m * ub % p] and sq[(m + a) * ub % p]


def phase(A, B, a, k, u, q, m, branch=None):
    Q = q.q
    X1 = padic_sqrt((m + a) * u % Q, q, branch)
    X2 = padic_sqrt(m * u % Q, q, branch)
    return (2 * A * X1 - 2 * B * X2 - k * m) % Q


@pytest.mark.parametrize("p,s", MODULI)
def test_phase_tables_match_scalar_evaluation(p, s):
    q = PrimePowerModulus(p, s)
    A, B, a, u = 3, 7, 2, 1 if p != 7 else 3
    t = cl.phase_tables(A, B, a, u, q)
    params = cl.PhaseParams(A, B, a, 0, u, q)
    for m in range(q.q):
        if admissible(m, a, u, p):
            assert t.domain[m]
            for which in ("g", "g1", "g2"):
                assert getattr(t, which)[m] == cl.phase_eval(params, m, which)
        else:
            assert not t.domain[m] and t.g[m] == -1


@given(st.sampled_from([(5, 4), (7, 4), (11, 4), (7, 5)]), st.integers(1, 10**4), st.integers(1, 10**4),
       st.integers(1, 10**4), st.integers(0, 10**4), st.integers(0, 10**4))
def test_taylor_expansion_of_the_phase(ps, A, B, a, k, m):
    p, s = ps
    q = PrimePowerModulus(p, s)
    Q = q.q
    u = 1
    a %= p
    if a == 0 or not admissible(m % p, a, u, p):
        return
    params = cl.PhaseParams(A, B, a, k, u, q)
    g = cl.phase_eval(params, m, "g")
    g1 = cl.phase_eval(params, m, "g1")
    g2 = cl.phase_eval(params, m, "g2")
    h = p  # h^4 vanishes mod p^s for s <= 4; for s = 5 keep h = p^2
    if s > 4:
        h = p * p
    i2, i6 = mod_inverse(2, Q), mod_inverse(6, Q)
    want = (phase(A, B, a, k, u, q, m) + (g - k) * h + g1 * h * h * i2 + g2 * h**3 * i6) % Q
    assert phase(A, B, a, k, u, q, m + h) == want


def test_phase_eval_domain():
    q = PrimePowerModulus(5, 2)
    params = cl.PhaseParams(1, 1, 1, 0, 1, q)
    with pytest.raises(DomainError):
        cl.phase_eval(params, 5)
    with pytest.raises(DomainError):
        cl.phase_eval(params, 2)  # 2 is not a square mod 5
    with pytest.raises(DomainError):
        cl.phase_eval(params, 1, "g3")
    with pytest.raises(DomainError):
        cl.PhaseParams(1, 1, 1, 0, 1, PrimePowerModulus(3, 2))
    with pytest.raises(DomainError):
        cl.PhaseParams(1, 1, 1, 0, 5, q)


@pytest.mark.parametrize("p,s", MODULI)
def test_count_solutions_matches_brute_force(p, s):
    q = PrimePowerModulus(p, s)
    A, B, a, k, u = 2, 5, 1, 3, 1
    params = cl.PhaseParams(A, B, a, k, u, q)
    for kappa in range(1, s + 1):
        pk = p**kappa
        want = sum(1 for m in range(pk) if admissible(m, a, u, p) and cl.phase_eval(params, m) % pk == k % pk)
        assert cl.count_solutions(params, kappa).count == want
        counts = cl.census_counts(cl.phase_tables(A, B, a, u, q), q, kappa)
        assert counts[k % pk] == want
        parts = [cl.count_solutions(params, kappa, classification=c).count for c in ("nonsingular", "singular")]
        assert sum(parts) == want


def test_count_solutions_domain():
    params = cl.PhaseParams(1, 2, 1, 0, 1, PrimePowerModulus(5, 2))
    with pytest.raises(DomainError):
        cl.count_solutions(params, 3)
    with pytest.raises(DomainError):
        cl.count_solutions(params, 1, classification="odd")


@given(st.sampled_from(MODULI + [(5, 4), (7, 4)]), st.integers(0, 10**5), st.integers(0, 10**5),
       st.integers(0, 10**5), st.integers(0, 10**5), st.integers(1, 4))
def test_hensel_counts_are_constant_under_the_hypothesis(ps, A, B, a, k, u):
    q = PrimePowerModulus(*ps)
    if u % q.p == 0:
        return
    params = cl.PhaseParams(A, B, a, k, u, q)
    censuses, status = cl.hensel_audit(params, nonsingular_only=True)
    assert status == "constant"
    _, status = cl.hensel_audit(params)
    assert status in ("constant", "lemma hypotheses not met")


def test_hensel_census_for_a_polynomial():
    # x^2 - 2 mod 7^mu: two roots at every level, derivative 2x is a unit
    counts, ok = cl.hensel_census(lambda x, mu: x * x - 2, 7, range(1, 4), derivative=lambda x, mu: 2 * x)
    assert [c.count for c in counts] == [2, 2, 2] and ok
    counts, ok = cl.hensel_census(lambda x, mu: x * x, 5, range(1, 3), derivative=lambda x, mu: 2 * x)
    assert [c.count for c in counts] == [1, 5] and not ok


@pytest.mark.parametrize("p,s", [(5, 3), (7, 3), (11, 2), (13, 3)])
def test_singular_parameters_produce_a_root(p, s):
    q = PrimePowerModulus(p, s)
    rng = np.random.default_rng(p + s)
    done = 0
    while done < 5:
        a, u = (int(x) for x in rng.integers(1, p, 2))
        m0 = int(rng.integers(1, q.q))
        if not admissible(m0 % p, a, u, p):
            continue
        A = int(rng.integers(1, q.q))
        if A % p == 0:
            A += 1
        B = cl.singular_parameters(A, a, u, m0, q)
        assert cl.phase_eval(cl.PhaseParams(A, B, a, 0, u, q), m0, "g1") == 0
        data = cl.singular_census(A, B, a, u, q)
        assert m0 % q.q in data.roots
        if data.g2_units:
            assert data.lifts_uniquely
        done += 1


def test_special_set_contains_critical_values():
    p, s = 7, 3
    q = PrimePowerModulus(p, s)
    A, a, u, m0 = 3, 1, 1, 1
    B = cl.singular_parameters(A, a, u, m0, q)
    data = cl.singular_census(A, B, a, u, q)
    reps = cl.coset_representatives(p)
    assert reps == (1, 3)
    v = reps[0] if square_classes(p)[a] else reps[1]
    if v == a:
        for k in data.special_values:
            assert k * k * a % q.q in data.setT


def test_special_set_is_branch_independent():
    q = PrimePowerModulus(11, 2)
    B = cl.singular_parameters(2, 1, 1, 3, q)
    flipped = SqrtBranch.default(11).flipped()
    assert cl.special_set(2, B, 1, q) == cl.special_set(2, B, 1, q, flipped)


@pytest.mark.parametrize("p,s", [(5, 4), (7, 3), (11, 3)])
def test_singular_count_constants(p, s):
    q = PrimePowerModulus(p, s)
    worst = 0.0
    for m0 in range(1, 12):
        if not admissible(m0 % p, 3, 1, p):
            continue
        B = cl.singular_parameters(2, 3, 1, m0, q)
        wk, wt = cl.singular_bound_sweep(2, B, 3, 1, q)
        worst = max(worst, wk, wt)
    assert 0 < worst < 10


def test_rho():
    assert cl.rho(10, [], 5, 3) == 0
    assert cl.rho(26, [1, 51], 5, 3) == 2
    assert cl.rho(1, [1], 5, 3) == 3


def test_singular_census_domain():
    q = PrimePowerModulus(5, 2)
    with pytest.raises(DomainError):
        cl.singular_census(1, 1, 5, 1, q)
    with pytest.raises(DomainError):
        cl.singular_census(5, 10, 1, 1, q)


@pytest.mark.parametrize("p", [5, 7, 11])
def test_inverse_sqrt_phase_census(p):
    f, f1 = cl.inverse_sqrt_phase(1, 1, 2, 1, 1, p)
    counts, ok = cl.hensel_census(f, p, range(1, 4), domain=lambda x: x % p != 0, derivative=f1)
    if ok:
        assert len({c.count for c in counts}) == 1
