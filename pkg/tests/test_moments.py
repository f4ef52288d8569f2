import math

import mpmath
import numpy as np
import pytest

from kloosterlab import moments as mo
from kloosterlab.analytic_kernels import smooth_bump
from kloosterlab.arith_core import DomainError
from kloosterlab.characters import enumerate_characters, primitive_characters
from kloosterlab.hecke_forms import compute_coefficients

# Petersson norm of Delta for the measure dx dy / y^2 on the fundamental domain
DELTA_NORM = 1.035362056804320922e-6


@pytest.fixture(scope="module")
def forms():
    return {k: compute_coefficients(k, 40_000) for k in (12, 16, 20)}


@pytest.fixture(scope="module")
def lv_delta(forms):
    return mo.l_values(forms[12], forms[12])


def test_local_factors_trivial_modulus(forms):
    lf = mo.local_factors(forms[12], forms[16], 1)
    assert (lf.P, lf.Q, lf.P_logderiv, lf.Q_logderiv, lf.unit_density, lf.unit_logderiv) == (1, 1, 0, 0, 1, 0)


def test_local_factors_depend_only_on_the_radical(forms):
    a = mo.local_factors(forms[12], forms[12], 5)
    b = mo.local_factors(forms[12], forms[12], 125)
    assert (a.P, a.Q, a.P_logderiv) == (b.P, b.Q, b.P_logderiv)
    assert b.unit_density == pytest.approx(0.8)


def test_local_factor_at_a_prime(forms):
    f = forms[12]
    p = 7
    lam = f.eigenvalue(p)
    lam2 = lam * lam - 1
    x = 1 / p
    want = (1 - lam2 * x + lam2 * x * x - x**3) / (1 - x * x)
    assert mo.local_factors(f, f, p).P == pytest.approx(want, rel=1e-14)


def test_local_log_derivatives_by_finite_differences(forms):
    f1, f2 = forms[12], forms[16]
    h = 1e-6
    for q in (5, 21, 143):
        lo, mid, hi = (mo.local_factors(f1, f2, q, s) for s in (1 - h, 1.0, 1 + h))
        assert mid.P_logderiv == pytest.approx((math.log(hi.P) - math.log(lo.P)) / (2 * h), rel=1e-6, abs=1e-9)
        assert mid.Q_logderiv == pytest.approx((math.log(hi.Q) - math.log(lo.Q)) / (2 * h), rel=1e-6, abs=1e-9)


def test_dirichlet_coefficients_by_definition(forms):
    f1, f2 = forms[12], forms[16]
    sym2 = mo.sym2_coefficients(f1, 200)
    rankin = mo.rankin_coefficients(f1, f2, 200)
    for n in range(1, 201):
        # zeta(2s) sum lam(n^2) n^-s and zeta(2s) sum lam1 lam2 n^-s
        want_s = sum(f1.eigenvalue((n // (d * d)) ** 2) for d in range(1, math.isqrt(n) + 1) if n % (d * d) == 0)
        want_r = sum(
            f1.eigenvalue(n // (d * d)) * f2.eigenvalue(n // (d * d))
            for d in range(1, math.isqrt(n) + 1)
            if n % (d * d) == 0
        )
        assert sym2[n] == pytest.approx(want_s, abs=1e-9)
        assert rankin[n] == pytest.approx(want_r, abs=1e-9)


def test_symmetric_square_value_matches_petersson_norm(lv_delta):
    # <Delta, Delta> = Gamma(12) L(1, sym^2 Delta) / (2^23 pi^13)
    norm = math.gamma(12) * lv_delta.sym2 / (2**23 * math.pi**13)
    assert norm == pytest.approx(DELTA_NORM, rel=1e-8)


def test_kernels_agree(forms, lv_delta):
    sharp = mo.l_values(forms[12], forms[12], kernel="sharp")
    assert sharp.sym2 == pytest.approx(lv_delta.sym2, abs=1e-7)
    assert sharp.sym2_logderiv == pytest.approx(lv_delta.sym2_logderiv, abs=1e-4)
    g = mo.rankin_l_value(forms[12], forms[16])
    s = mo.rankin_l_value(forms[12], forms[16], kernel="sharp")
    assert s[0] == pytest.approx(g[0], abs=1e-7)
    assert s[1] == pytest.approx(g[1], abs=1e-4)


def test_l_values_converge_in_length(forms):
    # the exp(u^2) kernel decays like exp(-(log n)^2/4), so 3000 terms give about 1e-7
    ref = mo.rankin_l_value(forms[16], forms[20], n_terms=12_000)[0]
    assert abs(mo.rankin_l_value(forms[16], forms[20], n_terms=1500)[0] - ref) < 1e-6
    assert abs(mo.rankin_l_value(forms[16], forms[20], n_terms=3000)[0] - ref) < 2e-7


def test_rankin_pole_rejected(forms):
    with pytest.raises(DomainError):
        mo.rankin_l_value(forms[12], forms[12])


def test_constant_c(forms, lv_delta):
    derived = mo.constant_c(forms[12], lv_delta)
    printed = mo.constant_c(forms[12], lv_delta, convention="printed")
    assert printed - derived == pytest.approx(math.log(2 * math.pi) / 2)
    digamma6 = sum(1 / j for j in range(1, 6)) - mo.EULER_GAMMA
    want = mo.EULER_GAMMA - math.log(2 * math.pi) + digamma6 + lv_delta.sym2_logderiv - 2 * mo.ZETA2_LOGDERIV
    assert derived == pytest.approx(want, rel=1e-13)
    assert mo.ZETA2_LOGDERIV == pytest.approx(float(mpmath.zeta(2, derivative=1)) / (math.pi**2 / 6))


def test_weight_pairs_must_agree_mod_4(forms):
    f18 = compute_coefficients(18, 2000)
    chi = primitive_characters(5)[0]
    with pytest.raises(DomainError):
        mo.central_product(forms[12], f18, chi)
    with pytest.raises(DomainError):
        mo.moment_values(forms[12], f18, 5)


def test_central_product_rejects_imprimitive(forms):
    chi = next(c for c in enumerate_characters(9) if not c.is_primitive)
    with pytest.raises(DomainError):
        mo.central_product(forms[12], forms[12], chi)


def test_central_products_are_nonnegative_and_conjugation_invariant(forms):
    f = forms[12]
    chars, vals = mo.moment_values(f, f, 7)
    assert np.all(np.abs(vals.imag) < 1e-10)
    assert np.all(vals.real > -1e-10)
    by_values = {tuple(np.round(c.values, 9)): v.real for c, v in zip(chars, vals)}
    for c, v in zip(chars, vals):
        assert by_values[tuple(np.round(c.values.conj(), 9))] == pytest.approx(v.real, abs=1e-10)


@pytest.mark.parametrize("q,pair", [(5, (12, 12)), (8, (12, 16)), (9, (16, 20))])
def test_matrix_evaluator_matches_direct_double_sum(forms, q, pair):
    f1, f2 = forms[pair[0]], forms[pair[1]]
    chars, vals = mo.moment_values(f1, f2, q)
    for chi, v in zip(chars, vals):
        assert v.real == pytest.approx(mo.central_product(f1, f2, chi), abs=1e-10)


def test_residue_matrix_by_brute_force(forms):
    f1, f2 = forms[12], forms[16]
    q, x_cut = 5, 3.0
    P_max = int(x_cut * q * q)
    W = mo._weight(12, 16)
    want = np.zeros((q, q))
    for m in range(1, P_max + 1):
        for n in range(1, P_max // m + 1):
            if math.gcd(m * n, q) == 1:
                want[m % q, n % q] += f1.eigenvalue(m) * f2.eigenvalue(n) * W(m * n / q**2) / math.sqrt(m * n)
    got = mo.residue_matrix(f1, f2, q, x_cut)
    assert np.allclose(got, want, atol=1e-10)


def test_q4_has_a_single_primitive_character(forms):
    chars, vals = mo.moment_values(forms[12], forms[12], 4)
    assert len(chars) == 1 and len(vals) == 1
    res = mo.moment_experiment(forms[12], forms[12], 4)
    assert res.psi == 1 and np.isfinite(res.ratio)


def test_moment_rejects_q_2_mod_4(forms):
    with pytest.raises(DomainError):
        mo.moment_experiment(forms[12], forms[12], 30)


def test_moment_at_a_small_prime(forms, lv_delta):
    res = mo.moment_experiment(forms[12], forms[12], 13, lv=lv_delta, keep_values=True)
    assert res.empirical == pytest.approx(res.values.sum())
    assert res.imag_residue < 1e-10
    assert 0.3 < res.ratio < 3


@pytest.mark.parametrize("pair", [(12, 12), (12, 16)])
def test_diagonal_closed_form(forms, pair):
    f1, f2 = forms[pair[0]], forms[pair[1]]
    for q in (53, 101, 128):
        rep = mo.diagonal_report(f1, f2, q)
        assert rep.lhs < rep.rhs


def test_diagonal_term_by_loop(forms):
    f = forms[12]
    q = 9
    W = mo._weight(12, 12)
    n_max = int(q * math.sqrt(mo.w_support(12, 12))) + 1
    want = sum(f.eigenvalue(n) ** 2 / n * W((n / q) ** 2) for n in range(1, n_max + 1) if n % 3)
    assert mo.diagonal_term(f, f, q) == pytest.approx(2 * 4 * want, rel=1e-12)


def test_w_support():
    x = mo.w_support(12, 12)
    W = mo._weight(12, 12)
    assert W(x) < 1e-13 < W(x / 1.1)


def brute_shifted(f1, f2, l1, l2, h, N, M):
    total = 0.0
    for m in range(1, int(2 * M) + 2):
        for n in range(1, int(2 * N) + 2):
            if l1 * n - l2 * m == h:
                total += f1.eigenvalue(m) * f2.eigenvalue(n) * smooth_bump(l2 * m / M) * smooth_bump(l1 * n / N)
    return total


def test_shifted_convolution_by_brute_force(forms):
    f1, f2 = forms[12], forms[16]
    for l1, l2, h in [(1, 1, 30), (2, 3, 7), (3, 1, -5)]:
        got = mo.shifted_convolution(f1, f2, l1, l2, h, 120, 60, smooth_bump, smooth_bump)
        assert got == pytest.approx(brute_shifted(f1, f2, l1, l2, h, 120, 60), abs=1e-12)


def test_shifted_convolution_swap_symmetry(forms):
    f1, f2 = forms[12], forms[16]
    a = mo.shifted_convolution(f1, f2, 2, 3, 11, 400, 300, smooth_bump, smooth_bump)
    b = mo.shifted_convolution(f2, f1, 3, 2, -11, 300, 400, smooth_bump, smooth_bump)
    assert a == pytest.approx(b, abs=1e-12)


def test_shifted_convolution_empty_support(forms):
    assert mo.shifted_convolution(forms[12], forms[12], 1, 1, 10_000, 100, 50, smooth_bump, smooth_bump) == 0.0


def test_average_shifted_sums_over_multiples(forms):
    f1, f2 = forms[12], forms[16]
    total = mo.average_shifted(f1, f2, 1, 1, 7, 2000, 100, smooth_bump, smooth_bump)
    want = sum(mo.shifted_convolution(f1, f2, 1, 1, 7 * r, 2000, 100, smooth_bump, smooth_bump) for r in range(1, 600))
    assert total == pytest.approx(want, abs=1e-10)


def test_bound_reports(forms):
    rep = mo.individual_bound_report(3.0, 1e4, 400)
    assert rep.family == "indivbound" and rep.ratio == pytest.approx(3.0 / rep.rhs)
    with pytest.raises(DomainError):
        mo.average_bound_report(1.0, 5, 1000, 100)
    assert mo.average_bound_report(1.0, 5, 1e4, 100).family == "average-shifted"
