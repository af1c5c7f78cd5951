import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orecov.classes import (
    ClassMember,
    WorstCaseProblem,
    bernoulli_coeff,
    bernoulli_coeffs,
    bernoulli_eval,
    fejer_member,
    l1_norm_quadrature,
    random_w2r_member,
    truncation_value,
    worst_case_linear,
    worst_case_report,
)
from orecov.discretization import grid_points, random_points
from orecov.errors import ResourceLimitError
from orecov.recovery import recovery_matrix
from orecov.trig import FrequencySet, GridSpec, basis_matrix, evaluate, hyperbolic_cross, uniform_grid


def polylog_kernel(r, x):
    # 1 + 2 Re(e^{-i r pi/2} Li_r(e^{i x}))
    li = mpmath.polylog(r, mpmath.exp(1j * x))
    return float(1 + 2 * mpmath.re(mpmath.exp(-1j * r * mpmath.pi / 2) * li))


def test_coefficient_examples():
    assert bernoulli_coeff(2, [0]) == 1
    assert bernoulli_coeff(2, [1]) == pytest.approx(-1, abs=1e-15)
    assert bernoulli_coeff(2, [-2]) == pytest.approx(-0.25, abs=1e-15)
    assert bernoulli_coeff(2, [-3]) == pytest.approx(-1 / 9, abs=1e-15)
    assert bernoulli_coeff(1, [1]) == pytest.approx(-1j, abs=1e-15)
    assert bernoulli_coeff(2, [2, -3]) == pytest.approx(1 / 36, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.6, 4), k=st.lists(st.integers(-50, 50), min_size=1, max_size=3))
def test_coefficient_modulus_and_conjugate_symmetry(r, k):
    c = bernoulli_coeff(r, k)
    assert abs(c) == pytest.approx(np.prod([max(1, abs(v)) for v in k]) ** (-r), rel=1e-12)
    assert bernoulli_coeff(r, [-v for v in k]) == pytest.approx(np.conj(c), abs=1e-14)


@pytest.mark.parametrize("r", [1.5, 2.0, 3.0])
def test_coefficients_match_quadrature_of_kernel(r):
    # coefficients of the evaluated kernel, recovered by a rectangle rule
    # midpoint nodes keep away from the slowly converging point x = 0
    s = 64
    x = uniform_grid(GridSpec(1, s))[:, 0] + np.pi / s
    vals = np.array([bernoulli_eval(r, xi, tol=1e-7) for xi in x])
    lam = FrequencySet(np.arange(-4, 5))
    quad = basis_matrix(lam, x).conj().T @ vals / s
    # aliasing from |k| >= s - 4 contributes at most 2 sum_{j>=1} (j s - 4)^{-r}
    alias = 2 * sum((j * s - 4) ** (-r) for j in range(1, 20000))
    np.testing.assert_allclose(quad, bernoulli_coeffs(r, lam), rtol=0, atol=alias + 1e-7)


def test_kernel_closed_forms_r2():
    assert abs(bernoulli_eval(2, 0.0, tol=1e-6) - (1 - np.pi**2 / 3)) <= 1e-6
    assert abs(bernoulli_eval(2, np.pi, tol=1e-6) - (1 + np.pi**2 / 6)) <= 1e-6


@pytest.mark.parametrize("r", [1.5, 2.0, 2.5, 4.0])
@pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 4.0, 6.0])
def test_kernel_matches_polylog(r, x):
    assert abs(bernoulli_eval(r, x, tol=1e-8) - polylog_kernel(r, x)) <= 1e-8


def test_kernel_tensor_product_and_finer_truncation():
    x = [0.7, 2.2]
    prod = polylog_kernel(2.5, 0.7) * polylog_kernel(2.5, 2.2)
    coarse = bernoulli_eval(2.5, x, tol=1e-6)
    fine = bernoulli_eval(2.5, x, tol=1e-7)
    assert abs(coarse - prod) <= 1e-6
    assert abs(coarse - fine) <= 1e-6 + 1e-7


def test_kernel_rejects_and_caps():
    with pytest.raises(ValueError):
        bernoulli_eval(1.0, 0.5)
    with pytest.raises(ResourceLimitError):
        bernoulli_eval(1.01, 0.0, tol=1e-12, max_terms=1000)


def test_random_member_is_real_normalized_and_reproducible():
    box = hyperbolic_cross(2, 16)
    f = random_w2r_member(box, 2.0, seed=5)
    assert np.linalg.norm(f.phi.coefficients) == pytest.approx(1.0, abs=1e-14)
    pts = np.random.default_rng(0).uniform(0, 2 * np.pi, (20, 2))
    assert np.max(np.abs(np.imag(f(pts)))) < 1e-13
    g = random_w2r_member(box, 2.0, seed=5)
    np.testing.assert_array_equal(f.f.coefficients, g.f.coefficients)
    assert np.linalg.norm(f.f.coefficients) <= 1.0
    with pytest.raises(ValueError):
        random_w2r_member(FrequencySet([[0, 0], [1, 0]]), 2.0, 0)


def test_member_json_round_trip():
    f = random_w2r_member(hyperbolic_cross(1, 8), 1.5, seed=1)
    back = ClassMember.from_json(json.loads(json.dumps(f.to_json())))
    np.testing.assert_array_equal(back.f.coefficients, f.f.coefficients)
    assert back.r == 1.5 and back.class_id == "w2r"


@pytest.mark.parametrize("d,K", [(1, 4), (1, 20), (2, 6)])
def test_fejer_member_has_unit_l1_norm(d, K):
    f = fejer_member(d, K, 2.0, shift=[0.3] * d)
    assert l1_norm_quadrature(f.phi) == pytest.approx(1.0, abs=1e-12)
    assert f.class_id == "w1r"


@pytest.mark.parametrize("Q", [4, 8])
@pytest.mark.parametrize("r", [1.5, 2.0])
def test_truncation_value_closed_form(Q, r):
    lam = FrequencySet(np.arange(-Q, Q + 1))
    box = FrequencySet(np.arange(-4 * Q, 4 * Q + 1))
    assert abs(truncation_value(box, lam, r) - (Q + 1) ** (-r)) <= 1e-10


def orthogonal_problem(d, Q, K, r):
    lam, box = hyperbolic_cross(d, Q), hyperbolic_cross(d, K)
    S = grid_points(d, 2 * box.radius() + 1)
    return WorstCaseProblem(box, lam, recovery_matrix(lam, S), r), S


def test_worst_case_zero_when_grid_resolves_box():
    box = hyperbolic_cross(1, 10)
    S = grid_points(1, 21)
    assert worst_case_linear(WorstCaseProblem(box, box, recovery_matrix(box, S), 2.0), S) <= 1e-12


@pytest.mark.parametrize("d,Q,K,r", [(1, 4, 16, 2.0), (1, 8, 32, 1.5), (2, 3, 12, 2.0)])
def test_worst_case_equals_truncation_for_exact_projection(d, Q, K, r):
    problem, S = orthogonal_problem(d, Q, K, r)
    rep = worst_case_report(problem, S)
    assert rep.value == pytest.approx(rep.truncation, rel=1e-10)


def test_worst_case_matches_dense_svd():
    lam, box, r = hyperbolic_cross(1, 5), hyperbolic_cross(1, 20), 2.0
    S = random_points(1, 40, seed=3)
    A = recovery_matrix(lam, S)
    Dm = np.diag(bernoulli_coeffs(r, box))
    P = np.zeros((box.N, lam.N))
    P[lam.indices_in(box), np.arange(lam.N)] = 1
    E = (np.eye(box.N) - P @ A @ basis_matrix(box, S.points)) @ Dm
    expected = np.linalg.svd(E, compute_uv=False)[0]
    assert worst_case_linear(WorstCaseProblem(box, lam, A, r), S) == pytest.approx(expected, rel=1e-10)


def test_worst_case_large_box_uses_iterative_solver():
    lam, box, r = hyperbolic_cross(2, 4), hyperbolic_cross(2, 80), 2.0
    assert box.N > 1500
    S = random_points(2, 400, seed=0)
    A = recovery_matrix(lam, S)
    rep = worst_case_report(WorstCaseProblem(box, lam, A, r), S)
    P = np.zeros((box.N, lam.N))
    P[lam.indices_in(box), np.arange(lam.N)] = 1
    E = (np.eye(box.N) - P @ A @ basis_matrix(box, S.points)) * bernoulli_coeffs(r, box)[None, :]
    expected = np.linalg.svd(E, compute_uv=False)[0]
    assert rep.value == pytest.approx(expected, rel=1e-8)
    assert rep.value >= rep.truncation


def test_zero_algorithm_gives_kernel_sup():
    lam, box = hyperbolic_cross(1, 3), hyperbolic_cross(1, 12)
    S = random_points(1, 10, 0)
    problem = WorstCaseProblem(box, lam, np.zeros((lam.N, S.m)), 2.0)
    assert worst_case_linear(problem, S) == pytest.approx(1.0, abs=1e-12)


def test_worst_case_monotone_in_box_and_weight_invariant():
    lam = hyperbolic_cross(1, 4)
    S = random_points(1, 30, seed=8)
    A = recovery_matrix(lam, S)
    values = [worst_case_linear(WorstCaseProblem(hyperbolic_cross(1, K), lam, A, 2.0), S) for K in (8, 16, 32)]
    assert values[0] <= values[1] * (1 + 1e-12) <= values[2] * (1 + 1e-12)
    A2 = recovery_matrix(lam, S.scaled(7.0))
    np.testing.assert_allclose(A2, A, atol=1e-12)


def test_worst_member_attains_value():
    lam, box, r = hyperbolic_cross(1, 6), hyperbolic_cross(1, 24), 2.0
    S = random_points(1, 60, seed=2)
    A = recovery_matrix(lam, S)
    rep = worst_case_report(WorstCaseProblem(box, lam, A, r), S)
    f = rep.worst.f
    u = A @ evaluate(f, S.points)
    err = f.coefficients.copy()
    err[lam.indices_in(box)] -= u
    assert np.linalg.norm(rep.worst.phi.coefficients) == pytest.approx(1.0)
    assert np.linalg.norm(err) == pytest.approx(rep.value, rel=1e-9)


def test_problem_validation():
    lam, box = hyperbolic_cross(1, 4), hyperbolic_cross(1, 2)
    with pytest.raises(ValueError):
        WorstCaseProblem(box, lam, np.zeros((lam.N, 3)), 2.0)
    with pytest.raises(ValueError):
        WorstCaseProblem(lam, box, np.zeros((lam.N, 3)), 2.0)
    assert math.isfinite(truncation_value(lam, box, 2.0))
