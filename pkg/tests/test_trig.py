import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orecov.errors import ResourceLimitError
from orecov.trig import (
    FrequencySet,
    GridSpec,
    TrigPolynomial,
    basis_matrix,
    basis_vector,
    evaluate,
    hyperbolic_cross,
    parseval_norm,
    uniform_grid,
)


def brute_cross(d, Q):
    R = int(Q)
    return sorted(
        k for k in itertools.product(range(-R, R + 1), repeat=d)
        if np.prod([max(1, abs(v)) for v in k]) <= Q
    )


@pytest.mark.parametrize("d,Q", [(1, 4), (2, 1), (2, 2), (2, 8), (3, 3), (2, 5.5), (4, 2)])
def test_hyperbolic_cross_matches_enumeration(d, Q):
    cross = hyperbolic_cross(d, Q)
    assert list(cross) == brute_cross(d, Q)


def test_hyperbolic_cross_examples():
    assert list(hyperbolic_cross(1, 4)) == [(k,) for k in range(-4, 5)]
    assert hyperbolic_cross(2, 1).N == 9
    assert hyperbolic_cross(2, 2).N == 21


def test_hyperbolic_cross_cap_and_preconditions():
    with pytest.raises(ResourceLimitError):
        hyperbolic_cross(3, 50, max_size=1000)
    with pytest.raises(ValueError):
        hyperbolic_cross(2, 0.5)
    with pytest.raises(ValueError):
        hyperbolic_cross(0, 3)


@settings(max_examples=30, deadline=None)
@given(d=st.integers(1, 3), Q=st.integers(1, 12), data=st.data())
def test_hyperbolic_cross_symmetries(d, Q, data):
    cross = hyperbolic_cross(d, Q)
    signs = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=d, max_size=d)))
    perm = data.draw(st.permutations(range(d)))
    assert FrequencySet(cross.frequencies * signs) == cross
    assert FrequencySet(cross.frequencies[:, perm]) == cross


def test_frequency_set_is_sorted_and_deduplicated():
    fs = FrequencySet([[1, 0], [0, 1], [1, 0], [-1, 2]])
    assert list(fs) == [(-1, 2), (0, 1), (1, 0)]
    assert fs.N == 3 and fs.d == 2
    assert (0, 1) in fs and (2, 2) not in fs


def test_basis_vector_examples():
    lam = FrequencySet(np.arange(-3, 4))
    np.testing.assert_allclose(basis_vector(lam, 0.0), np.ones(7))
    np.testing.assert_allclose(basis_vector(FrequencySet([-1, 0, 1]), np.pi), [-1, 1, -1], atol=1e-15)
    np.testing.assert_allclose(basis_vector(FrequencySet([2]), np.pi / 2), [-1], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(x=st.lists(st.floats(-100, 100), min_size=2, max_size=2))
def test_basis_vector_modulus_one(x):
    v = basis_vector(hyperbolic_cross(2, 6), x)
    np.testing.assert_allclose(np.abs(v), 1.0, rtol=0, atol=1e-14)


def test_eval_examples():
    const = TrigPolynomial(FrequencySet([0]), [1.0])
    assert evaluate(const, 1.234) == 1.0
    u = TrigPolynomial(FrequencySet([3]), [1.0])
    assert abs(evaluate(u, np.pi / 3) - (-1)) < 1e-14


@pytest.mark.parametrize("d,Q", [(1, 10), (2, 6), (3, 3)])
def test_eval_matches_naive_summation(d, Q):
    rng = np.random.default_rng(11)
    lam = hyperbolic_cross(d, Q)
    u = TrigPolynomial(lam, rng.standard_normal(lam.N) + 1j * rng.standard_normal(lam.N))
    pts = rng.uniform(0, 2 * np.pi, size=(20, d))
    naive = [
        sum(c * np.exp(1j * sum(kj * xj for kj, xj in zip(k, x))) for k, c in zip(lam, u.coefficients))
        for x in pts
    ]
    np.testing.assert_allclose(evaluate(u, pts), naive, rtol=0, atol=1e-12)
    assert abs(u(pts[0]) - naive[0]) < 1e-12 if d > 1 else True


def test_eval_is_linear():
    rng = np.random.default_rng(2)
    lam = hyperbolic_cross(2, 5)
    a, b = rng.standard_normal(lam.N), rng.standard_normal(lam.N) * 1j
    pts = rng.uniform(0, 2 * np.pi, (15, 2))
    lhs = evaluate(TrigPolynomial(lam, 2.0 * a - 3.0 * b), pts)
    rhs = 2.0 * evaluate(TrigPolynomial(lam, a), pts) - 3.0 * evaluate(TrigPolynomial(lam, b), pts)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_parseval_examples():
    lam = FrequencySet([-1, 0, 1])
    assert parseval_norm(TrigPolynomial.zeros(lam)) == 0.0
    assert parseval_norm(TrigPolynomial(lam, [0, 1, 0])) == 1.0
    u = TrigPolynomial(lam, [1, 0, 1])
    assert parseval_norm(u) == pytest.approx(np.sqrt(2), abs=1e-15)
    # quadrature of |2 cos x|^2 over the torus
    x = uniform_grid(GridSpec(1, 64))[:, 0]
    assert np.mean(np.abs(2 * np.cos(x)) ** 2) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("d,Q,s", [(1, 7, 15), (1, 7, 40), (2, 5, 11), (2, 5, 13), (3, 2, 5)])
def test_parseval_agrees_with_grid_quadrature(d, Q, s):
    rng = np.random.default_rng(d * 100 + s)
    lam = hyperbolic_cross(d, Q)
    assert s > 2 * lam.radius()
    u = TrigPolynomial(lam, rng.standard_normal(lam.N) + 1j * rng.standard_normal(lam.N))
    quad = np.mean(np.abs(evaluate(u, uniform_grid(GridSpec(d, s)))) ** 2)
    assert parseval_norm(u) ** 2 == pytest.approx(quad, rel=0, abs=1e-10 * max(1, quad))


def test_uniform_grid_examples():
    np.testing.assert_allclose(uniform_grid(GridSpec(1, 4))[:, 0], [0, np.pi / 2, np.pi, 3 * np.pi / 2])
    g = uniform_grid(GridSpec(2, 2))
    assert g.shape == (4, 2)
    np.testing.assert_allclose(g, [[0, 0], [0, np.pi], [np.pi, 0], [np.pi, np.pi]])
    with pytest.raises(ValueError):
        GridSpec(1, 0)
    with pytest.raises(ResourceLimitError):
        uniform_grid(GridSpec(3, 200), max_size=10_000)


@pytest.mark.parametrize("Q", [1, 4, 9])
def test_grid_discrete_orthogonality(Q):
    s = 2 * Q + 1
    V = basis_matrix(FrequencySet(np.arange(-Q, Q + 1)), uniform_grid(GridSpec(1, s)))
    np.testing.assert_allclose(V.conj().T @ V / s, np.eye(s), atol=1e-13)


def test_json_round_trip():
    rng = np.random.default_rng(0)
    lam = hyperbolic_cross(2, 4)
    u = TrigPolynomial(lam, rng.standard_normal(lam.N) + 1j * rng.standard_normal(lam.N))
    back = TrigPolynomial.from_json(json.loads(json.dumps(u.to_json())))
    assert back.basis == lam
    np.testing.assert_array_equal(back.coefficients, u.coefficients)


def test_embed_and_restrict():
    small, big = hyperbolic_cross(1, 2), hyperbolic_cross(1, 5)
    u = TrigPolynomial(small, np.arange(5) + 1.0)
    e = u.embed(big)
    assert e.coefficient(3) == 0 and e.coefficient(-2) == 1
    np.testing.assert_array_equal(e.restrict(small).coefficients, u.coefficients)
    with pytest.raises(ValueError):
        TrigPolynomial(big, np.ones(11)).embed(small)
