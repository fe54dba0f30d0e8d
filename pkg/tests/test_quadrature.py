import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from n2dsolve.errors import InvalidArgumentError
from n2dsolve.quadrature import gauss_legendre, interp_matrix, map_to_segment


def test_order_one_is_midpoint_rule():
    r = gauss_legendre(1)
    assert r.nodes.tolist() == [0.0]
    assert r.weights.tolist() == [2.0]


def test_order_two_matches_closed_form():
    r = gauss_legendre(2)
    assert np.allclose(r.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    assert np.allclose(r.weights, [1.0, 1.0], atol=1e-15)


def test_order_ten_moments():
    r = gauss_legendre(10)
    assert abs(r.weights.sum() - 2.0) <= 1e-13
    assert abs(np.sum(r.weights * r.nodes**2) - 2.0 / 3.0) <= 1e-13


@pytest.mark.parametrize("order", range(1, 21))
def test_exactness_up_to_degree(order):
    r = gauss_legendre(order)
    for m in range(2 * order):
        exact = 0.0 if m % 2 else 2.0 / (m + 1)
        got = float(np.sum(r.weights * r.nodes**m))
        assert abs(got - exact) <= 1e-12 * max(1.0, abs(exact))


@pytest.mark.parametrize("order", range(2, 21))
def test_symmetry_and_positivity(order):
    r = gauss_legendre(order)
    assert np.max(np.abs(r.nodes + r.nodes[::-1])) <= 1e-14
    assert np.all(r.weights > 0)
    assert np.all(np.diff(r.nodes) > 0)


@pytest.mark.parametrize("order", (1, 2, 5, 10, 16, 24))
def test_against_reference_implementation(order):
    # independent oracle: numpy's own Gauss-Legendre tables
    r = gauss_legendre(order)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    assert np.max(np.abs(r.nodes - nodes)) <= 1e-14
    assert np.max(np.abs(r.weights - weights)) <= 1e-14


def test_zero_order_rejected():
    with pytest.raises(InvalidArgumentError):
        gauss_legendre(0)


def test_map_to_segment_midpoint():
    r = gauss_legendre(1)
    pts = map_to_segment(r, (0.0, 0.0), (1.0, 0.0))
    assert np.allclose(pts, [[0.5, 0.0]])


def test_map_to_segment_vertical():
    r = gauss_legendre(2)
    pts = map_to_segment(r, (0.0, 0.0), (0.0, 2.0))
    expect = np.array([[0.0, 1 - 1 / np.sqrt(3)], [0.0, 1 + 1 / np.sqrt(3)]])
    assert np.allclose(pts, expect, atol=1e-15)


def test_map_to_segment_matches_affine_formula():
    r = gauss_legendre(10)
    p0, p1 = np.array([0.3, -1.2]), np.array([-0.7, 2.5])
    pts = map_to_segment(r, p0, p1)
    t = 0.5 * (r.nodes + 1.0)
    direct = p0 + t[:, None] * (p1 - p0)
    assert np.max(np.abs(pts - direct)) <= 1e-15
    # strictly interior and monotone along the segment
    proj = (pts - p0) @ (p1 - p0)
    assert np.all(proj > 0) and np.all(proj < np.dot(p1 - p0, p1 - p0))
    assert np.all(np.diff(proj) > 0)


def test_map_to_segment_coincident_endpoints():
    with pytest.raises(InvalidArgumentError):
        map_to_segment(gauss_legendre(3), (1.0, 1.0), (1.0, 1.0))


def test_interp_identity_at_own_nodes():
    r = gauss_legendre(12)
    m = interp_matrix(r, r.nodes)
    assert np.max(np.abs(m - np.eye(12))) <= 1e-14


def test_interp_cubic_exact():
    r = gauss_legendre(4)
    m = interp_matrix(r, [0.3])
    assert abs((m @ r.nodes**3)[0] - 0.027) <= 1e-13


def test_interp_exp_at_zero():
    # the exact interpolation error through 10 Gauss nodes is
    # prod(x_i) * e^xi / 10! ~ 3.8e-10, so the bound sits just above it
    r = gauss_legendre(10)
    m = interp_matrix(r, [0.0])
    err = abs((m @ np.exp(r.nodes))[0] - 1.0)
    assert err <= 1e-9


def test_interp_exp_convergence():
    targets = np.linspace(-1, 1, 101)
    errs = []
    for order in (4, 8, 12):
        r = gauss_legendre(order)
        m = interp_matrix(r, targets)
        errs.append(np.max(np.abs(m @ np.exp(r.nodes) - np.exp(targets))))
    for a, b in zip(errs, errs[1:]):
        if a > 1e-13:
            assert a >= 1e3 * b


def test_interp_targets_outside_range_rejected():
    with pytest.raises(InvalidArgumentError):
        interp_matrix(gauss_legendre(4), [1.5])


@settings(max_examples=25, deadline=None)
@given(
    order=st.integers(2, 14),
    coeffs=st.lists(st.floats(-3, 3), min_size=1, max_size=14),
    t=st.floats(-1, 1),
)
def test_interp_reproduces_polynomials(order, coeffs, t):
    coeffs = coeffs[:order]  # degree < order
    r = gauss_legendre(order)
    poly = np.polynomial.Polynomial(coeffs)
    m = interp_matrix(r, [t])
    assert abs((m @ poly(r.nodes))[0] - poly(t)) <= 1e-11 * max(
        1.0, np.max(np.abs(poly(r.nodes)))
    )
