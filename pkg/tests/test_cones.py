from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from measent import linalg as la
from measent.cones import (
    RationalExponent,
    approximation_error,
    build_geomean_graph,
    build_log_perspective_graph,
    gauss_legendre,
    nearest_dyadic,
    scalar_r,
    select_mk,
)
from measent.errors import AccuracyUnreachable, InputError
from measent.sdp import Variable

from helpers import graph_status, pd_pair, rng


def test_gauss_legendre_small_rules():
    r1 = gauss_legendre(1)
    assert np.allclose(r1.nodes, [0.5]) and np.allclose(r1.weights, [1.0])
    r2 = gauss_legendre(2)
    assert np.allclose(r2.nodes, [0.5 - 1 / (2 * np.sqrt(3)), 0.5 + 1 / (2 * np.sqrt(3))])
    assert np.allclose(r2.weights, [0.5, 0.5])
    r3 = gauss_legendre(3)
    assert abs(np.sum(r3.weights * r3.nodes ** 5) - 1 / 6) < 1e-12


@pytest.mark.parametrize("m", [0, 65, 2.5])
def test_gauss_legendre_range(m):
    with pytest.raises(InputError):
        gauss_legendre(m)


def test_scalar_r_examples():
    for m, k in [(1, 0), (3, 3), (5, 2)]:
        assert scalar_r(1.0, m, k) == 0.0
    assert np.isclose(scalar_r(2.0, 1, 0), 2 / 3)
    assert abs(scalar_r(2.0, 3, 3) - np.log(2)) < 1e-5


def test_select_mk_loose():
    sel = select_mk(2.0, 1.0)
    assert (sel.m, sel.k) == (1, 0)
    assert sel.bound <= 1.0


def test_select_mk_unreachable():
    with pytest.raises(AccuracyUnreachable) as info:
        select_mk(10.0, 1e-30)
    assert info.value.best_bound > 0


def test_select_mk_against_independent_scan():
    sel = select_mk(10.0, 1e-6)
    assert sel.m + sel.k <= 10
    z = np.linspace(0.1, 10.0, 50_001)
    assert np.max(np.abs(scalar_r(z, sel.m, sel.k) - np.log(z))) <= 1e-6 * 1.01
    # no pair with a smaller total meets the target
    for total in range(1, sel.m + sel.k):
        for k in range(total):
            assert approximation_error(total - k, k, 10.0) > 1e-6


def test_rational_exponent_validation():
    assert RationalExponent.of("3/8").is_dyadic
    assert not RationalExponent.of(Fraction(-1, 3)).is_dyadic
    with pytest.raises(InputError):
        RationalExponent.of(0.5)
    with pytest.raises(InputError):
        RationalExponent.of(Fraction(5, 2))
    with pytest.raises(InputError):
        RationalExponent(2, 4)


def _operands(d=2):
    return Variable("X", d), Variable("Y", d), Variable("T", d)


def test_half_is_single_block():
    x, y, t = _operands()
    g = build_geomean_graph(Fraction(1, 2), "hypograph", x, y, t)
    assert len(g.blocks) == 1
    assert g.certificate.lmi_count == 1 and g.certificate.error_bound == 0.0


def test_three_eighths_chain():
    x, y, t = _operands()
    g = build_geomean_graph(Fraction(3, 8), "hypograph", x, y, t)
    assert len(g.blocks) == 3
    assert g.certificate.error_bound == 0.0 and not g.certificate.approximated


def test_side_validity():
    x, y, t = _operands()
    with pytest.raises(InputError):
        build_geomean_graph(Fraction(3, 2), "hypograph", x, y, t)
    with pytest.raises(InputError):
        build_geomean_graph(Fraction(1, 2), "epigraph", x, y, t)


def test_non_dyadic_records_substitution():
    gen = rng(11)
    x, y = pd_pair(2, gen)
    g = build_geomean_graph(Fraction(-1, 3), "epigraph", x, y, Variable("T", 2))
    cert = g.certificate
    assert cert.approximated
    assert cert.substituted == nearest_dyadic(Fraction(-1, 3))
    assert 0 < cert.error_bound < 1e-8


def test_inverse_boundary():
    y = np.diag([2.0, 0.5]) + 0.3 * np.array([[0, 1], [1, 0]])
    yi = np.linalg.inv(y)
    assert graph_status(build_geomean_graph(-1, "epigraph", np.eye(2), y, yi)) == "optimal"
    assert graph_status(build_geomean_graph(-1, "epigraph", np.eye(2), y, yi - 1e-3 * np.eye(2))) == "primal-infeasible"


def test_three_eighths_boundary():
    x, y = pd_pair(2, rng(12))
    g = la.geometric_mean(x, y, 0.375)
    assert graph_status(build_geomean_graph("3/8", "hypograph", x, y, g - 1e-6 * np.eye(2))) == "optimal"
    assert graph_status(build_geomean_graph("3/8", "hypograph", x, y, g + 1e-6 * np.eye(2))) == "primal-infeasible"


def test_compressed_epigraph_requires_isometry():
    x, y = pd_pair(2, rng(13))
    with pytest.raises(InputError):
        build_geomean_graph(Fraction(-1, 2), "epigraph", x, y, Variable("T", 1), compress=np.array([[2.0], [0.0]]))


def test_log_perspective_counts():
    g = build_log_perspective_graph(*_operands(), 3, 3)
    assert len(g.blocks) == 6
    assert len(g.auxiliaries) == 7


def test_log_perspective_identity_boundary():
    assert graph_status(build_log_perspective_graph(np.eye(2), np.eye(2), np.zeros((2, 2)), 3, 3)) == "optimal"
    assert graph_status(build_log_perspective_graph(np.eye(2), np.eye(2), 1e-6 * np.eye(2), 3, 3)) == "primal-infeasible"


@pytest.mark.parametrize("delta, status", [(2e-5, "optimal"), (-2e-5, "primal-infeasible")])
def test_log_perspective_diagonal_boundary(delta, status):
    t = np.diag([np.log(4) - delta, np.log(0.25) - delta])
    g = build_log_perspective_graph(np.eye(2), np.diag([4.0, 0.25]), t, 3, 3)
    assert graph_status(g) == status


@settings(max_examples=25, deadline=None)
@given(st.floats(1.5, 50.0), st.integers(1, 5), st.integers(0, 5))
def test_scalar_r_is_odd_in_log(a, m, k):
    # r_{m,k}(1/z) = -r_{m,k}(z): the node set is symmetric about 1/2
    z = np.geomspace(1 / a, a, 17)
    assert np.allclose(scalar_r(1 / z, m, k), -scalar_r(z, m, k), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.5, 100.0), st.integers(1, 4), st.integers(0, 4))
def test_more_roots_never_hurt(a, m, k):
    assert approximation_error(m, k + 1, a) <= approximation_error(m, k, a) * (1 + 1e-9) + 1e-15
