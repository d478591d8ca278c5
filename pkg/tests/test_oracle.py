from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from measent import linalg as la
from measent.errors import DomainError, InputError
from measent.oracle import (
    KL,
    Measurement,
    OutcomeDistribution,
    brute_force_measured,
    classical_kl,
    classical_renyi,
    fuchs_caves,
    induced,
    monotone_violation,
    random_stochastic,
    root_fidelity,
    variational_probe,
)
from measent.states import measured_renyi

from helpers import PLUS, commuting_pair, full_rank_pair, rng


def _dist(p, q):
    return OutcomeDistribution(np.asarray(p, float), np.asarray(q, float))


@pytest.mark.parametrize("alpha", ["1/4", "1/2", "2", "3"])
def test_renyi_equal_distributions(alpha):
    assert abs(classical_renyi(_dist([0.2, 0.8], [0.2, 0.8]), alpha)) < 1e-15


def test_renyi_examples():
    assert np.isclose(classical_renyi(_dist([0.75, 0.25], [0.5, 0.5]), 2), np.log(1.25))
    assert classical_renyi(_dist([1, 0], [0, 1]), 2) == np.inf


def test_kl_examples():
    assert classical_kl(_dist([0.3, 0.7], [0.3, 0.7])) == 0.0
    assert np.isclose(classical_kl(_dist([0.75, 0.25], [0.5, 0.5])), 0.75 * np.log(1.5) + 0.25 * np.log(0.5))
    assert np.isclose(classical_kl(_dist([1, 0], [0.5, 0.5])), np.log(2))


def test_induced_examples():
    d = induced(Measurement(np.eye(2)), np.diag([0.3, 0.7]), np.diag([0.6, 0.4]))
    assert np.allclose(d.p, [0.3, 0.7]) and np.allclose(d.q, [0.6, 0.4])
    u = la.random_unitary(3, rng(30))
    d = induced(Measurement(u), np.eye(3) / 3, np.eye(3) / 3)
    assert np.allclose(d.p, 1 / 3)
    had = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(induced(Measurement(had), np.diag([1.0, 0.0]), np.eye(2)).p, [0.5, 0.5])


def test_induced_rejects_incomplete_measurement():
    v = np.eye(2)
    v[:, 1] = 0
    with pytest.raises(InputError):
        induced(Measurement(v), np.eye(2) / 2, np.eye(2) / 2)


def test_brute_force_examples():
    rho = la.random_density(2, rng(31))
    assert abs(brute_force_measured(rho, rho, "1/2", budget=20)[0]) < 1e-12
    rho, sigma, p, q = commuting_pair(3, rng(32))
    value, _ = brute_force_measured(rho, sigma, 2, budget=200)
    assert abs(value - np.log(np.sum(p ** 2 / q))) < 1e-6
    value, _ = brute_force_measured(np.diag([1.0, 0.0]), PLUS, "1/2", budget=500)
    assert abs(value - np.log(2)) < 1e-4


def test_brute_force_is_seeded():
    rho, sigma = full_rank_pair(3, rng(33))
    a = brute_force_measured(rho, sigma, KL, budget=30, seed=4)
    b = brute_force_measured(rho, sigma, KL, budget=30, seed=4)
    assert a[0] == b[0] and np.array_equal(a[1].vectors, b[1].vectors)


def test_fuchs_caves_examples():
    rho = la.random_density(2, rng(34))
    obs, f = fuchs_caves(rho, rho)
    assert np.allclose(obs, np.eye(2), atol=1e-10) and abs(f - 1) < 1e-12
    _, f = fuchs_caves(np.diag([0.2, 0.8]), np.diag([0.5, 0.5]))
    assert np.isclose(f, np.sqrt(0.1) + np.sqrt(0.4))
    with pytest.raises(DomainError):
        fuchs_caves(np.eye(2) / 2, np.diag([1.0, 0.0]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 3))
def test_fuchs_caves_routes_agree(seed, d):
    rho, sigma = full_rank_pair(d, rng(seed))
    obs, f = fuchs_caves(rho, sigma)
    assert abs(f - root_fidelity(rho, sigma)) < 1e-10
    v = np.linalg.eigh(obs)[1]
    dist = induced(Measurement(v), rho, sigma)
    assert abs(np.sum(np.sqrt(dist.p * dist.q)) - f) < 1e-8


def test_probe_at_identity():
    sigma = np.diag([0.3, 0.5])
    for a in ("1/4", "3/4", "2"):
        val = variational_probe(np.eye(2) / 2, sigma, a, [np.eye(2)])[0]
        w = float(Fraction(a))
        assert np.isclose(val, w + (1 - w) * 0.8)


def test_probe_is_one_sided_on_commuting_example():
    rho, sigma = np.diag([0.75, 0.25]), np.diag([0.5, 0.5])
    gen = rng(35)
    samples = [la.random_density(2, gen) * 2 + 0.05 * np.eye(2) for _ in range(200)]
    assert np.max(variational_probe(rho, sigma, 2, samples)) <= 1.25 + 1e-12


def test_probe_at_optimizer_saturates():
    rho, sigma = full_rank_pair(2, rng(36))
    for a in ("1/4", "3/4", "2"):
        res = measured_renyi(rho, sigma, a)
        assert abs(variational_probe(rho, sigma, a, [res.omega])[0] - res.quasi) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5))
def test_classical_renyi_monotone_in_order(seed, n):
    gen = rng(seed)
    d = _dist(gen.dirichlet(np.ones(n)), gen.dirichlet(np.ones(n)))
    values = [classical_renyi(d, a) for a in ("1/8", "1/4", "1/2", "3/4", "5/4", "2", "3")]
    assert monotone_violation(values) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4), st.integers(2, 4), st.sampled_from(["1/2", "2", KL]))
def test_classical_data_processing(seed, n, k, alpha):
    gen = rng(seed)
    p, q = gen.dirichlet(np.ones(n)), gen.dirichlet(np.ones(n))
    w = random_stochastic(k, n, gen)
    f = classical_kl if alpha == KL else (lambda d: classical_renyi(d, alpha))
    assert f(_dist(w @ p, w @ q)) <= f(_dist(p, q)) + 1e-10


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10_000))
def test_sandwich_certification(seed):
    rho, sigma = full_rank_pair(2, rng(seed))
    gen = rng(seed + 1)
    samples = [la.random_density(2, gen) * 2 + 0.05 * np.eye(2) for _ in range(50)]
    for a in ("3/4", "2"):
        res = measured_renyi(rho, sigma, a)
        lower, _ = brute_force_measured(rho, sigma, a, budget=500)
        probe = variational_probe(rho, sigma, a, samples + [res.omega])
        assert lower <= res.value + 1e-7 and res.value - lower <= 1e-4
        if a == "2":
            assert probe.max() <= res.quasi + 1e-6
        else:
            assert probe.min() >= res.quasi - 1e-6
