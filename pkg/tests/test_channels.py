import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from measent import linalg as la
from measent.channels import (
    ChannelPair,
    EnergyConstraint,
    channel_measured_relent,
    channel_measured_renyi,
    channel_model,
    extract_channel_strategy,
)
from measent.errors import InfeasibleConstraintError, InputError
from measent.oracle import bloch_grid, root_fidelity
from measent.states import measured_relative_entropy, measured_renyi

from helpers import DEPOLARIZING, I2, full_rank_pair, replacer_choi, rng


def identity_vs_depolarizing():
    return ChannelPair.from_kraus([I2], DEPOLARIZING)


def replacer_pair(seed):
    r0, s0 = full_rank_pair(2, rng(seed))
    return ChannelPair(replacer_choi(2, r0), replacer_choi(2, s0), 2, 2), r0, s0


# ------------------------------------------------------------ validation


def test_pair_requires_trace_preserving_first_channel():
    with pytest.raises(InputError):
        ChannelPair(2 * np.eye(4), np.eye(4), 2, 2)
    ChannelPair(np.eye(4) / 2, 3 * np.eye(4), 2, 2)  # M only needs to be CP


def test_pair_shape_checked():
    with pytest.raises(InputError):
        ChannelPair(np.eye(6) / 3, np.eye(6), 2, 2)


def test_energy_below_ground_state_is_infeasible():
    with pytest.raises(InfeasibleConstraintError):
        EnergyConstraint(np.diag([0.0, 1.0]), -1.0)


def test_unconstrained_model_is_bitwise_identical():
    pair = identity_vs_depolarizing()
    for task, kw in (("renyi", {"alpha": "3/4"}), ("relent", {"m": 2, "k": 2})):
        plain = channel_model(pair, task, None, **kw).compile()
        trivial = channel_model(pair, task, EnergyConstraint(np.eye(2), 1.0), **kw).compile()
        assert np.array_equal(plain.c, trivial.c)
        assert np.array_equal(plain.A, trivial.A) and np.array_equal(plain.b, trivial.b)
        assert len(plain.blocks) == len(trivial.blocks)
        for p, t in zip(plain.blocks, trivial.blocks):
            assert np.array_equal(p.G, t.G) and np.array_equal(p.h, t.h) and np.array_equal(p.idx, t.idx)


def test_binding_energy_adds_a_constraint():
    pair = identity_vs_depolarizing()
    plain = channel_model(pair, "renyi", None, alpha="1/2").compile()
    bound = channel_model(pair, "renyi", EnergyConstraint(np.diag([0.0, 1.0]), 0.3), alpha="1/2").compile()
    assert len(bound.blocks) == len(plain.blocks) + 1


# ------------------------------------------------------------ Renyi


@pytest.mark.parametrize("alpha", ["1/4", "1/2", "2"])
def test_same_channel_gives_zero(alpha):
    ks = la.random_kraus(2, 2, 2, rng(40))
    g = la.choi_from_kraus(ks)
    res = channel_measured_renyi(ChannelPair(g, g, 2, 2), alpha)
    assert abs(res.value) < 1e-6
    assert res.saturation_residual < 1e-6


@pytest.mark.parametrize("alpha", ["1/4", "1/2", "3/4", "3/2", "2"])
def test_replacer_reduces_to_states(alpha):
    pair, r0, s0 = replacer_pair(41)
    assert abs(channel_measured_renyi(pair, alpha).value - measured_renyi(r0, s0, alpha).value) < 1e-4


def test_replacer_measurement_acts_on_output_only():
    pair, _, _ = replacer_pair(42)
    res = channel_measured_renyi(pair, "2")
    op = res.omega_prime
    reduced = la.partial_trace(op, (2, 2), 1) / 2
    assert np.linalg.norm(op - np.kron(np.eye(2), reduced)) <= 1e-4 * np.linalg.norm(op)


def test_identity_vs_depolarizing_half():
    res = channel_measured_renyi(identity_vs_depolarizing(), "1/2")
    grid = max(-2 * np.log(root_fidelity(*identity_vs_depolarizing().sandwiched(s))) for s in bloch_grid(200))
    assert abs(res.value - grid) <= 2e-3
    assert res.saturation_residual <= 1e-4 + res.accuracy


def test_input_state_is_a_state():
    res = channel_measured_renyi(identity_vs_depolarizing(), "3/4", EnergyConstraint(np.diag([0.0, 1.0]), 0.2))
    assert abs(np.trace(res.rho).real - 1) < 1e-8
    assert np.linalg.eigvalsh(res.rho)[0] > -1e-8
    assert np.trace(np.diag([0.0, 1.0]) @ res.rho).real <= 0.2 + 1e-8
    assert res.measurement.identity_residual() < 1e-8


def test_energy_monotone():
    pair = identity_vs_depolarizing()
    h = np.diag([0.0, 1.0])
    values = [channel_measured_renyi(pair, "1/2", EnergyConstraint(h, e)).value for e in (0.0, 0.1, 0.25, 0.5, 0.9)]
    assert all(b >= a - 1e-6 for a, b in zip(values, values[1:]))


def test_orthogonal_choi_supports_are_infinite():
    flip = ChannelPair.from_kraus([I2], [np.array([[0, 1], [1, 0]])])
    g0 = la.choi_from_kraus([np.outer([1, 0], [1, 0]), np.outer([1, 0], [0, 1])])
    g1 = la.choi_from_kraus([np.outer([0, 1], [1, 0]), np.outer([0, 1], [0, 1])])
    assert channel_measured_renyi(ChannelPair(g0, g1, 2, 2), "1/2").infinite
    assert channel_measured_renyi(flip, "2").value > 0


# ------------------------------------------------------------ relative entropy


def test_relent_same_channel():
    g = la.choi_from_kraus(DEPOLARIZING)
    assert abs(channel_measured_relent(ChannelPair(g, g, 2, 2)).value) < 1e-6


def test_relent_replacer():
    pair, r0, s0 = replacer_pair(43)
    assert abs(channel_measured_relent(pair).value - measured_relative_entropy(r0, s0).value) < 1e-4


def test_relent_ground_state_input():
    pair = identity_vs_depolarizing()
    res = channel_measured_relent(pair, EnergyConstraint(np.diag([0.0, 1.0]), 0.0))
    fixed = measured_relative_entropy(*pair.sandwiched(np.diag([1.0, 0.0])), m=3, k=3)
    assert res.face_reduced
    assert abs(res.value - fixed.value) < 1e-4
    assert np.allclose(res.rho, np.diag([1.0, 0.0]), atol=1e-8)


def test_relent_support_violation():
    g0 = la.choi_from_kraus([I2])
    g1 = replacer_choi(2, np.diag([1.0, 0.0]))
    assert channel_measured_relent(ChannelPair(g0, g1, 2, 2)).infinite


# ------------------------------------------------------------ strategies


def test_strategy_on_same_channel():
    g = la.choi_from_kraus(DEPOLARIZING)
    res = channel_measured_renyi(ChannelPair(g, g, 2, 2), "3/4")
    rho, meas = extract_channel_strategy(res)
    assert meas.identity_residual() < 1e-8
    assert res.saturation_residual <= 1e-6


def test_strategy_requires_optimizers():
    g0 = la.choi_from_kraus([np.outer([1, 0], [1, 0]), np.outer([1, 0], [0, 1])])
    g1 = la.choi_from_kraus([np.outer([0, 1], [1, 0]), np.outer([0, 1], [0, 1])])
    with pytest.raises(InputError):
        extract_channel_strategy(channel_measured_renyi(ChannelPair(g0, g1, 2, 2), "1/2"))


def test_rank_deficient_input_is_noted():
    res = channel_measured_relent(identity_vs_depolarizing(), EnergyConstraint(np.diag([0.0, 1.0]), 0.0))
    extract_channel_strategy(res)
    assert any("rank-deficient" in n for n in res.notes)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["1/2", "2"]))
def test_channel_dominates_fixed_inputs(seed, alpha):
    gen = rng(seed)
    kn, km = la.random_kraus(2, 2, 2, gen), la.random_kraus(2, 2, 2, gen)
    km = [0.9 * k for k in km] + [np.sqrt(0.19) * k for k in la.random_kraus(2, 2, 1, gen)]
    pair = ChannelPair.from_kraus(kn, km)
    res = channel_measured_renyi(pair, alpha)
    for tau in (la.random_density(2, gen) for _ in range(3)):
        state = measured_renyi(la.apply_kraus(kn, tau), la.apply_kraus(km, tau), alpha).value
        assert res.value >= state - 1e-6
