import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from measent.errors import InputError, NumericalFailure
from measent.sdp import (
    DUAL_INFEASIBLE,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    Model,
    Tolerances,
    bmat,
    inner,
    solve,
    solve_or_raise,
    trace,
)
from measent.sdp.check import kkt_residuals

from helpers import rng


def _spectral_bound():
    m = Model()
    z = m.variable("Z", 2)
    m.add_lmi(z - np.eye(2))
    m.minimize(trace(z))
    return m, z


def _square_root():
    m = Model()
    t = m.variable("T", 2)
    m.add_lmi(bmat([[np.eye(2), t], [t, np.diag([4.0, 9.0])]]))
    m.maximize(trace(t))
    return m, t


def _contradiction():
    m, z = _spectral_bound()
    m.add_inequality(1 - trace(z))
    return m


def test_spectral_bound():
    m, z = _spectral_bound()
    sol = m.solve()
    assert sol.status == OPTIMAL
    assert abs(sol.objective - 2) < 1e-7
    assert np.allclose(sol[z], np.eye(2), atol=1e-6)


def test_square_root_block():
    m, t = _square_root()
    sol = m.solve()
    assert sol.status == OPTIMAL
    assert abs(sol.objective - 5) < 1e-7
    assert np.allclose(sol[t], np.diag([2.0, 3.0]), atol=1e-5)


def test_infeasible_toy():
    assert _contradiction().solve().status == PRIMAL_INFEASIBLE


def test_unbounded():
    m = Model()
    z = m.variable("Z", 2, "psd")
    m.maximize(trace(z))
    assert m.solve().status == DUAL_INFEASIBLE


def test_inconsistent_equalities():
    m = Model()
    z = m.variable("Z", 2)
    m.add_equality(z, np.eye(2))
    m.add_equality(trace(z), 3.0)
    m.minimize(trace(z))
    assert m.solve().status == PRIMAL_INFEASIBLE


def test_equality_constrained_maximum():
    m = Model()
    z = m.variable("Z", 2, "psd")
    m.add_equality(trace(z), 1.0)
    m.maximize(inner(np.diag([1.0, 3.0]), z))
    sol = m.solve()
    assert sol.status == OPTIMAL and abs(sol.objective - 3) < 1e-7


def test_compile_single_psd_variable():
    m = Model()
    z = m.variable("Z", 2, "psd")
    m.minimize(trace(z))
    sf = m.compile()
    assert [b.size for b in sf.blocks] == [4]
    assert sf.blocks[0].embedded
    # recovery of a feasible assignment preserves the objective
    val = np.array([[0.7, 0.1 - 0.2j], [0.1 + 0.2j, 0.4]])
    x = sf.flatten({z: val})
    assert np.allclose(sf.recover(x)[z], val)
    assert abs(sf.model_objective(x) - 1.1) < 1e-12


def test_compile_feasibility_has_zero_objective():
    m = Model()
    z = m.variable("Z", 2, "psd")
    m.add_equality(trace(z), 1.0)
    assert not np.any(m.compile().c)


def test_compile_two_variables_one_lmi():
    m = Model()
    x = m.variable("X", 2, "psd")
    y = m.variable("Y", 2, "psd")
    m.add_lmi(x - y)
    m.minimize(trace(x))
    assert sorted(b.size for b in m.compile().blocks) == [4, 4, 4]


def test_compile_rejects_shape_mismatch():
    m = Model()
    x = m.variable("X", 2)
    with pytest.raises(InputError):
        m.add_equality(x, np.eye(3))


def test_iteration_cap_raises():
    m, _ = _square_root()
    with pytest.raises(NumericalFailure) as info:
        solve_or_raise(m.compile(), Tolerances(max_iter=2))
    assert info.value.best is not None


def test_deterministic():
    runs = [_square_root()[0].solve() for _ in range(2)]
    assert runs[0].iterations == runs[1].iterations
    assert runs[0].objective == runs[1].objective
    assert np.array_equal(runs[0].x, runs[1].x)


@pytest.mark.parametrize("build", [lambda: _spectral_bound()[0], lambda: _square_root()[0]])
def test_kkt_recomputation_matches_reported(build):
    sol = build().solve()
    kkt = kkt_residuals(sol)
    floor = 1e-14
    assert kkt["primal"] <= 10 * max(sol.primal_residual, floor)
    assert kkt["dual"] <= 10 * max(sol.dual_residual, floor)
    assert kkt["cone"] >= -1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 3))
def test_weak_duality_on_random_trace_problems(seed, d):
    # min <C, Z> over density operators equals lambda_min(C)
    gen = rng(seed)
    g = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    c = g + g.conj().T
    m = Model()
    z = m.variable("Z", d, "psd")
    m.add_equality(trace(z), 1.0)
    m.minimize(inner(c, z))
    sol = m.solve()
    assert sol.status == OPTIMAL
    assert sol.objective >= sol.dual_objective - 1e-9
    assert abs(sol.objective - np.linalg.eigvalsh(c)[0]) < 1e-7
