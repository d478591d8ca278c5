"""Sampling and small utilities shared by the test modules."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from measent import linalg as la

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]])
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)
PLUS = la.proj(np.array([1, 1]) / np.sqrt(2))
DEPOLARIZING = [0.5 * p for p in (I2, PAULI_X, PAULI_Y, PAULI_Z)]
ALPHA_GRID = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(3, 2), Fraction(2), Fraction(3)]


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def full_rank_pair(d: int, gen: np.random.Generator, floor: float = 0.05):
    """Two random states mixed with a little of the maximally mixed state."""
    out = []
    for _ in range(2):
        r = la.random_density(d, gen)
        out.append((1 - floor) * r + floor * np.eye(d) / d)
    return tuple(out)


def commuting_pair(d: int, gen: np.random.Generator):
    """States diagonal in a shared random basis, with their eigenvalue vectors."""
    u = la.random_unitary(d, gen)
    p = gen.dirichlet(np.ones(d)) * 0.9 + 0.1 / d
    q = gen.dirichlet(np.ones(d)) * 0.9 + 0.1 / d
    return (u * p) @ u.conj().T, (u * q) @ u.conj().T, p, q


def renyi_of_vectors(p, q, alpha) -> float:
    a = float(alpha)
    return float(np.log(np.sum(p ** a * q ** (1 - a))) / (a - 1))


def kl_of_vectors(p, q) -> float:
    return float(np.sum(p * np.log(p / q)))


def pd_pair(d: int, gen: np.random.Generator):
    """Random positive definite pair with spectra in roughly [0.1, d + 0.1]."""
    x = la.random_density(d, gen) * d + 0.1 * np.eye(d)
    y = la.random_density(d, gen) * d + 0.1 * np.eye(d)
    return x, y


def replacer_choi(d_a: int, tau) -> np.ndarray:
    return np.kron(np.eye(d_a), tau)


def graph_status(graph) -> str:
    """Solver status of the feasibility problem posed by a cone graph with constant operands."""
    from measent.sdp import Model

    model = Model("feasibility")
    model.add_graph(graph)
    model.minimize(0.0)
    return model.solve().status


# criterion number -> "criterion N: PASS|FAIL  detail", filled by test_acceptance
ACCEPTANCE_LINES: dict[int, str] = {}
