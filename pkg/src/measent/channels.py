"""Measured Renyi and measured relative entropies of a pair of channels.

The channel quantity is the supremum of the state quantity over inputs
``rho`` fed through the canonical purification.  Substituting
``omega = (rho^{1/2} (x) I) omega' (rho^{1/2} (x) I)`` turns the sandwiched
Choi operators back into ``Gamma^N``, ``Gamma^M`` and moves ``rho`` into the
first slot of the geometric mean (or log perspective) as ``rho (x) I``, which
keeps the whole problem jointly convex in ``(rho, omega, theta)``.

Layouts put the reference system R first and the output B second.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .cones import ConeCertificate, approximation_error, build_log_perspective_graph
from .errors import InfeasibleConstraintError, InputError
from .oracle import KL, Measurement, OutcomeDistribution, induced
from .sdp import Model, Tolerances, inner, kron, trace
from .sdp.solver import DUAL_INFEASIBLE, NEAR_OPTIMAL, solve
from .states import (
    RenyiOrder,
    SolverSummary,
    adaptive_mk,
    extract_measurement,
    omega_conditioning,
    build_renyi_model,
    lift_theta,
    NEAR_NOTE,
    require_solution,
    support_check,
    supports_orthogonal,
    verify_saturation,
)

TP_TOL = 1e-8
FACE_TOL = 1e-9
RHO_FLOOR = 1e-10
UNBOUNDED_CAP = 1e6
VANISHING_QUASI = 1e-12


# ------------------------------------------------------------------- inputs


@dataclass(frozen=True)
class ChannelPair:
    """Choi operators of a channel ``N`` and a completely positive map ``M``, both A -> B."""

    gammaN: np.ndarray
    gammaM: np.ndarray
    d_A: int
    d_B: int

    def __post_init__(self):
        if self.d_A < 1 or self.d_B < 1:
            raise InputError("d_A and d_B must be positive")
        size = self.d_A * self.d_B
        gn = la.as_psd(self.gammaN, "Choi operator of N")
        gm = la.as_psd(self.gammaM, "Choi operator of M")
        for name, g in (("N", gn), ("M", gm)):
            if g.shape != (size, size):
                raise InputError(f"Choi operator of {name} has shape {g.shape}, expected {(size, size)}")
        tp = la.partial_trace(gn, (self.d_A, self.d_B), keep=0)
        if np.max(np.abs(tp - np.eye(self.d_A))) > TP_TOL:
            raise InputError("N is not trace preserving: Tr_B Gamma^N differs from I_A")
        object.__setattr__(self, "gammaN", gn)
        object.__setattr__(self, "gammaM", gm)

    @classmethod
    def from_kraus(cls, kraus_n, kraus_m) -> "ChannelPair":
        d_b, d_a = np.asarray(kraus_n[0]).shape
        return cls(la.choi_from_kraus(kraus_n), la.choi_from_kraus(kraus_m), d_a, d_b)

    def compressed(self, v: np.ndarray) -> "ChannelPair":
        """Restrict inputs to the range of the isometry ``v`` (d_A x r)."""
        k = np.kron(v, np.eye(self.d_B))
        gn = k.conj().T @ self.gammaN @ k
        gm = k.conj().T @ self.gammaM @ k
        return ChannelPair(0.5 * (gn + gn.conj().T), 0.5 * (gm + gm.conj().T), v.shape[1], self.d_B)

    def sandwiched(self, rho) -> tuple[np.ndarray, np.ndarray]:
        """Output pair of the canonical purification of ``rho``."""
        return la.sandwich_choi(rho, self.gammaN, self.d_B), la.sandwich_choi(rho, self.gammaM, self.d_B)


@dataclass(frozen=True)
class EnergyConstraint:
    """``Tr[H rho] <= E`` on the channel input."""

    H: np.ndarray
    E: float

    def __post_init__(self):
        h = la.as_hermitian(self.H, "H")
        if not np.isfinite(self.E):
            raise InputError("E must be finite")
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "E", float(self.E))
        if self.lambda_min > self.E:
            raise InfeasibleConstraintError(
                f"E={self.E:g} lies below the smallest eigenvalue {self.lambda_min:g} of H"
            )

    @classmethod
    def unconstrained(cls, d: int) -> "EnergyConstraint":
        return cls(np.eye(d), 1.0)

    @property
    def lambda_min(self) -> float:
        return float(np.linalg.eigvalsh(self.H)[0])

    def redundant(self) -> bool:
        """True when every state satisfies the constraint (``H = c I`` with ``c <= E``)."""
        d = self.H.shape[0]
        c = float(np.real(np.trace(self.H))) / d
        return bool(np.max(np.abs(self.H - c * np.eye(d))) <= la.HERMITIAN_TOL * max(1.0, abs(c))) and c <= self.E

    def ground_face(self) -> np.ndarray | None:
        """Isometry onto the ground space of ``H`` when ``E`` sits at its bottom, else None."""
        if self.redundant():
            return None
        dec = la.eigh(self.H)
        lo = float(dec.eigenvalues[-1])
        scale = max(1.0, float(np.max(np.abs(dec.eigenvalues))))
        if self.E - lo > FACE_TOL * scale:
            return None
        keep = dec.eigenvalues <= lo + FACE_TOL * scale
        return dec.eigenvectors[:, keep]


# ------------------------------------------------------------------- results


@dataclass
class ChannelDivergenceResult:
    task: str
    value: float
    infinite: bool = False
    suspected_infinite: bool = False
    quasi: float | None = None
    order: str | None = None
    rho: np.ndarray | None = None  # optimal input on R ~ A
    omega: np.ndarray | None = None  # on RB
    theta: np.ndarray | None = None
    omega_prime: np.ndarray | None = None  # observable for the sandwiched pair
    measurement: Measurement | None = None
    distribution: OutcomeDistribution | None = None
    classical_value: float | None = None
    saturation_residual: float | None = None
    accuracy: float = 0.0
    m: int | None = None
    k: int | None = None
    solver: SolverSummary | None = None
    certificate: ConeCertificate | None = None
    energy: EnergyConstraint | None = None
    face_reduced: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def band(self) -> tuple[float, float]:
        return (self.value - self.accuracy, self.value + self.accuracy)


# ------------------------------------------------------------------- model assembly


@dataclass
class _Setup:
    pair: ChannelPair  # possibly compressed to the ground face
    iso: np.ndarray | None  # isometry back to the full input space
    constraint: EnergyConstraint | None  # None when redundant or absorbed by the face


def _prepare(pair: ChannelPair, ec: EnergyConstraint | None) -> _Setup:
    if not isinstance(pair, ChannelPair):
        raise InputError("expected a ChannelPair")
    if ec is None:
        ec = EnergyConstraint.unconstrained(pair.d_A)
    if ec.H.shape != (pair.d_A, pair.d_A):
        raise InputError(f"H has shape {ec.H.shape}, expected {(pair.d_A, pair.d_A)}")
    if ec.redundant():
        return _Setup(pair, None, None)
    face = ec.ground_face()
    if face is not None:
        # on the ground space Tr[H rho] = lambda_min = E for every state
        return _Setup(pair.compressed(face), face, None)
    return _Setup(pair, None, ec)


def _input_block(model: Model, setup: _Setup):
    """Input variable ``rho`` with unit trace and the energy slack; returns (rho, rho (x) I)."""
    d_a, d_b = setup.pair.d_A, setup.pair.d_B
    if d_a == 1:
        return None, np.eye(d_b)
    rho = model.variable("rho", d_a, "psd")
    model.add_equality(trace(rho), 1.0, name="unit-trace")
    if setup.constraint is not None:
        model.add_inequality(setup.constraint.E - inner(setup.constraint.H, rho), name="energy")
    return rho, kron(rho, np.eye(d_b))


def _clean_state(r: np.ndarray) -> np.ndarray:
    dec = la.eigh(r)
    w = np.clip(dec.eigenvalues, 0.0, None)
    out = (dec.eigenvectors * w) @ dec.eigenvectors.conj().T
    out = out / np.real(np.trace(out))
    return 0.5 * (out + out.conj().T)


def _lift(setup: _Setup, rho_c, omega_c, theta_c):
    """Map compressed optimizers back to the full input space."""
    if setup.iso is None:
        return rho_c, omega_c, theta_c
    v = setup.iso
    k = np.kron(v, np.eye(setup.pair.d_B))
    return v @ rho_c @ v.conj().T, k @ omega_c @ k.conj().T, k @ theta_c @ k.conj().T


def _rho_value(sol, rho_var, setup) -> np.ndarray:
    if rho_var is None:
        return np.ones((1, 1), dtype=complex)
    return _clean_state(sol[rho_var])


def _result_from(task, sol, setup, rho_var, omega, theta_value, pair, ec, order=None):
    rho_c = _rho_value(sol, rho_var, setup)
    rho, om, th = _lift(setup, rho_c, sol[omega], theta_value)
    res = ChannelDivergenceResult(task, np.inf, order=order, rho=rho, omega=om, theta=th,
                                  energy=ec, face_reduced=setup.iso is not None)
    res.solver = SolverSummary.of(sol)
    if sol.status == NEAR_OPTIMAL:
        res.notes.append(NEAR_NOTE)
    if setup.iso is not None:
        res.notes.append(f"input restricted to the {setup.iso.shape[1]}-dimensional ground space of H")
    return res, rho_c


# ------------------------------------------------------------------- models


def _renyi_model(setup: _Setup, order: RenyiOrder):
    cp = setup.pair
    model = Model("channel-renyi")
    rho_var, x = _input_block(model, setup)
    omega, theta, graph, frame = build_renyi_model(model, order, x, cp.gammaN, cp.gammaM)
    return model, (rho_var, omega, theta, graph, frame)


def _relent_model(setup: _Setup, m: int, k: int):
    cp = setup.pair
    size = cp.d_A * cp.d_B
    model = Model("channel-relent")
    rho_var, x = _input_block(model, setup)
    omega = model.variable("omega", size, "psd")
    theta = model.variable("theta", size)
    graph = build_log_perspective_graph(x, omega, theta, m, k)
    model.add_graph(graph)
    model.maximize(inner(cp.gammaN, theta) - inner(cp.gammaM, omega) + 1.0)
    return model, (rho_var, omega, theta, graph)


def channel_model(pair: ChannelPair, task: str, ec: EnergyConstraint | None = None, alpha=None,
                  m: int = 3, k: int = 3) -> Model:
    """The SDP that the channel routines solve, before any support screening."""
    setup = _prepare(pair, ec)
    if task == "renyi":
        return _renyi_model(setup, RenyiOrder.parse(alpha))[0]
    if task == "relent":
        return _relent_model(setup, m, k)[0]
    raise InputError(f"unknown task {task!r}")


# ------------------------------------------------------------------- Renyi


def channel_measured_renyi(pair: ChannelPair, alpha, ec: EnergyConstraint | None = None,
                           tolerances: Tolerances | None = None) -> ChannelDivergenceResult:
    """Energy-constrained measured Renyi divergence of the channel pair."""
    order = RenyiOrder.parse(alpha)
    setup = _prepare(pair, ec)
    cp = setup.pair
    res0 = ChannelDivergenceResult("renyi", np.inf, order=str(order), energy=ec, face_reduced=setup.iso is not None)
    if order.regime == "high" and support_check(cp.gammaN, cp.gammaM) == "violated":
        res0.infinite = True
        res0.quasi = np.inf
        res0.notes.append("supp(Gamma^N) not contained in supp(Gamma^M)")
        return res0
    if order.regime != "high" and supports_orthogonal(cp.gammaN, cp.gammaM):
        res0.infinite = True
        res0.quasi = 0.0
        res0.notes.append("Choi operators have orthogonal supports")
        return res0

    model, (rho_var, omega, theta, graph, frame) = _renyi_model(setup, order)
    sol = solve(model.compile(), tolerances)
    if order.regime == "high" and sol.status == DUAL_INFEASIBLE:
        res0.infinite = res0.suspected_infinite = True
        res0.quasi = np.inf
        res0.notes.append("objective unbounded above: value reported as +inf (suspected)")
        return res0
    require_solution(sol)

    res, rho_c = _result_from("renyi", sol, setup, rho_var, omega, lift_theta(frame, sol[theta]), pair, ec,
                              str(order))
    res.certificate = graph.certificate
    q = sol.objective
    res.quasi = q
    a = float(order.alpha)
    if order.regime == "high" and q > UNBOUNDED_CAP:
        res.infinite = res.suspected_infinite = True
        res.notes.append(f"quasi-entropy exceeds {UNBOUNDED_CAP:g}: value reported as +inf (suspected)")
        return res
    if q <= VANISHING_QUASI:
        res.infinite = True
        res.notes.append("quasi-entropy vanished")
        return res
    res.value = float(np.log(q) / (a - 1))
    res.accuracy = _renyi_accuracy(order, graph.certificate, cp, rho_c, sol[omega], sol, q)
    return _finish(res, pair, str(order.alpha))


def _renyi_accuracy(order, cert, cp: ChannelPair, rho_c, omega_c, sol, q) -> float:
    """Band on ``D`` from the solver gap and any exponent substitution."""
    a = float(order.alpha)
    dq = abs(sol.objective - sol.dual_objective)
    if cert.approximated:
        x = np.kron(la.floor_spectrum(rho_c, RHO_FLOOR), np.eye(cp.d_B))
        om = la.floor_spectrum(omega_c, 1e-12)
        if order.regime == "low":
            weight = (1 - a) * np.real(np.trace(cp.gammaM))
        else:
            weight = a * np.real(np.trace(cp.gammaN))
        dq += abs(weight) * cert.bound_for(x, om)
    return float(dq / (abs(a - 1) * q))


# ------------------------------------------------------------------- relative entropy


def channel_measured_relent(pair: ChannelPair, ec: EnergyConstraint | None = None, eps: float | None = None,
                            m: int | None = None, k: int | None = None,
                            tolerances: Tolerances | None = None) -> ChannelDivergenceResult:
    """Energy-constrained measured relative entropy of the channel pair via ``r_{m,k}``."""
    setup = _prepare(pair, ec)
    cp = setup.pair
    if support_check(cp.gammaN, cp.gammaM) == "violated":
        res = ChannelDivergenceResult("relent", np.inf, infinite=True, energy=ec, face_reduced=setup.iso is not None)
        res.notes.append("supp(Gamma^N) not contained in supp(Gamma^M)")
        return res

    def run(m_, k_):
        model, (rho_var, omega, theta, graph) = _relent_model(setup, m_, k_)
        sol = solve(model.compile(), tolerances)
        if sol.status == DUAL_INFEASIBLE:
            return (sol, rho_var, omega, theta, graph), np.inf
        require_solution(sol)
        rho_c = _rho_value(sol, rho_var, setup)
        om_p = _omega_prime(rho_c, sol[omega], cp.d_B)
        return (sol, rho_var, omega, theta, graph), omega_conditioning(_support_block(om_p, rho_c, cp.d_B))

    m, k, (sol, rho_var, omega, theta, graph), a = adaptive_mk(run, eps, m, k)
    if sol.status == DUAL_INFEASIBLE:
        res = ChannelDivergenceResult("relent", np.inf, infinite=True, suspected_infinite=True, energy=ec,
                                      m=m, k=k, face_reduced=setup.iso is not None)
        res.notes.append("objective unbounded above: value reported as +inf (suspected)")
        return res
    res, rho_c = _result_from("relent", sol, setup, rho_var, omega, sol[theta], pair, ec)
    res.m, res.k = m, k
    res.certificate = graph.certificate
    res.value = sol.objective
    if res.value > UNBOUNDED_CAP:
        res.infinite = res.suspected_infinite = True
        res.notes.append(f"value exceeds {UNBOUNDED_CAP:g}: reported as +inf (suspected)")
        return res
    res.accuracy = approximation_error(m, k, a) + abs(sol.objective - sol.dual_objective)
    return _finish(res, pair, KL)


# ------------------------------------------------------------------- extraction


def _omega_prime(rho: np.ndarray, omega: np.ndarray, d_b: int) -> np.ndarray:
    k = np.kron(la.pinv_sqrt(rho, RHO_FLOOR), np.eye(d_b))
    out = k @ omega @ k
    return 0.5 * (out + out.conj().T)


def _support_block(op: np.ndarray, rho: np.ndarray, d_b: int) -> np.ndarray:
    """Compression of ``op`` to ``supp(rho) (x) B``."""
    dec = la.eigh(rho)
    keep = dec.eigenvalues > RHO_FLOOR * max(dec.eigenvalues[0], 1e-300)
    k = np.kron(dec.eigenvectors[:, keep], np.eye(d_b))
    out = k.conj().T @ op @ k
    return 0.5 * (out + out.conj().T)


def extract_channel_strategy(result: ChannelDivergenceResult, d_B: int | None = None) -> tuple[np.ndarray, Measurement]:
    """Optimal input state and rank-one projective measurement on RB.

    The observable is ``omega' = (rho^{-1/2} (x) I) omega (rho^{-1/2} (x) I)`` with
    the inverse taken on the support of ``rho``; its eigenbasis is the measurement.
    """
    if result.rho is None or result.omega is None:
        raise InputError("result carries no optimizers (infinite or failed solve)")
    d_a = result.rho.shape[0]
    d_b = d_B if d_B is not None else result.omega.shape[0] // d_a
    if d_a * d_b != result.omega.shape[0]:
        raise InputError("omega is not an operator on R (x) B")
    rho = result.rho
    om_p = _omega_prime(rho, result.omega, d_b)
    ev = np.linalg.eigvalsh(rho)
    if ev[0] <= RHO_FLOOR * ev[-1]:
        note = "input state rank-deficient: measurement extracted on its support"
        if note not in result.notes:
            result.notes.append(note)
    return rho, extract_measurement(om_p)


def _finish(res: ChannelDivergenceResult, pair: ChannelPair, alpha_key):
    rho, meas = extract_channel_strategy(res, pair.d_B)
    res.omega_prime = _omega_prime(rho, res.omega, pair.d_B)
    res.measurement = meas
    pn, pm = pair.sandwiched(rho)
    res.distribution = induced(meas, pn, pm)
    res.classical_value, res.saturation_residual = verify_saturation(pn, pm, alpha_key, meas, res.value)
    return res
