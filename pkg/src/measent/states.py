"""Measured Renyi and measured relative entropies of a pair of states.

Both quantities are computed from variational formulas over a positive
observable ``omega``; the optimal observable's eigenbasis is an optimal
rank-one projective measurement, which is extracted and checked against the
classical divergence of the statistics it induces.

Renyi regimes (``t`` is the geometric-mean weight, ``theta`` an auxiliary)::

    0 < a < 1/2 : Q = inf  a Tr[omega rho] + (1-a) Tr[theta sigma],  theta >= G_t(I, omega), t = a/(a-1)
    1/2 <= a < 1: Q = inf  a Tr[theta rho] + (1-a) Tr[omega sigma],  theta >= G_t(I, omega), t = 1 - 1/a
    a > 1       : Q = sup  a Tr[theta rho] + (1-a) Tr[omega sigma],  theta <= G_t(I, omega), t = 1 - 1/a

and ``D = ln Q / (a - 1)``.  The relative entropy is
``sup Tr[theta rho] - Tr[omega sigma] + 1`` over ``theta <= P_{r_{m,k}}(I, omega)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg as la
from .cones import (
    ConeCertificate,
    approximation_error,
    build_geomean_graph,
    build_log_perspective_graph,
    select_mk,
)
from .errors import InputError, NumericalFailure
from .oracle import KL, Measurement, OutcomeDistribution, classical_divergence, induced
from .sdp import Model, Tolerances, inner
from .sdp.check import kkt_residuals
from .sdp.solver import NEAR_OPTIMAL, OPTIMAL, Solution, solve

SUPPORT_REL = 1e-10
SUPPORT_RESIDUAL = 1e-8
OMEGA_FLOOR = 1e-12
DEFAULT_MK = (3, 3)
MAX_ROUNDS = 3


# ------------------------------------------------------------------- orders


@dataclass(frozen=True)
class RenyiOrder:
    """Exact Renyi order ``alpha`` in ``(0, 1)`` or ``(1, inf)``."""

    alpha: Fraction

    def __post_init__(self):
        if not isinstance(self.alpha, Fraction):
            raise InputError("alpha must be an exact fraction")
        if self.alpha <= 0 or self.alpha == 1:
            raise InputError(f"alpha={self.alpha} outside (0, 1) U (1, inf)")

    @classmethod
    def parse(cls, value) -> "RenyiOrder":
        """Accept ``"p/q"``, an integer or a Fraction; floats are rejected."""
        if isinstance(value, RenyiOrder):
            return value
        if isinstance(value, bool) or isinstance(value, float):
            raise InputError("alpha must be given exactly, e.g. '1/2'")
        if isinstance(value, str):
            text = value.strip()
            parts = text.split("/")
            if len(parts) > 2 or not all(p.strip().lstrip("+-").isdigit() for p in parts):
                raise InputError(f"alpha must look like 'p/q', got {value!r}")
            num = int(parts[0])
            den = int(parts[1]) if len(parts) == 2 else 1
            if den == 0:
                raise InputError("alpha has zero denominator")
            return cls(Fraction(num, den))
        if isinstance(value, (int, Fraction)):
            return cls(Fraction(value))
        raise InputError(f"cannot read alpha from {value!r}")

    @property
    def regime(self) -> str:
        if self.alpha < Fraction(1, 2):
            return "low"
        return "mid" if self.alpha < 1 else "high"

    @property
    def exponent(self) -> Fraction:
        a = self.alpha
        return a / (a - 1) if self.regime == "low" else 1 - 1 / a

    @property
    def side(self) -> str:
        return "hypograph" if self.regime == "high" else "epigraph"

    @property
    def sense(self) -> str:
        return "max" if self.regime == "high" else "min"

    def __str__(self):
        a = self.alpha
        return f"{a.numerator}/{a.denominator}"

    def __float__(self):
        return float(self.alpha)


# ------------------------------------------------------------------- results


@dataclass
class SolverSummary:
    status: str
    iterations: int
    objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    kkt: dict = field(default_factory=dict)

    @classmethod
    def of(cls, sol: Solution) -> "SolverSummary":
        return cls(sol.status, sol.iterations, sol.objective, sol.dual_objective, sol.gap,
                   sol.primal_residual, sol.dual_residual, kkt_residuals(sol))


@dataclass
class DivergenceResult:
    task: str  # "renyi" or "relent"
    value: float
    infinite: bool = False
    quasi: float | None = None
    order: str | None = None
    omega: np.ndarray | None = None
    theta: np.ndarray | None = None
    measurement: Measurement | None = None
    distribution: OutcomeDistribution | None = None
    classical_value: float | None = None
    saturation_residual: float | None = None
    accuracy: float = 0.0
    m: int | None = None
    k: int | None = None
    solver: SolverSummary | None = None
    certificate: ConeCertificate | None = None
    regularization: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def band(self) -> tuple[float, float]:
        return (self.value - self.accuracy, self.value + self.accuracy)


# ------------------------------------------------------------------- helpers


def _support(a: np.ndarray) -> np.ndarray:
    dec = la.eigh(a)
    top = dec.eigenvalues[0]
    if top <= 0:
        return dec.eigenvectors[:, :0]
    return dec.eigenvectors[:, dec.eigenvalues > SUPPORT_REL * top]


def support_check(rho, sigma) -> str:
    """``"contained"`` when supp(rho) lies inside supp(sigma), else ``"violated"``."""
    rho = la.as_psd(rho, "rho")
    sigma = la.as_psd(sigma, "sigma")
    vr, vs = _support(rho), _support(sigma)
    if vr.shape[1] == 0:
        return "contained"
    resid = vr - vs @ (vs.conj().T @ vr)
    worst = float(np.max(np.linalg.norm(resid, axis=0)))
    return "contained" if worst <= SUPPORT_RESIDUAL else "violated"


def supports_orthogonal(rho, sigma) -> bool:
    vr, vs = _support(la.as_psd(rho)), _support(la.as_psd(sigma))
    if vr.shape[1] == 0 or vs.shape[1] == 0:
        return True
    return float(np.linalg.norm(vs.conj().T @ vr, 2)) <= SUPPORT_RESIDUAL


def regularize(sigma: np.ndarray, delta: float) -> np.ndarray:
    """``(1 - delta) sigma + delta Tr[sigma] I / d``."""
    if not 0 <= delta < 1:
        raise InputError("regularization delta must lie in [0, 1)")
    if delta == 0:
        return sigma
    d = sigma.shape[0]
    return (1 - delta) * sigma + delta * np.real(np.trace(sigma)) * np.eye(d) / d


def _validate_pair(rho, sigma) -> tuple[np.ndarray, np.ndarray]:
    rho = la.as_density(rho, "rho")
    sigma = la.as_psd(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise InputError("rho and sigma must have the same dimension")
    if np.real(np.trace(sigma)) <= 0:
        raise InputError("sigma must have positive trace")
    return rho, sigma


def extract_measurement(omega) -> Measurement:
    """Eigenbasis of ``omega`` as a rank-one projective measurement."""
    return Measurement(la.eigh(omega).eigenvectors)


def verify_saturation(rho, sigma, alpha, measurement: Measurement, value: float) -> tuple[float, float]:
    """Classical divergence of the induced statistics and its distance to ``value``."""
    dist = induced(measurement, rho, sigma)
    cl = classical_divergence(dist, alpha)
    if np.isinf(cl) and np.isinf(value):
        return cl, 0.0
    return cl, abs(cl - value)


NEAR_NOTE = "solver stalled near an unattained optimum; accuracy widened by the duality gap"


def require_solution(sol: Solution) -> Solution:
    """Pass optimal and near-optimal solutions through, raise on anything else."""
    if sol.status not in (OPTIMAL, NEAR_OPTIMAL):
        raise NumericalFailure(
            f"solver ended with status {sol.status} after {sol.iterations} iterations "
            f"(gap {sol.gap:.2e}, residuals {sol.primal_residual:.2e}/{sol.dual_residual:.2e})",
            best=sol,
        )
    return sol


def run_model(model: Model, tolerances: Tolerances | None) -> Solution:
    return require_solution(solve(model.compile(), tolerances))


def renyi_objective(order: RenyiOrder, first, second, omega, theta):
    """Regime-oriented objective; ``first``/``second`` pair with rho/sigma (or the Choi operators)."""
    a = float(order.alpha)
    if order.regime == "low":
        return a * inner(first, omega) + (1 - a) * inner(second, theta)
    return a * inner(first, theta) + (1 - a) * inner(second, omega)


def renyi_cone(order: RenyiOrder, X, omega, theta, tag: str = "g", compress=None):
    """Graph of ``theta >= G_t(X, omega)`` (a < 1) or ``theta <= G_t(X, omega)`` (a > 1)."""
    return build_geomean_graph(order.exponent, order.side, X, omega, theta, tag=tag, compress=compress)


def theta_frame(order: RenyiOrder, first, second):
    """Support of the operator paired with ``theta`` when it is rank-deficient (a < 1 only).

    Below one ``theta`` is bounded only from below, so off that support it would
    run off to infinity; constraining ``V^† theta V`` instead keeps the optimum attained.
    """
    if order.side != "epigraph":
        return None
    paired = second if order.regime == "low" else first
    v = _support(np.asarray(paired, dtype=complex))
    return v if 0 < v.shape[1] < paired.shape[0] else None


def build_renyi_model(model: Model, order: RenyiOrder, X, first, second):
    """Add ``omega``, ``theta``, the cone and the objective; returns (omega, theta, graph, frame)."""
    d = first.shape[0]
    frame = theta_frame(order, first, second)
    omega = model.variable("omega", d, "psd")
    theta = model.variable("theta", d if frame is None else frame.shape[1])
    graph = renyi_cone(order, X, omega, theta, compress=frame)
    model.add_graph(graph)
    if frame is not None:
        fh = frame.conj().T
        if order.regime == "low":
            second = fh @ second @ frame
        else:
            first = fh @ first @ frame
    obj = renyi_objective(order, first, second, omega, theta)
    model.maximize(obj) if order.sense == "max" else model.minimize(obj)
    return omega, theta, graph, frame


def lift_theta(frame, theta: np.ndarray) -> np.ndarray:
    return theta if frame is None else frame @ theta @ frame.conj().T


def omega_conditioning(omega: np.ndarray) -> float:
    """Width ``a`` of the interval ``[1/a, a]`` containing the spectrum of ``omega`` (at least 10)."""
    ev = np.linalg.eigvalsh(omega)
    hi = max(float(ev[-1]), 1e-300)
    lo = max(float(ev[0]), OMEGA_FLOOR * hi)
    return float(max(hi / lo, hi, 1.0 / lo, 10.0))


def _finish(result: DivergenceResult, rho, sigma, alpha_key):
    result.measurement = extract_measurement(result.omega)
    result.distribution = induced(result.measurement, rho, sigma)
    cl, res = verify_saturation(rho, sigma, alpha_key, result.measurement, result.value)
    result.classical_value, result.saturation_residual = cl, res
    return result


# ------------------------------------------------------------------- Renyi


def measured_renyi(rho, sigma, alpha, tolerances: Tolerances | None = None,
                   regularization: float = 0.0) -> DivergenceResult:
    """Measured Renyi relative entropy ``D^M_alpha(rho || sigma)`` and its quasi-entropy."""
    order = RenyiOrder.parse(alpha)
    rho, sigma = _validate_pair(rho, sigma)
    sigma = regularize(sigma, regularization)
    res = DivergenceResult("renyi", np.inf, order=str(order), regularization=regularization)
    if regularization:
        res.notes.append(f"sigma regularized with delta={regularization:g}")
    if order.regime == "high" and support_check(rho, sigma) == "violated":
        res.infinite = True
        res.quasi = np.inf
        res.notes.append("supp(rho) not contained in supp(sigma)")
        return res
    if order.regime != "high" and supports_orthogonal(rho, sigma):
        res.infinite = True
        res.quasi = 0.0
        res.notes.append("rho and sigma have orthogonal supports")
        return res

    d = rho.shape[0]
    model = Model("renyi")
    omega, theta, graph, frame = build_renyi_model(model, order, np.eye(d), rho, sigma)
    sol = run_model(model, tolerances)

    q = sol.objective
    res.quasi = q
    res.solver = SolverSummary.of(sol)
    if sol.status == NEAR_OPTIMAL:
        res.notes.append(NEAR_NOTE)
    res.certificate = graph.certificate
    res.omega = la.floor_spectrum(sol[omega], OMEGA_FLOOR)
    res.theta = lift_theta(frame, sol[theta])
    a = float(order.alpha)
    if q <= 0:
        res.infinite = True
        res.notes.append("quasi-entropy vanished")
        return res
    res.value = float(np.log(q) / (a - 1))
    res.accuracy = _renyi_accuracy(order, graph.certificate, res.omega, rho, sigma, sol, q)
    return _finish(res, rho, sigma, order.alpha)


def _renyi_accuracy(order, cert, omega, rho, sigma, sol, q) -> float:
    """Band on ``D`` from the solver gap and any exponent substitution."""
    a = float(order.alpha)
    dq = abs(sol.objective - sol.dual_objective)
    if cert.approximated:
        d = omega.shape[0]
        coef = (1 - a) * np.real(np.trace(sigma)) if order.regime == "low" else a
        dq += abs(coef) * cert.bound_for(np.eye(d), omega)
    return float(dq / (abs(a - 1) * q))


# ------------------------------------------------------------------- relative entropy


def adaptive_mk(run, eps: float | None, m: int | None = None, k: int | None = None):
    """Solve at ``(m, k)``, or pick ``(m, k)`` for accuracy ``eps`` from the observable's spread.

    ``run(m, k)`` returns ``(payload, a)`` where ``a`` bounds the spectrum of the
    argument of the logarithm.  Starting from the default pair, at most
    ``MAX_ROUNDS`` re-solves are made; the loop stops when the selection is
    stable or the spread stops growing.
    """
    if eps is None:
        m = DEFAULT_MK[0] if m is None else m
        k = DEFAULT_MK[1] if k is None else k
        out, a = run(m, k)
        return m, k, out, a
    if eps <= 0:
        raise InputError("eps must be positive")
    m, k = DEFAULT_MK
    out, a = run(m, k)
    for _ in range(MAX_ROUNDS):
        sel = select_mk(a, eps)
        if (sel.m, sel.k) == (m, k):
            break
        m, k = sel.m, sel.k
        out, a_new = run(m, k)
        if a_new <= a:
            break
        a = a_new
    return m, k, out, a


def _relent_solve(rho, sigma, m, k, tolerances):
    d = rho.shape[0]
    model = Model("relent")
    omega = model.variable("omega", d, "psd")
    theta = model.variable("theta", d)
    graph = build_log_perspective_graph(np.eye(d), omega, theta, m, k)
    model.add_graph(graph)
    model.maximize(inner(rho, theta) - inner(sigma, omega) + 1.0)
    sol = run_model(model, tolerances)
    return sol, sol[omega], sol[theta], graph


def measured_relative_entropy(rho, sigma, eps: float | None = None, m: int | None = None,
                              k: int | None = None, tolerances: Tolerances | None = None,
                              regularization: float = 0.0) -> DivergenceResult:
    """Measured relative entropy via the ``r_{m,k}`` approximation of the logarithm.

    With ``eps`` the pair ``(m, k)`` is chosen adaptively from the conditioning of
    the optimal observable; otherwise the given pair (default ``(3, 3)``) is used.
    """
    rho, sigma = _validate_pair(rho, sigma)
    sigma = regularize(sigma, regularization)
    res = DivergenceResult("relent", np.inf, regularization=regularization)
    if regularization:
        res.notes.append(f"sigma regularized with delta={regularization:g}")
    if support_check(rho, sigma) == "violated":
        res.infinite = True
        res.notes.append("supp(rho) not contained in supp(sigma)")
        return res

    def run(m_, k_):
        sol, om, th, graph = _relent_solve(rho, sigma, m_, k_, tolerances)
        return (sol, om, th, graph), omega_conditioning(om)

    m, k, (sol, om, th, graph), a = adaptive_mk(run, eps, m, k)
    res.value = sol.objective
    res.m, res.k = m, k
    res.omega = la.floor_spectrum(om, OMEGA_FLOOR)
    res.theta = th
    res.solver = SolverSummary.of(sol)
    if sol.status == NEAR_OPTIMAL:
        res.notes.append(NEAR_NOTE)
    res.certificate = graph.certificate
    res.accuracy = approximation_error(m, k, a) + abs(sol.objective - sol.dual_objective)
    return _finish(res, rho, sigma, KL)
