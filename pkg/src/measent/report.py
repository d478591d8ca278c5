"""Running a problem into a report, and re-checking a report on its own.

Verification never touches the SDP layer: it recomputes the variational
objective from the stored optimizers and the classical divergence of the
stored measurement's statistics with plain numpy.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np

from . import linalg as la
from .channels import (
    ChannelDivergenceResult,
    ChannelPair,
    EnergyConstraint,
    channel_measured_relent,
    channel_measured_renyi,
)
from .errors import InputError
from .io import REPORT_FORMAT, Problem, decode_matrix, digest, encode_float, encode_matrix, parse_problem
from .oracle import KL, Measurement, brute_force_measured, classical_divergence, induced
from .sdp import Tolerances
from .states import (
    measured_relative_entropy,
    measured_renyi,
    regularize,
    support_check,
    supports_orthogonal,
)

OBJECTIVE_TOL = 1e-8
RENYI_SATURATION_TOL = 1e-5
RELENT_SATURATION_TOL = 1e-5
CHANNEL_SATURATION_TOL = 1e-4
TRACE_TOL = 1e-8

COMMANDS = {
    "states-renyi": ("states", "renyi"),
    "states-relent": ("states", "relent"),
    "channel-renyi": ("channel", "renyi"),
    "channel-relent": ("channel", "relent"),
    "oracle": ("states", "oracle"),
}


def _tolerances(p: Problem) -> Tolerances:
    base = Tolerances()
    return Tolerances(gap=p.gap_tol if p.gap_tol is not None else base.gap,
                      feas=p.feas_tol if p.feas_tol is not None else base.feas)


def _frac(a: Fraction | None):
    return None if a is None else f"{a.numerator}/{a.denominator}"


# ------------------------------------------------------------------- running


def solver_block(summary) -> dict | None:
    if summary is None:
        return None
    return {
        "status": summary.status,
        "iterations": summary.iterations,
        "objective": encode_float(summary.objective),
        "dual_objective": encode_float(summary.dual_objective),
        "gap": encode_float(summary.gap),
        "primal_residual": encode_float(summary.primal_residual),
        "dual_residual": encode_float(summary.dual_residual),
        "kkt": {k: encode_float(v) for k, v in summary.kkt.items()},
    }


def _certificate_block(cert) -> dict | None:
    if cert is None:
        return None
    return {
        "exponent": None if cert.exponent is None else str(cert.exponent),
        "approximated": cert.approximated,
        "substituted": _frac(cert.substituted),
        "lmi_count": cert.lmi_count,
        "error_bound": encode_float(cert.error_bound),
        "side": cert.side,
    }


def _result_block(res) -> dict:
    out = {
        "value": encode_float(res.value),
        "infinite": bool(res.infinite),
        "suspected_infinite": bool(getattr(res, "suspected_infinite", False)),
        "quasi": encode_float(res.quasi),
        "accuracy": encode_float(res.accuracy),
        "band": [encode_float(b) for b in res.band] if not res.infinite else None,
        "m": res.m,
        "k": res.k,
    }
    opt = {}
    if isinstance(res, ChannelDivergenceResult) and res.rho is not None:
        opt["rho"] = encode_matrix(res.rho)
    if res.omega is not None:
        opt["omega"] = encode_matrix(res.omega)
    if res.theta is not None:
        opt["theta"] = encode_matrix(res.theta)
    if isinstance(res, ChannelDivergenceResult) and res.omega_prime is not None:
        opt["omega_prime"] = encode_matrix(res.omega_prime)
    out["optimizers"] = opt
    if res.measurement is not None:
        out["measurement"] = {
            "vectors": encode_matrix(res.measurement.vectors),
            "p": [float(x) for x in res.distribution.p],
            "q": [float(x) for x in res.distribution.q],
        }
    else:
        out["measurement"] = None
    out["classical_value"] = encode_float(res.classical_value)
    out["saturation_residual"] = encode_float(res.saturation_residual)
    out["solver"] = solver_block(res.solver)
    out["certificate"] = _certificate_block(res.certificate)
    out["notes"] = list(res.notes)
    return out


def _pair(p: Problem) -> ChannelPair:
    return ChannelPair(p.gammaN, p.gammaM, p.d_A, p.d_B)


def _energy(p: Problem) -> EnergyConstraint | None:
    return None if p.H is None else EnergyConstraint(p.H, p.E)


def compute(p: Problem, command: str) -> dict:
    """Run ``command`` on the problem and return the report body (without wall time)."""
    kind, task = COMMANDS[command]
    if p.kind != kind:
        raise InputError(f"{p.source}: command {command} needs a '{kind}' problem, file has '{p.kind}'")
    if p.task is not None and p.task != task:
        raise InputError(f"{p.source}: file task '{p.task}' conflicts with command {command}")
    p.task = task
    if task == "renyi" and p.alpha is None:
        raise InputError(f"{p.source}: Renyi order missing (use --alpha or field 'alpha')")
    tol = _tolerances(p)
    head = {"format": REPORT_FORMAT, "command": command, "input_digest": digest(p.content()),
            "problem": p.content()}
    if command == "oracle":
        alpha = KL if p.alpha is None else p.alpha
        rho = la.as_density(p.rho, "rho")
        sigma = regularize(la.as_psd(p.sigma, "sigma"), p.regularize)
        value, meas = brute_force_measured(rho, sigma, alpha, budget=p.budget, seed=p.seed)
        dist = induced(meas, rho, sigma, tol=1e-6)
        body = {"value": encode_float(value), "infinite": not math.isfinite(value),
                "measurement": {"vectors": encode_matrix(meas.vectors),
                                "p": [float(x) for x in dist.p], "q": [float(x) for x in dist.q]},
                "notes": ["lower bound from a seeded search over projective measurements"]}
        head["status"] = "infinite" if body["infinite"] else "ok"
        head.update(body)
        return head
    if kind == "states":
        if task == "renyi":
            res = measured_renyi(p.rho, p.sigma, p.alpha, tolerances=tol, regularization=p.regularize)
        else:
            res = measured_relative_entropy(p.rho, p.sigma, eps=p.eps, m=p.m, k=p.k, tolerances=tol,
                                            regularization=p.regularize)
    else:
        pair, ec = _pair(p), _energy(p)
        if task == "renyi":
            res = channel_measured_renyi(pair, p.alpha, ec, tolerances=tol)
        else:
            res = channel_measured_relent(pair, ec, eps=p.eps, m=p.m, k=p.k, tolerances=tol)
    head["status"] = "infinite" if res.infinite else "ok"
    head.update(_result_block(res))
    return head


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


# ------------------------------------------------------------------- verifying


def _trace(a, b) -> float:
    return float(np.real(np.trace(a @ b)))


def recompute_objective(task: str, alpha: Fraction | None, first, second, omega, theta) -> float:
    """Variational objective at the stored optimizers (quasi-entropy for Renyi)."""
    if task == "relent":
        return _trace(theta, first) - _trace(omega, second) + 1.0
    a = float(alpha)
    if alpha < Fraction(1, 2):
        return a * _trace(omega, first) + (1 - a) * _trace(theta, second)
    return a * _trace(theta, first) + (1 - a) * _trace(omega, second)


def _close(x: float, y: float, tol: float) -> bool:
    return abs(x - y) <= tol * max(1.0, abs(y))


def verify_report(report: dict) -> list[str]:
    """Problems found in the report; an empty list means it checks out."""
    if not isinstance(report, dict) or report.get("format") != REPORT_FORMAT:
        return ["not a measent report"]
    command = report.get("command")
    if command not in COMMANDS:
        return [f"unknown command {command!r}"]
    if report.get("status") not in ("ok", "infinite"):
        return [f"report status is {report.get('status')!r}; nothing to verify"]
    p = parse_problem(report["problem"], "report.problem")
    issues = []
    if digest(p.content()) != report.get("input_digest"):
        issues.append("input digest does not match the embedded problem")
    kind, task = COMMANDS[command]
    if kind == "states":
        first = la.as_density(p.rho, "rho")
        second = regularize(la.as_psd(p.sigma, "sigma"), p.regularize)
    else:
        first, second = p.gammaN, p.gammaM

    if report.get("infinite"):
        return issues + _verify_infinite(report, p, kind, first, second)

    value = report.get("value")
    if value is None:
        return issues + ["finite report without a value"]
    meas = report.get("measurement")
    if not meas or "vectors" not in meas:
        return issues + ["measurement missing"]
    try:
        measurement = Measurement(decode_matrix(meas["vectors"], "measurement.vectors"))
    except InputError as exc:
        return issues + [str(exc)]

    alpha_key = KL if (task == "relent" or p.alpha is None) else p.alpha
    if command == "oracle":
        issues += _check_saturation(measurement, first, second, alpha_key, value, OBJECTIVE_TOL)
        return issues

    opt = report.get("optimizers") or {}
    try:
        omega = decode_matrix(opt["omega"], "optimizers.omega")
        theta = decode_matrix(opt["theta"], "optimizers.theta")
    except (KeyError, TypeError):
        return issues + ["optimizers omega/theta missing"]
    obj = recompute_objective(task, p.alpha, first, second, omega, theta)
    if task == "renyi":
        quasi = report.get("quasi")
        if quasi is None or not _close(obj, quasi, OBJECTIVE_TOL):
            issues.append(f"quasi-entropy: recomputed {obj!r}, reported {quasi!r}")
        d = math.log(obj) / (float(p.alpha) - 1) if obj > 0 else math.inf
    else:
        d = obj
    if not _close(d, value, OBJECTIVE_TOL):
        issues.append(f"value: recomputed {d!r}, reported {value!r} (diff {d - value:+.3e})")

    accuracy = report.get("accuracy") or 0.0
    if kind == "channel":
        try:
            rho = decode_matrix(opt["rho"], "optimizers.rho")
        except (KeyError, TypeError):
            return issues + ["optimizer rho missing"]
        tr = float(np.real(np.trace(rho)))
        if abs(tr - 1) > TRACE_TOL or np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -TRACE_TOL:
            issues.append(f"input state is not a density operator (trace {tr!r})")
            return issues
        if p.H is not None:
            energy = _trace(p.H, rho)
            if energy > p.E + TRACE_TOL:
                issues.append(f"energy constraint violated: Tr[H rho] = {energy!r} > E = {p.E!r}")
        rho = rho / tr
        pair = _pair(p)
        first, second = pair.sandwiched(0.5 * (rho + rho.conj().T))
        tol = CHANNEL_SATURATION_TOL + accuracy
    else:
        tol = RENYI_SATURATION_TOL if task == "renyi" else RELENT_SATURATION_TOL + accuracy
    issues += _check_saturation(measurement, first, second, alpha_key, value, tol, absolute=True)
    return issues


def _check_saturation(measurement, first, second, alpha_key, value, tol, absolute=False) -> list[str]:
    try:
        dist = induced(measurement, first, second, tol=1e-8)
    except InputError as exc:
        return [f"measurement: {exc}"]
    cl = classical_divergence(dist, alpha_key)
    ok = abs(cl - value) <= tol if absolute else _close(cl, value, tol)
    if not ok:
        return [f"saturation: classical value {cl!r} vs reported {value!r} (tolerance {tol:.1e})"]
    return []


def _verify_infinite(report, p, kind, first, second) -> list[str]:
    if report.get("suspected_infinite"):
        return []
    task = COMMANDS[report["command"]][1]
    if task == "oracle":
        return []
    high = task == "relent" or (p.alpha is not None and p.alpha > 1)
    if high:
        return [] if support_check(first, second) == "violated" else [
            "reported +inf but the support of the first operator lies inside the second"]
    if kind == "states" and not supports_orthogonal(first, second):
        return ["reported +inf but the supports are not orthogonal"]
    return []
