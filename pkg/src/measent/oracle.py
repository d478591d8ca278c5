"""Independent reference computations used to check the SDP results.

Nothing here touches the SDP layer: classical divergences of outcome
distributions, a seeded brute-force search over projective measurements,
the closed-form fidelity observable and evaluations of the variational
objectives at given observables.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InputError

KL = "kl"
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Measurement:
    """Rank-one projective measurement given by orthonormal columns of ``vectors``."""

    vectors: np.ndarray

    @property
    def projectors(self) -> np.ndarray:
        v = self.vectors
        return np.einsum("ix,jx->xij", v, v.conj())

    def __len__(self):
        return self.vectors.shape[1]

    def identity_residual(self) -> float:
        d = self.vectors.shape[0]
        return float(np.max(np.abs(self.projectors.sum(axis=0) - np.eye(d))))


@dataclass(frozen=True)
class OutcomeDistribution:
    p: np.ndarray  # from rho, sums to one
    q: np.ndarray  # from sigma, any nonnegative weights

    def __post_init__(self):
        if self.p.shape != self.q.shape:
            raise InputError("distributions must have equal length")


def _order(alpha) -> float:
    return float(Fraction(alpha)) if isinstance(alpha, (str, Fraction)) else float(alpha)


def classical_renyi(dist: OutcomeDistribution, alpha) -> float:
    """``ln(sum p^a q^(1-a)) / (a - 1)``; +inf on support violation for a > 1 or disjoint supports."""
    a = _order(alpha)
    if a <= 0 or a == 1:
        raise InputError("Renyi order must lie in (0, 1) or (1, inf)")
    p, q = dist.p, dist.q
    on = p > 0
    if a > 1:
        if np.any(q[on] <= 0):
            return float("inf")
        s = float(np.sum(p[on] ** a * q[on] ** (1.0 - a)))
    else:
        both = on & (q > 0)
        s = float(np.sum(p[both] ** a * q[both] ** (1.0 - a)))
        if s <= 0:
            return float("inf")
    return float(np.log(s) / (a - 1.0))


def classical_quasi(dist: OutcomeDistribution, alpha) -> float:
    """``sum p^a q^(1-a)`` (may be +inf for a > 1)."""
    a = _order(alpha)
    p, q = dist.p, dist.q
    on = p > 0
    if a > 1 and np.any(q[on] <= 0):
        return float("inf")
    both = on & (q > 0)
    return float(np.sum(p[both] ** a * q[both] ** (1.0 - a)))


def classical_kl(dist: OutcomeDistribution) -> float:
    p, q = dist.p, dist.q
    on = p > 0
    if np.any(q[on] <= 0):
        return float("inf")
    return float(np.sum(p[on] * np.log(p[on] / q[on])))


def classical_divergence(dist: OutcomeDistribution, alpha) -> float:
    return classical_kl(dist) if alpha == KL else classical_renyi(dist, alpha)


def induced(measurement: Measurement, rho, sigma, tol: float = 1e-8) -> OutcomeDistribution:
    """Outcome statistics ``Tr[phi_x rho]`` and ``Tr[phi_x sigma]``."""
    if measurement.identity_residual() > tol:
        raise InputError("measurement does not resolve the identity")
    v = measurement.vectors
    p = np.real(np.einsum("ix,ij,jx->x", v.conj(), np.asarray(rho, dtype=complex), v))
    q = np.real(np.einsum("ix,ij,jx->x", v.conj(), np.asarray(sigma, dtype=complex), v))
    for name, arr in (("rho", p), ("sigma", q)):
        if np.any(arr < -1e-12):
            raise InputError(f"negative outcome probability under {name}")
    return OutcomeDistribution(np.clip(p, 0.0, None), np.clip(q, 0.0, None))


# ------------------------------------------------------------ brute force


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> tuple[float, float]:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _rotate(u: np.ndarray, i: int, j: int, theta: float, phi: float) -> np.ndarray:
    out = u.copy()
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(1j * phi)
    out[:, i] = c * u[:, i] + s * e * u[:, j]
    out[:, j] = -s * np.conj(e) * u[:, i] + c * u[:, j]
    return out


def brute_force_measured(rho, sigma, alpha, budget: int = 500, seed: int = 0,
                         sweeps: int = 50, refine_top: int = 3) -> tuple[float, Measurement]:
    """Best classical divergence over sampled and locally refined orthonormal bases.

    Any basis is a feasible measurement, so the value is a lower bound on the
    measured divergence.  Deterministic for a fixed seed.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    d = rho.shape[0]
    if d > 3:
        raise InputError("brute force search is limited to d <= 3")
    rng = np.random.default_rng(seed)

    def value(u):
        return classical_divergence(induced(Measurement(u), rho, sigma, tol=1e-6), alpha)

    cands = [np.eye(d, dtype=complex)] + [haar_unitary(d, rng) for _ in range(budget)]
    scored = sorted(((value(u), k) for k, u in enumerate(cands)), key=lambda t: (-t[0], t[1]))
    best_val, best_u = -np.inf, cands[0]
    for val, k in scored[:refine_top]:
        u = cands[k]
        if not np.isfinite(val):
            return val, Measurement(u)
        for _ in range(sweeps):
            start = val
            for i in range(d):
                for j in range(i + 1, d):
                    # real and imaginary mixing of the pair span its tangent directions
                    for phase in (0.0, np.pi / 2):
                        th, vt = _golden_max(lambda x: value(_rotate(u, i, j, x, phase)), -np.pi / 2, np.pi / 2)
                        if vt > val:
                            u, val = _rotate(u, i, j, th, phase), vt
            if val - start <= 1e-14:
                break
        if val > best_val:
            best_val, best_u = val, u
    return float(best_val), Measurement(best_u)


# ------------------------------------------------------------ closed forms


def _eig_pd(a: np.ndarray, name: str):
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    if w[0] <= 1e-14 * max(1.0, abs(w[-1])):
        raise DomainError(f"{name} must be positive definite")
    return w, v


def fuchs_caves(rho, sigma) -> tuple[np.ndarray, float]:
    """Observable ``sigma^{-1/2} (sigma^{1/2} rho sigma^{1/2})^{1/2} sigma^{-1/2}`` and root fidelity."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    w, v = _eig_pd(sigma, "sigma")
    sh = (v * np.sqrt(w)) @ v.conj().T
    smh = (v / np.sqrt(w)) @ v.conj().T
    mid = sh @ rho @ sh
    mw, mv = np.linalg.eigh(0.5 * (mid + mid.conj().T))
    root = (mv * np.sqrt(np.clip(mw, 0.0, None))) @ mv.conj().T
    obs = smh @ root @ smh
    return 0.5 * (obs + obs.conj().T), float(np.sum(np.sqrt(np.clip(mw, 0.0, None))))


def root_fidelity(rho, sigma) -> float:
    """``Tr[(sigma^{1/2} rho sigma^{1/2})^{1/2}]`` for PSD operands."""
    sigma = np.asarray(sigma, dtype=complex)
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.conj().T))
    sh = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    mid = sh @ np.asarray(rho, dtype=complex) @ sh
    return float(np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (mid + mid.conj().T)), 0.0, None))))


def umegaki(rho, sigma) -> float:
    """``Tr[rho (ln rho - ln sigma)]`` for full-rank operands."""
    def logm(a):
        w, v = _eig_pd(np.asarray(a, dtype=complex), "operand")
        return (v * np.log(w)) @ v.conj().T

    return float(np.real(np.trace(np.asarray(rho) @ (logm(rho) - logm(sigma)))))


def _mpow(a: np.ndarray, p: float) -> np.ndarray:
    w, v = _eig_pd(a, "omega")
    return (v * w ** p) @ v.conj().T


def variational_probe(rho, sigma, alpha, omegas: Sequence) -> np.ndarray:
    """Variational objective at each sample ``omega > 0``.

    For a in (0, 1) each entry upper-bounds the quasi-entropy, for a > 1 each
    lower-bounds it; for ``alpha == "kl"`` each entry lower-bounds the measured
    relative entropy.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    out = []
    for om in omegas:
        om = np.asarray(om, dtype=complex)
        if alpha == KL:
            w, v = _eig_pd(om, "omega")
            lg = (v * np.log(w)) @ v.conj().T
            val = np.trace(lg @ rho) - np.trace(om @ sigma) + 1.0
        else:
            a = _order(alpha)
            if a < 0.5:
                val = a * np.trace(om @ rho) + (1 - a) * np.trace(_mpow(om, a / (a - 1)) @ sigma)
            else:
                val = a * np.trace(_mpow(om, 1 - 1 / a) @ rho) + (1 - a) * np.trace(om @ sigma)
        out.append(float(np.real(val)))
    return np.array(out)


# ------------------------------------------------------------ grids and harnesses


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def bloch_grid(n: int = 200) -> list[np.ndarray]:
    """Qubit states: the centre plus shells of radius 1/4, 1/2, 3/4, 1."""
    radii = (0.25, 0.5, 0.75, 1.0)
    per = [(n - 1) // 4 + (1 if k < (n - 1) % 4 else 0) for k in range(4)]
    pts = [np.zeros(3)]
    for r, m in zip(radii, per):
        pts.extend(r * fibonacci_sphere(m))
    px = np.array([[0, 1], [1, 0]], dtype=complex)
    py = np.array([[0, -1j], [1j, 0]])
    pz = np.array([[1, 0], [0, -1]], dtype=complex)
    return [0.5 * (np.eye(2) + x * px + y * py + z * pz) for x, y, z in pts]


def random_stochastic(n_out: int, n_in: int, rng: np.random.Generator) -> np.ndarray:
    m = rng.random((n_out, n_in))
    return m / m.sum(axis=0, keepdims=True)


def monotone_violation(values: Sequence[float]) -> float:
    """Largest drop in a sequence that should be non-decreasing."""
    v = np.asarray(values, dtype=float)
    return float(np.max(np.concatenate([[0.0], v[:-1] - v[1:]])))
