"""Dense Hermitian matrix algebra.

Every matrix function here goes through :func:`eigh`; dimensions are small
enough that the spectral route is both the simplest and the most accurate.
Matrices are plain complex ``numpy`` arrays, validated on entry.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InputError, NumericalFailure

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
SINGULAR_TOL = 1e-12
DEGENERACY_TOL = 1e-10


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


# ---------------------------------------------------------------- validation


def as_hermitian(a, name: str = "operator") -> np.ndarray:
    """Return ``a`` as a complex square array, checking conjugate symmetry."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InputError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} has non-finite entries")
    scale = np.max(np.abs(m))
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * max(scale, 1e-300):
        raise InputError(f"{name} is not Hermitian")
    return 0.5 * (m + m.conj().T)


def as_psd(a, name: str = "operator") -> np.ndarray:
    m = as_hermitian(a, name)
    w = np.linalg.eigvalsh(m)
    if w[0] < -PSD_TOL * max(w[-1], 0.0) - 1e-300:
        raise InputError(f"{name} is not positive semi-definite (min eigenvalue {w[0]:.3e})")
    return m


def as_density(a, name: str = "state") -> np.ndarray:
    m = as_psd(a, name)
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise InputError(f"{name} must have unit trace, got {tr!r}")
    return m


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    try:
        m = np.asarray(a, dtype=complex)
        return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(
            np.max(np.abs(m - m.conj().T)) <= tol * max(np.max(np.abs(m)), 1e-300)
        )
    except (TypeError, ValueError):
        return False


def _require_pd(m: np.ndarray, name: str) -> SpectralDecomposition:
    dec = eigh(m)
    lmax = dec.eigenvalues[0]
    lmin = dec.eigenvalues[-1]
    if lmax <= 0 or lmin <= SINGULAR_TOL * lmax:
        raise DomainError(f"{name} is not positive definite (min eigenvalue {lmin:.3e})")
    return dec


# ---------------------------------------------------------------- spectra


def _orthonormal_cluster_basis(vecs: np.ndarray) -> np.ndarray:
    """Deterministic basis of span(vecs): project canonical vectors in index order."""
    d, r = vecs.shape
    proj = vecs @ vecs.conj().T
    basis: list[np.ndarray] = []
    for i in range(d):
        v = proj[:, i].copy()
        for b in basis:
            v -= b * (b.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            v = v / nrm
            # second Gram-Schmidt pass keeps orthonormality at 1e-15
            for b in basis:
                v -= b * (b.conj() @ v)
            basis.append(v / np.linalg.norm(v))
        if len(basis) == r:
            break
    if len(basis) < r:
        raise NumericalFailure("could not build a basis for a degenerate eigenspace")
    return np.column_stack(basis)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > np.max(np.abs(v)) * (1 - 1e-9)))
    ph = v[k] / abs(v[k])
    return v / ph


def eigh(a) -> SpectralDecomposition:
    """Spectral decomposition with eigenvalues in descending order.

    Eigenvectors of simple eigenvalues are phase-fixed so their first
    largest-magnitude entry is real positive.  Degenerate clusters (gap below
    ``1e-10 * max|eigenvalue|``) get a basis built from the canonical vectors in
    index order, so the output does not depend on LAPACK's arbitrary choice.
    """
    m = np.asarray(a, dtype=complex)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalFailure(f"eigendecomposition did not converge: {exc}") from exc
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    scale = max(np.max(np.abs(w)), 1e-300)
    d = len(w)
    i = 0
    while i < d:
        j = i + 1
        while j < d and w[j - 1] - w[j] < DEGENERACY_TOL * scale:
            j += 1
        if j - i == 1:
            v[:, i] = _fix_phase(v[:, i])
        else:
            v[:, i:j] = _orthonormal_cluster_basis(v[:, i:j])
        i = j
    return SpectralDecomposition(w, v)


def apply_function(a, func, dec: SpectralDecomposition | None = None) -> np.ndarray:
    dec = dec if dec is not None else eigh(a)
    v = dec.eigenvectors
    out = (v * func(dec.eigenvalues)) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def sqrtm_psd(a) -> np.ndarray:
    return apply_function(a, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def powm(a, p: float) -> np.ndarray:
    """Power of a positive definite matrix."""
    dec = _require_pd(np.asarray(a, dtype=complex), "operand")
    return apply_function(a, lambda w: w**p, dec)


def logm_pd(a) -> np.ndarray:
    dec = _require_pd(np.asarray(a, dtype=complex), "operand")
    return apply_function(a, np.log, dec)


def floor_spectrum(a, rel: float = 1e-12) -> np.ndarray:
    """Clip eigenvalues from below at ``rel * lambda_max``."""
    dec = eigh(a)
    top = max(dec.eigenvalues[0], 1e-300)
    return apply_function(a, lambda w: np.maximum(w, rel * top), dec)


def pinv_sqrt(a, floor: float = 1e-10) -> np.ndarray:
    """Inverse square root on the support (eigenvalues above ``floor * max``)."""
    dec = eigh(a)
    top = max(dec.eigenvalues[0], 1e-300)

    def f(w):
        out = np.zeros_like(w)
        keep = w > floor * top
        out[keep] = 1.0 / np.sqrt(w[keep])
        return out

    return apply_function(a, f, dec)


# ---------------------------------------------------------------- means


def geometric_mean(x, y, t: float) -> np.ndarray:
    """Weighted geometric mean ``X^{1/2} (X^{-1/2} Y X^{-1/2})^t X^{1/2}``."""
    t = float(t)
    if not -1.0 <= t <= 2.0:
        raise InputError(f"weight t={t} outside [-1, 2]")
    x = as_hermitian(x, "X")
    y = as_hermitian(y, "Y")
    if x.shape != y.shape:
        raise InputError("X and Y must have the same shape")
    dx = _require_pd(x, "X")
    _require_pd(y, "Y")
    xh = apply_function(x, np.sqrt, dx)
    xmh = apply_function(x, lambda w: 1.0 / np.sqrt(w), dx)
    inner = xmh @ y @ xmh
    inner = 0.5 * (inner + inner.conj().T)
    out = xh @ apply_function(inner, lambda w: np.clip(w, 1e-300, None) ** t) @ xh
    return 0.5 * (out + out.conj().T)


def log_perspective(x, y) -> np.ndarray:
    """Operator connection of the logarithm ``X^{1/2} ln(X^{-1/2} Y X^{-1/2}) X^{1/2}``."""
    x = as_hermitian(x, "X")
    y = as_hermitian(y, "Y")
    if x.shape != y.shape:
        raise InputError("X and Y must have the same shape")
    dx = _require_pd(x, "X")
    _require_pd(y, "Y")
    xh = apply_function(x, np.sqrt, dx)
    xmh = apply_function(x, lambda w: 1.0 / np.sqrt(w), dx)
    inner = xmh @ y @ xmh
    inner = 0.5 * (inner + inner.conj().T)
    out = xh @ apply_function(inner, lambda w: np.log(np.clip(w, 1e-300, None))) @ xh
    return 0.5 * (out + out.conj().T)


# ---------------------------------------------------------------- channels


def choi_from_kraus(kraus: Sequence) -> np.ndarray:
    """Choi operator ``sum_ij |i><j| (x) N(|i><j|)``, reference system first."""
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    if not ks:
        raise InputError("Kraus list is empty")
    shape = ks[0].shape
    if len(shape) != 2 or any(k.shape != shape for k in ks):
        raise InputError("Kraus operators must be matrices of one common shape")
    d_b, d_a = shape
    gamma = np.zeros((d_a * d_b, d_a * d_b), dtype=complex)
    for k in ks:
        vec = k.T.reshape(-1)  # entry (i, b) = K[b, i]
        gamma += np.outer(vec, vec.conj())
    return 0.5 * (gamma + gamma.conj().T)


def apply_kraus(kraus: Sequence, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    out = sum(np.asarray(k) @ rho @ np.asarray(k).conj().T for k in kraus)
    return 0.5 * (out + out.conj().T)


def apply_choi(gamma, rho, d_a: int, d_b: int) -> np.ndarray:
    """Action ``N(rho) = Tr_R[(rho^T (x) I) Gamma]``."""
    g = np.asarray(gamma, dtype=complex).reshape(d_a, d_b, d_a, d_b)
    out = np.einsum("ij,ibjc->bc", np.asarray(rho, dtype=complex), g)
    return 0.5 * (out + out.conj().T)


def partial_trace(m, dims: Sequence[int], keep: int) -> np.ndarray:
    """Partial trace of a bipartite operator keeping subsystem ``keep`` (0 or 1)."""
    d0, d1 = dims
    t = np.asarray(m).reshape(d0, d1, d0, d1)
    if keep == 0:
        return np.einsum("ajbj->ab", t)
    return np.einsum("iaib->ab", t)


def sandwich_choi(rho, gamma, d_b: int) -> np.ndarray:
    """``(rho^{1/2} (x) I_B) Gamma (rho^{1/2} (x) I_B)``."""
    rho = as_density(rho, "rho")
    gamma = as_hermitian(gamma, "Choi operator")
    d_r = rho.shape[0]
    if gamma.shape[0] != d_r * d_b:
        raise InputError(
            f"Choi operator of dimension {gamma.shape[0]} incompatible with d_R={d_r}, d_B={d_b}"
        )
    k = np.kron(sqrtm_psd(rho), np.eye(d_b))
    out = k @ gamma @ k
    return 0.5 * (out + out.conj().T)


# ---------------------------------------------------------------- embedding


def real_embed(a) -> np.ndarray:
    """Real symmetric ``[[Re A, -Im A], [Im A, Re A]]`` of a Hermitian matrix."""
    a = np.asarray(a, dtype=complex)
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def real_unembed(s) -> np.ndarray:
    """Hermitian ``Y`` with ``<s, real_embed(F)> = 2 Re Tr[Y F]`` for Hermitian ``F``."""
    s = np.asarray(s, dtype=float)
    n = s.shape[0] // 2
    s11, s12, s21, s22 = s[:n, :n], s[:n, n:], s[n:, :n], s[n:, n:]
    y = 0.5 * ((s11 + s22) + 1j * (s21 - s12))
    return 0.5 * (y + y.conj().T)


# ---------------------------------------------------------------- sampling


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary: QR of a complex Gaussian with the R diagonal made positive."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


def random_kraus(d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Kraus operators of a random channel, from a random isometry."""
    big = random_unitary(d_out * n_kraus, rng)[:, :d_in] if d_out * n_kraus >= d_in else None
    if big is None:
        raise InputError("need d_out * n_kraus >= d_in for an isometry")
    return [big[i * d_out:(i + 1) * d_out, :] for i in range(n_kraus)]


def ket(d: int, i: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())
