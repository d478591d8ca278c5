"""Homogeneous self-dual primal-dual interior-point method for block SDPs.

Nesterov-Todd scaling, Mehrotra predictor-corrector, dense linear algebra.
The embedding follows the usual conic layout: with ``tau, kappa >= 0``::

    A^T y + G^T z + c tau        = 0
    -A x + b tau                 = 0
    -G x + h tau - s             = 0
    -c x - b y - h z - kappa     = 0

so ``tau > 0`` at the limit gives an optimal pair and ``kappa > 0`` gives an
infeasibility certificate.  Equalities are removed up front by writing
``x = x0 + N w`` with ``N`` a null-space basis of ``A``; the iterations then
run on ``w`` alone and ``y`` is recovered by least squares at the end.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..errors import NumericalFailure
from ..linalg import real_unembed
from .compile import StandardForm
from .model import Variable, hermitian_basis

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal-infeasible"
DUAL_INFEASIBLE = "dual-infeasible"
NUMERICAL_FAILURE = "numerical-failure"
NEAR_OPTIMAL = "near-optimal"  # stalled, but the best iterate meets Tolerances.near
REG = 1e-13
ACCEPT_RESIDUAL = 1e-10  # relative KKT residual above which the QR route is taken


@dataclass(frozen=True)
class Tolerances:
    gap: float = 1e-8
    feas: float = 1e-8
    max_iter: int = 200
    step: float = 0.99
    stall_certificate: float = 1e-6
    near: float = 1e-6  # gap and residual bound for accepting a stalled run


@dataclass
class Solution:
    status: str
    objective: float  # model sense, includes the constant term
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    x: np.ndarray
    y: np.ndarray
    s: list[np.ndarray]
    z: list[np.ndarray]
    form: StandardForm = field(repr=False)
    primal: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, v: Variable) -> np.ndarray:
        return self.primal[v]

    def value(self, expr) -> np.ndarray:
        return expr.value(self.primal)

    def lmi_dual(self, name: str) -> np.ndarray:
        """Multiplier of a named LMI, as a Hermitian matrix of the LMI's own size."""
        for blk, zb in zip(self.form.blocks, self.z):
            if blk.name == name:
                return 2.0 * real_unembed(zb) if blk.embedded else zb.copy()
        raise KeyError(name)

    def equality_dual(self, name: str) -> np.ndarray:
        for eq in self.form.equalities:
            if eq.name == name:
                y = self.y[eq.start:eq.stop]
                if eq.shape == (1, 1):
                    return y.reshape(1, 1)
                return np.einsum("ijk,k->ij", hermitian_basis(eq.shape[0]), y)
        raise KeyError(name)

    @property
    def duals(self) -> dict[str, np.ndarray]:
        out = {blk.name: self.lmi_dual(blk.name) for blk in self.form.blocks}
        out.update({eq.name: self.equality_dual(eq.name) for eq in self.form.equalities})
        return out


# ------------------------------------------------------------ block helpers


def _gtz(sf: StandardForm, z: list[np.ndarray]) -> np.ndarray:
    out = np.zeros(sf.n)
    for blk, zb in zip(sf.blocks, z):
        if blk.idx.size:
            out[blk.idx] += np.tensordot(blk.G, zb, axes=([1, 2], [0, 1]))
    return out


def _dot(u: list[np.ndarray], v: list[np.ndarray]) -> float:
    return float(sum(np.vdot(a, b) for a, b in zip(u, v)))


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _jordan_div(lam: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solve ``lam o U = d`` for symmetric U with ``lam`` diagonal."""
    return 2.0 * d / (lam[:, None] + lam[None, :])


def _jordan(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * (a @ b + b @ a)


def _is_pd(m: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def _max_step(lam: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha with ``diag(lam) + alpha d >= 0``."""
    r = 1.0 / np.sqrt(lam)
    m = _sym(r[:, None] * d * r[None, :])
    e = np.linalg.eigvalsh(m)[0] if m.shape[0] > 1 else m[0, 0]
    return np.inf if e >= 0 else -1.0 / e


class _Scaling:
    """NT scaling ``W`` per block with ``W^{-T} S W^{-1} = W Z W^T = diag(lam)``.

    Stored as ``R = W^T`` and ``Rinv = W^{-T}`` so that ``S = R diag(lam) R^T``.
    """

    def __init__(self, S: list[np.ndarray], Z: list[np.ndarray]):
        self.R, self.Rinv, self.lam = [], [], []
        for s, z in zip(S, Z):
            ls = np.linalg.cholesky(s)
            lz = np.linalg.cholesky(z)
            u, lam, vt = np.linalg.svd(lz.T @ ls)
            sq = np.sqrt(lam)
            R = (ls @ vt.T) / sq[None, :]
            Rinv = (u / sq[None, :]).T @ lz.T
            self.R.append(R)
            self.Rinv.append(Rinv)
            self.lam.append(lam)


@dataclass
class _CoreBlock:
    cols: np.ndarray  # reduced-variable indices touching the block
    G: np.ndarray  # (len(cols), size, size)
    h: np.ndarray
    size: int


@dataclass
class _Reduced:
    """Standard form with the equalities eliminated: ``x = x0 + N w``."""

    c: np.ndarray
    blocks: list[_CoreBlock]
    x0: np.ndarray
    N: np.ndarray | None  # None means identity (no equalities)
    shift: float  # objective constant c @ x0 + obj_const
    U: np.ndarray | None = None  # left singular vectors / values of A for dual recovery
    sv: np.ndarray | None = None
    Vr: np.ndarray | None = None
    inconsistent: bool = False


def _eliminate(sf: StandardForm) -> _Reduced:
    n, p = sf.n, sf.A.shape[0]
    if p == 0:
        blocks = [_CoreBlock(b.idx, b.G, b.h, b.size) for b in sf.blocks]
        return _Reduced(sf.c.copy(), blocks, np.zeros(n), None, sf.obj_const)
    U, sv, Vt = np.linalg.svd(sf.A, full_matrices=True)
    tol = max(sf.A.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    r = int(np.sum(sv > max(tol, 1e-13)))
    Vr, N = Vt[:r].T, Vt[r:].T
    x0 = Vr @ ((U[:, :r].T @ sf.b) / sv[:r])
    resid = np.linalg.norm(sf.A @ x0 - sf.b)
    inconsistent = resid > 1e-9 * max(1.0, np.linalg.norm(sf.b))
    blocks = []
    for b in sf.blocks:
        if b.idx.size:
            sub = N[b.idx]  # (len(idx), n')
            cols = np.flatnonzero(np.any(np.abs(sub) > 0, axis=0))
            G = np.tensordot(sub[:, cols].T, b.G, axes=1)
            h = b.h - np.tensordot(x0[b.idx], b.G, axes=1)
        else:
            cols, G, h = b.idx, b.G, b.h
        blocks.append(_CoreBlock(cols, G, h, b.size))
    return _Reduced(N.T @ sf.c, blocks, x0, N, float(sf.c @ x0) + sf.obj_const,
                    U[:, :r], sv[:r], Vr, inconsistent)


def _gx_core(blocks, w):
    return [np.tensordot(w[b.cols], b.G, axes=1) if b.cols.size else np.zeros_like(b.h) for b in blocks]


def _gtz_core(blocks, z, n):
    out = np.zeros(n)
    for b, zb in zip(blocks, z):
        if b.cols.size:
            out[b.cols] += np.tensordot(b.G, zb, axes=([1, 2], [0, 1]))
    return out


class _KKTSolver:
    """Solves ``G^T dz = px; -G dx + H(dz) = pz`` in NT-scaled coordinates.

    With ``B`` the scaled constraint matrices ``Rinv G_i Rinv^T`` and
    ``dz~ = R^T dz R`` the system reads ``B^T dz~ = px; dz~ - B dx = p~``, so
    ``B^T B dx = px - B^T p~``.  The normal matrix is applied through a QR
    factor of ``B`` and the solution refined on the scaled system.
    """

    def __init__(self, blocks, n: int, sc: _Scaling):
        self.blocks, self.n, self.sc = blocks, n, sc
        self.B = []
        M = np.zeros((n, n))
        for i, b in enumerate(blocks):
            if not b.cols.size:
                self.B.append(None)
                continue
            Ri = sc.Rinv[i]
            Gs = np.matmul(np.matmul(Ri, b.G), Ri.T)
            self.B.append(Gs)
            flat = Gs.reshape(b.cols.size, -1)
            M[np.ix_(b.cols, b.cols)] += flat @ flat.T
        self.qr = None
        try:
            self.chol = sla.cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            self._use_qr()

    def _use_qr(self):
        """Switch to a QR factor of the stacked ``B``: slower, but avoids squaring its condition number."""
        parts = []
        for b, B in zip(self.blocks, self.B):
            if B is None:
                continue
            part = np.zeros((b.size * b.size, self.n))
            part[:, b.cols] = B.reshape(b.cols.size, -1).T
            parts.append(part)
        B = np.vstack(parts) if parts else np.zeros((0, self.n))
        if B.shape[0] < self.n:
            B = np.vstack([B, np.zeros((self.n - B.shape[0], self.n))])
        R = sla.qr(B, mode="r", check_finite=False)[0][:self.n]
        d = np.abs(np.diag(R))
        floor = REG * max(1.0, float(d.max(initial=0.0)))
        if np.any(d <= floor):
            R = R + np.diag(np.where(d <= floor, floor, 0.0))
        self.qr = R

    def _bx(self, dx):
        return [np.tensordot(dx[b.cols], B, axes=1) if B is not None else np.zeros((b.size, b.size))
                for b, B in zip(self.blocks, self.B)]

    def _btz(self, zt):
        out = np.zeros(self.n)
        for b, B, z in zip(self.blocks, self.B, zt):
            if B is not None:
                out[b.cols] += np.tensordot(B, z, axes=([1, 2], [0, 1]))
        return out

    def _normal(self, rhs):
        if self.qr is None:
            return sla.cho_solve(self.chol, rhs, check_finite=False)
        t = sla.solve_triangular(self.qr, rhs, trans="T", check_finite=False)
        return sla.solve_triangular(self.qr, t, check_finite=False)

    def _solve_scaled(self, px, pt):
        dx = self._normal(px - self._btz(pt))
        bx = self._bx(dx)
        return dx, [p + g for p, g in zip(pt, bx)]

    def _refined(self, px, pt, refine):
        dx, zt = self._solve_scaled(px, pt)
        scale = max(1.0, np.linalg.norm(px), np.sqrt(_dot(pt, pt)))
        err = np.inf
        for _ in range(refine + 1):
            ex = px - self._btz(zt)
            bx = self._bx(dx)
            ez = [p - (z - g) for p, z, g in zip(pt, zt, bx)]
            err = max(np.linalg.norm(ex), np.sqrt(_dot(ez, ez))) / scale
            if err <= 1e-14:
                break
            cx, cz = self._solve_scaled(ex, ez)
            dx = dx + cx
            zt = [a + b for a, b in zip(zt, cz)]
        return dx, zt, err

    def solve(self, px, pz, refine: int = 3):
        sc = self.sc
        pt = [_sym(sc.Rinv[i] @ v @ sc.Rinv[i].T) for i, v in enumerate(pz)]
        dx, zt, err = self._refined(px, pt, refine)
        if err > ACCEPT_RESIDUAL and self.qr is None:
            self._use_qr()
            dx, zt, err = self._refined(px, pt, refine)
        dz = [_sym(sc.Rinv[i].T @ z @ sc.Rinv[i]) for i, z in enumerate(zt)]
        return dx, dz


# ---------------------------------------------------------------- main loop


def _hsd(red: _Reduced, tol: Tolerances, log=None) -> dict:
    """Interior-point iterations on ``min c w  s.t.  h - G w >= 0`` (blockwise)."""
    c, blocks = red.c, red.blocks
    n = c.size
    h = [b.h for b in blocks]
    nu = sum(b.size for b in blocks)
    nc = max(1.0, float(np.linalg.norm(c)))
    nh = max(1.0, float(np.sqrt(_dot(h, h))))

    x = np.zeros(n)
    S = [np.eye(b.size) for b in blocks]
    Z = [np.eye(b.size) for b in blocks]
    tau = kappa = 1.0

    best = None
    cert_hist: list[float] = []
    status = NUMERICAL_FAILURE
    it = 0
    metrics = (np.inf, np.inf, np.inf)
    for it in range(tol.max_iter + 1):
        Gx = _gx_core(blocks, x)
        GTz = _gtz_core(blocks, Z, n)
        r1 = GTz + c * tau
        r3 = [-g + hb * tau - s for g, hb, s in zip(Gx, h, S)]
        hz = _dot(h, Z)
        cx = float(c @ x)
        r4 = -cx - hz - kappa
        sz = _dot(S, Z)

        pres = np.sqrt(_dot(r3, r3)) / tau / nh
        dres = np.linalg.norm(r1) / tau / nc
        pcost = cx / tau + red.shift
        dcost = -hz / tau + red.shift
        gap_abs = max(sz / tau ** 2, abs(pcost - dcost))
        gap = gap_abs / max(1.0, min(abs(pcost), abs(dcost)))
        merit = max(pres / tol.feas, dres / tol.feas, gap / tol.gap)
        if best is None or merit < best[0]:
            best = (merit, x / tau, [s / tau for s in S], [z / tau for z in Z], (pres, dres, gap))
        metrics = (pres, dres, gap)
        if pres <= tol.feas and dres <= tol.feas and gap <= tol.gap:
            status = OPTIMAL
            break
        pinf = dinf = np.inf
        if hz < 0:
            pinf = np.linalg.norm(GTz) / nc / -hz
            if pinf <= tol.feas:
                status = PRIMAL_INFEASIBLE
                break
        if cx < 0:
            gxs = [g + s for g, s in zip(Gx, S)]
            dinf = np.sqrt(_dot(gxs, gxs)) / nh / -cx
            if dinf <= tol.feas:
                status = DUAL_INFEASIBLE
                break
        # Once tau has collapsed against kappa the iterates only rescale; if the
        # certificate quality has stopped improving, rounding has won and the
        # best certificate is judged against the looser stall threshold.
        cert_hist.append(min(pinf, dinf))
        if tau < 1e-8 * kappa and len(cert_hist) > 8 and min(cert_hist[-5:]) > 0.5 * min(cert_hist[:-5]):
            if pinf <= tol.stall_certificate and pinf <= dinf:
                status = PRIMAL_INFEASIBLE
            elif dinf <= tol.stall_certificate:
                status = DUAL_INFEASIBLE
            break
        if it == tol.max_iter:
            break

        mu = (sz + tau * kappa) / (nu + 1)
        try:
            sc = _Scaling(S, Z)
            kkt = _KKTSolver(blocks, n, sc)
            vx, vz = kkt.solve(c, h)
        except (np.linalg.LinAlgError, ValueError):
            break

        def direction(eta, ds, dtk):
            pz = []
            for i in range(len(S)):
                u = _jordan_div(sc.lam[i], ds[i])
                pz.append(-eta * r3[i] + sc.R[i] @ u @ sc.R[i].T)
            ux, uz = kkt.solve(-eta * r1, pz)
            num = -eta * r4 + dtk / tau + float(c @ ux) + _dot(h, uz)
            den = float(c @ vx) + _dot(h, vz) + kappa / tau
            dtau = num / den
            dx = ux - vx * dtau
            dz = [a - bz * dtau for a, bz in zip(uz, vz)]
            # unscaled slack step from the linear residual equation keeps the
            # residuals decreasing by exactly (1 - alpha * eta)
            gdx = _gx_core(blocks, dx)
            dS = [_sym(-g + hb * dtau + eta * r) for g, hb, r in zip(gdx, h, r3)]
            dst = [_sym(sc.Rinv[i] @ dS[i] @ sc.Rinv[i].T) for i in range(len(S))]
            dzt = [_sym(sc.R[i].T @ dz[i] @ sc.R[i]) for i in range(len(S))]
            dkappa = eta * r4 - float(c @ dx) - _dot(h, dz)
            return dx, dz, dS, dst, dzt, dtau, dkappa

        def step_len(dst, dzt, dtau, dkappa):
            a = np.inf
            for i in range(len(S)):
                a = min(a, _max_step(sc.lam[i], dst[i]), _max_step(sc.lam[i], dzt[i]))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        lam2 = [np.diag(l * l) for l in sc.lam]
        try:
            aff = direction(1.0, [-m for m in lam2], -tau * kappa)
            a_aff = min(1.0, step_len(*aff[3:]))
            sigma = (1.0 - a_aff) ** 3
            ds = [-lam2[i] - _jordan(aff[3][i], aff[4][i]) + sigma * mu * np.eye(len(sc.lam[i]))
                  for i in range(len(S))]
            dtk = -tau * kappa - aff[5] * aff[6] + sigma * mu
            dx, dz, dS, dst, dzt, dtau, dkappa = direction(1.0 - sigma, ds, dtk)
            alpha = min(1.0, tol.step * step_len(dst, dzt, dtau, dkappa))
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            break
        if log is not None:
            log(dict(it=it, pres=pres, dres=dres, gap=gap, pinf=pinf, dinf=dinf, tau=tau, kappa=kappa,
                     mu=mu, sigma=sigma, alpha=alpha))
        if not np.isfinite(alpha) or alpha < 1e-12:
            break
        for _ in range(20):
            newS = [_sym(a + alpha * d) for a, d in zip(S, dS)]
            newZ = [_sym(a + alpha * d) for a, d in zip(Z, dz)]
            if all(_is_pd(m) for m in newS) and all(_is_pd(m) for m in newZ):
                break
            alpha *= 0.8
        else:
            break
        x = x + alpha * dx
        S, Z = newS, newZ
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    if status == OPTIMAL:
        w, Ss, Zs = x / tau, [s / tau for s in S], [z / tau for z in Z]
    elif status == PRIMAL_INFEASIBLE:
        scale = -_dot(h, Z)
        w, Ss, Zs = None, None, [z / scale for z in Z]
    elif status == DUAL_INFEASIBLE:
        scale = -float(c @ x)
        w, Ss, Zs = x / scale, [s / scale for s in S], None
    else:
        # unattained optima stall with tau and kappa both vanishing; keep the
        # best iterate and flag it when it is still accurate to ``near``
        _, w, Ss, Zs, metrics = best
        if max(metrics) <= tol.near:
            status = NEAR_OPTIMAL
    return dict(status=status, w=w, S=Ss, Z=Zs, metrics=metrics, iterations=it)


def solve(sf: StandardForm, tolerances: Tolerances | None = None, log=None) -> Solution:
    """Solve a compiled model; ``log`` (optional) receives one dict per iteration."""
    tol = tolerances or Tolerances()
    n, p = sf.n, sf.A.shape[0]
    red = _eliminate(sf)
    nan_x, nan_y = np.full(n, np.nan), np.full(p, np.nan)
    if red.inconsistent:
        # A x = b alone has no solution; the least-squares residual r has
        # A^T r = 0 and b.r = -|r|^2, which certifies it
        r = sf.A @ red.x0 - sf.b
        y = r / float(r @ r)
        sol = Solution(PRIMAL_INFEASIBLE, np.nan, np.nan, np.inf, np.inf, np.inf, 0, nan_x, y,
                       [np.full_like(b.h, np.nan) for b in sf.blocks], [np.zeros_like(b.h) for b in sf.blocks], sf)
        return sol
    out = _hsd(red, tol, log)
    status, metrics = out["status"], out["metrics"]
    h = [b.h for b in sf.blocks]

    def lift(w, homogeneous=False):
        if red.N is None:
            return w.copy()
        return red.N @ w + (0.0 if homogeneous else red.x0)

    def dual_y(Z):
        if red.N is None:
            return np.zeros(0)
        rhs = -(sf.c + _gtz(sf, Z))
        return red.U @ ((red.Vr.T @ rhs) / red.sv)

    if status in (OPTIMAL, NEAR_OPTIMAL, NUMERICAL_FAILURE):
        xs, Ss, Zs = lift(out["w"]), out["S"], out["Z"]
        ys = dual_y(Zs)
    elif status == PRIMAL_INFEASIBLE:
        Zs = out["Z"]
        rhs = -_gtz(sf, Zs)
        ys = red.U @ ((red.Vr.T @ rhs) / red.sv) if red.N is not None else np.zeros(0)
        xs, Ss = nan_x, [np.full_like(b, np.nan) for b in h]
    else:
        xs, Ss = lift(out["w"], homogeneous=True), out["S"]
        ys, Zs = nan_y, [np.full_like(b, np.nan) for b in h]
    pres, dres, gap = metrics
    pobj = float(sf.c @ xs) + sf.obj_const
    dobj = -(float(sf.b @ ys) + _dot(h, Zs)) + sf.obj_const
    if sf.sense == "max":
        pobj, dobj = -pobj, -dobj
    sol = Solution(status, pobj, dobj, gap, pres, dres, out["iterations"], xs, ys, Ss, Zs, sf)
    if status in (OPTIMAL, NEAR_OPTIMAL, NUMERICAL_FAILURE, DUAL_INFEASIBLE):
        sol.primal = sf.recover(xs)
    return sol


def solve_or_raise(sf: StandardForm, tolerances: Tolerances | None = None) -> Solution:
    """Like :func:`solve` but raise :class:`NumericalFailure` on a stalled run."""
    sol = solve(sf, tolerances)
    if sol.status == NUMERICAL_FAILURE:
        raise NumericalFailure(
            f"solver stopped after {sol.iterations} iterations (gap {sol.gap:.2e}, "
            f"residuals {sol.primal_residual:.2e}/{sol.dual_residual:.2e})",
            best=sol,
        )
    return sol
