"""KKT residuals recomputed from a returned solution.

Uses a dense vectorized copy of the standard-form data rather than the
solver's block kernels, so it checks the solver instead of repeating it.
"""
from __future__ import annotations

import numpy as np


def _dense_g(sf) -> tuple[np.ndarray, np.ndarray]:
    rows, hs = [], []
    for blk in sf.blocks:
        g = np.zeros((blk.size * blk.size, sf.n))
        for col, i in enumerate(blk.idx):
            g[:, i] = blk.G[col].reshape(-1)
        rows.append(g)
        hs.append(blk.h.reshape(-1))
    if not rows:
        return np.zeros((0, sf.n)), np.zeros(0)
    return np.vstack(rows), np.concatenate(hs)


def kkt_residuals(sol) -> dict:
    """Relative primal/dual residuals, complementarity and cone membership.

    Keys: ``primal`` (equalities and conic slack), ``dual`` (stationarity),
    ``gap`` (``<s, z>`` relative to the objective), ``cone`` (most negative
    eigenvalue of any slack or multiplier block).
    """
    sf = sol.form
    if sol.status not in ("optimal", "near-optimal"):
        return {}
    G, h = _dense_g(sf)
    x, y = sol.x, sol.y
    s = np.concatenate([b.reshape(-1) for b in sol.s]) if sol.s else np.zeros(0)
    z = np.concatenate([b.reshape(-1) for b in sol.z]) if sol.z else np.zeros(0)
    eq = np.linalg.norm(sf.A @ x - sf.b) / max(1.0, np.linalg.norm(sf.b)) if sf.b.size else 0.0
    con = np.linalg.norm(G @ x + s - h) / max(1.0, np.linalg.norm(h))
    dual = np.linalg.norm(sf.A.T @ y + G.T @ z + sf.c) / max(1.0, np.linalg.norm(sf.c))
    pobj = float(sf.c @ x)
    gap = abs(float(s @ z)) / max(1.0, abs(pobj))
    cone = min(
        [0.0] + [float(np.linalg.eigvalsh(b)[0]) for b in sol.s] + [float(np.linalg.eigvalsh(b)[0]) for b in sol.z]
    )
    return {"primal": float(max(eq, con)), "dual": float(dual), "gap": float(gap), "cone": cone}
