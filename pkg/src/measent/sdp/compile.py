"""Compilation of a :class:`Model` to real block-diagonal conic standard form.

Standard form (all data real)::

    minimize    c @ x
    subject to  A @ x == b
                S_j = h_j - sum_i x[idx_j[i]] * G_j[i]  >= 0   (PSD, per block j)

``x`` stacks the real parameters of every model variable.  Complex Hermitian
LMIs pass through :func:`measent.linalg.real_embed`; scalar inequalities and
nonnegative variables become 1x1 blocks (the slack is the block itself).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..linalg import real_embed
from .model import Affine, Model, Variable, hermitian_coords


@dataclass
class ConeBlock:
    name: str
    size: int
    idx: np.ndarray  # variable indices touching the block
    G: np.ndarray  # (len(idx), size, size)
    h: np.ndarray  # (size, size)
    embedded: bool  # True when the block is the real embedding of a complex LMI


@dataclass
class EqualityRows:
    name: str
    start: int
    stop: int
    shape: tuple[int, int]


@dataclass
class StandardForm:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    blocks: list[ConeBlock]
    variables: list[Variable]
    offsets: dict[int, int]
    equalities: list[EqualityRows] = field(default_factory=list)
    obj_const: float = 0.0
    sense: str = "min"

    @property
    def n(self) -> int:
        return self.c.size

    def params_of(self, x: np.ndarray, v: Variable) -> np.ndarray:
        o = self.offsets[id(v)]
        return x[o:o + v.n_params]

    def recover(self, x: np.ndarray) -> dict[Variable, np.ndarray]:
        """Map a standard-form vector back to model variable values."""
        return {v: v.from_params(self.params_of(x, v)) for v in self.variables}

    def flatten(self, assignment: dict) -> np.ndarray:
        """Inverse of :meth:`recover` for a full assignment of model variables."""
        x = np.zeros(self.n)
        for v in self.variables:
            o = self.offsets[id(v)]
            val = np.asarray(assignment[v], dtype=complex)
            if v.kind == "nonneg":
                x[o] = float(np.real(val.reshape(-1)[0]))
            else:
                x[o:o + v.n_params] = hermitian_coords(val.reshape(v.dim, v.dim))
        return x

    def model_objective(self, x: np.ndarray) -> float:
        """Objective in the model's own sense."""
        val = float(self.c @ x) + self.obj_const
        return -val if self.sense == "max" else val


def _linear_part(expr: Affine, offsets: dict[int, int], n: int) -> np.ndarray:
    """Dense ``(rows, cols, n)`` tensor of the linear part of ``expr``."""
    r, c = expr.shape
    out = np.zeros((r, c, n), dtype=complex)
    for v, t in expr.terms.items():
        o = offsets[id(v)]
        out[:, :, o:o + v.n_params] += t
    return out


def _block_from(name: str, expr: Affine, offsets: dict[int, int], n: int) -> ConeBlock:
    r = expr.shape[0]
    lin = _linear_part(expr, offsets, n)
    used = np.flatnonzero(np.any(np.abs(lin) > 0, axis=(0, 1)))
    if r == 1:
        h = np.array([[np.real(expr.const[0, 0])]])
        G = -np.real(lin[:, :, used]).transpose(2, 0, 1)
        return ConeBlock(name, 1, used, G, h, False)
    h = real_embed(expr.const)
    G = np.stack([-real_embed(lin[:, :, i]) for i in used]) if used.size else np.zeros((0, 2 * r, 2 * r))
    return ConeBlock(name, 2 * r, used, G, h, True)


def _check_hermitian(name: str, expr: Affine):
    tol = 1e-9 * max(1.0, float(np.max(np.abs(expr.const), initial=0.0)))
    if np.max(np.abs(expr.const - expr.const.conj().T), initial=0.0) > tol:
        raise InputError(f"constraint {name!r} is not Hermitian")
    for t in expr.terms.values():
        if np.max(np.abs(t - np.conj(t.transpose(1, 0, 2))), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(t))):
            raise InputError(f"constraint {name!r} is not Hermitian")


def compile_model(model: Model) -> StandardForm:
    variables = list(model.variables)
    offsets: dict[int, int] = {}
    n = 0
    for v in variables:
        offsets[id(v)] = n
        n += v.n_params

    blocks: list[ConeBlock] = []
    for v in variables:
        if v.kind in ("psd", "nonneg"):
            blocks.append(_block_from(f"{v.name}>=0", v.expr, offsets, n))
    for name, expr in model.lmis:
        _check_hermitian(name, expr)
        blocks.append(_block_from(name, expr, offsets, n))
    for name, expr in model.inequalities:
        if abs(np.imag(expr.const[0, 0])) > 1e-9:
            raise InputError(f"inequality {name!r} is not real")
        blocks.append(_block_from(name, expr, offsets, n))

    rows, rhs, eqs = [], [], []
    start = 0
    for name, expr in model.equalities:
        lin = _linear_part(expr, offsets, n)
        r, c = expr.shape
        if r == c == 1:
            rows.append(np.real(lin[0, 0, :])[None, :])
            rhs.append(np.array([-np.real(expr.const[0, 0])]))
            k = 1
        else:
            if r != c:
                raise InputError(f"equality {name!r} must be square")
            _check_hermitian(name, expr)
            rows.append(hermitian_coords(lin))
            rhs.append(-hermitian_coords(expr.const))
            k = r * r
        eqs.append(EqualityRows(name, start, start + k, (r, c)))
        start += k
    A = np.vstack(rows) if rows else np.zeros((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)

    obj = model.objective
    if obj.shape != (1, 1):
        raise InputError("objective must be scalar")
    lin = _linear_part(obj, offsets, n)[0, 0, :]
    if not np.all(np.isfinite(lin)) or not np.isfinite(obj.const[0, 0]):
        raise InputError("objective coefficients must be finite")
    c = np.real(lin).copy()
    const = float(np.real(obj.const[0, 0]))
    if model.sense == "max":
        c, const = -c, -const
    return StandardForm(c, A, b, blocks, variables, offsets, eqs, const, model.sense)
