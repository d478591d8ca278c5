"""Declarative SDP models over Hermitian matrix variables.

An :class:`Affine` is a complex matrix expression ``C + sum_v L_v(p_v)`` where
``p_v`` is the real parameter vector of variable ``v`` (``d*d`` numbers for a
``d x d`` Hermitian matrix, in an orthonormal Hermitian basis).  Each linear
map ``L_v`` is stored densely as an array of shape ``(rows, cols, n_params)``.
"""
from __future__ import annotations

from functools import cached_property
from typing import Iterable

import numpy as np

from ..errors import InputError

KINDS = ("hermitian", "psd", "nonneg")


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis of d x d Hermitian matrices, shape ``(d, d, d*d)``.

    Ordering: diagonal units first, then for each ``i < j`` the real and the
    imaginary off-diagonal element.
    """
    out = np.zeros((d, d, d * d), dtype=complex)
    for i in range(d):
        out[i, i, i] = 1.0
    k = d
    r = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            out[i, j, k] = out[j, i, k] = r
            out[i, j, k + 1] = 1j * r
            out[j, i, k + 1] = -1j * r
            k += 2
    return out


def hermitian_coords(m: np.ndarray) -> np.ndarray:
    """Coordinates ``Re Tr[B_k M]`` in :func:`hermitian_basis`, batched over trailing axes.

    ``m`` has shape ``(d, d, ...)``; the result has shape ``(d*d, ...)``.
    """
    d = m.shape[0]
    iu, ju = np.triu_indices(d, 1)
    diag = np.real(m[np.arange(d), np.arange(d)])
    off = m[iu, ju]
    s2 = np.sqrt(2.0)
    pairs = np.stack([s2 * off.real, s2 * off.imag], axis=1)
    pairs = pairs.reshape((2 * len(iu),) + m.shape[2:])
    return np.concatenate([diag, pairs], axis=0)


class Variable:
    """A matrix (or nonnegative scalar) decision variable.

    Identity is object identity; the model assigns offsets in order of first
    appearance, which keeps compilation deterministic.
    """

    __array_ufunc__ = None

    def __init__(self, name: str, dim: int = 1, kind: str = "hermitian"):
        if kind not in KINDS:
            raise InputError(f"unknown variable kind {kind!r}")
        if dim < 1:
            raise InputError("variable dimension must be positive")
        if kind == "nonneg" and dim != 1:
            raise InputError("nonnegative variables are scalars")
        self.name = name
        self.dim = dim
        self.kind = kind

    def __repr__(self):
        return f"Variable({self.name!r}, dim={self.dim}, kind={self.kind!r})"

    @property
    def n_params(self) -> int:
        return 1 if self.kind == "nonneg" else self.dim * self.dim

    @cached_property
    def basis(self) -> np.ndarray:
        if self.kind == "nonneg":
            return np.ones((1, 1, 1), dtype=complex)
        return hermitian_basis(self.dim)

    @property
    def expr(self) -> "Affine":
        return Affine(np.zeros((self.dim, self.dim), dtype=complex), {self: self.basis})

    def from_params(self, p: np.ndarray) -> np.ndarray:
        if self.kind == "nonneg":
            return np.array([[float(p[0])]])
        return np.einsum("ijk,k->ij", self.basis, p)

    # arithmetic delegates to Affine
    def __add__(self, o):
        return self.expr + o

    def __radd__(self, o):
        return o + self.expr

    def __sub__(self, o):
        return self.expr - o

    def __rsub__(self, o):
        return as_affine(o) - self.expr

    def __neg__(self):
        return -self.expr

    def __mul__(self, o):
        return self.expr * o

    def __rmul__(self, o):
        return self.expr * o

    def __matmul__(self, o):
        return self.expr @ o

    def __rmatmul__(self, o):
        return o @ self.expr


class Affine:
    """Affine complex matrix expression in the model variables."""

    __array_ufunc__ = None

    def __init__(self, const, terms: dict | None = None):
        c = np.asarray(const, dtype=complex)
        if c.ndim == 0:
            c = c.reshape(1, 1)
        if c.ndim != 2:
            raise InputError("affine expressions are matrices")
        self.const = c
        self.terms: dict[Variable, np.ndarray] = dict(terms or {})

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @property
    def is_constant(self) -> bool:
        return not self.terms

    def variables(self) -> list[Variable]:
        return list(self.terms)

    def _combine(self, other: "Affine", sign: float) -> "Affine":
        if other.shape != self.shape:
            raise InputError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = {v: t.copy() for v, t in self.terms.items()}
        for v, t in other.terms.items():
            if v in terms:
                terms[v] = terms[v] + sign * t
            else:
                terms[v] = sign * t
        return Affine(self.const + sign * other.const, terms)

    def __add__(self, o):
        return self._combine(as_affine(o, self.shape), 1.0)

    def __radd__(self, o):
        return as_affine(o, self.shape)._combine(self, 1.0)

    def __sub__(self, o):
        return self._combine(as_affine(o, self.shape), -1.0)

    def __rsub__(self, o):
        return as_affine(o, self.shape)._combine(self, -1.0)

    def __neg__(self):
        return Affine(-self.const, {v: -t for v, t in self.terms.items()})

    def __mul__(self, s):
        if isinstance(s, (Affine, Variable)) or np.ndim(s) != 0:
            raise InputError("only scalar multiplication is affine")
        return Affine(self.const * s, {v: t * s for v, t in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / s)

    def __matmul__(self, m):
        m = np.asarray(m, dtype=complex)
        return Affine(self.const @ m, {v: np.einsum("ijp,jk->ikp", t, m) for v, t in self.terms.items()})

    def __rmatmul__(self, m):
        m = np.asarray(m, dtype=complex)
        return Affine(m @ self.const, {v: np.einsum("ki,ijp->kjp", m, t) for v, t in self.terms.items()})

    @property
    def H(self) -> "Affine":
        return Affine(self.const.conj().T, {v: np.conj(t.transpose(1, 0, 2)) for v, t in self.terms.items()})

    def value(self, assignment: dict) -> np.ndarray:
        """Evaluate at ``{variable: matrix}``."""
        out = self.const.copy()
        for v, t in self.terms.items():
            p = hermitian_coords(np.asarray(assignment[v], dtype=complex).reshape(v.dim, v.dim)) \
                if v.kind != "nonneg" else np.array([float(np.real(np.asarray(assignment[v]).reshape(-1)[0]))])
            out = out + np.einsum("ijp,p->ij", t, p)
        return out


def as_affine(x, shape: tuple[int, int] | None = None) -> Affine:
    if isinstance(x, Affine):
        return x
    if isinstance(x, Variable):
        return x.expr
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 0 and shape is not None:
        if shape[0] != shape[1]:
            raise InputError("scalar promotion needs a square shape")
        arr = arr * np.eye(shape[0])
    return Affine(arr)


def kron(a, b) -> Affine:
    """Kronecker product where at most one factor depends on variables."""
    a = as_affine(a)
    b = as_affine(b)
    if not a.is_constant and not b.is_constant:
        raise InputError("kron of two variable expressions is not affine")
    (ra, ca), (rb, cb) = a.shape, b.shape
    const = np.kron(a.const, b.const)
    terms = {}
    if not a.is_constant:
        for v, t in a.terms.items():
            terms[v] = np.einsum("ijp,ab->iajbp", t, b.const).reshape(ra * rb, ca * cb, -1)
    else:
        for v, t in b.terms.items():
            terms[v] = np.einsum("ij,abp->iajbp", a.const, t).reshape(ra * rb, ca * cb, -1)
    return Affine(const, terms)


def bmat(rows: list[list]) -> Affine:
    """Block matrix of affine expressions; ``None`` entries are zero blocks."""
    nr, nc = len(rows), len(rows[0])
    heights = [None] * nr
    widths = [None] * nc
    cells = [[None if e is None else as_affine(e) for e in row] for row in rows]
    for i, row in enumerate(cells):
        if len(row) != nc:
            raise InputError("ragged block matrix")
        for j, e in enumerate(row):
            if e is None:
                continue
            h, w = e.shape
            if heights[i] not in (None, h) or widths[j] not in (None, w):
                raise InputError("inconsistent block sizes")
            heights[i], widths[j] = h, w
    if None in heights or None in widths:
        raise InputError("every block row and column needs one sized entry")
    r0 = np.concatenate([[0], np.cumsum(heights)])
    c0 = np.concatenate([[0], np.cumsum(widths)])
    const = np.zeros((r0[-1], c0[-1]), dtype=complex)
    terms: dict[Variable, np.ndarray] = {}
    for i, row in enumerate(cells):
        for j, e in enumerate(row):
            if e is None:
                continue
            const[r0[i]:r0[i + 1], c0[j]:c0[j + 1]] = e.const
            for v, t in e.terms.items():
                if v not in terms:
                    terms[v] = np.zeros((r0[-1], c0[-1], t.shape[2]), dtype=complex)
                terms[v][r0[i]:r0[i + 1], c0[j]:c0[j + 1], :] += t
    return Affine(const, terms)


def inner(c, x) -> Affine:
    """Scalar ``Tr[C X]`` as a 1x1 affine expression."""
    c = np.asarray(c, dtype=complex)
    x = as_affine(x)
    if c.shape != x.shape[::-1]:
        raise InputError(f"trace pairing shape mismatch {c.shape} vs {x.shape}")
    const = np.trace(c @ x.const)
    terms = {v: np.einsum("ji,ijp->p", c, t).reshape(1, 1, -1) for v, t in x.terms.items()}
    return Affine(np.array([[const]]), terms)


def trace(x) -> Affine:
    x = as_affine(x)
    return inner(np.eye(x.shape[0]), x)


class Model:
    """Linear objective over LMIs, affine equalities and scalar inequalities."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self._registered: set[int] = set()
        self.lmis: list[tuple[str, Affine]] = []
        self.equalities: list[tuple[str, Affine]] = []
        self.inequalities: list[tuple[str, Affine]] = []
        self.sense = "min"
        self.objective = Affine(np.zeros((1, 1)))

    def _register(self, expr: Affine):
        for v in expr.terms:
            if id(v) not in self._registered:
                self._registered.add(id(v))
                self.variables.append(v)

    def variable(self, name: str, dim: int = 1, kind: str = "hermitian") -> Variable:
        v = Variable(name, dim, kind)
        self._register(v.expr)
        return v

    def add_lmi(self, expr, name: str | None = None):
        expr = as_affine(expr)
        if expr.shape[0] != expr.shape[1]:
            raise InputError("LMI expression must be square")
        self._register(expr)
        self.lmis.append((name or f"lmi{len(self.lmis)}", expr))

    def add_equality(self, lhs, rhs=0.0, name: str | None = None):
        lhs = as_affine(lhs)
        expr = lhs - as_affine(rhs, lhs.shape)
        self._register(expr)
        self.equalities.append((name or f"eq{len(self.equalities)}", expr))

    def add_inequality(self, expr, name: str | None = None):
        """Scalar constraint ``expr >= 0``."""
        expr = as_affine(expr)
        if expr.shape != (1, 1):
            raise InputError("scalar inequality expected")
        self._register(expr)
        self.inequalities.append((name or f"ineq{len(self.inequalities)}", expr))

    def add_graph(self, graph, prefix: str = ""):
        for i, blk in enumerate(graph.blocks):
            self.add_lmi(blk.matrix(), f"{prefix}block{i}")
        for i, extra in enumerate(graph.lmis):
            self.add_lmi(extra, f"{prefix}order{i}")
        for i, eq in enumerate(graph.equalities):
            self.add_equality(eq, name=f"{prefix}eq{i}")

    def maximize(self, expr):
        expr = as_affine(expr)
        self._register(expr)
        self.sense, self.objective = "max", expr

    def minimize(self, expr):
        expr = as_affine(expr)
        self._register(expr)
        self.sense, self.objective = "min", expr

    def compile(self):
        from .compile import compile_model

        return compile_model(self)

    def solve(self, tolerances=None):
        from .solver import solve

        return solve(self.compile(), tolerances)


def graph_variables(items: Iterable[Affine]) -> list[Variable]:
    seen, out = set(), []
    for e in items:
        for v in e.terms:
            if id(v) not in seen:
                seen.add(id(v))
                out.append(v)
    return out
