"""LMI graphs for the weighted geometric mean and the log-perspective approximation.

Builders emit constraint systems over :mod:`measent.sdp` expressions; they do
not touch a model, so the result can be added to any number of models.

Geometric mean graphs use three facts:

* ``[[A, W], [W, B]] >= 0`` implies ``W <= A # B`` and ``W = A # B`` satisfies it,
  so a chain of such blocks along the binary expansion of a dyadic exponent
  describes the hypograph of ``G_t`` (``A # B`` composes as
  ``G_a # G_b = G_{(a+b)/2}``).
* ``G_t(X, Y) = Y G_{2-t}(X, Y)^{-1} Y`` turns ``t`` in ``[1, 2]`` into a chain for
  ``2 - t`` followed by one block ``[[W, Y], [Y, T]]``.
* ``G_t(X, Y) = X G_{1+t}(Y, X)^{-1} X`` does the same for ``t`` in ``[-1, 0]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import NamedTuple

import numpy as np

from .errors import AccuracyUnreachable, InputError
from .sdp.model import Affine, Variable, as_affine, bmat

DYADIC_BITS = 30
MAX_NODES = 64
MK_CAP = 16
GRID_POINTS = 2000


# ------------------------------------------------------------------ exponents


@dataclass(frozen=True)
class RationalExponent:
    """Reduced fraction ``p/q`` with value in ``[-1, 2]``."""

    p: int
    q: int

    def __post_init__(self):
        if self.q <= 0:
            raise InputError("denominator must be positive")
        if gcd(abs(self.p), self.q) != 1:
            raise InputError(f"{self.p}/{self.q} is not reduced")
        if not -1 <= Fraction(self.p, self.q) <= 2:
            raise InputError(f"exponent {self.p}/{self.q} outside [-1, 2]")

    @classmethod
    def of(cls, t) -> "RationalExponent":
        """Build from a Fraction, an int, a ``"p/q"`` string or another exponent."""
        if isinstance(t, RationalExponent):
            return t
        if isinstance(t, float):
            raise InputError("exponents are exact rationals; pass a Fraction or 'p/q'")
        f = Fraction(t)
        return cls(f.numerator, f.denominator)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.p, self.q)

    def __float__(self):
        return self.p / self.q

    @property
    def is_dyadic(self) -> bool:
        return self.q & (self.q - 1) == 0

    def __str__(self):
        return f"{self.p}/{self.q}"


def nearest_dyadic(t: Fraction, bits: int = DYADIC_BITS) -> Fraction:
    return Fraction(round(t * 2 ** bits), 2 ** bits)


# ---------------------------------------------------------------- quadrature


class QuadratureRule(NamedTuple):
    m: int
    nodes: np.ndarray
    weights: np.ndarray


def gauss_legendre(m: int) -> QuadratureRule:
    """m-point Gauss-Legendre rule on ``[0, 1]``."""
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= MAX_NODES:
        raise InputError(f"quadrature size must be an integer in [1, {MAX_NODES}]")
    x, w = np.polynomial.legendre.leggauss(int(m))
    return QuadratureRule(int(m), (x + 1.0) / 2.0, w / 2.0)


def scalar_r(z, m: int, k: int):
    """``r_{m,k}(z) = 2^k r_m(z^{2^-k})`` with ``r_m(x) = sum_j w_j (x-1)/(t_j (x-1) + 1)``.

    ``z^{2^-k} - 1`` is evaluated as ``expm1(log(z) / 2^k)`` so that ``r_{m,k}(1) = 0``
    exactly and large ``k`` keeps full relative precision.
    """
    rule = gauss_legendre(m)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise InputError("scalar_r needs z > 0")
    u = np.expm1(np.log(z) / 2.0 ** k)[..., None]
    out = 2.0 ** k * np.sum(rule.weights * u / (rule.nodes * u + 1.0), axis=-1)
    return out if out.ndim else float(out)


def approximation_error(m: int, k: int, a: float, points: int = GRID_POINTS) -> float:
    """Grid estimate of ``max |r_{m,k}(z) - ln z|`` over ``z`` in ``[1/a, a]``."""
    z = np.geomspace(1.0 / a, a, points)
    return float(np.max(np.abs(scalar_r(z, m, k) - np.log(z))))


class MkSelection(NamedTuple):
    m: int
    k: int
    bound: float


def select_mk(a: float, eps: float, cap: int = MK_CAP) -> MkSelection:
    """Smallest ``m + k`` (ties toward larger ``k``) with grid error at most ``eps``."""
    if not a > 1 or not eps > 0:
        raise InputError("select_mk needs a > 1 and eps > 0")
    best = np.inf
    for total in range(1, 2 * cap + 1):
        for k in range(min(total - 1, cap), -1, -1):
            m = total - k
            if m > cap:
                continue
            err = approximation_error(m, k, a)
            best = min(best, err)
            if err <= eps:
                return MkSelection(m, k, err)
    raise AccuracyUnreachable(
        f"no (m, k) with m, k <= {cap} reaches {eps:g} on [1/{a:g}, {a:g}]", best_bound=best
    )


# --------------------------------------------------------------------- graphs


@dataclass
class LmiBlock:
    """``[[a, b], [b^H, d]] >= 0``."""

    a: Affine
    b: Affine
    d: Affine

    def matrix(self) -> Affine:
        return bmat([[self.a, self.b], [self.b.H, self.d]])


@dataclass
class ConeCertificate:
    exponent: RationalExponent | None
    approximated: bool
    substituted: Fraction | None
    lmi_count: int
    error_bound: float | None  # None while the bound awaits numeric operands
    side: str = ""

    @property
    def deferred(self) -> bool:
        return self.error_bound is None

    def bound_for(self, x, y) -> float:
        """Value-error bound for numeric operands ``x, y``."""
        if not self.approximated:
            return 0.0
        return geomean_error_bound(x, y, self.exponent.fraction, self.substituted)


@dataclass
class ConeGraph:
    blocks: list[LmiBlock] = field(default_factory=list)
    lmis: list[Affine] = field(default_factory=list)  # plain order constraints ``e >= 0``
    equalities: list[Affine] = field(default_factory=list)  # ``e == 0``
    auxiliaries: list[Variable] = field(default_factory=list)
    certificate: ConeCertificate | None = None


def _dimension(*ops) -> int:
    dims = {as_affine(o).shape for o in ops}
    if len(dims) != 1:
        raise InputError(f"operands have inconsistent shapes {sorted(dims)}")
    (r, c), = dims
    if r != c:
        raise InputError("operands must be square")
    return r


def _constant_value(op):
    if isinstance(op, Variable):
        return None
    if isinstance(op, Affine):
        return op.const if op.is_constant else None
    return np.asarray(op, dtype=complex)


def geomean_error_bound(x, y, t: Fraction, t_hat: Fraction) -> float:
    """Mean-value bound ``|t - t_hat| * ||X|| * max |lam^u ln lam|`` over ``u`` between them."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    ev, vec = np.linalg.eigh(0.5 * (x + x.conj().T))
    if ev[0] <= 0:
        return float("inf")
    xm = (vec / np.sqrt(ev)) @ vec.conj().T
    lam = np.linalg.eigvalsh(xm @ y @ xm)
    if lam[0] <= 0:
        return float("inf")
    ln = np.log(lam)
    slope = max(np.max(np.abs(lam ** float(u) * ln)) for u in (t, t_hat))
    return float(abs(t - t_hat) * ev[-1] * slope)


def _half_chain(s: Fraction, lo_op: Affine, hi_op: Affine, dim: int, tag: str):
    """Blocks whose feasible top node ``W`` is exactly ``W <= G_s(lo_op, hi_op)``, s dyadic."""
    if s == 0:
        return [], [], lo_op
    if s == 1:
        return [], [], hi_op
    lo, hi = Fraction(0), Fraction(1)
    e_lo, e_hi = lo_op, hi_op
    blocks, aux = [], []
    while True:
        mid = (lo + hi) / 2
        w = Variable(f"{tag}W{len(aux)}", dim)
        aux.append(w)
        blocks.append(LmiBlock(e_lo, w.expr, e_hi))
        if mid == s:
            return blocks, aux, w.expr
        if s < mid:
            hi, e_hi = mid, w.expr
        else:
            lo, e_lo = mid, w.expr


def build_geomean_graph(t, side: str, X, Y, T, tag: str = "g", bits: int = DYADIC_BITS,
                        compress=None) -> ConeGraph:
    """LMIs describing ``T <= G_t(X, Y)`` (hypograph) or ``T >= G_t(X, Y)`` (epigraph).

    Hypograph needs ``t`` in ``[0, 1]``; epigraph needs ``t`` in ``[-1, 0]`` or ``[1, 2]``.
    Non-dyadic ``t`` is replaced by the nearest ``j / 2^bits``; the certificate
    records the substitution and its value-error bound.

    For the epigraph, ``compress`` (an isometry ``V``, d x r) makes ``T`` an
    r x r operand constrained by ``T >= V^† G_t(X, Y) V``.  This is what an
    objective ``Tr[T P]`` with ``supp P`` inside ``range V`` actually sees, and
    it keeps the optimum attained when ``P`` is rank-deficient.
    """
    te = RationalExponent.of(t)
    tf = te.fraction
    if side == "hypograph":
        if not 0 <= tf <= 1:
            raise InputError(f"hypograph needs t in [0, 1], got {te}")
        if compress is not None:
            raise InputError("compression applies to the epigraph only")
    elif side == "epigraph":
        if not (-1 <= tf <= 0 or 1 <= tf <= 2):
            raise InputError(f"epigraph needs t in [-1, 0] or [1, 2], got {te}")
    else:
        raise InputError(f"unknown side {side!r}")
    dim = _dimension(X, Y)
    X, Y = (as_affine(o, (dim, dim)) for o in (X, Y))
    if compress is None:
        v = None
        T = as_affine(T, (dim, dim))
        if T.shape != (dim, dim):
            raise InputError(f"T has shape {T.shape}, expected {(dim, dim)}")
    else:
        v = np.asarray(compress, dtype=complex)
        if v.ndim != 2 or v.shape[0] != dim or v.shape[1] > dim:
            raise InputError(f"compression must be a {dim} x r isometry")
        if np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))) > 1e-10:
            raise InputError("compression is not an isometry")
        r = v.shape[1]
        T = as_affine(T, (r, r))
        if T.shape != (r, r):
            raise InputError(f"T has shape {T.shape}, expected {(r, r)}")

    def squeeze(op):
        return op if v is None else v.conj().T @ op @ v

    def side_op(op):
        return op if v is None else op @ v

    t_hat = tf if te.is_dyadic else nearest_dyadic(tf, bits)
    graph = ConeGraph()
    if side == "hypograph":
        blocks, aux, top = _half_chain(t_hat, X, Y, dim, tag)
        graph.lmis.append(top - T)
    elif t_hat >= 1:
        blocks, aux, top = _half_chain(2 - t_hat, X, Y, dim, tag)
        if t_hat == 1:
            graph.lmis.append(T - squeeze(Y))
        else:
            blocks.append(LmiBlock(top, side_op(Y), T))
    else:
        blocks, aux, top = _half_chain(1 + t_hat, Y, X, dim, tag)
        if t_hat == 0:
            graph.lmis.append(T - squeeze(X))
        else:
            blocks.append(LmiBlock(top, side_op(X), T))
    graph.blocks, graph.auxiliaries = blocks, aux

    approximated = t_hat != tf
    if not approximated:
        bound = 0.0
    else:
        xc, yc = _constant_value(X), _constant_value(Y)
        bound = None if xc is None or yc is None else geomean_error_bound(xc, yc, tf, t_hat)
    graph.certificate = ConeCertificate(te, approximated, t_hat, len(blocks), bound, side)
    return graph


def build_log_perspective_graph(X, Y, T, m: int, k: int, tag: str = "r") -> ConeGraph:
    """LMIs describing ``T <= P_{r_{m,k}}(X, Y)``.

    Auxiliaries ``Z_0..Z_k`` (square-root chain toward ``G_{2^-k}(X, Y)``) and
    ``T_1..T_m`` (one per quadrature node).
    """
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise InputError("k must be a nonnegative integer")
    rule = gauss_legendre(m)
    dim = _dimension(X, Y, T)
    X, Y, T = (as_affine(o, (dim, dim)) for o in (X, Y, T))
    Z = [Variable(f"{tag}Z{i}", dim) for i in range(k + 1)]
    Ts = [Variable(f"{tag}T{j + 1}", dim) for j in range(m)]
    graph = ConeGraph(auxiliaries=Z + Ts)
    graph.equalities.append(Z[0] - Y)
    acc = as_affine(np.zeros((dim, dim)))
    for w, tj in zip(rule.weights, Ts):
        acc = acc + float(w) * tj.expr
    graph.equalities.append(acc - T * 2.0 ** -k)
    for i in range(k):
        graph.blocks.append(LmiBlock(Z[i].expr, Z[i + 1].expr, X))
    for tn, tj in zip(rule.nodes, Ts):
        off = tj.expr * -np.sqrt(tn)
        graph.blocks.append(LmiBlock(Z[k] - X - tj, off, X - tj * float(tn)))
    graph.certificate = ConeCertificate(None, False, None, len(graph.blocks), 0.0, "hypograph")
    return graph


def scan_pairs(a: float, m_range, k_range) -> dict[tuple[int, int], float]:
    """Grid errors for every ``(m, k)`` in the given ranges."""
    return {(m, k): approximation_error(m, k, a) for m, k in itertools.product(m_range, k_range)}
