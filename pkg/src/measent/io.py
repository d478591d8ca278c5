"""Problem files and reports.

Both are JSON.  Complex matrices are row-major nested lists of ``[re, im]``
pairs; every float is written with 17 significant digits so a round trip is
bit-exact.  Non-finite floats are written as ``null`` with a separate flag.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import linalg as la
from .errors import InputError

REPORT_FORMAT = "measent-report/1"
KINDS = ("states", "channel")
TASKS = ("renyi", "relent", "oracle")


# ------------------------------------------------------------------- encoding


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    return text if any(ch in text for ch in ".en") else text + ".0"


def dumps(obj, indent: int = 0) -> str:
    """JSON text with 17-digit floats; dicts one key per line, lists inline."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {dumps(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v, indent) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def encode_float(x) -> float | None:
    return None if x is None or not math.isfinite(float(x)) else float(x)


def digest(content: dict) -> str:
    """sha256 over the canonical text of ``content`` (sorted keys, 17-digit floats)."""
    return hashlib.sha256(dumps(_sorted(content)).encode()).hexdigest()


def _sorted(obj):
    if isinstance(obj, dict):
        return {k: _sorted(obj[k]) for k in sorted(obj)}
    if isinstance(obj, list):
        return [_sorted(v) for v in obj]
    return obj


# ------------------------------------------------------------------- decoding


def decode_matrix(data, where: str) -> np.ndarray:
    """Matrix from nested ``[re, im]`` pairs; ``where`` names the field in errors."""
    if not isinstance(data, list) or not data:
        raise InputError(f"{where}: expected a non-empty list of rows")
    rows = []
    width = None
    for i, row in enumerate(data):
        if not isinstance(row, list):
            raise InputError(f"{where}[{i}]: expected a row of [re, im] pairs")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputError(f"{where}[{i}]: row has {len(row)} entries, expected {width}")
        out = []
        for j, z in enumerate(row):
            if (not isinstance(z, list) or len(z) != 2
                    or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in z)):
                raise InputError(f"{where}[{i}][{j}]: expected a [re, im] pair of numbers")
            out.append(complex(z[0], z[1]))
        rows.append(out)
    return np.array(rows, dtype=complex)


def _number(data: dict, key: str, where: str, kind=float, default=None):
    if key not in data or data[key] is None:
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputError(f"{where}.{key}: expected a number")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise InputError(f"{where}.{key}: expected an integer")
        return int(v)
    return float(v)


def parse_alpha(text) -> Fraction:
    from .states import RenyiOrder
    return RenyiOrder.parse(text).alpha


@dataclass
class Problem:
    kind: str
    task: str | None = None
    alpha: Fraction | None = None
    rho: np.ndarray | None = None
    sigma: np.ndarray | None = None
    gammaN: np.ndarray | None = None
    gammaM: np.ndarray | None = None
    d_A: int | None = None
    d_B: int | None = None
    H: np.ndarray | None = None
    E: float | None = None
    eps: float | None = None
    m: int | None = None
    k: int | None = None
    gap_tol: float | None = None
    feas_tol: float | None = None
    seed: int = 0
    regularize: float = 0.0
    budget: int = 500
    source: str = ""
    extra: dict = field(default_factory=dict)

    def content(self) -> dict:
        """Canonical description of the instance; the digest is taken over this."""
        out = {"kind": self.kind, "task": self.task, "alpha": None if self.alpha is None else _frac(self.alpha)}
        if self.kind == "states":
            out["rho"] = encode_matrix(self.rho)
            out["sigma"] = encode_matrix(self.sigma)
        else:
            out["d_A"], out["d_B"] = self.d_A, self.d_B
            out["N"] = {"choi": encode_matrix(self.gammaN)}
            out["M"] = {"choi": encode_matrix(self.gammaM)}
            if self.H is not None:
                out["energy"] = {"H": encode_matrix(self.H), "E": self.E}
        acc = {}
        if self.eps is not None:
            acc["eps"] = self.eps
        if self.m is not None:
            acc["m"], acc["k"] = self.m, self.k
        out["accuracy"] = acc
        out["tolerances"] = {"gap": self.gap_tol, "feas": self.feas_tol}
        out["seed"] = self.seed
        out["regularize"] = self.regularize
        out["budget"] = self.budget
        return out


def _frac(a: Fraction) -> str:
    return f"{a.numerator}/{a.denominator}"


def _channel_operator(data, where: str, d_a, d_b):
    if not isinstance(data, dict):
        raise InputError(f"{where}: expected an object with 'choi' or 'kraus'")
    if "choi" in data:
        return decode_matrix(data["choi"], f"{where}.choi"), d_a, d_b
    if "kraus" in data:
        ks = data["kraus"]
        if not isinstance(ks, list) or not ks:
            raise InputError(f"{where}.kraus: expected a non-empty list of matrices")
        mats = [decode_matrix(k, f"{where}.kraus[{i}]") for i, k in enumerate(ks)]
        shape = mats[0].shape
        if any(m.shape != shape for m in mats):
            raise InputError(f"{where}.kraus: Kraus operators differ in shape")
        kb, ka = shape
        if d_a is not None and d_a != ka or d_b is not None and d_b != kb:
            raise InputError(f"{where}.kraus: shape {shape} disagrees with d_A={d_a}, d_B={d_b}")
        return la.choi_from_kraus(mats), ka, kb
    raise InputError(f"{where}: expected 'choi' or 'kraus'")


def parse_problem(data: dict, source: str = "") -> Problem:
    """Validate a decoded problem object and convert it into a :class:`Problem`."""
    if not isinstance(data, dict):
        raise InputError(f"{source}: top level must be an object")
    kind = data.get("kind")
    if kind not in KINDS:
        raise InputError(f"{source}: field 'kind' must be one of {KINDS}, got {kind!r}")
    task = data.get("task")
    if task is not None and task not in TASKS:
        raise InputError(f"{source}: field 'task' must be one of {TASKS}, got {task!r}")
    p = Problem(kind=kind, task=task, source=source)
    if data.get("alpha") is not None:
        try:
            p.alpha = parse_alpha(data["alpha"])
        except InputError as exc:
            raise InputError(f"{source}: field 'alpha': {exc}") from None
    if kind == "states":
        for key in ("rho", "sigma"):
            if key not in data:
                raise InputError(f"{source}: missing field '{key}'")
        p.rho = decode_matrix(data["rho"], "rho")
        p.sigma = decode_matrix(data["sigma"], "sigma")
    else:
        d_a = _number(data, "d_A", "problem", int)
        d_b = _number(data, "d_B", "problem", int)
        for key in ("N", "M"):
            if key not in data:
                raise InputError(f"{source}: missing field '{key}'")
        gn, d_a, d_b = _channel_operator(data["N"], "N", d_a, d_b)
        gm, d_a2, d_b2 = _channel_operator(data["M"], "M", d_a, d_b)
        if d_a is None or d_b is None or (d_a2, d_b2) != (d_a, d_b):
            raise InputError(f"{source}: channel dimensions d_A, d_B missing or inconsistent")
        p.gammaN, p.gammaM, p.d_A, p.d_B = gn, gm, d_a, d_b
        if data.get("energy") is not None:
            en = data["energy"]
            if not isinstance(en, dict) or "H" not in en or "E" not in en:
                raise InputError(f"{source}: field 'energy' needs 'H' and 'E'")
            p.H = decode_matrix(en["H"], "energy.H")
            p.E = _number(en, "E", "energy")
    acc = data.get("accuracy") or {}
    if not isinstance(acc, dict):
        raise InputError(f"{source}: field 'accuracy' must be an object")
    p.eps = _number(acc, "eps", "accuracy")
    p.m = _number(acc, "m", "accuracy", int)
    p.k = _number(acc, "k", "accuracy", int)
    if (p.m is None) != (p.k is None):
        raise InputError(f"{source}: accuracy needs both 'm' and 'k'")
    tol = data.get("tolerances") or {}
    if not isinstance(tol, dict):
        raise InputError(f"{source}: field 'tolerances' must be an object")
    p.gap_tol = _number(tol, "gap", "tolerances")
    p.feas_tol = _number(tol, "feas", "tolerances")
    p.seed = _number(data, "seed", "problem", int, 0)
    p.regularize = _number(data, "regularize", "problem", float, 0.0)
    p.budget = _number(data, "budget", "problem", int, 500)
    return p


def load_json(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_problem(path: Path) -> Problem:
    return parse_problem(load_json(path), str(path))


def write_report(report: dict, path: Path | None) -> str:
    text = dumps(report) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
