"""Translation-invariant Minkowski norms on R^2 and R^3.

Three families are supported: the Euclidean norm, quadratic norms
``sqrt(v^T M v)`` and Randers norms ``sqrt(v^T M v) + <b, v>``.  All
evaluators accept a single vector or a stack of vectors along the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ADMISSIBILITY_MARGIN = 1e-9


class NormError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Norm:
    kind: str
    dim: int
    M: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    _Minv: Optional[np.ndarray] = field(default=None, repr=False)

    def __eq__(self, other):
        if not isinstance(other, Norm):
            return NotImplemented
        if self.kind != other.kind or self.dim != other.dim:
            return False
        same = lambda a, b: (a is None and b is None) or (
            a is not None and b is not None and np.array_equal(a, b))
        return same(self.M, other.M) and same(self.b, other.b)

    __hash__ = None

    @property
    def is_symmetric(self) -> bool:
        return self.kind != "randers"

    def __call__(self, v):
        return evaluate(self, v)

    def to_json(self) -> dict:
        if self.kind == "euclidean":
            return {"kind": "euclidean", "dim": self.dim}
        out = {"kind": self.kind, "M": self.M.tolist()}
        if self.kind == "randers":
            out["b"] = self.b.tolist()
        return out


def euclidean(dim: int = 2) -> Norm:
    if dim not in (2, 3):
        raise NormError(f"dimension must be 2 or 3, got {dim}")
    return Norm("euclidean", dim)


def _spd(M) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] not in (2, 3):
        raise NormError(f"M must be a 2x2 or 3x3 matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-14 * max(1.0, np.abs(M).max())):
        raise NormError("M must be symmetric")
    M = 0.5 * (M + M.T)
    if np.linalg.eigvalsh(M).min() <= 0:
        raise NormError("M must be positive definite")
    M.setflags(write=False)
    return M


def quadratic(M) -> Norm:
    M = _spd(M)
    return Norm("quadratic", M.shape[0], M=M)


def randers(M, b) -> Norm:
    M = _spd(M)
    b = np.array(b, dtype=float)
    if b.shape != (M.shape[0],):
        raise NormError(f"b must have shape ({M.shape[0]},), got {b.shape}")
    Minv = np.linalg.inv(M)
    dual = float(np.sqrt(b @ Minv @ b))
    if dual >= 1.0 - ADMISSIBILITY_MARGIN:
        raise NormError(f"Randers drift too strong: dual norm of b is {dual:.12g} >= 1")
    b.setflags(write=False)
    return Norm("randers", M.shape[0], M=M, b=b, _Minv=Minv)


def from_json(obj: dict, dim: int = 2) -> Norm:
    kind = obj.get("kind")
    if kind == "euclidean":
        return euclidean(int(obj.get("dim", dim)))
    if kind == "quadratic":
        return quadratic(obj["M"])
    if kind == "randers":
        return randers(obj["M"], obj["b"])
    raise NormError(f"unknown norm kind {kind!r}")


def _quad_form(norm: Norm, v: np.ndarray) -> np.ndarray:
    if norm.M is None:
        return np.einsum("...i,...i->...", v, v)
    return np.einsum("...i,ij,...j->...", v, norm.M, v)


def evaluate(norm: Norm, v) -> np.ndarray | float:
    """F(v); zero vectors map to 0."""
    v = np.asarray(v, dtype=float)
    if norm.kind == "euclidean":
        out = np.sqrt(np.einsum("...i,...i->...", v, v))
    else:
        out = np.sqrt(np.maximum(_quad_form(norm, v), 0.0))
        if norm.kind == "randers":
            out = out + v @ norm.b
    return out if out.ndim else float(out)


def _check_nonzero(v: np.ndarray):
    if np.any(np.all(v == 0, axis=-1)):
        raise NormError("zero vector has no differential")


def differential(norm: Norm, v) -> np.ndarray:
    """dF at v as a covector (0-homogeneous in v)."""
    v = np.asarray(v, dtype=float)
    _check_nonzero(v)
    if norm.kind == "euclidean":
        return v / np.linalg.norm(v, axis=-1, keepdims=True)
    Mv = v @ norm.M
    alpha = np.sqrt(_quad_form(norm, v))[..., None]
    out = Mv / alpha
    if norm.kind == "randers":
        out = out + norm.b
    return out


def hessian(norm: Norm, v) -> np.ndarray:
    """Hessian of F at a single nonzero v (closed form)."""
    v = np.asarray(v, dtype=float)
    _check_nonzero(v)
    M = np.eye(norm.dim) if norm.M is None else norm.M
    alpha = float(np.sqrt(v @ M @ v))
    Mv = M @ v
    return (M - np.outer(Mv, Mv) / alpha**2) / alpha


def fundamental_tensor(norm: Norm, y) -> np.ndarray:
    """Matrix of g_y = Hessian of F^2/2 at y."""
    y = np.asarray(y, dtype=float)
    if norm.kind == "quadratic":
        _check_nonzero(y)
        return np.array(norm.M)
    if norm.kind == "euclidean":
        _check_nonzero(y)
        return np.eye(norm.dim)
    dF = differential(norm, y)
    return np.outer(dF, dF) + evaluate(norm, y) * hessian(norm, y)


def fundamental_form(norm: Norm, y, u, v) -> float:
    return float(np.asarray(u, float) @ fundamental_tensor(norm, y) @ np.asarray(v, float))


def fundamental_form_fd(norm: Norm, y, u, v, step: float = 1e-4) -> float:
    """g_y(u, v) from second central differences of F^2/2, Richardson-extrapolated.

    Used as the reference oracle for the closed form.
    """
    y, u, v = (np.asarray(a, dtype=float) for a in (y, u, v))
    if not np.any(y):
        raise NormError("zero vector has no fundamental form")
    E = lambda w: 0.5 * evaluate(norm, w) ** 2

    def mixed(s):
        return (E(y + s * u + s * v) - E(y + s * u - s * v)
                - E(y - s * u + s * v) + E(y - s * u - s * v)) / (4 * s * s)

    return (4 * mixed(step / 2) - mixed(step)) / 3


def differential_fd(norm: Norm, v, step: float = 1e-6) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    I = np.eye(len(v))
    return np.array([(evaluate(norm, v + step * e) - evaluate(norm, v - step * e)) / (2 * step)
                     for e in I])


def dist(norm: Norm, p, q):
    """Distance from p to q, i.e. F(q - p)."""
    return evaluate(norm, np.asarray(q, float) - np.asarray(p, float))


def dist_max(norm: Norm, p, q):
    w = np.asarray(q, float) - np.asarray(p, float)
    if norm.is_symmetric:
        return evaluate(norm, w)
    return np.maximum(evaluate(norm, w), evaluate(norm, -w))


def reversibility(norm: Norm) -> float:
    """Sup of F(-v)/F(v); 1 for symmetric norms."""
    if norm.is_symmetric:
        return 1.0
    bn = float(np.sqrt(norm.b @ norm._Minv @ norm.b))
    return (1 + bn) / (1 - bn)


def lower_constant(norm: Norm) -> float:
    """c > 0 with F(v) >= c |v| for all v."""
    if norm.kind == "euclidean":
        return 1.0
    lam = float(np.sqrt(np.linalg.eigvalsh(norm.M).min()))
    if norm.kind == "quadratic":
        return lam
    bn = float(np.sqrt(norm.b @ norm._Minv @ norm.b))
    return lam * (1 - bn)
