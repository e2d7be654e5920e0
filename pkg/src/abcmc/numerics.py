"""Random-stream contract and the small numerical kernel shared by every module."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erfc

__all__ = [
    "DomainError",
    "ShapeError",
    "SeedSpec",
    "WeightedDistanceSpec",
    "std_normal_quantile",
    "chi_square_sf",
    "weighted_distance",
    "order_index",
    "empirical_quantile",
    "solve_spd",
]

_MASK64 = (1 << 64) - 1


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ShapeError(ValueError):
    """Array dimensions or structure do not agree."""


@dataclass(frozen=True)
class SeedSpec:
    """A (root seed, stream id) pair naming one reproducible random stream.

    Streams are keyed, not sequential: ``derive`` hashes labels into a new
    stream id, so any task can reconstruct its own stream without knowing
    how many other tasks ran before it or on which worker.
    """

    root_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("root_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def derive(self, *labels) -> "SeedSpec":
        h = hashlib.blake2b(digest_size=8)
        h.update(str(int(self.stream_id)).encode())
        for label in labels:
            h.update(b"\x1f")
            h.update(repr(label).encode())
        return SeedSpec(int(self.root_seed), int.from_bytes(h.digest(), "little"))

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.root_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class WeightedDistanceSpec:
    kind: str = "euclidean"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "l1"):
            raise DomainError(f"unknown distance kind {self.kind!r}")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if any(not math.isfinite(x) or x < 0 for x in w) or not any(x > 0 for x in w):
                raise DomainError("weights must be finite, non-negative, and not all zero")
            object.__setattr__(self, "weights", w)

    def weight_vector(self, d: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(d)
        if len(self.weights) != d:
            raise ShapeError(f"distance has {len(self.weights)} weights, summary has {d} components")
        return np.asarray(self.weights, dtype=float)


# Acklam's rational approximation; relative error 1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _lower_half_quantile(p: np.ndarray) -> np.ndarray:
    # p in (0, 0.5]
    x = np.empty_like(p)
    tail = p < _P_LOW
    q = np.sqrt(-2.0 * np.log(p[tail]))
    x[tail] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
              ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p[~tail] - 0.5
    r = q * q
    x[~tail] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
               (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    # one Halley step against the exact CDF
    e = 0.5 * erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def std_normal_quantile(p):
    """Standard normal quantile z(p), scalar or elementwise over an array.

    Computed on the lower half and mirrored, so z(1-p) = -z(p) holds
    exactly whenever 1-p is representable.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError("normal quantile needs 0 < p < 1")
    flat = np.atleast_1d(arr).ravel()
    upper = flat > 0.5
    lower = np.where(upper, 1.0 - flat, flat)
    z = _lower_half_quantile(lower)
    z = np.where(upper, -z, z)
    z[flat == 0.5] = 0.0
    if arr.ndim == 0:
        return float(z[0])
    return z.reshape(arr.shape)


def _gamma_series(a: float, x: float) -> float:
    # lower regularized gamma P(a, x), valid for x < a + 1
    term = total = 1.0 / a
    ap = a
    for _ in range(1000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a: float, x: float) -> float:
    # upper regularized gamma Q(a, x) by modified Lentz, valid for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi_square_sf(x: float, dof: int) -> float:
    """Upper tail P(chi2_dof > x) via the regularized incomplete gamma."""
    if isinstance(dof, bool) or int(dof) != dof or dof < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {dof!r}")
    x = float(x)
    if not x >= 0.0:
        raise DomainError(f"chi-square argument must be >= 0, got {x!r}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    a, hx = 0.5 * dof, 0.5 * x
    if hx < a + 1.0:
        q = 1.0 - _gamma_series(a, hx)
    else:
        q = _gamma_cfrac(a, hx)
    return min(1.0, max(0.0, q))


def weighted_distance(a, b, spec: WeightedDistanceSpec = WeightedDistanceSpec()):
    """Weighted euclidean or L1 distance.

    ``a`` may carry leading batch axes (e.g. a whole table of summaries);
    the result then has those axes.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1:] != b.shape[-1:]:
        raise ShapeError(f"summary lengths differ: {a.shape[-1:]} vs {b.shape[-1:]}")
    w = spec.weight_vector(a.shape[-1])
    diff = a - b
    if spec.kind == "euclidean":
        # scale by the largest component so tiny or huge gaps neither underflow nor overflow
        r = np.sqrt(w) * np.abs(diff)
        m = np.max(r, axis=-1, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        out = m[..., 0] * np.sqrt(np.sum((r / safe) ** 2, axis=-1))
    else:
        out = np.sum(w * np.abs(diff), axis=-1)
    return float(out) if out.ndim == 0 else out


def order_index(q: float, n: int) -> int:
    """1-based rank k = ceil(q*n), guarded against float noise such as 0.3*10."""
    if not 0.0 < q <= 1.0:
        raise DomainError(f"quantile level must lie in (0, 1], got {q!r}")
    if n < 1:
        raise DomainError("quantile of an empty sample")
    v = q * n
    k = math.ceil(v - 1e-12 * max(1.0, v))
    return min(max(k, 1), n)


def empirical_quantile(xs: Sequence[float], q: float) -> float:
    """The ceil(q*n)-th order statistic of ``xs``."""
    arr = np.asarray(xs, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("quantile of an empty sample")
    k = order_index(q, arr.size)
    return float(np.partition(arr, k - 1)[k - 1])


def solve_spd(M, v) -> tuple[np.ndarray, bool]:
    """Solve ``M x = v`` for symmetric positive semi-definite ``M``.

    Returns ``(x, regularized)``. Near-singular systems get a small ridge
    proportional to the mean eigenvalue instead of failing.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = M.shape[0]
    if M.shape != (d, d) or v.shape != (d,):
        raise ShapeError(f"incompatible shapes {M.shape} and {v.shape}")
    scale = float(np.max(np.abs(M))) if M.size else 0.0
    if np.max(np.abs(M - M.T)) > 1e-9 * max(scale, 1e-300):
        raise ShapeError("matrix is not symmetric")
    mean_eig = float(np.trace(M)) / d
    if mean_eig <= 0.0:
        mean_eig = 1.0
    regularized = bool(np.linalg.eigvalsh(M)[0] < 1e-12 * mean_eig)
    if regularized:
        M = M + 1e-10 * mean_eig * np.eye(d)
    return np.linalg.solve(M, v), regularized
