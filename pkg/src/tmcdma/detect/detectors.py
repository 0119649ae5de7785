"""Conventional, decorrelating, exhaustive ML and neighbor-descent detectors.

All detectors work on one matched-filter output vector ``y`` of length K
and share the synchronous log-likelihood metric::

    Omega(b) = 2 b^T A y - b^T (A R A) b

Conventions, fixed for reproducibility:

* ``sign(0) = +1``.
* ML ties go to the lexicographically smallest candidate, with -1 < +1.
* ND accepts the best strictly improving flip, lowest index on ties.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import ComplexityGuard, ContractError, SingularCorrelation

DETECTOR_IDS = ("conv", "zf", "ml", "nd", "tm")

DEFAULT_K_MAX = 20
DEFAULT_COND_MAX = 1e10

# enumeration chunk: 2^15 candidates x K float64 stays below ~5 MB for K=20
_CHUNK_BITS = 15


@dataclass(frozen=True)
class DetectorOutcome:
    b_hat: np.ndarray
    detector_id: str
    metric_evals: int = 0
    flips: int = 0
    ambiguous_count: int = 0
    converged: bool = True
    metric_trace: tuple = field(default=(), repr=False)


def hard_sign(x):
    """Elementwise sign with ``sign(0) = +1``, as int8."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def _amps(A, K):
    if A is None:
        return np.ones(K)
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        return np.full(K, float(A))
    if A.shape != (K,):
        raise ContractError(f"amplitude vector of shape {A.shape} for K={K}")
    return A


def _check(y, R):
    y = np.asarray(y, dtype=float)
    R = np.asarray(R, dtype=float)
    if y.ndim != 1 or R.shape != (y.size, y.size):
        raise ContractError(
            f"observation of shape {y.shape} does not match correlation {R.shape}")
    return y, R


def ml_metric(b, y, R, A=None):
    """Synchronous log-likelihood ``2 b^T A y - b^T A R A b`` of one candidate."""
    y, R = _check(y, R)
    b = np.asarray(b, dtype=float)
    if b.shape != y.shape:
        raise ContractError("bit vector and observation lengths differ")
    a = _amps(A, y.size)
    ab = a * b
    return float(2.0 * ab @ y - ab @ R @ ab)


def metric_batch(B, v, M):
    """Metric of every row of ``B`` given ``v = A y`` and ``M = A R A``.

    This is the single scoring routine behind the ML, ND and TM searches,
    so equal candidate tables always produce bit-identical scores.
    """
    return 2.0 * (B @ v) - np.einsum("ij,ij->i", B @ M, B)


@lru_cache(maxsize=64)
def _chunk(K, start, stop):
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(K - 1, -1, -1, dtype=np.int64)
    B = (((idx[:, None] >> shifts) & 1) * 2 - 1).astype(float)
    B.setflags(write=False)
    return B


def candidate_chunks(K):
    """Yield all 2^K sign patterns in lexicographic order, in chunks.

    The first coordinate is the most significant bit, with bit 0 read as -1.
    """
    total = 1 << K
    step = 1 << _CHUNK_BITS
    for start in range(0, total, step):
        yield _chunk(K, start, min(total, start + step))


def exhaustive_argmax(v, M):
    """Return (best pattern, number of evaluations) of ``metric_batch``."""
    K = v.size
    best_val = -np.inf
    best = None
    evals = 0
    for B in candidate_chunks(K):
        s = metric_batch(B, v, M)
        evals += B.shape[0]
        i = int(np.argmax(s))
        # strict '>' keeps the earliest, i.e. lexicographically smallest
        if s[i] > best_val:
            best_val = s[i]
            best = B[i]
    return best.astype(np.int8), evals


def detect_conventional(y):
    """Single-user matched filter decision ``sign(y)``."""
    return DetectorOutcome(hard_sign(y), "conv")


def detect_decorrelator(y, R, cond_max=DEFAULT_COND_MAX):
    """Zero-forcing decision ``sign(R^-1 y)``.

    Raises
    ------
    SingularCorrelation
        If the condition number of ``R`` exceeds ``cond_max``.
    """
    y, R = _check(y, R)
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularCorrelation(cond)
    return DetectorOutcome(hard_sign(np.linalg.solve(R, y)), "zf")


def detect_ml(y, R, A=None, k_max=DEFAULT_K_MAX):
    """Exhaustive maximum-likelihood search over all 2^K candidates."""
    y, R = _check(y, R)
    K = y.size
    if K > k_max:
        raise ComplexityGuard(K, k_max)
    a = _amps(A, K)
    b, evals = exhaustive_argmax(a * y, R * np.outer(a, a))
    return DetectorOutcome(b, "ml", metric_evals=evals)


def descend(b0, v, M, max_iters, free=None):
    """Steepest-ascent single-bit-flip search on the metric.

    Parameters
    ----------
    b0 : ndarray
        Starting pattern (+/-1).
    v, M : ndarray
        ``A y`` and ``A R A``.
    max_iters : int
        Maximum number of accepted flips.
    free : array_like of int, optional
        Coordinates allowed to flip (all by default).

    Returns
    -------
    b, evals, flips, converged, trace
    """
    b = np.asarray(b0, dtype=float).copy()
    free = np.arange(b.size) if free is None else np.asarray(free, dtype=int)
    current = metric_batch(b[None, :], v, M)[0]
    evals = 1
    flips = 0
    trace = [float(current)]
    converged = False
    while True:
        if free.size == 0:
            converged = True
            break
        nbrs = np.repeat(b[None, :], free.size, axis=0)
        nbrs[np.arange(free.size), free] *= -1
        s = metric_batch(nbrs, v, M)
        evals += free.size
        i = int(np.argmax(s))
        if not s[i] > current:
            converged = True
            break
        if flips >= max_iters:
            break
        b = nbrs[i]
        current = s[i]
        flips += 1
        trace.append(float(current))
    return b.astype(np.int8), evals, flips, converged, tuple(trace)


def detect_nd(y, R, A=None, max_iters=100):
    """Neighbor descent started from the conventional decision.

    Each iteration evaluates all K single-bit flips and accepts the best
    strictly improving one. The search stops at a local maximum or once
    ``max_iters`` flips were accepted; ``metric_evals`` is then
    ``K * (flips + 1) + 1``.
    """
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    y, R = _check(y, R)
    a = _amps(A, y.size)
    b, evals, flips, converged, trace = descend(
        hard_sign(y), a * y, R * np.outer(a, a), max_iters)
    return DetectorOutcome(b, "nd", metric_evals=evals, flips=flips,
                           converged=converged, metric_trace=trace)
