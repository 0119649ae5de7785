"""Transformation-matrix (TM) detector.

Most conventional decisions are already correct, so the TM detector only
spends likelihood evaluations on the coordinates that are likely wrong:

1. coarse decision ``b = sign(y)``;
2. ambiguous set ``S = {k : |y_k| <= tau * sigma * sqrt(R_kk)}``;
3. with the other coordinates held at their coarse values the problem
   restricted to S is ``max 2 b_S^T z - b_S^T M_SS b_S`` with
   ``z = (A y)_S - M_SF b_F``. It is solved exhaustively when
   ``|S| <= s_max`` and by neighbor descent over S otherwise;
4. the restricted problem is expressed in the local frame of ``M_SS``
   (its eigenvectors), where the candidate constellation is ``X = T b_S``
   and the observation is ``u = T z``. Resolved patterns are stored per
   quantization cell of ``u``. A cell is stored only when the winning
   pattern provably wins for every ``u`` in the cell, so a cache hit never
   changes the decision.

This threshold-and-refine reading of the algorithm is an interpretation:
the published description is qualitative.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .basis import apply_transformation, build_change_of_basis
from .detectors import (DetectorOutcome, _amps, _check, candidate_chunks,
                        descend, exhaustive_argmax, hard_sign, metric_batch)

# candidate-table size above which no certificate is computed
_CERT_MAX_BITS = 12


@dataclass(frozen=True)
class TmParams:
    tau: float = 1.0
    s_max: int = 10
    cache_enabled: bool = True
    quant_step: float = 0.25
    nd_max_iters: int = 100

    def __post_init__(self):
        if not self.tau >= 0:
            raise ConfigurationError(f"tau must be >= 0, got {self.tau}")
        if self.s_max < 0:
            raise ConfigurationError(f"s_max must be >= 0, got {self.s_max}")
        if not self.quant_step > 0:
            raise ConfigurationError("quant_step must be > 0")


class TmCache:
    """Table of resolved sign patterns keyed by quantized local coordinates.

    Safe to share between threads; entries are a pure function of the
    problem data, so sharing never changes any decision.
    """

    def __init__(self):
        self._table = {}
        self._frames = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._table)

    def get(self, key):
        with self._lock:
            hit = self._table.get(key)
            if hit is None:
                self.misses += 1
            else:
                self.hits += 1
            return hit

    def put(self, key, pattern):
        with self._lock:
            self._table.setdefault(key, pattern)

    def frame(self, key, build):
        with self._lock:
            fr = self._frames.get(key)
        if fr is None:
            fr = build()
            with self._lock:
                fr = self._frames.setdefault(key, fr)
        return fr


def local_frame(M_SS):
    """Eigen-frame of the restricted correlation: (T, eigenvalues)."""
    lam, V = np.linalg.eigh(M_SS)
    # normalize again so the unit-norm check is not at the mercy of LAPACK
    V = V / np.linalg.norm(V, axis=0)
    return build_change_of_basis(V.T), lam


def _certified(p, B, Q, T, cell, h):
    """True if pattern ``p`` beats every other row of ``B`` on the whole cell.

    For a candidate ``q`` the score gap against ``p`` is the affine function
    ``2 (p - q)^T z - (Q_p - Q_q)`` and ``z = T^T u``; its minimum over the
    box ``cell * h <= u <= (cell + 1) * h`` has a closed form.
    """
    Qp = Q[p]
    D = B[p][None, :] - B
    W = 2.0 * apply_transformation(T, D)
    centre = (cell + 0.5) * h
    lower = W @ centre - np.abs(W).sum(axis=1) * (h / 2) - (Qp - Q)
    others = np.ones(B.shape[0], dtype=bool)
    others[p] = False
    tol = 1e-9 * (1.0 + np.abs(Q).max() + np.abs(W).sum(axis=1).max() * np.abs(centre).max())
    return bool(np.all(lower[others] > tol))


def detect_tm(y, R, A=None, params=TmParams(), noise_sigma=1.0, cache=None):
    """Transformation-matrix detector.

    Parameters
    ----------
    y : ndarray
        Matched filter output of one epoch.
    R : ndarray
        Code correlation matrix.
    A : ndarray or float, optional
        User amplitudes (1 by default).
    params : TmParams
        Ambiguity threshold ``tau`` (in units of the per-coordinate noise
        scale ``noise_sigma * sqrt(R_kk)``), subset size limit ``s_max`` and
        cache switch. ``tau = inf`` marks every coordinate ambiguous.
    noise_sigma : float
        Chip noise standard deviation used to scale the threshold.
    cache : TmCache, optional
        Pattern table reused across calls when ``params.cache_enabled``.

    Returns
    -------
    DetectorOutcome
        ``metric_evals`` counts refinement evaluations only.
    """
    y, R = _check(y, R)
    K = y.size
    a = _amps(A, K)
    b = hard_sign(y)
    if math.isinf(params.tau):
        S = np.arange(K)
    else:
        scale = noise_sigma * np.sqrt(np.diag(R))
        S = np.flatnonzero(np.abs(y) <= params.tau * scale)
    n_s = S.size
    if n_s == 0:
        return DetectorOutcome(b, "tm")

    v = a * y
    M = R * np.outer(a, a)
    if n_s == K:
        z, M_SS = v, M
    else:
        F = np.setdiff1d(np.arange(K), S, assume_unique=True)
        z = v[S] - M[np.ix_(S, F)] @ b[F]
        M_SS = M[np.ix_(S, S)]

    if n_s > params.s_max:
        sub, evals, _, _, _ = descend(b[S], z, M_SS, params.nd_max_iters)
        out = b.copy()
        out[S] = sub
        return DetectorOutcome(out, "tm", metric_evals=evals, ambiguous_count=n_s)

    h = params.quant_step * noise_sigma * float(np.sqrt(np.diag(R)[S].min()))
    use_cache = (params.cache_enabled and cache is not None
                 and n_s <= _CERT_MAX_BITS and np.isfinite(h) and h > 0)
    if use_cache:
        fingerprint = M_SS.tobytes()
        T, _ = cache.frame(fingerprint, lambda: local_frame(M_SS))
        u = apply_transformation(T, z)
        cell = np.floor(u / h)
        key = (fingerprint, tuple(S.tolist()), tuple(b[S].tolist()),
               tuple(cell.astype(np.int64).tolist()))
        hit = cache.get(key)
        if hit is not None:
            out = b.copy()
            out[S] = hit
            return DetectorOutcome(out, "tm", ambiguous_count=n_s)

    sub, evals = exhaustive_argmax(z, M_SS)
    if use_cache:
        B = np.concatenate(list(candidate_chunks(n_s)))
        Q = metric_batch(B, np.zeros(n_s), M_SS) * -1.0
        p = int(((sub.astype(np.int64) + 1) // 2) @ (1 << np.arange(n_s - 1, -1, -1)))
        if _certified(p, B, Q, T, cell, h):
            cache.put(key, sub)
    out = b.copy()
    out[S] = sub
    return DetectorOutcome(out, "tm", metric_evals=evals, ambiguous_count=n_s)
