"""Complexity-driven SNR model.

The model ties the aggregate operation count of a detector (``aleph``) to
an SNR figure::

    aleph = sum_i aleph_i                       (per-user parts)
    gamma = aleph - C K                         (linear)
    gamma_dB = 10 phi2 log10(aleph - C K)       (phi2: MAI variance)

Per-algorithm complexity profiles: ML ``2^K``, TM ``(5/4)^K`` and ND
``a K^p I(K)`` where ``I(K)`` is the mean number of descent iterations.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import ConfigurationError, ContractError, DomainError

LOAD_CLASS_RANGES = {"light": (0.6, 0.9), "heavy": (0.1, 1.0)}
PROFILE_IDS = ("ml", "nd", "tm")

# log-space evaluation above this K
_LOG_SPACE_K = 500
_LOG10_MAX = math.log10(np.finfo(float).max)


@dataclass(frozen=True)
class ComplexityProfile:
    """Operation-count model ``K -> aleph`` for one algorithm.

    ``params`` is only read by the ND profile: ``a`` (scale), ``p``
    (polynomial degree) and ``iters`` (mean descent iterations, either a
    number or a mapping from K to a number).
    """
    algorithm_id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm_id not in PROFILE_IDS:
            raise ConfigurationError(f"unknown profile {self.algorithm_id!r}")
        if self.algorithm_id == "nd":
            merged = {"a": 1.0, "p": 2.0, "iters": 1.0}
            merged.update(self.params)
            object.__setattr__(self, "params", merged)

    def nd_iters(self, K):
        it = self.params["iters"]
        if isinstance(it, dict):
            return float(it[K])
        return float(it)

    def describe(self):
        """JSON-friendly record of the profile constants."""
        if self.algorithm_id == "ml":
            return {"profile": "ml", "formula": "2^K"}
        if self.algorithm_id == "tm":
            return {"profile": "tm", "formula": "(5/4)^K"}
        p = dict(self.params)
        if isinstance(p["iters"], dict):
            p["iters"] = {str(k): v for k, v in sorted(p["iters"].items())}
        return {"profile": "nd", "formula": "a*K^p*iters", **p}


def _check_k(K):
    if int(K) != K or K < 1:
        raise DomainError(f"K must be an integer >= 1, got {K}")


def profile_log10(profile, K):
    """``log10(aleph(K))``, finite for any K."""
    _check_k(K)
    if profile.algorithm_id == "ml":
        return K * math.log10(2.0)
    if profile.algorithm_id == "tm":
        return K * math.log10(1.25)
    a, p = profile.params["a"], profile.params["p"]
    it = profile.nd_iters(K)
    if a <= 0 or it <= 0:
        raise DomainError(f"ND profile needs a > 0 and iters > 0 at K={K}")
    return math.log10(a) + p * math.log10(K) + math.log10(it)


def profile_eval(profile, K):
    """Evaluate ``aleph(K)`` for a profile.

    Raises
    ------
    DomainError
        If the value does not fit in a double.
    """
    _check_k(K)
    if profile_log10(profile, K) >= _LOG10_MAX:
        raise DomainError(f"aleph overflows double precision at K={K}")
    if profile.algorithm_id == "ml":
        return float(2 ** K)
    if profile.algorithm_id == "tm":
        return 1.25 ** K
    a, p = profile.params["a"], profile.params["p"]
    return a * K ** p * profile.nd_iters(K)


def search_bound(K):
    """Upper bound ``5^K - 4^K`` on the number of searched patterns (exact int)."""
    _check_k(K)
    return 5 ** K - 4 ** K


def collective_complexity(parts):
    """Total complexity over users; raises DomainError on a negative part."""
    total = 0.0
    for i, x in enumerate(parts):
        if x < 0:
            raise DomainError(f"complexity part {i} is negative ({x})")
        total += x
    return total


def snr_linear(aleph, C, K):
    """``gamma = aleph - C K``; may be negative."""
    return aleph - C * K


def _log_margin(aleph, C, K, log10_aleph=None):
    """log10(aleph - C K), or None when the argument is not positive."""
    if log10_aleph is not None and K > _LOG_SPACE_K:
        frac = C * K * 10.0 ** (-log10_aleph)
        if frac >= 1:
            return None
        return log10_aleph + math.log1p(-frac) / math.log(10)
    g = aleph - C * K
    if not g > 0:
        return None
    return math.log10(g)


def snr_db(aleph, C, K, phi2):
    """SNR in dB: ``10 phi2 log10(aleph - C K)``.

    Raises
    ------
    DomainError
        If ``aleph - C K <= 0``.
    """
    lg = _log_margin(aleph, C, K)
    if lg is None:
        raise DomainError("SNR undefined: complexity budget below C*K "
                          f"(aleph={aleph!r}, C={C!r}, K={K})")
    return 10.0 * phi2 * lg


@dataclass(frozen=True)
class IdentityResiduals:
    """Relative residuals of the identities implied by ``gamma = aleph - C K``.

    Each residual is ``|lhs - rhs|`` divided by the largest magnitude of
    the terms that enter the identity.
    """
    users_per_op: float       # K/aleph = 1/C - gamma/(C aleph)
    ops_per_user: float       # aleph/K = C + gamma/K
    normalization: float      # aleph/K - gamma/K = C
    efficiency: float         # gamma/aleph = 1 - C K/aleph
    users_per_op_factored: float  # K/aleph = (1 - gamma/aleph)/C

    def max(self):
        return max(self.users_per_op, self.ops_per_user, self.normalization,
                   self.efficiency, self.users_per_op_factored)


def _rel(lhs, rhs, *terms):
    scale = max(abs(t) for t in (lhs, rhs) + terms)
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


def identity_residuals(aleph, C, K):
    g = snr_linear(aleph, C, K)
    inv_c = 1.0 / C
    # K/aleph = C^-1 - C^-1 gamma/aleph
    r12 = _rel(K / aleph, inv_c - inv_c * (g / aleph), inv_c, inv_c * g / aleph)
    # aleph/K = C + gamma/K
    r13 = _rel(aleph / K, C + g / K, C, g / K)
    # aleph/K - gamma/K = C
    r14 = _rel(aleph / K - g / K, C, aleph / K, g / K)
    # gamma/aleph = 1 - C K/aleph
    r15 = _rel(g / aleph, 1.0 - C * (K / aleph), 1.0, C * K / aleph)
    # K/aleph = C^-1 (1 - gamma/aleph)
    r16 = _rel(K / aleph, inv_c * (1.0 - g / aleph), inv_c, inv_c * g / aleph)
    return IdentityResiduals(r12, r13, r14, r15, r16)


def sample_variance(load_class, rng):
    """Draw phi2 uniformly from the variance range of a load class."""
    try:
        lo, hi = LOAD_CLASS_RANGES[load_class]
    except KeyError:
        raise ConfigurationError(f"unknown load class {load_class!r}") from None
    return float(rng.uniform(lo, hi))


def calibrate_variance(target_db, aleph, C, K):
    """phi2 that makes ``snr_db(aleph, C, K, phi2) == target_db``."""
    lg = _log_margin(aleph, C, K)
    if lg is None:
        raise DomainError("cannot calibrate: aleph - C*K <= 0 "
                          f"(aleph={aleph!r}, C={C!r}, K={K})")
    if target_db == 0:
        return 0.0
    if lg == 0:
        raise DomainError("cannot calibrate: aleph - C*K == 1 gives 0 dB "
                          "for every phi2")
    phi2 = target_db / (10.0 * lg)
    if phi2 < 0:
        raise DomainError(f"target {target_db} dB needs a negative variance "
                          f"at K={K}")
    return phi2


@dataclass(frozen=True)
class SnrCurvePoint:
    K: int
    algorithm_id: str
    aleph: float
    phi2: float
    gamma_linear: float
    gamma_db: float = None  # None: aleph - C K <= 0

    @property
    def defined(self):
        return self.gamma_db is not None


# phi2 policies -------------------------------------------------------------

@dataclass(frozen=True)
class FixedPhi2:
    value: float

    def __post_init__(self):
        if not self.value >= 0:
            raise ConfigurationError("phi2 must be >= 0")

    def phi2(self, profile, K, C):
        return self.value

    def describe(self):
        return {"policy": "fixed", "value": self.value}


@dataclass(frozen=True)
class SampledPhi2:
    """Independent uniform draw per (algorithm, K) from a load-class range."""
    load_class: str
    seed: int = 0

    def __post_init__(self):
        if self.load_class not in LOAD_CLASS_RANGES:
            raise ConfigurationError(f"unknown load class {self.load_class!r}")

    def phi2(self, profile, K, C):
        alg = PROFILE_IDS.index(profile.algorithm_id)
        return sample_variance(
            self.load_class, streams.substream(self.seed, streams.VARIANCE, alg, K))

    def describe(self):
        return {"policy": "sampled", "load_class": self.load_class,
                "range": list(LOAD_CLASS_RANGES[self.load_class]), "seed": self.seed}


@dataclass(frozen=True)
class CalibratedPhi2:
    """phi2 per algorithm chosen so that the curve hits ``target_db`` at ``K``.

    ``targets`` maps algorithm id to ``(K, target_db)``.
    """
    targets: dict

    def phi2(self, profile, K, C):
        try:
            k0, db = self.targets[profile.algorithm_id]
        except KeyError:
            raise ConfigurationError(
                f"no calibration anchor for profile {profile.algorithm_id!r}") from None
        return calibrate_variance(db, profile_eval(profile, k0), C, k0)

    def describe(self):
        return {"policy": "calibrated",
                "targets": {k: {"K": v[0], "target_db": v[1]}
                            for k, v in sorted(self.targets.items())}}


def curve_point(profile, K, C, phi2):
    """One SnrCurvePoint; out-of-domain points carry ``gamma_db=None``."""
    lg10 = profile_log10(profile, K)
    try:
        aleph = profile_eval(profile, K)
    except DomainError:
        aleph = math.inf
    gamma = snr_linear(aleph, C, K)
    lg = _log_margin(aleph, C, K, log10_aleph=lg10)
    db = None if lg is None else 10.0 * phi2 * lg
    return SnrCurvePoint(int(K), profile.algorithm_id, aleph, phi2, gamma, db)


def snr_curve(profile, K_range, C, policy):
    """Evaluate the model for every K of ``K_range`` under a phi2 policy."""
    ks = list(K_range)
    if not ks:
        raise ContractError("empty K range")
    if not C > 0:
        raise DomainError("normalization factor C must be > 0")
    return [curve_point(profile, K, C, policy.phi2(profile, K, C)) for K in ks]


def positivity_threshold(profile, C=1.0, k_hi=1000):
    """Smallest K0 such that ``aleph(K) - C K > 1`` for all K0 <= K <= k_hi.

    Found by a direct scan downward from ``k_hi``.
    """
    k0 = None
    for K in range(k_hi, 0, -1):
        lg = _log_margin(None if K > _LOG_SPACE_K else profile_eval(profile, K),
                         C, K, log10_aleph=profile_log10(profile, K))
        if lg is None or lg <= 0:
            break
        k0 = K
    return k0
