"""Monte Carlo BER / output-SNR estimation and the analytic figure datasets.

Randomness is organised in fixed blocks of ``block_size`` epochs. Block
``j`` of user count ``K`` draws its bits and its unit-variance chip noise
from the substreams ``(seed, BITS, K, j)`` and ``(seed, NOISE, K, j)``, and
codes come from ``(seed, CODES, K, N)``. A block is the unit of parallel
work; integer counters are summed and real sums are reduced in block order,
so results do not depend on the number of workers. All detectors and all
Eb/N0 values of a point see the same bits and the same (scaled) noise.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import baseband, snrmodel, streams
from .detect import (DEFAULT_K_MAX, DETECTOR_IDS, TmCache, TmParams,
                     detect_conventional, detect_decorrelator, detect_ml,
                     detect_nd, detect_tm)
from .detect.detectors import DEFAULT_COND_MAX
from .errors import ComplexityGuard, ConfigurationError

DEFAULT_K_RANGES = {"light": (2, 50), "heavy": (2, 100)}
LOW_CONFIDENCE_ERRORS = 20

STATUS_OK = "ok"
STATUS_LOW = "low-confidence"
STATUS_SKIP_ML = "skipped:complexity-guard"
STATUS_SKIP_ZF = "skipped:singular-correlation"


@dataclass(frozen=True)
class ScenarioSpec:
    load_class: str = "light"
    K_range: tuple = None
    N: int = 64
    ebn0_db: tuple = (6.0,)
    symbols_per_point: int = 10_000
    detectors: tuple = DETECTOR_IDS
    seed: int = 0
    tm_params: TmParams = field(default_factory=TmParams)
    pilot_period: int = None
    code_kind: str = "pseudo-random"
    k_max: int = DEFAULT_K_MAX
    nd_max_iters: int = 100
    amplitude: float = 1.0
    block_size: int = 2048

    def __post_init__(self):
        if self.load_class not in DEFAULT_K_RANGES:
            raise ConfigurationError(f"unknown load class {self.load_class!r}")
        if self.K_range is None:
            object.__setattr__(self, "K_range", DEFAULT_K_RANGES[self.load_class])
        lo, hi = self.K_range
        if not 1 <= lo <= hi:
            raise ConfigurationError(f"invalid K range {self.K_range}")
        object.__setattr__(self, "K_range", (int(lo), int(hi)))
        object.__setattr__(self, "ebn0_db", tuple(float(e) for e in self.ebn0_db))
        if not self.ebn0_db:
            raise ConfigurationError("empty Eb/N0 grid")
        if self.symbols_per_point < 1:
            raise ConfigurationError("symbols_per_point must be >= 1")
        unknown = set(self.detectors) - set(DETECTOR_IDS)
        if unknown:
            raise ConfigurationError(f"unknown detectors {sorted(unknown)}")
        # canonical detector order
        object.__setattr__(self, "detectors",
                           tuple(d for d in DETECTOR_IDS if d in self.detectors))
        if self.pilot_period is not None and self.pilot_period < 1:
            raise ConfigurationError("pilot_period must be >= 1")
        if self.block_size < 1:
            raise ConfigurationError("block_size must be >= 1")
        if not self.amplitude > 0:
            raise ConfigurationError("amplitude must be > 0")

    @property
    def Ks(self):
        return range(self.K_range[0], self.K_range[1] + 1)

    def system(self, K):
        return baseband.SystemConfig(K=K, N=self.N, code_kind=self.code_kind,
                                     seed=self.seed,
                                     amplitudes=(self.amplitude,) * K)

    def to_dict(self):
        d = asdict(self)
        d["K_range"] = list(self.K_range)
        d["ebn0_db"] = list(self.ebn0_db)
        d["detectors"] = list(self.detectors)
        return d


@dataclass(frozen=True)
class MonteCarloStats:
    K: int
    detector_id: str
    ebn0_db: float
    ber: float
    ber_ci95: float
    empirical_snr_db: float
    empirical_snr_se_db: float
    mean_metric_evals: float
    mean_ambiguous_count: float
    mean_flips: float
    errors: int
    symbols: int
    seed: int
    status: str = STATUS_OK

    @property
    def skipped(self):
        return self.status.startswith("skipped")


@dataclass(frozen=True)
class EmpiricalSnr:
    per_user_db: np.ndarray
    mean_db: float


def _power_sums(y, R, A, b):
    """Per-user sums of desired, MAI and noise power over a stack of epochs."""
    ab = b * A
    clean = ab @ R  # R symmetric
    desired = ab * np.diag(R)
    mai = clean - desired
    noise = y - clean
    return ((desired ** 2).sum(axis=0), (mai ** 2).sum(axis=0),
            (noise ** 2).sum(axis=0))


def _snr_from_sums(d, m, n):
    with np.errstate(divide="ignore", invalid="ignore"):
        per_user = d / (m + n)
        mean = per_user.mean()
        return 10 * np.log10(per_user), float(10 * np.log10(mean))


def empirical_snr(y_samples, codes, amplitudes, b_truth):
    """Split matched filter outputs into desired, MAI and noise power.

    Per user ``SNR_k = P_desired / (P_MAI + P_noise)`` with powers averaged
    over the epochs; ``mean_db`` is the user-averaged ratio in dB.
    """
    y = np.atleast_2d(np.asarray(y_samples, dtype=float))
    b = np.atleast_2d(np.asarray(b_truth, dtype=float))
    R = baseband.correlation_matrix(codes)
    A = np.asarray(amplitudes, dtype=float) * np.ones(R.shape[0])
    per_user, mean = _snr_from_sums(*_power_sums(y, R, A, b))
    return EmpiricalSnr(per_user, mean)


def q_function(x):
    """Gaussian tail probability ``Q(x) = erfc(x / sqrt 2) / 2``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def theoretical_ber_single_user(ebn0_db):
    """BPSK bit error probability ``Q(sqrt(2 Eb/N0))`` in AWGN."""
    if ebn0_db == -math.inf:
        return 0.5
    return q_function(math.sqrt(2.0 * 10.0 ** (ebn0_db / 10.0)))


# --- block simulation -------------------------------------------------------

@lru_cache(maxsize=256)
def _point_setup(spec, K):
    system = spec.system(K)
    codes = baseband.generate_codes(system)
    R = baseband.correlation_matrix(codes)
    R.setflags(write=False)
    zf_ok = np.linalg.cond(R) <= DEFAULT_COND_MAX
    return system, codes, R, bool(zf_ok)


def _block_sizes(spec):
    n = spec.symbols_per_point
    full, rest = divmod(n, spec.block_size)
    return [spec.block_size] * full + ([rest] if rest else [])


def _simulate_block(spec, K, j, n_data):
    """Transmit one block. Returns (bits, data mask, clean chips, unit noise)."""
    system, codes, R, _ = _point_setup(spec, K)
    data = streams.substream(spec.seed, streams.BITS, K, j).choice(
        np.array([-1, 1], dtype=np.int8), size=(n_data, K))
    if spec.pilot_period is None:
        bits = data
        mask = np.ones(n_data, dtype=bool)
    else:
        bits = np.asarray(baseband.insert_energy_bits(data, spec.pilot_period))
        mask = ~baseband.pilot_mask(n_data, spec.pilot_period)
    chips = baseband.transmit_chips(bits, system, codes)
    unit_noise = streams.substream(spec.seed, streams.NOISE, K, j).standard_normal(
        chips.shape)
    return bits, mask, chips, unit_noise


def _run_block(args):
    spec, K, j, n_data, detectors = args
    system, codes, R, zf_ok = _point_setup(spec, K)
    A = system.A
    bits, mask, chips, unit_noise = _simulate_block(spec, K, j, n_data)
    out = {}
    for ei, ebn0 in enumerate(spec.ebn0_db):
        sigma = float(baseband.ebn0_to_sigma(ebn0, spec.amplitude))
        rx = chips + sigma * unit_noise if sigma > 0 else chips
        Y = baseband.matched_filter_bank(rx, codes)
        sums = _power_sums(Y[mask], R, A, bits[mask].astype(float))
        block_db = _snr_from_sums(*sums)[1]
        per_det = {}
        for det in detectors:
            if det == "ml" and K > spec.k_max:
                per_det[det] = None
                continue
            if det == "zf" and not zf_ok:
                per_det[det] = None
                continue
            cache = TmCache() if spec.tm_params.cache_enabled else None
            errs = evals = amb = flips = 0
            for y, b, is_data in zip(Y, bits, mask):
                if det == "conv":
                    o = detect_conventional(y)
                elif det == "zf":
                    o = detect_decorrelator(y, R)
                elif det == "ml":
                    o = detect_ml(y, R, A, k_max=spec.k_max)
                elif det == "nd":
                    o = detect_nd(y, R, A, max_iters=spec.nd_max_iters)
                else:
                    o = detect_tm(y, R, A, spec.tm_params, noise_sigma=sigma,
                                  cache=cache)
                if is_data:
                    errs += int(np.count_nonzero(o.b_hat != b))
                    evals += o.metric_evals
                    amb += o.ambiguous_count
                    flips += o.flips
            per_det[det] = (errs, evals, amb, flips)
        out[ei] = (sums, block_db, per_det)
    return out


def _run_units(units, workers):
    if workers <= 1 or len(units) <= 1:
        return [_run_block(u) for u in units]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_block, units))


def _collect(spec, K, detectors, blocks):
    n_sym = spec.symbols_per_point
    rows = []
    for ei, ebn0 in enumerate(spec.ebn0_db):
        d = m = n = 0.0
        block_dbs = []
        for blk in blocks:
            (bd, bm, bn), bdb, _ = blk[ei]
            d, m, n = d + bd, m + bm, n + bn
            block_dbs.append(bdb)
        snr_db = _snr_from_sums(d, m, n)[1]
        finite = [x for x in block_dbs if np.isfinite(x)]
        se = (float(np.std(finite, ddof=1) / np.sqrt(len(finite)))
              if len(finite) > 1 else math.nan)
        for det in detectors:
            if blocks[0][ei][2][det] is None:
                status = STATUS_SKIP_ML if det == "ml" else STATUS_SKIP_ZF
                rows.append(MonteCarloStats(
                    K, det, ebn0, math.nan, math.nan, snr_db, se, math.nan,
                    math.nan, math.nan, 0, n_sym, spec.seed, status))
                continue
            errs = evals = amb = flips = 0
            for blk in blocks:
                e, ev, a, f = blk[ei][2][det]
                errs, evals, amb, flips = errs + e, evals + ev, amb + a, flips + f
            n_bits = K * n_sym
            ber = errs / n_bits
            ci = 1.96 * math.sqrt(ber * (1 - ber) / n_bits)
            status = STATUS_OK if errs >= LOW_CONFIDENCE_ERRORS else STATUS_LOW
            rows.append(MonteCarloStats(
                K, det, ebn0, ber, ci, snr_db, se, evals / n_sym, amb / n_sym,
                flips / n_sym, errs, n_sym, spec.seed, status))
    return rows


def sweep_scenario(spec, workers=1):
    """Simulate every (K, detector, Eb/N0) point of a scenario.

    Rows are ordered by K, then detector (conv, zf, ml, nd, tm), then Eb/N0.
    ML rows above ``k_max`` and ZF rows with a singular correlation matrix
    are emitted with a ``skipped:*`` status instead of aborting the sweep.
    """
    sizes = _block_sizes(spec)
    units = [(spec, K, j, n, spec.detectors)
             for K in spec.Ks for j, n in enumerate(sizes)]
    results = _run_units(units, workers)
    rows = []
    nb = len(sizes)
    for i, K in enumerate(spec.Ks):
        blocks = results[i * nb:(i + 1) * nb]
        pt = _collect(spec, K, spec.detectors, blocks)
        pt.sort(key=lambda r: (DETECTOR_IDS.index(r.detector_id),
                               spec.ebn0_db.index(r.ebn0_db)))
        rows.extend(pt)
    return rows


def run_point(spec, K, detector_id, ebn0_db=None, workers=1):
    """Simulate one (K, detector) point at one Eb/N0 (first of the grid by default).

    Raises
    ------
    ComplexityGuard
        For ``ml`` with ``K > spec.k_max``.
    """
    if detector_id not in DETECTOR_IDS:
        raise ConfigurationError(f"unknown detector {detector_id!r}")
    if detector_id == "ml" and K > spec.k_max:
        raise ComplexityGuard(K, spec.k_max)
    ebn0 = spec.ebn0_db[0] if ebn0_db is None else float(ebn0_db)
    sub = replace(spec, K_range=(K, K), ebn0_db=(ebn0,), detectors=(detector_id,))
    return sweep_scenario(sub, workers=workers)[0]


def tm_ml_agreement(spec, K, ebn0_db=None, tm_params=None):
    """Fraction of epochs where the TM decision equals the ML decision."""
    if K > spec.k_max:
        raise ComplexityGuard(K, spec.k_max)
    params = spec.tm_params if tm_params is None else tm_params
    system, codes, R, _ = _point_setup(spec, K)
    A = system.A
    ebn0 = spec.ebn0_db[0] if ebn0_db is None else float(ebn0_db)
    sigma = float(baseband.ebn0_to_sigma(ebn0, spec.amplitude))
    agree = total = 0
    for j, n in enumerate(_block_sizes(spec)):
        bits, mask, chips, unit_noise = _simulate_block(spec, K, j, n)
        Y = baseband.matched_filter_bank(chips + sigma * unit_noise, codes)
        cache = TmCache() if params.cache_enabled else None
        for y in Y[mask]:
            tm = detect_tm(y, R, A, params, noise_sigma=sigma, cache=cache)
            ml = detect_ml(y, R, A, k_max=spec.k_max)
            agree += bool(np.array_equal(tm.b_hat, ml.b_hat))
            total += 1
    return agree / total


def mean_nd_iterations(rows):
    """Map K -> mean accepted flips of the ND rows of a sweep."""
    return {r.K: r.mean_flips for r in rows
            if r.detector_id == "nd" and not r.skipped}


# --- analytic figure datasets ----------------------------------------------

FIGURE_K = {3: 22, 4: 32, 5: 42, 6: 52, 7: 72, 8: 102}
FIGURE_LOAD = {3: "light", 4: "light", 5: "light", 6: "light",
               7: "heavy", 8: "heavy"}
# quoted SNR values (dB) at the figure's K
FIGURE_ANCHORS = {3: {"tm": 6.5, "nd": 5.8, "ml": 5.5}, 7: {"tm": 36.0},
                  8: {"tm": 45.0}}
FIGURE_ALGORITHMS = ("tm", "nd", "ml")


@dataclass(frozen=True)
class FigureDataset:
    fig_id: int
    points: list
    meta: dict


def reproduce_figure(fig_id, policy="calibrated", nd_profile=None, C=1.0):
    """Analytic SNR-versus-K curves for tm, nd and ml up to the figure's K.

    Parameters
    ----------
    fig_id : int
        3 to 8.
    policy : "calibrated" or a phi2 policy object
        With ``"calibrated"`` each algorithm that has a quoted value in the
        figure gets the phi2 reproducing it; algorithms without one fall
        back to the midpoint of the figure's load-class variance range.
    nd_profile : ComplexityProfile, optional
        ND profile (default ``K^2`` with one iteration).
    """
    if fig_id not in FIGURE_K:
        raise ConfigurationError(f"figure must be one of {sorted(FIGURE_K)}")
    k_fig = FIGURE_K[fig_id]
    load = FIGURE_LOAD[fig_id]
    lo, hi = snrmodel.LOAD_CLASS_RANGES[load]
    profiles = {"tm": snrmodel.ComplexityProfile("tm"),
                "ml": snrmodel.ComplexityProfile("ml"),
                "nd": nd_profile or snrmodel.ComplexityProfile("nd")}
    anchors = FIGURE_ANCHORS.get(fig_id, {})
    points, alg_meta = [], {}
    for alg in FIGURE_ALGORITHMS:
        prof = profiles[alg]
        if policy == "calibrated":
            if alg in anchors:
                pol = snrmodel.CalibratedPhi2({alg: (k_fig, anchors[alg])})
                source = "calibrated"
            else:
                pol = snrmodel.FixedPhi2((lo + hi) / 2)
                source = "range-midpoint"
        else:
            pol = policy
            source = pol.describe()["policy"]
        curve = snrmodel.snr_curve(prof, range(2, k_fig + 1), C, pol)
        points.extend(curve)
        info = {"source": source, "profile": prof.describe()}
        if source == "calibrated":
            phi2 = curve[-1].phi2
            info.update(phi2=phi2, anchor={"K": k_fig, "target_db": anchors[alg]},
                        in_range=bool(lo <= phi2 <= hi))
        elif source in ("range-midpoint", "fixed"):
            phi2 = curve[-1].phi2
            info.update(phi2=phi2, in_range=bool(lo <= phi2 <= hi))
        alg_meta[alg] = info
    meta = {"figure": fig_id, "K": k_fig, "load_class": load,
            "variance_range": [lo, hi], "C": C,
            "policy": policy if isinstance(policy, str) else policy.describe(),
            "algorithms": alg_meta}
    return FigureDataset(fig_id, points, meta)
