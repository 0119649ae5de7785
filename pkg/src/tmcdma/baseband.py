"""Chip-level synchronous DS-CDMA uplink.

One symbol epoch is simulated as::

    bits b (K,) -> chips s = sum_k A_k b_k c_k (N,) -> s + n -> y = C (s + n)

where the rows ``c_k`` of ``C`` are unit-energy signatures. Without noise the
matched filter output is exactly ``y = R A b``; with white chip noise of
standard deviation sigma the output noise has covariance ``sigma^2 R``.

Bit vectors, chip vectors and matched-filter outputs are plain numpy arrays.
Functions that take a single epoch also accept a stack of epochs along the
first axis.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard

from . import streams
from .errors import ConfigurationError, ContractError

CODE_KINDS = ("pseudo-random", "walsh-hadamard")


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of a synchronous uplink.

    ``amplitudes`` defaults to 1 for every user (perfect power control);
    pass a length-K sequence to override per user.
    """
    K: int
    N: int
    noise_sigma: float = 0.0
    code_kind: str = "pseudo-random"
    seed: int = 0
    amplitudes: tuple = field(default=None)

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if self.N < 1:
            raise ConfigurationError(f"N must be >= 1, got {self.N}")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        if self.code_kind not in CODE_KINDS:
            raise ConfigurationError(f"unknown code_kind {self.code_kind!r}")
        if self.code_kind == "walsh-hadamard":
            if not _is_power_of_two(self.N):
                raise ConfigurationError(
                    f"walsh-hadamard codes need N a power of two, got {self.N}")
            if self.K > self.N:
                raise ConfigurationError(
                    f"walsh-hadamard codes need K <= N, got K={self.K} N={self.N}")
        if self.amplitudes is None:
            object.__setattr__(self, "amplitudes", (1.0,) * self.K)
        else:
            amps = tuple(float(a) for a in self.amplitudes)
            if len(amps) != self.K or any(not a > 0 for a in amps):
                raise ConfigurationError("need K positive amplitudes")
            object.__setattr__(self, "amplitudes", amps)

    @property
    def A(self):
        """Amplitudes as a numpy vector."""
        return np.asarray(self.amplitudes, dtype=float)


@dataclass(frozen=True)
class SpreadingCodeSet:
    """K x N signature matrix with unit-energy rows.

    ``signs`` keeps the integer +/-1 chips when the codes are bipolar, so
    correlations can be formed exactly.
    """
    codes: np.ndarray
    seed: int
    kind: str
    signs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.codes.setflags(write=False)
        if self.signs is not None:
            self.signs.setflags(write=False)

    @property
    def K(self):
        return self.codes.shape[0]

    @property
    def N(self):
        return self.codes.shape[1]


def generate_codes(config):
    """Generate K unit-energy bipolar signatures of length N.

    Pseudo-random codes draw each chip uniformly from {-1, +1} using the
    ``(seed, CODES, K, N)`` stream; Walsh-Hadamard codes are the first K
    rows of the Sylvester Hadamard matrix of order N. Both are scaled by
    1/sqrt(N).
    """
    K, N = config.K, config.N
    if config.code_kind == "walsh-hadamard":
        signs = hadamard(N)[:K].astype(np.int64)
    else:
        rng = streams.substream(config.seed, streams.CODES, K, N)
        signs = rng.choice(np.array([-1, 1], dtype=np.int64), size=(K, N))
    return SpreadingCodeSet(signs / np.sqrt(N), config.seed, config.code_kind,
                            signs)


def correlation_matrix(codes):
    """Return the Gram matrix ``R[i, j] = <c_i, c_j>`` of the signatures.

    Bipolar code sets are correlated in integer arithmetic and divided by N
    once, so orthogonal codes give an exact identity matrix.
    """
    if isinstance(codes, SpreadingCodeSet) and codes.signs is not None:
        S = codes.signs
        return (S @ S.T) / S.shape[1]
    C = codes.codes if isinstance(codes, SpreadingCodeSet) else np.asarray(codes)
    R = C @ C.T
    # exact symmetry, independent of BLAS summation order
    return (R + R.T) / 2


def transmit_chips(b, config, codes):
    """Superpose the users' spread symbols for one epoch (or a stack)."""
    b = np.asarray(b, dtype=float)
    if b.shape[-1] != config.K or codes.K != config.K:
        raise ContractError(
            f"bit vector length {b.shape[-1]} does not match K={config.K}")
    return (b * config.A) @ codes.codes


def add_awgn(chips, noise_sigma, rng):
    """Add white Gaussian noise of standard deviation ``noise_sigma``.

    ``rng`` is a generator from :func:`tmcdma.streams.substream`; passing the
    same stream twice reproduces the same noise.
    """
    if noise_sigma < 0:
        raise ConfigurationError("noise_sigma must be >= 0")
    chips = np.asarray(chips, dtype=float)
    if noise_sigma == 0:
        return chips.copy()
    return chips + noise_sigma * rng.standard_normal(chips.shape)


def matched_filter_bank(chips, codes):
    """Correlate the received chips with every signature: ``y_k = <c_k, r>``."""
    chips = np.asarray(chips, dtype=float)
    if chips.shape[-1] != codes.N:
        raise ContractError(
            f"chip vector length {chips.shape[-1]} does not match N={codes.N}")
    return chips @ codes.codes.T


def insert_energy_bits(bitstream, period):
    """Insert an all-(+1) pilot epoch after every ``period`` data epochs.

    Returns a new list; the output length is ``n + n // period``.
    """
    if period < 1:
        raise ConfigurationError(f"pilot period must be >= 1, got {period}")
    out = []
    for i, epoch in enumerate(bitstream, start=1):
        epoch = np.asarray(epoch)
        out.append(epoch)
        if i % period == 0:
            out.append(np.ones_like(epoch))
    return out


def pilot_mask(n_data, period):
    """Boolean mask over the padded stream, True where a pilot was inserted."""
    if period < 1:
        raise ConfigurationError(f"pilot period must be >= 1, got {period}")
    total = n_data + n_data // period
    idx = np.arange(1, total + 1)
    return idx % (period + 1) == 0


def ebn0_to_sigma(ebn0_db, amplitude=1.0):
    """Chip noise sigma giving the requested per-user Eb/N0.

    With unit-energy codes Eb = A^2 and N0 = 2 sigma^2.
    """
    return amplitude / np.sqrt(2.0 * 10.0 ** (ebn0_db / 10.0))
