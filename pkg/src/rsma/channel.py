"""Channel draws and conditional error sampling under heterogeneous CSIT."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig

# Stream tags keep the true-channel draw and the conditional sample draw on
# disjoint Philox streams even when the caller reuses one seed for both.
_TAG_CHANNEL = 0x11
_TAG_SAMPLES = 0x22
_TAG_INIT = 0x33


def rng_from(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(stream)))))


def derive_seed(*entropy: int) -> int:
    """Stable child seed from a tuple of integers."""
    ss = np.random.SeedSequence(tuple(int(e) for e in entropy))
    return int(ss.generate_state(1, np.uint64)[0])


def csit_error_variance(snr_linear: float, alpha: float) -> float:
    """CSIT error variance P^(-alpha) of an alpha-user at power P."""
    if snr_linear <= 0:
        raise ValueError(f"snr_linear must be positive, got {snr_linear}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return float(snr_linear ** (-alpha))


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def error_std_per_user(config: SystemConfig) -> np.ndarray:
    """Per-entry complex std of the channel error, one entry per user.

    Alpha-users: sqrt(P^-alpha). 0-users have no instantaneous estimate, so
    the "error" is the full channel with the long-term gain applied.
    """
    sig = np.empty(config.K)
    sig[: config.M] = np.sqrt(config.csit_error_variance)
    sig[config.M :] = config.zero_user_gain
    return sig


@dataclass(frozen=True)
class ChannelRealization:
    """One channel use: true channels, CSIT estimates and estimation errors.

    Columns are users. For 0-users the estimate column is exactly zero and
    the error column carries the whole channel.
    """

    h_true: np.ndarray
    h_est: np.ndarray
    h_err: np.ndarray

    def __post_init__(self):
        for name in ("h_true", "h_est", "h_err"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=complex)
            object.__setattr__(self, name, _freeze(arr))
        if self.h_true.shape != self.h_est.shape or self.h_true.shape != self.h_err.shape:
            raise ValueError("h_true, h_est, h_err must share one shape")
        if not np.allclose(self.h_true, self.h_est + self.h_err, atol=1e-12):
            raise ValueError("h_true must equal h_est + h_err")

    @property
    def m_antennas(self) -> int:
        return self.h_true.shape[0]

    @property
    def n_users(self) -> int:
        return self.h_true.shape[1]


def draw_channel(config: SystemConfig, seed: int) -> ChannelRealization:
    """Draw one channel use.

    True channels have i.i.d. CN(0,1) entries, scaled per user by the
    long-term gain. Alpha-user errors are drawn independently with variance
    P^-alpha and the estimate is h_true - h_err; 0-user estimates are zero.
    """
    rng = rng_from(seed, _TAG_CHANNEL)
    m, k = config.M, config.K
    gains = np.ones(k)
    gains[m:] = config.zero_user_gain
    h_raw = _cn(rng, (m, k)) * gains

    h_err = np.empty((m, k), dtype=complex)
    sig_e = np.sqrt(config.csit_error_variance)
    h_err[:, :m] = _cn(rng, (m, m)) * sig_e
    h_err[:, m:] = h_raw[:, m:]
    h_est = h_raw - h_err
    h_est[:, m:] = 0.0
    # rebuild the truth from the stored parts so the reconstruction
    # invariant holds at the bit level
    h_true = h_est + h_err
    return ChannelRealization(h_true=h_true, h_est=h_est, h_err=h_err)


@dataclass(frozen=True)
class ChannelSampleSet:
    """Conditional channel samples H^(n) = H_est + error^(n), n = 1..N."""

    estimate: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        est = np.ascontiguousarray(self.estimate, dtype=complex)
        smp = np.ascontiguousarray(self.samples, dtype=complex)
        if smp.ndim != 3 or smp.shape[1:] != est.shape:
            raise ValueError(f"samples must be (N, {est.shape[0]}, {est.shape[1]})")
        object.__setattr__(self, "estimate", _freeze(est))
        object.__setattr__(self, "samples", _freeze(smp))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def user_samples(self, user: int) -> np.ndarray:
        """All sampled channel vectors of one user, shape (N, M)."""
        return self.samples[:, :, user]


def draw_conditional_samples(
    realization: ChannelRealization,
    config: SystemConfig,
    n_samples: int,
    seed: int,
) -> ChannelSampleSet:
    """Sample the channel distribution seen by the transmitter.

    Fresh error draws are added to the estimate; the realized error inside
    ``realization`` is never reused, so the true channel appears among the
    samples only by coincidence of seeds.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng_from(seed, _TAG_SAMPLES)
    m, k = config.M, config.K
    if realization.h_est.shape != (m, k):
        raise ValueError("realization does not match config dimensions")
    sig = error_std_per_user(config)
    errs = _cn(rng, (n_samples, m, k)) * sig
    samples = realization.h_est[None, :, :] + errs
    return ChannelSampleSet(estimate=realization.h_est, samples=samples)
