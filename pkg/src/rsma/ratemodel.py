"""SINRs, sample-average rates and achievable-rate aggregation.

Rates are in bits/s/Hz throughout (log base 2). Decoding order at an
alpha-user is s_0, then s_c, then its private stream, with interference of
the not-yet-decoded layers treated as noise; a 0-user decodes s_0 only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSampleSet
from .config import SystemConfig

STREAM_ZERO = "zero"
STREAM_COMMON = "common"
STREAM_PRIVATE = "private"

# tolerated numeric slack when validating a common-rate split against the
# common-stream average rate
_SPLIT_TOL = 1e-6


@dataclass
class PrecoderSet:
    """Transmit vectors for one channel use.

    p_private stacks the alpha-user precoders as columns. common_split is
    the per-alpha-user share of the common-stream rate (bits/s/Hz), and
    tp_factor is the time share theta of the alpha-phase under time
    partitioning (1.0 means no time split / power partitioning).
    """

    p_zero: np.ndarray
    p_common: np.ndarray
    p_private: np.ndarray
    common_split: np.ndarray = None
    tp_factor: float = 1.0

    def __post_init__(self):
        self.p_zero = np.asarray(self.p_zero, dtype=complex).reshape(-1)
        self.p_common = np.asarray(self.p_common, dtype=complex).reshape(-1)
        self.p_private = np.asarray(self.p_private, dtype=complex)
        m = self.p_zero.shape[0]
        if self.p_common.shape != (m,) or self.p_private.shape != (m, m):
            raise ValueError("inconsistent precoder dimensions")
        if self.common_split is None:
            self.common_split = np.zeros(m)
        self.common_split = np.asarray(self.common_split, dtype=float).reshape(-1)
        if self.common_split.shape != (m,):
            raise ValueError("common_split must have one entry per alpha-user")
        if np.any(self.common_split < -1e-9):
            raise ValueError("common_split entries must be nonnegative")
        self.common_split = np.maximum(self.common_split, 0.0)
        if not 0.0 <= self.tp_factor <= 1.0:
            raise ValueError(f"tp_factor must lie in [0, 1], got {self.tp_factor}")

    @property
    def m_antennas(self) -> int:
        return self.p_zero.shape[0]

    def power_zero(self) -> float:
        return float(np.vdot(self.p_zero, self.p_zero).real)

    def power_common(self) -> float:
        return float(np.vdot(self.p_common, self.p_common).real)

    def power_private_total(self) -> float:
        return float(np.sum(np.abs(self.p_private) ** 2))

    def total_power_pp(self) -> float:
        """Power of the superposed transmit signal under power partitioning."""
        return self.power_zero() + self.power_common() + self.power_private_total()

    def power_alpha_phase(self) -> float:
        """Power of the alpha-phase signal under time partitioning."""
        return self.power_common() + self.power_private_total()


@dataclass
class RateReport:
    """Achievable rates of one channel use under a fixed precoder set."""

    per_user_rate: np.ndarray
    common_rate: float
    sum_rate_alpha: float

    def __post_init__(self):
        self.per_user_rate = np.asarray(self.per_user_rate, dtype=float)


def _gains(h: np.ndarray, pre: PrecoderSet) -> tuple[float, float, np.ndarray]:
    """|h^H p|^2 of the zero, common and private precoders at channel h."""
    hc = np.conj(np.asarray(h).reshape(-1))
    g0 = np.abs(hc @ pre.p_zero) ** 2
    gc = np.abs(hc @ pre.p_common) ** 2
    gp = np.abs(hc @ pre.p_private) ** 2
    return float(g0), float(gc), gp


def sinr_common(h: np.ndarray, pre: PrecoderSet) -> float:
    """SINR of the common stream at an alpha-user (s_0 already removed)."""
    _, gc, gp = _gains(h, pre)
    return gc / (float(np.sum(gp)) + 1.0)


def sinr_private(h: np.ndarray, pre: PrecoderSet, k: int) -> float:
    """SINR of alpha-user k's private stream after removing s_0 and s_c."""
    _, _, gp = _gains(h, pre)
    own = gp[k]
    return own / (float(np.sum(gp)) - own + 1.0)


def sinr_zero_pp(h: np.ndarray, pre: PrecoderSet) -> float:
    """SINR of the broadcast stream s_0 under power partitioning.

    s_0 is decoded first, so the common and all private layers interfere.
    """
    g0, gc, gp = _gains(h, pre)
    return g0 / (gc + float(np.sum(gp)) + 1.0)


def snr_zero_tp(h: np.ndarray, p_zero: np.ndarray) -> float:
    """Interference-free SNR of s_0 in its own time phase."""
    hc = np.conj(np.asarray(h).reshape(-1))
    return float(np.abs(hc @ np.asarray(p_zero, dtype=complex).reshape(-1)) ** 2)


def _sample_gains(samples: ChannelSampleSet, user: int, pre: PrecoderSet):
    """Vectorized |h^H p|^2 over all samples of one user."""
    hs = samples.user_samples(user).conj()
    g0 = np.abs(hs @ pre.p_zero) ** 2
    gc = np.abs(hs @ pre.p_common) ** 2
    gp = np.abs(hs @ pre.p_private) ** 2
    return g0, gc, gp


def stream_sinr_samples(
    samples: ChannelSampleSet,
    pre: PrecoderSet,
    stream: str,
    user: int,
    scheme: str = "pp",
) -> np.ndarray:
    """Per-sample SINR of one stream at one user."""
    g0, gc, gp = _sample_gains(samples, user, pre)
    t_p = np.sum(gp, axis=1) + 1.0
    if stream == STREAM_PRIVATE:
        own = gp[:, user]
        return own / (t_p - own)
    if stream == STREAM_COMMON:
        return gc / t_p
    if stream == STREAM_ZERO:
        if scheme == "tp":
            return g0
        return g0 / (t_p + gc)
    raise ValueError(f"unknown stream {stream!r}")


def average_rate(
    samples: ChannelSampleSet,
    pre: PrecoderSet,
    stream: str,
    user: int,
    scheme: str = "pp",
) -> float:
    """Sample-average rate (1/N) sum_n log2(1 + SINR^(n)) of one stream."""
    sinr = stream_sinr_samples(samples, pre, stream, user, scheme)
    return float(np.mean(np.log2(1.0 + sinr)))


def _common_layer_rates(samples: ChannelSampleSet, pre: PrecoderSet, config: SystemConfig):
    """Average common and private rates of every alpha-user."""
    r_c = np.array([average_rate(samples, pre, STREAM_COMMON, k) for k in config.k_alpha])
    r_p = np.array([average_rate(samples, pre, STREAM_PRIVATE, k) for k in config.k_alpha])
    return r_c, r_p


def _validated_split(pre: PrecoderSet, r_common_min: float) -> np.ndarray:
    split = pre.common_split
    excess = float(np.sum(split)) - r_common_min
    if excess > _SPLIT_TOL:
        raise ValueError(
            f"common_split sums to {np.sum(split):.6g} but the common stream "
            f"only supports {r_common_min:.6g}"
        )
    if excess > 0 and np.sum(split) > 0:
        # shave off numeric excess so reported rates stay decodable
        split = split * (r_common_min / float(np.sum(split)))
    return split


def user_rates_tp(
    samples: ChannelSampleSet, pre: PrecoderSet, config: SystemConfig
) -> RateReport:
    """Achievable rates under time partitioning with alpha-phase share theta.

    Alpha-user k gets theta*(C_k + R_private); 0-user k gets its share of
    the remaining (1-theta) fraction at the interference-free rate of s_0.
    """
    theta = pre.tp_factor
    r_c, r_p = _common_layer_rates(samples, pre, config)
    r_c_min = float(np.min(r_c))
    split = _validated_split(pre, r_c_min)

    rates = np.zeros(config.K)
    rates[: config.M] = theta * (split + r_p)
    for k in config.k_zero:
        r0 = average_rate(samples, pre, STREAM_ZERO, k, scheme="tp")
        rates[k] = config.theta_zero_of(k) * (1.0 - theta) * r0
    return RateReport(
        per_user_rate=rates,
        common_rate=r_c_min,
        sum_rate_alpha=float(np.sum(rates[: config.M])),
    )


def user_rates_pp(
    samples: ChannelSampleSet, pre: PrecoderSet, config: SystemConfig
) -> RateReport:
    """Achievable rates under power partitioning (superposed layers).

    Every alpha-user and the addressed 0-user must decode s_0, so 0-user k
    is limited by the worst average rate of s_0 over K_alpha + {k}.
    """
    r_c, r_p = _common_layer_rates(samples, pre, config)
    r_c_min = float(np.min(r_c))
    split = _validated_split(pre, r_c_min)

    r0_alpha = np.array(
        [average_rate(samples, pre, STREAM_ZERO, k, scheme="pp") for k in config.k_alpha]
    )
    r0_alpha_min = float(np.min(r0_alpha)) if config.M > 0 else np.inf

    rates = np.zeros(config.K)
    rates[: config.M] = split + r_p
    for k in config.k_zero:
        r0_own = average_rate(samples, pre, STREAM_ZERO, k, scheme="pp")
        rates[k] = config.theta_zero_of(k) * min(r0_alpha_min, r0_own)
    return RateReport(
        per_user_rate=rates,
        common_rate=r_c_min,
        sum_rate_alpha=float(np.sum(rates[: config.M])),
    )


def ergodic_sum_rate(reports: list[RateReport]) -> tuple[float, np.ndarray]:
    """Mean alpha-user sum rate and per-user ergodic rates over channel uses."""
    if not reports:
        raise ValueError("need at least one rate report")
    esr = float(np.mean([r.sum_rate_alpha for r in reports]))
    per_user = np.mean(np.stack([r.per_user_rate for r in reports]), axis=0)
    return esr, per_user
