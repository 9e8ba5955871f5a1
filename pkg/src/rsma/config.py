"""System-level configuration for the overloaded MISO broadcast channel."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class SystemConfig:
    """Static description of one operating point.

    The transmitter has M antennas and serves K > M single-antenna users.
    Users 0..M-1 feed back imperfect instantaneous CSIT with error variance
    P^(-alpha) (the "alpha-users"); users M..K-1 provide only statistical
    CSIT (the "0-users"), whose long-term SNR may sit below the alpha-users
    by ``zero_user_snr_offset_db``.
    """

    M: int = 2
    K: int = 3
    alpha: float = 0.5
    snr_db: float = 20.0
    qos_alpha: float = 0.0
    qos_zero: float = 0.0
    zero_user_snr_offset_db: float = 0.0
    # share of the 0-phase (TP) or of the broadcast stream rate (PP) given to
    # each 0-user; defaults to the uniform split 1/(K-M)
    theta_zero: tuple = field(default=None)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if int(self.K) != self.K or self.K <= self.M:
            raise ValueError(f"overloaded channel needs K > M, got K={self.K}, M={self.M}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.qos_alpha < 0 or self.qos_zero < 0:
            raise ValueError("QoS thresholds must be nonnegative")
        n_zero = self.K - self.M
        if self.theta_zero is None:
            object.__setattr__(self, "theta_zero", tuple([1.0 / n_zero] * n_zero))
        else:
            th = tuple(float(t) for t in self.theta_zero)
            if len(th) != n_zero:
                raise ValueError(f"theta_zero needs {n_zero} entries, got {len(th)}")
            if any(t < 0 for t in th):
                raise ValueError("theta_zero entries must be nonnegative")
            if abs(sum(th) - 1.0) > 1e-9:
                raise ValueError(f"theta_zero must sum to 1, got {sum(th)}")
            object.__setattr__(self, "theta_zero", th)

    @property
    def snr_linear(self) -> float:
        """Transmit power budget P (unit noise variance)."""
        return float(10.0 ** (self.snr_db / 10.0))

    @property
    def csit_error_variance(self) -> float:
        """Per-entry CSIT error variance P^(-alpha) of the alpha-users."""
        return float(self.snr_linear ** (-self.alpha))

    @property
    def zero_user_gain(self) -> float:
        """Amplitude scale of the 0-user channels, 10^(-offset/20)."""
        return float(10.0 ** (-self.zero_user_snr_offset_db / 20.0))

    @property
    def k_alpha(self) -> range:
        return range(self.M)

    @property
    def k_zero(self) -> range:
        return range(self.M, self.K)

    def at_snr(self, snr_db: float) -> "SystemConfig":
        return replace(self, snr_db=float(snr_db))

    def theta_zero_of(self, user: int) -> float:
        """Time/rate share of 0-user ``user`` (absolute user index)."""
        if user < self.M or user >= self.K:
            raise IndexError(f"user {user} is not a 0-user")
        return self.theta_zero[user - self.M]


def theta_zero_array(config: SystemConfig) -> np.ndarray:
    return np.asarray(config.theta_zero, dtype=float)
