"""Degrees-of-freedom expressions, the DoF region, and the closed-form
precoders that achieve the claimed scalings."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelRealization, derive_seed, draw_channel
from .config import SystemConfig, theta_zero_array
from .ratemodel import PrecoderSet, sinr_common, sinr_private

_FEAS_TOL = 1e-12


class DegenerateChannelError(RuntimeError):
    """Raised when zero-forcing directions collapse (rank-deficient estimates)."""


@dataclass(frozen=True)
class DofPowerAllocation:
    """Power-partitioning exponents: s_0 gets P - P^beta, the common stream
    P^beta - P^tau and the privates P^tau split evenly. theta is the
    alpha-phase time share used by the time-partitioned counterpart."""

    beta: float
    tau: float = None
    theta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.tau is not None and not 0.0 <= self.tau <= self.beta:
            raise ValueError(f"tau must lie in [0, beta], got {self.tau}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")

    def resolved_tau(self, alpha: float) -> float:
        return self.tau if self.tau is not None else min(alpha, self.beta)


def dof_tp(config: SystemConfig, theta: float) -> np.ndarray:
    """Per-user DoF under time partitioning with alpha-phase share theta."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    m, alpha = config.M, config.alpha
    d = np.empty(config.K)
    d[:m] = theta * (1.0 + (m - 1) * alpha) / m
    d[m:] = theta_zero_array(config) * (1.0 - theta)
    return d


def dof_pp(config: SystemConfig, beta: float) -> np.ndarray:
    """Per-user DoF under power partitioning with broadcast exponent beta."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    m, alpha = config.M, config.alpha
    d = np.empty(config.K)
    d[:m] = (beta + (m - 1) * min(alpha, beta)) / m
    d[m:] = theta_zero_array(config) * (1.0 - beta)
    return d


def dof_gain_pp_over_tp(config: SystemConfig, theta: float) -> np.ndarray:
    """Per-user DoF gain of power over time partitioning at beta = theta.

    The 0-user entries vanish by construction; each alpha-user gains
    (M-1)(min(alpha, theta) - theta*alpha)/M, strictly positive iff
    0 < theta < 1 and 0 < alpha < 1 (and M > 1).
    """
    return dof_pp(config, beta=theta) - dof_tp(config, theta)


@dataclass(frozen=True)
class MembershipReport:
    inside: bool
    slacks: np.ndarray
    min_slack: float
    tight: np.ndarray


@dataclass(frozen=True)
class DofRegion:
    """Achievable DoF region: d >= 0 plus one half-space per nonempty subset
    of the alpha-users. Coefficient vectors are 0/1 over all K users."""

    m: int
    k: int
    alpha: float
    coefficients: np.ndarray  # (n_halfspaces, K) of 0/1
    bounds: np.ndarray  # (n_halfspaces,)

    def to_text(self) -> str:
        lines = []
        for row, b in zip(self.coefficients, self.bounds):
            terms = " + ".join(f"d{j + 1}" for j in np.flatnonzero(row))
            lines.append(f"{terms} <= {b:.6g}")
        lines.extend(f"d{j + 1} >= 0" for j in range(self.k))
        return "\n".join(lines)

    def vertices(self) -> np.ndarray:
        """Vertex enumeration by intersecting K active constraints.

        Exponential in K; refuse anything beyond K = 6.
        """
        if self.k > 6:
            raise ValueError("vertex enumeration supported only for K <= 6")
        rows = [(-c, -b) for c, b in zip(self.coefficients, self.bounds)]
        rows += [(np.eye(self.k)[j], 0.0) for j in range(self.k)]
        verts = []
        for combo in itertools.combinations(range(len(rows)), self.k):
            a = np.stack([rows[i][0] for i in combo])
            b = np.array([rows[i][1] for i in combo])
            if abs(np.linalg.det(a)) < 1e-10:
                continue
            v = np.linalg.solve(a, b)
            if region_contains(self, v, tol=1e-9).inside:
                verts.append(np.round(v, 12) + 0.0)
        if not verts:
            return np.zeros((0, self.k))
        uniq = np.unique(np.stack(verts), axis=0)
        return uniq


def dof_region(config: SystemConfig) -> DofRegion:
    """Half-space description of the achievable DoF region."""
    m, k, alpha = config.M, config.K, config.alpha
    coeffs, bounds = [], []
    for size in range(1, m + 1):
        for subset in itertools.combinations(range(m), size):
            row = np.zeros(k)
            row[list(subset)] = 1.0
            row[m:] = 1.0
            coeffs.append(row)
            bounds.append(1.0 + (size - 1) * alpha)
    return DofRegion(
        m=m,
        k=k,
        alpha=alpha,
        coefficients=np.stack(coeffs),
        bounds=np.asarray(bounds),
    )


def region_contains(region: DofRegion, d, tol: float = _FEAS_TOL) -> MembershipReport:
    """Check a DoF tuple against the region; slacks per half-space."""
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.shape[0] != region.k:
        raise ValueError(f"expected a {region.k}-dim tuple, got {d.shape[0]}")
    slacks = region.bounds - region.coefficients @ d
    inside = bool(np.all(slacks >= -tol) and np.all(d >= -tol))
    min_slack = float(min(np.min(slacks), np.min(d)))
    return MembershipReport(
        inside=inside,
        slacks=slacks,
        min_slack=min_slack,
        tight=np.abs(slacks) <= max(tol, 1e-9),
    )


def sum_dof_upper_bound(config: SystemConfig, users) -> float:
    """Converse bound on the sum DoF of any user subset.

    Only alpha-users past the first contribute beyond one DoF:
    1 + alpha * (|U intersect K_alpha| - 1)^+ for nonempty U.
    """
    users = set(int(u) for u in users)
    if not users:
        raise ValueError("user subset must be nonempty")
    if any(u < 0 or u >= config.K for u in users):
        raise ValueError("user indices out of range")
    n_alpha = len(users & set(config.k_alpha))
    return 1.0 + config.alpha * max(n_alpha - 1, 0)


def _zf_direction(estimates: np.ndarray, k: int) -> np.ndarray:
    """Unit vector along estimate k's component orthogonal to the others."""
    m = estimates.shape[0]
    h_k = estimates[:, k]
    nrm_k = np.linalg.norm(h_k)
    if nrm_k < 1e-12:
        raise DegenerateChannelError(f"estimate of user {k} is numerically zero")
    others = np.delete(estimates, k, axis=1)
    if others.shape[1] == 0:
        return h_k / nrm_k
    q, _ = np.linalg.qr(others)
    resid = h_k - q @ (q.conj().T @ h_k)
    nrm = np.linalg.norm(resid)
    if nrm < 1e-9 * nrm_k:
        raise DegenerateChannelError(
            f"user {k} estimate lies in the span of the other estimates"
        )
    return resid / nrm


def low_complexity_precoders(
    realization: ChannelRealization,
    config: SystemConfig,
    scheme: str,
    alloc: DofPowerAllocation,
) -> PrecoderSet:
    """Closed-form precoders: s_0 and s_c along e_1, zero-forcing privates.

    Power levels follow the DoF-achieving exponents: under TP the common
    stream gets P - P^alpha and the privates share P^alpha; under PP s_0
    gets P - P^beta, the common stream P^beta - P^tau and the privates
    share P^tau.
    """
    m = config.M
    p = config.snr_linear
    e1 = np.zeros(m, dtype=complex)
    e1[0] = 1.0
    est_alpha = realization.h_est[:, : config.M]
    dirs = np.stack([_zf_direction(est_alpha, k) for k in range(m)], axis=1)

    if scheme == "tp":
        q_c = max(p - p**config.alpha, 0.0)
        q_k = p**config.alpha / m
        q_0 = p
        theta = alloc.theta
    elif scheme == "pp":
        beta = alloc.beta
        tau = alloc.resolved_tau(config.alpha)
        q_0 = max(p - p**beta, 0.0)
        q_c = max(p**beta - p**tau, 0.0)
        q_k = p**tau / m
        theta = 1.0
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    return PrecoderSet(
        p_zero=np.sqrt(q_0) * e1,
        p_common=np.sqrt(q_c) * e1,
        p_private=dirs * np.sqrt(q_k),
        common_split=np.zeros(m),
        tp_factor=theta,
    )


def measure_dof_slope(points) -> float:
    """Least-squares slope of ESR against log2(P) over (snr_db, esr) pairs."""
    pts = [(float(s), float(r)) for s, r in points]
    if len(pts) < 2:
        raise ValueError("need at least two points to fit a slope")
    x = np.array([s for s, _ in pts]) * (np.log2(10.0) / 10.0)
    y = np.array([r for _, r in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def simulate_low_complexity_esr(
    config: SystemConfig,
    scheme: str,
    alloc: DofPowerAllocation,
    snr_db_list,
    t_uses: int,
    seed: int = 0,
) -> list[tuple[float, float]]:
    """Alpha-user ESR of the closed-form precoders across an SNR sweep.

    Rates are evaluated on the true channels; the common stream is counted
    at the worst alpha-user, scaled by theta under TP.
    """
    out = []
    for i, snr in enumerate(snr_db_list):
        cfg = replace(config, snr_db=float(snr))
        r_c = np.zeros((t_uses, cfg.M))
        r_p = np.zeros((t_uses, cfg.M))
        for t in range(t_uses):
            rlz = draw_channel(cfg, derive_seed(seed, i, t))
            pre = low_complexity_precoders(rlz, cfg, scheme, alloc)
            for k in cfg.k_alpha:
                h = rlz.h_true[:, k]
                r_c[t, k] = np.log2(1.0 + sinr_common(h, pre))
                r_p[t, k] = np.log2(1.0 + sinr_private(h, pre, k))
        theta = alloc.theta if scheme == "tp" else 1.0
        esr = theta * (np.min(np.mean(r_c, axis=0)) + np.sum(np.mean(r_p, axis=0)))
        out.append((float(snr), float(esr)))
    return out
