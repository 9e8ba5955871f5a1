"""SINR expressions, sample-average rates and rate aggregation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsma.channel import ChannelSampleSet, draw_channel, draw_conditional_samples
from rsma.config import SystemConfig
from rsma.ratemodel import (
    STREAM_COMMON,
    STREAM_PRIVATE,
    STREAM_ZERO,
    PrecoderSet,
    RateReport,
    average_rate,
    ergodic_sum_rate,
    sinr_common,
    sinr_private,
    sinr_zero_pp,
    snr_zero_tp,
    stream_sinr_samples,
    user_rates_pp,
    user_rates_tp,
)


def _pre(m, p0=None, pc=None, pp=None, **kw):
    z = np.zeros(m, dtype=complex)
    return PrecoderSet(
        p_zero=z if p0 is None else p0,
        p_common=z if pc is None else pc,
        p_private=np.zeros((m, m), dtype=complex) if pp is None else pp,
        **kw,
    )


def _sample_set(estimate, samples):
    return ChannelSampleSet(estimate=np.asarray(estimate, dtype=complex),
                            samples=np.asarray(samples, dtype=complex))


def _constant_samples(h_cols, n=3):
    """A sample set whose every draw equals the given (M, K) matrix."""
    est = np.asarray(h_cols, dtype=complex)
    return _sample_set(est, np.repeat(est[None, :, :], n, axis=0))


# ---------------------------------------------------------------------------
# scalar SINRs, hand-evaluated


def test_sinr_common_hand_value():
    # gains 3 (common) over 1 (private) + 1 (noise): 3/2
    pre = _pre(1, pc=[np.sqrt(3.0)], pp=[[1.0]])
    assert sinr_common(np.array([1.0 + 0j]), pre) == pytest.approx(1.5, abs=1e-12)


def test_sinr_private_hand_values():
    pre = _pre(2, pp=np.array([[np.sqrt(2.0), 1.0], [0.0, 0.0]], dtype=complex))
    h = np.array([1.0 + 0j, 0.0 + 0j])
    # user 0: own 2, interference 1 -> 2/2; user 1: own 1, interference 2 -> 1/3
    assert sinr_private(h, pre, 0) == pytest.approx(1.0, abs=1e-12)
    assert sinr_private(h, pre, 1) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_sinr_zero_pp_hand_value():
    # s_0 sees every other layer as interference: 5 / (3 + 1 + 1)
    pre = _pre(1, p0=[np.sqrt(5.0)], pc=[np.sqrt(3.0)], pp=[[1.0]])
    assert sinr_zero_pp(np.array([1.0 + 0j]), pre) == pytest.approx(1.0, abs=1e-12)


def test_snr_zero_tp_hand_value():
    h = np.array([1.0 + 0j, 1.0j])
    p0 = np.array([1.0 + 0j, 2.0j])
    # h^H p0 = 1 + 2 = 3
    assert snr_zero_tp(h, p0) == pytest.approx(9.0, abs=1e-12)


def test_zf_private_precoders_leave_common_interference_free():
    h = np.array([1.0 + 0j, 1.0j]) / np.sqrt(2.0)
    p_orth = np.array([1.0 + 0j, 1.0j * -1.0]) * 2.0  # h^H p_orth = 0
    assert abs(np.vdot(h, p_orth)) < 1e-15
    pre = _pre(2, pc=h * 4.0, pp=np.stack([p_orth, p_orth], axis=1))
    assert sinr_common(h, pre) == pytest.approx(16.0, abs=1e-10)


# ---------------------------------------------------------------------------
# vectorized per-sample SINRs and sample-average rates


def test_stream_sinr_samples_matches_scalar_path():
    rng = np.random.default_rng(7)
    m, k, n = 2, 3, 17
    smp = (rng.standard_normal((n, m, k)) + 1j * rng.standard_normal((n, m, k))) / np.sqrt(2)
    samples = _sample_set(smp[0], smp)
    pre = _pre(
        m,
        p0=rng.standard_normal(m) + 1j * rng.standard_normal(m),
        pc=rng.standard_normal(m) + 1j * rng.standard_normal(m),
        pp=rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)),
    )
    for user in range(k):
        per_h = samples.user_samples(user)
        got_c = stream_sinr_samples(samples, pre, STREAM_COMMON, user)
        got_0pp = stream_sinr_samples(samples, pre, STREAM_ZERO, user, scheme="pp")
        got_0tp = stream_sinr_samples(samples, pre, STREAM_ZERO, user, scheme="tp")
        for i in range(n):
            assert got_c[i] == pytest.approx(sinr_common(per_h[i], pre), rel=1e-12)
            assert got_0pp[i] == pytest.approx(sinr_zero_pp(per_h[i], pre), rel=1e-12)
            assert got_0tp[i] == pytest.approx(snr_zero_tp(per_h[i], pre.p_zero), rel=1e-12)
        if user < m:
            got_p = stream_sinr_samples(samples, pre, STREAM_PRIVATE, user)
            for i in range(n):
                assert got_p[i] == pytest.approx(sinr_private(per_h[i], pre, user), rel=1e-12)


def test_stream_sinr_samples_rejects_unknown_stream():
    samples = _constant_samples(np.eye(2, 3))
    with pytest.raises(ValueError):
        stream_sinr_samples(samples, _pre(2), "broadcast", 0)


def test_average_rate_matches_independent_loop_oracle():
    """Re-derive every SINR from raw inner products, no shared helpers."""
    rng = np.random.default_rng(21)
    m, k, n = 3, 4, 11
    smp = (rng.standard_normal((n, m, k)) + 1j * rng.standard_normal((n, m, k))) / np.sqrt(2)
    samples = _sample_set(smp[0], smp)
    pre = _pre(
        m,
        p0=rng.standard_normal(m) + 1j * rng.standard_normal(m),
        pc=rng.standard_normal(m) + 1j * rng.standard_normal(m),
        pp=rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)),
    )

    def oracle(stream, user, scheme="pp"):
        acc = 0.0
        for i in range(n):
            h = smp[i, :, user]
            gp = [abs(np.conj(h) @ pre.p_private[:, j]) ** 2 for j in range(m)]
            gc = abs(np.conj(h) @ pre.p_common) ** 2
            g0 = abs(np.conj(h) @ pre.p_zero) ** 2
            if stream == "private":
                s = gp[user] / (sum(gp) - gp[user] + 1.0)
            elif stream == "common":
                s = gc / (sum(gp) + 1.0)
            elif scheme == "tp":
                s = g0
            else:
                s = g0 / (gc + sum(gp) + 1.0)
            acc += np.log2(1.0 + s)
        return acc / n

    for user in range(k):
        assert average_rate(samples, pre, STREAM_COMMON, user) == pytest.approx(
            oracle("common", user), rel=1e-12)
        assert average_rate(samples, pre, STREAM_ZERO, user, scheme="pp") == pytest.approx(
            oracle("zero", user, "pp"), rel=1e-12)
        assert average_rate(samples, pre, STREAM_ZERO, user, scheme="tp") == pytest.approx(
            oracle("zero", user, "tp"), rel=1e-12)
    for user in range(m):
        assert average_rate(samples, pre, STREAM_PRIVATE, user) == pytest.approx(
            oracle("private", user), rel=1e-12)


def test_rates_use_log_base_two():
    # constant per-sample SINR of 3 must average to exactly 2 bits
    h = np.array([[np.sqrt(3.0)], [0.0]], dtype=complex)
    samples = _constant_samples(np.repeat(h, 3, axis=1)[:, :3], n=4)
    pre = _pre(2, p0=[1.0, 0.0])
    assert average_rate(samples, pre, STREAM_ZERO, 0, scheme="tp") == pytest.approx(
        2.0, abs=1e-12)


def test_sample_average_rate_converges_with_sample_count():
    """Nested-mean consistency: the n- and N-sample averages agree to ~3 SE."""
    config = SystemConfig(M=2, K=3, alpha=0.5, snr_db=20.0)
    real = draw_channel(config, seed=5)
    samples = draw_conditional_samples(real, config, n_samples=20000, seed=9)
    rng = np.random.default_rng(3)
    pre = _pre(
        2,
        p0=rng.standard_normal(2) + 1j * rng.standard_normal(2),
        pc=rng.standard_normal(2) + 1j * rng.standard_normal(2),
        pp=rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)),
    )
    n_small = 2000
    small = _sample_set(samples.estimate, samples.samples[:n_small])
    for user, stream in [(0, STREAM_PRIVATE), (1, STREAM_COMMON), (2, STREAM_ZERO)]:
        per = np.log2(1.0 + stream_sinr_samples(samples, pre, stream, user))
        # the small set is a prefix of the big one, so the difference of the
        # two means has variance sigma^2 (1/n - 1/N)
        se = float(np.std(per, ddof=1)) * np.sqrt(1.0 / n_small - 1.0 / len(per))
        diff = abs(average_rate(small, pre, stream, user)
                   - average_rate(samples, pre, stream, user))
        assert diff <= 3.0 * se + 1e-12


# ---------------------------------------------------------------------------
# per-user achievable rates


def _pp_setup():
    config = SystemConfig(M=2, K=4, alpha=0.6, snr_db=15.0, theta_zero=(0.7, 0.3))
    rng = np.random.default_rng(11)
    n = 25
    smp = (rng.standard_normal((n, 2, 4)) + 1j * rng.standard_normal((n, 2, 4)))
    samples = _sample_set(smp[0], smp)
    pre = _pre(
        2,
        p0=rng.standard_normal(2) + 1j * rng.standard_normal(2),
        pc=2.0 * (rng.standard_normal(2) + 1j * rng.standard_normal(2)),
        pp=rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)),
        common_split=None,
    )
    return config, samples, pre


def test_user_rates_pp_assembles_layer_rates():
    config, samples, pre = _pp_setup()
    r_c = [average_rate(samples, pre, STREAM_COMMON, k) for k in range(2)]
    split = np.array([min(r_c) * 0.4, min(r_c) * 0.5])
    pre = PrecoderSet(pre.p_zero, pre.p_common, pre.p_private, common_split=split)
    rep = user_rates_pp(samples, pre, config)

    assert rep.common_rate == pytest.approx(min(r_c), rel=1e-12)
    r0 = [average_rate(samples, pre, STREAM_ZERO, k, scheme="pp") for k in range(4)]
    for k in range(2):
        r_p = average_rate(samples, pre, STREAM_PRIVATE, k)
        assert rep.per_user_rate[k] == pytest.approx(split[k] + r_p, rel=1e-12)
    for j, k in enumerate(range(2, 4)):
        expect = config.theta_zero[j] * min(min(r0[:2]), r0[k])
        assert rep.per_user_rate[k] == pytest.approx(expect, rel=1e-12)
    assert rep.sum_rate_alpha == pytest.approx(float(np.sum(rep.per_user_rate[:2])), rel=1e-12)


def test_user_rates_pp_zero_user_limited_by_weakest_decoder():
    """An alpha-user that cannot decode s_0 caps every 0-user's rate."""
    config = SystemConfig(M=2, K=3, alpha=0.5, snr_db=20.0)
    # user 0 drowns s_0 in private interference; user 2 hears s_0 cleanly
    est = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]], dtype=complex)
    samples = _constant_samples(est, n=2)
    pre = _pre(2, p0=[3.0, 3.0], pc=[0.0, 0.0], pp=np.array([[30.0, 0.0], [0.0, 0.1]]))
    rep = user_rates_pp(samples, pre, config)
    r0_user0 = average_rate(samples, pre, STREAM_ZERO, 0, scheme="pp")
    r0_own = average_rate(samples, pre, STREAM_ZERO, 2, scheme="pp")
    assert r0_user0 < r0_own
    assert rep.per_user_rate[2] == pytest.approx(r0_user0, rel=1e-12)


def test_user_rates_tp_scales_phases():
    config = SystemConfig(M=2, K=4, alpha=0.6, snr_db=15.0, theta_zero=(0.7, 0.3))
    _, samples, base = _pp_setup()
    r_c = [average_rate(samples, base, STREAM_COMMON, k) for k in range(2)]
    split = np.array([min(r_c), 0.0])
    theta = 0.6
    pre = PrecoderSet(base.p_zero, base.p_common, base.p_private,
                      common_split=split, tp_factor=theta)
    rep = user_rates_tp(samples, pre, config)

    for k in range(2):
        r_p = average_rate(samples, pre, STREAM_PRIVATE, k)
        assert rep.per_user_rate[k] == pytest.approx(theta * (split[k] + r_p), rel=1e-12)
    for j, k in enumerate(range(2, 4)):
        r0 = average_rate(samples, pre, STREAM_ZERO, k, scheme="tp")
        expect = config.theta_zero[j] * (1.0 - theta) * r0
        assert rep.per_user_rate[k] == pytest.approx(expect, rel=1e-12)


def test_user_rates_tp_full_alpha_share_mutes_zero_users():
    config = SystemConfig(M=2, K=3)
    _, samples, base = _pp_setup()
    smp3 = samples.samples[:, :, :3]
    samples3 = _sample_set(smp3[0], smp3)
    pre = PrecoderSet(base.p_zero, base.p_common, base.p_private, tp_factor=1.0)
    rep = user_rates_tp(samples3, pre, config)
    assert rep.per_user_rate[2] == 0.0


def test_common_split_exceeding_common_rate_raises():
    config, samples, pre = _pp_setup()
    r_min = min(average_rate(samples, pre, STREAM_COMMON, k) for k in range(2))
    bad = PrecoderSet(pre.p_zero, pre.p_common, pre.p_private,
                      common_split=[r_min, 1.0])
    with pytest.raises(ValueError, match="common"):
        user_rates_pp(samples, bad, config)
    with pytest.raises(ValueError, match="common"):
        user_rates_tp(samples, bad, config)


def test_common_split_numeric_excess_is_rescaled_not_rejected():
    config, samples, pre = _pp_setup()
    r_min = min(average_rate(samples, pre, STREAM_COMMON, k) for k in range(2))
    near = PrecoderSet(pre.p_zero, pre.p_common, pre.p_private,
                       common_split=[r_min * 0.5, r_min * 0.5 + 1e-8])
    rep = user_rates_pp(samples, near, config)
    r_p = [average_rate(samples, near, STREAM_PRIVATE, k) for k in range(2)]
    assert float(np.sum(rep.per_user_rate[:2])) == pytest.approx(
        r_min + sum(r_p), rel=1e-9)


# ---------------------------------------------------------------------------
# container validation and aggregation


def test_precoder_set_validation():
    with pytest.raises(ValueError, match="dimensions"):
        PrecoderSet(np.zeros(2), np.zeros(3), np.zeros((2, 2)))
    with pytest.raises(ValueError, match="dimensions"):
        PrecoderSet(np.zeros(2), np.zeros(2), np.zeros((2, 3)))
    with pytest.raises(ValueError, match="common_split"):
        PrecoderSet(np.zeros(2), np.zeros(2), np.zeros((2, 2)), common_split=[0.1])
    with pytest.raises(ValueError, match="nonnegative"):
        PrecoderSet(np.zeros(2), np.zeros(2), np.zeros((2, 2)), common_split=[-0.5, 0.0])
    with pytest.raises(ValueError, match="tp_factor"):
        PrecoderSet(np.zeros(2), np.zeros(2), np.zeros((2, 2)), tp_factor=1.5)


def test_precoder_power_accounting():
    pre = _pre(2, p0=[1.0, 1.0], pc=[2.0, 0.0], pp=np.array([[1.0, 0.0], [1.0, 3.0]]))
    assert pre.power_zero() == pytest.approx(2.0)
    assert pre.power_common() == pytest.approx(4.0)
    assert pre.power_private_total() == pytest.approx(11.0)
    assert pre.total_power_pp() == pytest.approx(17.0)
    assert pre.power_alpha_phase() == pytest.approx(15.0)


def test_ergodic_sum_rate_averages_reports():
    reports = [
        RateReport(per_user_rate=[1.0, 2.0, 3.0], common_rate=0.5, sum_rate_alpha=3.0),
        RateReport(per_user_rate=[3.0, 2.0, 1.0], common_rate=0.5, sum_rate_alpha=5.0),
    ]
    esr, per_user = ergodic_sum_rate(reports)
    assert esr == pytest.approx(4.0)
    np.testing.assert_allclose(per_user, [2.0, 2.0, 2.0])
    with pytest.raises(ValueError):
        ergodic_sum_rate([])


# ---------------------------------------------------------------------------
# order properties


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(1.01, 50.0), seed=st.integers(0, 2**16))
def test_scaling_own_private_power_raises_own_sinr(lam, seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    pp = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    pre = _pre(2, pp=pp)
    boosted = pp.copy()
    boosted[:, 0] *= np.sqrt(lam)
    pre_b = _pre(2, pp=boosted)
    if abs(np.vdot(h, pp[:, 0])) ** 2 < 1e-12:
        return
    assert sinr_private(h, pre_b, 0) > sinr_private(h, pre, 0)


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(1.01, 50.0), seed=st.integers(0, 2**16))
def test_scaling_interference_lowers_common_sinr(lam, seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    pc = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    pp = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    if float(np.sum(np.abs(np.conj(h) @ pp) ** 2)) < 1e-12:
        return
    pre = _pre(2, pc=pc, pp=pp)
    pre_b = _pre(2, pc=pc, pp=pp * np.sqrt(lam))
    assert sinr_common(h, pre_b) < sinr_common(h, pre)
