"""Acceptance gate: eight end-to-end criteria, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
Criteria 4, 6 and 8 are Monte Carlo heavy (minutes, not hours); tolerances
and runtime budgets are pinned in each test.
"""

import time

import numpy as np

from rsma.channel import derive_seed, draw_channel, draw_conditional_samples, rng_from
from rsma.config import SystemConfig
from rsma.dof import (
    DofPowerAllocation,
    dof_pp,
    dof_region,
    dof_tp,
    measure_dof_slope,
    region_contains,
    simulate_low_complexity_esr,
)
from rsma.harness import bootstrap_margin, run_strategies_on_use
from rsma.ratemodel import PrecoderSet
from rsma.wmmse import rate_wmmse_check, solve_pp_asr


def _verdict(name: str, ok: bool, detail: str):
    print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")
    assert ok, f"{name}: {detail}"


def test_criterion_1_dof_region_points():
    """Region holds the three reference DoF points, each with a tight face."""
    t0 = time.perf_counter()
    region = dof_region(SystemConfig(M=2, K=3, alpha=0.5))
    points = {
        "A": (0.5, 0.5, 0.5),
        "B": (1.0, 0.5, 0.0),
        "C": (0.5, 1.0, 0.0),
    }
    ok = True
    details = []
    for name, pt in points.items():
        rep = region_contains(region, pt, tol=1e-12)
        tight = bool(np.any(np.abs(rep.slacks) <= 1e-12))
        ok = ok and rep.inside and tight
        details.append(f"{name} inside={rep.inside} tight={tight}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1.0
    _verdict("criterion 1: DoF region membership",
             ok, "; ".join(details) + f"; {elapsed:.3f}s < 1s")


def test_criterion_2_pp_dominates_tp_dof():
    """Alpha-user DoF of PP >= TP on the 0.05 grid, strict in the interior."""
    t0 = time.perf_counter()
    cfg0 = SystemConfig(M=2, K=3, alpha=0.5)
    grid = np.round(np.arange(0.0, 1.0 + 1e-9, 0.05), 10)
    worst_gap = np.inf
    min_interior = np.inf
    ok = True
    for alpha in grid:
        cfg = SystemConfig(M=2, K=3, alpha=float(alpha))
        for theta in grid:
            gap = float(dof_pp(cfg, beta=float(theta))[0] - dof_tp(cfg, float(theta))[0])
            worst_gap = min(worst_gap, gap)
            ok = ok and gap >= -1e-15
            if 0.0 < theta < 1.0 and 0.0 < alpha < 1.0:
                min_interior = min(min_interior, gap)
    ok = ok and min_interior >= 1e-6
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1.0
    _verdict("criterion 2: PP-over-TP DoF dominance", ok,
             f"min gap {worst_gap:.2e}, min interior gap {min_interior:.2e}, "
             f"{elapsed:.3f}s < 1s")


def test_criterion_3_rate_wmmse_identity():
    """|xi_mmse - (1 - R)| <= 1e-9 over 1000 random instances."""
    t0 = time.perf_counter()
    rng = rng_from(42, 0xAC)
    streams = [("private", 0, "pp"), ("private", 1, "pp"), ("common", 0, "pp"),
               ("common", 1, "pp"), ("zero", 0, "pp"), ("zero", 2, "pp"),
               ("zero", 1, "tp"), ("zero", 2, "tp")]
    worst = 0.0
    for i in range(1000):
        h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        scale = float(rng.uniform(0.2, 4.0))
        pre = PrecoderSet(
            p_zero=scale * (rng.standard_normal(2) + 1j * rng.standard_normal(2)),
            p_common=scale * (rng.standard_normal(2) + 1j * rng.standard_normal(2)),
            p_private=scale * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))),
        )
        stream, user, scheme = streams[i % len(streams)]
        xi, one_minus_r = rate_wmmse_check(h, pre, stream, user, scheme)
        worst = max(worst, abs(xi - one_minus_r))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    _verdict("criterion 3: rate-WMMSE identity", ok,
             f"worst |xi-(1-R)| = {worst:.2e} <= 1e-9 over 1000 instances, "
             f"{elapsed:.1f}s < 10s")


def test_criterion_4_ao_monotone_convergence():
    """50 seeded PP-RSMA runs: no ASR drop beyond 1e-8, all converge."""
    t0 = time.perf_counter()
    cfg = SystemConfig(M=2, K=3, alpha=0.5, snr_db=20.0)
    worst_drop = 0.0
    max_iters = 0
    all_converged = True
    for seed in range(50):
        rlz = draw_channel(cfg, seed)
        out = solve_pp_asr(rlz, cfg, n_samples=100, seed=seed,
                           epsilon=1e-4, max_ao_iter=500)
        assert out.status == "optimal"
        asrs = [out.trace.initial_asr] + [a for a, _ in out.trace.iterations]
        drops = [max(0.0, a - b) for a, b in zip(asrs, asrs[1:])]
        worst_drop = max(worst_drop, max(drops, default=0.0))
        all_converged = all_converged and out.trace.converged
        max_iters = max(max_iters, out.iterations)
    elapsed = time.perf_counter() - t0
    ok = worst_drop <= 1e-8 and all_converged and max_iters <= 500 and elapsed < 1800.0
    _verdict("criterion 4: AO monotonicity and convergence", ok,
             f"worst per-iteration drop {worst_drop:.2e} <= 1e-8, max iterations "
             f"{max_iters} <= 500, all converged (eps=1e-4), {elapsed:.0f}s < 1800s")


def test_criterion_5_tiny_instance_global_check():
    """M=1, one alpha-user, one 0-user, N=1: AO matches a brute-force grid."""
    t0 = time.perf_counter()
    cfg = SystemConfig(M=1, K=2, alpha=0.5, snr_db=10.0, qos_alpha=0.2, qos_zero=0.3)
    p = cfg.snr_linear
    rlz = draw_channel(cfg, seed=21)
    samples = draw_conditional_samples(rlz, cfg, n_samples=1, seed=21)
    ga = float(np.abs(samples.user_samples(0)[0, 0]) ** 2)
    g0 = float(np.abs(samples.user_samples(1)[0, 0]) ** 2)

    # independent brute force, resolution 0.01 * P over the power splits;
    # with one alpha-user the optimal rate split hands the whole common
    # rate to it, so only the powers need gridding
    step = 0.01 * p
    best = -np.inf
    q_grid = np.arange(0.0, p + 1e-12, step)
    for q0 in q_grid:
        for qc in q_grid:
            qp = p - q0 - qc
            if qp < -1e-12:
                break
            qp = max(qp, 0.0)
            r_p = np.log2(1.0 + qp * ga)
            r_c = np.log2(1.0 + qc * ga / (qp * ga + 1.0))
            r0_a = np.log2(1.0 + q0 * ga / ((qc + qp) * ga + 1.0))
            r0_0 = np.log2(1.0 + q0 * g0 / ((qc + qp) * g0 + 1.0))
            if min(r0_a, r0_0) < cfg.qos_zero or r_c + r_p < cfg.qos_alpha:
                continue
            best = max(best, r_c + r_p)

    out = solve_pp_asr(rlz, cfg, samples=samples, seed=21, epsilon=1e-6)
    gap = abs(out.asr - best)
    elapsed = time.perf_counter() - t0
    ok = out.status == "optimal" and gap <= 1e-2 and elapsed < 300.0
    _verdict("criterion 5: tiny-instance global check", ok,
             f"AO {out.asr:.4f} vs grid {best:.4f}, |gap| = {gap:.2e} <= 1e-2, "
             f"{elapsed:.0f}s < 300s")


def test_criterion_6_feasible_set_dominance():
    """100 channels at alpha=0.2, SNR 20: RSMA never below its SDMA sibling."""
    t0 = time.perf_counter()
    cfg = SystemConfig(M=2, K=3, alpha=0.2, snr_db=20.0)
    worst_pp = np.inf
    worst_tp = np.inf
    best_gain = -np.inf
    for t in range(100):
        seed = derive_seed(6, t)
        rlz = draw_channel(cfg, seed)
        outs = run_strategies_on_use(rlz, cfg, ("PP-SDMA", "PP-RSMA", "TP-SDMA", "TP-RSMA"),
                                     n_samples=64, seed=seed)
        assert all(o.status == "optimal" for o in outs.values())
        pp_gap = outs["PP-RSMA"].asr - outs["PP-SDMA"].asr
        tp_gap = outs["TP-RSMA"].asr - outs["TP-SDMA"].asr
        worst_pp = min(worst_pp, pp_gap)
        worst_tp = min(worst_tp, tp_gap)
        best_gain = max(best_gain, pp_gap)
    elapsed = time.perf_counter() - t0
    ok = (worst_pp >= -1e-3 and worst_tp >= -1e-3 and best_gain > 0.05
          and elapsed < 7200.0)
    _verdict("criterion 6: feasible-set dominance", ok,
             f"min PP gap {worst_pp:.2e} >= -1e-3, min TP gap {worst_tp:.2e} >= -1e-3, "
             f"max PP gain {best_gain:.3f} > 0.05, {elapsed:.0f}s < 7200s")


def test_criterion_7_high_snr_slopes():
    """Closed-form precoders over 30-50 dB: measured ESR slopes match DoF."""
    t0 = time.perf_counter()
    cfg = SystemConfig(M=2, K=3, alpha=0.5)
    snrs = [30.0, 35.0, 40.0, 45.0, 50.0]
    alloc = DofPowerAllocation(beta=0.5, theta=0.5)
    tp_pts = simulate_low_complexity_esr(cfg, "tp", alloc, snrs, t_uses=200, seed=7)
    pp_pts = simulate_low_complexity_esr(cfg, "pp", alloc, snrs, t_uses=200, seed=7)
    tp_slope = measure_dof_slope(tp_pts)
    pp_slope = measure_dof_slope(pp_pts)
    # alpha-user sum-DoF predictions at theta = beta = 0.5: TP 0.75, PP 1.0
    elapsed = time.perf_counter() - t0
    ok = abs(tp_slope - 0.75) <= 0.15 and pp_slope > tp_slope and elapsed < 3600.0
    _verdict("criterion 7: high-SNR slope check", ok,
             f"TP slope {tp_slope:.3f} within 0.15 of 0.75, PP slope {pp_slope:.3f} "
             f"> TP, {elapsed:.0f}s < 3600s")


def test_criterion_8_strategy_orderings():
    """PP-RSMA beats the other three strategies at SNR 20 with a 10 dB
    0-user offset; paired margins positive at 95% bootstrap confidence."""
    t0 = time.perf_counter()
    cfg = SystemConfig(M=2, K=3, alpha=0.5, snr_db=20.0,
                       qos_alpha=0.4, qos_zero=0.3,
                       zero_user_snr_offset_db=10.0)
    strategies = ("PP-SDMA", "PP-RSMA", "TP-SDMA", "TP-RSMA")
    per_use = {s: [] for s in strategies}
    for t in range(20):
        seed = derive_seed(8, t)
        rlz = draw_channel(cfg, seed)
        outs = run_strategies_on_use(rlz, cfg, strategies, n_samples=200, seed=seed)
        assert all(o.status == "optimal" for o in outs.values())
        for s in strategies:
            per_use[s].append(outs[s].asr)

    ok = True
    details = []
    for rival in ("TP-RSMA", "PP-SDMA", "TP-SDMA"):
        deltas = np.array(per_use["PP-RSMA"]) - np.array(per_use[rival])
        mean, lo = bootstrap_margin(deltas, seed=8)
        ok = ok and lo > 0.0
        details.append(f"vs {rival}: mean {mean:.3f}, 95% lower {lo:.3f}")
    elapsed = time.perf_counter() - t0
    _verdict("criterion 8: strategy orderings", ok,
             "; ".join(details) + f"; T=20 N=200, {elapsed:.0f}s")
