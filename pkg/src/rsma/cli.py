"""Command-line front end.

Subcommands: `dof` (region report), `optimize` (one channel use, one
strategy), `sweep` (Monte Carlo strategy comparison), `selftest` (fast
sanity checks). Configuration comes from an optional JSON file with CLI
flags taking precedence. Exit codes: 0 success, 2 infeasible-dominated
output, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .channel import draw_channel, rng_from
from .config import SystemConfig
from . import dof as dof_mod
from .harness import (
    STRATEGIES,
    ExperimentSpec,
    emit_results,
    run_dof_report,
    run_experiment,
)
from .wmmse import rate_wmmse_check, solve_pp_asr, solve_sdma_variant, solve_tp_asr
from .ratemodel import PrecoderSet


def _parse_list(text, cast=float):
    return tuple(cast(x) for x in text.replace(";", ",").split(",") if x.strip())


def _load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _system_config(ns, file_cfg: dict) -> SystemConfig:
    def pick(flag, key, default):
        v = getattr(ns, flag, None)
        if v is not None:
            return v
        return file_cfg.get(key, default)

    return SystemConfig(
        M=int(pick("m", "m", 2)),
        K=int(pick("k", "k", 3)),
        alpha=float(pick("alpha", "alpha", 0.5)),
        snr_db=float(pick("snr_single", "snr_db", 20.0)),
        qos_alpha=float(pick("qos_alpha", "qos_alpha", 0.0)),
        qos_zero=float(pick("qos_zero", "qos_zero", 0.0)),
        zero_user_snr_offset_db=float(pick("offset", "zero_user_snr_offset_db", 0.0)),
    )


def _add_system_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--m", type=int, help="transmit antennas")
    p.add_argument("--k", type=int, help="total users (K > M)")
    p.add_argument("--alpha", type=float, help="CSIT quality exponent in [0,1]")
    p.add_argument("--qos-alpha", dest="qos_alpha", type=float, help="alpha-user QoS, bits/s/Hz")
    p.add_argument("--qos-zero", dest="qos_zero", type=float, help="0-user QoS, bits/s/Hz")
    p.add_argument("--offset", type=float, help="0-user long-term SNR offset, dB")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rsma", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_dof = sub.add_parser("dof", help="DoF region and gain report")
    _add_system_flags(p_dof)
    p_dof.add_argument("--points", help="membership checks, e.g. '0.5,0.5,0.5;1,0.5,0'")
    p_dof.add_argument("--out", help="write report here instead of stdout")

    p_opt = sub.add_parser("optimize", help="optimize one channel use")
    _add_system_flags(p_opt)
    p_opt.add_argument("--snr", dest="snr_single", type=float, help="SNR in dB")
    p_opt.add_argument("--strategy", choices=STRATEGIES, default="PP-RSMA")
    p_opt.add_argument("--n", type=int, default=None, help="conditional samples N")
    p_opt.add_argument("--epsilon", type=float, default=1e-4)

    p_sw = sub.add_parser("sweep", help="Monte Carlo strategy sweep")
    _add_system_flags(p_sw)
    p_sw.add_argument("--snr", help="comma list of SNR points in dB")
    p_sw.add_argument("--strategies", help="comma list from " + ",".join(STRATEGIES))
    p_sw.add_argument("--t", type=int, default=None, help="channel uses per point")
    p_sw.add_argument("--n", type=int, default=None, help="conditional samples N")
    p_sw.add_argument("--alpha-sweep", dest="alpha_sweep", help="comma list of alpha points")
    p_sw.add_argument("--qos-alpha-by-snr", dest="qos_alpha_by_snr", help="comma list")
    p_sw.add_argument("--qos-zero-by-snr", dest="qos_zero_by_snr", help="comma list")
    p_sw.add_argument("--workers", type=int, default=None)
    p_sw.add_argument("--out", help="output path (default results.<format>)")
    p_sw.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sw.add_argument(
        "--paper-scale", action="store_true",
        help="T=100, N=1000 instead of the desk-scale T=10, N=100",
    )

    sub.add_parser("selftest", help="fast internal checks")
    return ap


def _cmd_dof(ns) -> int:
    file_cfg = _load_config_file(ns.config) if ns.config else {}
    cfg = _system_config(ns, file_cfg)
    grids = {}
    if ns.points:
        grids["points"] = [
            tuple(float(x) for x in chunk.split(","))
            for chunk in ns.points.split(";")
            if chunk.strip()
        ]
    text = run_dof_report(cfg, grids)
    if ns.out:
        with open(ns.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_optimize(ns) -> int:
    file_cfg = _load_config_file(ns.config) if ns.config else {}
    cfg = _system_config(ns, file_cfg)
    seed = ns.seed if ns.seed is not None else int(file_cfg.get("seed", 0))
    n = ns.n if ns.n is not None else int(file_cfg.get("n_samples", 100))
    realization = draw_channel(cfg, seed)
    if ns.strategy == "PP-RSMA":
        res = solve_pp_asr(realization, cfg, n, seed, ns.epsilon)
    elif ns.strategy == "TP-RSMA":
        res = solve_tp_asr(realization, cfg, n, seed, ns.epsilon)
    else:
        part = "pp" if ns.strategy == "PP-SDMA" else "tp"
        res = solve_sdma_variant(realization, cfg, n, seed, ns.epsilon, partitioning=part)
    print(f"strategy {res.strategy}")
    print(f"status {res.status}")
    if res.status != "optimal":
        return 2
    print(f"asr {res.asr:.6f}")
    if res.theta is not None:
        print(f"theta {res.theta:.4f}")
    rates = " ".join(f"{r:.6f}" for r in res.report.per_user_rate)
    print(f"per_user_rates {rates}")
    print(f"ao_iterations {res.iterations}")
    return 0


def _cmd_sweep(ns) -> int:
    file_cfg = _load_config_file(ns.config) if ns.config else {}
    base = _system_config(ns, file_cfg)

    def pick(flag, key, default):
        v = getattr(ns, flag, None)
        if v is not None:
            return v
        return file_cfg.get(key, default)

    snr = _parse_list(ns.snr) if ns.snr else tuple(file_cfg.get("snr_sweep_db", (20.0,)))
    strategies = (
        _parse_list(ns.strategies, str) if ns.strategies
        else tuple(file_cfg.get("strategies", STRATEGIES))
    )
    t = int(pick("t", "t_channel_uses", 10))
    n = int(pick("n", "n_samples", 100))
    if ns.paper_scale:
        t, n = 100, 1000
    spec = ExperimentSpec(
        base=base,
        snr_sweep_db=snr,
        qos_alpha_by_snr=_parse_list(ns.qos_alpha_by_snr) if ns.qos_alpha_by_snr
        else (tuple(file_cfg["qos_alpha_by_snr"]) if "qos_alpha_by_snr" in file_cfg else None),
        qos_zero_by_snr=_parse_list(ns.qos_zero_by_snr) if ns.qos_zero_by_snr
        else (tuple(file_cfg["qos_zero_by_snr"]) if "qos_zero_by_snr" in file_cfg else None),
        strategies=strategies,
        t_channel_uses=t,
        n_samples=n,
        seed=ns.seed if ns.seed is not None else int(file_cfg.get("seed", 0)),
        alpha_sweep=_parse_list(ns.alpha_sweep) if ns.alpha_sweep
        else (tuple(file_cfg["alpha_sweep"]) if "alpha_sweep" in file_cfg else None),
        workers=int(pick("workers", "workers", 1)),
    )
    result = run_experiment(spec)
    out = ns.out or f"results.{ns.format}"
    emit_results(result, ns.format, out)
    for r in result.rows:
        flag = " UNRELIABLE" if r.unreliable else ""
        print(
            f"{r.strategy} snr={r.snr_db:g} alpha={r.alpha:g} esr={r.esr:.4f} "
            f"feasible={r.feasible_uses}/{r.total_uses}{flag}"
        )
    print(f"wrote {out}")
    return 2 if result.any_unreliable else 0


def _cmd_selftest(_ns) -> int:
    checks = []

    cfg = SystemConfig(M=2, K=3, alpha=0.5, snr_db=20.0)
    region = dof_mod.dof_region(cfg)
    inside = dof_mod.region_contains(region, np.array([0.5, 0.5, 0.5])).inside
    checks.append(("dof region membership", inside))

    rng = rng_from(7, 0x5E)
    ok = True
    for _ in range(50):
        h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        pre = PrecoderSet(
            p_zero=rng.standard_normal(2) + 1j * rng.standard_normal(2),
            p_common=rng.standard_normal(2) + 1j * rng.standard_normal(2),
            p_private=rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)),
        )
        for stream, user in (("private", 0), ("common", 1), ("zero", 0)):
            try:
                rate_wmmse_check(h, pre, stream, user)
            except AssertionError:
                ok = False
    checks.append(("rate-WMMSE identity", ok))

    realization = draw_channel(cfg, seed=3)
    res1 = solve_pp_asr(realization, cfg, n_samples=20, seed=3, epsilon=1e-3)
    res2 = solve_pp_asr(realization, cfg, n_samples=20, seed=3, epsilon=1e-3)
    checks.append(("deterministic pp solve", res1.status == "optimal" and res1.asr == res2.asr))

    failed = False
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failed = failed or not ok
    return 1 if failed else 0


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.command == "dof":
            return _cmd_dof(ns)
        if ns.command == "optimize":
            return _cmd_optimize(ns)
        if ns.command == "sweep":
            return _cmd_sweep(ns)
        if ns.command == "selftest":
            return _cmd_selftest(ns)
        raise ValueError(f"unknown command {ns.command!r}")
    except BrokenPipeError:
        return 1
    except Exception as exc:  # CLI boundary: report, don't traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
