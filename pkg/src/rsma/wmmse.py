"""Sample-average rate maximization via WMMSE reformulation.

The nonconvex average-sum-rate problem is tackled by alternating
optimization: with precoders fixed, MMSE equalizers and weights minimize the
average weighted MSE in closed form; with those fixed, the precoder update
is a convex QCQP. Minimizing the AWMSE over equalizer and weight gives
1 - R_hat for every stream, so QCQP-feasible iterates keep all rate
constraints satisfied and the incumbent safeguard below makes the ASR
sequence monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qcqp
from .channel import ChannelRealization, ChannelSampleSet, draw_conditional_samples, rng_from
from .config import SystemConfig, theta_zero_array
from .qcqp import QcqpProblem, QuadExpr
from .ratemodel import (
    PrecoderSet,
    RateReport,
    user_rates_pp,
    user_rates_tp,
)

_TAG_INIT = 0x33
_ADOPT_FEAS_TOL = 1e-6  # candidate precoders must be this close to QCQP-feasible
_RATE_FEAS_TOL = 1e-6  # rate-space feasibility used for the incumbent safeguard

# The precoder subproblem is posed in the natural-log rate scale: the MMSE
# weight 1 + SINR minimizes w*eps - ln(w) exactly, which is what makes every
# QCQP-feasible update satisfy the true rate constraints and the ASR ascend.
# Thresholds enter scaled by ln 2 and rate-split variables decode back to
# bits at the boundary.
_LN2 = float(np.log(2.0))

_SOLVER_OPTS = dict(feastol=1e-8, reltol=1e-7, abstol=1e-9, max_iter=100)


# ---------------------------------------------------------------------------
# scalar WMMSE quantities


def _stream_terms(h, pre: PrecoderSet, stream: str, user: int, scheme: str):
    """Receive power T_i, own gain |h^H p_i|^2 and h^H p_i for one stream."""
    hc = np.conj(np.asarray(h).reshape(-1))
    cp = hc @ pre.p_private
    gp = np.abs(cp) ** 2
    t_p = float(np.sum(gp)) + 1.0
    if stream == "private":
        return t_p, float(gp[user]), complex(cp[user])
    cc = complex(hc @ pre.p_common)
    gc = abs(cc) ** 2
    if stream == "common":
        return t_p + gc, gc, cc
    if stream == "zero":
        c0 = complex(hc @ pre.p_zero)
        g0 = abs(c0) ** 2
        if scheme == "tp":
            return g0 + 1.0, g0, c0
        return t_p + gc + g0, g0, c0
    raise ValueError(f"unknown stream {stream!r}")


def mse(h, pre: PrecoderSet, g: complex, stream: str, user: int, scheme: str = "pp") -> float:
    """MSE |g|^2 T - 2 Re{g h^H p_i} + 1 of one stream at equalizer g."""
    t, _, hp = _stream_terms(h, pre, stream, user, scheme)
    return float(abs(g) ** 2 * t - 2.0 * (g * hp).real + 1.0)


def mmse_equalizer(h, pre: PrecoderSet, stream: str, user: int, scheme: str = "pp") -> complex:
    """g = p_i^H h / T, the unconstrained MSE minimizer."""
    t, _, hp = _stream_terms(h, pre, stream, user, scheme)
    return complex(np.conj(hp) / t)


def mmse_weight(h, pre: PrecoderSet, stream: str, user: int, scheme: str = "pp") -> float:
    """w = T / (T - |h^H p_i|^2) = 1 + SINR; equals 1 when p_i = 0."""
    t, own, _ = _stream_terms(h, pre, stream, user, scheme)
    return float(t / (t - own))


def rate_wmmse_check(h, pre: PrecoderSet, stream: str, user: int, scheme: str = "pp"):
    """Return (xi_mmse, 1 - rate) and assert they agree to 1e-9.

    xi = w*eps - log2(w) at the MMSE equalizer and weight collapses to
    1 - log2(1 + SINR); this ties the rate model to the WMMSE machinery.
    """
    w = mmse_weight(h, pre, stream, user, scheme)
    g = mmse_equalizer(h, pre, stream, user, scheme)
    xi = w * mse(h, pre, g, stream, user, scheme) - np.log2(w)
    one_minus_rate = 1.0 - np.log2(w)
    if abs(xi - one_minus_rate) > 1e-9:
        raise AssertionError(
            f"rate-WMMSE identity violated: xi={xi!r}, 1-R={one_minus_rate!r}"
        )
    return float(xi), float(one_minus_rate)


# ---------------------------------------------------------------------------
# vectorized state over sample sets


@dataclass
class WmmseState:
    """Per-stream, per-user, per-sample equalizers and weights."""

    weights: dict
    equalizers: dict
    rates: dict  # sample-average rate per (stream, user), bits/s/Hz
    scheme: str

    def streams(self):
        return self.weights.keys()


def _precoder_from_blocks(m: int, blocks: dict) -> PrecoderSet:
    zero = blocks.get("zero")
    common = blocks.get("common")
    priv = blocks.get("private")
    return PrecoderSet(
        p_zero=zero if zero is not None else np.zeros(m, dtype=complex),
        p_common=common if common is not None else np.zeros(m, dtype=complex),
        p_private=priv if priv is not None else np.zeros((m, m), dtype=complex),
    )


def mmse_state(
    samples: ChannelSampleSet,
    pre: PrecoderSet,
    config: SystemConfig,
    scheme: str = "pp",
    use_common: bool = True,
    zero_layer: bool = True,
) -> WmmseState:
    """Closed-form MMSE update of all equalizers and weights.

    scheme "pp": streams are private/common per alpha-user plus the
    broadcast stream at every user. scheme "tp_alpha": only the alpha-phase
    streams. scheme "tp_zero": only the broadcast stream at the 0-users,
    interference-free.
    """
    weights, equalizers, rates = {}, {}, {}

    def put(key, t, own, hp):
        w = t / (t - own)
        weights[key] = w
        equalizers[key] = np.conj(hp) / t
        rates[key] = float(np.mean(np.log2(w)))

    if scheme in ("pp", "tp_alpha"):
        for k in config.k_alpha:
            hs = samples.user_samples(k).conj()
            cp = hs @ pre.p_private
            gp = np.abs(cp) ** 2
            t_p = np.sum(gp, axis=1) + 1.0
            put(("private", k), t_p, gp[:, k], cp[:, k])
            cc = hs @ pre.p_common
            gc = np.abs(cc) ** 2
            t_c = t_p + gc
            if use_common:
                put(("common", k), t_c, gc, cc)
            if scheme == "pp" and zero_layer:
                c0 = hs @ pre.p_zero
                g0 = np.abs(c0) ** 2
                put(("zero", k), t_c + g0, g0, c0)
    if scheme == "pp" and zero_layer:
        for k in config.k_zero:
            hs = samples.user_samples(k).conj()
            cp = hs @ pre.p_private
            gc = np.abs(hs @ pre.p_common) ** 2
            c0 = hs @ pre.p_zero
            g0 = np.abs(c0) ** 2
            t0 = np.sum(np.abs(cp) ** 2, axis=1) + gc + g0 + 1.0
            put(("zero", k), t0, g0, c0)
    if scheme == "tp_zero":
        for k in config.k_zero:
            hs = samples.user_samples(k).conj()
            c0 = hs @ pre.p_zero
            g0 = np.abs(c0) ** 2
            put(("zero", k), g0 + 1.0, g0, c0)
    return WmmseState(weights=weights, equalizers=equalizers, rates=rates, scheme=scheme)


def awmse(
    samples: ChannelSampleSet,
    pre: PrecoderSet,
    state: WmmseState,
    stream: str,
    user: int,
    scheme: str = "pp",
) -> float:
    """(1/N) sum_n [w_n eps_n - log2 w_n] at the state's equalizers/weights."""
    w = state.weights[(stream, user)]
    g = state.equalizers[(stream, user)]
    hs = samples.user_samples(user)
    vals = np.empty(samples.n_samples)
    for n in range(samples.n_samples):
        vals[n] = w[n] * mse(hs[n], pre, g[n], stream, user, scheme) - np.log2(w[n])
    return float(np.mean(vals))


@dataclass
class CoeffBundle:
    """Sample averages defining the precoder QCQP.

    Per (stream, user): psi_bar = mean of w|g|^2 h h^H, f_bar = mean of
    w conj(g) h, t_bar = mean w|g|^2, w_bar = mean w, nu_bar = mean log2 w.
    constant() assembles the AWMSE offset in the natural-log scale the
    subproblem is solved in.
    """

    psi_bar: dict
    f_bar: dict
    t_bar: dict
    w_bar: dict
    nu_bar: dict

    def constant(self, key) -> float:
        return self.t_bar[key] + self.w_bar[key] - _LN2 * self.nu_bar[key]


def assemble_coefficients(samples: ChannelSampleSet, state: WmmseState) -> CoeffBundle:
    psi_bar, f_bar, t_bar, w_bar, nu_bar = {}, {}, {}, {}, {}
    n = samples.n_samples
    for key in state.weights:
        _, user = key
        w = state.weights[key]
        g = state.equalizers[key]
        hs = samples.user_samples(user)
        t = w * np.abs(g) ** 2
        psi_bar[key] = (hs.T * t) @ hs.conj() / n
        f_bar[key] = hs.T @ (w * np.conj(g)) / n
        t_bar[key] = float(np.mean(t))
        w_bar[key] = float(np.mean(w))
        nu_bar[key] = float(np.mean(np.log2(w)))
    return CoeffBundle(psi_bar, f_bar, t_bar, w_bar, nu_bar)


# ---------------------------------------------------------------------------
# real lifting and variable layout


def c2r_mat(a: np.ndarray) -> np.ndarray:
    """Real symmetric lift of a Hermitian form: p^H A p = v^T L v."""
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def c2r_vec(p: np.ndarray) -> np.ndarray:
    return np.concatenate([np.real(p), np.imag(p)])


def r2c_vec(x: np.ndarray) -> np.ndarray:
    m = x.size // 2
    return x[:m] + 1j * x[m:]


@dataclass(frozen=True)
class PrecoderLayout:
    """Flat real variable layout: precoder blocks, then rate-split slack
    variables xhat, then any extra scalars (epigraph)."""

    m: int
    blocks: tuple  # names: 'zero', 'common', 'priv0'..'priv{M-1}'
    n_xhat: int = 0
    n_extra: int = 0

    @property
    def n(self) -> int:
        return 2 * self.m * len(self.blocks) + self.n_xhat + self.n_extra

    def block_slice(self, name: str) -> slice:
        i = self.blocks.index(name)
        return slice(2 * self.m * i, 2 * self.m * (i + 1))

    def xhat_slice(self) -> slice:
        base = 2 * self.m * len(self.blocks)
        return slice(base, base + self.n_xhat)

    def extra_slice(self) -> slice:
        base = 2 * self.m * len(self.blocks) + self.n_xhat
        return slice(base, base + self.n_extra)

    def encode(self, blockvecs: dict, xhat=None, extra=None) -> np.ndarray:
        x = np.zeros(self.n)
        for name in self.blocks:
            x[self.block_slice(name)] = c2r_vec(blockvecs[name])
        if self.n_xhat:
            x[self.xhat_slice()] = 0.0 if xhat is None else xhat
        if self.n_extra:
            x[self.extra_slice()] = 0.0 if extra is None else extra
        return x

    def decode(self, x: np.ndarray):
        blocks = {name: r2c_vec(x[self.block_slice(name)]) for name in self.blocks}
        xhat = x[self.xhat_slice()].copy() if self.n_xhat else np.zeros(0)
        extra = x[self.extra_slice()].copy() if self.n_extra else np.zeros(0)
        priv = [blocks.pop(f"priv{k}", None) for k in range(self.m)]
        if priv[0] is not None:
            blocks["private"] = np.stack(priv, axis=1)
        return blocks, xhat, extra

    def encode_precoders(self, pre: PrecoderSet, xhat=None, extra=None) -> np.ndarray:
        vecs = {}
        for name in self.blocks:
            if name == "zero":
                vecs[name] = pre.p_zero
            elif name == "common":
                vecs[name] = pre.p_common
            else:
                vecs[name] = pre.p_private[:, int(name[4:])]
        return self.encode(vecs, xhat=xhat, extra=extra)


def pp_layout(config: SystemConfig, use_common: bool = True, zero_layer: bool = True) -> PrecoderLayout:
    blocks = []
    if zero_layer:
        blocks.append("zero")
    if use_common:
        blocks.append("common")
    blocks += [f"priv{k}" for k in range(config.M)]
    return PrecoderLayout(m=config.M, blocks=tuple(blocks), n_xhat=config.M if use_common else 0)


def tp_alpha_layout(config: SystemConfig, use_common: bool = True) -> PrecoderLayout:
    blocks = (("common",) if use_common else ()) + tuple(f"priv{k}" for k in range(config.M))
    return PrecoderLayout(m=config.M, blocks=blocks, n_xhat=config.M if use_common else 0)


def tp_zero_layout(config: SystemConfig) -> PrecoderLayout:
    return PrecoderLayout(m=config.M, blocks=("zero",), n_extra=1)


# ---------------------------------------------------------------------------
# QCQP builders


def _xi_quadratic(layout: PrecoderLayout, coeffs: CoeffBundle, key, involved, f_block: str):
    """A, b, const of the AWMSE surrogate of one stream as a function of the
    precoder blocks in ``involved`` (the not-yet-decoded layers)."""
    n = layout.n
    a = np.zeros((n, n))
    psi = c2r_mat(coeffs.psi_bar[key])
    for name in involved:
        sl = layout.block_slice(name)
        a[sl, sl] += psi
    b = np.zeros(n)
    b[layout.block_slice(f_block)] = -2.0 * c2r_vec(coeffs.f_bar[key])
    return a, b, coeffs.constant(key)


def _power_identity(layout: PrecoderLayout, names) -> np.ndarray:
    a = np.zeros((layout.n, layout.n))
    for name in names:
        sl = layout.block_slice(name)
        a[sl, sl] = np.eye(2 * layout.m)
    return a


def _private_names(m: int):
    return [f"priv{k}" for k in range(m)]


def build_pp_subproblem(
    coeffs: CoeffBundle,
    config: SystemConfig,
    use_common: bool = True,
    zero_layer: bool = True,
) -> QcqpProblem:
    """Precoder update QCQP under power partitioning.

    Constraint order: alpha-user QoS (M), 0-user QoS expanded over the
    decoding set ((K-M)*(M+1) when the broadcast layer is on), common-rate
    consistency (M, rate-splitting only), total power (1); the sign
    constraints xhat <= 0 are linear rows.
    """
    layout = pp_layout(config, use_common, zero_layer)
    m, n = config.M, layout.n
    privs = _private_names(m)
    theta0 = theta_zero_array(config)

    obj_a = np.zeros((n, n))
    obj_b = np.zeros(n)
    obj_c = 0.0
    quads = []

    xh = layout.xhat_slice()
    for k in config.k_alpha:
        a, b, cst = _xi_quadratic(layout, coeffs, ("private", k), privs, f"priv{k}")
        obj_a += a
        obj_b += b
        obj_c += cst
        if use_common:
            obj_b[xh.start + k] += 1.0
        # QoS: xhat_k + xi_p_k <= 1 - ln2 * r_th
        bq = b.copy()
        if use_common:
            bq[xh.start + k] += 1.0
        quads.append(QuadExpr(a, bq, cst - (1.0 - _LN2 * config.qos_alpha)))

    if zero_layer:
        involved0 = ["zero"] + (["common"] if use_common else []) + privs
        for k in config.k_zero:
            rth = config.qos_zero / theta0[k - m]
            deco = list(config.k_alpha) + [k]
            for i in deco:
                a, b, cst = _xi_quadratic(layout, coeffs, ("zero", i), involved0, "zero")
                quads.append(QuadExpr(a, b, cst - (1.0 - _LN2 * rth)))

    if use_common:
        involved_c = ["common"] + privs
        for k in config.k_alpha:
            a, b, cst = _xi_quadratic(layout, coeffs, ("common", k), involved_c, "common")
            bq = b.copy()
            bq[xh] -= 1.0
            quads.append(QuadExpr(a, bq, cst - 1.0))

    power_names = list(layout.blocks)
    quads.append(
        QuadExpr(_power_identity(layout, power_names), np.zeros(n), -config.snr_linear)
    )

    lins = []
    if use_common:
        for k in range(m):
            row = np.zeros(n)
            row[xh.start + k] = 1.0
            lins.append((row, 0.0))

    return QcqpProblem(n=n, objective=QuadExpr(obj_a, obj_b, obj_c), quad_constraints=quads, lin_constraints=lins)


def build_tp_alpha_subproblem(
    coeffs: CoeffBundle,
    config: SystemConfig,
    qos_alpha_eff: float,
    use_common: bool = True,
) -> QcqpProblem:
    """Alpha-phase precoder update under time partitioning; thresholds are
    already divided by the time share."""
    layout = tp_alpha_layout(config, use_common)
    m, n = config.M, layout.n
    privs = _private_names(m)

    obj_a = np.zeros((n, n))
    obj_b = np.zeros(n)
    obj_c = 0.0
    quads = []
    xh = layout.xhat_slice()
    for k in config.k_alpha:
        a, b, cst = _xi_quadratic(layout, coeffs, ("private", k), privs, f"priv{k}")
        obj_a += a
        obj_b += b
        obj_c += cst
        if use_common:
            obj_b[xh.start + k] += 1.0
        bq = b.copy()
        if use_common:
            bq[xh.start + k] += 1.0
        quads.append(QuadExpr(a, bq, cst - (1.0 - _LN2 * qos_alpha_eff)))
    if use_common:
        involved_c = ["common"] + privs
        for k in config.k_alpha:
            a, b, cst = _xi_quadratic(layout, coeffs, ("common", k), involved_c, "common")
            bq = b.copy()
            bq[xh] -= 1.0
            quads.append(QuadExpr(a, bq, cst - 1.0))
    quads.append(QuadExpr(_power_identity(layout, layout.blocks), np.zeros(n), -config.snr_linear))
    lins = []
    if use_common:
        for k in range(m):
            row = np.zeros(n)
            row[xh.start + k] = 1.0
            lins.append((row, 0.0))
    return QcqpProblem(n=n, objective=QuadExpr(obj_a, obj_b, obj_c), quad_constraints=quads, lin_constraints=lins)


def build_tp_zero_subproblem(coeffs: CoeffBundle, config: SystemConfig) -> QcqpProblem:
    """Epigraph form of the weighted max-min broadcast-rate update."""
    layout = tp_zero_layout(config)
    n = layout.n
    theta0 = theta_zero_array(config)
    u_idx = layout.extra_slice().start
    obj_b = np.zeros(n)
    obj_b[u_idx] = 1.0
    quads = []
    for k in config.k_zero:
        th = theta0[k - config.M]
        a, b, cst = _xi_quadratic(layout, coeffs, ("zero", k), ["zero"], "zero")
        bq = th * b
        bq[u_idx] -= 1.0
        quads.append(QuadExpr(th * a, bq, th * (cst - 1.0)))
    quads.append(QuadExpr(_power_identity(layout, ("zero",)), np.zeros(n), -config.snr_linear))
    return QcqpProblem(n=n, objective=QuadExpr(None, obj_b, 0.0), quad_constraints=quads, lin_constraints=[])


# ---------------------------------------------------------------------------
# alternating optimization


@dataclass
class AoTrace:
    """ASR and max rate-constraint violation after every precoder update."""

    initial_asr: float
    epsilon: float
    iterations: list = field(default_factory=list)  # (asr, max_violation)
    converged: bool = False

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    @property
    def final_asr(self) -> float:
        return self.iterations[-1][0] if self.iterations else self.initial_asr

    def to_text(self) -> str:
        lines = [f"# epsilon {self.epsilon:g} converged {self.converged}"]
        lines.append(f"0 {self.initial_asr:.10f} nan")
        for i, (asr, viol) in enumerate(self.iterations, start=1):
            lines.append(f"{i} {asr:.10f} {viol:.3e}")
        return "\n".join(lines)


@dataclass
class OptResult:
    """Outcome of one strategy on one channel use."""

    status: str  # optimal | infeasible
    strategy: str
    precoders: PrecoderSet | None
    report: RateReport | None
    trace: AoTrace
    theta: float | None = None
    zero_trace: AoTrace | None = None

    @property
    def asr(self) -> float:
        if self.report is None:
            return float("nan")
        return self.report.sum_rate_alpha

    @property
    def iterations(self) -> int:
        return self.trace.n_iterations


class _AlphaProblem:
    """Shared machinery of the PP problem and the TP alpha-subproblem."""

    def __init__(self, samples, config, scheme, use_common, zero_layer, qos_alpha, power):
        self.samples = samples
        self.config = config
        self.scheme = scheme  # 'pp' | 'tp_alpha'
        self.use_common = use_common
        self.zero_layer = zero_layer and scheme == "pp"
        self.qos_alpha = qos_alpha
        self.power = power
        if scheme == "pp":
            self.layout = pp_layout(config, use_common, self.zero_layer)
        else:
            self.layout = tp_alpha_layout(config, use_common)

    def state(self, pre: PrecoderSet) -> WmmseState:
        return mmse_state(
            self.samples,
            pre,
            self.config,
            scheme="pp" if self.scheme == "pp" else "tp_alpha",
            use_common=self.use_common,
            zero_layer=self.zero_layer,
        )

    def build(self, coeffs: CoeffBundle) -> QcqpProblem:
        if self.scheme == "pp":
            return build_pp_subproblem(coeffs, self.config, self.use_common, self.zero_layer)
        return build_tp_alpha_subproblem(coeffs, self.config, self.qos_alpha, self.use_common)

    def asr(self, state: WmmseState, chat: np.ndarray) -> float:
        r_p = sum(state.rates[("private", k)] for k in self.config.k_alpha)
        return float(np.sum(chat)) + r_p

    def violation(self, state: WmmseState, chat: np.ndarray, pre: PrecoderSet) -> float:
        cfg = self.config
        viol = [0.0]
        for k in cfg.k_alpha:
            ck = chat[k] if self.use_common else 0.0
            viol.append(self.qos_alpha - (ck + state.rates[("private", k)]))
        if self.use_common:
            r_c_min = min(state.rates[("common", k)] for k in cfg.k_alpha)
            viol.append(float(np.sum(chat)) - r_c_min)
        if self.zero_layer:
            theta0 = theta_zero_array(cfg)
            for k in cfg.k_zero:
                r0 = min(state.rates[("zero", i)] for i in list(cfg.k_alpha) + [k])
                viol.append(cfg.qos_zero - theta0[k - cfg.M] * r0)
        used = pre.power_private_total() + pre.power_common() + (
            pre.power_zero() if self.zero_layer else 0.0
        )
        viol.append(used - self.power)
        return float(max(viol))


def _run_alpha_ao(problem: _AlphaProblem, init: PrecoderSet, epsilon: float, max_iter: int):
    """Alternating optimization with an incumbent safeguard.

    Returns (status, precoders, chat_raw, trace, state). The trace rows are
    the iterates after each QCQP solve; the heuristic initial point is kept
    out so every recorded iterate is feasible.
    """
    cfg = problem.config
    layout = problem.layout
    pre = init
    state = problem.state(pre)
    chat = np.zeros(cfg.M)
    asr_prev = problem.asr(state, chat)
    trace = AoTrace(initial_asr=asr_prev, epsilon=epsilon)
    incumbent_feasible = problem.violation(state, chat, pre) <= _RATE_FEAS_TOL

    for it in range(1, max_iter + 1):
        coeffs = assemble_coefficients(problem.samples, state)
        prob = problem.build(coeffs)
        sol = qcqp.solve(prob, **_SOLVER_OPTS)
        if sol.status == "infeasible":
            if not trace.iterations and not incumbent_feasible:
                return "infeasible", pre, chat, trace, state
            trace.converged = True
            break
        if sol.x_opt is None:
            if not trace.iterations and not incumbent_feasible:
                return "infeasible", pre, chat, trace, state
            break

        adopt = sol.feasibility_violation <= _ADOPT_FEAS_TOL
        if adopt and incumbent_feasible:
            x_inc = layout.encode_precoders(pre, xhat=-_LN2 * chat)
            f_inc = prob.objective.value(x_inc)
            f_new = prob.objective.value(sol.x_opt)
            if f_new > f_inc + 1e-12 * max(1.0, abs(f_inc)):
                adopt = False
        if adopt:
            blocks, xhat, _ = layout.decode(sol.x_opt)
            pre = PrecoderSet(
                p_zero=blocks.get("zero", np.zeros(cfg.M, dtype=complex)),
                p_common=blocks.get("common", np.zeros(cfg.M, dtype=complex)),
                p_private=blocks["private"],
            )
            used = pre.power_common() + pre.power_private_total() + (
                pre.power_zero() if problem.zero_layer else 0.0
            )
            if used > problem.power:
                # shave the solver's feasibility slack so the power budget
                # holds exactly; keeps the safeguard comparisons valid
                scale = np.sqrt(problem.power / used)
                pre = PrecoderSet(
                    p_zero=scale * pre.p_zero if problem.zero_layer else pre.p_zero,
                    p_common=scale * pre.p_common,
                    p_private=scale * pre.p_private,
                )
            chat = np.maximum(-xhat / _LN2, 0.0) if problem.use_common else np.zeros(cfg.M)
            state = problem.state(pre)
        asr = problem.asr(state, chat)
        viol = problem.violation(state, chat, pre)
        incumbent_feasible = viol <= _RATE_FEAS_TOL
        trace.iterations.append((asr, viol))
        if abs(asr - asr_prev) <= epsilon:
            trace.converged = True
            break
        asr_prev = asr

    return "optimal", pre, chat, trace, state


def _clip_split(chat: np.ndarray, state: WmmseState, config: SystemConfig, use_common: bool):
    """Shave numeric excess so the split never exceeds the common rate."""
    if not use_common:
        return np.zeros(config.M)
    r_c_min = min(state.rates[("common", k)] for k in config.k_alpha)
    total = float(np.sum(chat))
    if total > max(r_c_min, 0.0) and total > 0:
        chat = chat * (max(r_c_min, 0.0) / total)
    return chat


def init_precoders(
    realization: ChannelRealization,
    config: SystemConfig,
    scheme: str,
    seed: int = 0,
    use_common: bool = True,
    zero_layer: bool = True,
) -> PrecoderSet:
    """Matched-filter privates, dominant-singular-vector common precoder,
    random broadcast direction; powers split so the budget holds with
    equality. Streams that stay active get a power floor, since a stream
    started at exactly zero is a fixed point of the AO update."""
    m = config.M
    p = config.snr_linear
    rng = rng_from(seed, _TAG_INIT)
    est = np.asarray(realization.h_est[:, :m])

    dirs = np.empty((m, m), dtype=complex)
    for k in range(m):
        nrm = np.linalg.norm(est[:, k])
        if nrm < 1e-12:
            v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            dirs[:, k] = v / np.linalg.norm(v)
        else:
            dirs[:, k] = est[:, k] / nrm
    if np.any(est):
        u, _, _ = np.linalg.svd(est)
        c_dir = u[:, 0]
    else:
        c_dir = np.eye(m, dtype=complex)[:, 0]
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    z_dir = v / np.linalg.norm(v)

    if scheme == "pp":
        q0 = 0.5 * p if zero_layer else 0.0
        pa = p - q0
    elif scheme == "tp":
        q0 = p
        pa = p
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    qc = max(pa - pa**config.alpha, 0.05 * pa) if use_common else 0.0
    qk = (pa - qc) / m
    return PrecoderSet(
        p_zero=np.sqrt(q0) * z_dir,
        p_common=np.sqrt(qc) * c_dir,
        p_private=dirs * np.sqrt(qk),
        common_split=np.zeros(m),
        tp_factor=1.0,
    )


def solve_pp_asr(
    realization: ChannelRealization,
    config: SystemConfig,
    n_samples: int = 100,
    seed: int = 0,
    epsilon: float = 1e-4,
    use_common: bool = True,
    zero_layer: bool = True,
    max_ao_iter: int = 500,
    init: PrecoderSet | None = None,
    samples: ChannelSampleSet | None = None,
    strategy_name: str | None = None,
) -> OptResult:
    """ASR maximization under power partitioning (PP-RSMA; PP-SDMA with
    use_common=False). Infeasible QoS is reported from the first subproblem
    certificate, never as a partial precoder set."""
    if samples is None:
        samples = draw_conditional_samples(realization, config, n_samples, seed)
    if init is None:
        init = init_precoders(realization, config, "pp", seed, use_common, zero_layer)
    name = strategy_name or ("PP-RSMA" if use_common else "PP-SDMA")
    problem = _AlphaProblem(
        samples, config, "pp", use_common, zero_layer, config.qos_alpha, config.snr_linear
    )
    status, pre, chat, trace, state = _run_alpha_ao(problem, init, epsilon, max_ao_iter)
    if status != "optimal":
        return OptResult(status=status, strategy=name, precoders=None, report=None, trace=trace)
    chat = _clip_split(chat, state, config, use_common)
    final = PrecoderSet(
        p_zero=pre.p_zero,
        p_common=pre.p_common,
        p_private=pre.p_private,
        common_split=chat,
        tp_factor=1.0,
    )
    report = user_rates_pp(samples, final, config)
    return OptResult(status="optimal", strategy=name, precoders=final, report=report, trace=trace)


def _solve_zero_maxmin(samples, config, epsilon, max_iter):
    """max over p_0 of min_k theta_k * R_hat of the broadcast stream in its
    own phase, subject to the power ball. Always feasible."""
    cfg = config
    m = cfg.M
    p = cfg.snr_linear
    theta0 = theta_zero_array(cfg)
    layout = tp_zero_layout(cfg)

    cov = np.zeros((m, m), dtype=complex)
    for k in cfg.k_zero:
        hs = samples.user_samples(k)
        cov += hs.conj().T @ hs / samples.n_samples
    _, vec = np.linalg.eigh(cov)
    p_zero = np.sqrt(p) * vec[:, -1]

    def make_pre(p0):
        return PrecoderSet(
            p_zero=p0,
            p_common=np.zeros(m, dtype=complex),
            p_private=np.zeros((m, m), dtype=complex),
        )

    def weighted_min(state):
        return min(theta0[k - m] * state.rates[("zero", k)] for k in cfg.k_zero)

    state = mmse_state(samples, make_pre(p_zero), cfg, scheme="tp_zero")
    metric_prev = weighted_min(state)
    trace = AoTrace(initial_asr=metric_prev, epsilon=epsilon)

    for _ in range(1, max_iter + 1):
        coeffs = assemble_coefficients(samples, state)
        prob = build_tp_zero_subproblem(coeffs, cfg)
        sol = qcqp.solve(prob, **_SOLVER_OPTS)
        if sol.x_opt is None:
            break
        blocks, _, _ = layout.decode(sol.x_opt)
        cand = blocks["zero"]

        def surrogate(p0):
            vals = []
            x = layout.encode({"zero": p0})
            for q, k in zip(prob.quad_constraints, cfg.k_zero):
                # strip the epigraph column before evaluating
                vals.append(q.value(x))
            return max(vals)

        if sol.feasibility_violation <= _ADOPT_FEAS_TOL and (
            surrogate(cand) <= surrogate(p_zero) + 1e-12
        ):
            nrm2 = float(np.vdot(cand, cand).real)
            p_zero = cand if nrm2 <= p else cand * np.sqrt(p / nrm2)
        state = mmse_state(samples, make_pre(p_zero), cfg, scheme="tp_zero")
        metric = weighted_min(state)
        trace.iterations.append((metric, 0.0))
        if abs(metric - metric_prev) <= epsilon:
            trace.converged = True
            break
        metric_prev = metric

    rates = np.array([state.rates[("zero", k)] for k in cfg.k_zero])
    return p_zero, rates, trace


def solve_tp_asr(
    realization: ChannelRealization,
    config: SystemConfig,
    n_samples: int = 100,
    seed: int = 0,
    epsilon: float = 1e-4,
    theta_grid_step: float = 0.05,
    use_common: bool = True,
    max_ao_iter: int = 500,
    init: PrecoderSet | None = None,
    samples: ChannelSampleSet | None = None,
    strategy_name: str | None = None,
    theta_fixed: float | None = None,
) -> OptResult:
    """Time-partitioned ASR maximization.

    The problem splits: the broadcast phase is a weighted max-min over p_0
    whose optimizer does not depend on the time share, and the alpha-phase
    is an ASR problem with thresholds scaled by 1/theta. The time share is
    then picked on a grid as the feasible maximizer of theta * ASR_sub;
    theta * ASR_sub is nondecreasing in theta, so ties resolve toward the
    larger share. theta = 1 with a positive 0-user QoS is infeasible.
    theta_fixed pins the share instead of optimizing it.
    """
    if samples is None:
        samples = draw_conditional_samples(realization, config, n_samples, seed)
    name = strategy_name or ("TP-RSMA" if use_common else "TP-SDMA")
    p_zero, zero_rates, zero_trace = _solve_zero_maxmin(samples, config, epsilon, max_ao_iter)
    weighted = theta_zero_array(config) * zero_rates

    if theta_fixed is not None:
        if not 0.0 <= theta_fixed <= 1.0:
            raise ValueError("theta_fixed must lie in [0, 1]")
        grid = np.array([float(theta_fixed)])
    else:
        n_steps = int(round(1.0 / theta_grid_step))
        grid = np.linspace(0.0, 1.0, n_steps + 1)[::-1]

    default_init = init_precoders(realization, config, "tp", seed, use_common)
    extra_init = init
    cache = {}
    last_feasible_pre = None
    best = None

    problem_of = lambda thr: _AlphaProblem(
        samples, config, "tp_alpha", use_common, False, thr, config.snr_linear
    )

    for th in grid:
        if th >= 1.0 - 1e-12:
            zero_ok = config.qos_zero <= 1e-12
        else:
            zero_ok = float(np.min((1.0 - th) * weighted)) >= config.qos_zero - 1e-9
        if not zero_ok:
            continue
        if th <= 1e-12:
            if config.qos_alpha <= 1e-12:
                cand = (0.0, th, None)
                if best is None:
                    best = cand
            continue
        thr = config.qos_alpha / th
        key = round(thr, 12)
        if key not in cache:
            runs = []
            inits = [default_init if last_feasible_pre is None else last_feasible_pre]
            if extra_init is not None:
                inits.append(extra_init)
            for ini in inits:
                out = _run_alpha_ao(problem_of(thr), ini, epsilon, max_ao_iter)
                if out[0] == "optimal":
                    runs.append(out)
            pick = None
            if runs:
                pick = max(runs, key=lambda o: o[3].final_asr)
                last_feasible_pre = pick[1]
            cache[key] = pick
        pick = cache[key]
        if pick is None:
            continue
        value = th * pick[3].final_asr
        if best is None or value > best[0] + 1e-12:
            best = (value, th, pick)

    if best is None:
        empty = AoTrace(initial_asr=0.0, epsilon=epsilon)
        return OptResult(
            status="infeasible", strategy=name, precoders=None, report=None,
            trace=empty, zero_trace=zero_trace,
        )

    _, th_star, pick = best
    if pick is None:
        pre = PrecoderSet(
            p_zero=p_zero,
            p_common=np.zeros(config.M, dtype=complex),
            p_private=np.zeros((config.M, config.M), dtype=complex),
            tp_factor=th_star,
        )
        trace = AoTrace(initial_asr=0.0, epsilon=epsilon)
        trace.converged = True
    else:
        _, pre_a, chat, trace, state = pick
        chat = _clip_split(chat, state, config, use_common)
        pre = PrecoderSet(
            p_zero=p_zero,
            p_common=pre_a.p_common,
            p_private=pre_a.p_private,
            common_split=chat,
            tp_factor=th_star,
        )
    report = user_rates_tp(samples, pre, config)
    return OptResult(
        status="optimal", strategy=name, precoders=pre, report=report,
        trace=trace, theta=th_star, zero_trace=zero_trace,
    )


def solve_sdma_variant(
    realization: ChannelRealization,
    config: SystemConfig,
    n_samples: int = 100,
    seed: int = 0,
    epsilon: float = 1e-4,
    partitioning: str = "pp",
    **kwargs,
) -> OptResult:
    """SDMA baselines: the common stream is off (p_c = 0, no rate split).

    Under PP the broadcast layer s_0 and its SIC at the alpha-users remain;
    under TP the alpha-phase degenerates to multi-user linear precoding.
    """
    if partitioning == "pp":
        return solve_pp_asr(
            realization, config, n_samples, seed, epsilon, use_common=False,
            strategy_name="PP-SDMA", **kwargs,
        )
    if partitioning == "tp":
        return solve_tp_asr(
            realization, config, n_samples, seed, epsilon, use_common=False,
            strategy_name="TP-SDMA", **kwargs,
        )
    raise ValueError(f"unknown partitioning {partitioning!r}")
