"""Convex QCQP solver on top of a dense second-order-cone interior-point core.

Quadratically constrained quadratic programs

    minimize    x^T A0 x + b0^T x + c0
    subject to  x^T Ai x + bi^T x + ci <= 0      (Ai PSD)
                li^T x + di <= 0

are lifted to an epigraph SOCP through PSD square roots and handed to a
self-dual embedding interior-point method with Nesterov-Todd scaling and a
Mehrotra correction. Everything is dense numpy; problems here have tens of
variables, so no sparsity is exploited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import nnls

_EIG_NEG_TOL = 1e-10  # relative; anything below this is rejected as non-PSD
_EIG_CLIP = 1e-12  # relative; small eigenvalues are clipped to zero


# ---------------------------------------------------------------------------
# problem containers


@dataclass
class QuadExpr:
    """x^T A x + b^T x + c with A symmetric PSD (A may be None for linear)."""

    A: np.ndarray | None
    b: np.ndarray
    c: float

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.c = float(self.c)
        if self.A is not None:
            a = np.asarray(self.A, dtype=float)
            if a.shape != (self.b.size, self.b.size):
                raise ValueError("A must be square and match b")
            self.A = (a + a.T) / 2.0
            if not np.any(self.A):
                self.A = None

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        v = float(self.b @ x) + self.c
        if self.A is not None:
            v += float(x @ (self.A @ x))
        return v

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        g = self.b.copy()
        if self.A is not None:
            g = g + 2.0 * (self.A @ x)
        return g


@dataclass
class QcqpProblem:
    """Convex QCQP in standard "<= 0" form."""

    n: int
    objective: QuadExpr
    quad_constraints: list = field(default_factory=list)
    lin_constraints: list = field(default_factory=list)  # (coef, offset) pairs

    def __post_init__(self):
        if self.objective.b.size != self.n:
            raise ValueError("objective dimension mismatch")
        for q in self.quad_constraints:
            if q.b.size != self.n:
                raise ValueError("constraint dimension mismatch")
        self.lin_constraints = [
            (np.asarray(b, dtype=float).reshape(-1), float(d)) for b, d in self.lin_constraints
        ]
        for b, _ in self.lin_constraints:
            if b.size != self.n:
                raise ValueError("linear constraint dimension mismatch")

    @property
    def n_constraints(self) -> int:
        return len(self.quad_constraints) + len(self.lin_constraints)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        vals = [q.value(x) for q in self.quad_constraints]
        vals += [float(b @ x) + d for b, d in self.lin_constraints]
        return np.asarray(vals)

    def max_violation(self, x: np.ndarray) -> float:
        if self.n_constraints == 0:
            return 0.0
        return float(max(0.0, np.max(self.constraint_values(x))))

    def dump_text(self) -> str:
        """Plain-text serialization for cross-validation in other solvers."""

        def expr_lines(tag: str, q: QuadExpr) -> list:
            lines = [tag]
            if q.A is None:
                lines.append("A zero")
            else:
                lines.append("A " + " ".join(repr(float(v)) for v in q.A.ravel()))
            lines.append("b " + " ".join(repr(float(v)) for v in q.b))
            lines.append(f"c {q.c!r}")
            return lines

        out = ["qcqp-dump 1", f"n {self.n}"]
        out += expr_lines("objective", self.objective)
        for q in self.quad_constraints:
            out += expr_lines("quad_constraint", q)
        for b, d in self.lin_constraints:
            out.append("lin_constraint")
            out.append("b " + " ".join(repr(float(v)) for v in b))
            out.append(f"c {d!r}")
        return "\n".join(out) + "\n"


def parse_dump(text: str) -> QcqpProblem:
    """Inverse of QcqpProblem.dump_text."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if lines[0] != "qcqp-dump 1":
        raise ValueError("not a qcqp dump")
    n = int(lines[1].split()[1])
    i = 2
    objective = None
    quads, lins = [], []

    def read_expr(idx, with_a: bool):
        a = None
        if with_a:
            tok = lines[idx].split(None, 1)
            assert tok[0] == "A"
            if tok[1] != "zero":
                a = np.array([float(t) for t in tok[1].split()]).reshape(n, n)
            idx += 1
        tok = lines[idx].split(None, 1)
        assert tok[0] == "b"
        b = np.array([float(t) for t in tok[1].split()])
        idx += 1
        tok = lines[idx].split(None, 1)
        assert tok[0] == "c"
        c = float(tok[1])
        idx += 1
        return a, b, c, idx

    while i < len(lines):
        head = lines[i]
        i += 1
        if head == "objective":
            a, b, c, i = read_expr(i, True)
            objective = QuadExpr(a, b, c)
        elif head == "quad_constraint":
            a, b, c, i = read_expr(i, True)
            quads.append(QuadExpr(a, b, c))
        elif head == "lin_constraint":
            _, b, c, i = read_expr(i, False)
            lins.append((b, c))
        else:
            raise ValueError(f"unexpected dump section {head!r}")
    if objective is None:
        raise ValueError("dump has no objective")
    return QcqpProblem(n=n, objective=objective, quad_constraints=quads, lin_constraints=lins)


@dataclass
class QcqpSolution:
    status: str  # optimal | infeasible | unbounded | max_iter
    x_opt: np.ndarray | None
    objective_value: float | None
    duality_gap: float | None
    iterations: int
    feasibility_violation: float | None = None


@dataclass
class KktReport:
    stationarity_residual: float
    complementarity: float
    max_violation: float
    duals: np.ndarray


# ---------------------------------------------------------------------------
# cone algebra: nonnegative orthant x product of second-order cones


@dataclass
class _Dims:
    l: int
    soc: list

    @property
    def total(self) -> int:
        return self.l + sum(self.soc)

    @property
    def degree(self) -> int:
        return self.l + len(self.soc)

    def soc_slices(self):
        start = self.l
        for q in self.soc:
            yield slice(start, start + q)
            start += q


def _cone_e(dims: _Dims) -> np.ndarray:
    e = np.zeros(dims.total)
    e[: dims.l] = 1.0
    for sl in dims.soc_slices():
        e[sl.start] = 1.0
    return e


def _emin(u: np.ndarray, dims: _Dims) -> float:
    vals = []
    if dims.l:
        vals.append(np.min(u[: dims.l]))
    for sl in dims.soc_slices():
        blk = u[sl]
        vals.append(blk[0] - np.linalg.norm(blk[1:]))
    return float(min(vals)) if vals else np.inf


def _jordan(u: np.ndarray, v: np.ndarray, dims: _Dims) -> np.ndarray:
    out = np.empty_like(u)
    out[: dims.l] = u[: dims.l] * v[: dims.l]
    for sl in dims.soc_slices():
        ub, vb = u[sl], v[sl]
        out[sl.start] = ub @ vb
        out[sl.start + 1 : sl.stop] = ub[0] * vb[1:] + vb[0] * ub[1:]
    return out


def _jordan_div(lam: np.ndarray, v: np.ndarray, dims: _Dims) -> np.ndarray:
    """Solve lam o u = v for u."""
    out = np.empty_like(v)
    out[: dims.l] = v[: dims.l] / lam[: dims.l]
    for sl in dims.soc_slices():
        l0, l1 = lam[sl.start], lam[sl.start + 1 : sl.stop]
        v0, v1 = v[sl.start], v[sl.start + 1 : sl.stop]
        det = l0 * l0 - l1 @ l1
        u0 = (l0 * v0 - l1 @ v1) / det
        u1 = (-v0 * l1 + (det * v1 + (l1 @ v1) * l1) / l0) / det
        out[sl.start] = u0
        out[sl.start + 1 : sl.stop] = u1
    return out


def _orthant_max_step(u: np.ndarray, d: np.ndarray) -> float:
    neg = d < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(u[neg] / -d[neg]))


def _soc_max_step(u: np.ndarray, d: np.ndarray) -> float:
    u0, u1 = u[0], u[1:]
    d0, d1 = d[0], d[1:]
    c = max(u0 * u0 - u1 @ u1, 0.0)
    b = 2.0 * (u0 * d0 - u1 @ d1)
    a = d0 * d0 - d1 @ d1
    cands = []
    if d0 < 0:
        cands.append(u0 / -d0)
    if abs(a) < 1e-300:
        if b < 0:
            cands.append(c / -b)
    elif a > 0:
        disc = b * b - 4.0 * a * c
        if disc >= 0:
            r_small = (-b - np.sqrt(disc)) / (2.0 * a)
            if r_small > 0:
                cands.append(r_small)
    else:
        disc = max(b * b - 4.0 * a * c, 0.0)
        r = (-b - np.sqrt(disc)) / (2.0 * a)
        if r > 0:
            cands.append(r)
        elif b < 0:
            cands.append(0.0)
    return float(min(cands)) if cands else np.inf


def _max_step(u: np.ndarray, d: np.ndarray, dims: _Dims) -> float:
    steps = []
    if dims.l:
        steps.append(_orthant_max_step(u[: dims.l], d[: dims.l]))
    for sl in dims.soc_slices():
        steps.append(_soc_max_step(u[sl], d[sl]))
    return float(min(steps)) if steps else np.inf


class _Scaling:
    """Nesterov-Todd scaling W with lam = W z = W^{-1} s."""

    def __init__(self, s: np.ndarray, z: np.ndarray, dims: _Dims):
        self.dims = dims
        self.d = np.sqrt(s[: dims.l] / z[: dims.l]) if dims.l else np.empty(0)
        self.soc = []
        for sl in dims.soc_slices():
            sb, zb = s[sl], z[sl]
            cs = np.sqrt(max(sb[0] ** 2 - sb[1:] @ sb[1:], 1e-300))
            cz = np.sqrt(max(zb[0] ** 2 - zb[1:] @ zb[1:], 1e-300))
            sbar, zbar = sb / cs, zb / cz
            gamma = np.sqrt((1.0 + sbar @ zbar) / 2.0)
            wbar = sbar.copy()
            wbar[0] += zbar[0]
            wbar[1:] -= zbar[1:]
            wbar /= 2.0 * gamma
            self.soc.append((np.sqrt(cs / cz), wbar))
        self.lam = self.mul_w(z)

    def _soc_v(self, wbar, v, flip: bool):
        w0, w1 = wbar[0], wbar[1:]
        sgn = -1.0 if flip else 1.0
        out = np.empty_like(v)
        out[0] = w0 * v[0] + sgn * (w1 @ v[1:])
        out[1:] = sgn * v[0] * w1 + v[1:] + (w1 @ v[1:]) / (1.0 + w0) * w1
        return out

    def mul_w(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        out[: self.dims.l] = self.d * v[: self.dims.l]
        for (eta, wbar), sl in zip(self.soc, self.dims.soc_slices()):
            out[sl] = eta * self._soc_v(wbar, v[sl], flip=False)
        return out

    def mul_winv(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        out[: self.dims.l] = v[: self.dims.l] / self.d
        for (eta, wbar), sl in zip(self.soc, self.dims.soc_slices()):
            out[sl] = self._soc_v(wbar, v[sl], flip=True) / eta
        return out

    def mul_w2(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        out[: self.dims.l] = self.d**2 * v[: self.dims.l]
        for (eta, wbar), sl in zip(self.soc, self.dims.soc_slices()):
            vb = v[sl]
            jv = vb.copy()
            jv[1:] *= -1.0
            out[sl] = eta**2 * (2.0 * (wbar @ vb) * wbar - jv)
        return out

    def mul_w2inv(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        out[: self.dims.l] = v[: self.dims.l] / self.d**2
        for (eta, wbar), sl in zip(self.soc, self.dims.soc_slices()):
            vb = v[sl]
            wt = wbar.copy()
            wt[1:] *= -1.0
            jv = vb.copy()
            jv[1:] *= -1.0
            out[sl] = (2.0 * (wt @ vb) * wt - jv) / eta**2
        return out

    def mul_w2inv_mat(self, g: np.ndarray) -> np.ndarray:
        out = np.empty_like(g)
        if self.dims.l:
            out[: self.dims.l] = g[: self.dims.l] / self.d[:, None] ** 2
        for (eta, wbar), sl in zip(self.soc, self.dims.soc_slices()):
            gb = g[sl]
            wt = wbar.copy()
            wt[1:] *= -1.0
            jg = gb.copy()
            jg[1:] *= -1.0
            out[sl] = (2.0 * np.outer(wt, wt @ gb) - jg) / eta**2
        return out


# ---------------------------------------------------------------------------
# self-dual embedding interior-point core


@dataclass
class _ConicResult:
    status: str
    x: np.ndarray | None
    s: np.ndarray | None
    z: np.ndarray | None
    iterations: int
    relgap: float | None


def _chol_with_jitter(mat: np.ndarray):
    jitter = 0.0
    scale = max(np.trace(mat) / max(mat.shape[0], 1), 1e-300)
    for _ in range(6):
        try:
            return cho_factor(mat + jitter * np.eye(mat.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-14 * scale)
    raise np.linalg.LinAlgError("KKT system is numerically singular")


def _shift_into_cone(v: np.ndarray, dims: _Dims) -> np.ndarray:
    alpha = -_emin(v, dims)
    if alpha < -1e-3:
        return v
    return v + (1.0 + alpha) * _cone_e(dims)


def _solve_conic(
    c: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    dims: _Dims,
    feastol: float = 1e-8,
    reltol: float = 1e-7,
    abstol: float = 1e-9,
    max_iter: int = 200,
    x_hint: np.ndarray | None = None,
) -> _ConicResult:
    """minimize c^T x subject to G x + s = h, s in the cone.

    Overflow near the central-path boundary is expected once the iterate is
    past the requested accuracy; the loop guards detect it and fall back to
    the best iterate, so the fp warnings are silenced here.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        return _solve_conic_impl(c, g, h, dims, feastol, reltol, abstol, max_iter, x_hint)


def _solve_conic_impl(
    c: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    dims: _Dims,
    feastol: float = 1e-8,
    reltol: float = 1e-7,
    abstol: float = 1e-9,
    max_iter: int = 200,
    x_hint: np.ndarray | None = None,
) -> _ConicResult:
    m, n = g.shape
    e = _cone_e(dims)
    deg = dims.degree

    gtg = g.T @ g
    reg = 1e-12 * max(np.trace(gtg) / max(n, 1), 1.0)
    cf0 = _chol_with_jitter(gtg + reg * np.eye(n))
    if x_hint is not None:
        x = np.asarray(x_hint, dtype=float).reshape(-1).copy()
    else:
        x = cho_solve(cf0, g.T @ h)
    s = _shift_into_cone(h - g @ x, dims)
    z = _shift_into_cone(-g @ cho_solve(cf0, c), dims)
    tau, kappa = 1.0, 1.0

    resx0 = max(1.0, np.linalg.norm(c))
    resz0 = max(1.0, np.linalg.norm(h))
    best = None
    iters = 0

    for it in range(max_iter + 1):
        iters = it
        rx = g.T @ z + c * tau
        rz = s + g @ x - h * tau
        rt = kappa + c @ x + h @ z

        xs, ss, zs = x / tau, s / tau, z / tau
        pcost = c @ xs
        gap = ss @ zs
        pres = np.linalg.norm(rz) / tau / resz0
        dres = np.linalg.norm(rx) / tau / resx0
        relgap = gap / max(1.0, abs(pcost))
        score = max(pres, dres, relgap)
        if best is None or score < best[0]:
            best = (score, xs.copy(), ss.copy(), zs.copy(), relgap)

        if pres <= feastol and dres <= feastol and (gap <= abstol or relgap <= reltol):
            return _ConicResult("optimal", xs, ss, zs, it, relgap)

        hz, cx = h @ z, c @ x
        if hz < -1e-12 and np.linalg.norm(g.T @ z) / (-hz) / resx0 <= feastol:
            return _ConicResult("primal_infeasible", None, None, z / (-hz), it, None)
        if cx < -1e-12 and np.linalg.norm(g @ x + s) / (-cx) / resz0 <= feastol:
            return _ConicResult("dual_infeasible", x / (-cx), s / (-cx), None, it, None)

        if it == max_iter:
            break

        try:
            w = _Scaling(s, z, dims)
            lam = w.lam
            if not np.all(np.isfinite(lam)):
                break
            lam2 = _jordan(lam, lam, dims)
            mu = (s @ z + tau * kappa) / (deg + 1)

            ginv = w.mul_w2inv_mat(g)
            if not np.all(np.isfinite(ginv)):
                break
            mmat = g.T @ ginv
            cf = _chol_with_jitter(mmat)

            def kkt(bx, bz):
                dx = cho_solve(cf, bx + ginv.T @ bz)
                dz = w.mul_w2inv(g @ dx - bz)
                # one round of iterative refinement
                r1 = bx - g.T @ dz
                r2 = bz - (g @ dx - w.mul_w2(dz))
                ddx = cho_solve(cf, r1 + ginv.T @ r2)
                ddz = w.mul_w2inv(g @ ddx - r2)
                return dx + ddx, dz + ddz

            x2, z2 = kkt(-c, h)
            den = c @ x2 + h @ z2 - kappa / tau
            if abs(den) < 1e-300 or not np.isfinite(den):
                break

            def newton(ds_target, dk_target, gamma):
                d_til = _jordan_div(lam, ds_target, dims)
                wd = w.mul_w(d_til)
                x1, z1 = kkt(-gamma * rx, -gamma * rz - wd)
                dtau = (-gamma * rt - (c @ x1 + h @ z1) - dk_target / tau) / den
                dx = x1 + dtau * x2
                dz = z1 + dtau * z2
                ds = wd - w.mul_w2(dz)
                dkap = (dk_target - kappa * dtau) / tau
                return dx, dz, ds, dtau, dkap

            dxa, dza, dsa, dta, dka = newton(-lam2, -tau * kappa, 1.0)
            a_aff = min(
                1.0,
                _max_step(s, dsa, dims),
                _max_step(z, dza, dims),
                tau / -dta if dta < 0 else np.inf,
                kappa / -dka if dka < 0 else np.inf,
            )
            mu_aff = (
                (s + a_aff * dsa) @ (z + a_aff * dza)
                + (tau + a_aff * dta) * (kappa + a_aff * dka)
            ) / (deg + 1)
            sigma = min(max((mu_aff / mu) ** 3, 0.0), 1.0)

            corr = _jordan(w.mul_winv(dsa), w.mul_w(dza), dims)
            ds_t = sigma * mu * e - lam2 - corr
            dk_t = sigma * mu - tau * kappa - dta * dka
            dx, dz, ds, dtau, dkap = newton(ds_t, dk_t, 1.0 - sigma)

            alpha = 0.99 * min(
                _max_step(s, ds, dims),
                _max_step(z, dz, dims),
                tau / -dtau if dtau < 0 else np.inf,
                kappa / -dkap if dkap < 0 else np.inf,
            )
            alpha = min(alpha, 1.0)
            if not np.isfinite(alpha) or alpha < 1e-10:
                break
            step = alpha * np.concatenate([dx, dz, ds, [dtau, dkap]])
            if not np.all(np.isfinite(step)):
                break
            x += alpha * dx
            z += alpha * dz
            s += alpha * ds
            tau += alpha * dtau
            kappa += alpha * dkap
        except (np.linalg.LinAlgError, ValueError):
            # numerical breakdown near the central-path boundary: stop and
            # report the best iterate seen
            break

    _, xb, sb, zb, rg = best
    return _ConicResult("max_iter", xb, sb, zb, iters, rg)


# ---------------------------------------------------------------------------
# QCQP -> SOCP reformulation


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Factor F with F^T F = A for PSD A; rows span only the active range."""
    lam, vec = np.linalg.eigh(a)
    top = max(lam[-1], 1.0)
    if lam[0] < -_EIG_NEG_TOL * top:
        raise ValueError(f"quadratic form is not PSD (min eigenvalue {lam[0]:.3e})")
    keep = lam > _EIG_CLIP * top
    return (vec[:, keep] * np.sqrt(lam[keep])).T


def _build_cone(problem: QcqpProblem):
    n = problem.n
    ny = n + 1  # epigraph variable appended last
    lin_rows, lin_h = [], []
    soc_rows, soc_h, soc_dims = [], [], []

    def add_quadratic(q: QuadExpr, epigraph: bool):
        scale = max(
            1.0,
            float(np.max(np.abs(q.A))) if q.A is not None else 0.0,
            float(np.max(np.abs(q.b))) if q.b.size else 0.0,
            abs(q.c),
        )
        a_u = np.zeros(ny)
        a_u[:n] = -q.b / scale
        if epigraph:
            a_u[n] = 1.0
        d_u = -q.c / scale
        f = _psd_sqrt(q.A / scale) if q.A is not None else np.zeros((0, n))
        r = f.shape[0]
        if r == 0:
            lin_rows.append(-a_u)
            lin_h.append(d_u)
            return
        rows = np.zeros((r + 2, ny))
        rows[0] = -a_u / 2.0
        rows[1] = a_u / 2.0
        rows[2:, :n] = -f
        soc_rows.append(rows)
        soc_h.append(np.concatenate(([(1.0 + d_u) / 2.0, (1.0 - d_u) / 2.0], np.zeros(r))))
        soc_dims.append(r + 2)

    for b, d in problem.lin_constraints:
        scale = max(1.0, float(np.max(np.abs(b))) if b.size else 0.0, abs(d))
        row = np.zeros(ny)
        row[:n] = b / scale
        lin_rows.append(row)
        lin_h.append(-d / scale)

    add_quadratic(problem.objective, epigraph=True)
    for q in problem.quad_constraints:
        add_quadratic(q, epigraph=False)

    blocks = lin_rows + list(soc_rows)
    g = np.vstack([np.atleast_2d(b) for b in blocks]) if blocks else np.zeros((0, ny))
    h = np.concatenate([np.atleast_1d(v) for v in lin_h + soc_h]) if blocks else np.zeros(0)
    dims = _Dims(l=len(lin_rows), soc=soc_dims)
    c = np.zeros(ny)
    c[n] = 1.0
    return c, g, h, dims


def solve(
    problem: QcqpProblem,
    feastol: float = 1e-8,
    reltol: float = 1e-7,
    abstol: float = 1e-9,
    max_iter: int = 200,
    x0: np.ndarray | None = None,
) -> QcqpSolution:
    """Solve a convex QCQP. Deterministic: no randomization anywhere."""
    if problem.n_constraints == 0:
        obj = problem.objective
        if obj.A is None:
            if np.any(obj.b):
                return QcqpSolution("unbounded", None, None, None, 0)
            return QcqpSolution("optimal", np.zeros(problem.n), obj.c, 0.0, 0, 0.0)
        x, *_ = np.linalg.lstsq(2.0 * obj.A, -obj.b, rcond=None)
        if not np.allclose(2.0 * obj.A @ x, -obj.b, atol=1e-9 * max(1, np.linalg.norm(obj.b))):
            return QcqpSolution("unbounded", None, None, None, 0)
        return QcqpSolution("optimal", x, obj.value(x), 0.0, 0, 0.0)

    c, g, h, dims = _build_cone(problem)
    hint = None
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        hint = np.concatenate([x0, [problem.objective.value(x0) + 1.0]])
    res = _solve_conic(c, g, h, dims, feastol, reltol, abstol, max_iter, x_hint=hint)

    if res.status == "primal_infeasible":
        return QcqpSolution("infeasible", None, None, None, res.iterations)
    if res.status == "dual_infeasible":
        return QcqpSolution("unbounded", None, None, None, res.iterations)
    x = res.x[: problem.n]
    status = "optimal" if res.status == "optimal" else "max_iter"
    return QcqpSolution(
        status=status,
        x_opt=x,
        objective_value=problem.objective.value(x),
        duality_gap=res.relgap,
        iterations=res.iterations,
        feasibility_violation=problem.max_violation(x),
    )


def verify_kkt(problem: QcqpProblem, solution: QcqpSolution, active_tol: float = 1e-6) -> KktReport:
    """First-order optimality check, independent of the interior-point path.

    Multipliers are re-derived from scratch by nonnegative least squares on
    the gradients of the active constraints.
    """
    if solution.x_opt is None:
        raise ValueError("solution carries no point to verify")
    x = solution.x_opt
    g0 = problem.objective.grad(x)
    vals = problem.constraint_values(x)
    grads = [q.grad(x) for q in problem.quad_constraints]
    grads += [b for b, _ in problem.lin_constraints]

    scale = np.array(
        [max(1.0, abs(v)) for v in vals]
    )
    active = np.abs(vals) <= active_tol * scale
    duals = np.zeros(len(vals))
    if np.any(active):
        a_mat = np.stack([grads[i] for i in np.flatnonzero(active)], axis=1)
        lam, _ = nnls(a_mat, -g0)
        duals[np.flatnonzero(active)] = lam
        resid = np.linalg.norm(g0 + a_mat @ lam)
    else:
        resid = np.linalg.norm(g0)
    comp = float(np.max(np.abs(duals * vals))) if len(vals) else 0.0
    return KktReport(
        stationarity_residual=float(resid / max(1.0, np.linalg.norm(g0))),
        complementarity=comp,
        max_violation=problem.max_violation(x),
        duals=duals,
    )
