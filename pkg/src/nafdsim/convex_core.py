"""Log-barrier interior-point solver for the per-iteration convex subproblem.

Problem form (maximization):

    max  sum_i w_i * ln(a_i^T x + b_i)  +  d^T x  +  const
    s.t. a^T x <= r                    (affine)
         a^T x - w * ln(x_idx) <= r    (affine minus log)
         lb <= x <= ub                 (per-variable box, may be +-inf)

Sizes are tiny (tens of variables), so dense Newton steps with analytic
gradients and Hessians are the whole story.  Variables are rescaled to O(1)
internally using the magnitude of the starting point, which keeps the Newton
system well conditioned across the ~12 orders of magnitude the physical
quantities span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

BARRIER_MU = 10.0
BARRIER_T0 = 1.0
BARRIER_TOL = 1e-8
LINESEARCH_ALPHA = 0.25
LINESEARCH_BETA = 0.5
NEWTON_DECREMENT_TOL = 1e-10
MAX_TOTAL_ITERS = 500


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    NUMERICAL_FAILURE = "NumericalFailure"


class InfeasibleStartError(ValueError):
    """The supplied starting point is not strictly feasible."""


@dataclass
class ConvexProblem:
    n_vars: int
    log_terms: list = field(default_factory=list)        # (a, b, weight)
    linear_obj: np.ndarray = None                        # d
    obj_const: float = 0.0
    affine_cons: list = field(default_factory=list)      # (a, r)
    affine_minus_log_cons: list = field(default_factory=list)  # (a, r, idx, w)
    lower_bounds: np.ndarray = None
    upper_bounds: np.ndarray = None

    def __post_init__(self):
        n = self.n_vars
        if self.linear_obj is None:
            self.linear_obj = np.zeros(n)
        if self.lower_bounds is None:
            self.lower_bounds = np.full(n, -np.inf)
        if self.upper_bounds is None:
            self.upper_bounds = np.full(n, np.inf)

    def objective(self, x: np.ndarray) -> float:
        val = self.obj_const + float(self.linear_obj @ x)
        for a, b, w in self.log_terms:
            arg = float(a @ x) + b
            if arg <= 0:
                return -np.inf
            val += w * math.log(arg)
        return val

    def constraint_slacks(self, x: np.ndarray) -> np.ndarray:
        """Slack r - g(x) for every inequality (positive means feasible)."""
        s = []
        for a, r in self.affine_cons:
            s.append(r - float(a @ x))
        for a, r, idx, w in self.affine_minus_log_cons:
            if x[idx] <= 0:
                s.append(-np.inf)
            else:
                s.append(r - float(a @ x) + w * math.log(x[idx]))
        return np.array(s)

    def is_strictly_feasible(self, x: np.ndarray, margin: float = 0.0) -> bool:
        if np.any(x < self.lower_bounds + margin) or np.any(x > self.upper_bounds - margin):
            return False
        for a, b, w in self.log_terms:
            if float(a @ x) + b <= margin:
                return False
        slacks = self.constraint_slacks(x)
        return bool(np.all(slacks > margin))


@dataclass
class SolveResult:
    x_opt: np.ndarray
    obj: float
    kkt_residual: float
    barrier_outer_iters: int
    status: SolveStatus
    t_final: float = 0.0


class _ScaledProblem:
    """Problem with x = scales * y; all constraint data precomputed as arrays."""

    def __init__(self, prob: ConvexProblem, scales: np.ndarray):
        self.scales = scales
        n = prob.n_vars
        self.n = n

        # objective log terms
        self.la = np.array([a * scales for a, _, _ in prob.log_terms]).reshape(-1, n)
        self.lb = np.array([b for _, b, _ in prob.log_terms])
        self.lw = np.array([w for _, _, w in prob.log_terms])
        self.d = prob.linear_obj * scales

        # affine constraints g = A y - r <= 0
        rows, rhs = [], []
        for a, r in prob.affine_cons:
            rows.append(a * scales)
            rhs.append(r)
        self.A = np.array(rows).reshape(-1, n)
        self.r = np.array(rhs)

        # affine-minus-log constraints
        rows, rhs, idxs, ws = [], [], [], []
        for a, r, idx, w in prob.affine_minus_log_cons:
            rows.append(a * scales)
            # a^T x - w ln x_i <= r  with x_i = s_i y_i:
            # a_s^T y - w ln y_i <= r + w ln s_i
            rows[-1] = a * scales
            rhs.append(r + w * math.log(scales[idx]))
            idxs.append(idx)
            ws.append(w)
        self.Am = np.array(rows).reshape(-1, n)
        self.rm = np.array(rhs)
        self.mi = np.array(idxs, dtype=int)
        self.mw = np.array(ws)

        self.lo = prob.lower_bounds / scales
        self.hi = prob.upper_bounds / scales
        self.lo_idx = np.nonzero(np.isfinite(self.lo))[0]
        self.hi_idx = np.nonzero(np.isfinite(self.hi))[0]

        self.n_cons = (len(self.r) + len(self.rm)
                       + len(self.lo_idx) + len(self.hi_idx))

        # Fused constant data: one matvec yields [log args | affine slacks |
        # affine part of the minus-log slacks] for any point.
        self.n_log, self.n_aff, self.n_ml = len(self.lb), len(self.r), len(self.rm)
        self.rows_const = np.vstack([
            self.la.reshape(-1, n), -self.A.reshape(-1, n),
            -self.Am.reshape(-1, n)])
        self.offs = np.concatenate([self.lb, self.r, self.rm])
        self.ml_rows = self.n_log + self.n_aff + np.arange(self.n_ml)

    def fused_vals(self, y):
        """[log args, affine slacks, rm - Am @ y] in one matvec."""
        return self.rows_const @ y + self.offs

    def log_args(self, y):
        return self.la @ y + self.lb

    def obj(self, y):
        args = self.log_args(y)
        if np.any(args <= 0):
            return -np.inf
        return float(self.lw @ np.log(args) + self.d @ y)

    def slacks(self, y):
        """All barrier slacks; any non-positive entry means infeasible."""
        s_aff = self.r - self.A @ y
        yi = y[self.mi]
        if np.any(yi <= 0):
            s_ml = np.full(len(self.rm), -1.0)
        else:
            s_ml = self.rm - self.Am @ y + self.mw * np.log(yi)
        s_lo = y[self.lo_idx] - self.lo[self.lo_idx]
        s_hi = self.hi[self.hi_idx] - y[self.hi_idx]
        return s_aff, s_ml, s_lo, s_hi

    def barrier_value(self, y, t):
        args = self.log_args(y)
        if np.any(args <= 0):
            return -np.inf
        s_aff, s_ml, s_lo, s_hi = self.slacks(y)
        allpos = (np.all(s_aff > 0) and np.all(s_ml > 0)
                  and np.all(s_lo > 0) and np.all(s_hi > 0))
        if not allpos:
            return -np.inf
        val = t * (float(self.lw @ np.log(args)) + float(self.d @ y))
        val += float(np.sum(np.log(s_aff))) + float(np.sum(np.log(s_ml)))
        val += float(np.sum(np.log(s_lo))) + float(np.sum(np.log(s_hi)))
        return val

    class _Ray:
        """Barrier values along y + s*step, with all matvecs hoisted.

        Every affine-like slack (objective log arguments, affine constraints,
        box bounds, log-variable positivity) lives in one fused vector so each
        line-search evaluation costs two logs and two reductions.
        """

        def __init__(self, sp, y, step, t):
            self.sp, self.t = sp, t
            n_log, n_ml = sp.n_log, sp.n_ml
            base = sp.fused_vals(y)
            dirv = sp.rows_const @ step
            cut = n_log + sp.n_aff
            # fused layout: [log args | affine | lower box | upper box | y_i]
            self.lin0 = np.concatenate([
                base[:cut],
                y[sp.lo_idx] - sp.lo[sp.lo_idx],
                sp.hi[sp.hi_idx] - y[sp.hi_idx],
                y[sp.mi],
            ])
            self.lin1 = np.concatenate([
                dirv[:cut],
                step[sp.lo_idx],
                -step[sp.hi_idx],
                step[sp.mi],
            ])
            # log weights: t*lw on the objective args, 1 on plain slacks,
            # 0 on the trailing y_i block (it only feeds the ml slacks).
            w = np.ones(len(self.lin0))
            w[:n_log] = t * sp.lw
            w[len(w) - n_ml:] = 0.0
            self.logw = w
            self.n_ml = n_ml
            self.ml_aff0 = base[cut:]
            self.ml_aff1 = dirv[cut:]
            self.d0 = float(sp.d @ y)
            self.d1 = float(sp.d @ step)

        def max_affine_step(self):
            """Largest s keeping every affine-like slack positive."""
            dec = self.lin1 < 0
            if not dec.any():
                return np.inf
            return float(np.min(-self.lin0[dec] / self.lin1[dec]))

        def value(self, s):
            lin = self.lin0 + s * self.lin1
            if lin.size and np.min(lin) <= 0:
                return -np.inf
            loglin = np.log(lin)
            val = self.t * (self.d0 + s * self.d1) + float(self.logw @ loglin)
            if self.n_ml:
                sml = (self.ml_aff0 + s * self.ml_aff1
                       + self.sp.mw * loglin[len(lin) - self.n_ml:])
                if np.min(sml) <= 0:
                    return -np.inf
                val += float(np.sum(np.log(sml)))
            return val

    def barrier_grad_hess(self, y, t):
        """Gradient and Hessian of t*objective + sum(ln slack).

        All dense rows (objective logs, affine constraints, affine-minus-log
        constraints) are stacked so the Hessian costs one weighted matmul;
        box terms and the log-variable curvature are diagonal corrections.
        """
        n = self.n
        hdiag = np.zeros(n)
        n_log, n_aff, n_ml = self.n_log, self.n_aff, self.n_ml

        vals = self.fused_vals(y)
        args = vals[:n_log]
        s_aff = vals[n_log:n_log + n_aff]
        coef = np.empty(n_log + n_aff + n_ml)   # gradient weights
        wts = np.empty_like(coef)               # Hessian weights
        coef[:n_log] = t * self.lw / args
        wts[:n_log] = t * self.lw / args ** 2
        coef[n_log:n_log + n_aff] = 1.0 / s_aff
        wts[n_log:n_log + n_aff] = 1.0 / s_aff ** 2

        if n_ml:
            rows = self.rows_const.copy()
            yi = y[self.mi]
            s_ml = vals[n_log + n_aff:] + self.mw * np.log(yi)
            rows[self.ml_rows, self.mi] += self.mw / yi
            coef[n_log + n_aff:] = 1.0 / s_ml
            wts[n_log + n_aff:] = 1.0 / s_ml ** 2
            np.subtract.at(hdiag, self.mi, self.mw / (yi ** 2 * s_ml))
        else:
            rows = self.rows_const

        g = t * self.d + rows.T @ coef
        h = -((rows.T * wts) @ rows)
        s_lo = y[self.lo_idx] - self.lo[self.lo_idx]
        s_hi = self.hi[self.hi_idx] - y[self.hi_idx]
        if len(self.lo_idx):
            g[self.lo_idx] += 1.0 / s_lo
            hdiag[self.lo_idx] -= 1.0 / s_lo ** 2
        if len(self.hi_idx):
            g[self.hi_idx] -= 1.0 / s_hi
            hdiag[self.hi_idx] -= 1.0 / s_hi ** 2
        h[np.arange(n), np.arange(n)] += hdiag
        return g, h


def solve(problem: ConvexProblem, x0: np.ndarray) -> SolveResult:
    """Barrier interior-point maximization from a strictly feasible start."""
    x0 = np.asarray(x0, dtype=float)
    if not problem.is_strictly_feasible(x0):
        raise InfeasibleStartError("starting point is not strictly feasible")

    # zero entries get unit scale; a zero scale would freeze the coordinate
    scales = np.where(np.abs(x0) > 0, np.abs(x0), 1.0)
    sp = _ScaledProblem(problem, scales)
    y = x0 / scales

    t = BARRIER_T0
    total_iters = 0
    outer = 0
    status = SolveStatus.OPTIMAL
    m = max(sp.n_cons, 1)

    while True:
        outer += 1
        # Newton centering for current t
        for _ in range(100):
            if total_iters >= MAX_TOTAL_ITERS:
                status = SolveStatus.MAX_ITER
                break
            total_iters += 1
            g, h = sp.barrier_grad_hess(y, t)
            reg = 0.0
            step = None
            while True:
                try:
                    step = np.linalg.solve(-(h - reg * np.eye(sp.n)), g)
                    if np.all(np.isfinite(step)) and float(g @ step) >= 0:
                        break
                except np.linalg.LinAlgError:
                    pass
                reg = 1e-10 if reg == 0.0 else reg * 10.0
                if reg > 1e-2:
                    return SolveResult(y * scales, problem.objective(y * scales),
                                       np.inf, outer, SolveStatus.NUMERICAL_FAILURE, t)
            decr = float(g @ step)
            if decr / 2.0 <= NEWTON_DECREMENT_TOL:
                break
            ray = _ScaledProblem._Ray(sp, y, step, t)
            val0 = ray.value(0.0)
            s = min(1.0, 0.99 * ray.max_affine_step())
            ok = False
            for _bt in range(60):
                if ray.value(s) >= val0 + LINESEARCH_ALPHA * s * decr:
                    ok = True
                    break
                s *= LINESEARCH_BETA
            if not ok:
                break  # no progress possible at fp precision
            y = y + s * step
        if status is SolveStatus.MAX_ITER:
            break
        if m / t <= BARRIER_TOL:
            break
        t *= BARRIER_MU

    x = y * scales
    res = check_kkt(problem, x, t)
    if status is SolveStatus.OPTIMAL and res > 1e-6:
        status = SolveStatus.MAX_ITER
    return SolveResult(x_opt=x, obj=problem.objective(x), kkt_residual=res,
                       barrier_outer_iters=outer, status=status, t_final=t)


def check_kkt(problem: ConvexProblem, x: np.ndarray,
              t: float = None) -> float:
    """Estimated suboptimality of x, via the barrier duality-gap certificate.

    For a point centered at barrier parameter t the gap to the optimum is at
    most m/t (m = number of inequality constraints).  Distance from the
    central path is measured by the Newton decrement lambda of the barrier
    objective, which is affine-invariant and therefore immune to the extreme
    Hessian conditioning near active constraints.  Points close to the path
    (lambda < 1/2) get the certified bound m/t + lambda^2; points far from it
    return lambda itself, which is large.
    """
    x = np.asarray(x, dtype=float)
    if t is None:
        t = max(problem.n_vars, 1) / BARRIER_TOL
    scales = np.where(np.abs(x) > 0, np.abs(x), 1.0)
    sp = _ScaledProblem(problem, scales)
    y = x / scales
    g, h = sp.barrier_grad_hess(y, t)
    lam2 = None
    try:
        step = np.linalg.solve(-h, g)
        val = float(g @ step)
        if np.isfinite(val) and val >= 0:
            lam2 = val
    except np.linalg.LinAlgError:
        pass
    if lam2 is None:
        # indefinite or singular Hessian: fall back to the raw gradient norm
        return float(np.linalg.norm(g)) / max(t, 1.0)
    lam = math.sqrt(lam2)
    if lam >= 0.5:
        return lam
    return max(sp.n_cons, 1) / t + lam2
