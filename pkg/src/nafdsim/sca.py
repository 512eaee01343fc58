"""Iterative successive-convex-approximation loop for the weighted sum rate.

Each iteration linearizes the two log-det fronthaul constraints and the
concave part of the difference-of-concave objective around the current
iterate, then solves the resulting convex subproblem with the in-repo barrier
solver.  Because the linearizations are conservative (tight at the expansion
point, over-estimating elsewhere), every iterate stays feasible for the
original problem and the true objective is non-decreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import convex_core, link_metrics
from .beamforming import BeamformerSet
from .channel import ChannelSet
from .convex_core import ConvexProblem, SolveStatus
from .link_metrics import LN2, OptVars, QuantModel, RateReport, rate_report
from .scenario import SystemConfig

SIGMA2_FLOOR_MW = 1e-12
INIT_POWER_MARGIN = 0.8
INIT_SHRINK_STEPS = 60
FEAS_SLACK = 1e-9


class InfeasibleInitError(RuntimeError):
    """No strictly feasible starting point could be constructed."""


class ScaFailure(RuntimeError):
    """Subproblem solve failed; carries the iteration index."""


@dataclass
class LinearizedConstraint:
    """Record a^T x - w * ln(x_i) <= rhs (w = 0 means purely affine)."""

    coeffs: np.ndarray
    rhs: float
    log_var_index: int = -1
    log_weight: float = 0.0


class AffineModel:
    """Affine representations (in the stacked variable vector) of every
    quantity the subproblem needs.

    Variable order: eta (K), sigma2_dl (N_T), sigma2_ul (N_R), p_ul (J).
    """

    def __init__(self, beams: BeamformerSet, channels: ChannelSet,
                 cfg: SystemConfig, q: QuantModel):
        self.beams, self.channels, self.cfg, self.q = beams, channels, cfg, q
        K = beams.h_eff.shape[0]
        J = beams.v_rx.shape[0]
        NT = beams.f_digital.shape[0]
        NR = beams.u_analog.shape[0]
        n_rf = beams.f_digital.shape[1]
        self.K, self.J, self.NT, self.NR, self.n_rf = K, J, NT, NR, n_rf
        self.n = K + NT + NR + J
        self.sl_eta = slice(0, K)
        self.sl_sdl = slice(K, K + NT)
        self.sl_sul = slice(K + NT, K + NT + NR)
        self.sl_pul = slice(K + NT + NR, self.n)
        rho = q.rho

        f = beams.f_digital                       # (NT, N_RF, K)
        f_abs2 = np.abs(f) ** 2                   # |F_m[r,k]|^2
        h_bar = beams.h_eff.reshape(K, NT, n_rf)  # effective DL channels
        h_abs2 = np.abs(h_bar) ** 2

        # downlink rate denominators, affine in (eta, sigma2_dl, p_ul)
        self.den_dl = np.zeros((K, self.n))
        self.den_dl_const = np.full(K, cfg.noise_mw)
        self.den_dl[:, self.sl_eta] = rho * (1 - rho) * np.einsum(
            "kmr,mrj->kj", h_abs2, f_abs2)
        self.den_dl[:, self.sl_sdl] = (1 - rho) * h_abs2.sum(axis=2)
        self.den_dl[:, self.sl_pul] = np.abs(channels.t_iui) ** 2
        self.num_dl = self.den_dl.copy()
        self.num_dl[np.arange(K), np.arange(K)] += (1 - rho) ** 2
        self.num_dl_const = self.den_dl_const.copy()

        # uplink rate denominators
        self.den_ul = np.zeros((J, self.n))
        self.den_ul_const = np.zeros(J)
        self.sig_ul = np.zeros(J)  # |v^H g_eff|^2, coefficient of P_U,j
        for j in range(J):
            z = beams.assoc[j]
            v = beams.v_rx[j]
            u_m = np.einsum("mrs,s->mr", beams.g_resid[:, z], v)  # G_{m,z} v
            coup = np.einsum("r,mrs,msk->mk", np.conj(v),
                             np.conj(np.swapaxes(beams.g_resid[:, z], 1, 2)), f)
            self.den_ul[j, self.sl_eta] = (
                (1 - rho) ** 2 * np.sum(np.abs(coup) ** 2, axis=0)
                + rho * (1 - rho) * np.einsum("mr,mrk->k", np.abs(u_m) ** 2, f_abs2))
            self.den_ul[j, self.sl_sdl] = (1 - rho) * np.sum(np.abs(u_m) ** 2, axis=1)
            self.den_ul[j, K + NT + z] = float(np.real(np.vdot(v, v)))
            self.den_ul_const[j] = cfg.noise_mw * float(
                np.linalg.norm(beams.u_analog[z] @ v) ** 2)
            self.sig_ul[j] = float(np.abs(np.vdot(v, beams.g_eff[j, z])) ** 2)
        self.num_ul = self.den_ul.copy()
        self.num_ul[np.arange(J), K + NT + NR + np.arange(J)] += self.sig_ul
        self.num_ul_const = self.den_ul_const.copy()

        # per-T-RAU transmit power, affine in (eta, sigma2_dl)
        self.p_dl = np.zeros((NT, self.n))
        wf_norm2 = np.zeros((NT, K))
        for m in range(NT):
            wf = beams.w_analog[m] @ f[m]
            wf_norm2[m] = np.sum(np.abs(wf) ** 2, axis=0)
        col_norms = np.sum(np.abs(beams.w_analog) ** 2, axis=1)  # (NT, N_RF)
        self.p_dl[:, self.sl_eta] = ((1 - rho) ** 2 * wf_norm2
                                     + rho * (1 - rho)
                                     * np.einsum("mr,mrk->mk", col_norms, f_abs2))
        self.p_dl[np.arange(NT), K + np.arange(NT)] = (
            (1 - rho) * col_norms.sum(axis=1))

        # fixed pieces for the uplink fronthaul linearization
        self.gram = np.einsum("zpr,zps->zrs", np.conj(beams.u_analog),
                              beams.u_analog)  # (NR, N_RF, N_RF)
        self.gbar = np.transpose(beams.g_eff, (1, 0, 2))  # (NR, J, N_RF)
        self.p_dl_total = self.p_dl.sum(axis=0)  # coeffs of sum_m P_{D,m}

    def vars_to_vector(self, v: OptVars) -> np.ndarray:
        return v.to_vector()

    def vector_to_vars(self, x: np.ndarray) -> OptVars:
        return OptVars.from_vector(x, self.K, self.NT, self.NR, self.J)

    def eval_den_dl(self, x):
        return self.den_dl @ x + self.den_dl_const

    def eval_den_ul(self, x):
        return self.den_ul @ x + self.den_ul_const

    def eval_p_dl(self, x):
        return self.p_dl @ x

    def dl_gram(self, m, eta, s2):
        """A-matrix: sum_k f f^H eta_k + s2 I at T-RAU m."""
        f_m = self.beams.f_digital[m]
        return (f_m * eta) @ f_m.conj().T + s2 * np.eye(self.n_rf)

    def ul_gram(self, z, p_ul, p_dl_sum, s2):
        """B-matrix at R-RAU z given the previous-iterate powers."""
        g = self.gbar[z]
        return ((g.T * p_ul) @ np.conj(g)
                + (self.cfg.sigma2_iri_mw * p_dl_sum + self.cfg.noise_mw)
                * self.gram[z] + s2 * np.eye(self.n_rf))


@dataclass
class ScaState:
    """Expansion-point data for one SCA iteration."""

    iterate: OptVars
    objective_trace: list = field(default_factory=list)
    a_t: np.ndarray = None     # (NT, N_RF, N_RF)
    b_t: np.ndarray = None     # (NR, N_RF, N_RF)
    phi_dl: np.ndarray = None  # (K,)
    phi_ul: np.ndarray = None  # (J,)
    cq_n: np.ndarray = None    # (NT, N_RF, N_RF) diagonal blocks
    n: int = 0


def build_state(model: AffineModel, iterate: OptVars, n: int = 0) -> ScaState:
    """Evaluate all expansion-point matrices at the given iterate."""
    x = iterate.to_vector()
    a_t = np.stack([model.dl_gram(m, iterate.eta, iterate.sigma2_dl[m])
                    for m in range(model.NT)])
    p_dl_sum = float(model.eval_p_dl(x).sum())
    b_t = np.stack([model.ul_gram(z, iterate.p_ul, p_dl_sum,
                                  iterate.sigma2_ul[z])
                    for z in range(model.NR)])
    phi_dl = 1.0 / model.eval_den_dl(x)
    phi_ul = 1.0 / model.eval_den_ul(x)
    cq_n = link_metrics.quant_covariance_blocks(model.beams.f_digital,
                                                iterate, model.q)
    return ScaState(iterate=iterate, a_t=a_t, b_t=b_t, phi_dl=phi_dl,
                    phi_ul=phi_ul, cq_n=cq_n, n=n)


def linearize_dl_fronthaul(state: ScaState, model: AffineModel):
    """Conservative affine-minus-log form of each downlink fronthaul bound."""
    cfg, n_rf = model.cfg, model.n_rf
    out = []
    for m in range(model.NT):
        a_inv = np.linalg.inv(state.a_t[m])
        f_m = model.beams.f_digital[m]
        coeffs = np.zeros(model.n)
        coeffs[model.sl_eta] = np.real(np.einsum(
            "rk,rs,sk->k", np.conj(f_m), a_inv, f_m))
        coeffs[model.K + m] = float(np.real(np.trace(a_inv)))
        sign, logdet = np.linalg.slogdet(state.a_t[m])
        rhs = n_rf + cfg.c_dl_bpshz * LN2 - logdet
        out.append(LinearizedConstraint(coeffs=coeffs, rhs=rhs,
                                        log_var_index=model.K + m,
                                        log_weight=float(n_rf)))
    return out


def linearize_ul_fronthaul(state: ScaState, model: AffineModel):
    """Conservative affine-minus-log form of each uplink fronthaul bound."""
    cfg, n_rf = model.cfg, model.n_rf
    K, NT, NR = model.K, model.NT, model.NR
    out = []
    for z in range(NR):
        b_inv = np.linalg.inv(state.b_t[z])
        g = model.gbar[z]  # (J, N_RF)
        coeffs = np.zeros(model.n)
        coeffs[model.sl_pul] = np.real(np.einsum(
            "jr,rs,js->j", np.conj(g), b_inv, g))
        tr_gram = float(np.real(np.trace(model.gram[z] @ b_inv)))
        coeffs += cfg.sigma2_iri_mw * tr_gram * model.p_dl_total
        coeffs[K + NT + z] += float(np.real(np.trace(b_inv)))
        sign, logdet = np.linalg.slogdet(state.b_t[z])
        rhs = (cfg.c_ul_bpshz * LN2 + n_rf - logdet
               - cfg.noise_mw * tr_gram)
        out.append(LinearizedConstraint(coeffs=coeffs, rhs=rhs,
                                        log_var_index=K + NT + z,
                                        log_weight=float(n_rf)))
    return out


def linearize_h(state: ScaState, model: AffineModel):
    """First-order expansion of the subtracted concave objective part.

    Returns (const, coeffs) such that the affine surrogate is
    const + coeffs^T x, tight at the expansion point.
    """
    cfg = model.cfg
    x_n = state.iterate.to_vector()
    d_n = model.eval_den_dl(x_n)
    e_n = model.eval_den_ul(x_n)
    c_dl = cfg.weight_dl / LN2 * state.phi_dl   # = w_D / (ln2 * D_k)
    c_ul = cfg.weight_ul / LN2 * state.phi_ul
    coeffs = c_dl @ model.den_dl + c_ul @ model.den_ul
    h_at_n = (cfg.weight_dl * np.sum(np.log2(d_n))
              + cfg.weight_ul * np.sum(np.log2(e_n)))
    const = float(h_at_n - coeffs @ x_n)
    return const, coeffs


def build_subproblem(state: ScaState, model: AffineModel) -> ConvexProblem:
    """Assemble the convex subproblem around the current expansion point."""
    cfg = model.cfg
    h_const, h_coeffs = linearize_h(state, model)
    log_terms = []
    for k in range(model.K):
        log_terms.append((model.num_dl[k], model.num_dl_const[k],
                          cfg.weight_dl / LN2))
    for j in range(model.J):
        log_terms.append((model.num_ul[j], model.num_ul_const[j],
                          cfg.weight_ul / LN2))

    affine = [(model.p_dl[m], cfg.p_dl_max_mw) for m in range(model.NT)]
    aml = []
    for rec in linearize_dl_fronthaul(state, model):
        aml.append((rec.coeffs, rec.rhs, rec.log_var_index, rec.log_weight))
    for rec in linearize_ul_fronthaul(state, model):
        aml.append((rec.coeffs, rec.rhs, rec.log_var_index, rec.log_weight))

    lower = np.zeros(model.n)
    lower[model.sl_sdl] = SIGMA2_FLOOR_MW
    lower[model.sl_sul] = SIGMA2_FLOOR_MW
    upper = np.full(model.n, np.inf)
    upper[model.sl_pul] = cfg.p_ul_max_mw

    return ConvexProblem(n_vars=model.n, log_terms=log_terms,
                         linear_obj=-h_coeffs, obj_const=-h_const,
                         affine_cons=affine, affine_minus_log_cons=aml,
                         lower_bounds=lower, upper_bounds=upper)


def init_vars(cfg: SystemConfig, beams: BeamformerSet,
              channels: ChannelSet, q: QuantModel = None) -> OptVars:
    """Strictly feasible starting point for the original problem.

    Uplink powers start at half budget, compression variances at the noise
    floor; the common downlink power coefficient is scaled so the hottest
    T-RAU radiates 80% of its budget, then (eta, p_ul) are halved until both
    fronthaul constraints hold strictly.
    """
    if q is None:
        q = QuantModel(bits=cfg.dac_bits)
    model = AffineModel(beams, channels, cfg, q)
    K, NT, NR, J = model.K, model.NT, model.NR, model.J
    v = OptVars(eta=np.ones(K), sigma2_dl=np.full(NT, cfg.noise_mw),
                sigma2_ul=np.full(NR, cfg.noise_mw),
                p_ul=np.full(J, cfg.p_ul_max_mw / 2.0))
    # exact scale: max_m (u * a_m + b_m) = margin * P_D
    a = model.p_dl[:, model.sl_eta].sum(axis=1)
    b = model.p_dl[:, model.sl_sdl] @ v.sigma2_dl
    target = INIT_POWER_MARGIN * cfg.p_dl_max_mw
    u = np.min((target - b) / a)
    if u <= 0:
        raise InfeasibleInitError("compression leakage alone exceeds the "
                                  "T-RAU power budget")
    v.eta[:] = u

    margin_d = 1e-9 * max(1.0, cfg.c_dl_bpshz)
    margin_u = 1e-9 * max(1.0, cfg.c_ul_bpshz)
    for _ in range(INIT_SHRINK_STEPS):
        c_dl = np.array([link_metrics.fronthaul_dl(m, beams, v)
                         for m in range(NT)])
        c_ul = np.array([link_metrics.fronthaul_ul(z, beams, v, channels,
                                                   cfg, q)
                         for z in range(NR)])
        if (np.all(c_dl < cfg.c_dl_bpshz - margin_d)
                and np.all(c_ul < cfg.c_ul_bpshz - margin_u)):
            return v
        v.eta *= 0.5
        v.p_ul *= 0.5
    binding = ("downlink fronthaul"
               if np.any(c_dl >= cfg.c_dl_bpshz - margin_d)
               else "uplink fronthaul")
    raise InfeasibleInitError(
        f"no strictly feasible start after {INIT_SHRINK_STEPS} shrink steps; "
        f"binding constraint: {binding}")


def _restore_strict_feasibility(problem: ConvexProblem, x: np.ndarray,
                                x_init: np.ndarray,
                                model: AffineModel) -> np.ndarray:
    """Produce a strictly feasible start for the next subproblem.

    The previous SCA solution x typically sits on an active linearized
    constraint, so under the fresh linearization its slack can be zero or
    marginally negative at floating-point level.  Every linearized constraint
    has nonnegative coefficients on the (eta, p_ul) block, so scaling that
    block down strictly increases all slacks; escalate the scaling until the
    point is strictly interior.  The initializer is only a last resort: being
    feasible for the *original* problem does not make it feasible for the
    conservative surrogate.
    """
    def ok(pt):
        return problem.is_strictly_feasible(pt) and \
            np.all(problem.constraint_slacks(pt) > FEAS_SLACK)

    if ok(x):
        return x
    tau = 1e-9
    while tau < 1.0:
        cand = x.copy()
        cand[model.sl_eta] *= 1.0 - tau
        cand[model.sl_pul] *= 1.0 - tau
        if ok(cand):
            return cand
        tau *= 2.0
    tau = 1.0
    for _ in range(80):
        tau *= 0.5
        cand = x_init + tau * (x - x_init)
        if ok(cand):
            return cand
    return x_init.copy() if ok(x_init) else None


def run_sca(cfg: SystemConfig, beams: BeamformerSet, channels: ChannelSet,
            q: QuantModel = None):
    """Run the full SCA loop.

    Returns (final OptVars, RateReport at the final point, trace) where trace
    is a list of dict rows: iter, surrogate and true objectives in bps/Hz,
    and the worst original-constraint violations at that iterate.
    """
    if q is None:
        q = QuantModel(bits=cfg.dac_bits)
    model = AffineModel(beams, channels, cfg, q)
    v = init_vars(cfg, beams, channels, q)
    x_init = v.to_vector()
    x = x_init.copy()

    def trace_row(i, surrogate, report):
        return {
            "iter": i,
            "surrogate_obj_bpshz": surrogate,
            "true_obj_bpshz": report.objective,
            "max_cdl_violation": float(np.max(report.c_dl - cfg.c_dl_bpshz)),
            "max_cul_violation": float(np.max(report.c_ul - cfg.c_ul_bpshz)),
            "max_pd_violation": float(np.max(report.p_dl - cfg.p_dl_max_mw)),
        }

    report = rate_report(beams, v, q, channels, cfg)
    surr_prev = report.objective  # surrogate is tight at its expansion point
    trace = [trace_row(0, surr_prev, report)]
    obj_trace = [report.objective]

    for it in range(1, cfg.sca_max_iter + 1):
        state = build_state(model, v, n=it - 1)
        state.objective_trace = obj_trace
        problem = build_subproblem(state, model)
        x0 = _restore_strict_feasibility(problem, x, x_init, model)
        if x0 is None:
            # no strictly interior start exists for this surrogate; the
            # current iterate is feasible for the original problem, keep it
            break
        result = convex_core.solve(problem, x0)
        if result.status is SolveStatus.NUMERICAL_FAILURE:
            raise ScaFailure(f"subproblem solver failed at iteration {it}")
        x = result.x_opt
        v = model.vector_to_vars(x)
        report = rate_report(beams, v, q, channels, cfg)
        obj_trace.append(report.objective)
        trace.append(trace_row(it, result.obj, report))
        if abs(result.obj - surr_prev) <= cfg.sca_tol:
            break
        surr_prev = result.obj

    return v, report, trace
