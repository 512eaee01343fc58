"""Closed-form link quantities: rates, fronthaul capacities, transmit power.

Everything here is a pure evaluation at a fixed operating point (beamformers
plus the optimization variables).  Units: powers and variances in linear mW,
rates and capacities in bps/Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamforming import BeamformerSet
from .channel import ChannelSet
from .scenario import SystemConfig

LN2 = math.log(2.0)

# Minimum normalized MSE of a B-bit minimum-MSE scalar quantizer on a
# unit-variance Gaussian input, per real dimension.  Bits 1..6 are frozen from
# the numerical oracle in scripts/distortion_oracle.py; higher resolutions use
# the high-rate approximation (pi*sqrt(3)/2) * 2^(-2B), accurate to ~2% there.
_RHO_TABLE = {
    1: 0.36338022763,
    2: 0.11748184783,
    3: 0.03454776079,
    4: 0.00950100801,
    5: 0.00250466836,
    6: 0.00064423967,
}


def rho_for_bits(bits: int) -> float:
    """Quantization distortion factor for a B-bit DAC."""
    if not 1 <= int(bits) <= 16:
        raise ValueError(f"bits must be in [1, 16], got {bits}")
    bits = int(bits)
    if bits in _RHO_TABLE:
        return _RHO_TABLE[bits]
    return (math.pi * math.sqrt(3.0) / 2.0) * 2.0 ** (-2 * bits)


@dataclass
class QuantModel:
    """DAC resolution and the induced distortion factor."""

    bits: int
    rho: float = field(default=None)

    def __post_init__(self):
        if self.rho is None:
            self.rho = rho_for_bits(self.bits)


@dataclass
class OptVars:
    """The optimization variable set: per-user power coefficients, per-RAU
    compression-noise variances and uplink user powers (all linear mW)."""

    eta: np.ndarray        # (K,)
    sigma2_dl: np.ndarray  # (N_T,)
    sigma2_ul: np.ndarray  # (N_R,)
    p_ul: np.ndarray       # (J,)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.eta, self.sigma2_dl, self.sigma2_ul, self.p_ul])

    @classmethod
    def from_vector(cls, x: np.ndarray, k: int, n_t: int, n_r: int, j: int):
        parts = np.split(np.asarray(x, dtype=float),
                         [k, k + n_t, k + n_t + n_r])
        return cls(eta=parts[0], sigma2_dl=parts[1], sigma2_ul=parts[2],
                   p_ul=parts[3])

    def copy(self):
        return OptVars(self.eta.copy(), self.sigma2_dl.copy(),
                       self.sigma2_ul.copy(), self.p_ul.copy())


@dataclass
class RateReport:
    """Per-link rates, fronthaul loads, transmit powers and the weighted sum."""

    r_dl: np.ndarray   # (K,) bps/Hz
    r_ul: np.ndarray   # (J,) bps/Hz
    c_dl: np.ndarray   # (N_T,) bps/Hz
    c_ul: np.ndarray   # (N_R,) bps/Hz
    p_dl: np.ndarray   # (N_T,) mW
    objective: float   # bps/Hz

    CSV_HEADER = ("sum_r_dl,sum_r_ul,objective_bpshz,max_c_dl,max_c_ul,max_p_dl_mw")

    def csv_row(self) -> str:
        vals = [self.r_dl.sum(), self.r_ul.sum(), self.objective,
                self.c_dl.max(), self.c_ul.max(), self.p_dl.max()]
        return ",".join("%.12g" % v for v in vals)


def quant_covariance_blocks(f_digital: np.ndarray, vars: OptVars,
                            q: QuantModel) -> np.ndarray:
    """Diagonal blocks of the total-noise covariance, one per T-RAU.

    Block m is rho(1-rho) diag(F_m eta F_m^H) + (1-rho) sigma2_dl[m] I.
    Returns (N_T, N_RF, N_RF); the full covariance is block-diagonal.
    """
    rho = q.rho
    n_t, n_rf, _ = f_digital.shape
    diag_sig = np.einsum("mrk,k,mrk->mr", f_digital, vars.eta,
                         np.conj(f_digital)).real
    blocks = np.zeros((n_t, n_rf, n_rf), dtype=complex)
    idx = np.arange(n_rf)
    blocks[:, idx, idx] = (rho * (1.0 - rho) * diag_sig
                           + (1.0 - rho) * vars.sigma2_dl[:, None])
    return blocks


def quant_covariance(f_digital: np.ndarray, vars: OptVars,
                     q: QuantModel) -> np.ndarray:
    """Full block-diagonal covariance matrix, (N_T*N_RF, N_T*N_RF)."""
    blocks = quant_covariance_blocks(f_digital, vars, q)
    n_t, n_rf, _ = blocks.shape
    full = np.zeros((n_t * n_rf, n_t * n_rf), dtype=complex)
    for m in range(n_t):
        full[m * n_rf:(m + 1) * n_rf, m * n_rf:(m + 1) * n_rf] = blocks[m]
    return full


def _dl_denominator(k, beams, vars, q, channels, cfg):
    cq = quant_covariance_blocks(beams.f_digital, vars, q)
    n_t, n_rf = cq.shape[0], cq.shape[1]
    hk = beams.h_eff[k].reshape(n_t, n_rf)
    quant = sum(np.real(np.conj(hk[m]) @ cq[m] @ hk[m]) for m in range(n_t))
    cross = float(np.abs(channels.t_iui[k]) ** 2 @ vars.p_ul)
    return quant + cross + cfg.noise_mw


def downlink_rate(k: int, beams: BeamformerSet, vars: OptVars, q: QuantModel,
                  channels: ChannelSet, cfg: SystemConfig) -> float:
    """Achievable-rate lower bound of downlink user k, bps/Hz."""
    den = _dl_denominator(k, beams, vars, q, channels, cfg)
    if den <= 0:
        raise ValueError(f"non-positive rate denominator for downlink user {k}")
    return math.log2(1.0 + (1.0 - q.rho) ** 2 * vars.eta[k] / den)


def _ul_denominator(j, beams, vars, q, channels, cfg):
    rho = q.rho
    z = beams.assoc[j]
    v = beams.v_rx[j]
    n_t = beams.f_digital.shape[0]
    # A: residual cross-RAU leakage of the precoded downlink signals
    a = 0.0
    for m in range(n_t):
        coup = v.conj() @ beams.g_resid[m, z].conj().T @ beams.f_digital[m]
        a += float(vars.eta @ np.abs(coup) ** 2)
    a *= (1.0 - rho) ** 2
    # B: compression-plus-quantization noise through the same couplings
    cq = quant_covariance_blocks(beams.f_digital, vars, q)
    b = 0.0
    for m in range(n_t):
        u_m = beams.g_resid[m, z] @ v  # G_{m,z} v
        b += float(np.real(np.conj(u_m) @ cq[m] @ u_m))
    c = cfg.noise_mw * float(np.linalg.norm(beams.u_analog[z] @ v) ** 2)
    d = vars.sigma2_ul[z] * float(np.real(np.vdot(v, v)))
    return a + b + c + d


def uplink_rate(j: int, beams: BeamformerSet, vars: OptVars, q: QuantModel,
                channels: ChannelSet, cfg: SystemConfig) -> float:
    """Achievable-rate lower bound of uplink user j, bps/Hz."""
    den = _ul_denominator(j, beams, vars, q, channels, cfg)
    if den <= 0:
        raise ValueError(f"non-positive rate denominator for uplink user {j}")
    z = beams.assoc[j]
    sig = vars.p_ul[j] * float(np.abs(np.vdot(beams.v_rx[j], beams.g_eff[j, z])) ** 2)
    return math.log2(1.0 + sig / den)


def _logdet_h(mat: np.ndarray) -> float:
    """log2 det of a Hermitian PSD matrix via eigenvalues."""
    w = np.linalg.eigvalsh(mat)
    return float(np.sum(np.log2(w)))


def fronthaul_dl(m: int, beams: BeamformerSet, vars: OptVars) -> float:
    """Downlink fronthaul rate demand of T-RAU m, bps/Hz."""
    s2 = vars.sigma2_dl[m]
    if s2 <= 0:
        raise ValueError("sigma2_dl must be strictly positive")
    f_m = beams.f_digital[m]  # (N_RF, K)
    n_rf = f_m.shape[0]
    mat = (f_m * vars.eta) @ f_m.conj().T + s2 * np.eye(n_rf)
    return _logdet_h(mat) - n_rf * math.log2(s2)


def transmit_power(m: int, beams: BeamformerSet, vars: OptVars,
                   q: QuantModel) -> float:
    """Expected radiated power of T-RAU m, linear mW."""
    rho = q.rho
    w_m = beams.w_analog[m]
    f_m = beams.f_digital[m]
    wf = w_m @ f_m  # (M, K)
    sig = float(vars.eta @ np.sum(np.abs(wf) ** 2, axis=0))
    diag_sig = np.einsum("rk,k,rk->r", f_m, vars.eta, np.conj(f_m)).real
    col_norms = np.sum(np.abs(w_m) ** 2, axis=0)  # per-phase-shifter column power
    quant = float(col_norms @ diag_sig)
    leak = vars.sigma2_dl[m] * float(np.sum(np.abs(w_m) ** 2))
    return ((1.0 - rho) ** 2 * sig + rho * (1.0 - rho) * quant
            + (1.0 - rho) * leak)


def fronthaul_ul(z: int, beams: BeamformerSet, vars: OptVars,
                 channels: ChannelSet, cfg: SystemConfig,
                 q: QuantModel) -> float:
    """Uplink fronthaul rate demand of R-RAU z, bps/Hz.

    Needs the quantization model because the transmit powers of the T-RAUs
    enter through the residual cross-RAU interference term.
    """
    s2 = vars.sigma2_ul[z]
    if s2 <= 0:
        raise ValueError("sigma2_ul must be strictly positive")
    n_t, n_rf = beams.f_digital.shape[0], beams.f_digital.shape[1]
    gbar = beams.g_eff[:, z, :]  # rows are the effective uplink channels
    gram = beams.u_analog[z].conj().T @ beams.u_analog[z]
    p_d_total = sum(transmit_power(m, beams, vars, q) for m in range(n_t))
    mat = ((gbar.T * vars.p_ul) @ np.conj(gbar)
           + (cfg.sigma2_iri_mw * p_d_total + cfg.noise_mw) * gram
           + s2 * np.eye(n_rf))
    return _logdet_h(mat) - n_rf * math.log2(s2)


def rate_report(beams: BeamformerSet, vars: OptVars, q: QuantModel,
                channels: ChannelSet, cfg: SystemConfig) -> RateReport:
    """Evaluate every reported quantity at one operating point."""
    k_n = beams.h_eff.shape[0]
    j_n = beams.v_rx.shape[0]
    n_t = beams.f_digital.shape[0]
    n_r = beams.u_analog.shape[0]
    r_dl = np.array([downlink_rate(k, beams, vars, q, channels, cfg)
                     for k in range(k_n)])
    r_ul = np.array([uplink_rate(j, beams, vars, q, channels, cfg)
                     for j in range(j_n)])
    c_dl = np.array([fronthaul_dl(m, beams, vars) for m in range(n_t)])
    c_ul = np.array([fronthaul_ul(z, beams, vars, channels, cfg, q)
                     for z in range(n_r)])
    p_dl = np.array([transmit_power(m, beams, vars, q) for m in range(n_t)])
    obj = cfg.weight_dl * r_dl.sum() + cfg.weight_ul * r_ul.sum()
    return RateReport(r_dl=r_dl, r_ul=r_ul, c_dl=c_dl, c_ul=c_ul, p_dl=p_dl,
                      objective=float(obj))
