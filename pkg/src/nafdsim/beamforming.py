"""Analog and digital beamformer construction.

Analog stages are constant-modulus phase-shifter matrices fitted to the
dominant channel subspace by alternating projection.  The digital stage is a
network-wide zero-forcing precoder (pseudo-inverse of the stacked effective
channel); each uplink user gets a normalized matched receive vector at its
strongest receive RAU.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .scenario import SystemConfig

ALTPROJ_ITERS = 50


class RankDeficientError(RuntimeError):
    """Stacked effective channel has (numerically) deficient row rank."""

    def __init__(self, users, sigma_min, sigma_max):
        self.users = users
        super().__init__(
            f"effective channel is rank deficient (sigma_min/sigma_max = "
            f"{sigma_min / max(sigma_max, 1e-300):.2e}); implicated users: {users}")


@dataclass
class BeamformerSet:
    """All beamforming matrices and effective channels for one realization."""

    w_analog: np.ndarray   # (N_T, M, N_RF)
    u_analog: np.ndarray   # (N_R, M, N_RF)
    f_digital: np.ndarray  # (N_T, N_RF, K)
    v_rx: np.ndarray       # (J, N_RF)
    h_eff: np.ndarray      # (K, N_T * N_RF) stacked effective downlink channels
    g_eff: np.ndarray      # (J, N_R, N_RF) effective uplink channels
    g_resid: np.ndarray    # (N_T, N_R, N_RF, N_RF) residual cross-RAU couplings
    assoc: np.ndarray      # (J,) serving R-RAU index per uplink user


def _unit_modulus(x: np.ndarray, m_antennas: int) -> np.ndarray:
    return np.exp(1j * np.angle(x)) / math.sqrt(m_antennas)


def _altproj_constant_modulus(target: np.ndarray, iters: int = ALTPROJ_ITERS):
    """Alternate between the unit-modulus set and the column span of `target`.

    target: (M, N_RF) with orthonormal columns.  Returns the unit-modulus
    matrix (entries of modulus 1/sqrt(M)) closest to the span, starting from
    the elementwise phase of the target.
    """
    m = target.shape[0]
    w = _unit_modulus(target, m)
    for _ in range(iters):
        # Procrustes projection onto {target @ R : R unitary}
        u, _, vh = np.linalg.svd(target.conj().T @ w)
        y = target @ (u @ vh)
        w = _unit_modulus(y, m)
    return w


def _analog_for_site(stacked: np.ndarray, n_rf: int) -> np.ndarray:
    """Analog matrix for one RAU from its (M, n_users) channel stack."""
    m = stacked.shape[0]
    if stacked.shape[1] == 0:
        return np.ones((m, n_rf), dtype=complex) / math.sqrt(m)
    u, _, _ = np.linalg.svd(stacked, full_matrices=True)
    return _altproj_constant_modulus(u[:, :n_rf])


def design_analog(channels: ChannelSet, cfg: SystemConfig):
    """Constant-modulus analog precoders W (per T-RAU) and combiners U (per R-RAU)."""
    n_rf = cfg.rf_chains
    w = np.stack([_analog_for_site(channels.h_dl[:, m, :].T, n_rf)
                  for m in range(cfg.n_trau)])
    u = np.stack([_analog_for_site(channels.g_ul[:, z, :].T, n_rf)
                  for z in range(cfg.n_rrau)])
    return w, u


def design_digital_zf(channels: ChannelSet, w_analog: np.ndarray,
                      rel_rank_tol: float = 1e-10):
    """Zero-forcing digital precoder across all T-RAUs.

    Returns (f_digital, h_eff) with h_eff rows h_k^H such that the stacked
    precoder satisfies H F = I.  Raises RankDeficientError when the smallest
    singular value of H falls below rel_rank_tol times the largest.
    """
    K = channels.h_dl.shape[0]
    n_t, m, n_rf = w_analog.shape
    # h_eff[k] stacks W_m^H h_{k,m} over m
    h_bar = np.einsum("mpr,kmp->kmr", np.conj(w_analog), channels.h_dl)
    h_eff = h_bar.reshape(K, n_t * n_rf)
    h_mat = np.conj(h_eff)  # rows h_k^H
    svals = np.linalg.svd(h_mat, compute_uv=False)
    if svals[-1] < rel_rank_tol * svals[0]:
        _, _, vh = np.linalg.svd(h_mat.conj().T, full_matrices=False)
        weights = np.abs(vh[-1])
        users = [int(i) for i in np.nonzero(weights > 0.1)[0]]
        raise RankDeficientError(users, svals[-1], svals[0])
    f = np.linalg.pinv(h_mat)  # (N_T*N_RF, K)
    f_digital = f.reshape(n_t, n_rf, K)
    return f_digital, h_eff


def associate_and_receive(channels: ChannelSet, u_analog: np.ndarray):
    """Serving R-RAU per uplink user and its normalized matched receive vector.

    assoc[j] is the R-RAU with the largest large-scale gain (ties -> lowest
    index); v_rx[j] satisfies v^H g_eff = 1 exactly.
    """
    beta = channels.large_scale.beta_ul  # (J, N_R)
    assoc = np.argmax(beta, axis=1)
    g_eff = np.einsum("zpr,jzp->jzr", np.conj(u_analog), channels.g_ul)
    J = g_eff.shape[0]
    v = np.empty((J, u_analog.shape[2]), dtype=complex)
    for j in range(J):
        gbar = g_eff[j, assoc[j]]
        nrm = np.real(np.vdot(gbar, gbar))
        if nrm <= 0.0:
            raise RankDeficientError([j], 0.0, 1.0)
        v[j] = gbar / nrm
    return assoc, v, g_eff


def build_beamformers(channels: ChannelSet, cfg: SystemConfig) -> BeamformerSet:
    """End-to-end beamformer construction for one channel realization."""
    w, u = design_analog(channels, cfg)
    f_digital, h_eff = design_digital_zf(channels, w)
    assoc, v_rx, g_eff = associate_and_receive(channels, u)
    # G_{m,z} = W_m^H Htilde_{m,z}^H U_z
    g_resid = np.einsum("mpr,mzqp,zqs->mzrs",
                        np.conj(w), np.conj(channels.h_iri_resid), u)
    return BeamformerSet(w_analog=w, u_analog=u, f_digital=f_digital,
                         v_rx=v_rx, h_eff=h_eff, g_eff=g_eff,
                         g_resid=g_resid, assoc=assoc)
