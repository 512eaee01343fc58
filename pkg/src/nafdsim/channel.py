"""Multipath mmWave channel generation: steering vectors, path loss, fading.

Conventions: the downlink vector between T-RAU m and user k is stored as the
column vector whose conjugate transpose multiplies the transmit signal, i.e.
h[k, m] = sum_l conj(alpha_l) * v(theta_l).  Per-path gains are CN(0, beta),
so the expected squared norm of an L-path channel is L * beta.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .scenario import SPEED_OF_LIGHT, Layout, SystemConfig


@dataclass
class LargeScale:
    """Linear large-scale gains for the four link families."""

    beta_dl: np.ndarray   # (K, N_T)
    beta_ul: np.ndarray   # (J, N_R)
    beta_iri: np.ndarray  # (N_T, N_R)
    beta_iui: np.ndarray  # (K, J)


@dataclass
class ChannelSet:
    """One small-scale realization of every channel family."""

    h_dl: np.ndarray        # (K, N_T, M) complex
    g_ul: np.ndarray        # (J, N_R, M) complex
    h_iri_resid: np.ndarray  # (N_T, N_R, M, M) complex, i.i.d. CN(0, sigma2_iri)
    t_iui: np.ndarray       # (K, J) complex
    large_scale: LargeScale
    aod_dl: np.ndarray      # (K, N_T, L) radians
    aoa_ul: np.ndarray      # (J, N_R, L)
    aoa_iri: np.ndarray     # (N_T, N_R, L)
    aod_iri: np.ndarray     # (N_T, N_R, L)


def steering_vector(theta, m_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response, unit Euclidean norm.

    Entry p equals exp(j * pi * p * sin(theta)) / sqrt(M).  theta may be an
    array; the antenna axis is appended last.
    """
    theta = np.asarray(theta, dtype=float)
    p = np.arange(m_antennas)
    phase = np.pi * np.sin(theta)[..., None] * p
    return np.exp(1j * phase) / math.sqrt(m_antennas)


def free_space_pl_db(cfg: SystemConfig) -> float:
    """Reference-distance free-space loss 20*log10(4*pi*d0/lambda)."""
    lam = SPEED_OF_LIGHT / cfg.carrier_hz
    return 20.0 * math.log10(4.0 * math.pi * cfg.ref_dist_m / lam)


def pathloss_db(d, cfg: SystemConfig, rng: np.random.Generator):
    """Distance-dependent loss with log-normal shadowing, in dB.

    Distances below the reference distance are clamped (defensive: the
    protection radius normally keeps every link above d0).
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < cfg.ref_dist_m):
        warnings.warn("distance below reference clamped to d0", stacklevel=2)
        d = np.maximum(d, cfg.ref_dist_m)
    pl = free_space_pl_db(cfg) + 10.0 * cfg.pathloss_exp * np.log10(d / cfg.ref_dist_m)
    if cfg.shadow_sigma_db > 0:
        pl = pl + rng.normal(0.0, cfg.shadow_sigma_db, size=d.shape)
    return pl


def _beta_from_dist(d, cfg, rng):
    return 10.0 ** (-pathloss_db(d, cfg, rng) / 10.0)


def _pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


def draw_large_scale(layout: Layout, cfg: SystemConfig,
                     rng: np.random.Generator) -> LargeScale:
    """Per-link large-scale gains with independent shadowing per link."""
    return LargeScale(
        beta_dl=_beta_from_dist(_pairwise_dist(layout.dl_user_xy, layout.trau_xy), cfg, rng),
        beta_ul=_beta_from_dist(_pairwise_dist(layout.ul_user_xy, layout.rrau_xy), cfg, rng),
        beta_iri=_beta_from_dist(_pairwise_dist(layout.trau_xy, layout.rrau_xy), cfg, rng),
        beta_iui=_beta_from_dist(_pairwise_dist(layout.dl_user_xy, layout.ul_user_xy), cfg, rng),
    )


def _multipath(rng, beta, angles, m_antennas, conj_gain):
    """Sum of L steering vectors with CN(0, beta) gains.

    beta: (..., ) broadcastable over the leading axes of angles (..., L).
    """
    L = angles.shape[-1]
    shape = angles.shape
    g = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / math.sqrt(2.0)
    g = g * np.sqrt(beta)[..., None]
    if conj_gain:
        g = np.conj(g)
    v = steering_vector(angles, m_antennas)  # (..., L, M)
    return np.einsum("...l,...lm->...m", g, v)


def draw_channels(layout: Layout, cfg: SystemConfig,
                  rng: np.random.Generator) -> ChannelSet:
    """Draw one realization of all channel families.

    The full inter-RAU multipath channel is cancelled upstream; only the
    residual error matrix (i.i.d. Gaussian entries) enters the simulation.
    Its path angles are still drawn so the generator in `iri_channel` can be
    exercised deterministically from the same state.
    """
    K, J = cfg.n_dl_users, cfg.n_ul_users
    NT, NR, M, L = cfg.n_trau, cfg.n_rrau, cfg.antennas_per_rau, cfg.n_paths

    ls = draw_large_scale(layout, cfg, rng)
    aod_dl = rng.uniform(-np.pi, np.pi, size=(K, NT, L))
    aoa_ul = rng.uniform(-np.pi, np.pi, size=(J, NR, L))
    aoa_iri = rng.uniform(-np.pi, np.pi, size=(NT, NR, L))
    aod_iri = rng.uniform(-np.pi, np.pi, size=(NT, NR, L))

    h_dl = _multipath(rng, ls.beta_dl, aod_dl, M, conj_gain=True)
    g_ul = _multipath(rng, ls.beta_ul, aoa_ul, M, conj_gain=False)

    t = (rng.normal(size=(K, J)) + 1j * rng.normal(size=(K, J))) / math.sqrt(2.0)
    t_iui = t * np.sqrt(ls.beta_iui)

    s = math.sqrt(cfg.sigma2_iri_mw / 2.0)
    h_iri_resid = (rng.normal(scale=s, size=(NT, NR, M, M))
                   + 1j * rng.normal(scale=s, size=(NT, NR, M, M)))

    return ChannelSet(h_dl=h_dl, g_ul=g_ul, h_iri_resid=h_iri_resid,
                      t_iui=t_iui, large_scale=ls, aod_dl=aod_dl,
                      aoa_ul=aoa_ul, aoa_iri=aoa_iri, aod_iri=aod_iri)


def iri_channel(channels: ChannelSet, cfg: SystemConfig,
                rng: np.random.Generator) -> np.ndarray:
    """Full multipath inter-RAU channel matrices, (N_T, N_R, M, M).

    Kept for completeness; the optimization path only ever sees the residual
    error matrices after cancellation.
    """
    M, L = cfg.antennas_per_rau, cfg.n_paths
    beta = channels.large_scale.beta_iri
    shape = channels.aoa_iri.shape
    g = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / math.sqrt(2.0)
    g = g * np.sqrt(beta)[..., None]
    vr = steering_vector(channels.aoa_iri, M)  # (NT, NR, L, M)
    vt = steering_vector(channels.aod_iri, M)
    return np.einsum("mzl,mzlp,mzlq->mzpq", g, vr, np.conj(vt))
