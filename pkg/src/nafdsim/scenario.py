"""System configuration and random geometry for the cell-free full-duplex network.

All powers are converted from dBm to linear milliwatts exactly once, at config
load; every downstream computation works in linear scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

SPEED_OF_LIGHT = 299792458.0


class ConfigError(ValueError):
    """Raised when a configuration file is malformed or violates an invariant."""


class GeometryError(RuntimeError):
    """Raised when layout generation cannot satisfy the protection distance."""


def dbm_to_mw(x_dbm: float) -> float:
    return 10.0 ** (x_dbm / 10.0)


def mw_to_dbm(x_mw: float) -> float:
    return 10.0 * math.log10(x_mw)


@dataclass
class SystemConfig:
    """Full parameter set: network dimensions, RF, propagation and solver knobs.

    Defaults reproduce the reference simulation setup.
    """

    n_trau: int = 6
    n_rrau: int = 6
    n_dl_users: int = 4
    n_ul_users: int = 4
    antennas_per_rau: int = 6
    rf_chains: int = 3
    n_paths: int = 6
    radius_m: float = 60.0
    protection_m: float = 5.0
    carrier_hz: float = 28e9
    bandwidth_hz: float = 100e6
    noise_figure_db: float = 9.0
    pathloss_exp: float = 2.92
    shadow_sigma_db: float = 8.7
    ref_dist_m: float = 1.0
    p_dl_max_dbm: float = 30.0
    p_ul_max_dbm: float = 27.0
    residual_iri_dbm: float = -105.0
    dac_bits: int = 1
    c_dl_bpshz: float = 26.0
    c_ul_bpshz: float = 26.0
    weight_dl: float = 0.5
    weight_ul: float = 0.5
    seed: int = 0
    sca_tol: float = 1e-3
    sca_max_iter: int = 200
    mode: str = "NAFD"

    # linear-scale conveniences, filled in __post_init__ (all in mW)
    p_dl_max_mw: float = field(init=False, repr=False, default=0.0)
    p_ul_max_mw: float = field(init=False, repr=False, default=0.0)
    sigma2_iri_mw: float = field(init=False, repr=False, default=0.0)
    noise_mw: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        self.validate()
        self.p_dl_max_mw = dbm_to_mw(self.p_dl_max_dbm)
        self.p_ul_max_mw = dbm_to_mw(self.p_ul_max_dbm)
        self.sigma2_iri_mw = dbm_to_mw(self.residual_iri_dbm)
        self.noise_mw = dbm_to_mw(noise_power_dbm(self))

    def validate(self):
        c = self
        def req(cond, name):
            if not cond:
                raise ConfigError(f"config invariant violated: {name}")
        req(abs(c.weight_dl + c.weight_ul - 1.0) < 1e-12, "weights must sum to 1")
        req(c.weight_dl >= 0 and c.weight_ul >= 0, "weights must be non-negative")
        req(c.n_dl_users <= c.n_trau * c.rf_chains,
            "n_dl_users must not exceed n_trau * rf_chains (ZF feasibility)")
        req(c.rf_chains <= c.antennas_per_rau, "rf_chains must not exceed antennas_per_rau")
        req(c.n_paths >= 1, "n_paths must be at least 1")
        req(c.protection_m < c.radius_m, "protection_m must be below radius_m")
        for name in ("n_trau", "n_rrau", "n_dl_users", "n_ul_users",
                     "antennas_per_rau", "rf_chains"):
            req(getattr(c, name) >= 1, f"{name} must be positive")
        for name in ("radius_m", "carrier_hz", "bandwidth_hz", "ref_dist_m",
                     "c_dl_bpshz", "c_ul_bpshz", "sca_tol"):
            req(getattr(c, name) > 0, f"{name} must be strictly positive")
        req(c.protection_m >= 0, "protection_m must be non-negative")
        req(c.shadow_sigma_db >= 0, "shadow_sigma_db must be non-negative")
        req(1 <= c.dac_bits <= 16, "dac_bits must be in [1, 16]")
        req(c.mode in ("NAFD", "CCFD"), "mode must be NAFD or CCFD")
        if c.mode == "CCFD":
            req(c.n_trau == c.n_rrau, "CCFD mode requires n_trau == n_rrau")
        req(c.sca_max_iter >= 1, "sca_max_iter must be positive")


_CONFIG_KEYS = None


def _config_keys():
    global _CONFIG_KEYS
    if _CONFIG_KEYS is None:
        _CONFIG_KEYS = {f.name for f in fields(SystemConfig) if f.init}
    return _CONFIG_KEYS


def load_config(path) -> SystemConfig:
    """Load a flat JSON config; missing keys take the built-in defaults.

    Unknown keys are an error, as are invariant violations (reported by name).
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    unknown = set(raw) - _config_keys()
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return SystemConfig(**raw)


def noise_power_dbm(cfg: SystemConfig) -> float:
    """Thermal noise power over the configured bandwidth, in dBm."""
    return -174.0 + 10.0 * math.log10(cfg.bandwidth_hz) + cfg.noise_figure_db


@dataclass
class Layout:
    """One geometric realization: RAU and user positions on the disc."""

    trau_xy: np.ndarray   # (N_T, 2)
    rrau_xy: np.ndarray   # (N_R, 2)
    dl_user_xy: np.ndarray  # (K, 2)
    ul_user_xy: np.ndarray  # (J, 2)
    mode: str = "NAFD"


def _uniform_disc(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(size=n))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def generate_layout(cfg: SystemConfig, rng: np.random.Generator,
                    max_retries: int = 10000) -> Layout:
    """Draw RAUs and users uniformly on the disc of radius R.

    RAUs are placed first; each user is rejection-resampled until it keeps the
    protection distance r0 from every RAU. In CCFD mode the i-th receive RAU
    is co-located with the i-th transmit RAU.
    """
    trau = _uniform_disc(rng, cfg.n_trau, cfg.radius_m)
    if cfg.mode == "CCFD":
        rrau = trau.copy()
    else:
        rrau = _uniform_disc(rng, cfg.n_rrau, cfg.radius_m)
    raus = np.vstack([trau, rrau])

    def draw_users(n):
        pts = np.empty((n, 2))
        for i in range(n):
            for attempt in range(max_retries):
                p = _uniform_disc(rng, 1, cfg.radius_m)[0]
                d = np.linalg.norm(raus - p, axis=1)
                if cfg.protection_m == 0.0 or np.all(d >= cfg.protection_m):
                    pts[i] = p
                    break
            else:
                raise GeometryError(
                    f"could not place user {i} with protection distance "
                    f"{cfg.protection_m} m after {max_retries} tries")
        return pts

    dl = draw_users(cfg.n_dl_users)
    ul = draw_users(cfg.n_ul_users)
    return Layout(trau_xy=trau, rrau_xy=rrau, dl_user_xy=dl, ul_user_xy=ul,
                  mode=cfg.mode)
