"""Monte-Carlo experiment driver: convergence traces, bit sweeps, CDFs.

Every trial draws a fresh layout, channel realization and beamformer set from
its own seed stream (derived from the master seed and the trial id), then runs
the SCA optimizer to convergence.  Aggregation is a deterministic reduce over
trial ids, so results are reproducible bit-for-bit regardless of execution
order.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .beamforming import RankDeficientError, build_beamformers
from .channel import draw_channels
from .link_metrics import QuantModel
from .sca import InfeasibleInitError, ScaFailure, run_sca
from .scenario import Layout, SystemConfig, generate_layout

MAX_REDRAWS = 5
FLOAT_FMT = "%.12g"


@dataclass
class ExperimentSpec:
    """What to run and where to write it."""

    kind: str                      # Convergence | BitSweep | CdfCompare | LayoutDump
    trials: int = 100
    bits_list: list = field(default_factory=lambda: list(range(1, 9)))
    capacities: list = field(default_factory=list)   # [(c_dl, c_ul), ...]
    modes: list = field(default_factory=lambda: ["NAFD"])
    out_path: str = "out.csv"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(not 1 <= b <= 16 for b in self.bits_list):
            raise ValueError("bits_list entries must lie in [1, 16]")


@dataclass
class TrialRecord:
    trial_id: int
    mode: str
    bits: int
    c_dl: float
    c_ul: float
    objective_bpshz: float
    sum_r_dl: float
    sum_r_ul: float
    sca_iters: int
    wall_ms: float

    HEADER = ("trial_id,mode,bits,c_dl,c_ul,objective_bpshz,"
              "sum_r_dl,sum_r_ul,sca_iters,wall_ms")

    def csv_row(self):
        return ",".join([
            str(self.trial_id), self.mode, str(self.bits),
            FLOAT_FMT % self.c_dl, FLOAT_FMT % self.c_ul,
            FLOAT_FMT % self.objective_bpshz, FLOAT_FMT % self.sum_r_dl,
            FLOAT_FMT % self.sum_r_ul, str(self.sca_iters),
            FLOAT_FMT % self.wall_ms,
        ])


class TrialFailed(RuntimeError):
    pass


def trial_rng(master_seed: int, trial_id: int, attempt: int = 0):
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, trial_id, attempt]))


def run_trial(cfg: SystemConfig, master_seed: int, trial_id: int):
    """One Monte-Carlo trial; rank-deficient draws are retried with fresh
    sub-seeds so trial counts stay exact."""
    t0 = time.perf_counter()
    last = None
    for attempt in range(MAX_REDRAWS + 1):
        rng = trial_rng(master_seed, trial_id, attempt)
        try:
            layout = generate_layout(cfg, rng)
            channels = draw_channels(layout, cfg, rng)
            beams = build_beamformers(channels, cfg)
            q = QuantModel(bits=cfg.dac_bits)
            v, report, trace = run_sca(cfg, beams, channels, q)
            wall = (time.perf_counter() - t0) * 1e3
            return TrialRecord(
                trial_id=trial_id, mode=cfg.mode, bits=cfg.dac_bits,
                c_dl=cfg.c_dl_bpshz, c_ul=cfg.c_ul_bpshz,
                objective_bpshz=report.objective,
                sum_r_dl=float(report.r_dl.sum()),
                sum_r_ul=float(report.r_ul.sum()),
                sca_iters=trace[-1]["iter"], wall_ms=wall), trace
        except (RankDeficientError, InfeasibleInitError, ScaFailure) as exc:
            last = exc
    raise TrialFailed(f"trial {trial_id} failed after {MAX_REDRAWS} redraws: {last}")


def _point_worker(args):
    cfg, master_seed, trial_id = args
    try:
        rec, _ = run_trial(cfg, master_seed, trial_id)
        return trial_id, rec, None
    except TrialFailed as exc:
        return trial_id, None, str(exc)


def _run_point(cfg, master_seed, trials, workers=1):
    """All trials of one experiment point; returns records sorted by trial id
    plus the failure messages."""
    jobs = [(cfg, master_seed, t) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_point_worker, jobs))
    else:
        results = [_point_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    records = [r[1] for r in results if r[1] is not None]
    failures = [r[2] for r in results if r[2] is not None]
    return records, failures


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def run_convergence(cfg: SystemConfig, spec: ExperimentSpec, seed: int = None):
    """Single-realization convergence trace (one fixed seed)."""
    seed = cfg.seed if seed is None else seed
    rec, trace = run_trial(cfg, seed, 0)
    header = ("iter,surrogate_obj_bpshz,true_obj_bpshz,"
              "max_cdl_violation,max_cul_violation,max_pd_violation")
    rows = []
    for row in trace:
        rows.append(",".join([str(row["iter"])] + [
            FLOAT_FMT % row[k] for k in
            ("surrogate_obj_bpshz", "true_obj_bpshz", "max_cdl_violation",
             "max_cul_violation", "max_pd_violation")]))
    _write_csv(spec.out_path, header, rows)
    return rec, trace


def run_bit_sweep(cfg: SystemConfig, spec: ExperimentSpec, seed: int = None,
                  workers: int = 1, max_fail_frac: float = 0.05):
    """Mean objective vs DAC resolution for each duplexing mode."""
    seed = cfg.seed if seed is None else seed
    rows, results = [], {}
    for mode in spec.modes:
        for bits in spec.bits_list:
            point_cfg = replace(cfg, mode=mode, dac_bits=bits)
            point_seed = seed + 100003 * spec.bits_list.index(bits) \
                + 1000003 * spec.modes.index(mode)
            recs, failures = _run_point(point_cfg, point_seed, spec.trials,
                                        workers)
            if len(failures) > max_fail_frac * spec.trials:
                raise TrialFailed(
                    f"{len(failures)}/{spec.trials} trials failed at "
                    f"mode={mode} bits={bits}")
            vals = np.array([r.objective_bpshz for r in recs])
            mean = float(vals.mean())
            stderr = float(vals.std(ddof=1) / np.sqrt(len(vals))) \
                if len(vals) > 1 else 0.0
            rows.append(",".join([mode, str(bits), FLOAT_FMT % mean,
                                  FLOAT_FMT % stderr, str(len(vals))]))
            results[(mode, bits)] = vals
    _write_csv(spec.out_path, "mode,bits,mean_bpshz,stderr,trials", rows)
    return results


def empirical_cdf(values: np.ndarray):
    """Sorted values with rank/(n+1) plotting positions."""
    v = np.sort(np.asarray(values))
    p = np.arange(1, len(v) + 1) / (len(v) + 1.0)
    return v, p


def run_cdf_compare(cfg: SystemConfig, spec: ExperimentSpec, seed: int = None,
                    workers: int = 1, max_fail_frac: float = 0.05):
    """Per-trial objectives and empirical CDFs per (bits, capacity) pair."""
    seed = cfg.seed if seed is None else seed
    sample_rows, cdf_rows, results = [], [], {}
    for ci, (c_dl, c_ul) in enumerate(spec.capacities):
        for bits in spec.bits_list:
            point_cfg = replace(cfg, dac_bits=bits, c_dl_bpshz=c_dl,
                                c_ul_bpshz=c_ul)
            point_seed = seed + 100003 * spec.bits_list.index(bits) \
                + 1000003 * ci
            recs, failures = _run_point(point_cfg, point_seed, spec.trials,
                                        workers)
            if len(failures) > max_fail_frac * spec.trials:
                raise TrialFailed(
                    f"{len(failures)}/{spec.trials} trials failed at "
                    f"bits={bits} c={c_dl}")
            vals = np.array([r.objective_bpshz for r in recs])
            for r in recs:
                sample_rows.append(",".join([
                    str(bits), FLOAT_FMT % c_dl, str(r.trial_id),
                    FLOAT_FMT % r.objective_bpshz]))
            v, p = empirical_cdf(vals)
            for vv, pp in zip(v, p):
                cdf_rows.append(",".join([str(bits), FLOAT_FMT % c_dl,
                                          FLOAT_FMT % vv, FLOAT_FMT % pp]))
            results[(bits, c_dl)] = vals
    _write_csv(spec.out_path, "bits,cap,trial_id,objective_bpshz", sample_rows)
    cdf_path = _with_suffix(spec.out_path, "_cdf")
    _write_csv(cdf_path, "bits,cap,objective_bpshz,cdf", cdf_rows)
    return results


def _with_suffix(path: str, suffix: str) -> str:
    if path.endswith(".csv"):
        return path[:-4] + suffix + ".csv"
    return path + suffix


def dump_layout(cfg: SystemConfig, spec: ExperimentSpec, seed: int = None):
    """Write one layout realization as CSV (entity, index, x, y)."""
    seed = cfg.seed if seed is None else seed
    rng = trial_rng(seed, 0)
    layout = generate_layout(cfg, rng)
    rows = []
    for name, pts in (("trau", layout.trau_xy), ("rrau", layout.rrau_xy),
                      ("dl_user", layout.dl_user_xy),
                      ("ul_user", layout.ul_user_xy)):
        for i, (x, y) in enumerate(pts):
            rows.append(",".join([name, str(i), FLOAT_FMT % x, FLOAT_FMT % y]))
    _write_csv(spec.out_path, "entity,index,x_m,y_m", rows)
    return layout
