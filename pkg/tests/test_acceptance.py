"""End-to-end acceptance gates for the full experiment pipeline.

These tests run the real Monte-Carlo experiments at full size, so the module
takes on the order of an hour.  Each criterion prints a one-line PASS/FAIL
verdict before asserting, so a failed run still documents every outcome.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from nafdsim import link_metrics
from nafdsim.channel import steering_vector
from nafdsim.convex_core import SolveStatus, solve
from nafdsim.harness import TrialFailed, run_trial
from nafdsim.link_metrics import LN2, OptVars, QuantModel, rho_for_bits
from nafdsim.sca import (AffineModel, build_state, build_subproblem,
                         init_vars, linearize_dl_fronthaul, linearize_h,
                         linearize_ul_fronthaul)
from nafdsim.scenario import SystemConfig
from tests import _oracles as orc

MASTER_SEED = 0
BITS_RANGE = list(range(1, 9))


def _verdict(name, ok, detail=""):
    print(f"\nCRITERION {name}: {'PASS' if ok else 'FAIL'} {detail}",
          flush=True)


def _collect(cfg, seed, trials):
    """Run `trials` trials; returns objectives, worst violations, failures."""
    objs, iters, failures = [], [], 0
    worst = {"c": -np.inf, "p": -np.inf}
    traces_monotone = True
    for tid in range(trials):
        try:
            rec, trace = run_trial(cfg, seed, tid)
        except TrialFailed:
            failures += 1
            continue
        objs.append(rec.objective_bpshz)
        iters.append(rec.sca_iters)
        vals = [row["true_obj_bpshz"] for row in trace]
        if any(b < a - 1e-6 for a, b in zip(vals, vals[1:])):
            traces_monotone = False
        worst["c"] = max(worst["c"],
                         max(max(r["max_cdl_violation"],
                                 r["max_cul_violation"]) for r in trace))
        worst["p"] = max(worst["p"],
                         max(r["max_pd_violation"] for r in trace))
    return {"objs": np.array(objs), "iters": iters, "failures": failures,
            "monotone": traces_monotone, "worst": worst}


@pytest.fixture(scope="session")
def crit1_data():
    cfg = SystemConfig(dac_bits=1, c_dl_bpshz=26.0, c_ul_bpshz=26.0)
    t0 = time.perf_counter()
    data = _collect(cfg, MASTER_SEED, 20)
    data["wall_s"] = time.perf_counter() - t0
    return data


@pytest.fixture(scope="session")
def sweep_data():
    """Criterion 2 corpus: 100 trials per (mode, bits) at C = 130."""
    out = {}
    t0 = time.perf_counter()
    for mi, mode in enumerate(["NAFD", "CCFD"]):
        for bi, bits in enumerate(BITS_RANGE):
            cfg = SystemConfig(mode=mode, dac_bits=bits,
                               c_dl_bpshz=130.0, c_ul_bpshz=130.0)
            seed = MASTER_SEED + 100003 * bi + 1000003 * mi
            out[(mode, bits)] = _collect(cfg, seed, 100)
    out["wall_s"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def cdf_data():
    """Criterion 3 corpus: 200 trials per (bits, capacity)."""
    out = {}
    t0 = time.perf_counter()
    for ci, cap in enumerate([130.0, 50.0]):
        for bi, bits in enumerate(BITS_RANGE):
            cfg = SystemConfig(dac_bits=bits, c_dl_bpshz=cap, c_ul_bpshz=cap)
            seed = MASTER_SEED + 100003 * bi + 1000003 * ci
            out[(bits, cap)] = _collect(cfg, seed, 200)
    out["wall_s"] = time.perf_counter() - t0
    return out


class TestCriterion1:
    def test_convergence_and_objective_band(self, crit1_data):
        d = crit1_data
        median = float(np.median(d["objs"]))
        ok = (d["monotone"] and d["failures"] == 0
              and max(d["iters"]) <= 200 and 3.0 <= median <= 9.0
              and d["wall_s"] <= 300.0)
        _verdict("1", ok, f"median={median:.3f} max_iters={max(d['iters'])} "
                          f"failures={d['failures']} wall={d['wall_s']:.0f}s")
        assert d["failures"] == 0
        assert d["monotone"], "an SCA trace decreased by more than 1e-6"
        assert max(d["iters"]) <= 200
        assert d["wall_s"] <= 300.0
        assert 3.0 <= median <= 9.0, f"median objective {median:.3f}"


class TestCriterion2:
    def test_bit_sweep_structure(self, sweep_data):
        means = {k: float(v["objs"].mean())
                 for k, v in sweep_data.items() if k != "wall_s"}
        nafd = [means[("NAFD", b)] for b in BITS_RANGE]
        ccfd = [means[("CCFD", b)] for b in BITS_RANGE]
        increasing = all(b > a for a, b in zip(nafd, nafd[1:]))
        span = nafd[-1] - nafd[0]
        span_ok = abs(span - 17.29) <= 0.3 * 17.29
        dominance = all(n >= c for n, c in zip(nafd, ccfd))
        gaps = [n - c for n, c in zip(nafd, ccfd)]
        gap_ratio = gaps[-1] / gaps[0] if gaps[0] > 0 else math.inf
        fail_frac = max(v["failures"] / 100.0
                        for k, v in sweep_data.items() if k != "wall_s")
        ok = (increasing and span_ok and dominance and gap_ratio >= 3.0
              and sweep_data["wall_s"] <= 1800.0 and fail_frac <= 0.05)
        _verdict("2", ok,
                 f"NAFD means={['%.2f' % m for m in nafd]} "
                 f"CCFD means={['%.2f' % m for m in ccfd]} span={span:.2f} "
                 f"gap_ratio={gap_ratio:.2f} wall={sweep_data['wall_s']:.0f}s")
        assert fail_frac <= 0.05
        assert sweep_data["wall_s"] <= 1800.0
        assert increasing, f"NAFD means not strictly increasing: {nafd}"
        assert span_ok, f"span {span:.2f} outside 17.29 +- 30%"
        assert dominance, "CCFD exceeded NAFD at some resolution"
        assert gap_ratio >= 3.0, f"gap ratio {gap_ratio:.2f}"


class TestCriterion3:
    def test_capacity_sensitivity(self, cdf_data):
        fail_frac = max(v["failures"] / 200.0
                        for k, v in cdf_data.items() if k != "wall_s")
        qs = np.linspace(0.01, 0.99, 99)
        dominated_ok = True
        for bits in (1, 2, 3, 4):
            hi = np.quantile(cdf_data[(bits, 130.0)]["objs"], qs)
            lo = np.quantile(cdf_data[(bits, 50.0)]["objs"], qs)
            frac = float(np.mean(hi >= lo))
            if frac < 0.95:
                dominated_ok = False
        low_gaps = [abs(cdf_data[(b, 130.0)]["objs"].mean()
                        - cdf_data[(b, 50.0)]["objs"].mean())
                    for b in (1, 2, 3, 4)]
        high_gaps = [abs(cdf_data[(b, 130.0)]["objs"].mean()
                         - cdf_data[(b, 50.0)]["objs"].mean())
                     for b in (5, 6, 7, 8)]
        saturation = max(high_gaps) < 0.5 * min(low_gaps)
        ok = (dominated_ok and saturation and fail_frac <= 0.05
              and cdf_data["wall_s"] <= 3600.0)
        _verdict("3", ok,
                 f"low-res gaps={['%.3f' % g for g in low_gaps]} "
                 f"high-res gaps={['%.3f' % g for g in high_gaps]} "
                 f"wall={cdf_data['wall_s']:.0f}s")
        assert fail_frac <= 0.05
        assert cdf_data["wall_s"] <= 3600.0
        assert dominated_ok, "C=130 CDF does not dominate C=50 for some B<=4"
        assert saturation, (f"high-resolution gaps {high_gaps} not below half "
                            f"of min low-resolution gap {min(low_gaps)}")


class TestCriterion4:
    def test_all_iterates_feasible(self, crit1_data, sweep_data, cdf_data):
        worst_c = crit1_data["worst"]["c"]
        worst_p = crit1_data["worst"]["p"]
        for store in (sweep_data, cdf_data):
            for k, v in store.items():
                if k == "wall_s":
                    continue
                worst_c = max(worst_c, v["worst"]["c"])
                worst_p = max(worst_p, v["worst"]["p"])
        ok = worst_c <= 1e-6 and worst_p <= 1e-9
        _verdict("4", ok, f"worst capacity violation={worst_c:.3e} "
                          f"worst power violation={worst_p:.3e}")
        assert worst_c <= 1e-6
        assert worst_p <= 1e-9


class TestCriterion5:
    def test_solver_against_grid_search(self):
        checked, seed, worst = 0, 0, 0.0
        while checked < 25:
            assert seed < 200
            cfg = orc.tiny_config()
            try:
                channels, beams = orc.make_instance(cfg, seed)
                q = QuantModel(bits=3)
                model = AffineModel(beams, channels, cfg, q)
                v0 = init_vars(cfg, beams, channels, q)
            except Exception:
                seed += 1
                continue
            seed += 1
            prob = build_subproblem(build_state(model, v0), model)
            x0 = v0.to_vector()
            res = solve(prob, x0)
            assert res.status is SolveStatus.OPTIMAL
            lo = np.maximum(prob.lower_bounds, x0 * 1e-16)
            hi = np.where(np.isfinite(prob.upper_bounds), prob.upper_bounds,
                          x0 * 1e4)
            _, gv = orc.grid_search(prob, lo, hi, pts_per_dim=15, rounds=24,
                                    shrink=0.45)
            if gv < 1e-3:  # degenerate realization, relative test meaningless
                continue
            checked += 1
            worst = max(worst, abs(res.obj - gv) / max(abs(res.obj), abs(gv)))
        ok = worst < 1e-3
        _verdict("5a (grid search)", ok, f"worst rel diff={worst:.2e}")
        assert ok

    def test_transmit_power_monte_carlo(self, rng):
        cfg = orc.tiny_config(n_trau=2, n_rrau=2, n_dl_users=2, n_ul_users=2)
        q = QuantModel(bits=2)
        worst = 0.0
        for seed in range(10):
            _, beams = orc.make_instance(cfg, seed)
            v = orc.random_vars(cfg, beams, rng)
            m = seed % cfg.n_trau
            mc = orc.mc_transmit_power(m, beams, v, q, n_draws=200_000,
                                       seed=seed)
            an = link_metrics.transmit_power(m, beams, v, q)
            worst = max(worst, abs(an - mc) / mc)
        ok = worst < 0.01
        _verdict("5b (MC power)", ok, f"worst rel diff={worst:.2e}")
        assert ok

    def test_dual_evaluators(self, default_cfg, rng):
        worst = 0.0
        q = QuantModel(bits=3)
        for seed in range(20):
            channels, beams = orc.make_instance(default_cfg, seed)
            for _ in range(5):
                v = orc.random_vars(default_cfg, beams, rng)
                pairs = []
                for k in range(default_cfg.n_dl_users):
                    pairs.append((
                        link_metrics.downlink_rate(k, beams, v, q, channels,
                                                   default_cfg),
                        orc.naive_downlink_rate(k, beams, v, q, channels,
                                                default_cfg)))
                for j in range(default_cfg.n_ul_users):
                    pairs.append((
                        link_metrics.uplink_rate(j, beams, v, q, channels,
                                                 default_cfg),
                        orc.naive_uplink_rate(j, beams, v, q, channels,
                                              default_cfg)))
                for m in range(default_cfg.n_trau):
                    pairs.append((link_metrics.fronthaul_dl(m, beams, v),
                                  orc.naive_fronthaul_dl(m, beams, v)))
                    pairs.append((link_metrics.transmit_power(m, beams, v, q),
                                  orc.naive_transmit_power(m, beams, v, q)))
                for z in range(default_cfg.n_rrau):
                    pairs.append((
                        link_metrics.fronthaul_ul(z, beams, v, channels,
                                                  default_cfg, q),
                        orc.naive_fronthaul_ul(z, beams, v, channels,
                                               default_cfg, q)))
                worst = max(worst,
                            max(abs(a - b) / max(abs(b), 1e-12)
                                for a, b in pairs))
        ok = worst < 1e-9
        _verdict("5c (dual evaluators)", ok, f"worst rel diff={worst:.2e}")
        assert ok


class TestCriterion6:
    def test_rho_zero_collapse(self, rng):
        """With rho = 0 every quantization term vanishes: C_q = (1-rho) *
        sigma2 I and the rates equal the unquantized expressions."""
        cfg = orc.tiny_config(n_trau=2, n_rrau=2, n_dl_users=2, n_ul_users=2)
        channels, beams = orc.make_instance(cfg, 0)
        v = orc.random_vars(cfg, beams, rng)
        q0 = QuantModel(bits=8, rho=0.0)
        blocks = link_metrics.quant_covariance_blocks(beams.f_digital, v, q0)
        idx = np.arange(blocks.shape[1])
        ok = True
        ok &= bool(np.allclose(blocks[:, idx, idx].real,
                               v.sigma2_dl[:, None], rtol=1e-14))
        for m in range(cfg.n_trau):
            wf = beams.w_analog[m] @ beams.f_digital[m]
            sig = float(v.eta @ np.sum(np.abs(wf) ** 2, axis=0))
            leak = v.sigma2_dl[m] * float(np.sum(np.abs(beams.w_analog[m]) ** 2))
            p = link_metrics.transmit_power(m, beams, v, q0)
            ok &= abs(p - (sig + leak)) <= 1e-12 * (sig + leak)
        _verdict("6a (rho=0 collapse)", ok)
        assert ok

    def test_taylor_tightness(self, small_cfg):
        worst = 0.0
        for seed in range(5):
            channels, beams = orc.make_instance(small_cfg, seed)
            q = QuantModel(bits=3)
            model = AffineModel(beams, channels, small_cfg, q)
            v = init_vars(small_cfg, beams, channels, q)
            state = build_state(model, v)
            x = v.to_vector()
            for m, rec in enumerate(linearize_dl_fronthaul(state, model)):
                lin = rec.coeffs @ x - rec.log_weight * math.log(
                    x[rec.log_var_index])
                true = LN2 * (link_metrics.fronthaul_dl(m, beams, v)
                              - small_cfg.c_dl_bpshz) + rec.rhs
                worst = max(worst, abs(lin - true))
            for z, rec in enumerate(linearize_ul_fronthaul(state, model)):
                lin = rec.coeffs @ x - rec.log_weight * math.log(
                    x[rec.log_var_index])
                true = LN2 * (link_metrics.fronthaul_ul(
                    z, beams, v, channels, small_cfg, q)
                    - small_cfg.c_ul_bpshz) + rec.rhs
                worst = max(worst, abs(lin - true))
        ok = worst <= 1e-9
        _verdict("6b (Taylor tightness)", ok, f"worst abs diff={worst:.2e}")
        assert ok

    def test_h_gradient_finite_difference(self, small_cfg):
        channels, beams = orc.make_instance(small_cfg, 1)
        q = QuantModel(bits=3)
        model = AffineModel(beams, channels, small_cfg, q)
        v = init_vars(small_cfg, beams, channels, q)
        state = build_state(model, v)
        _, coeffs = linearize_h(state, model)
        x = v.to_vector()

        def h(pt):
            return (small_cfg.weight_dl
                    * np.sum(np.log(model.eval_den_dl(pt)) / LN2)
                    + small_cfg.weight_ul
                    * np.sum(np.log(model.eval_den_ul(pt)) / LN2))

        worst = 0.0
        for i in range(model.n):
            step = 1e-20 * max(abs(x[i]), 1e-30)
            xc = x.astype(complex)
            xc[i] += 1j * step
            fd = float(np.imag(h(xc))) / step
            worst = max(worst, abs(fd - coeffs[i]) / max(abs(coeffs[i]),
                                                         1e-300))
        ok = worst < 1e-5
        _verdict("6c (h gradient)", ok, f"worst rel diff={worst:.2e}")
        assert ok

    def test_steering_unit_norm(self, rng):
        worst = 0.0
        for theta in rng.uniform(-np.pi, np.pi, 200):
            for m in (1, 2, 4, 6, 8):
                worst = max(worst, abs(
                    np.linalg.norm(steering_vector(theta, m)) - 1.0))
        ok = worst <= 1e-12
        _verdict("6d (steering norm)", ok, f"worst={worst:.2e}")
        assert ok
