"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criteria that need the published preemption measurements read them from the
CSV named by ``TCPREEMPT_DATASET`` (canonical columns, or adapted with the
JSON column map in ``TCPREEMPT_COLUMN_MAP``).  Without it they fail.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from scipy import integrate

from tcpreempt.checkpointing import (
    CheckpointPlanner,
    expected_makespan_with_schedule,
    young_daly_interval,
    young_daly_schedule,
)
from tcpreempt.fitting import build_empirical_cdf, fit_all, fit_bathtub
from tcpreempt.ingestion import CohortFilter, group_and_build, load_column_map, parse_dataset
from tcpreempt.models import (
    Exponential,
    GompertzMakeham,
    UniformDeadline,
    Weibull,
    expected_lifetime,
    partial_loss_integral,
    sample_lifetimes,
)
from tcpreempt.policies import (
    decide_reuse,
    expected_running_time,
    expected_wasted_work,
    policy_failure_probability,
)
from tcpreempt.simulator import BagOfJobs, ClusterConfig, run_simulation, sampled_lifetime_validation

from conftest import CRITERIA_LINES, REP, random_bathtub
from oracles import BruteForceCheckpointing

DATASET_ENV = "TCPREEMPT_DATASET"
COLUMN_MAP_ENV = "TCPREEMPT_COLUMN_MAP"


def verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    assert ok, line


def published_records():
    path = os.environ.get(DATASET_ENV)
    if not path or not os.path.exists(path):
        return None
    cmap_path = os.environ.get(COLUMN_MAP_ENV)
    cmap = load_column_map(cmap_path) if cmap_path else None
    return parse_dataset(path, cmap).records


def test_01_analytic_consistency():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        m = random_bathtub(rng)
        want = integrate.quad(lambda x: x * m._pdf(x), 0, m.L, epsabs=0, epsrel=1e-13, limit=200)[0]
        worst = max(worst, abs(expected_lifetime(m) - want) / want)
        a, c = np.sort(rng.uniform(0, m.L, 2))
        want = integrate.quad(lambda x: x * m._pdf(x), a, c, epsabs=0, epsrel=1e-13, limit=200)[0]
        worst = max(worst, abs(partial_loss_integral(m, a, c) - want) / max(want, 1e-300))
    dt = time.perf_counter() - t0
    verdict(1, worst <= 1e-9 and dt < 1.0, f"max relative error {worst:.2e} over 100 parameter sets in {dt:.2f}s")


def test_02_derivative_consistency():
    models = {"bathtub": REP, "exponential": Exponential(0.3), "weibull": Weibull(0.2, 0.6),
              "gompertz-makeham": GompertzMakeham(0.05, 0.01, 0.2), "uniform": UniformDeadline(24.0)}
    t0 = time.perf_counter()
    errs = {}
    eps = 1e-5
    for name, m in models.items():
        hi = m.deadline or 30.0
        t = np.linspace(0.01, hi - 0.01, 1000)
        fd = (m._raw_cdf(t + eps) - m._raw_cdf(t - eps)) / (2 * eps)
        errs[name] = float(np.max(np.abs(fd - m._pdf(t))))
    dt = time.perf_counter() - t0
    worst = max(errs.values())
    verdict(2, worst < 1e-5 and dt < 1.0, f"max |pdf - dF/dt| = {worst:.2e} across {len(errs)} families in {dt:.2f}s")


def test_03_uniform_closed_forms():
    u = UniformDeadline(24.0)
    werr = max(abs(expected_wasted_work(u, J) - J / 2) for J in range(1, 21))
    rerr = max(abs(expected_running_time(u, J) - J - J * J / 48) for J in range(1, 21))
    verdict(3, werr <= 1e-12 and rerr <= 1e-12, f"wasted-work error {werr:.1e}, runtime error {rerr:.1e}")


def test_04_fit_ranking():
    t0 = time.perf_counter()
    x = sample_lifetimes(REP, np.random.default_rng(2024), 5000)
    fit = fit_bathtub(build_empirical_cdf(x, deadline=24.0), 24.0)
    tau_err = abs(fit.model.tau1 - REP.tau1) / REP.tau1
    synthetic_ok = tau_err <= 0.2
    detail = f"synthetic tau1 {fit.model.tau1:.3f} (error {tau_err:.1%})"
    records = published_records()
    if records is None:
        ranking_ok = False
        detail += f"; published cohort unavailable (set {DATASET_ENV})"
    else:
        ecdf = group_and_build(records, CohortFilter(vm_type="n1-highcpu-16", zone="us-east1-b"), deadline=24.0)
        fits = fit_all(ecdf, 24.0)
        r2 = {k: v.r_squared for k, v in fits.items()}
        ranking_ok = all(r2["bathtub"] > r2[k] for k in r2 if k != "bathtub")
        detail += "; published r2 " + ", ".join(f"{k}={v:.4f}" for k, v in r2.items())
    dt = time.perf_counter() - t0
    verdict(4, synthetic_ok and ranking_ok and dt < 30, detail + f" ({dt:.1f}s)")


def test_05_dp_matches_exhaustive_enumeration():
    t0 = time.perf_counter()
    cases = [(REP, 0.5, [0, 3, 20, 40, 46]), (Exponential(0.5), 0.25, [0, 5]),
             (UniformDeadline(24.0), 1.0, [0, 6, 14, 20])]
    worst = 0.0
    for model, h, ages in cases:
        planner = CheckpointPlanner(model, 12 * h, h, h, max_start_age=max(ages) * h)
        bf = BruteForceCheckpointing(model, h, 1)
        for j in range(1, 13):
            for a in ages:
                want = bf.value(j, a)
                worst = max(worst, abs(planner.V[j, a] - want) / want)
    dt = time.perf_counter() - t0
    verdict(5, worst <= 1e-9 and dt < 10, f"max relative gap {worst:.1e} over J<=12 steps, 3 families ({dt:.1f}s)")


def test_06_memoryless_reduction():
    t0 = time.perf_counter()
    h = 1 / 60
    planner = CheckpointPlanner(Exponential(1.0), 4.0, 1 / 60, h)
    steps = np.array([round(i / h) for i in planner.schedule(0.0).intervals])
    body = steps[:-1] if steps.size > 1 else steps
    spread = int(body.max() - body.min())
    yd = young_daly_interval(1.0, 1 / 60) / h
    rel = abs(np.median(body) - yd) / yd
    dt = time.perf_counter() - t0
    verdict(6, spread <= 1 and rel <= 0.2 and dt < 30,
            f"intervals {sorted(set(body.tolist()))} min (spread {spread}), Young-Daly {yd:.2f} min, gap {rel:.1%}")


def test_07_checkpoint_overhead():
    t0 = time.perf_counter()
    J, delta, h = 4.0, 1 / 60, 1 / 60
    planner = CheckpointPlanner(REP, J, delta, h)
    yd = young_daly_schedule(J, 1.0, delta, h)
    ages = np.arange(5.0, 15.0 + 1e-9, 1.0)
    dp = np.array([planner.value(a) / J - 1 for a in ages])
    ydi = np.array([expected_makespan_with_schedule(REP, yd, J, a) / J - 1 for a in ages])
    dt = time.perf_counter() - t0
    ok = dp.max() < 0.05 and ydi.min() > 0.20 and dt < 60
    verdict(7, ok, f"ages 5-15 h: DP inflation max {dp.max():.2%}; Young-Daly inflation min {ydi.min():.2%} "
                   f"(needs > 20%) ({dt:.1f}s)")


def mean_failure(truth, T_grid, ages, policy, decision_model=None):
    vals = []
    for T in T_grid:
        for s in ages:
            vals.append(policy_failure_probability(truth, T, s, policy, decision_model=decision_model))
    return float(np.mean(vals))


def test_08_scheduling_policy():
    T = 6.0
    late = np.linspace(18.05, 23.95, 60)
    mem_late = [policy_failure_probability(REP, T, s, "memoryless") for s in late]
    switch = next(s for s in np.linspace(0, 23.95, 480) if not decide_reuse(REP, T, s).reuse)
    after = np.linspace(switch, 23.95, 60)
    plateau = np.array([policy_failure_probability(REP, T, s, "model") for s in after])
    ages = np.linspace(0, 24, 97)[:-1]
    Ts = np.arange(1.0, 24.0)
    ratio = mean_failure(REP, Ts, ages, "model") / mean_failure(REP, Ts, ages, "memoryless")
    ok = (min(mem_late) == 1.0 and np.ptp(plateau) < 1e-12 and abs(plateau[0] - 0.4) <= 0.1 and ratio <= 0.6)
    verdict(8, ok, f"memoryless=1 past 18 h: {min(mem_late) == 1.0}; model plateau {plateau[0]:.3f} "
                   f"after switch at {switch:.2f} h; mean ratio model/memoryless {ratio:.3f}")


def test_09_misfit_robustness():
    records = published_records()
    if records is None:
        verdict(9, False, f"published n1-highcpu-16/32 cohorts unavailable (set {DATASET_ENV})")
    misfit = fit_bathtub(group_and_build(records, CohortFilter(vm_type="n1-highcpu-16"), deadline=24.0)).model
    best = fit_bathtub(group_and_build(records, CohortFilter(vm_type="n1-highcpu-32"), deadline=24.0)).model
    ages = np.linspace(0, 24, 49)[:-1]
    Ts = np.arange(1.0, 24.0)
    p_best = mean_failure(best, Ts, ages, "model")
    p_mis = mean_failure(best, Ts, ages, "model", decision_model=misfit)
    gap = p_mis - p_best
    verdict(9, gap < 0.05, f"misfit policy failure {p_mis:.3f} vs best-fit {p_best:.3f} (gap {gap:+.3f})")


def test_10_sampler_fidelity():
    t0 = time.perf_counter()
    dev = sampled_lifetime_validation(REP, 100_000, 0)
    dt = time.perf_counter() - t0
    verdict(10, dev < 0.01 and dt < 5, f"max ECDF deviation {dev:.4f} at n=1e5 ({dt:.2f}s)")


def test_11_simulation_determinism_and_trend():
    t0 = time.perf_counter()
    cluster = ClusterConfig(vm_count=32, failure_model=REP, policy="model-reuse", rng_seed=0)
    bag = BagOfJobs(job_count=100, job_length=14 / 60)
    a = run_simulation(cluster, bag, 200)
    b = run_simulation(cluster, bag, 200)
    same = a.dumps() == b.dumps()
    rows = a.per_replication()
    x = np.array([r["preemptions"] for r in rows], dtype=float)
    y = np.array([r["inflation"] for r in rows])
    slope, icpt = np.polyfit(x, y, 1)
    r = float(np.corrcoef(x, y)[0, 1])
    dt = time.perf_counter() - t0
    ok = same and abs(slope - 0.03) <= 0.02 and dt < 120
    verdict(11, ok, f"bit-identical reruns: {same}; inflation slope {slope:.2%} per preemption "
                    f"(r={r:.2f}, 200 runs of 100 x 14-min jobs on 32 VMs) ({dt:.0f}s)")
