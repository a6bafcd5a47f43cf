import csv
import io
import json

import numpy as np
import pytest

from tcpreempt.models import Exponential, UniformDeadline
from tcpreempt.policies import decide_reuse
from tcpreempt.simulator import (
    BagOfJobs,
    ClusterConfig,
    NonTerminationError,
    config_from_json,
    replication_rng,
    run_replication,
    run_simulation,
    sampled_lifetime_validation,
)

from conftest import REP


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(vm_count=0),
        dict(price_ratio=0.0),
        dict(price_ratio=1.5),
        dict(policy="random"),
        dict(checkpoint_policy="young-daly"),
        dict(checkpoint_policy="model-dp", failure_model=None),
    ])
    def test_invalid(self, kw):
        base = dict(vm_count=2, failure_model=REP)
        with pytest.raises(ValueError):
            ClusterConfig(**{**base, **kw})

    @pytest.mark.parametrize("kw", [dict(job_count=0, job_length=1), dict(job_count=1, job_length=0)])
    def test_invalid_bag(self, kw):
        with pytest.raises(ValueError):
            BagOfJobs(**kw)

    def test_json_round_trip(self):
        c = ClusterConfig(4, REP, checkpoint_policy="young-daly", checkpoint_mttf=1.0, rng_seed=3)
        doc = {"cluster": {**c.to_json(), "failure_model": {"family": "bathtub", "params": REP.to_json()}},
               "bag": {"job_count": 5, "job_length": 2.0}}
        c2, bag = config_from_json(json.loads(json.dumps(doc)))
        assert c2 == c and bag == BagOfJobs(5, 2.0)

    def test_json_errors(self):
        with pytest.raises(ValueError):
            config_from_json({"cluster": {}})
        with pytest.raises(ValueError):
            config_from_json({"cluster": {"vm_count": 2, "colour": 1}, "bag": {"job_count": 1, "job_length": 1}})


def test_deterministic_given_seed():
    c = ClusterConfig(6, REP, rng_seed=42)
    bag = BagOfJobs(15, 1.5)
    a, b = run_simulation(c, bag, 4), run_simulation(c, bag, 4)
    assert a.dumps() == b.dumps()
    assert a.to_csv() == b.to_csv()
    other = run_simulation(ClusterConfig(6, REP, rng_seed=43), bag, 4)
    assert other.dumps() != a.dumps()


def test_no_preemption_model():
    r = run_simulation(ClusterConfig(4, None, price_ratio=0.25), BagOfJobs(10, 2.0), 3)
    s = r.summary()
    assert s["inflation"]["mean"] == 0.0
    assert s["job_failure_probability"]["mean"] == 0.0
    assert s["cost_ratio"]["mean"] == pytest.approx(0.25, rel=1e-12)
    assert r.baseline_makespan_hours == 6.0


def test_all_jobs_complete_and_counts_consistent():
    r = run_simulation(ClusterConfig(5, REP, rng_seed=1), BagOfJobs(20, 3.0), 5)
    for row in r.per_replication():
        assert row["completed"] == 20
        assert 0 <= row["job_failure_probability"] <= 1
        assert row["retries"] == row["preemptions"] >= row["jobs_failed"]
        assert row["inflation"] >= 0


def test_reused_vms_always_pass_the_reuse_rule():
    c = ClusterConfig(6, REP, rng_seed=8)
    bag = BagOfJobs(40, 4.0)
    res = run_replication(c, bag, replication_rng(8, 0), record=True)
    reused = [p for p in res.placements if p[4]]
    assert reused
    for _, _, _, age, _, remaining_s in reused:
        assert decide_reuse(REP, remaining_s / 3600, age).reuse


def test_failed_jobs_resume_on_new_vms():
    res = run_replication(ClusterConfig(4, REP, rng_seed=2), BagOfJobs(12, 3.0),
                          replication_rng(2, 0), record=True)
    seen = set()
    for _, job, _, _, reused, _ in res.placements:
        if job in seen:
            assert not reused
        seen.add(job)


def test_hot_spare_expires_after_ttl():
    # 3 one-hour jobs on 2 VMs: VM 1 idles from t=1 and expires at t=1 + ttl
    bag = BagOfJobs(3, 1.0)
    short = run_simulation(ClusterConfig(2, None, hot_spare_ttl=0.5), bag).replications[0]
    long = run_simulation(ClusterConfig(2, None, hot_spare_ttl=5.0), bag).replications[0]
    assert short.makespan_hours == long.makespan_hours == 2.0
    assert short.vm_hours == pytest.approx(2.0 + 1.5)
    assert long.vm_hours == pytest.approx(2.0 + 2.0)


def test_non_termination_guard():
    c = ClusterConfig(1, UniformDeadline(1.0), policy="always-reuse")
    with pytest.raises(NonTerminationError, match="preempted"):
        run_simulation(c, BagOfJobs(1, 2.0))


def test_model_reuse_fails_fewer_jobs_than_always_reuse():
    bag = BagOfJobs(40, 6.0)
    m = run_simulation(ClusterConfig(8, REP, rng_seed=0), bag, 20).summary()
    a = run_simulation(ClusterConfig(8, REP, policy="always-reuse", rng_seed=0), bag, 20).summary()
    assert m["job_failure_probability"]["mean"] < a["job_failure_probability"]["mean"]


def test_dp_checkpointing_reduces_inflation():
    bag = BagOfJobs(8, 2.0, 1 / 60)
    none = run_simulation(ClusterConfig(4, REP, rng_seed=5), bag, 200).summary()
    dp = run_simulation(ClusterConfig(4, REP, checkpoint_policy="model-dp", rng_seed=5), bag, 200).summary()
    assert dp["inflation"]["mean"] <= none["inflation"]["mean"]


def test_young_daly_checkpointing_runs():
    bag = BagOfJobs(6, 1.0, 1 / 60)
    r = run_simulation(ClusterConfig(3, Exponential(0.5), checkpoint_policy="young-daly",
                                     checkpoint_mttf=2.0, rng_seed=1), bag, 5)
    assert all(x.completed == 6 for x in r.replications)


def test_cost_ratio_grows_with_inflation():
    r = run_simulation(ClusterConfig(4, REP, rng_seed=3), BagOfJobs(8, 2.0), 40)
    rows = r.per_replication()
    x = np.array([q["inflation"] for q in rows])
    y = np.array([q["cost_ratio"] for q in rows])
    assert np.corrcoef(x, y)[0, 1] > 0.5


def test_csv_has_header_and_row_per_replication():
    r = run_simulation(ClusterConfig(2, REP, rng_seed=1), BagOfJobs(3, 1.0), 3)
    rows = list(csv.DictReader(io.StringIO(r.to_csv())))
    assert len(rows) == 3 and "inflation" in rows[0]


class TestSampler:
    @pytest.mark.parametrize("model", [UniformDeadline(24.0), REP], ids=["uniform", "bathtub"])
    def test_large_sample(self, model):
        assert sampled_lifetime_validation(model, 100_000, 0) < 0.01

    def test_dkw_at_one_thousand(self):
        devs = [sampled_lifetime_validation(REP, 1000, s) for s in range(200)]
        # DKW: P(D > 0.07) <= 2 exp(-2 n 0.07^2) ~ 1e-4
        assert sum(d >= 0.07 for d in devs) <= 2

    def test_minimum_n(self):
        with pytest.raises(ValueError):
            sampled_lifetime_validation(REP, 10)
