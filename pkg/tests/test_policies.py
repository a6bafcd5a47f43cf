import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tcpreempt.models import DomainError, Exponential, UniformDeadline, cdf, conditional_failure_prob
from tcpreempt.policies import (
    conditional_running_time,
    decide_reuse,
    expected_running_time,
    expected_wasted_work,
    job_failure_probability,
    policy_failure_probability,
    reuse_threshold,
)

from conftest import REP, bathtubs

UNI = UniformDeadline(24.0)


def quad_tf(m, a, c):
    return integrate.quad(lambda x: x * m._pdf(x), a, c, epsabs=0, epsrel=1e-13)[0]


class TestWastedWork:
    @pytest.mark.parametrize("J", range(1, 21))
    def test_uniform_is_half_job(self, J):
        assert abs(expected_wasted_work(UNI, J) - J / 2) <= 1e-12

    def test_bathtub_matches_quadrature(self, rep):
        w = expected_wasted_work(rep, 10.0)
        assert w == pytest.approx(quad_tf(rep, 0, 10) / cdf(rep, 10.0), rel=1e-10)
        assert w < 5.0

    def test_domain(self, rep):
        with pytest.raises(DomainError):
            expected_wasted_work(rep, 0.0)
        with pytest.raises(DomainError):
            expected_wasted_work(rep, 25.0)


class TestRunningTime:
    @pytest.mark.parametrize("J", range(1, 21))
    def test_uniform_increase_is_j_squared_over_48(self, J):
        assert abs(expected_running_time(UNI, J) - J - J * J / 48) <= 1e-12

    def test_uniform_six_hours(self):
        assert expected_running_time(UNI, 6.0) == pytest.approx(6.75, abs=1e-12)

    def test_vanishing_job(self, rep):
        assert expected_running_time(rep, 0.0) == 0.0

    def test_bathtub_ten_hour_job(self, rep):
        inc = expected_running_time(rep, 10.0) - 10.0
        assert inc == pytest.approx(quad_tf(rep, 0, 10), rel=1e-10)
        assert 0.25 <= inc <= 0.75
        assert expected_running_time(UNI, 10.0) - 10.0 == pytest.approx(100 / 48)

    def test_crossover_near_five_hours(self, rep):
        Js = np.linspace(0.1, 12, 400)
        cheaper = [expected_running_time(rep, J) < expected_running_time(UNI, J) for J in Js]
        first = Js[int(np.argmax(cheaper))]
        assert any(cheaper) and not cheaper[0]
        assert 3.0 <= first <= 7.0

    @settings(max_examples=40, deadline=None)
    @given(bathtubs(), st.floats(0.01, 12))
    def test_conditional_equals_literal_on_new_vm(self, m, T):
        # at age 0 the forms differ only by normalization and the tiny mass at t=0
        lit = expected_running_time(m, T, 0.0) - T
        cond = conditional_running_time(m, T, 0.0) - T
        scale = m._raw_cdf(m.L) - m._raw_cdf(0.0)
        assert cond == pytest.approx(lit / scale, rel=1e-9, abs=1e-12)


class TestReuse:
    def test_age_zero_ties_to_reuse(self, rep):
        for literal in (False, True):
            d = decide_reuse(rep, 6.0, 0.0, literal=literal)
            assert d.reuse and d.expected_time_existing == d.expected_time_new

    def test_late_vm_rejected(self, rep):
        assert not decide_reuse(rep, 6.0, 19.0).reuse
        assert not decide_reuse(rep, 6.0, 19.0, literal=True).reuse

    def test_mid_life_vm_reused(self, rep):
        assert decide_reuse(rep, 6.0, 10.0).reuse
        assert decide_reuse(rep, 6.0, 10.0, literal=True).reuse

    def test_domain(self, rep):
        with pytest.raises(DomainError):
            decide_reuse(rep, 25.0, 1.0)
        with pytest.raises(DomainError):
            decide_reuse(rep, 2.0, 24.0)

    def test_threshold_at_age_zero_is_deadline(self, rep):
        assert reuse_threshold(rep, 0.0) == 24.0

    def test_threshold_is_a_flip_point(self, rep):
        t = reuse_threshold(rep, 18.0)
        assert 0 < t < 6.0
        assert decide_reuse(rep, t - 1e-3, 18.0).reuse
        assert not decide_reuse(rep, t + 1e-3, 18.0).reuse

    @pytest.mark.xfail(strict=True, reason="representative parameters put the flip near 4.4 h, not 6 +- 1 h; see ledger")
    def test_threshold_at_eighteen_near_six_hours(self, rep):
        assert abs(reuse_threshold(rep, 18.0) - 6.0) <= 1.0

    def test_uniform_threshold_monotone_in_age(self):
        ts = [reuse_threshold(UNI, s) for s in np.linspace(1, 22, 8)]
        assert all(a >= b - 1e-9 for a, b in zip(ts, ts[1:]))

    def test_exponential_always_indifferent(self):
        e = Exponential(0.2)
        with pytest.raises(DomainError):
            reuse_threshold(e, 3.0)
        d = decide_reuse(e, 4.0, 7.0)
        assert d.expected_time_existing == pytest.approx(d.expected_time_new, rel=1e-12)


class TestFailureProbability:
    def test_memoryless_certain_failure_past_deadline(self, rep):
        for s in np.linspace(18.01, 23.9, 20):
            assert policy_failure_probability(rep, 6.0, s, "memoryless") == 1.0

    def test_model_policy_plateau_after_switch(self, rep):
        p0 = job_failure_probability(rep, 6.0, 0.0)
        for s in np.linspace(18.5, 23.9, 10):
            assert policy_failure_probability(rep, 6.0, s, "model") == pytest.approx(p0)
        assert abs(p0 - 0.4) <= 0.1

    def test_misfit_decision_model_uses_truth_for_outcomes(self, rep):
        other = UniformDeadline(24.0)
        p = policy_failure_probability(rep, 2.0, 10.0, decision_model=other)
        assert p in (job_failure_probability(rep, 2.0, 10.0), job_failure_probability(rep, 2.0, 0.0))

    def test_unknown_policy(self, rep):
        with pytest.raises(ValueError):
            policy_failure_probability(rep, 2.0, 1.0, "random")

    @pytest.mark.xfail(strict=True, reason="expected-time rule trades a higher failure chance for less lost work near the switch age; see ledger")
    def test_policy_dominance_pointwise(self, rep):
        T = 6.0
        for s in np.linspace(0, 24 - T, 97):
            pm = policy_failure_probability(rep, T, s, "model")
            pa = policy_failure_probability(rep, T, s, "memoryless")
            assert pm <= pa + 1e-12

    def test_policy_dominance_on_average(self, rep):
        ratios = []
        for T in (2.0, 6.0, 10.0):
            ages = np.linspace(0, 23.9, 97)
            pm = np.mean([policy_failure_probability(rep, T, s, "model") for s in ages])
            pa = np.mean([policy_failure_probability(rep, T, s, "memoryless") for s in ages])
            ratios.append(pm / pa)
        assert max(ratios) < 1.0


def test_conditional_failure_consistent_with_job_failure(rep):
    assert job_failure_probability(rep, 3.0, 5.0) == conditional_failure_prob(rep, 5.0, 3.0)
