"""Running-time analysis and the VM reuse policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    DomainError,
    FailureModel,
    cdf,
    conditional_failure_prob,
    normalized_cdf,
    partial_loss_integral,
)

__all__ = [
    "ReuseDecision",
    "expected_wasted_work",
    "expected_running_time",
    "conditional_running_time",
    "decide_reuse",
    "reuse_threshold",
    "job_failure_probability",
    "policy_failure_probability",
]


def _deadline(model):
    return model.deadline if model.deadline is not None else np.inf


def expected_wasted_work(model: FailureModel, T: float) -> float:
    """Work lost to a single preemption of a job of length ``T`` started on a fresh VM."""
    if not 0 < T <= _deadline(model):
        raise DomainError(f"job length must be in (0, L], got {T}")
    F = cdf(model, T)
    if F <= 0:
        raise DomainError("no preemption mass before T")
    return partial_loss_integral(model, 0.0, T) / F


def expected_running_time(model: FailureModel, T: float, start_age_s: float = 0.0) -> float:
    """``T + int_s^{s+T} t f(t) dt``: expected makespan with at most one preemption."""
    if T < 0 or start_age_s < 0:
        raise DomainError("job length and start age must be >= 0")
    if start_age_s + T > _deadline(model) + 1e-9:
        raise DomainError("job cannot finish before the deadline")
    return T + partial_loss_integral(model, start_age_s, start_age_s + T)


def _relative_loss(model, s, e):
    """E[(x - s) ; s < x <= e | alive at s] under the normalized model."""
    L = model.deadline
    scale = model._raw_cdf(L) if L is not None else 1.0
    mass = (model._raw_cdf(e) - model._raw_cdf(s)) / scale
    num = partial_loss_integral(model, s, e) / scale - s * mass
    return max(num, 0.0) / (1.0 - normalized_cdf(model, s))


def conditional_running_time(model: FailureModel, T: float, start_age_s: float = 0.0) -> float:
    """First-order expected makespan of a job started on a VM known to be alive at age ``s``.

    Lost work is measured from the job start, and the preemption density is
    conditioned on survival to ``s``.  When the job cannot finish before the
    deadline, preemption is certain and the job is rerun once on a fresh VM.
    """
    s = float(start_age_s)
    L = _deadline(model)
    if T < 0 or s < 0 or s >= L:
        raise DomainError("need T >= 0 and 0 <= s < L")
    if T > L:
        raise DomainError("job longer than the VM lifetime bound")
    if s + T <= L + 1e-12:
        return T + _relative_loss(model, s, min(s + T, L))
    # preemption before completion is certain; first-order rerun on a new VM
    scale = model._raw_cdf(L)
    mass = (model._raw_cdf(L) - model._raw_cdf(s)) / scale
    wasted = _relative_loss(model, s, L) / mass
    return wasted + conditional_running_time(model, T, 0.0)


@dataclass(frozen=True)
class ReuseDecision:
    reuse: bool
    expected_time_existing: float
    expected_time_new: float


def decide_reuse(model: FailureModel, T: float, vm_age_s: float, *, literal: bool = False) -> ReuseDecision:
    """Run on the existing VM iff its expected running time is no worse than a new VM's.

    ``literal=True`` compares the uncorrected ``T + int_s^{s+T} t f(t) dt`` form,
    which weights losses by VM age rather than by work done.
    """
    L = _deadline(model)
    if T > L:
        raise DomainError(f"job length {T} exceeds the lifetime bound {L}")
    if not 0 <= vm_age_s < L:
        raise DomainError(f"VM age must be in [0, L), got {vm_age_s}")
    if literal:
        e0 = expected_running_time(model, T, 0.0)
        if vm_age_s + T > L:
            mass = model._raw_cdf(L) - model._raw_cdf(vm_age_s)
            es = T + partial_loss_integral(model, vm_age_s, L) / mass
        else:
            es = expected_running_time(model, T, vm_age_s)
    else:
        e0 = conditional_running_time(model, T, 0.0)
        es = conditional_running_time(model, T, vm_age_s)
    return ReuseDecision(bool(es <= e0), float(es), float(e0))


def reuse_threshold(model: FailureModel, s: float, *, literal: bool = False, grid: int = 480) -> float:
    """Smallest job length at which the policy flips from reuse to a new VM at age ``s``.

    Scans (0, L] on ``grid`` points, then bisects the first reuse -> new
    transition.  Returns L when the VM is reused for every length, 0 when it
    is never reused.
    """
    L = _deadline(model)
    if not np.isfinite(L):
        raise DomainError("reuse threshold needs a deadline-bounded model")
    if not 0 <= s < L:
        raise DomainError("age must be in [0, L)")
    ok = lambda T: decide_reuse(model, T, s, literal=literal).reuse
    Ts = np.linspace(L / grid, L, grid)
    flags = [ok(T) for T in Ts]
    for k in range(1, grid):
        if flags[k - 1] and not flags[k]:
            lo, hi = Ts[k - 1], Ts[k]
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                if ok(mid):
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
    return float(L) if flags[-1] else 0.0


def job_failure_probability(model: FailureModel, T: float, s: float) -> float:
    """Probability a job of length ``T`` started at VM age ``s`` is preempted."""
    if model.deadline is not None and s + T >= model.deadline:
        return 1.0
    return conditional_failure_prob(model, s, T)


def policy_failure_probability(model: FailureModel, T: float, s: float, policy: str = "model",
                               decision_model: FailureModel | None = None, literal: bool = False) -> float:
    """Job failure probability at start age ``s`` under a scheduling policy.

    ``policy`` is ``"model"`` (reuse per :func:`decide_reuse`) or ``"memoryless"``
    (always reuse).  ``decision_model`` lets a different (e.g. misfit) model
    drive the decision while ``model`` is the ground truth.
    """
    if policy == "memoryless":
        return job_failure_probability(model, T, s)
    if policy != "model":
        raise ValueError(f"unknown policy {policy!r}")
    dm = decision_model or model
    if decide_reuse(dm, T, s, literal=literal).reuse:
        return job_failure_probability(model, T, s)
    return job_failure_probability(model, T, 0.0)
