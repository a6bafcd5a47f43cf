"""Model-driven checkpoint scheduling by dynamic programming, plus Young-Daly.

Time is discretised into steps of ``step`` hours.  A job of ``J`` steps is cut
into segments; a segment of ``i`` work steps costs ``i + d`` steps where ``d``
is the checkpoint cost.  A segment starting at VM age ``a`` either completes
(probability ``1 - p``) or is preempted, in which case the expected elapsed
time until the preemption is lost and the segment is retried.

The state is ``(remaining steps, VM age in steps)``.  Makespans are measured
from the job start.  After a preemption the job resumes from its last
checkpoint on a fresh VM (``resume="new-vm"``, the default) or, in the
``"same-age"`` variant, with the VM age carried forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import DomainError, FailureModel, partial_loss_integral

__all__ = [
    "MAX_STEPS",
    "CheckpointSchedule",
    "SegmentTables",
    "CheckpointPlanner",
    "young_daly_interval",
    "young_daly_schedule",
    "optimal_checkpoint_schedule",
    "expected_makespan_with_schedule",
]

MAX_STEPS = 10_000


def young_daly_interval(mttf: float, delta: float) -> float:
    """Periodic checkpoint spacing ``sqrt(2 * delta * mttf)``."""
    if not (mttf > 0 and delta > 0):
        raise DomainError("MTTF and checkpoint cost must be positive")
    return math.sqrt(2.0 * delta * mttf)


def _to_steps(x: float, step: float, what: str, round_up: bool = False) -> int:
    q = x / step
    n = round(q)
    if abs(q - n) <= 1e-9 * max(1.0, abs(q)):
        return int(n)
    if round_up:
        return int(math.ceil(q))
    raise DomainError(f"{what}={x} h is not a whole number of {step} h steps")


@dataclass
class CheckpointSchedule:
    """Work intervals between successive checkpoints, in hours."""

    intervals: list
    expected_makespan: float
    discretization_step: float
    checkpoint_cost: float = 0.0
    start_age: float = 0.0
    planner: Optional["CheckpointPlanner"] = field(default=None, repr=False, compare=False)

    @property
    def job_length(self) -> float:
        return float(sum(self.intervals))

    def to_json(self) -> dict:
        return {
            "intervals_minutes": [round(i * 60.0, 9) for i in self.intervals],
            "expected_makespan_hours": self.expected_makespan,
            "step_minutes": round(self.discretization_step * 60.0, 9),
        }


class SegmentTables:
    """Per-(age, segment length) failure probability and expected loss.

    ``p_fail[a, s]`` is the probability that a segment of ``s`` steps started
    at age ``a`` is preempted; ``loss[a, s]`` is the expected elapsed time (h)
    before the preemption given that it happens.  Segments that run past the
    deadline fail with certainty.
    """

    def __init__(self, model: FailureModel, step: float, n_ages: int, max_seg: int):
        self.model = model
        self.step = step
        L = model.deadline
        self.n_deadline = _to_steps(L, step, "deadline", round_up=True) if L is not None else None
        n_grid = n_ages + max_seg
        t = np.arange(n_grid + 1, dtype=float) * step
        if L is not None:
            t = np.minimum(t, L)
            scale = model._raw_cdf(L)
        else:
            scale = 1.0
        F = model._raw_cdf(t) / scale
        H = partial_loss_integral(model, 0.0, t) / scale
        a = np.arange(n_ages + 1)[:, None]
        s = np.arange(max_seg + 1)[None, :]
        F0, F1 = F[a], F[a + s]
        t0, t1 = t[a], t[a + s]
        surv = 1.0 - F0
        mass = F1 - F0
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(surv > 0, mass / surv, 1.0)
            loss = np.where(mass > 0, (H[a + s] - H[a] - t0 * mass) / mass, 0.5 * (t1 - t0))
        p = np.clip(p, 0.0, 1.0)
        if L is not None:
            p = np.where((a + s) * step > L + 1e-9, 1.0, p)
        loss = np.clip(loss, 0.0, t1 - t0)
        self.p_fail = p
        self.loss = loss


class CheckpointPlanner:
    """Dynamic program over (remaining steps, VM age) for one job length.

    Build once per job length and checkpoint cost; the tables then answer
    every start age, which is how the simulator precomputes schedules.
    """

    def __init__(self, model: FailureModel, J: float, delta: float, step: float,
                 *, resume: str = "new-vm", max_start_age: float = 0.0):
        if step <= 0:
            raise DomainError("step must be positive")
        if J <= 0:
            raise DomainError("job length must be positive")
        if delta < 0:
            raise DomainError("checkpoint cost must be >= 0")
        if resume not in ("new-vm", "same-age"):
            raise ValueError(f"unknown resume variant {resume!r}")
        self.model = model
        self.step = step
        self.delta = delta
        self.resume = resume
        self.J = _to_steps(J, step, "job length", round_up=True)
        self.d = _to_steps(delta, step, "checkpoint cost")
        L = model.deadline
        if L is not None:
            n_ages = _to_steps(L, step, "deadline", round_up=True)
        else:
            n_ages = _to_steps(max_start_age, step, "start age", round_up=True) + self.J * (1 + self.d)
        if self.J > MAX_STEPS or n_ages > MAX_STEPS:
            raise DomainError(f"state space too large (>{MAX_STEPS} steps per dimension)")
        self.n_ages = n_ages
        self.tables = SegmentTables(model, step, n_ages, self.J + self.d)
        self._solve()

    def _solve(self):
        J, d, h, NA = self.J, self.d, self.step, self.n_ages
        P, Ls = self.tables.p_fail, self.tables.loss
        V = np.zeros((J + 1, NA + 1))
        choice = np.zeros((J + 1, NA + 1), dtype=np.int64)
        ages = np.arange(NA + 1)
        for j in range(1, J + 1):
            i = np.arange(1, j + 1)
            seg = i + d
            nxt = ages[:, None] + seg[None, :]
            cont = V[j - i[None, :], np.minimum(nxt, NA)]
            p = P[:, seg]
            ps = 1.0 - p
            lo = Ls[:, seg]
            with np.errstate(invalid="ignore"):
                succ = np.where(ps > 0, seg * h + cont, 0.0)
            if self.resume == "new-vm":
                # failure from age 0 returns to this very state: solve the fixed point
                with np.errstate(divide="ignore", invalid="ignore"):
                    v0 = np.where(ps[0] > 0, succ[0] + p[0] / ps[0] * lo[0], np.inf)
                k0 = int(np.argmin(v0))
                V[j, 0] = v0[k0]
                choice[j, 0] = k0 + 1
                with np.errstate(invalid="ignore"):
                    vals = ps[1:] * succ[1:] + np.where(p[1:] > 0, p[1:] * (lo[1:] + V[j, 0]), 0.0)
                k = np.argmin(vals, axis=1)
                V[j, 1:] = vals[np.arange(NA), k]
                choice[j, 1:] = k + 1
            else:
                self._solve_same_age(j, V, choice, p, ps, lo, succ, nxt)
        self.V = V
        self.choice = choice

    def _solve_same_age(self, j, V, choice, p, ps, lo, succ, nxt):
        # failure keeps the VM age; a VM that reaches the deadline is replaced by a new one,
        # so row 0 feeds back into itself: iterate on x = V[j, 0]
        NA = self.n_ages
        x = V[j - 1, 0] if j > 1 else 0.0
        row = np.empty(NA + 1)
        for _ in range(500):
            for a in range(NA, -1, -1):
                nx = nxt[a]
                fail_cont = np.where(nx < NA, row[np.minimum(nx, NA)], x)
                with np.errstate(invalid="ignore"):
                    vals = ps[a] * succ[a] + np.where(p[a] > 0, p[a] * (lo[a] + fail_cont), 0.0)
                k = int(np.argmin(vals))
                row[a] = vals[k]
                choice[j, a] = k + 1
            done = abs(row[0] - x) <= 1e-13 * max(1.0, abs(x))
            x = row[0]
            if done:
                break
        V[j] = row

    def _age_steps(self, start_age: float) -> int:
        a = int(math.floor(start_age / self.step + 1e-9))
        if a < 0 or a > self.n_ages:
            raise DomainError(f"start age {start_age} outside the planned range")
        return a

    def value(self, start_age: float = 0.0, remaining: Optional[int] = None) -> float:
        j = self.J if remaining is None else remaining
        return float(self.V[j, self._age_steps(start_age)])

    def next_interval(self, remaining: int, age_steps: int) -> int:
        """Work steps before the next checkpoint in state (remaining, age)."""
        return int(self.choice[remaining, min(age_steps, self.n_ages)])

    def schedule(self, start_age: float = 0.0) -> CheckpointSchedule:
        a = self._age_steps(start_age)
        j = self.J
        out = []
        while j > 0:
            i = int(self.choice[j, a])
            out.append(i)
            j -= i
            a += i + self.d
            if a > self.n_ages and j > 0:
                # the job cannot reach this point on the current VM; it resumes on a new one
                a = 0
        return CheckpointSchedule(
            intervals=[i * self.step for i in out],
            expected_makespan=float(self.V[self.J, self._age_steps(start_age)]),
            discretization_step=self.step,
            checkpoint_cost=self.delta,
            start_age=start_age,
            planner=self,
        )


def optimal_checkpoint_schedule(model: FailureModel, J: float, start_age: float, delta: float,
                                step: float = 1.0 / 60.0, *, resume: str = "new-vm") -> CheckpointSchedule:
    """Checkpoint intervals minimising expected makespan for a job of ``J`` hours."""
    L = model.deadline
    if L is not None and start_age + J > L + 1e-9:
        raise DomainError("job does not fit between start age and deadline")
    if start_age < 0:
        raise DomainError("start age must be >= 0")
    planner = CheckpointPlanner(model, J, delta, step, resume=resume, max_start_age=start_age)
    return planner.schedule(start_age)


def young_daly_schedule(J: float, mttf: float, delta: float, step: float = 1.0 / 60.0) -> CheckpointSchedule:
    """Periodic schedule with the Young-Daly spacing rounded to whole steps."""
    n = _to_steps(J, step, "job length", round_up=True)
    i = max(1, int(round(young_daly_interval(mttf, delta) / step)))
    steps = [i] * (n // i) + ([n % i] if n % i else [])
    return CheckpointSchedule(
        intervals=[k * step for k in steps],
        expected_makespan=float("nan"),
        discretization_step=step,
        checkpoint_cost=delta,
    )


def expected_makespan_with_schedule(model: FailureModel, schedule: CheckpointSchedule, J: float,
                                    start_age: float = 0.0, *, delta: Optional[float] = None,
                                    after_failure: Optional[str] = None) -> float:
    """Expected makespan of a fixed schedule under the same segment recurrence as the DP.

    ``after_failure`` says what happens once a preemption forces a resume on a
    new VM: ``"repeat"`` keeps following the remaining intervals of this
    schedule, ``"optimal"`` switches to the DP optimum for the remaining work.
    Schedules produced by the planner default to ``"optimal"``, others to
    ``"repeat"``.
    """
    h = schedule.discretization_step
    delta = schedule.checkpoint_cost if delta is None else delta
    d = _to_steps(delta, h, "checkpoint cost")
    segs = [_to_steps(x, h, "interval") for x in schedule.intervals]
    if any(k <= 0 for k in segs):
        raise DomainError("intervals must be positive")
    n = _to_steps(J, h, "job length", round_up=True)
    if sum(segs) != n:
        raise DomainError(f"schedule covers {sum(segs) * h} h, job is {n * h} h")
    if after_failure is None:
        after_failure = "optimal" if schedule.planner is not None else "repeat"
    planner = schedule.planner
    if after_failure == "optimal":
        if planner is None or planner.J != n or planner.d != d or planner.step != h:
            planner = CheckpointPlanner(model, n * h, delta, h)
        if planner.resume != "new-vm":
            raise ValueError("optimal resume needs a new-vm planner")
    elif after_failure != "repeat":
        raise ValueError(f"unknown after_failure {after_failure!r}")

    a0 = int(math.floor(start_age / h + 1e-9))
    K = len(segs)
    prefix = np.concatenate([[0], np.cumsum(np.array(segs) + d)])
    remaining = n - np.concatenate([[0], np.cumsum(segs)])
    max_age = a0 + int(prefix[-1])
    tables = SegmentTables(model, h, max_age, max(segs) + d)
    NL = tables.n_deadline

    def seg_terms(a, k):
        s = segs[k] + d
        if NL is not None and a > NL:
            return 1.0, 0.0
        return tables.p_fail[a, s], tables.loss[a, s]

    # "repeat": ages reachable at segment k are a0 + prefix[k] on the first VM and
    # prefix[k] - prefix[m] after a resume at segment m (age 0 = resumed at k)
    E_next: dict = {}
    for k in range(K - 1, -1, -1):
        s = segs[k] + d
        cur: dict = {}

        def succ_val(a):
            return 0.0 if k == K - 1 else E_next[a + s]

        def val(a, restart):
            p, lo = seg_terms(a, k)
            v = p * (lo + restart) if p > 0 else 0.0
            if p < 1.0:
                v += (1.0 - p) * (s * h + succ_val(a))
            return v

        if after_failure == "optimal":
            cur[a0 + int(prefix[k])] = val(a0 + int(prefix[k]), planner.V[remaining[k], 0])
        else:
            p0, l0 = seg_terms(0, k)
            restart = math.inf if p0 >= 1.0 else s * h + succ_val(0) + p0 / (1.0 - p0) * l0
            cur[0] = restart
            for a in {a0 + int(prefix[k])} | {int(prefix[k] - prefix[m]) for m in range(k)}:
                if a != 0:
                    cur[a] = val(a, restart)
        E_next = cur
    return float(E_next[a0])
