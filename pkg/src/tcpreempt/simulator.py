"""Discrete-event simulation of a bag of jobs on a cluster of preemptible VMs.

Time advances in whole seconds.  Each VM draws its lifetime from the
normalized failure model when it is launched.  Jobs are placed by a reuse
policy, optionally checkpoint at planned intervals, and after a preemption
resume from their last checkpoint on a freshly launched VM.  Idle VMs are kept
as hot spares for ``hot_spare_ttl`` hours.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .checkpointing import CheckpointPlanner, young_daly_interval
from .models import (
    FailureModel,
    model_from_dict,
    model_to_dict,
    normalized_cdf,
    sample_lifetime,
    sample_lifetimes,
)
from .policies import decide_reuse, job_failure_probability

__all__ = [
    "BagOfJobs",
    "ClusterConfig",
    "ReplicationResult",
    "SimulationReport",
    "NonTerminationError",
    "run_replication",
    "run_simulation",
    "sampled_lifetime_validation",
    "config_from_json",
]

MAX_FAILURES_PER_JOB = 1000
POLICIES = ("model-reuse", "always-reuse")
CHECKPOINT_POLICIES = ("none", "model-dp", "young-daly")

# event kinds, in processing order for equal timestamps
_PREEMPT, _SEGMENT_DONE, _SPARE_EXPIRE = 0, 1, 2


class NonTerminationError(RuntimeError):
    """A job was preempted more often than the simulator allows."""


@dataclass(frozen=True)
class BagOfJobs:
    job_count: int
    job_length: float  # hours
    checkpoint_cost_delta: float = 0.0  # hours

    def __post_init__(self):
        if self.job_count < 1:
            raise ValueError("job_count must be >= 1")
        if not self.job_length > 0:
            raise ValueError("job_length must be > 0")
        if self.checkpoint_cost_delta < 0:
            raise ValueError("checkpoint_cost_delta must be >= 0")


@dataclass(frozen=True)
class ClusterConfig:
    """Cluster and policy settings.

    ``failure_model=None`` disables preemptions altogether.  ``checkpoint_mttf``
    is the MTTF (hours) assumed by the Young-Daly policy.
    """

    vm_count: int
    failure_model: Optional[FailureModel]
    policy: str = "model-reuse"
    checkpoint_policy: str = "none"
    checkpoint_mttf: Optional[float] = None
    hot_spare_ttl: float = 1.0
    price_ratio: float = 0.2
    rng_seed: int = 0
    checkpoint_step: float = 1.0 / 60.0  # DP discretization, hours

    def __post_init__(self):
        if self.vm_count < 1:
            raise ValueError("vm_count must be >= 1")
        if not 0 < self.price_ratio <= 1:
            raise ValueError("price_ratio must be in (0, 1]")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if self.checkpoint_policy not in CHECKPOINT_POLICIES:
            raise ValueError(f"checkpoint_policy must be one of {CHECKPOINT_POLICIES}")
        if self.checkpoint_policy == "young-daly" and not (self.checkpoint_mttf or 0) > 0:
            raise ValueError("young-daly checkpointing needs a positive checkpoint_mttf")
        if self.checkpoint_policy == "model-dp" and self.failure_model is None:
            raise ValueError("model-dp checkpointing needs a failure model")
        if self.hot_spare_ttl < 0:
            raise ValueError("hot_spare_ttl must be >= 0")
        if not self.checkpoint_step > 0:
            raise ValueError("checkpoint_step must be > 0")

    def to_json(self) -> dict:
        d = asdict(self)
        fm = self.failure_model
        d["failure_model"] = None if fm is None else model_to_dict(fm)
        return d


def config_from_json(d: dict) -> tuple[ClusterConfig, BagOfJobs]:
    """Build configs from ``{"cluster": {...}, "bag": {...}}``.

    The failure model is ``{"family": ..., "params": {...}}`` or ``null``.
    """
    try:
        c = dict(d["cluster"])
        b = dict(d["bag"])
    except (KeyError, TypeError):
        raise ValueError("config needs 'cluster' and 'bag' objects") from None
    fm = c.pop("failure_model", None)
    if fm is not None:
        if not isinstance(fm, dict) or "family" not in fm or "params" not in fm:
            raise ValueError("failure_model must be {'family': ..., 'params': {...}}")
        fm = model_from_dict(fm["family"], fm["params"])
    try:
        return ClusterConfig(failure_model=fm, **c), BagOfJobs(**b)
    except TypeError as exc:
        raise ValueError(str(exc)) from None


@dataclass
class _Vm:
    id: int
    launched: int  # seconds
    dies: Optional[int]  # seconds, None if never preempted
    job: Optional[int] = None
    idle_token: int = 0
    alive: bool = True


@dataclass
class _Job:
    id: int
    remaining: int  # seconds of work left
    saved: int = 0  # work completed up to the last checkpoint
    failures: int = 0
    vm: Optional[int] = None
    seg_work: int = 0
    seg_started: int = 0
    token: int = 0
    needs_new_vm: bool = False


@dataclass
class ReplicationResult:
    makespan_hours: float
    preemptions: int  # preemptions that interrupted a running job
    idle_preemptions: int
    jobs_failed: int  # jobs preempted at least once
    retries: int
    completed: int
    vm_hours: float
    vms_launched: int
    placements: list = field(default_factory=list, repr=False)


@dataclass
class SimulationReport:
    job_count: int
    replications: list
    baseline_makespan_hours: float
    baseline_vm_hours: float
    price_ratio: float

    def per_replication(self) -> list[dict]:
        rows = []
        for i, r in enumerate(self.replications):
            cost = r.vm_hours * self.price_ratio
            rows.append({
                "replication": i,
                "makespan_hours": r.makespan_hours,
                "inflation": r.makespan_hours / self.baseline_makespan_hours - 1.0,
                "preemptions": r.preemptions,
                "idle_preemptions": r.idle_preemptions,
                "jobs_failed": r.jobs_failed,
                "job_failure_probability": r.jobs_failed / self.job_count,
                "retries": r.retries,
                "completed": r.completed,
                "vm_hours": r.vm_hours,
                "vms_launched": r.vms_launched,
                "cost": cost,
                "cost_ratio": cost / self.baseline_vm_hours,
            })
        return rows

    def summary(self) -> dict:
        rows = self.per_replication()
        out = {
            "replications": len(rows),
            "job_count": self.job_count,
            "baseline_makespan_hours": self.baseline_makespan_hours,
            "price_ratio": self.price_ratio,
        }
        for key in ("makespan_hours", "inflation", "preemptions", "job_failure_probability",
                    "retries", "vm_hours", "cost", "cost_ratio"):
            v = np.array([row[key] for row in rows], dtype=float)
            out[key] = {"mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size > 1 else 0.0}
        out["completed"] = int(sum(row["completed"] for row in rows))
        out["failed_in_flight"] = len(rows) * self.job_count - out["completed"]
        return out

    def to_json(self) -> dict:
        return {"summary": self.summary(), "per_replication": self.per_replication()}

    def to_csv(self) -> str:
        rows = self.per_replication()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _hours(sec) -> float:
    return sec / 3600.0


def _secs(hours: float) -> int:
    return int(round(hours * 3600.0))


class _Checkpointer:
    """Yields the work (seconds) of the next segment for a job in a given state."""

    def __init__(self, cluster: ClusterConfig, bag: BagOfJobs, planner=None):
        self.kind = cluster.checkpoint_policy
        self.delta = _secs(bag.checkpoint_cost_delta) if self.kind != "none" else 0
        self.planner = planner
        if self.kind == "model-dp":
            self.step = _secs(cluster.checkpoint_step)
            if planner is None:
                self.planner = CheckpointPlanner(cluster.failure_model, bag.job_length,
                                                 bag.checkpoint_cost_delta, cluster.checkpoint_step)
            self.delta = self.planner.d * self.step
        elif self.kind == "young-daly":
            tau = young_daly_interval(cluster.checkpoint_mttf, bag.checkpoint_cost_delta) \
                if bag.checkpoint_cost_delta > 0 else bag.job_length
            self.interval = max(1, _secs(tau))

    def job_seconds(self, bag: BagOfJobs) -> int:
        if self.kind == "model-dp":
            return self.planner.J * self.step
        return max(1, _secs(bag.job_length))

    def next_work(self, remaining: int, age: int) -> int:
        if self.kind == "none":
            return remaining
        if self.kind == "young-daly":
            return min(self.interval, remaining)
        steps = self.planner.next_interval(remaining // self.step, age // self.step)
        return steps * self.step


def run_replication(cluster: ClusterConfig, bag: BagOfJobs, rng, *, planner=None,
                    record: bool = False) -> ReplicationResult:
    """Simulate one run of the bag; ``rng`` is a numpy Generator."""
    model = cluster.failure_model
    ckpt = _Checkpointer(cluster, bag, planner)
    job_secs = ckpt.job_seconds(bag)
    ttl = _secs(cluster.hot_spare_ttl)
    use_model = cluster.policy == "model-reuse" and model is not None

    events: list = []
    seq = 0

    def push(t, kind, *data):
        nonlocal seq
        heapq.heappush(events, (t, kind, seq, data))
        seq += 1

    vms: dict[int, _Vm] = {}
    idle: set[int] = set()
    jobs = [_Job(i, job_secs) for i in range(bag.job_count)]
    pending = list(range(bag.job_count))  # FIFO of job ids; head is next to place
    next_vm = 0
    completed = preempted = idle_preempted = launched = 0
    vm_seconds = 0
    placements = []
    now = 0

    def launch():
        nonlocal next_vm, launched
        life = None
        if model is not None:
            life = max(1, _secs(sample_lifetime(model, rng)))
        vm = _Vm(next_vm, now, None if life is None else now + life)
        vms[vm.id] = vm
        if vm.dies is not None:
            push(vm.dies, _PREEMPT, vm.id)
        next_vm += 1
        launched += 1
        return vm

    def terminate(vm):
        nonlocal vm_seconds
        vm.alive = False
        vm_seconds += now - vm.launched
        idle.discard(vm.id)
        del vms[vm.id]

    def start_segment(job, vm):
        age = now - vm.launched
        work = ckpt.next_work(job.remaining, age)
        job.seg_work = work
        job.seg_started = now
        job.token += 1
        last = work >= job.remaining
        cost = work + ckpt.delta
        push(now + cost, _SEGMENT_DONE, job.id, job.token, last)

    def eligible(vm, remaining) -> bool:
        age_h = _hours(now - vm.launched)
        L = model.deadline
        if L is not None and age_h >= L:
            return False
        return decide_reuse(model, min(_hours(remaining), L or math.inf), age_h).reuse

    def risk(vm, remaining) -> float:
        return job_failure_probability(model, _hours(remaining), _hours(now - vm.launched))

    def place(job, vm, reused):
        vm.job = job.id
        vm.idle_token += 1
        idle.discard(vm.id)
        job.vm = vm.id
        job.needs_new_vm = False
        if record:
            placements.append((now, job.id, vm.id, _hours(now - vm.launched), reused, job.remaining))
        start_segment(job, vm)

    def dispatch():
        while pending:
            job = jobs[pending[0]]
            chosen = None
            if idle and not job.needs_new_vm:
                ids = sorted(idle)
                if use_model:
                    cands = [vms[i] for i in ids if eligible(vms[i], job.remaining)]
                    if cands:
                        chosen = min(cands, key=lambda v: (risk(v, job.remaining), v.id))
                else:
                    chosen = vms[ids[0]]
            if chosen is not None:
                pending.pop(0)
                place(job, chosen, True)
                continue
            if len(vms) >= cluster.vm_count:
                if not idle:
                    return
                # make room: retire the idle spare least suited for this job
                if use_model:
                    worst = max(sorted(idle), key=lambda i: (risk(vms[i], job.remaining), -i))
                else:
                    worst = max(idle)
                terminate(vms[worst])
            pending.pop(0)
            place(job, launch(), False)

    def make_idle(vm):
        vm.job = None
        vm.idle_token += 1
        idle.add(vm.id)
        push(now + ttl, _SPARE_EXPIRE, vm.id, vm.idle_token)

    dispatch()
    while completed < bag.job_count:
        if not events:
            raise RuntimeError("event queue drained with unfinished jobs")
        now, kind, _, data = heapq.heappop(events)
        if kind == _PREEMPT:
            vm = vms.get(data[0])
            if vm is None or not vm.alive:
                continue
            if vm.job is None:
                idle_preempted += 1
                terminate(vm)
            else:
                job = jobs[vm.job]
                preempted += 1
                job.failures += 1
                if job.failures > MAX_FAILURES_PER_JOB:
                    raise NonTerminationError(
                        f"job {job.id} preempted {job.failures} times; "
                        "the model leaves too little room to finish it")
                job.token += 1  # cancel its pending segment event
                job.vm = None
                job.needs_new_vm = True
                pending.insert(0, job.id)
                terminate(vm)
        elif kind == _SEGMENT_DONE:
            jid, token, last = data
            job = jobs[jid]
            if token != job.token:
                continue
            vm = vms[job.vm]
            job.remaining -= job.seg_work
            job.saved += job.seg_work
            if last:
                completed += 1
                job.vm = None
                make_idle(vm)
            else:
                start_segment(job, vm)
                continue
        else:
            vm = vms.get(data[0])
            if vm is None or vm.idle_token != data[1] or vm.job is not None:
                continue
            terminate(vm)
        running = sum(1 for v in vms.values() if v.job is not None)
        assert completed + running + len(pending) == bag.job_count
        dispatch()

    # the bag is done: tear down whatever is left
    for vm in list(vms.values()):
        terminate(vm)
    return ReplicationResult(
        makespan_hours=_hours(now),
        preemptions=preempted,
        idle_preemptions=idle_preempted,
        jobs_failed=sum(1 for j in jobs if j.failures),
        retries=sum(j.failures for j in jobs),
        completed=completed,
        vm_hours=_hours(vm_seconds),
        vms_launched=launched,
        placements=placements,
    )


def replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def run_simulation(cluster: ClusterConfig, bag: BagOfJobs, replications: int = 1, *,
                   record: bool = False) -> SimulationReport:
    """Run ``replications`` independent seeded replications and a preemption-free baseline."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    planner = None
    if cluster.checkpoint_policy == "model-dp":
        planner = CheckpointPlanner(cluster.failure_model, bag.job_length,
                                    bag.checkpoint_cost_delta, cluster.checkpoint_step)
    reps = [run_replication(cluster, bag, replication_rng(cluster.rng_seed, i),
                            planner=planner, record=record)
            for i in range(replications)]
    base_cfg = ClusterConfig(vm_count=cluster.vm_count, failure_model=None, policy=cluster.policy,
                             hot_spare_ttl=cluster.hot_spare_ttl, price_ratio=cluster.price_ratio,
                             rng_seed=cluster.rng_seed, checkpoint_step=cluster.checkpoint_step)
    base = run_replication(base_cfg, bag, replication_rng(cluster.rng_seed, -1 % 2**32))
    return SimulationReport(
        job_count=bag.job_count,
        replications=reps,
        baseline_makespan_hours=base.makespan_hours,
        baseline_vm_hours=base.vm_hours,
        price_ratio=cluster.price_ratio,
    )


def sampled_lifetime_validation(model: FailureModel, n: int, rng_seed=0) -> float:
    """Kolmogorov distance between ``n`` sampled lifetimes and the normalized CDF."""
    if n < 1000:
        raise ValueError("need n >= 1000")
    x = np.sort(sample_lifetimes(model, np.random.default_rng(rng_seed), n))
    L = model.deadline
    F = np.asarray(normalized_cdf(model, x if L is None else np.minimum(x, L)))
    k = np.arange(1, n + 1)
    return float(max(np.max(k / n - F), np.max(F - (k - 1) / n)))
