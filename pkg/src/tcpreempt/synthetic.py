"""Synthetic lifetime datasets for tests and demos.

These records are drawn from a known failure model.  They stand in for real
measurements when those are unavailable and should never be mistaken for them.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np

from .ingestion import LifetimeRecord
from .models import BathtubParams, FailureModel, sample_lifetimes

# Two made-up VM types with visibly different bathtubs, loosely shaped like
# small and large preemptible instances.
SYNTHETIC_TYPES = {
    "synthetic-small": BathtubParams(A=0.45, tau1=1.0, tau2=0.8, b=24.0),
    "synthetic-large": BathtubParams(A=0.40, tau1=3.0, tau2=1.5, b=24.0),
}


def synthetic_records(model: FailureModel, n: int, *, vm_type: str = "synthetic-small",
                      zone: str = "us-east1-b", workload_tag: str = "idle", seed=0,
                      start: datetime = datetime(2019, 2, 4, tzinfo=timezone.utc),
                      span_days: float = 14.0, censor: float = 24.0) -> list[LifetimeRecord]:
    """``n`` records with lifetimes from ``model`` and launch times spread over ``span_days``.

    Lifetimes of unbounded models are cut off at ``censor`` hours.
    """
    rng = np.random.default_rng(seed)
    life = sample_lifetimes(model, rng, n)
    life = np.clip(np.round(life, 6), 1e-6, censor)
    offsets = np.sort(rng.uniform(0.0, span_days * 86400.0, n))
    return [
        LifetimeRecord(vm_type=vm_type, zone=zone,
                       launch_timestamp=start + timedelta(seconds=int(o)),
                       lifetime_hours=float(x), workload_tag=workload_tag)
        for o, x in zip(offsets, life)
    ]


def synthetic_dataset(n_per_type: int = 2000, seed=0) -> list[LifetimeRecord]:
    """Records for every entry of :data:`SYNTHETIC_TYPES`."""
    out = []
    for k, (name, model) in enumerate(SYNTHETIC_TYPES.items()):
        out += synthetic_records(model, n_per_type, vm_type=name, seed=[int(seed), k])
    return out
