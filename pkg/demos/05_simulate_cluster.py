"""
Simulating a bag of jobs on preemptible VMs
===========================================

A discrete-event simulation runs a bag of equal-length jobs on a fixed-size
cluster.  VM lifetimes are drawn from the failure model; jobs are placed by a
reuse policy and optionally checkpointed.
"""

import numpy as np

from tcpreempt import REPRESENTATIVE as model
from tcpreempt import BagOfJobs, ClusterConfig, run_simulation

# Reuse policy: model-based vs always reuse, for 6 hour jobs
bag = BagOfJobs(job_count=40, job_length=6.0)
for policy in ("model-reuse", "always-reuse"):
    rep = run_simulation(ClusterConfig(8, model, policy=policy, rng_seed=0), bag, 30).summary()
    print(f"{policy:<13} failure prob {rep['job_failure_probability']['mean']:.3f}  "
          f"inflation {rep['inflation']['mean']:.2%}  cost ratio {rep['cost_ratio']['mean']:.3f}")

# Checkpointing 4 hour jobs
bag = BagOfJobs(job_count=16, job_length=4.0, checkpoint_cost_delta=1 / 60)
for name, kw in [("none", {}), ("model-dp", {"checkpoint_policy": "model-dp"}),
                 ("young-daly", {"checkpoint_policy": "young-daly", "checkpoint_mttf": 1.0})]:
    rep = run_simulation(ClusterConfig(8, model, rng_seed=1, **kw), bag, 50).summary()
    print(f"checkpointing {name:<10} inflation {rep['inflation']['mean']:.2%}")

# Inflation against the number of preemptions seen in a run
rep = run_simulation(ClusterConfig(32, model, rng_seed=0), BagOfJobs(100, 14 / 60), 100)
rows = rep.per_replication()
x = np.array([r["preemptions"] for r in rows])
y = np.array([r["inflation"] for r in rows])
slope = np.polyfit(x, y, 1)[0]
print(f"\n100 x 14 min jobs on 32 VMs: {x.mean():.1f} preemptions per run, "
      f"{slope:.2%} extra running time per preemption")
