"""
Checkpoint schedules from the failure model
===========================================

Dynamic programming over (remaining work, VM age) picks when to checkpoint.
Early on, when preemptions are likely, checkpoints are frequent; during the
stable middle of the VM's life they spread out.  Periodic Young-Daly
checkpointing is shown for comparison.
"""

from tcpreempt import REPRESENTATIVE as model
from tcpreempt import Exponential
from tcpreempt.checkpointing import (
    CheckpointPlanner,
    expected_makespan_with_schedule,
    optimal_checkpoint_schedule,
    young_daly_interval,
    young_daly_schedule,
)

delta = step = 1 / 60  # one minute

s = optimal_checkpoint_schedule(model, 5.0, 0.0, delta, step)
print("5 h job on a new VM, intervals (min):", [round(x * 60) for x in s.intervals])

# Memoryless failures give evenly spaced checkpoints near the Young-Daly period
e = optimal_checkpoint_schedule(Exponential(1.0), 2.0, 0.0, delta, step)
print("exponential, MTTF 1 h:", [round(x * 60) for x in e.intervals],
      f"(Young-Daly {young_daly_interval(1.0, delta) * 60:.2f} min)")

# Overhead of a 4 hour job by start age
J = 4.0
planner = CheckpointPlanner(model, J, delta, step)
yd = young_daly_schedule(J, 1.0, delta, step)
print(f"\n{'age':>4} {'DP':>7} {'Young-Daly':>11}")
for age in (0, 2, 5, 10, 15, 18, 20):
    dp = planner.value(age) / J - 1
    per = expected_makespan_with_schedule(model, yd, J, age) / J - 1
    print(f"{age:>4} {dp:>7.2%} {per:>11.2%}")
