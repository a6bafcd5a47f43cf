"""
Deadline-bounded preemptions and what they cost
===============================================

A preemptible VM lives at most L hours.  Preemptions cluster right after
launch and right before the deadline, so the hazard is bathtub shaped.
This walk-through compares that model with preemptions spread uniformly
over the same window.
"""

import numpy as np

from tcpreempt import REPRESENTATIVE as model
from tcpreempt import UniformDeadline, cdf, expected_lifetime, pdf
from tcpreempt.policies import expected_running_time, expected_wasted_work

uniform = UniformDeadline(model.L)

# The CDF rises quickly, flattens out, then jumps again near the deadline
for t in (0.5, 1, 3, 6, 12, 18, 22, 23.5, 24):
    print(f"F({t:>4}) = {cdf(model, t):.3f}")

# Hazard rate: pdf over survival, high at both ends
t = np.linspace(0, 23.9, 8)
print("hazard:", np.round(pdf(model, t) / (1 - cdf(model, t)), 3))

print(f"expected lifetime integral: {expected_lifetime(model):.2f} h")

# Work lost to one preemption, and the expected makespan increase
print(f"{'J':>4} {'waste':>8} {'waste(u)':>9} {'incr':>8} {'incr(u)':>8}")
for J in (1, 2, 5, 8, 10, 16):
    print(f"{J:>4} {expected_wasted_work(model, J):>8.3f} {expected_wasted_work(uniform, J):>9.3f} "
          f"{expected_running_time(model, J) - J:>8.3f} {expected_running_time(uniform, J) - J:>8.3f}")

# Short jobs pay more under the bathtub (early failures); long jobs pay much less
