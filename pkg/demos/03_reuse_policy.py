"""
Reusing a running VM or starting a fresh one
============================================

A VM that survived the early phase is unlikely to be preempted soon, but
one close to the deadline is doomed.  The reuse rule compares the expected
running time on the existing VM with that on a new one.
"""

import numpy as np

from tcpreempt import REPRESENTATIVE as model
from tcpreempt.policies import decide_reuse, policy_failure_probability, reuse_threshold

# Largest job worth placing on a VM of a given age
for age in (0, 2, 6, 12, 16, 18, 20, 22):
    print(f"age {age:>2} h -> reuse for jobs up to {reuse_threshold(model, age):5.2f} h")

# A 6 hour job across start ages
T = 6.0
print(f"\n{'age':>5} {'reuse':>6} {'P(fail) model':>14} {'P(fail) always':>15}")
for s in np.arange(0, 24, 2.0):
    d = decide_reuse(model, T, s)
    print(f"{s:>5.1f} {str(d.reuse):>6} {policy_failure_probability(model, T, s, 'model'):>14.3f} "
          f"{policy_failure_probability(model, T, s, 'memoryless'):>15.3f}")

# Averaged over ages and job lengths, the model-based rule fails far less often
ages = np.linspace(0, 24, 97)[:-1]
Ts = np.arange(1.0, 24.0)
pm = np.mean([[policy_failure_probability(model, J, s, "model") for s in ages] for J in Ts])
pa = np.mean([[policy_failure_probability(model, J, s, "memoryless") for s in ages] for J in Ts])
print(f"\nmean failure probability: model {pm:.3f}, always-reuse {pa:.3f}, ratio {pm / pa:.2f}")
