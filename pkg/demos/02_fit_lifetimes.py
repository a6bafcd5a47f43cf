"""
Fitting failure models to lifetime data
=======================================

Lifetimes are read from CSV, filtered to a cohort, turned into an empirical
CDF and fitted with the bathtub curve and three classic baselines.  The data
here is synthetic, drawn from known bathtub curves.
"""

import tempfile
from pathlib import Path

from tcpreempt import CohortFilter, group_and_build, parse_dataset, write_dataset
from tcpreempt.fitting import fit_all
from tcpreempt.synthetic import SYNTHETIC_TYPES, synthetic_dataset

# Write a synthetic dataset in the canonical CSV layout, then read it back
path = Path(tempfile.mkdtemp()) / "lifetimes.csv"
write_dataset(synthetic_dataset(2000, seed=0), path)
parsed = parse_dataset(path)
print(f"{len(parsed)} records, {len(parsed.errors)} bad rows")

for vm_type, truth in SYNTHETIC_TYPES.items():
    ecdf = group_and_build(parsed.records, CohortFilter(vm_type=vm_type), deadline=24.0)
    fits = fit_all(ecdf, 24.0)
    print(f"\n{vm_type}: n={ecdf.n}, generating tau1={truth.tau1}")
    for fam, res in sorted(fits.items(), key=lambda kv: -kv[1].r_squared):
        print(f"  {fam:<18} r2={res.r_squared:.4f}")
    print("  bathtub params:", {k: round(v, 3) for k, v in fits["bathtub"].model.to_json().items()})

# Cohorts can also be split by local time of day
night = group_and_build(parsed.records, CohortFilter(vm_type="synthetic-small", time_of_day="night"))
print(f"\nnight launches of synthetic-small: {night.n}")
