"""Deadline-bounded preemption models, VM reuse and checkpoint policies, and a cluster simulator."""

from .checkpointing import (
    CheckpointPlanner,
    CheckpointSchedule,
    expected_makespan_with_schedule,
    optimal_checkpoint_schedule,
    young_daly_interval,
    young_daly_schedule,
)
from .fitting import (
    DegenerateDataError,
    EmpiricalCdf,
    FitResult,
    build_empirical_cdf,
    fit_all,
    fit_baseline,
    fit_bathtub,
    r_squared,
)
from .ingestion import (
    CohortFilter,
    EmptyCohortError,
    LifetimeRecord,
    SchemaError,
    group_and_build,
    parse_dataset,
    write_dataset,
)
from .models import (
    BathtubParams,
    DomainError,
    Exponential,
    GompertzMakeham,
    UniformDeadline,
    Weibull,
    cdf,
    conditional_failure_prob,
    expected_lifetime,
    normalized_cdf,
    partial_loss_integral,
    pdf,
    sample_lifetime,
    sample_lifetimes,
)
from .policies import (
    conditional_running_time,
    decide_reuse,
    expected_running_time,
    expected_wasted_work,
    policy_failure_probability,
    reuse_threshold,
)
from .simulator import (
    BagOfJobs,
    ClusterConfig,
    SimulationReport,
    run_simulation,
    sampled_lifetime_validation,
)

# Representative bathtub parameters for a small preemptible VM type
REPRESENTATIVE = BathtubParams(A=0.45, tau1=1.0, tau2=0.8, b=24.0, L=24.0)

__version__ = "0.1.0"
