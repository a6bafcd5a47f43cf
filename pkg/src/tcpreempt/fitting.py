"""Empirical lifetime CDFs and least-squares fits of the failure models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .models import (
    FAMILIES,
    BathtubParams,
    Exponential,
    FailureModel,
    GompertzMakeham,
    Weibull,
    cdf,
    family_of,
    model_from_dict,
)

__all__ = [
    "DegenerateDataError",
    "EmpiricalCdf",
    "FitResult",
    "build_empirical_cdf",
    "r_squared",
    "fit_bathtub",
    "fit_baseline",
    "fit_all",
    "MIN_DISTINCT",
]

MIN_DISTINCT = 8
F0_PENALTY = 100.0
RATE_BOUNDS = (1e-4, 1e3)


class DegenerateDataError(ValueError):
    """Too little distinct data to fit a model."""


@dataclass(frozen=True)
class EmpiricalCdf:
    sorted_lifetimes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.sorted_lifetimes, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("empirical CDF needs at least one sample")
        if np.any(np.diff(x) < 0):
            raise ValueError("lifetimes must be sorted ascending")
        x.setflags(write=False)
        object.__setattr__(self, "sorted_lifetimes", x)

    @property
    def n(self) -> int:
        return int(self.sorted_lifetimes.size)

    def __call__(self, t):
        """Fraction of samples ``<= t`` (right-continuous step function)."""
        r = np.searchsorted(self.sorted_lifetimes, np.asarray(t, dtype=float), side="right") / self.n
        return float(r) if np.ndim(r) == 0 else r

    def jump_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct lifetimes and the CDF value at each."""
        x = np.unique(self.sorted_lifetimes)
        return x, self(x)


def build_empirical_cdf(samples: Sequence[float], deadline: Optional[float] = None) -> EmpiricalCdf:
    """Sort ``samples`` into an :class:`EmpiricalCdf`.

    With ``deadline`` set, samples a little past it (clock skew) are clipped to it.
    """
    x = np.asarray(list(samples), dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise ValueError("lifetimes must be finite and non-negative")
    if deadline is not None:
        x = np.minimum(x, deadline)
    return EmpiricalCdf(np.sort(x))


def _model_cdf_on(model, t):
    L = model.deadline
    if L is not None:
        t = np.minimum(t, L)
    return np.asarray(cdf(model, t), dtype=float)


def r_squared(model: FailureModel, ecdf: EmpiricalCdf, grid=None) -> float:
    """``1 - SS_res / SS_tot`` on the ECDF jump points (or on ``grid``)."""
    if grid is None:
        t, y = ecdf.jump_points()
    else:
        t = np.asarray(grid, dtype=float)
        y = ecdf(t)
    pred = _model_cdf_on(model, t)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else -math.inf
    return 1.0 - ss_res / ss_tot


@dataclass
class FitResult:
    model: FailureModel
    r_squared: float
    residual_norm: float
    iterations: int
    converged: bool

    @property
    def family(self) -> str:
        return family_of(self.model)

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "family": self.family,
            "r2": self.r_squared,
            "converged": self.converged,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }

    @classmethod
    def from_json(cls, d: dict) -> "FitResult":
        return cls(
            model=model_from_dict(d["family"], d["model"]),
            r_squared=float(d["r2"]),
            residual_norm=float(d.get("residual_norm", float("nan"))),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d["converged"]),
        )


def _check_fit_input(ecdf: EmpiricalCdf):
    t, y = ecdf.jump_points()
    if t.size < MIN_DISTINCT:
        raise DegenerateDataError(
            f"need at least {MIN_DISTINCT} distinct lifetimes, got {t.size}"
        )
    return t, y


def _bathtub_raw(p, t):
    A, tau1, tau2, b = p
    return A * (-np.expm1(-t / tau1) + np.exp((t - b) / tau2))


def _run_lsq(residuals, x0, lo, hi, max_nfev=500):
    return least_squares(residuals, x0, bounds=(lo, hi), method="trf",
                         ftol=1e-10, xtol=1e-10, gtol=1e-10, max_nfev=max_nfev)


def fit_bathtub(ecdf: EmpiricalCdf, deadline_L: float = 24.0, *, n_starts: int = 16,
                seed: int = 0) -> FitResult:
    """Bounded least-squares fit of the bathtub CDF to the ECDF jump points.

    A penalty on ``F(0)`` keeps the boundary condition close to zero; the
    fit is multi-started because the objective is multimodal in ``(tau2, b)``.
    """
    t, y = _check_fit_input(ecdf)
    L = float(deadline_L)
    t = np.minimum(t, L)
    w = math.sqrt(F0_PENALTY)

    def res(p):
        return np.append(_bathtub_raw(p, t) - y, w * _bathtub_raw(p, 0.0))

    lo = np.array([1e-6, 0.01, 0.01, L / 2])
    hi = np.array([1.0, L, L, 1.5 * L])
    early = ecdf.sorted_lifetimes[ecdf.sorted_lifetimes < L / 2]
    tau1_0 = float(np.median(early)) if early.size else 1.0
    starts = [np.clip([0.45, tau1_0, 0.8, L], lo, hi)]
    rng = np.random.default_rng(seed)
    for _ in range(n_starts - 1):
        starts.append(np.array([
            rng.uniform(0.2, 0.8),
            math.exp(rng.uniform(math.log(0.05), math.log(L / 2))),
            math.exp(rng.uniform(math.log(0.05), math.log(4.0))),
            rng.uniform(0.75 * L, 1.25 * L),
        ]))

    best = None
    for x0 in starts:
        sol = _run_lsq(res, x0, lo, hi)
        A, tau1, tau2, b = sol.x
        if _bathtub_raw(sol.x, 0.0) > 0.01:
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        raise DegenerateDataError("no bathtub fit satisfies F(0) <= 0.01")
    model = BathtubParams(*map(float, best.x), L=L)
    return FitResult(model, r_squared(model, ecdf), float(np.linalg.norm(best.fun)),
                     int(best.nfev), bool(best.success))


def _baseline_setup(family, mean):
    lo, hi = RATE_BOUNDS
    mean = max(mean, 1e-3)
    if family == "exponential":
        make = lambda p: Exponential(p[0])
        starts = [[1.0 / mean], [0.1], [1.0]]
        bounds = ([lo], [hi])
    elif family == "weibull":
        make = lambda p: Weibull(p[0], p[1])
        starts = [[1.0 / mean, 1.0], [0.1, 0.5], [0.05, 2.0], [1.0, 0.7]]
        bounds = ([lo, lo], [hi, hi])
    elif family == "gompertz-makeham":
        make = lambda p: GompertzMakeham(p[0], p[1], p[2])
        starts = [[1.0 / mean, 1e-3, 0.1], [0.1, 1e-4, 0.5], [0.5, 1e-2, 0.05], [0.05, 1e-4, 0.3]]
        bounds = ([lo, lo, lo], [hi, hi, hi])
    else:
        raise ValueError(f"unknown baseline family {family!r}")
    return make, starts, bounds


def fit_baseline(ecdf: EmpiricalCdf, family: str) -> FitResult:
    """Least-squares fit of one of the unbounded baseline families."""
    t, y = _check_fit_input(ecdf)
    make, starts, (lo, hi) = _baseline_setup(family, float(np.mean(ecdf.sorted_lifetimes)))
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def res(p):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.asarray(make(p)._raw_cdf(t), dtype=float) - y

    best = None
    for x0 in starts:
        sol = _run_lsq(res, np.clip(x0, lo, hi), lo, hi)
        if best is None or sol.cost < best.cost:
            best = sol
    model = make([float(v) for v in best.x])
    return FitResult(model, r_squared(model, ecdf), float(np.linalg.norm(best.fun)),
                     int(best.nfev), bool(best.success))


def fit_all(ecdf: EmpiricalCdf, deadline_L: float = 24.0) -> dict:
    """Fit every family; returns ``{family: FitResult}``."""
    out = {"bathtub": fit_bathtub(ecdf, deadline_L)}
    for fam in ("exponential", "weibull", "gompertz-makeham"):
        out[fam] = fit_baseline(ecdf, fam)
    return out
