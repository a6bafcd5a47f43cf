"""Failure distributions for temporally constrained VM preemptions.

All times are in hours.  The bathtub model and the uniform-deadline model are
*deadline-bounded*: they live on ``[0, L]``.  The exponential, Weibull and
Gompertz-Makeham baselines are unbounded and live on ``[0, inf)``.

Every model is an immutable dataclass; the module-level functions (``cdf``,
``pdf``, ``survival`` ...) do the domain checking and accept scalars or numpy
arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate, special

__all__ = [
    "DomainError",
    "BathtubParams",
    "Exponential",
    "Weibull",
    "GompertzMakeham",
    "UniformDeadline",
    "FailureModel",
    "FAMILIES",
    "cdf",
    "pdf",
    "survival",
    "normalized_cdf",
    "conditional_failure_prob",
    "expected_lifetime",
    "partial_loss_integral",
    "sample_lifetime",
    "sample_lifetimes",
    "model_to_dict",
    "model_from_dict",
    "family_of",
]

# slack for floating point comparisons against the deadline
_EPS_T = 1e-9


class DomainError(ValueError):
    """Argument outside the support of a failure model."""


@dataclass(frozen=True)
class BathtubParams:
    """Two-process bathtub CDF ``A (1 - exp(-t/tau1) + exp((t-b)/tau2))``.

    ``tau1`` governs early preemptions, ``tau2`` the reclamation burst near the
    deadline, ``b`` the onset of that burst and ``A`` scales the whole curve.
    """

    A: float
    tau1: float
    tau2: float
    b: float
    L: float = 24.0

    def __post_init__(self):
        for name in ("A", "tau1", "tau2", "b", "L"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        f0 = self._raw_cdf(0.0)
        if f0 > 0.01:
            raise ValueError(f"boundary condition violated: F(0) = {f0:.4g} > 0.01")
        grid = np.linspace(0.0, self.L, 257)
        if np.any(np.diff(self._raw_cdf(grid)) < 0):
            raise ValueError("CDF is not non-decreasing on [0, L]")

    deadline = property(lambda self: self.L)

    def _raw_cdf(self, t):
        return self.A * (-np.expm1(-t / self.tau1) + np.exp((t - self.b) / self.tau2))

    def _pdf(self, t):
        return self.A * (
            np.exp(-t / self.tau1) / self.tau1 + np.exp((t - self.b) / self.tau2) / self.tau2
        )

    def _antiderivative(self, t):
        # d/dt of this is t * pdf(t)
        return self.A * (
            -(t + self.tau1) * np.exp(-t / self.tau1)
            + (t - self.tau2) * np.exp((t - self.b) / self.tau2)
        )

    def _loss(self, a, c):
        return self._antiderivative(c) - self._antiderivative(a)

    def to_json(self) -> dict:
        return {"A": self.A, "tau1": self.tau1, "tau2": self.tau2, "b": self.b, "L": self.L}

    @classmethod
    def from_json(cls, d: dict) -> "BathtubParams":
        return cls(A=float(d["A"]), tau1=float(d["tau1"]), tau2=float(d["tau2"]),
                   b=float(d["b"]), L=float(d.get("L", 24.0)))


@dataclass(frozen=True)
class Exponential:
    lam: float

    def __post_init__(self):
        _check_rates(lam=self.lam)

    deadline = None

    def _raw_cdf(self, t):
        return -np.expm1(-self.lam * t)

    def _pdf(self, t):
        return self.lam * np.exp(-self.lam * t)

    def _loss(self, a, c):
        g = lambda x: -(x + 1.0 / self.lam) * np.exp(-self.lam * x)
        return g(c) - g(a)

    def mean(self):
        return 1.0 / self.lam

    def ppf(self, u):
        return -np.log1p(-u) / self.lam

    def to_json(self):
        return {"lambda": self.lam}


@dataclass(frozen=True)
class Weibull:
    lam: float
    k: float

    def __post_init__(self):
        _check_rates(lam=self.lam, k=self.k)

    deadline = None

    def _raw_cdf(self, t):
        return -np.expm1(-((self.lam * t) ** self.k))

    def _pdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = (self.lam * t) ** (self.k - 1.0)
        return self.k * self.lam * z * np.exp(-((self.lam * t) ** self.k))

    def _loss(self, a, c):
        # int_0^x t f(t) dt = Gamma(1+1/k)/lam * P(1+1/k, (lam x)^k)
        s = 1.0 + 1.0 / self.k
        g = lambda x: special.gamma(s) / self.lam * special.gammainc(s, (self.lam * x) ** self.k)
        return g(c) - g(a)

    def mean(self):
        return special.gamma(1.0 + 1.0 / self.k) / self.lam

    def ppf(self, u):
        return (-np.log1p(-u)) ** (1.0 / self.k) / self.lam

    def to_json(self):
        return {"lambda": self.lam, "k": self.k}


@dataclass(frozen=True)
class GompertzMakeham:
    lam: float
    alpha: float
    beta: float

    def __post_init__(self):
        _check_rates(lam=self.lam, alpha=self.alpha, beta=self.beta)

    deadline = None

    def _cum_hazard(self, t):
        # overflows to inf far in the tail, where the CDF is 1 anyway
        with np.errstate(over="ignore"):
            return self.lam * t + self.alpha / self.beta * np.expm1(self.beta * t)

    def _raw_cdf(self, t):
        return -np.expm1(-self._cum_hazard(t))

    def _pdf(self, t):
        with np.errstate(over="ignore", invalid="ignore"):
            f = (self.lam + self.alpha * np.exp(self.beta * t)) * np.exp(-self._cum_hazard(t))
        return np.nan_to_num(f, nan=0.0)

    def _loss(self, a, c):
        # no elementary antiderivative
        def one(lo, hi):
            return integrate.quad(lambda x: x * float(self._pdf(x)), lo, hi,
                                  epsabs=0.0, epsrel=1e-12, limit=200)[0]
        return np.vectorize(one, otypes=[float])(a, c)

    def mean(self):
        return integrate.quad(lambda x: math.exp(-float(self._cum_hazard(x))), 0.0, np.inf,
                              epsabs=0.0, epsrel=1e-12, limit=200)[0]

    def to_json(self):
        return {"lambda": self.lam, "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class UniformDeadline:
    """Preemption time uniform over ``[0, L]``."""

    L: float = 24.0

    def __post_init__(self):
        if not (math.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be positive and finite, got {self.L}")

    deadline = property(lambda self: self.L)

    def _raw_cdf(self, t):
        return np.asarray(t, dtype=float) / self.L

    def _pdf(self, t):
        return np.full_like(np.asarray(t, dtype=float), 1.0 / self.L)

    def _loss(self, a, c):
        a = np.asarray(a, dtype=float)
        c = np.asarray(c, dtype=float)
        return (c * c - a * a) / (2.0 * self.L)

    def ppf(self, u):
        return np.asarray(u, dtype=float) * self.L

    def to_json(self):
        return {"L": self.L}


FailureModel = Union[BathtubParams, Exponential, Weibull, GompertzMakeham, UniformDeadline]

FAMILIES = {
    "bathtub": BathtubParams,
    "exponential": Exponential,
    "weibull": Weibull,
    "gompertz-makeham": GompertzMakeham,
    "uniform": UniformDeadline,
}


def _check_rates(**kw):
    for name, v in kw.items():
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive and finite, got {v}")


def family_of(model: FailureModel) -> str:
    for name, cls in FAMILIES.items():
        if isinstance(model, cls):
            return name
    raise TypeError(f"not a failure model: {model!r}")


def model_to_dict(model: FailureModel) -> dict:
    return model.to_json()


def model_from_dict(family: str, d: dict) -> FailureModel:
    if family == "bathtub":
        return BathtubParams.from_json(d)
    if family == "exponential":
        return Exponential(float(d["lambda"]))
    if family == "weibull":
        return Weibull(float(d["lambda"]), float(d["k"]))
    if family == "gompertz-makeham":
        return GompertzMakeham(float(d["lambda"]), float(d["alpha"]), float(d["beta"]))
    if family == "uniform":
        return UniformDeadline(float(d["L"]))
    raise ValueError(f"unknown family {family!r}")


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _times(model, t, name="t"):
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < 0):
        raise DomainError(f"{name} must be >= 0")
    L = model.deadline
    if L is not None:
        if np.any(t > L + _EPS_T):
            raise DomainError(f"{name} must be <= deadline L={L}")
        t = np.minimum(t, L)
    return t


def cdf(model: FailureModel, t):
    """Probability of preemption by age ``t``, clamped to [0, 1]."""
    t = _times(model, t)
    return _out(np.clip(model._raw_cdf(t), 0.0, 1.0))


def pdf(model: FailureModel, t):
    t = _times(model, t)
    return _out(model._pdf(t))


def survival(model: FailureModel, t):
    return _out(1.0 - np.asarray(cdf(model, t)))


def normalized_cdf(model: FailureModel, t):
    """CDF rescaled by ``F(L)`` so preemption by the deadline is certain.

    Unbounded models are returned unchanged.
    """
    t = _times(model, t)
    L = model.deadline
    if L is None:
        return _out(np.clip(model._raw_cdf(t), 0.0, 1.0))
    return _out(np.clip(model._raw_cdf(t) / model._raw_cdf(L), 0.0, 1.0))


def conditional_failure_prob(model: FailureModel, age_s, horizon_d):
    """P(preempted in (s, s+d] | alive at s), using the normalized CDF."""
    s = np.asarray(age_s, dtype=float)
    d = np.asarray(horizon_d, dtype=float)
    if np.any(d < 0):
        raise DomainError("horizon must be >= 0")
    _times(model, s, "age")
    end = _times(model, s + d, "age + horizon")
    Fs = np.asarray(normalized_cdf(model, s))
    if np.any(Fs >= 1.0):
        raise ArithmeticError("VM has no survival probability at this age")
    Fe = np.asarray(normalized_cdf(model, end))
    p = np.where(d == 0, 0.0, (Fe - Fs) / (1.0 - Fs))
    return _out(np.clip(p, 0.0, 1.0))


def partial_loss_integral(model: FailureModel, a, c):
    """``int_a^c x f(x) dx`` from the closed-form antiderivative."""
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(a > c):
        raise DomainError("lower bound exceeds upper bound")
    a = _times(model, a, "a")
    c = _times(model, c, "c")
    return _out(np.where(a == c, 0.0, model._loss(a, c)))


def expected_lifetime(model: FailureModel) -> float:
    """``int_0^L t f(t) dt`` for bounded models; the plain mean otherwise."""
    if model.deadline is not None:
        return float(partial_loss_integral(model, 0.0, model.deadline))
    return float(model.mean())


def _bisect_ppf(model, u, n_iter=64):
    """Vectorised bisection for the inverse of the normalized CDF."""
    u = np.asarray(u, dtype=float)
    L = model.deadline
    if L is not None:
        lo = np.zeros_like(u)
        hi = np.full_like(u, L)
        scale = model._raw_cdf(L)
    else:
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        while np.any(model._raw_cdf(hi) < u):
            hi = np.where(model._raw_cdf(hi) < u, hi * 2.0, hi)
        scale = 1.0
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = model._raw_cdf(mid) / scale < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _ppf(model, u):
    if isinstance(model, (UniformDeadline, Exponential, Weibull)):
        return model.ppf(u)
    return _bisect_ppf(model, u)


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def sample_lifetimes(model: FailureModel, rng, size: int) -> np.ndarray:
    """``size`` lifetimes drawn by inverting the normalized CDF."""
    u = _rng(rng).random(size)
    return np.asarray(_ppf(model, u), dtype=float)


def sample_lifetime(model: FailureModel, rng) -> float:
    """One lifetime; ``rng`` is a numpy ``Generator`` or a seed."""
    return float(sample_lifetimes(model, rng, 1)[0])
