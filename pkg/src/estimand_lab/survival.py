"""Marginal and conditional estimands under a Weibull proportional-hazards model.

Individual hazards are h_k(t | x) = nu t^(nu-1) exp(eta_k(x)) with survival
S_k(t | x) = exp(-t^nu exp(eta_k(x))). Population-average survival averages
S over covariates; the marginal hazard is the survival-weighted average of
individual hazards, so marginal hazard ratios vary over time whenever
covariates are present.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .binary import population_conditional_effect
from .covariates import Population
from .errors import SingularityError, ValidationError
from .integrate import IntegrationScheme, default_scheme, quadrature_rule
from .links import LinkFunction
from .model import OutcomeModel, linear_predictor

Pair = tuple[str, str]

DEFAULT_GRID_LO = 0.01
DEFAULT_GRID_HI = 3.0
DEFAULT_GRID_POINTS = 200
CURVE_TIE_RTOL = 1e-12
CROSSING_TIME_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class WeibullPHModel:
    """Weibull PH model sharing one shape parameter across treatments.

    ``coefficients`` supplies intercept (baseline log hazard), prognostic,
    interaction and treatment-effect coefficients on the log-hazard scale.
    """

    shape: float
    coefficients: OutcomeModel

    def __post_init__(self):
        if isinstance(self.shape, Mapping) or np.ndim(self.shape) != 0:
            raise ValidationError("a single shape parameter is shared by all treatments", path="model.shape")
        shape = float(self.shape)
        if not (math.isfinite(shape) and shape > 0):
            raise ValidationError(f"Weibull shape must be positive, got {shape}", path="model.shape")
        object.__setattr__(self, "shape", shape)

    @classmethod
    def build(cls, shape: float, treatments: Sequence[str], intercept: float = 0.0,
              prognostic: Sequence[float] = (), interactions: Mapping[str, Sequence[float]] | None = None,
              treatment_effects: Mapping[str, float] | None = None) -> "WeibullPHModel":
        coefs = OutcomeModel(LinkFunction.LOG, treatments, intercept, prognostic,
                             interactions or {}, treatment_effects or {})
        return cls(shape, coefs)

    @property
    def treatments(self) -> tuple[str, ...]:
        return self.coefficients.treatments

    @property
    def reference(self) -> str:
        return self.coefficients.reference

    @property
    def dimension(self) -> int:
        return self.coefficients.dimension

    def with_shape(self, shape: float) -> "WeibullPHModel":
        return WeibullPHModel(shape, self.coefficients)

    def with_intercept(self, intercept: float) -> "WeibullPHModel":
        return WeibullPHModel(self.shape, self.coefficients.with_intercept(intercept))


@dataclass(frozen=True)
class TimeGrid:
    times: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        arr = np.array(times)
        if len(times) < 2:
            raise ValidationError("time grid needs at least two points", path="survival.grid")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0) or np.any(np.diff(arr) <= 0):
            raise ValidationError("time grid must be finite, positive and strictly increasing",
                                  path="survival.grid")
        object.__setattr__(self, "times", times)

    @classmethod
    def log_spaced(cls, lo: float = DEFAULT_GRID_LO, hi: float = DEFAULT_GRID_HI,
                   n: int = DEFAULT_GRID_POINTS) -> "TimeGrid":
        return cls(tuple(np.geomspace(lo, hi, n)))

    @classmethod
    def linear(cls, lo: float, hi: float, n: int) -> "TimeGrid":
        return cls(tuple(np.linspace(lo, hi, n)))

    @classmethod
    def default(cls) -> "TimeGrid":
        return cls.log_spaced()

    def as_array(self) -> np.ndarray:
        return np.array(self.times)

    def __len__(self) -> int:
        return len(self.times)


def _check(model: WeibullPHModel, pop: Population) -> None:
    if pop.dimension != model.dimension:
        raise ValidationError(
            f"population has {pop.dimension} covariates but the model has {model.dimension}",
            path="population.covariates",
        )


def _times(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValidationError("times must be finite and non-negative")
    return t


def conditional_survival(model: WeibullPHModel, k: str, x, t, intercept: float | None = None):
    """S_k(t | x) = exp(-t^nu exp(eta_k(x)))."""
    t = _times(t)
    eta = linear_predictor(model.coefficients, k, x, intercept)
    out = np.exp(-np.power(t, model.shape) * np.exp(eta))
    return float(out) if np.ndim(out) == 0 else out


def conditional_hazard(model: WeibullPHModel, k: str, x, t, intercept: float | None = None):
    """h_k(t | x) = nu t^(nu-1) exp(eta_k(x))."""
    t = _times(t)
    if model.shape < 1 and np.any(t == 0):
        raise SingularityError("Weibull hazard with shape < 1 is infinite at t = 0")
    eta = linear_predictor(model.coefficients, k, x, intercept)
    out = model.shape * np.power(t, model.shape - 1.0) * np.exp(eta)
    return float(out) if np.ndim(out) == 0 else out


def _node_log_hazard_scale(model: WeibullPHModel, pop: Population, k: str,
                           scheme: IntegrationScheme | None):
    """Quadrature weights and eta_k at every node."""
    _check(model, pop)
    nodes, weights = quadrature_rule(pop.covariates, scheme)
    mu = model.coefficients.effective_intercept(pop)
    eta = np.atleast_1d(linear_predictor(model.coefficients, k, nodes, mu))
    return weights, eta


def marginal_survival(model: WeibullPHModel, pop: Population, k: str, t,
                      scheme: IntegrationScheme | None = None):
    """Population-average survival S-bar_k(t); vectorised over ``t``."""
    t = _times(t)
    weights, eta = _node_log_hazard_scale(model, pop, k, scheme)
    tt = np.atleast_1d(t)
    surv = np.exp(-np.outer(np.exp(eta), np.power(tt, model.shape)))
    out = np.ascontiguousarray((weights[:, None] * surv).T).sum(axis=1)
    return float(out[0]) if np.ndim(t) == 0 else out


def _tilted_mean_rate(weights: np.ndarray, eta: np.ndarray, t: np.ndarray, shape: float) -> np.ndarray:
    """Survival-weighted mean of exp(eta) at each time.

    Computed with a per-time log-scale shift so that it stays finite when
    every S(t | x) underflows.
    """
    rate = np.exp(eta)
    log_s = -np.outer(np.power(t, shape), rate)
    log_s -= log_s.max(axis=1, keepdims=True)
    s = np.exp(log_s) * weights
    num = (s * rate).sum(axis=1)
    den = s.sum(axis=1)
    return num / den


def marginal_hazard(model: WeibullPHModel, pop: Population, k: str, t,
                    scheme: IntegrationScheme | None = None):
    """h-bar_k(t) = E[S h] / E[S], from the ratio directly; vectorised over ``t``."""
    t = _times(t)
    tt = np.atleast_1d(t)
    if model.shape < 1 and np.any(tt == 0):
        raise SingularityError("marginal hazard with shape < 1 is infinite at t = 0")
    weights, eta = _node_log_hazard_scale(model, pop, k, scheme)
    out = model.shape * np.power(tt, model.shape - 1.0) * _tilted_mean_rate(weights, eta, tt, model.shape)
    return float(out[0]) if np.ndim(t) == 0 else out


def marginal_hazard_ratio_curve(model: WeibullPHModel, pop: Population, a: str, b: str,
                                grid: TimeGrid | Sequence[float], scheme: IntegrationScheme | None = None
                                ) -> np.ndarray:
    """Delta_ab(t) = h-bar_b(t) / h-bar_a(t) at each grid time.

    The baseline factor nu t^(nu-1) cancels and is never formed.
    """
    t = grid.as_array() if isinstance(grid, TimeGrid) else _times(grid)
    wa, eta_a = _node_log_hazard_scale(model, pop, a, scheme)
    wb, eta_b = _node_log_hazard_scale(model, pop, b, scheme)
    return _tilted_mean_rate(wb, eta_b, t, model.shape) / _tilted_mean_rate(wa, eta_a, t, model.shape)


def conditional_log_hr(model: WeibullPHModel, pop: Population, a: str, b: str,
                       scheme: IntegrationScheme | None = None) -> float:
    """Population-average conditional log hazard ratio; time-invariant."""
    _check(model, pop)
    return population_conditional_effect(model.coefficients, pop, a, b, scheme)


@dataclass(frozen=True)
class CrossingInterval:
    """A maximal time interval where two curves are in the reverse order.

    ``start`` is a refined crossing time. ``end`` is the refined time at
    which the order reverts, or the last grid time if it never does
    (``reverts`` is then False).
    """

    start: float
    end: float
    reverts: bool

    def crossing_times(self) -> list[float]:
        return [self.start, self.end] if self.reverts else [self.start]


def _refine(diff: Callable[[float], float] | None, lo: float, hi: float, d_lo: float, d_hi: float,
            tol: float) -> float:
    if diff is None:
        return lo + (hi - lo) * d_lo / (d_lo - d_hi)
    if d_lo == 0.0:
        return lo
    if d_hi == 0.0:
        return hi
    return brentq(diff, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def detect_hr_crossings(curve_a, curve_b, grid: TimeGrid | Sequence[float],
                        refine: Callable[[float], float] | None = None,
                        time_tol: float = CROSSING_TIME_TOL) -> list[CrossingInterval]:
    """Intervals where sign(curve_a - curve_b) differs from its initial sign.

    Relative differences below 1e-12 count as ties and never start or end
    an interval.

    Boundaries are located by root finding on ``refine(t)`` (the curve
    difference as a function of time) when given, otherwise by linear
    interpolation between grid points.
    """
    t = grid.as_array() if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    curve_a, curve_b = np.asarray(curve_a, dtype=float), np.asarray(curve_b, dtype=float)
    if not curve_a.shape == curve_b.shape == t.shape:
        raise ValidationError("curves and grid must have equal length")
    diff = curve_a - curve_b
    # differences at rounding level are ties, not order changes
    scale = np.maximum(np.abs(curve_a), np.abs(curve_b))
    signs = np.where(np.abs(diff) > CURVE_TIE_RTOL * scale, np.sign(diff), 0.0)
    nonzero = np.flatnonzero(signs)
    if nonzero.size == 0:
        return []
    initial = signs[nonzero[0]]

    intervals: list[CrossingInterval] = []
    start = None
    prev = nonzero[0]
    for i in nonzero[1:]:
        if signs[i] != signs[prev]:
            boundary = _refine(refine, t[prev], t[i], diff[prev], diff[i], time_tol)
            if signs[i] != initial:
                start = boundary
            else:
                intervals.append(CrossingInterval(start, boundary, True))
                start = None
        prev = i
    if start is not None:
        intervals.append(CrossingInterval(start, float(t[-1]), False))
    return intervals


def count_crossings(intervals: Sequence[CrossingInterval]) -> int:
    return sum(len(iv.crossing_times()) for iv in intervals)


@dataclass(frozen=True, eq=False)
class SurvivalGrid:
    """Marginal survival and hazard-ratio curves on a time grid."""

    grid: TimeGrid
    treatments: tuple[str, ...]
    scheme: IntegrationScheme
    marginal_survival: Mapping[str, np.ndarray]
    hazard_ratio: Mapping[Pair, np.ndarray]
    conditional_log_hr: Mapping[Pair, float]
    crossings: Mapping[tuple[Pair, Pair], list[CrossingInterval]]

    def to_dict(self) -> dict:
        return {
            "times": list(self.grid.times),
            "treatments": list(self.treatments),
            "scheme": self.scheme.describe(),
            "marginal_survival": {k: v.tolist() for k, v in self.marginal_survival.items()},
            "hazard_ratio": {f"{a}{b}": v.tolist() for (a, b), v in self.hazard_ratio.items()},
            "conditional_log_hr": {f"{a}{b}": v for (a, b), v in self.conditional_log_hr.items()},
            "crossings": [
                {"curves": [f"{p[0]}{p[1]}", f"{q[0]}{q[1]}"],
                 "intervals": [{"start": iv.start, "end": iv.end, "reverts": iv.reverts} for iv in ivs]}
                for (p, q), ivs in self.crossings.items()
            ],
        }


def survival_grid(model: WeibullPHModel, pop: Population, treatments: Sequence[str] | None = None,
                  grid: TimeGrid | None = None, scheme: IntegrationScheme | None = None) -> SurvivalGrid:
    """Curves for every treatment, with hazard ratios against the first one.

    Crossings are reported between each pair of hazard-ratio curves sharing
    that reference.
    """
    treatments = tuple(treatments) if treatments is not None else model.treatments
    grid = grid or TimeGrid.default()
    scheme = scheme or default_scheme(pop.covariates)
    t = grid.as_array()
    ref = treatments[0]

    surv = {k: marginal_survival(model, pop, k, t, scheme) for k in treatments}
    hr = {(ref, k): marginal_hazard_ratio_curve(model, pop, ref, k, grid, scheme) for k in treatments[1:]}
    cond = {(ref, k): conditional_log_hr(model, pop, ref, k, scheme) for k in treatments[1:]}

    crossings = {}
    for p, q in itertools.combinations(hr, 2):
        def diff(tt, p=p, q=q):
            return float(marginal_hazard_ratio_curve(model, pop, *p, [tt], scheme)[0]
                         - marginal_hazard_ratio_curve(model, pop, *q, [tt], scheme)[0])
        crossings[(p, q)] = detect_hr_crossings(hr[p], hr[q], grid, refine=diff)
    return SurvivalGrid(grid, treatments, scheme, surv, hr, cond, crossings)


def hazard_ratio_sweep(model: WeibullPHModel, pop: Population, variable: str, values: Sequence[float],
                       a: str, b: str, grid: TimeGrid | None = None,
                       scheme: IntegrationScheme | None = None) -> dict:
    """Marginal HR curves and conditional log HR as ``shape`` or ``intercept`` varies."""
    if variable not in ("shape", "intercept"):
        raise ValidationError(f"unknown sweep variable {variable!r}; use 'shape' or 'intercept'")
    grid = grid or TimeGrid.default()
    curves, conditional = {}, {}
    for v in values:
        if variable == "shape":
            m, p = model.with_shape(v), pop
        else:
            m, p = model.with_intercept(v), pop.with_intercept(v)
        curves[float(v)] = marginal_hazard_ratio_curve(m, p, a, b, grid, scheme)
        conditional[float(v)] = conditional_log_hr(m, p, a, b, scheme)
    return {"variable": variable, "times": grid.as_array(), "curves": curves, "conditional_log_hr": conditional}
