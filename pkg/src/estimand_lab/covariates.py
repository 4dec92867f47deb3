"""Population covariate distributions.

Marginal specifications (:class:`Uniform`, :class:`Bernoulli`,
:class:`FinitePoints`) combine as independent dimensions. Joint structure is
only available through :class:`EmpiricalSample`, whose rows are taken as an
equally weighted discrete distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ValidationError

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValidationError(f"Uniform needs finite lo < hi, got ({self.lo}, {self.hi})")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def bounds(self) -> tuple[float, float]:
        return self.lo, self.hi

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u


@dataclass(frozen=True)
class Bernoulli:
    prevalence: float

    def __post_init__(self):
        p = float(self.prevalence)
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"Bernoulli prevalence must lie in [0, 1], got {p}")
        object.__setattr__(self, "prevalence", p)

    @property
    def mean(self) -> float:
        return self.prevalence

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        values = np.array([0.0, 1.0])
        weights = np.array([1.0 - self.prevalence, self.prevalence])
        keep = weights > 0
        return values[keep], weights[keep]

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return (u < self.prevalence).astype(float)


@dataclass(frozen=True)
class FinitePoints:
    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        weights = tuple(float(w) for w in self.weights)
        if not values or len(values) != len(weights):
            raise ValidationError("FinitePoints needs equally many values and weights (at least one)")
        if any(not 0.0 <= w <= 1.0 for w in weights):
            raise ValidationError("FinitePoints weights must lie in [0, 1]")
        if abs(math.fsum(weights) - 1.0) > _WEIGHT_TOL:
            raise ValidationError(f"FinitePoints weights sum to {math.fsum(weights)!r}, not 1")
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("FinitePoints values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def mean(self) -> float:
        return math.fsum(v * w for v, w in zip(self.values, self.weights))

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        values = np.array(self.values)
        weights = np.array(self.weights)
        keep = weights > 0
        return values[keep], weights[keep]

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        cdf = np.cumsum(self.weights)
        idx = np.searchsorted(cdf, u, side="right")
        return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]


Marginal = Union[Uniform, Bernoulli, FinitePoints]


@dataclass(frozen=True)
class EmpiricalSample:
    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.rows)
        if not rows:
            raise ValidationError("EmpiricalSample needs at least one row")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValidationError("EmpiricalSample rows must all have the same length")
        if not all(math.isfinite(v) for r in rows for v in r):
            raise ValidationError("EmpiricalSample values must be finite")
        object.__setattr__(self, "rows", rows)

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(len(self.rows), -1)


@dataclass(frozen=True)
class CovariateDistribution:
    """Joint covariate distribution f(x) of a population.

    Either a tuple of independent marginals or a single empirical sample.
    An empty marginal tuple is the covariate-free (L = 0) case.
    """

    marginals: tuple[Marginal, ...] = ()
    sample: EmpiricalSample | None = None

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if self.sample is not None and self.marginals:
            raise ValidationError("give either independent marginals or an empirical sample, not both")
        for m in self.marginals:
            if not isinstance(m, (Uniform, Bernoulli, FinitePoints)):
                raise ValidationError(f"unsupported marginal {m!r}")

    @classmethod
    def independent(cls, *marginals: Marginal) -> "CovariateDistribution":
        return cls(marginals=tuple(marginals))

    @classmethod
    def empirical(cls, rows: Sequence[Sequence[float]]) -> "CovariateDistribution":
        return cls(sample=EmpiricalSample(tuple(tuple(r) for r in rows)))

    @property
    def dimension(self) -> int:
        if self.sample is not None:
            return len(self.sample.rows[0])
        return len(self.marginals)

    @property
    def is_empirical(self) -> bool:
        return self.sample is not None

    @property
    def is_finite(self) -> bool:
        """True when every dimension has finite support."""
        return self.sample is not None or all(not isinstance(m, Uniform) for m in self.marginals)

    @property
    def continuous_dims(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.marginals) if isinstance(m, Uniform))

    def mean(self) -> np.ndarray:
        if self.sample is not None:
            return self.sample.as_array().mean(axis=0)
        return np.array([m.mean for m in self.marginals], dtype=float)

    def axis_range(self, dim: int) -> tuple[float, float]:
        """Smallest interval containing the support of one coordinate."""
        if self.sample is not None:
            col = self.sample.as_array()[:, dim]
            return float(col.min()), float(col.max())
        m = self.marginals[dim]
        if isinstance(m, Uniform):
            return m.bounds
        values, _ = m.support()
        return float(values.min()), float(values.max())

    @property
    def unit_dimension(self) -> int:
        """Number of uniform variates needed per draw by :meth:`from_unit_cube`."""
        return 1 if self.sample is not None else len(self.marginals)

    def from_unit_cube(self, u: np.ndarray) -> np.ndarray:
        """Map uniform variates of shape (n, unit_dimension) to covariate rows (n, L)."""
        u = np.asarray(u, dtype=float)
        if self.sample is not None:
            rows = self.sample.as_array()
            idx = np.minimum((u[:, 0] * len(rows)).astype(np.int64), len(rows) - 1)
            return rows[idx]
        if not self.marginals:
            return np.zeros((u.shape[0], 0))
        return np.column_stack([m.from_unit(u[:, j]) for j, m in enumerate(self.marginals)])


@dataclass(frozen=True)
class Population:
    """A target population: covariate distribution plus baseline intercept.

    ``intercept=None`` defers to the intercept stored on the outcome model.
    """

    covariates: CovariateDistribution = field(default_factory=CovariateDistribution)
    intercept: float | None = None

    def __post_init__(self):
        if self.intercept is not None:
            value = float(self.intercept)
            if not math.isfinite(value):
                raise ValidationError("population intercept must be finite", path="population.intercept")
            object.__setattr__(self, "intercept", value)

    @property
    def dimension(self) -> int:
        return self.covariates.dimension

    def with_intercept(self, intercept: float) -> "Population":
        return Population(self.covariates, intercept)
