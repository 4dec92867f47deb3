"""Generative outcome model on the linear-predictor scale.

For treatment k and covariates x the model is

    g(pi_k(x)) = eta_k(x) = mu + x'(beta_1 + beta_2k) + gamma_k

with the first declared treatment acting as reference (beta_2 = 0, gamma = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .covariates import Population
from .errors import DimensionError, UnknownTreatmentError, ValidationError
from .links import LinkFunction


class Direction(str, Enum):
    LOWER_IS_BETTER = "lower_is_better"
    HIGHER_IS_BETTER = "higher_is_better"

    @classmethod
    def parse(cls, value: "Direction | str") -> "Direction":
        if isinstance(value, Direction):
            return value
        aliases = {"lower": cls.LOWER_IS_BETTER, "higher": cls.HIGHER_IS_BETTER}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValidationError(f"unknown direction {value!r}", path="direction") from None


def _vector(values, name: str, path: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite", path=path)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class OutcomeModel:
    """Link, intercept and per-treatment coefficients.

    ``interactions`` and ``treatment_effects`` may omit treatments, which then
    get zero coefficients. Entries for the reference treatment must be zero.
    """

    link: LinkFunction
    treatments: tuple[str, ...]
    intercept: float = 0.0
    prognostic: Sequence[float] = ()
    interactions: Mapping[str, Sequence[float]] = field(default_factory=dict)
    treatment_effects: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        try:
            link = LinkFunction(self.link)
        except ValueError:
            raise ValidationError(f"unknown link function {self.link!r}", path="model.link") from None
        treatments = tuple(str(t) for t in self.treatments)
        if not treatments:
            raise ValidationError("at least one treatment is required", path="model.treatments")
        if len(set(treatments)) != len(treatments):
            raise ValidationError("treatment ids must be unique", path="model.treatments")
        intercept = float(self.intercept)
        if not math.isfinite(intercept):
            raise ValidationError("intercept must be finite", path="model.intercept")
        prognostic = _vector(self.prognostic, "prognostic coefficients", "model.prognostic")
        dim = prognostic.size

        for key in self.interactions:
            if key not in treatments:
                raise UnknownTreatmentError(
                    f"interaction given for undefined treatment {key!r}", path="model.interactions"
                )
        for key in self.treatment_effects:
            if key not in treatments:
                raise UnknownTreatmentError(
                    f"treatment effect given for undefined treatment {key!r}", path="model.treatment_effects"
                )

        interactions = {}
        for k in treatments:
            vec = _vector(self.interactions.get(k, np.zeros(dim)), "interactions", f"model.interactions.{k}")
            if vec.size != dim:
                raise DimensionError(
                    f"interaction vector for {k!r} has length {vec.size}, expected {dim}",
                    path=f"model.interactions.{k}",
                )
            interactions[k] = vec
        effects = {}
        for k in treatments:
            value = float(self.treatment_effects.get(k, 0.0))
            if not math.isfinite(value):
                raise ValidationError("treatment effects must be finite", path=f"model.treatment_effects.{k}")
            effects[k] = value

        ref = treatments[0]
        if np.any(interactions[ref] != 0.0):
            raise ValidationError(
                f"reference treatment {ref!r} must have zero interactions", path=f"model.interactions.{ref}"
            )
        if effects[ref] != 0.0:
            raise ValidationError(
                f"reference treatment {ref!r} must have zero treatment effect",
                path=f"model.treatment_effects.{ref}",
            )

        object.__setattr__(self, "link", link)
        object.__setattr__(self, "treatments", treatments)
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "prognostic", prognostic)
        object.__setattr__(self, "interactions", MappingProxyType(interactions))
        object.__setattr__(self, "treatment_effects", MappingProxyType(effects))

    @property
    def reference(self) -> str:
        return self.treatments[0]

    @property
    def dimension(self) -> int:
        return self.prognostic.size

    def check_treatment(self, k: str) -> str:
        if k not in self.interactions:
            raise UnknownTreatmentError(f"unknown treatment {k!r}; model defines {list(self.treatments)}")
        return k

    def interaction(self, k: str) -> np.ndarray:
        return self.interactions[self.check_treatment(k)]

    def effect(self, k: str) -> float:
        return self.treatment_effects[self.check_treatment(k)]

    def slope(self, k: str) -> np.ndarray:
        """Total covariate coefficient beta_1 + beta_2k."""
        return self.prognostic + self.interaction(k)

    def with_intercept(self, intercept: float) -> "OutcomeModel":
        return replace(self, intercept=intercept, interactions=dict(self.interactions),
                       treatment_effects=dict(self.treatment_effects))

    def with_prognostic(self, prognostic: Iterable[float]) -> "OutcomeModel":
        return replace(self, prognostic=tuple(prognostic), interactions=dict(self.interactions),
                       treatment_effects=dict(self.treatment_effects))

    def with_link(self, link: LinkFunction | str) -> "OutcomeModel":
        return replace(self, link=link, interactions=dict(self.interactions),
                       treatment_effects=dict(self.treatment_effects))

    def restricted(self, treatments: Sequence[str]) -> "OutcomeModel":
        """The same model over a subset of treatments (reference kept first)."""
        for k in treatments:
            self.check_treatment(k)
        keep = [self.reference] + [k for k in treatments if k != self.reference]
        return replace(self, treatments=tuple(keep),
                       interactions={k: self.interactions[k] for k in keep},
                       treatment_effects={k: self.treatment_effects[k] for k in keep})

    def effective_intercept(self, population: Population | None) -> float:
        if population is not None and population.intercept is not None:
            return population.intercept
        return self.intercept


def covariate_array(x, dimension: int) -> np.ndarray:
    """Coerce ``x`` to a float array whose last axis has length ``dimension``."""
    arr = np.asarray(x, dtype=float)
    if dimension == 0 and arr.size == 0:
        return arr.reshape(arr.shape[:-1] + (0,)) if arr.ndim else arr.reshape(0)
    if arr.ndim == 0 and dimension == 1:
        arr = arr.reshape(1)
    if arr.ndim == 0 or arr.shape[-1] != dimension:
        raise DimensionError(f"covariate vector has shape {arr.shape}, model dimension is {dimension}")
    return arr


def _as_output(value):
    return float(value) if np.ndim(value) == 0 else value


def linear_predictor(model: OutcomeModel, treatment: str, x, intercept: float | None = None):
    """eta_k(x) = mu + x'(beta_1 + beta_2k) + gamma_k.

    ``x`` may be a single covariate vector of length L or an (n, L) array of
    rows; the latter returns an array of n values.
    """
    slope = model.slope(treatment)
    x = covariate_array(x, model.dimension)
    mu = model.intercept if intercept is None else float(intercept)
    return _as_output(mu + x @ slope + model.effect(treatment))


def individual_effect(model: OutcomeModel, a: str, b: str, x):
    """Linear-predictor difference eta_b(x) - eta_a(x); free of mu and beta_1."""
    diff = model.interaction(b) - model.interaction(a)
    x = covariate_array(x, model.dimension)
    return _as_output(model.effect(b) - model.effect(a) + x @ diff)


def ccf(model: OutcomeModel, source: str, target: str, p, x):
    """Characteristic collapsibility function h_{source,target}(p, x).

    Maps an event probability on ``source`` to the implied probability on
    ``target`` for an individual with covariates ``x``. Out-of-range results
    (identity and log links) raise :class:`DomainError`.
    """
    model.check_treatment(source)
    model.check_treatment(target)
    link = model.link
    if source == target:
        link.forward(p)
        return _as_output(np.asarray(p, dtype=float)) if np.ndim(p) else float(p)
    shift = individual_effect(model, source, target, x)
    return link.inverse(np.asarray(link.forward(p)) + shift)
