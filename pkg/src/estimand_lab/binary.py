"""Population-average conditional and marginal estimands for binary outcomes.

Conditional effects average individual link-scale contrasts over the
population; marginal effects contrast link-transformed average event
probabilities. For non-collapsible links the two differ even without effect
modification, and with effect modification they can rank treatments
differently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .covariates import Population
from .errors import ValidationError
from .integrate import IntegrationScheme, default_scheme, expect
from .model import Direction, OutcomeModel, covariate_array, individual_effect, linear_predictor

TIE_TOLERANCE = 1e-9

Pair = tuple[str, str]


def individual_conditional_effect(model: OutcomeModel, a: str, b: str, x):
    """gamma_ab(x): individual-level contrast of b vs a on the link scale."""
    return individual_effect(model, a, b, x)


def _check_dimension(model: OutcomeModel, pop: Population) -> None:
    if pop.dimension != model.dimension:
        raise ValidationError(
            f"population has {pop.dimension} covariates but the model has {model.dimension}",
            path="population.covariates",
        )


def population_conditional_effect(model: OutcomeModel, pop: Population, a: str, b: str,
                                  scheme: IntegrationScheme | None = None) -> float:
    """d_ab(P): the population mean of gamma_ab(x).

    The individual contrast is linear in x, so the expectation reduces to
    evaluating it at the exact covariate mean; ``scheme`` is accepted for
    interface symmetry and does not affect the result.
    """
    _check_dimension(model, pop)
    return individual_effect(model, a, b, pop.covariates.mean())


def individual_probability(model: OutcomeModel, pop_intercept: float | None, k: str, x):
    """pi_k(x) = g^-1(eta_k(x)) with the population's intercept."""
    return model.link.inverse(linear_predictor(model, k, x, pop_intercept))


def average_probability(model: OutcomeModel, pop: Population, k: str,
                        scheme: IntegrationScheme | None = None) -> float:
    """Average event probability pi-bar_k over the population."""
    _check_dimension(model, pop)
    mu = model.effective_intercept(pop)
    model.check_treatment(k)
    return expect(pop.covariates, lambda X: model.link.inverse(linear_predictor(model, k, X, mu)), scheme)


def population_marginal_effect(model: OutcomeModel, pop: Population, a: str, b: str,
                               scheme: IntegrationScheme | None = None) -> float:
    """Delta_ab(P) = g(pi-bar_b) - g(pi-bar_a)."""
    g = model.link.forward
    return g(average_probability(model, pop, b, scheme)) - g(average_probability(model, pop, a, scheme))


@dataclass(frozen=True)
class Ranking:
    """Treatments ordered best first, with groups of near-equal values."""

    order: tuple[str, ...]
    values: Mapping[str, float]
    ties: tuple[tuple[str, ...], ...] = ()

    @property
    def best(self) -> str:
        return self.order[0]

    def position(self, k: str) -> int:
        return self.order.index(k)


def rank_treatments(values: Mapping[str, float], direction: Direction,
                    tie_tolerance: float = TIE_TOLERANCE) -> Ranking:
    """Order treatments by value under ``direction``.

    Chains of values closer than ``tie_tolerance`` count as ties and are
    ordered by treatment id.
    """
    sign = 1.0 if direction is Direction.LOWER_IS_BETTER else -1.0
    ordered = sorted(values, key=lambda k: (sign * values[k], k))
    groups: list[list[str]] = []
    for k in ordered:
        if groups and abs(values[k] - values[groups[-1][-1]]) < tie_tolerance:
            groups[-1].append(k)
        else:
            groups.append([k])
    order = tuple(k for g in groups for k in sorted(g))
    ties = tuple(tuple(sorted(g)) for g in groups if len(g) > 1)
    return Ranking(order, dict(values), ties)


@dataclass(frozen=True, eq=False)
class EstimandReport:
    """All binary-outcome estimands for one (model, population) pair.

    ``conditional`` and ``marginal`` hold every ordered pair (a, b), a != b,
    with exact antisymmetry. Rankings are anchored at the first treatment.
    """

    model: OutcomeModel
    population: Population
    treatments: tuple[str, ...]
    direction: Direction
    scheme: IntegrationScheme
    conditional: Mapping[Pair, float]
    marginal: Mapping[Pair, float]
    average_probability: Mapping[str, float]
    conditional_ranking: Ranking
    marginal_ranking: Ranking

    @property
    def pairs(self) -> list[Pair]:
        return list(itertools.combinations(self.treatments, 2))

    def individual_effect_at(self, a: str, b: str) -> Callable[[np.ndarray], float | np.ndarray]:
        return lambda x: individual_effect(self.model, a, b, x)

    def rankings_agree(self) -> bool:
        return self.conditional_ranking.order == self.marginal_ranking.order

    def to_dict(self) -> dict:
        anchor = self.treatments[0]
        return {
            "treatments": list(self.treatments),
            "direction": self.direction.value,
            "link": self.model.link.value,
            "scheme": self.scheme.describe(),
            "average_probability": dict(self.average_probability),
            "pairs": [
                {"a": a, "b": b, "d": self.conditional[(a, b)], "Delta": self.marginal[(a, b)]}
                for a, b in self.pairs
            ],
            "conditional_ranking": list(self.conditional_ranking.order),
            "marginal_ranking": list(self.marginal_ranking.order),
            "conditional_ties": [list(t) for t in self.conditional_ranking.ties],
            "marginal_ties": [list(t) for t in self.marginal_ranking.ties],
            "anchor": anchor,
        }


def estimand_report(model: OutcomeModel, pop: Population, treatments: Sequence[str] | None = None,
                    direction: Direction | str = Direction.LOWER_IS_BETTER,
                    scheme: IntegrationScheme | None = None) -> EstimandReport:
    direction = Direction.parse(direction)
    treatments = tuple(treatments) if treatments is not None else model.treatments
    for k in treatments:
        model.check_treatment(k)
    _check_dimension(model, pop)
    scheme = scheme or default_scheme(pop.covariates)

    pbar = {k: average_probability(model, pop, k, scheme) for k in treatments}
    link_pbar = {k: model.link.forward(p) for k, p in pbar.items()}
    conditional: dict[Pair, float] = {}
    marginal: dict[Pair, float] = {}
    for a, b in itertools.combinations(treatments, 2):
        d = population_conditional_effect(model, pop, a, b, scheme)
        delta = link_pbar[b] - link_pbar[a]
        conditional[(a, b)], conditional[(b, a)] = d, -d
        marginal[(a, b)], marginal[(b, a)] = delta, -delta

    anchor = treatments[0]
    cond_values = {k: (0.0 if k == anchor else conditional[(anchor, k)]) for k in treatments}
    marg_values = {k: (0.0 if k == anchor else marginal[(anchor, k)]) for k in treatments}
    return EstimandReport(
        model=model,
        population=pop,
        treatments=treatments,
        direction=direction,
        scheme=scheme,
        conditional=conditional,
        marginal=marginal,
        average_probability=pbar,
        conditional_ranking=rank_treatments(cond_values, direction),
        marginal_ranking=rank_treatments(marg_values, direction),
    )


class AveragingMode(str, Enum):
    INDIVIDUAL_LEVEL = "individual_level"
    PLUG_IN_AVERAGE = "plug_in_average"


@dataclass(frozen=True)
class NetBenefitSpec:
    """Per-treatment value functions phi_k(pi), as polynomial coefficients.

    ``coefficients[k]`` lists c0, c1, ... so that phi_k(pi) = sum c_j pi^j,
    with degree at most 4.
    """

    coefficients: Mapping[str, tuple[float, ...]]
    mode: AveragingMode = AveragingMode.INDIVIDUAL_LEVEL

    def __post_init__(self):
        coefs = {}
        for k, c in self.coefficients.items():
            c = tuple(float(v) for v in c)
            if not 1 <= len(c) <= 5 or not np.all(np.isfinite(c)):
                raise ValidationError(f"net benefit for {k!r} needs 1 to 5 finite coefficients",
                                      path=f"net_benefit.coefficients.{k}")
            coefs[k] = c
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "mode", AveragingMode(self.mode))

    def value(self, k: str, p):
        if k not in self.coefficients:
            raise ValidationError(f"no net benefit function for treatment {k!r}", path="net_benefit.coefficients")
        return P.polyval(p, self.coefficients[k])


def expected_net_benefit(model: OutcomeModel, pop: Population, spec: NetBenefitSpec, k: str,
                         scheme: IntegrationScheme | None = None) -> float:
    """Population net benefit for treatment k.

    ``individual_level`` integrates phi_k(pi_k(x)); ``plug_in_average``
    evaluates phi_k at the average probability. They agree when phi_k is
    linear.
    """
    if spec.mode is AveragingMode.PLUG_IN_AVERAGE:
        return float(spec.value(k, average_probability(model, pop, k, scheme)))
    _check_dimension(model, pop)
    mu = model.effective_intercept(pop)
    return expect(
        pop.covariates,
        lambda X: spec.value(k, model.link.inverse(linear_predictor(model, k, covariate_array(X, model.dimension), mu))),
        scheme,
    )
