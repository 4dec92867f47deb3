"""Random model generators shared by the property and acceptance suites."""

import itertools

import numpy as np

from estimand_lab import Bernoulli, CovariateDistribution, OutcomeModel, Population, Uniform

TREATMENTS = ("A", "B", "C")


def random_population(rng: np.random.Generator, dim: int) -> Population:
    marginals = []
    for _ in range(dim):
        if rng.random() < 0.5:
            lo = rng.uniform(-2, 1)
            marginals.append(Uniform(lo, lo + rng.uniform(0.5, 2)))
        else:
            marginals.append(Bernoulli(rng.uniform(0.05, 0.95)))
    return Population(CovariateDistribution.independent(*marginals))


def random_logit_model(rng: np.random.Generator, bound: float = 5.0, shared: bool = False,
                       dim: int | None = None) -> tuple[OutcomeModel, Population]:
    """Logit model with coefficients in [-bound, bound] and 1 to 3 covariates.

    With ``shared`` every non-reference treatment has the same interaction vector.
    """
    dim = int(rng.integers(1, 4)) if dim is None else dim
    u = lambda *shape: rng.uniform(-bound, bound, shape)
    if shared:
        em = u(dim)
        interactions = {k: em for k in TREATMENTS[1:]}
    else:
        interactions = {k: u(dim) for k in TREATMENTS[1:]}
    effects = {k: float(u()) for k in TREATMENTS[1:]}
    model = OutcomeModel("logit", TREATMENTS, float(u()), u(dim), interactions, effects)
    return model, random_population(rng, dim)


def equal_interaction_pairs(model: OutcomeModel) -> list[tuple[str, str]]:
    return [(a, b) for a, b in itertools.combinations(model.treatments, 2)
            if np.array_equal(model.interaction(a), model.interaction(b))]


def eta_range(model: OutcomeModel, pop: Population, k: str) -> tuple[float, float]:
    """Exact min and max of the linear predictor over the support (box or finite support)."""
    slope = model.slope(k)
    lo = hi = model.effective_intercept(pop) + model.effect(k)
    for j, m in enumerate(pop.covariates.marginals):
        a, b = pop.covariates.axis_range(j)
        lo += min(slope[j] * a, slope[j] * b)
        hi += max(slope[j] * a, slope[j] * b)
    return lo, hi


def in_support(pop: Population, x) -> bool:
    for j, (m, v) in enumerate(zip(pop.covariates.marginals, x)):
        if isinstance(m, Uniform):
            lo, hi = pop.covariates.axis_range(j)
            if not lo <= v <= hi:
                return False
        elif v not in m.support()[0]:
            return False
    return True


def valid_model(rng: np.random.Generator, link: str, shared: bool, scale: float) -> tuple[OutcomeModel, Population]:
    """Identity- or log-link model whose probabilities stay in range on the whole support."""
    while True:
        dim = int(rng.integers(1, 4))
        pop = random_population(rng, dim)
        em = rng.uniform(-scale, scale, dim)
        inter = {k: em if shared else rng.uniform(-scale, scale, dim) for k in TREATMENTS[1:]}
        model = OutcomeModel(link, TREATMENTS, float(rng.uniform(-scale, scale)), rng.uniform(-scale, scale, dim),
                             inter, {k: float(rng.uniform(-scale, scale)) for k in TREATMENTS[1:]})
        ranges = [eta_range(model, pop, k) for k in TREATMENTS]
        if link == "identity" and all(0 < lo and hi < 1 for lo, hi in ranges):
            return model, pop
        if link == "log" and all(hi < 0 for _, hi in ranges):
            return model, pop
