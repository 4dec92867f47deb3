"""Monte-Carlo potential-outcomes oracle.

Covariates are drawn from the population and every treatment's potential
outcome probability is evaluated for the same individual. Estimates are
plain sample averages, with standard errors from a delete-a-group
jackknife. This shares the model algebra with the deterministic modules
but none of the integration machinery, so it checks the quadrature
independently.

Draws are split into groups, each fed by its own jumped Philox stream, so
results do not depend on how groups are scheduled across threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ._parallel import parallel_map
from .covariates import Population
from .errors import ValidationError
from .model import OutcomeModel, individual_effect, linear_predictor

Pair = tuple[str, str]

MIN_DRAWS = 10_000
DEFAULT_DRAWS = 1_000_000
DEFAULT_GROUPS = 1000
ROUNDING_RTOL = 1e-12


@dataclass(frozen=True)
class OracleConfig:
    draws: int = DEFAULT_DRAWS
    seed: int = 0
    antithetic: bool = False
    bernoulli_outcomes: bool = False
    groups: int = DEFAULT_GROUPS

    def __post_init__(self):
        if isinstance(self.draws, bool) or int(self.draws) != self.draws or self.draws < MIN_DRAWS:
            raise ValidationError(f"oracle needs at least {MIN_DRAWS} draws, got {self.draws!r}",
                                  path="oracle.draws")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit non-negative integer", path="oracle.seed")
        if int(self.groups) != self.groups or not 2 <= self.groups <= self.draws:
            raise ValidationError("jackknife needs between 2 and `draws` groups", path="oracle.groups")
        object.__setattr__(self, "draws", int(self.draws))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "groups", int(self.groups))

    def group_sizes(self) -> list[int]:
        base, extra = divmod(self.draws, self.groups)
        return [base + (g < extra) for g in range(self.groups)]

    def rng(self, group: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed).jumped(group))

    def describe(self) -> dict:
        return {"draws": self.draws, "seed": self.seed, "antithetic": self.antithetic,
                "bernoulli_outcomes": self.bernoulli_outcomes, "groups": self.groups,
                "generator": "Philox (one jumped stream per group)"}


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def z(self, target: float) -> float:
        """|value - target| in standard errors.

        A zero SE means a constant integrand; agreement is then judged at
        rounding level.
        """
        gap = abs(self.value - target)
        if self.se > 0:
            return gap / self.se
        return 0.0 if gap <= ROUNDING_RTOL * max(1.0, abs(target)) else math.inf

    def covers(self, target: float, k: float = 4.0) -> bool:
        return self.z(target) <= k

    def to_dict(self) -> dict:
        return {"value": self.value, "se": self.se}


class GroupSums:
    """Per-group sums of named statistics, with jackknife estimation.

    Each statistic is an array of shape (G, ...) holding group totals;
    ``counts`` holds the number of units in each group.
    """

    def __init__(self, counts: np.ndarray, sums: Mapping[str, np.ndarray]):
        self.counts = np.asarray(counts, dtype=float)
        self.sums = dict(sums)
        self.totals = {k: v.sum(axis=0) for k, v in self.sums.items()}
        self.total_count = self.counts.sum()

    def means(self) -> dict[str, np.ndarray]:
        return {k: v / self.total_count for k, v in self.totals.items()}

    def jackknife(self, fn: Callable[[Mapping[str, np.ndarray]], np.ndarray | float]):
        """``fn`` of the pooled means, and its delete-a-group jackknife SE.

        ``fn`` must act elementwise on its inputs.
        """
        full = np.asarray(fn(self.means()), dtype=float)
        G = len(self.counts)
        left_out = self.total_count - self.counts
        # fn is elementwise, so all G leave-one-out replicates go through at once
        reps = np.asarray(fn({k: (self.totals[k] - v) / left_out.reshape((G,) + (1,) * (v.ndim - 1))
                              for k, v in self.sums.items()}), dtype=float)
        se = np.sqrt((G - 1) / G * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))
        if full.ndim == 0:
            return Estimate(float(full), float(se))
        return full, se


def _uniforms(rng: np.random.Generator, n: int, dim: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.random((n, dim))
    half = rng.random(((n + 1) // 2, dim))
    return np.concatenate([half, 1.0 - half])[:n]


def _draw_covariates(pop: Population, rng: np.random.Generator, n: int, antithetic: bool) -> np.ndarray:
    dist = pop.covariates
    if dist.unit_dimension == 0:
        return np.zeros((n, 0))
    return dist.from_unit_cube(_uniforms(rng, n, dist.unit_dimension, antithetic))


@dataclass(frozen=True, eq=False)
class OracleEstimates:
    config: OracleConfig
    treatments: tuple[str, ...]
    average_probability: Mapping[str, Estimate]
    conditional: Mapping[Pair, Estimate]
    marginal: Mapping[Pair, Estimate]
    sums: GroupSums

    def to_dict(self) -> dict:
        return {
            "oracle": self.config.describe(),
            "treatments": list(self.treatments),
            "average_probability": {k: v.to_dict() for k, v in self.average_probability.items()},
            "pairs": [{"a": a, "b": b, "d": self.conditional[(a, b)].to_dict(),
                       "Delta": self.marginal[(a, b)].to_dict()} for a, b in self.conditional],
        }


def oracle_estimands(model: OutcomeModel, pop: Population, treatments: Sequence[str] | None = None,
                     config: OracleConfig | None = None) -> OracleEstimates:
    """Monte-Carlo pi-bar_k, d_ab and Delta_ab with jackknife standard errors.

    By default each draw contributes the exact conditional probabilities
    pi_k(x). With ``bernoulli_outcomes`` it contributes simulated potential
    outcomes Y(k) = 1{V < pi_k(x)} sharing one uniform V across treatments.
    """
    config = config or OracleConfig()
    treatments = tuple(treatments) if treatments is not None else model.treatments
    for k in treatments:
        model.check_treatment(k)
    if pop.dimension != model.dimension:
        raise ValidationError("population and model dimensions differ", path="population.covariates")
    mu = model.effective_intercept(pop)
    pairs = list(itertools.combinations(treatments, 2))

    def run_group(args):
        g, n = args
        rng = config.rng(g)
        x = _draw_covariates(pop, rng, n, config.antithetic)
        out = {}
        if config.bernoulli_outcomes:
            v = _uniforms(rng, n, 1, config.antithetic)[:, 0]
        for k in treatments:
            p = np.atleast_1d(model.link.inverse(linear_predictor(model, k, x, mu)))
            out[f"p:{k}"] = np.sum(v < p, dtype=float) if config.bernoulli_outcomes else p.sum()
        for a, b in pairs:
            out[f"g:{a}:{b}"] = np.atleast_1d(individual_effect(model, a, b, x)).sum()
        return out

    sizes = config.group_sizes()
    results = parallel_map(run_group, list(enumerate(sizes)))
    sums = GroupSums(np.array(sizes), {key: np.array([r[key] for r in results]) for key in results[0]})

    g = model.link.forward
    pbar = {k: sums.jackknife(lambda m, k=k: m[f"p:{k}"]) for k in treatments}
    cond = {(a, b): sums.jackknife(lambda m, a=a, b=b: m[f"g:{a}:{b}"]) for a, b in pairs}
    marg = {(a, b): sums.jackknife(lambda m, a=a, b=b: g(m[f"p:{b}"]) - g(m[f"p:{a}"])) for a, b in pairs}
    return OracleEstimates(config, treatments, pbar, cond, marg, sums)


@dataclass(frozen=True, eq=False)
class OracleSurvival:
    config: OracleConfig
    times: np.ndarray
    treatments: tuple[str, ...]
    marginal_survival: Mapping[str, tuple[np.ndarray, np.ndarray]]
    hazard_ratio: Mapping[Pair, tuple[np.ndarray, np.ndarray]]
    conditional_log_hr: Mapping[Pair, Estimate]
    sums: GroupSums

    def hazard_ratio_difference(self, p: Pair, q: Pair) -> tuple[np.ndarray, np.ndarray]:
        """Delta_p(t) - Delta_q(t) with jackknife SEs that account for shared draws."""
        return self.sums.jackknife(lambda m: _hr(m, *p) - _hr(m, *q))

    def to_dict(self) -> dict:
        return {
            "oracle": self.config.describe(),
            "times": self.times.tolist(),
            "marginal_survival": {k: {"value": v.tolist(), "se": s.tolist()}
                                  for k, (v, s) in self.marginal_survival.items()},
            "hazard_ratio": {f"{a}{b}": {"value": v.tolist(), "se": s.tolist()}
                             for (a, b), (v, s) in self.hazard_ratio.items()},
            "conditional_log_hr": {f"{a}{b}": e.to_dict() for (a, b), e in self.conditional_log_hr.items()},
        }


def _hr(m: Mapping[str, np.ndarray], a: str, b: str) -> np.ndarray:
    # survival-weighted mean rate per arm; the baseline factor cancels in the ratio
    return (m[f"sr:{b}"] / m[f"s:{b}"]) / (m[f"sr:{a}"] / m[f"s:{a}"])


def oracle_survival(model, pop: Population, times: Sequence[float], treatments: Sequence[str] | None = None,
                    config: OracleConfig | None = None) -> OracleSurvival:
    """Monte-Carlo marginal survival, hazard-ratio curves and conditional log HRs vs the first treatment.

    ``model`` is a Weibull PH model. Survival weights are scaled per time by
    a constant taken from the first group, which cancels in every ratio and
    keeps late times from underflowing.
    """
    config = config or OracleConfig()
    coefs = model.coefficients
    treatments = tuple(treatments) if treatments is not None else coefs.treatments
    for k in treatments:
        coefs.check_treatment(k)
    if pop.dimension != coefs.dimension:
        raise ValidationError("population and model dimensions differ", path="population.covariates")
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValidationError("oracle times must be finite and non-negative")
    mu = coefs.effective_intercept(pop)
    tnu = np.power(t, model.shape)
    sizes = config.group_sizes()

    ref = treatments[0]

    def draw(g, n):
        x = _draw_covariates(pop, config.rng(g), n, config.antithetic)
        return x, {k: np.exp(np.atleast_1d(linear_predictor(coefs, k, x, mu))) for k in treatments}

    first = draw(0, sizes[0])
    shift = {k: -tnu * first[1][k].min() for k in treatments}

    def run_group(args):
        g, n = args
        x, r = first if g == 0 else draw(g, n)
        out = {f"g:{ref}:{k}": np.atleast_1d(individual_effect(coefs, ref, k, x)).sum() for k in treatments[1:]}
        for k in treatments:
            scaled = np.exp(-np.outer(r[k], tnu) - shift[k])
            out[f"s:{k}"] = scaled.sum(axis=0)
            out[f"sr:{k}"] = (scaled * r[k][:, None]).sum(axis=0)
        return out

    results = parallel_map(run_group, list(enumerate(sizes)))
    sums = GroupSums(np.array(sizes), {key: np.stack([r[key] for r in results]) for key in results[0]})
    surv = {k: sums.jackknife(lambda m, k=k: m[f"s:{k}"] * np.exp(shift[k])) for k in treatments}
    hr = {(ref, k): sums.jackknife(lambda m, k=k: _hr(m, ref, k)) for k in treatments[1:]}
    cond = {(ref, k): sums.jackknife(lambda m, k=k: m[f"g:{ref}:{k}"]) for k in treatments[1:]}
    return OracleSurvival(config, t, treatments, surv, hr, cond, sums)
