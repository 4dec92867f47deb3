"""Deterministic expectations over a :class:`CovariateDistribution`.

Every scheme reduces to a fixed set of nodes and weights. Continuous
(Uniform) dimensions use tensor-product Gauss-Legendre rules or a scrambled
Sobol point set (each point paired with its reflection through the cube
centre); finite dimensions are always tensored in exactly.

Integrands are vectorised: ``f`` receives an (n, L) array of covariate rows
and returns n values (or an (n, m) array for :func:`expect_grid`).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_legendre
from scipy.stats import qmc

from .covariates import CovariateDistribution, Uniform
from .errors import IntegrationError, SchemeMismatchError, ValidationError

DEFAULT_TOLERANCE = 1e-8
DEFAULT_NODES = 64
DEFAULT_POINTS = 2**14


class SchemeKind(str, Enum):
    EXACT_DISCRETE = "exact_discrete"
    GAUSS_LEGENDRE = "gauss_legendre"
    QMC_SOBOL = "qmc_sobol"
    EMPIRICAL_MEAN = "empirical_mean"


@dataclass(frozen=True)
class IntegrationScheme:
    kind: SchemeKind
    nodes: int = DEFAULT_NODES
    points: int = DEFAULT_POINTS
    scramble_seed: int = 0
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", SchemeKind(self.kind))
        except ValueError:
            raise ValidationError(f"unknown integration scheme {self.kind!r}", path="scheme.kind") from None
        if int(self.nodes) != self.nodes or self.nodes < 2:
            raise ValidationError("Gauss-Legendre needs at least 2 nodes", path="scheme.nodes")
        if self.points < 2 or int(self.points) != self.points or self.points & (self.points - 1):
            raise ValidationError("Sobol point count must be a power of 2, at least 2", path="scheme.points")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive", path="scheme.tolerance")
        object.__setattr__(self, "nodes", int(self.nodes))
        object.__setattr__(self, "points", int(self.points))
        object.__setattr__(self, "scramble_seed", int(self.scramble_seed))
        object.__setattr__(self, "tolerance", float(self.tolerance))

    @classmethod
    def exact_discrete(cls, tolerance: float = DEFAULT_TOLERANCE) -> "IntegrationScheme":
        return cls(SchemeKind.EXACT_DISCRETE, tolerance=tolerance)

    @classmethod
    def gauss_legendre(cls, nodes: int = DEFAULT_NODES, tolerance: float = DEFAULT_TOLERANCE):
        return cls(SchemeKind.GAUSS_LEGENDRE, nodes=nodes, tolerance=tolerance)

    @classmethod
    def qmc_sobol(cls, points: int = DEFAULT_POINTS, scramble_seed: int = 0,
                  tolerance: float = DEFAULT_TOLERANCE):
        return cls(SchemeKind.QMC_SOBOL, points=points, scramble_seed=scramble_seed, tolerance=tolerance)

    @classmethod
    def empirical_mean(cls, tolerance: float = DEFAULT_TOLERANCE) -> "IntegrationScheme":
        return cls(SchemeKind.EMPIRICAL_MEAN, tolerance=tolerance)

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "tolerance": self.tolerance}
        if self.kind is SchemeKind.GAUSS_LEGENDRE:
            out["nodes"] = self.nodes
        elif self.kind is SchemeKind.QMC_SOBOL:
            out["points"] = self.points
            out["scramble_seed"] = self.scramble_seed
        return out


def default_scheme(dist: CovariateDistribution) -> IntegrationScheme:
    if dist.is_empirical:
        return IntegrationScheme.empirical_mean()
    if dist.is_finite:
        return IntegrationScheme.exact_discrete()
    if len(dist.continuous_dims) <= 2:
        return IntegrationScheme.gauss_legendre(DEFAULT_NODES)
    return IntegrationScheme.qmc_sobol(DEFAULT_POINTS)


def _tensor(factors: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    """Tensor product of per-dimension (values, weights); last dimension varies fastest."""
    if not factors:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*[v for v, _ in factors], indexing="ij")
    wgrids = np.meshgrid(*[w for _, w in factors], indexing="ij")
    nodes = np.column_stack([g.reshape(-1) for g in grids])
    weights = np.prod(np.column_stack([g.reshape(-1) for g in wgrids]), axis=1)
    return nodes, weights


@lru_cache(maxsize=256)
def quadrature_rule(dist: CovariateDistribution,
                    scheme: IntegrationScheme | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (n, L) and weights (n,) for ``dist`` under ``scheme``.

    Weights are non-negative and sum to one. Returned arrays are read-only
    and shared between calls.
    """
    scheme = scheme or default_scheme(dist)
    kind = scheme.kind

    if dist.is_empirical:
        if kind is not SchemeKind.EMPIRICAL_MEAN:
            raise SchemeMismatchError(f"{kind.value} cannot integrate an empirical sample; use empirical_mean",
                                      path="scheme.kind")
        nodes = dist.sample.as_array()
        weights = np.full(len(nodes), 1.0 / len(nodes))
    elif kind is SchemeKind.EMPIRICAL_MEAN:
        raise SchemeMismatchError("empirical_mean needs an empirical sample", path="scheme.kind")
    elif kind is SchemeKind.EXACT_DISCRETE:
        if not dist.is_finite:
            raise SchemeMismatchError("exact_discrete cannot integrate a Uniform covariate", path="scheme.kind")
        nodes, weights = _tensor([m.support() for m in dist.marginals])
    elif kind is SchemeKind.GAUSS_LEGENDRE:
        x, w = roots_legendre(scheme.nodes)
        factors = []
        for m in dist.marginals:
            if isinstance(m, Uniform):
                half = 0.5 * (m.hi - m.lo)
                factors.append((m.mean + half * x, 0.5 * w))
            else:
                factors.append(m.support())
        nodes, weights = _tensor(factors)
    else:
        nodes, weights = _sobol_rule(dist, scheme)

    nodes = np.ascontiguousarray(nodes, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def _sobol_rule(dist: CovariateDistribution, scheme: IntegrationScheme):
    cont = dist.continuous_dims
    if not cont:
        return _tensor([m.support() for m in dist.marginals])
    sampler = qmc.Sobol(d=len(cont), scramble=True, seed=scheme.scramble_seed)
    half = sampler.random_base2(int(np.log2(scheme.points)) - 1)
    # pairing each point with its reflection integrates affine functions exactly
    u = np.concatenate([half, 1.0 - half])
    cont_nodes = np.column_stack([dist.marginals[j].from_unit(u[:, i]) for i, j in enumerate(cont)])
    disc = [j for j in range(dist.dimension) if j not in cont]
    disc_nodes, disc_weights = _tensor([dist.marginals[j].support() for j in disc])

    n_c, n_d = len(cont_nodes), len(disc_nodes)
    nodes = np.empty((n_c * n_d, dist.dimension))
    nodes[:, list(cont)] = np.tile(cont_nodes, (n_d, 1))
    if disc:
        nodes[:, disc] = np.repeat(disc_nodes, n_c, axis=0)
    weights = np.repeat(disc_weights, n_c) / n_c
    return nodes, weights


def _weighted_sum(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    # numpy reduces a contiguous last axis pairwise, in index order
    prod = weights[:, None] * values if values.ndim == 2 else weights * values
    if prod.ndim == 2:
        return np.ascontiguousarray(prod.T).sum(axis=1)
    return prod.sum()


def _evaluate(f: Callable, nodes: np.ndarray, expect_cols: bool) -> np.ndarray:
    values = np.asarray(f(nodes), dtype=float)
    n = len(nodes)
    if values.ndim == 0:
        values = np.full(n, float(values)) if not expect_cols else np.full((n, 1), float(values))
    if expect_cols:
        if values.ndim == 1 and n != 1 and values.shape[0] != n:
            values = np.broadcast_to(values, (n, values.shape[0]))
        elif values.ndim == 1:
            values = values.reshape(n, -1)
    if values.shape[0] != n:
        raise IntegrationError(f"integrand returned shape {values.shape} for {n} nodes")
    if not np.all(np.isfinite(values)):
        raise IntegrationError("integrand produced non-finite values")
    return values


def expect(dist: CovariateDistribution, f: Callable[[np.ndarray], np.ndarray],
           scheme: IntegrationScheme | None = None) -> float:
    """E[f(x)] under ``dist``.

    Gauss-Legendre with N nodes is exact for polynomials of degree < 2N in
    each Uniform dimension; exact_discrete is exact on finite supports.
    """
    nodes, weights = quadrature_rule(dist, scheme)
    values = _evaluate(f, nodes, expect_cols=False)
    if values.ndim != 1:
        raise IntegrationError("expect needs a scalar integrand; use expect_grid for vectors")
    return float(_weighted_sum(weights, values))


def expect_grid(dist: CovariateDistribution, f: Callable[[np.ndarray], np.ndarray],
                scheme: IntegrationScheme | None = None) -> np.ndarray:
    """Componentwise E[f(x)] for a vector-valued integrand returning (n, m)."""
    nodes, weights = quadrature_rule(dist, scheme)
    values = _evaluate(f, nodes, expect_cols=True)
    return _weighted_sum(weights, values)


def refinement_error(dist: CovariateDistribution, f: Callable[[np.ndarray], np.ndarray],
                     scheme: IntegrationScheme) -> float:
    """|E_N - E_{N/2}| for Gauss-Legendre or Sobol rules; 0 for exact schemes."""
    if scheme.kind is SchemeKind.GAUSS_LEGENDRE:
        coarse = IntegrationScheme.gauss_legendre(max(2, scheme.nodes // 2), scheme.tolerance)
    elif scheme.kind is SchemeKind.QMC_SOBOL and scheme.points > 2:
        coarse = IntegrationScheme.qmc_sobol(scheme.points // 2, scheme.scramble_seed, scheme.tolerance)
    else:
        return 0.0
    return abs(expect(dist, f, scheme) - expect(dist, f, coarse))

