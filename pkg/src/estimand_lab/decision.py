"""Decision analyses built on the binary estimands.

Rank-conflict reports with sign-change witnesses, baseline-risk sweeps with
rank-switch and null-distance thresholds, conversion between baseline risk
and intercept, and shared effect-modifier scenarios.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from ._parallel import parallel_map
from .binary import (TIE_TOLERANCE, EstimandReport, Ranking, average_probability, estimand_report,
                     population_conditional_effect, rank_treatments)
from .covariates import Population, Uniform
from .errors import ConvergenceError, ValidationError
from .integrate import IntegrationScheme, default_scheme, expect
from .links import LinkFunction
from .model import Direction, OutcomeModel, individual_effect, linear_predictor

Pair = tuple[str, str]

WITNESS_SCAN_POINTS = 512
WITNESS_TOLERANCE = 1e-8
SWEEP_RANGE = (-6.0, 6.0)
SWEEP_POINTS = 101
SWEEP_LIMIT = 20.0
SWEEP_STEP_OUT = 6.0
ROOT_XTOL = 1e-10


def _sign(v: float, tol: float = TIE_TOLERANCE) -> int:
    return 0 if abs(v) <= tol else (1 if v > 0 else -1)


@dataclass(frozen=True)
class Witness:
    """Evidence that gamma_ab(x) changes sign on the covariate support.

    ``low`` and ``high`` are covariate vectors in the support with
    gamma_ab of opposite sign. ``boundary`` is a point between them where
    gamma_ab is zero, or None when the segment leaves the support (a
    discrete axis).
    """

    pair: Pair
    axis: int | None
    low: tuple[float, ...]
    high: tuple[float, ...]
    gamma_low: float
    gamma_high: float
    boundary: tuple[float, ...] | None

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "axis": self.axis, "low": list(self.low), "high": list(self.high),
                "gamma_low": self.gamma_low, "gamma_high": self.gamma_high,
                "boundary": None if self.boundary is None else list(self.boundary)}


@dataclass(frozen=True)
class PairSigns:
    pair: Pair
    conditional: float
    marginal: float
    conflict: bool
    near_tie: bool

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "d": self.conditional, "Delta": self.marginal,
                "sign_d": _sign(self.conditional), "sign_Delta": _sign(self.marginal),
                "conflict": self.conflict, "near_tie": self.near_tie}


@dataclass(frozen=True, eq=False)
class ConflictReport:
    report: EstimandReport
    signs: tuple[PairSigns, ...]
    witnesses: Mapping[Pair, tuple[Witness, ...]]
    warnings: tuple[str, ...] = ()

    @property
    def conditional_ranking(self) -> Ranking:
        return self.report.conditional_ranking

    @property
    def marginal_ranking(self) -> Ranking:
        return self.report.marginal_ranking

    @property
    def conflict(self) -> bool:
        return any(s.conflict for s in self.signs)

    @property
    def conflicting_pairs(self) -> list[Pair]:
        return [s.pair for s in self.signs if s.conflict]

    def to_dict(self) -> dict:
        out = self.report.to_dict()
        out.update({
            "conflict": self.conflict,
            "sign_table": [s.to_dict() for s in self.signs],
            "witnesses": [w.to_dict() for ws in self.witnesses.values() for w in ws],
            "warnings": list(self.warnings),
        })
        return out


def _axis_values(pop: Population, dim: int) -> tuple[np.ndarray, bool]:
    """Scan points along one axis, and whether the axis is continuous."""
    dist = pop.covariates
    if not dist.is_empirical and isinstance(dist.marginals[dim], Uniform):
        lo, hi = dist.axis_range(dim)
        return np.linspace(lo, hi, WITNESS_SCAN_POINTS), True
    if dist.is_empirical:
        return np.unique(dist.sample.as_array()[:, dim]), False
    return dist.marginals[dim].support()[0], False


def _scan_centre(pop: Population) -> np.ndarray:
    """Population mean, with each discrete axis moved to its support point nearest the mean."""
    dist = pop.covariates
    centre = dist.mean()
    for j, m in enumerate(dist.marginals):
        if not isinstance(m, Uniform):
            support = np.asarray(m.support()[0], dtype=float)
            centre[j] = support[np.argmin(np.abs(support - centre[j]))]
    return centre


def _axis_witnesses(model: OutcomeModel, pop: Population, a: str, b: str) -> list[Witness]:
    if pop.covariates.is_empirical:
        # axis lines through the mean leave the sample; extreme rows are used instead
        return []
    centre = _scan_centre(pop)
    found = []
    for dim in range(model.dimension):
        values, continuous = _axis_values(pop, dim)
        pts = np.tile(centre, (len(values), 1))
        pts[:, dim] = values
        gam = np.atleast_1d(individual_effect(model, a, b, pts))
        signs = np.sign(gam)
        for i in range(len(values) - 1):
            if signs[i] * signs[i + 1] >= 0:
                continue
            boundary = None
            if continuous:
                def along(v, dim=dim):
                    p = centre.copy()
                    p[dim] = v
                    return individual_effect(model, a, b, p)
                root = brentq(along, values[i], values[i + 1], xtol=WITNESS_TOLERANCE)
                boundary = centre.copy()
                boundary[dim] = root
                boundary = tuple(boundary)
            found.append(Witness((a, b), dim, tuple(pts[i]), tuple(pts[i + 1]),
                                 float(gam[i]), float(gam[i + 1]), boundary))
        # an exact zero on the scan: its neighbours carry the opposite signs
        for i in np.flatnonzero(signs == 0):
            if 0 < i < len(values) - 1 and signs[i - 1] * signs[i + 1] < 0:
                found.append(Witness((a, b), dim, tuple(pts[i - 1]), tuple(pts[i + 1]),
                                     float(gam[i - 1]), float(gam[i + 1]),
                                     tuple(pts[i]) if continuous else None))
    return found


def _extreme_witness(model: OutcomeModel, pop: Population, a: str, b: str) -> list[Witness]:
    """Opposite-sign support points at the extremes of gamma_ab.

    gamma_ab is affine, so over a product of intervals and finite supports
    its extremes sit at corners built from each axis's range; for an
    empirical sample they are rows.
    """
    dist = pop.covariates
    if dist.is_empirical:
        rows = dist.sample.as_array()
        gam = np.atleast_1d(individual_effect(model, a, b, rows))
        lo_pt, hi_pt = rows[int(np.argmin(gam))], rows[int(np.argmax(gam))]
    else:
        slope = model.interaction(b) - model.interaction(a)
        ranges = [dist.axis_range(j) for j in range(model.dimension)]
        hi_pt = np.array([r[1] if s > 0 else r[0] for r, s in zip(ranges, slope)])
        lo_pt = np.array([r[0] if s > 0 else r[1] for r, s in zip(ranges, slope)])
    g_lo = individual_effect(model, a, b, lo_pt)
    g_hi = individual_effect(model, a, b, hi_pt)
    if not (g_lo < 0 < g_hi):
        return []
    boundary = None
    if not dist.is_empirical and len(dist.continuous_dims) == model.dimension:
        t = brentq(lambda s: individual_effect(model, a, b, lo_pt + s * (hi_pt - lo_pt)), 0.0, 1.0,
                   xtol=WITNESS_TOLERANCE)
        boundary = tuple(lo_pt + t * (hi_pt - lo_pt))
    return [Witness((a, b), None, tuple(lo_pt), tuple(hi_pt), float(g_lo), float(g_hi), boundary)]


def find_witnesses(model: OutcomeModel, pop: Population, a: str, b: str) -> list[Witness]:
    """Sign changes of gamma_ab along each axis, all points on the support.

    Other axes are held at their means (discrete axes at the support point
    nearest the mean). Falls back to the extreme support points when no
    single-axis scan crosses zero.
    """
    return _axis_witnesses(model, pop, a, b) or _extreme_witness(model, pop, a, b)


def conflict_report(model: OutcomeModel, pop: Population, treatments: Sequence[str] | None = None,
                    direction: Direction | str = Direction.LOWER_IS_BETTER,
                    scheme: IntegrationScheme | None = None,
                    tie_tolerance: float = TIE_TOLERANCE) -> ConflictReport:
    """Sign table of d vs Delta for every pair, with witnesses for conflicts."""
    report = estimand_report(model, pop, treatments, direction, scheme)
    signs, witnesses, warnings = [], {}, []
    for a, b in report.pairs:
        d, delta = report.conditional[(a, b)], report.marginal[(a, b)]
        near_tie = min(abs(d), abs(delta)) <= tie_tolerance
        conflict = _sign(d, tie_tolerance) * _sign(delta, tie_tolerance) < 0
        signs.append(PairSigns((a, b), d, delta, conflict, near_tie))
        if near_tie:
            warnings.append(f"pair {a},{b} is a near-tie (|d| = {abs(d):.3g}, |Delta| = {abs(delta):.3g}); "
                            "treated as agreement")
        if conflict:
            found = find_witnesses(model, pop, a, b)
            witnesses[(a, b)] = tuple(found)
            if not found:
                warnings.append(f"no sign-change witness found for conflicting pair {a},{b}")
    for label, rank in (("conditional", report.conditional_ranking), ("marginal", report.marginal_ranking)):
        for tie in rank.ties:
            warnings.append(f"{label} ranking has a near-tie between {', '.join(tie)}")
    return ConflictReport(report, tuple(signs), witnesses, tuple(warnings))


@dataclass(frozen=True)
class RankSwitch:
    value: float
    pair: Pair
    order_before: tuple[str, ...]
    order_after: tuple[str, ...]


@dataclass(frozen=True)
class NullCrossing:
    """Where |Delta_ab| - |d_ab| changes sign; ``upward`` means |Delta| exceeds |d| after it."""

    value: float
    pair: Pair
    upward: bool


@dataclass(frozen=True, eq=False)
class SweepResult:
    variable: str
    values: np.ndarray
    pairs: tuple[Pair, ...]
    conditional: Mapping[Pair, np.ndarray]
    marginal: Mapping[Pair, np.ndarray]
    conditional_order: tuple[str, ...]
    marginal_orders: tuple[tuple[str, ...], ...]
    rank_switches: tuple[RankSwitch, ...]
    null_crossings: tuple[NullCrossing, ...]
    scheme: IntegrationScheme
    direction: Direction = Direction.LOWER_IS_BETTER
    notes: tuple[str, ...] = field(default=())

    def rows(self) -> list[tuple[float, str, float, float]]:
        """(sweep_value, pair, d, Delta) in grid-major, pair-minor order."""
        return [(float(v), f"{a}{b}", float(self.conditional[(a, b)][i]), float(self.marginal[(a, b)][i]))
                for i, v in enumerate(self.values) for a, b in self.pairs]

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "scheme": self.scheme.describe(),
            "direction": self.direction.value,
            "values": self.values.tolist(),
            "pairs": [f"{a}{b}" for a, b in self.pairs],
            "d": {f"{a}{b}": self.conditional[(a, b)].tolist() for a, b in self.pairs},
            "Delta": {f"{a}{b}": self.marginal[(a, b)].tolist() for a, b in self.pairs},
            "conditional_order": list(self.conditional_order),
            "rank_switches": [{"value": s.value, "pair": f"{s.pair[0]}{s.pair[1]}",
                               "before": list(s.order_before), "after": list(s.order_after)}
                              for s in self.rank_switches],
            "null_crossings": [{"value": c.value, "pair": f"{c.pair[0]}{c.pair[1]}", "upward": c.upward}
                               for c in self.null_crossings],
            "notes": list(self.notes),
        }


def _marginal_at(model: OutcomeModel, pop: Population, mu: float, treatments: Sequence[str],
                 scheme: IntegrationScheme) -> dict[str, float]:
    """Link-scale average probability per treatment at intercept ``mu``."""
    p = pop.with_intercept(mu)
    return {k: model.link.forward(average_probability(model, p, k, scheme)) for k in treatments}


def _default_grid(model, pop, treatments, direction, scheme) -> tuple[np.ndarray, list[str]]:
    """Evenly spaced grid widened until the marginal ranking both matches and
    departs from the conditional ranking, or the limits are reached."""
    lo, hi = SWEEP_RANGE
    step = (hi - lo) / (SWEEP_POINTS - 1)
    notes = []
    anchor = treatments[0]
    cond_order = rank_treatments(
        {k: population_conditional_effect(model, pop, anchor, k) for k in treatments}, direction).order
    while True:
        grid = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
        seen = set()
        for mu in grid:
            link_p = _marginal_at(model, pop, mu, treatments, scheme)
            seen.add(rank_treatments({k: link_p[k] - link_p[anchor] for k in treatments}, direction).order
                     == cond_order)
        if len(seen) == 2 or (lo <= -SWEEP_LIMIT and hi >= SWEEP_LIMIT):
            break
        lo, hi = max(lo - SWEEP_STEP_OUT, -SWEEP_LIMIT), min(hi + SWEEP_STEP_OUT, SWEEP_LIMIT)
    if len(seen) < 2:
        notes.append("marginal ranking never changed relative to the conditional ranking within the sweep limits")
    return grid, notes


def _marg_value(marg: Mapping[Pair, np.ndarray], anchor: str, k: str, i: int) -> float:
    return 0.0 if k == anchor else float(marg[(anchor, k)][i])


def baseline_risk_sweep(model: OutcomeModel, pop: Population, values: Sequence[float] | None = None,
                        treatments: Sequence[str] | None = None,
                        direction: Direction | str = Direction.LOWER_IS_BETTER,
                        scheme: IntegrationScheme | None = None) -> SweepResult:
    """d and Delta against the first treatment for each intercept value.

    Rank switches of the marginal ranking and crossings of |Delta| through
    |d| are located by root finding between adjacent grid values.
    """
    direction = Direction.parse(direction)
    treatments = tuple(treatments) if treatments is not None else model.treatments
    for k in treatments:
        model.check_treatment(k)
    scheme = scheme or default_scheme(pop.covariates)
    notes: list[str] = []
    if values is None:
        grid, notes = _default_grid(model, pop, treatments, direction, scheme)
    else:
        grid = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
            raise ValidationError("sweep grid must be finite and strictly increasing", path="sweep.values")

    anchor = treatments[0]
    pairs = tuple((anchor, k) for k in treatments[1:])
    link_rows = parallel_map(lambda mu: _marginal_at(model, pop, float(mu), treatments, scheme), list(grid))
    cond = {p: np.array([population_conditional_effect(model.with_intercept(float(mu)), pop.with_intercept(mu),
                                                       *p) for mu in grid]) for p in pairs}
    marg = {(a, b): np.array([row[b] - row[a] for row in link_rows]) for a, b in pairs}

    def order_at(i):
        return rank_treatments({k: (0.0 if k == anchor else marg[(anchor, k)][i]) for k in treatments},
                               direction).order

    orders = tuple(order_at(i) for i in range(len(grid)))
    cond_order = rank_treatments({k: (0.0 if k == anchor else cond[(anchor, k)][0]) for k in treatments},
                                 direction).order

    def link_diff(mu, j, k):
        row = _marginal_at(model, pop, mu, (j, k), scheme)
        return row[j] - row[k]

    switches = []
    for i in range(len(grid) - 1):
        if orders[i] == orders[i + 1]:
            continue
        for j, k in itertools.combinations(treatments, 2):
            before = _marg_value(marg, anchor, j, i) - _marg_value(marg, anchor, k, i)
            after = _marg_value(marg, anchor, j, i + 1) - _marg_value(marg, anchor, k, i + 1)
            if before * after < 0:
                root = brentq(link_diff, grid[i], grid[i + 1], args=(j, k), xtol=ROOT_XTOL)
                switches.append(RankSwitch(float(root), (j, k), orders[i], orders[i + 1]))
    switches.sort(key=lambda s: (s.value, s.pair))

    crossings = []
    for a, b in pairs:
        gap = np.abs(marg[(a, b)]) - np.abs(cond[(a, b)])
        d_abs = abs(cond[(a, b)][0])

        def null_gap(mu, a=a, b=b, d_abs=d_abs):
            row = _marginal_at(model, pop, mu, (a, b), scheme)
            return abs(row[b] - row[a]) - d_abs

        for i in range(len(grid) - 1):
            if gap[i] * gap[i + 1] < 0:
                root = brentq(null_gap, grid[i], grid[i + 1], xtol=ROOT_XTOL)
                crossings.append(NullCrossing(float(root), (a, b), bool(gap[i + 1] > 0)))

    return SweepResult("intercept", grid, pairs, cond, marg, cond_order, orders, tuple(switches),
                       tuple(crossings), scheme, direction, tuple(notes))


def null_distance_threshold(sweep: SweepResult, pair: Pair) -> float | None:
    """Smallest intercept above which |Delta| > |d| for the rest of the sweep.

    None when |Delta| is not above |d| at the top of the grid.
    """
    if pair not in sweep.marginal:
        raise ValidationError(f"pair {pair} is not part of the sweep")
    gap = np.abs(sweep.marginal[pair]) - np.abs(sweep.conditional[pair])
    if gap[-1] <= 0:
        return None
    ups = [c.value for c in sweep.null_crossings if c.pair == pair and c.upward]
    downs = [c.value for c in sweep.null_crossings if c.pair == pair and not c.upward]
    if not ups:
        return float(sweep.values[0])
    last_up = max(ups)
    if downs and max(downs) > last_up:
        return None
    return last_up


def intercept_from_baseline_risk(model: OutcomeModel, pop: Population, k0: str, target: float,
                                 scheme: IntegrationScheme | None = None, tol: float = 1e-10) -> float:
    """The intercept at which treatment ``k0`` has average event probability ``target``.

    Closed forms for the identity and log links; otherwise Brent's method on
    a bracket grown geometrically around the covariate-mean guess.
    """
    model.check_treatment(k0)
    target = float(target)
    if not 0.0 < target < 1.0:
        raise ValidationError(f"target baseline risk must lie in (0, 1), got {target}", path="target")
    scheme = scheme or default_scheme(pop.covariates)
    link = model.link
    base = model.with_intercept(0.0)

    if link is LinkFunction.IDENTITY:
        rest = expect(pop.covariates, lambda X: linear_predictor(base, k0, X, 0.0), scheme)
        mu = target - rest
    elif link is LinkFunction.LOG:
        scale = expect(pop.covariates, lambda X: np.exp(linear_predictor(base, k0, X, 0.0)), scheme)
        mu = math.log(target) - math.log(scale)
    else:
        def f(mu):
            return average_probability(model, pop.with_intercept(mu), k0, scheme) - target

        guess = link.forward(target) - linear_predictor(base, k0, pop.covariates.mean(), 0.0)
        width = 1.0
        lo, hi = guess - width, guess + width
        for _ in range(60):
            f_lo, f_hi = f(lo), f(hi)
            if f_lo <= 0.0 <= f_hi:
                break
            width *= 2.0
            lo, hi = guess - width, guess + width
        else:
            raise ConvergenceError(f"could not bracket an intercept for baseline risk {target}")
        mu = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)

    achieved = average_probability(model, pop.with_intercept(mu), k0, scheme)
    if abs(achieved - target) > tol:
        raise ConvergenceError(
            f"intercept {mu!r} gives baseline risk {achieved!r}, not {target!r} within {tol}")
    return float(mu)


@dataclass(frozen=True, eq=False)
class SharedEMReport:
    shared: tuple[str, ...]
    constant_pairs: Mapping[Pair, float]
    crossing_capable: tuple[Pair, ...]
    x_grid: np.ndarray
    individual_effects: Mapping[Pair, np.ndarray]
    probabilities: Mapping[str, np.ndarray]
    conflict: ConflictReport

    def to_dict(self) -> dict:
        return {
            "shared": list(self.shared),
            "constant_pairs": {f"{a}{b}": v for (a, b), v in self.constant_pairs.items()},
            "crossing_capable": [f"{a}{b}" for a, b in self.crossing_capable],
            "x": self.x_grid.tolist(),
            "gamma": {f"{a}{b}": v.tolist() for (a, b), v in self.individual_effects.items()},
            "probability": {k: v.tolist() for k, v in self.probabilities.items()},
            "conflict": self.conflict.to_dict(),
        }


def shared_em_scenario(model: OutcomeModel, pop: Population, shared: Sequence[str] | None = None,
                       scheme: IntegrationScheme | None = None, x_points: int = 201,
                       direction: Direction | str = Direction.LOWER_IS_BETTER) -> SharedEMReport:
    """Analyse a model under the shared effect-modifier assumption.

    ``shared`` names treatments declared to have identical interaction
    coefficients (default: every non-reference treatment). Pairs within the
    shared set have covariate-free individual effects; pairs whose
    interactions differ are reported as able to cross.
    """
    shared = tuple(shared) if shared is not None else model.treatments[1:]
    for k in shared:
        model.check_treatment(k)
    for k in shared[1:]:
        if not np.array_equal(model.interaction(k), model.interaction(shared[0])):
            raise ValidationError(
                f"treatments {shared[0]!r} and {k!r} are declared shared but have different interactions",
                path="shared",
            )
    constant = {(a, b): model.effect(b) - model.effect(a) for a, b in itertools.combinations(shared, 2)}
    capable = tuple((a, b) for a, b in itertools.combinations(model.treatments, 2)
                    if not np.array_equal(model.interaction(a), model.interaction(b)))

    if model.dimension != 1:
        x = np.zeros((0,))
        gammas, probs = {}, {}
    else:
        lo, hi = pop.covariates.axis_range(0)
        x = np.linspace(lo, hi, x_points)
        ref = model.reference
        mu = model.effective_intercept(pop)
        gammas = {(ref, k): np.asarray(individual_effect(model, ref, k, x[:, None]))
                  for k in model.treatments[1:]}
        probs = {k: np.asarray(model.link.inverse(linear_predictor(model, k, x[:, None], mu)))
                 for k in model.treatments}
    report = conflict_report(model, pop, None, direction, scheme)
    return SharedEMReport(shared, constant, capable, x, gammas, probs, report)
