"""Curve data behind each figure, as CSV-ready tables.

Column one is the x-axis variable (covariate, intercept or time); every other
column is one curve. Comment lines starting with ``#`` carry provenance and
located crossings.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .config import AnalysisConfig
from .decision import baseline_risk_sweep, shared_em_scenario
from .errors import ScenarioMismatchError
from .integrate import default_scheme
from .model import individual_effect, linear_predictor
from .survival import hazard_ratio_sweep, survival_grid

FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7")
CROSSING_XTOL = 1e-12


def format_number(v: float) -> str:
    return f"{float(v):.12g}"


@dataclass(frozen=True, eq=False)
class FigureData:
    figure: str
    columns: tuple[str, ...]
    values: np.ndarray
    comments: tuple[str, ...] = field(default=())

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def to_csv(self) -> str:
        out = io.StringIO()
        for c in self.comments:
            out.write(f"# {c}\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.values:
            out.write(",".join(format_number(v) for v in row) + "\n")
        return out.getvalue()


def parse_figure_csv(text: str) -> tuple[list[str], tuple[str, ...], np.ndarray]:
    """Inverse of :meth:`FigureData.to_csv`: (comments, columns, values)."""
    lines = text.splitlines()
    comments = [ln[2:] for ln in lines if ln.startswith("# ")]
    body = [ln for ln in lines if not ln.startswith("#")]
    columns = tuple(body[0].split(","))
    values = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]])
    return comments, columns, values


def _provenance(cfg: AnalysisConfig, figure: str, scheme) -> list[str]:
    out = [f"figure: {figure}", f"config_hash: {cfg.config_hash}"]
    if scheme is not None:
        desc = scheme.describe()
        out.append("scheme: " + ", ".join(f"{k}={v}" for k, v in desc.items()))
    return out


def _covariate_axis(cfg: AnalysisConfig, figure: str) -> np.ndarray:
    model = cfg.base_model()
    if model.dimension != 1:
        raise ScenarioMismatchError(f"{figure} plots against a single covariate; the model has {model.dimension}",
                                    path="model.prognostic")
    lo, hi = cfg.population.covariates.axis_range(0)
    return np.linspace(lo, hi, cfg.figure_x_points)


def _line_crossings(f: Callable[[float], float], lo: float, hi: float, n: int = 512) -> list[float]:
    xs = np.linspace(lo, hi, n)
    ys = np.array([f(x) for x in xs])
    roots = [float(xs[i]) for i in np.flatnonzero(ys == 0)]
    for i in np.flatnonzero(ys[:-1] * ys[1:] < 0):
        roots.append(float(brentq(f, xs[i], xs[i + 1], xtol=CROSSING_XTOL)))
    return sorted(roots)


def _treatments(cfg: AnalysisConfig) -> tuple[str, ...]:
    return cfg.treatments or cfg.base_model().treatments


def figure_individual_effects(cfg: AnalysisConfig) -> FigureData:
    """Individual link-scale effects of each treatment vs the reference over x."""
    model = cfg.require_binary("fig1")
    x = _covariate_axis(cfg, "fig1")
    ts = _treatments(cfg)
    ref = ts[0]
    cols = [np.asarray(individual_effect(model, ref, k, x[:, None])) for k in ts[1:]]
    comments = _provenance(cfg, "fig1", None)
    for b, c in itertools.combinations(ts[1:], 2):
        for root in _line_crossings(lambda v, b=b, c=c: individual_effect(model, b, c, [v]), x[0], x[-1]):
            comments.append(f"crossing: gamma_{ref}{b} = gamma_{ref}{c} at x = {format_number(root)}")
    for k in ts[1:]:
        for root in _line_crossings(lambda v, k=k: individual_effect(model, ref, k, [v]), x[0], x[-1]):
            comments.append(f"null crossing: gamma_{ref}{k} = 0 at x = {format_number(root)}")
    return FigureData("fig1", ("x",) + tuple(f"gamma_{ref}{k}" for k in ts[1:]),
                      np.column_stack([x] + cols), tuple(comments))


def figure_baseline_risk(cfg: AnalysisConfig) -> FigureData:
    """Marginal and conditional effects vs the reference over a baseline-risk sweep."""
    model = cfg.require_binary("fig2")
    sweep = baseline_risk_sweep(model, cfg.population, cfg.sweep_values, _treatments(cfg), cfg.direction,
                                cfg.scheme)
    names = [f"Delta_{a}{b}" for a, b in sweep.pairs] + [f"d_{a}{b}" for a, b in sweep.pairs]
    data = [sweep.marginal[p] for p in sweep.pairs] + [sweep.conditional[p] for p in sweep.pairs]
    comments = _provenance(cfg, "fig2", sweep.scheme)
    for s in sweep.rank_switches:
        comments.append(f"marginal rank switch: {s.pair[0]}/{s.pair[1]} at mu = {format_number(s.value)}")
    for c in sweep.null_crossings:
        side = "exceeds" if c.upward else "falls below"
        comments.append(f"|Delta_{c.pair[0]}{c.pair[1]}| {side} |d| at mu = {format_number(c.value)}")
    return FigureData("fig2", ("mu",) + tuple(names), np.column_stack([sweep.values] + data), tuple(comments))


def figure_probabilities_by_intercept(cfg: AnalysisConfig) -> FigureData:
    """Individual event probabilities over x for several intercepts."""
    model = cfg.require_binary("fig3")
    x = _covariate_axis(cfg, "fig3")
    names, data = [], []
    for mu in cfg.figure_intercepts:
        for k in _treatments(cfg):
            names.append(f"pi_{k}[mu={format_number(mu)}]")
            data.append(np.asarray(model.link.inverse(linear_predictor(model, k, x[:, None], mu))))
    return FigureData("fig3", ("x",) + tuple(names), np.column_stack([x] + data),
                      tuple(_provenance(cfg, "fig3", None)))


def figure_shared_effect_modifiers(cfg: AnalysisConfig) -> FigureData:
    """Individual effects vs the reference and event probabilities over x."""
    model = cfg.require_binary("fig4")
    _covariate_axis(cfg, "fig4")
    rep = shared_em_scenario(model, cfg.population, cfg.shared, cfg.scheme, cfg.figure_x_points, cfg.direction)
    names = [f"gamma_{a}{b}" for a, b in rep.individual_effects] + [f"pi_{k}" for k in rep.probabilities]
    data = list(rep.individual_effects.values()) + list(rep.probabilities.values())
    comments = _provenance(cfg, "fig4", None)
    comments.append("shared: " + ",".join(rep.shared))
    for (a, b), v in rep.constant_pairs.items():
        comments.append(f"constant: gamma_{a}{b} = {format_number(v)}")
    comments.append("crossing-capable: " + ",".join(f"{a}{b}" for a, b in rep.crossing_capable))
    return FigureData("fig4", ("x",) + tuple(names), np.column_stack([rep.x_grid] + data), tuple(comments))


def _survival(cfg: AnalysisConfig, figure: str):
    model = cfg.require_survival(figure)
    return model, survival_grid(model, cfg.population, _treatments(cfg), cfg.time_grid, cfg.scheme)


def figure_marginal_survival(cfg: AnalysisConfig) -> FigureData:
    _, sg = _survival(cfg, "fig5")
    names = [f"S_{k}" for k in sg.treatments]
    data = [sg.marginal_survival[k] for k in sg.treatments]
    return FigureData("fig5", ("t",) + tuple(names), np.column_stack([sg.grid.as_array()] + data),
                      tuple(_provenance(cfg, "fig5", sg.scheme)))


def figure_hazard_ratios(cfg: AnalysisConfig) -> FigureData:
    _, sg = _survival(cfg, "fig6")
    t = sg.grid.as_array()
    pairs = list(sg.hazard_ratio)
    names = [f"marginal_HR_{a}{b}" for a, b in pairs] + [f"conditional_HR_{a}{b}" for a, b in pairs]
    data = [sg.hazard_ratio[p] for p in pairs] + [np.full(len(t), np.exp(sg.conditional_log_hr[p])) for p in pairs]
    comments = _provenance(cfg, "fig6", sg.scheme)
    for (p, q), ivs in sg.crossings.items():
        for iv in ivs:
            for tc in iv.crossing_times():
                comments.append(f"crossing: marginal_HR_{p[0]}{p[1]} = marginal_HR_{q[0]}{q[1]} "
                                f"at t = {format_number(tc)}")
    return FigureData("fig6", ("t",) + tuple(names), np.column_stack([t] + data), tuple(comments))


def figure_baseline_hazard_sweeps(cfg: AnalysisConfig) -> FigureData:
    """Marginal and conditional HR curves as the shape and intercept vary."""
    model = cfg.require_survival("fig7")
    pop = cfg.population
    ts = _treatments(cfg)
    ref = ts[0]
    scheme = cfg.scheme or default_scheme(pop.covariates)
    t = cfg.time_grid.as_array()
    names, data = [], []
    for variable, values, label in (("shape", cfg.shapes, "nu"), ("intercept", cfg.intercepts, "mu")):
        for k in ts[1:]:
            sweep = hazard_ratio_sweep(model, pop, variable, values, ref, k, cfg.time_grid, scheme)
            for v in values:
                names.append(f"marginal_HR_{ref}{k}[{label}={format_number(v)}]")
                data.append(sweep["curves"][float(v)])
                names.append(f"conditional_HR_{ref}{k}[{label}={format_number(v)}]")
                data.append(np.full(len(t), np.exp(sweep["conditional_log_hr"][float(v)])))
    return FigureData("fig7", ("t",) + tuple(names), np.column_stack([t] + data),
                      tuple(_provenance(cfg, "fig7", scheme)))


_BUILDERS = {
    "fig1": figure_individual_effects,
    "fig2": figure_baseline_risk,
    "fig3": figure_probabilities_by_intercept,
    "fig4": figure_shared_effect_modifiers,
    "fig5": figure_marginal_survival,
    "fig6": figure_hazard_ratios,
    "fig7": figure_baseline_hazard_sweeps,
}


def emit_figure_data(cfg: AnalysisConfig, figure: str) -> FigureData:
    if figure not in _BUILDERS:
        raise ScenarioMismatchError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}", path="figure")
    return _BUILDERS[figure](cfg)
