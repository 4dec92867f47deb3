"""Command-line front end.

Exit status is 0 on success, 1 for invalid input and 2 for numerical
failures; errors are written to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .binary import estimand_report, expected_net_benefit
from .config import AnalysisConfig, content_hash, load_config, resolve_path
from .contingency import ContingencyTable, contingency_report
from .decision import baseline_risk_sweep, conflict_report, null_distance_threshold, shared_em_scenario
from .errors import EstimandError, ValidationError
from .figures import FIGURES, emit_figure_data, format_number
from .integrate import IntegrationScheme, SchemeKind, default_scheme
from .model import Direction
from .oracle import oracle_estimands, oracle_survival
from .survival import survival_grid

VERBS = ("report", "sweep", "survival", "contingency", "conflict", "oracle", "figure", "run")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message, path="arguments")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="estimand-lab", description="Conditional and marginal treatment-effect estimands.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for verb in VERBS:
        p = sub.add_parser(verb)
        if verb == "figure":
            p.add_argument("figure_id", choices=FIGURES)
        p.add_argument("--config", required=True, help="JSON config, or a counts CSV for `contingency`")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--scheme", choices=[k.value for k in SchemeKind])
        p.add_argument("--nodes", type=int, help="Gauss-Legendre nodes per continuous dimension")
        p.add_argument("--seed", type=int, help="oracle seed, or Sobol scramble seed")
        p.add_argument("--direction", choices=["lower", "higher"])
        p.add_argument("--format", choices=["json", "csv"], default="csv" if verb == "figure" else "json")
        p.add_argument("--prevalence", help="subgroup prevalence CSV for `contingency`")
        p.add_argument("--draws", type=int, help="oracle draws")
    return parser


def _apply_flags(cfg: AnalysisConfig, args) -> AnalysisConfig:
    changes = {}
    if args.direction:
        changes["direction"] = Direction.parse(args.direction)
    if (args.scheme or args.nodes is not None) and cfg.population is not None:
        base = cfg.scheme or default_scheme(cfg.population.covariates)
        kind = SchemeKind(args.scheme) if args.scheme else base.kind
        scheme = base if base.kind is kind else IntegrationScheme(kind, tolerance=base.tolerance)
        if args.nodes is not None:
            scheme = replace(scheme, nodes=args.nodes)
        if args.seed is not None and kind is SchemeKind.QMC_SOBOL:
            scheme = replace(scheme, scramble_seed=args.seed)
        changes["scheme"] = scheme
    if args.seed is not None or args.draws is not None:
        oracle = cfg.oracle
        if args.seed is not None:
            oracle = replace(oracle, seed=args.seed)
        if args.draws is not None:
            oracle = replace(oracle, draws=args.draws)
        changes["oracle"] = oracle
    return replace(cfg, **changes) if changes else cfg


def _provenance(cfg: AnalysisConfig | None, verb: str, extra: dict | None = None) -> dict:
    out = {"tool": "estimand-lab", "version": __version__, "analysis": verb}
    if cfg is not None:
        out["config_hash"] = cfg.config_hash
        if cfg.source is not None:
            out["config"] = str(cfg.source)
    if extra:
        out.update(extra)
    return out


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _report(cfg: AnalysisConfig, fmt: str) -> tuple[dict, str | None]:
    model = cfg.require_binary("report")
    rep = estimand_report(model, cfg.population, cfg.treatments, cfg.direction, cfg.scheme)
    out = rep.to_dict()
    if cfg.net_benefit is not None:
        out["net_benefit"] = {
            "mode": cfg.net_benefit.mode.value,
            "values": {k: expected_net_benefit(model, cfg.population, cfg.net_benefit, k, rep.scheme)
                       for k in cfg.net_benefit.coefficients},
        }
    text = None
    if fmt == "csv":
        text = _csv(("a", "b", "d", "Delta"), [(p["a"], p["b"], p["d"], p["Delta"]) for p in out["pairs"]])
    return out, text


def _sweep(cfg: AnalysisConfig, fmt: str) -> tuple[dict, str | None]:
    model = cfg.require_binary("sweep")
    res = baseline_risk_sweep(model, cfg.population, cfg.sweep_values, cfg.treatments, cfg.direction, cfg.scheme)
    out = res.to_dict()
    out["null_distance_thresholds"] = {f"{a}{b}": null_distance_threshold(res, (a, b)) for a, b in res.pairs}
    text = _csv(("sweep_value", "pair", "d", "Delta"), res.rows()) if fmt == "csv" else None
    return out, text


def _survival(cfg: AnalysisConfig, fmt: str) -> tuple[dict, str | None]:
    model = cfg.require_survival("survival")
    sg = survival_grid(model, cfg.population, cfg.treatments, cfg.time_grid, cfg.scheme)
    out = sg.to_dict()
    text = None
    if fmt == "csv":
        pairs = list(sg.hazard_ratio)
        header = ["t"] + [f"S_{k}" for k in sg.treatments] + [f"HR_{a}{b}" for a, b in pairs]
        rows = [[t] + [float(sg.marginal_survival[k][i]) for k in sg.treatments]
                + [float(sg.hazard_ratio[p][i]) for p in pairs] for i, t in enumerate(sg.grid.times)]
        text = _csv(header, rows)
    return out, text


def _conflict(cfg: AnalysisConfig, fmt: str) -> tuple[dict, str | None]:
    model = cfg.require_binary("conflict")
    rep = conflict_report(model, cfg.population, cfg.treatments, cfg.direction, cfg.scheme)
    out = rep.to_dict()
    if cfg.shared is not None:
        out["shared_effect_modifiers"] = shared_em_scenario(model, cfg.population, cfg.shared, cfg.scheme,
                                                            cfg.figure_x_points, cfg.direction).to_dict()
    text = None
    if fmt == "csv":
        text = _csv(("a", "b", "d", "Delta", "conflict"),
                    [(s["pair"][0], s["pair"][1], s["d"], s["Delta"], s["conflict"]) for s in out["sign_table"]])
    return out, text


def _oracle(cfg: AnalysisConfig, fmt: str) -> tuple[dict, str | None]:
    if cfg.is_survival:
        res = oracle_survival(cfg.survival_model, cfg.population, cfg.time_grid.times, cfg.treatments, cfg.oracle)
    else:
        res = oracle_estimands(cfg.require_binary("oracle"), cfg.population, cfg.treatments, cfg.oracle)
    out = res.to_dict()
    text = None
    if fmt == "csv" and not cfg.is_survival:
        rows = [(p["a"], p["b"], p["d"]["value"], p["d"]["se"], p["Delta"]["value"], p["Delta"]["se"])
                for p in out["pairs"]]
        text = _csv(("a", "b", "d", "d_se", "Delta", "Delta_se"), rows)
    elif fmt == "csv":
        pairs = list(res.hazard_ratio)
        header = ["t"] + [f"S_{k}" for k in res.treatments] + [f"S_{k}_se" for k in res.treatments] \
            + [f"HR_{a}{b}" for a, b in pairs] + [f"HR_{a}{b}_se" for a, b in pairs]
        rows = [[float(t)] + [float(res.marginal_survival[k][0][i]) for k in res.treatments]
                + [float(res.marginal_survival[k][1][i]) for k in res.treatments]
                + [float(res.hazard_ratio[p][0][i]) for p in pairs]
                + [float(res.hazard_ratio[p][1][i]) for p in pairs] for i, t in enumerate(res.times)]
        text = _csv(header, rows)
    return out, text


def _load_table(args, cfg: AnalysisConfig | None) -> tuple[ContingencyTable, bool]:
    if cfg is not None:
        if cfg.table_paths is None:
            raise ValidationError("contingency needs a table section or a counts CSV", path="table")
        counts, prev = cfg.table_paths
        return ContingencyTable.from_csv(counts, resolve_path(args.prevalence) if args.prevalence else prev), \
            cfg.haldane
    counts = resolve_path(args.config)
    prev = resolve_path(args.prevalence) if args.prevalence else None
    if prev is None:
        default = counts.with_name(counts.stem + ".prevalence.csv")
        prev = default if default.exists() else resolve_path(f"examples/{default.name}")
    return ContingencyTable.from_csv(counts, prev), False


def _contingency(args, cfg: AnalysisConfig | None, fmt: str) -> tuple[dict, str | None]:
    table, haldane = _load_table(args, cfg)
    direction = Direction.parse(args.direction) if args.direction else (
        cfg.direction if cfg is not None else Direction.LOWER_IS_BETTER)
    out = contingency_report(table, direction, haldane)
    text = None
    if fmt == "csv":
        rows = []
        for k, v in out["marginal_or"].items():
            rows.append(("marginal_or", out["reference"], k, "", v))
        for k, by in out["subgroup_conditional_or"].items():
            for s, v in by.items():
                rows.append(("subgroup_conditional_or", out["reference"], k, s, v))
        for k, v in out["population_conditional_or"].items():
            rows.append(("population_conditional_or", out["reference"], k, "", v))
        text = _csv(("quantity", "a", "b", "subgroup", "odds_ratio"), rows)
    return out, text


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, name: str, text: str) -> None:
    if args.out:
        _write_atomic(Path(args.out) / name, text)
    else:
        sys.stdout.write(text)


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    verb = args.verb
    cfg = None
    is_csv_table = verb == "contingency" and str(args.config).lower().endswith(".csv")
    if not is_csv_table:
        cfg = _apply_flags(load_config(args.config), args)
    if verb == "run":
        if cfg.analysis is None:
            raise ValidationError("`run` needs an analysis selector in the config", path="analysis")
        verb = cfg.analysis

    if verb == "figure":
        fig = emit_figure_data(cfg, args.figure_id)
        if args.format == "json":
            doc = {"provenance": _provenance(cfg, f"figure {args.figure_id}"), "comments": list(fig.comments),
                   "columns": list(fig.columns), "values": fig.values.tolist()}
            _emit(args, f"{args.figure_id}.json", json.dumps(doc, indent=2, allow_nan=False) + "\n")
        else:
            _emit(args, f"{args.figure_id}.csv", fig.to_csv())
        return 0

    if verb == "contingency":
        out, text = _contingency(args, cfg, args.format)
        if cfg is None:
            raw = resolve_path(args.config).read_bytes()
            extra = {"config_hash": content_hash(raw), "config": str(resolve_path(args.config))}
            prov = _provenance(None, verb, extra)
        else:
            prov = _provenance(cfg, verb)
    else:
        handler = {"report": _report, "sweep": _sweep, "survival": _survival,
                   "conflict": _conflict, "oracle": _oracle}[verb]
        out, text = handler(cfg, args.format)
        prov = _provenance(cfg, verb)

    if text is not None:
        comment = "".join(f"# {k}: {v}\n" for k, v in prov.items())
        _emit(args, f"{verb}.csv", comment + text)
    else:
        doc = {"provenance": prov, **out}
        _emit(args, f"{verb}.json", json.dumps(doc, indent=2, allow_nan=False) + "\n")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return run(argv)
    except EstimandError as exc:
        sys.stderr.write(json.dumps({"error": exc.to_dict()}) + "\n")
        return exc.exit_code
    except (ArithmeticError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
