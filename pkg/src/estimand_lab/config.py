"""JSON analysis configurations: schema validation, cross-checks and construction.

The schema ships with the package (``schema/config.schema.json``). Numbers
in coefficient positions may be written as ``{"log": x}``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .binary import AveragingMode, NetBenefitSpec
from .covariates import Bernoulli, CovariateDistribution, FinitePoints, Population, Uniform
from .errors import ScenarioMismatchError, ValidationError
from .integrate import IntegrationScheme, SchemeKind
from .model import Direction, OutcomeModel
from .oracle import OracleConfig
from .survival import TimeGrid, WeibullPHModel

EXAMPLES_PREFIX = "examples/"


@lru_cache(maxsize=1)
def config_schema() -> dict:
    return json.loads(resources.files("estimand_lab").joinpath("schema/config.schema.json").read_text())


def bundled_example(name: str) -> Path:
    """Filesystem path of a bundled example file."""
    path = Path(str(resources.files("estimand_lab").joinpath("examples", name)))
    if not path.exists():
        raise ValidationError(f"no bundled example named {name!r}", path="config")
    return path


def resolve_path(path: str | Path) -> Path:
    """Use ``path`` as given if it exists; ``examples/<name>`` otherwise falls back to bundled data."""
    p = Path(path)
    if p.exists():
        return p
    text = str(path).replace("\\", "/")
    if text.startswith(EXAMPLES_PREFIX):
        return bundled_example(text[len(EXAMPLES_PREFIX):])
    raise ValidationError(f"file not found: {path}", path="config")


def content_hash(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _number(value, path: str) -> float:
    if isinstance(value, Mapping):
        return math.log(value["log"])
    out = float(value)
    if not math.isfinite(out):
        raise ValidationError("numbers must be finite", path=path)
    return out


def _vector(values, path: str) -> list[float]:
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(values)]


def _json_path(error: jsonschema.ValidationError) -> str:
    parts = []
    for p in error.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else ("." if parts else "") + str(p))
    return "".join(parts) or "<root>"


def validate_document(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ValidationError(f"schema violation: {err.message}", path=_json_path(err))


@dataclass(frozen=True, eq=False)
class AnalysisConfig:
    """A validated configuration with its constructed domain objects."""

    document: Mapping[str, Any]
    config_hash: str
    source: Path | None = None
    model: OutcomeModel | None = None
    survival_model: WeibullPHModel | None = None
    population: Population | None = None
    treatments: tuple[str, ...] | None = None
    direction: Direction = Direction.LOWER_IS_BETTER
    scheme: IntegrationScheme | None = None
    analysis: str | None = None
    sweep_values: tuple[float, ...] | None = None
    time_grid: TimeGrid = field(default_factory=TimeGrid.default)
    shapes: tuple[float, ...] = (0.75, 1.0, 2.0, 3.0)
    intercepts: tuple[float, ...] = (-2.0, -1.0, 0.0)
    shared: tuple[str, ...] | None = None
    oracle: OracleConfig = field(default_factory=OracleConfig)
    figure_x_points: int = 201
    figure_intercepts: tuple[float, ...] = (-4.0, -2.0, 0.0, 2.0, 4.0)
    net_benefit: NetBenefitSpec | None = None
    table_paths: tuple[Path, Path | None] | None = None
    haldane: bool = False

    @property
    def is_survival(self) -> bool:
        return self.survival_model is not None

    def require_binary(self, what: str) -> OutcomeModel:
        if self.model is None or self.is_survival:
            raise ScenarioMismatchError(f"{what} needs a binary-outcome (glm) model", path="model.type")
        return self.model

    def require_survival(self, what: str) -> WeibullPHModel:
        if self.survival_model is None:
            raise ScenarioMismatchError(f"{what} needs a weibull_ph model", path="model.type")
        return self.survival_model

    def base_model(self) -> OutcomeModel:
        if self.survival_model is not None:
            return self.survival_model.coefficients
        if self.model is None:
            raise ScenarioMismatchError("this analysis needs a model section", path="model")
        return self.model


def _covariates(pop_doc: Mapping) -> CovariateDistribution:
    if "empirical" in pop_doc and pop_doc.get("covariates"):
        raise ValidationError("give either covariates or empirical rows, not both", path="population")
    if "empirical" in pop_doc:
        try:
            return CovariateDistribution.empirical(pop_doc["empirical"])
        except ValidationError as exc:
            raise ValidationError(exc.message, path="population.empirical") from None
    marginals = []
    for i, c in enumerate(pop_doc.get("covariates", [])):
        try:
            if c["type"] == "uniform":
                marginals.append(Uniform(c["lo"], c["hi"]))
            elif c["type"] == "bernoulli":
                marginals.append(Bernoulli(c["prevalence"]))
            else:
                marginals.append(FinitePoints(tuple(c["values"]), tuple(c["weights"])))
        except ValidationError as exc:
            raise ValidationError(exc.message, path=f"population.covariates[{i}]") from None
    return CovariateDistribution.independent(*marginals)


def _scheme(doc: Mapping | None) -> IntegrationScheme | None:
    if doc is None:
        return None
    kwargs = {k: doc[k] for k in ("nodes", "points", "scramble_seed", "tolerance") if k in doc}
    return IntegrationScheme(SchemeKind(doc["kind"]), **kwargs)


def _time_grid(doc: Mapping | None) -> TimeGrid:
    if not doc:
        return TimeGrid.default()
    if "times" in doc:
        return TimeGrid(tuple(doc["times"]))
    lo, hi, n = doc.get("lo", 0.01), doc.get("hi", 3.0), doc.get("points", 200)
    if not lo < hi:
        raise ValidationError("time grid needs lo < hi", path="survival.grid")
    return TimeGrid.linear(lo, hi, n) if doc.get("spacing") == "linear" else TimeGrid.log_spaced(lo, hi, n)


def _sweep_values(doc: Mapping | None) -> tuple[float, ...] | None:
    if not doc:
        return None
    if "values" in doc:
        return tuple(float(v) for v in doc["values"])
    if {"lo", "hi"} <= set(doc):
        if not doc["lo"] < doc["hi"]:
            raise ValidationError("sweep needs lo < hi", path="sweep")
        return tuple(np.linspace(doc["lo"], doc["hi"], doc.get("points", 101)))
    raise ValidationError("sweep needs values, or lo and hi", path="sweep")


def build_config(doc: Mapping[str, Any], config_hash: str | None = None, source: Path | None = None) -> AnalysisConfig:
    """Validate ``doc`` against the schema, cross-check references and build domain objects."""
    validate_document(doc)
    if config_hash is None:
        config_hash = content_hash(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode())
    kw: dict[str, Any] = {"document": doc, "config_hash": config_hash, "source": source}

    if "model" in doc:
        m = doc["model"]
        kind = m.get("type", "glm")
        coefs = dict(
            treatments=tuple(m["treatments"]),
            intercept=_number(m.get("intercept", 0.0), "model.intercept"),
            prognostic=_vector(m.get("prognostic", []), "model.prognostic"),
            interactions={k: _vector(v, f"model.interactions.{k}") for k, v in m.get("interactions", {}).items()},
            treatment_effects={k: _number(v, f"model.treatment_effects.{k}")
                               for k, v in m.get("treatment_effects", {}).items()},
        )
        if kind == "glm":
            if "shape" in m:
                raise ValidationError("shape only applies to weibull_ph models", path="model.shape")
            if "link" not in m:
                raise ValidationError("glm models need a link", path="model.link")
            kw["model"] = OutcomeModel(m["link"], **coefs)
        else:
            if "link" in m and m["link"] != "log":
                raise ValidationError("weibull_ph models act on the log-hazard scale", path="model.link")
            if "shape" not in m:
                raise ValidationError("weibull_ph models need a shape", path="model.shape")
            kw["survival_model"] = WeibullPHModel.build(_number(m["shape"], "model.shape"), **coefs)
        base = kw.get("model") or kw["survival_model"].coefficients

        pop_doc = doc.get("population", {})
        intercept = _number(pop_doc["intercept"], "population.intercept") if "intercept" in pop_doc else None
        pop = Population(_covariates(pop_doc), intercept)
        if pop.dimension != base.dimension:
            raise ValidationError(
                f"population has {pop.dimension} covariates but the model has {base.dimension} coefficients",
                path="population.covariates")
        kw["population"] = pop

        for key in ("treatments", "shared"):
            if key in doc:
                for t in doc[key]:
                    if t not in base.treatments:
                        raise ValidationError(f"undefined treatment {t!r}", path=key)
                kw[key] = tuple(doc[key])
        if "net_benefit" in doc:
            nb = doc["net_benefit"]
            for t in nb["coefficients"]:
                if t not in base.treatments:
                    raise ValidationError(f"undefined treatment {t!r}", path="net_benefit.coefficients")
            kw["net_benefit"] = NetBenefitSpec({k: tuple(v) for k, v in nb["coefficients"].items()},
                                               AveragingMode(nb.get("mode", "individual_level")))
    elif any(k in doc for k in ("population", "treatments", "shared", "net_benefit")):
        raise ValidationError("model section is required", path="model")

    if "direction" in doc:
        kw["direction"] = Direction.parse(doc["direction"])
    kw["scheme"] = _scheme(doc.get("scheme"))
    kw["analysis"] = doc.get("analysis")
    kw["sweep_values"] = _sweep_values(doc.get("sweep"))
    surv = doc.get("survival", {})
    kw["time_grid"] = _time_grid(surv.get("grid"))
    if "shapes" in surv:
        kw["shapes"] = tuple(surv["shapes"])
    if "intercepts" in surv:
        kw["intercepts"] = tuple(surv["intercepts"])
    if "oracle" in doc:
        kw["oracle"] = OracleConfig(**doc["oracle"])
    figs = doc.get("figures", {})
    if "x_points" in figs:
        kw["figure_x_points"] = figs["x_points"]
    if "intercepts" in figs:
        kw["figure_intercepts"] = tuple(figs["intercepts"])
    if "table" in doc:
        t = doc["table"]
        base_dir = source.parent if source is not None else Path(".")

        def locate(name):
            p = base_dir / name
            return p if p.exists() else resolve_path(name)

        kw["table_paths"] = (locate(t["counts"]), locate(t["prevalence"]) if "prevalence" in t else None)
        kw["haldane"] = t.get("haldane", False)
    return AnalysisConfig(**kw)


def load_config(path: str | Path) -> AnalysisConfig:
    """Read, validate and build a JSON configuration file."""
    p = resolve_path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read {p}: {exc.strerror}", path="config") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc.msg} at line {exc.lineno}", path="config") from None
    try:
        return build_config(doc, content_hash(raw), p)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed configuration: {exc}", path="config") from None
