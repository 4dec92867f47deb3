"""Odds ratios and stratified decisions on treatment x subgroup count tables.

All odds ratios are formed in exact rational arithmetic from the integer
counts and converted to float once, at the end.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .binary import Ranking, rank_treatments
from .covariates import Bernoulli, CovariateDistribution, Population
from .errors import ValidationError, ZeroCellError
from .links import LinkFunction
from .model import Direction, OutcomeModel

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class Cell:
    events: int
    non_events: int

    def __post_init__(self):
        for name in ("events", "non_events"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.events + self.non_events == 0:
            raise ValidationError("a cell needs at least one individual")

    @property
    def total(self) -> int:
        return self.events + self.non_events


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Event counts for each (treatment, subgroup) with subgroup prevalences.

    The first treatment is the reference.
    """

    treatments: tuple[str, ...]
    subgroups: tuple[str, ...]
    prevalence: Mapping[str, Fraction]
    counts: Mapping[tuple[str, str], Cell]

    def __post_init__(self):
        treatments = tuple(str(t) for t in self.treatments)
        subgroups = tuple(str(s) for s in self.subgroups)
        if not treatments or len(set(treatments)) != len(treatments):
            raise ValidationError("treatments must be non-empty and unique", path="treatments")
        if not subgroups or len(set(subgroups)) != len(subgroups):
            raise ValidationError("subgroups must be non-empty and unique", path="subgroups")
        prevalence = {}
        for s in subgroups:
            if s not in self.prevalence:
                raise ValidationError(f"no prevalence for subgroup {s!r}", path=f"prevalence.{s}")
            p = Fraction(self.prevalence[s])
            if not 0 <= p <= 1:
                raise ValidationError(f"prevalence of {s!r} must lie in [0, 1]", path=f"prevalence.{s}")
            prevalence[s] = p
        extra = set(self.prevalence) - set(subgroups)
        if extra:
            raise ValidationError(f"prevalence given for unknown subgroups {sorted(extra)}", path="prevalence")
        if sum(prevalence.values()) != 1:
            raise ValidationError(f"prevalences sum to {float(sum(prevalence.values()))!r}, not 1",
                                  path="prevalence")
        counts = {}
        for t, s in itertools.product(treatments, subgroups):
            if (t, s) not in self.counts:
                raise ValidationError(f"missing counts for treatment {t!r}, subgroup {s!r}",
                                      path=f"counts[{t},{s}]")
            c = self.counts[(t, s)]
            counts[(t, s)] = c if isinstance(c, Cell) else Cell(*c)
        extra = set(self.counts) - set(counts)
        if extra:
            raise ValidationError(f"counts given for undeclared cells {sorted(extra)}", path="counts")
        object.__setattr__(self, "treatments", treatments)
        object.__setattr__(self, "subgroups", subgroups)
        object.__setattr__(self, "prevalence", prevalence)
        object.__setattr__(self, "counts", counts)

    @property
    def reference(self) -> str:
        return self.treatments[0]

    def check_treatment(self, k: str) -> str:
        if k not in self.treatments:
            raise ValidationError(f"unknown treatment {k!r}; table has {list(self.treatments)}", path="treatment")
        return k

    def check_subgroup(self, s: str) -> str:
        if s not in self.subgroups:
            raise ValidationError(f"unknown subgroup {s!r}; table has {list(self.subgroups)}", path="subgroup")
        return s

    def pooled(self, k: str) -> Cell:
        self.check_treatment(k)
        return Cell(sum(self.counts[(k, s)].events for s in self.subgroups),
                    sum(self.counts[(k, s)].non_events for s in self.subgroups))

    def restricted(self, treatments: Sequence[str]) -> "ContingencyTable":
        for k in treatments:
            self.check_treatment(k)
        keep = tuple(treatments)
        return ContingencyTable(keep, self.subgroups, self.prevalence,
                                {(t, s): c for (t, s), c in self.counts.items() if t in keep})

    @classmethod
    def from_csv(cls, path: str | Path, prevalence_path: str | Path | None = None) -> "ContingencyTable":
        """Read ``treatment,subgroup,events,non_events`` rows plus a ``subgroup,prevalence`` table.

        The prevalence table defaults to ``<stem>.prevalence.csv`` next to
        ``path``. Prevalences are parsed exactly, so ``0.75`` and ``3/4``
        are the same value.
        """
        path = Path(path)
        if prevalence_path is None:
            prevalence_path = path.with_name(path.stem + ".prevalence.csv")
        rows = _read_csv(path, ("treatment", "subgroup", "events", "non_events"))
        treatments: list[str] = []
        subgroups: list[str] = []
        counts: dict[tuple[str, str], Cell] = {}
        for i, row in enumerate(rows):
            t, s = row["treatment"].strip(), row["subgroup"].strip()
            if (t, s) in counts:
                raise ValidationError(f"duplicate row for ({t}, {s})", path=f"{path.name}:row {i + 2}")
            try:
                counts[(t, s)] = Cell(int(row["events"]), int(row["non_events"]))
            except ValueError as exc:
                raise ValidationError(f"bad counts: {exc}", path=f"{path.name}:row {i + 2}") from None
            if t not in treatments:
                treatments.append(t)
            if s not in subgroups:
                subgroups.append(s)
        prevalence = {}
        for i, row in enumerate(_read_csv(Path(prevalence_path), ("subgroup", "prevalence"))):
            try:
                prevalence[row["subgroup"].strip()] = Fraction(row["prevalence"].strip())
            except ValueError:
                raise ValidationError(f"bad prevalence {row['prevalence']!r}",
                                      path=f"{Path(prevalence_path).name}:row {i + 2}") from None
        return cls(tuple(treatments), tuple(subgroups), prevalence, counts)

    def counts_echo(self) -> list[dict]:
        return [{"treatment": t, "subgroup": s, "events": c.events, "non_events": c.non_events}
                for (t, s), c in self.counts.items()]


def _read_csv(path: Path, columns: tuple[str, ...]) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = tuple(h.strip() for h in (reader.fieldnames or ()))
            if header != columns:
                raise ValidationError(f"expected header {','.join(columns)}, got {','.join(header)}",
                                      path=path.name)
            return [{k.strip(): v for k, v in row.items()} for row in reader]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}", path=str(path)) from None


def _odds_ratio(num: Cell, den: Cell, cells: tuple[tuple[str, str | None], tuple[str, str | None]],
                haldane: bool) -> Fraction:
    """(num.events / num.non_events) / (den.events / den.non_events), exactly."""
    values = [Fraction(num.events), Fraction(num.non_events), Fraction(den.events), Fraction(den.non_events)]
    if any(v == 0 for v in values):
        if not haldane:
            zero = 0 if values[0] == 0 or values[1] == 0 else 1
            raise ZeroCellError(f"zero cell for {cells[zero]}; odds ratio undefined (enable the +0.5 correction)",
                                cells[zero])
        values = [v + HALF for v in values]
    a, b, c, d = values
    return (a / b) / (c / d)


def _odds(cell: Cell, where: tuple[str, str | None], haldane: bool) -> Fraction:
    e, n = Fraction(cell.events), Fraction(cell.non_events)
    if e == 0 or n == 0:
        if not haldane:
            raise ZeroCellError(f"zero cell for {where}; odds undefined", where)
        e, n = e + HALF, n + HALF
    return e / n


def marginal_or_exact(table: ContingencyTable, a: str, b: str, haldane: bool = False) -> Fraction:
    if a == b:
        table.check_treatment(a)
        return Fraction(1)
    return _odds_ratio(table.pooled(b), table.pooled(a), ((b, None), (a, None)), haldane)


def marginal_or(table: ContingencyTable, a: str, b: str, haldane: bool = False) -> float:
    """Odds ratio of b vs a after pooling counts across subgroups."""
    return float(marginal_or_exact(table, a, b, haldane))


def subgroup_conditional_or_exact(table: ContingencyTable, a: str, b: str, subgroup: str,
                                  haldane: bool = False) -> Fraction:
    table.check_treatment(a)
    table.check_treatment(b)
    table.check_subgroup(subgroup)
    if a == b:
        return Fraction(1)
    return _odds_ratio(table.counts[(b, subgroup)], table.counts[(a, subgroup)],
                       ((b, subgroup), (a, subgroup)), haldane)


def subgroup_conditional_or(table: ContingencyTable, a: str, b: str, subgroup: str,
                            haldane: bool = False) -> float:
    """Odds ratio of b vs a within one subgroup."""
    return float(subgroup_conditional_or_exact(table, a, b, subgroup, haldane))


def population_conditional_log_or(table: ContingencyTable, a: str, b: str, haldane: bool = False) -> float:
    """Prevalence-weighted mean of subgroup log odds ratios."""
    terms = []
    for s in table.subgroups:
        w = table.prevalence[s]
        if w == 0:
            continue
        ratio = subgroup_conditional_or_exact(table, a, b, s, haldane)
        # math.log accepts arbitrarily large ints, so split the ratio
        terms.append(float(w) * (math.log(ratio.numerator) - math.log(ratio.denominator)))
    return math.fsum(terms)


def population_conditional_or(table: ContingencyTable, a: str, b: str, haldane: bool = False) -> float:
    """exp of the prevalence-weighted mean subgroup log odds ratio."""
    return math.exp(population_conditional_log_or(table, a, b, haldane))


@dataclass(frozen=True)
class StratifiedPolicy:
    """A treatment choice per subgroup and its achieved odds ratios vs the reference."""

    assignment: Mapping[str, str]
    reference: str
    direction: Direction
    events: int
    non_events: int
    marginal_or: float
    conditional_or: float
    subgroup_or: Mapping[str, float]

    def is_constant(self) -> bool:
        return len(set(self.assignment.values())) == 1

    def to_dict(self) -> dict:
        return {
            "assignment": dict(self.assignment),
            "reference": self.reference,
            "direction": self.direction.value,
            "events": self.events,
            "non_events": self.non_events,
            "marginal_or": self.marginal_or,
            "conditional_or": self.conditional_or,
            "subgroup_or": dict(self.subgroup_or),
        }


def evaluate_policy(table: ContingencyTable, assignment: Mapping[str, str],
                    direction: Direction | str = Direction.LOWER_IS_BETTER,
                    haldane: bool = False) -> StratifiedPolicy:
    """Pool the cells chosen by ``assignment`` and contrast them with the reference arm."""
    direction = Direction.parse(direction)
    ref = table.reference
    for s in table.subgroups:
        if s not in assignment:
            raise ValidationError(f"policy assigns no treatment to subgroup {s!r}", path="assignment")
        table.check_treatment(assignment[s])
    chosen = [table.counts[(assignment[s], s)] for s in table.subgroups]
    pooled = Cell(sum(c.events for c in chosen), sum(c.non_events for c in chosen))
    marg = _odds_ratio(pooled, table.pooled(ref), (("policy", None), (ref, None)), haldane)
    sub = {s: subgroup_conditional_or_exact(table, ref, assignment[s], s, haldane) for s in table.subgroups}
    log_cond = math.fsum(float(table.prevalence[s]) * math.log(sub[s])
                         for s in table.subgroups if table.prevalence[s] != 0)
    return StratifiedPolicy(
        assignment=dict(assignment),
        reference=ref,
        direction=direction,
        events=pooled.events,
        non_events=pooled.non_events,
        marginal_or=float(marg),
        conditional_or=math.exp(log_cond),
        subgroup_or={s: float(v) for s, v in sub.items()},
    )


def optimal_stratified_policy(table: ContingencyTable, direction: Direction | str = Direction.LOWER_IS_BETTER,
                              haldane: bool = False) -> StratifiedPolicy:
    """Per subgroup, the treatment with the lowest (or highest) event odds.

    Exact ties go to the earlier-declared treatment.
    """
    direction = Direction.parse(direction)
    sign = 1 if direction is Direction.LOWER_IS_BETTER else -1
    assignment = {}
    for s in table.subgroups:
        odds = [(sign * _odds(table.counts[(k, s)], (k, s), haldane), i, k) for i, k in enumerate(table.treatments)]
        assignment[s] = min(odds)[2]
    return evaluate_policy(table, assignment, direction, haldane)


def table_rankings(table: ContingencyTable, direction: Direction | str = Direction.LOWER_IS_BETTER,
                   haldane: bool = False) -> tuple[Ranking, Ranking]:
    """(conditional, marginal) rankings from log odds ratios vs the reference."""
    direction = Direction.parse(direction)
    ref = table.reference
    cond = {k: population_conditional_log_or(table, ref, k, haldane) for k in table.treatments}
    marg = {k: math.log(marginal_or(table, ref, k, haldane)) for k in table.treatments}
    return rank_treatments(cond, direction), rank_treatments(marg, direction)


def contingency_report(table: ContingencyTable, direction: Direction | str = Direction.LOWER_IS_BETTER,
                       haldane: bool = False) -> dict:
    direction = Direction.parse(direction)
    ref = table.reference
    others = [k for k in table.treatments if k != ref]
    cond_rank, marg_rank = table_rankings(table, direction, haldane)
    policy = optimal_stratified_policy(table, direction, haldane)
    return {
        "reference": ref,
        "direction": direction.value,
        "haldane_correction": haldane,
        "arithmetic": "exact rational, single final conversion",
        "counts": table.counts_echo(),
        "prevalence": {s: str(p) for s, p in table.prevalence.items()},
        "marginal_or": {k: marginal_or(table, ref, k, haldane) for k in others},
        "subgroup_conditional_or": {
            k: {s: subgroup_conditional_or(table, ref, k, s, haldane) for s in table.subgroups} for k in others
        },
        "population_conditional_or": {k: population_conditional_or(table, ref, k, haldane) for k in others},
        "conditional_ranking": list(cond_rank.order),
        "marginal_ranking": list(marg_rank.order),
        "rankings_agree": cond_rank.order == marg_rank.order,
        "policy": policy.to_dict(),
    }


def saturated_model(table: ContingencyTable) -> tuple[OutcomeModel, Population]:
    """Logit model with one Bernoulli covariate reproducing every cell's event frequency.

    Needs exactly two subgroups; the second is coded x = 1.
    """
    if len(table.subgroups) != 2:
        raise ValidationError("a saturated single-covariate model needs exactly two subgroups", path="subgroups")
    s0, s1 = table.subgroups

    def lo(k, s):
        c = table.counts[(k, s)]
        if c.events == 0 or c.non_events == 0:
            raise ZeroCellError("saturated model needs non-zero cells", (k, s))
        return math.log(c.events) - math.log(c.non_events)

    ref = table.reference
    intercept = lo(ref, s0)
    slope = lo(ref, s1) - intercept
    effects = {k: lo(k, s0) - intercept for k in table.treatments}
    interactions = {k: [lo(k, s1) - lo(k, s0) - slope] for k in table.treatments}
    effects[ref] = 0.0
    interactions[ref] = [0.0]
    model = OutcomeModel(LinkFunction.LOGIT, table.treatments, intercept, [slope], interactions, effects)
    pop = Population(CovariateDistribution.independent(Bernoulli(float(table.prevalence[s1]))))
    return model, pop
