import math
from fractions import Fraction

import pytest

from estimand_lab import (Cell, ContingencyTable, ValidationError, ZeroCellError, estimand_report, marginal_or,
                          optimal_stratified_policy, population_conditional_or, population_conditional_effect, saturated_model, subgroup_conditional_or)
from estimand_lab.contingency import (contingency_report, evaluate_policy, marginal_or_exact,
                                      subgroup_conditional_or_exact, table_rankings)


def test_marginal_or_matches_table(table2):
    assert marginal_or_exact(table2, "A", "B") == Fraction(131, 869) / Fraction(358, 642)
    assert round(marginal_or(table2, "A", "B"), 2) == 0.27
    assert round(marginal_or(table2, "A", "C"), 2) == 0.33
    assert marginal_or(table2, "B", "B") == 1.0


def test_subgroup_or_matches_table(table2):
    assert subgroup_conditional_or_exact(table2, "A", "B", "0") == Fraction(89, 661) / Fraction(202, 548)
    assert round(subgroup_conditional_or(table2, "A", "B", "0"), 2) == 0.37
    assert round(subgroup_conditional_or(table2, "A", "D", "1"), 2) == 0.01
    assert subgroup_conditional_or(table2, "C", "C", "1") == 1.0


def test_population_conditional_or_matches_table(table2):
    assert round(population_conditional_or(table2, "A", "B"), 2) == 0.28
    assert round(population_conditional_or(table2, "A", "C"), 2) == 0.10
    assert round(population_conditional_or(table2, "A", "D"), 2) == 0.24
    ors = [subgroup_conditional_or(table2, "A", "B", s) for s in ("0", "1")]
    assert population_conditional_or(table2, "A", "B") == pytest.approx(
        math.exp(0.75 * math.log(ors[0]) + 0.25 * math.log(ors[1])), rel=1e-15)


def test_rank_conflict(table2):
    cond, marg = table_rankings(table2)
    assert marg.order[0] == "B"
    assert cond.order[0] == "C"
    assert cond.position("D") < cond.position("B")


def test_optimal_policy(table2):
    pol = optimal_stratified_policy(table2)
    assert pol.assignment == {"0": "C", "1": "D"}
    assert (pol.events, pol.non_events) == (19, 981)
    assert round(pol.marginal_or, 2) == 0.03
    assert round(pol.conditional_or, 2) == 0.04
    assert not pol.is_constant()


def test_policy_restricted_to_two_treatments(table2):
    pol = optimal_stratified_policy(table2.restricted(["A", "B"]))
    assert pol.assignment == {"0": "B", "1": "B"}
    assert pol.is_constant()


def test_dominating_treatment_gives_constant_policy():
    t = ContingencyTable(("A", "B"), ("0", "1"), {"0": Fraction(1, 2), "1": Fraction(1, 2)},
                         {("A", "0"): (10, 10), ("A", "1"): (20, 5), ("B", "0"): (5, 15), ("B", "1"): (10, 15)})
    assert optimal_stratified_policy(t).is_constant()


def test_policy_beats_every_constant_policy(table2):
    best = optimal_stratified_policy(table2)
    for k in table2.treatments:
        const = evaluate_policy(table2, {s: k for s in table2.subgroups})
        assert best.events <= const.events


def test_higher_is_better_policy(table2):
    pol = optimal_stratified_policy(table2, "higher_is_better")
    # A has the highest event odds in both subgroups
    assert pol.assignment == {"0": "A", "1": "A"}


def test_zero_cell_errors_and_haldane():
    t = ContingencyTable(("A", "B"), ("0",), {"0": 1}, {("A", "0"): (0, 10), ("B", "0"): (3, 7)})
    with pytest.raises(ZeroCellError) as err:
        marginal_or(t, "A", "B")
    assert err.value.path == "counts[A,*]"
    with pytest.raises(ZeroCellError) as err:
        subgroup_conditional_or(t, "A", "B", "0")
    assert err.value.path == "counts[A,0]"
    got = marginal_or_exact(t, "A", "B", haldane=True)
    assert got == (Fraction(7, 2) / Fraction(15, 2)) / (Fraction(1, 2) / Fraction(21, 2))


def test_table_validation():
    with pytest.raises(ValidationError):
        ContingencyTable(("A",), ("0", "1"), {"0": Fraction(1, 2), "1": Fraction(1, 3)},
                         {("A", "0"): (1, 1), ("A", "1"): (1, 1)})
    with pytest.raises(ValidationError):
        ContingencyTable(("A",), ("0",), {"0": 1}, {})
    with pytest.raises(ValidationError):
        Cell(-1, 3)
    with pytest.raises(ValidationError):
        Cell(0, 0)


def test_csv_round_trip_and_echo(tmp_path, table2):
    assert table2.counts_echo()[0] == {"treatment": "A", "subgroup": "0", "events": 202, "non_events": 548}
    assert table2.prevalence == {"0": Fraction(3, 4), "1": Fraction(1, 4)}
    (tmp_path / "t.csv").write_text("treatment,subgroup,events,non_events\nA,0,1,2\nB,0,3,4\n")
    (tmp_path / "t.prevalence.csv").write_text("subgroup,prevalence\n0,1\n")
    t = ContingencyTable.from_csv(tmp_path / "t.csv")
    assert marginal_or_exact(t, "A", "B") == Fraction(3, 4) / Fraction(1, 2)
    (tmp_path / "bad.csv").write_text("treatment,subgroup,events\nA,0,1\n")
    (tmp_path / "bad.prevalence.csv").write_text("subgroup,prevalence\n0,1\n")
    with pytest.raises(ValidationError):
        ContingencyTable.from_csv(tmp_path / "bad.csv")


def test_saturated_model_agreement(table2):
    model, pop = saturated_model(table2)
    rep = estimand_report(model, pop)
    for k in ("B", "C", "D"):
        assert math.exp(rep.marginal[("A", k)]) == pytest.approx(marginal_or(table2, "A", k), abs=1e-9)
        assert math.exp(population_conditional_effect(model, pop, "A", k)) == pytest.approx(
            population_conditional_or(table2, "A", k), abs=1e-9)


def test_report_contents(table2):
    rep = contingency_report(table2)
    assert not rep["rankings_agree"]
    assert rep["policy"]["assignment"] == {"0": "C", "1": "D"}
    assert len(rep["counts"]) == 8
