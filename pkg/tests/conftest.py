import math

import pytest

from estimand_lab import (CovariateDistribution, OutcomeModel, Population, Uniform, WeibullPHModel,
                          ContingencyTable)
from estimand_lab.config import bundled_example


@pytest.fixture
def conflict_model():
    """Three-arm logit model whose conditional and marginal rankings disagree."""
    return OutcomeModel("logit", ("A", "B", "C"), 0.0, [-1.0], {"B": [-3.0], "C": [-1.0]}, {"B": -4.0, "C": -3.0})


@pytest.fixture
def uniform_pop():
    return Population(CovariateDistribution.independent(Uniform(-1.0, 1.0)))


@pytest.fixture
def no_em_model(conflict_model):
    return OutcomeModel("logit", ("A", "B", "C"), 0.0, [-1.0], {}, {"B": -4.0, "C": -3.0})


@pytest.fixture
def shared_em_model():
    return OutcomeModel("logit", ("A", "B", "C"), 0.0, [-1.0], {"B": [-4.0], "C": [-4.0]}, {"B": -4.0, "C": -3.0})


def weibull(interactions):
    return WeibullPHModel.build(2.0, ("A", "B", "C"), -1.0, [math.log(0.25)], interactions,
                                {"B": math.log(0.6), "C": math.log(0.5)})


@pytest.fixture
def weibull_prognostic():
    return weibull({})


@pytest.fixture
def weibull_em():
    return weibull({"B": [math.log(0.7)], "C": [math.log(0.9)]})


@pytest.fixture
def table2():
    return ContingencyTable.from_csv(bundled_example("table2.csv"), bundled_example("table2.prevalence.csv"))


ACCEPTANCE_LOG: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LOG


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
