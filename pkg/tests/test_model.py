import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import expit, logit

from estimand_lab import (Bernoulli, CovariateDistribution, DimensionError, DomainError, FinitePoints,
                          OutcomeModel, Population, Uniform, UnknownTreatmentError, ValidationError, ccf,
                          individual_effect, linear_predictor)


def test_linear_predictor_examples(conflict_model):
    assert linear_predictor(conflict_model, "B", [0.0]) == -4.0
    assert linear_predictor(conflict_model, "A", [0.0]) == conflict_model.intercept
    # 0 + 1 * (-1 - 1) + (-3)
    assert linear_predictor(conflict_model, "C", [1.0]) == -5.0


def test_linear_predictor_vectorised(conflict_model):
    x = np.array([[-1.0], [0.0], [1.0]])
    out = linear_predictor(conflict_model, "B", x)
    assert out.shape == (3,)
    assert np.array_equal(out, [0.0, -4.0, -8.0])


def test_linear_predictor_errors(conflict_model):
    with pytest.raises(UnknownTreatmentError):
        linear_predictor(conflict_model, "Z", [0.0])
    with pytest.raises(DimensionError):
        linear_predictor(conflict_model, "B", [0.0, 1.0])


@given(st.floats(-5, 5), st.floats(-3, 3))
def test_linear_predictor_additive_in_treatment_effect(delta, x):
    base = OutcomeModel("logit", ("A", "B"), 0.3, [0.7], {"B": [1.1]}, {"B": -0.4})
    shifted = OutcomeModel("logit", ("A", "B"), 0.3, [0.7], {"B": [1.1]}, {"B": -0.4 + delta})
    assert linear_predictor(shifted, "B", [x]) - linear_predictor(base, "B", [x]) == pytest.approx(delta, abs=1e-12)


def test_reference_must_be_zero():
    with pytest.raises(ValidationError) as err:
        OutcomeModel("logit", ("A", "B"), 0.0, [1.0], {"A": [0.5]}, {})
    assert err.value.path == "model.interactions.A"
    with pytest.raises(ValidationError):
        OutcomeModel("logit", ("A", "B"), 0.0, [1.0], {}, {"A": 1.0})


def test_unknown_treatment_in_maps():
    with pytest.raises(UnknownTreatmentError) as err:
        OutcomeModel("logit", ("A", "B"), 0.0, [1.0], {"D": [0.5]}, {})
    assert err.value.path == "model.interactions"
    with pytest.raises(UnknownTreatmentError) as err:
        OutcomeModel("logit", ("A", "B"), 0.0, [1.0], {}, {"D": 0.5})
    assert err.value.path == "model.treatment_effects"


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        OutcomeModel("logit", ("A", "B"), 0.0, [1.0], {"B": [0.5, 0.1]}, {})


def test_covariate_free_model():
    m = OutcomeModel("logit", ("A", "B"), 0.5, [], {}, {"B": -1.0})
    assert m.dimension == 0
    assert linear_predictor(m, "B", []) == -0.5


def test_model_is_immutable(conflict_model):
    with pytest.raises(Exception):
        conflict_model.intercept = 1.0
    with pytest.raises(TypeError):
        conflict_model.interactions["B"] = [0.0]
    with pytest.raises(ValueError):
        conflict_model.prognostic[0] = 2.0


def test_ccf_examples(conflict_model):
    assert ccf(conflict_model, "A", "A", 0.37, [0.2]) == 0.37
    assert ccf(conflict_model, "A", "B", 0.5, [0.0]) == pytest.approx(expit(logit(0.5) - 4), abs=1e-15)
    assert ccf(conflict_model, "A", "B", 0.5, [0.0]) == pytest.approx(0.0180, abs=5e-5)


def test_ccf_identity_range_error():
    m = OutcomeModel("identity", ("A", "B"), 0.0, [], {}, {"B": 0.3})
    with pytest.raises(DomainError):
        ccf(m, "A", "B", 0.9, [])


@given(st.floats(0.001, 0.999), st.floats(-1, 1))
def test_ccf_inverse_pair(p, x):
    m = OutcomeModel("logit", ("A", "B", "C"), 0.0, [-1.0], {"B": [-3.0], "C": [-1.0]}, {"B": -4.0, "C": -3.0})
    forward = ccf(m, "B", "C", p, [x])
    assert ccf(m, "C", "B", forward, [x]) == pytest.approx(p, abs=1e-10)


@pytest.mark.parametrize("link, shift", [("identity", 0.1), ("log", -0.7)])
def test_ccf_affine_for_collapsible_links_without_em(link, shift):
    m = OutcomeModel(link, ("A", "B"), 0.0, [0.4], {}, {"B": shift})
    p = np.linspace(0.05, 0.85, 33)
    h = np.array([ccf(m, "A", "B", pi, [0.3]) for pi in p])
    h0 = (h[1] - h[0]) / (p[1] - p[0]) * (0 - p[0]) + h[0]
    ratio = (h - h0) / p
    assert np.max(np.abs(ratio - ratio[0])) < 1e-10


def test_ccf_not_affine_for_logit():
    m = OutcomeModel("logit", ("A", "B"), 0.0, [0.4], {}, {"B": -1.0})
    p = np.linspace(0.05, 0.85, 33)
    h = np.array([ccf(m, "A", "B", pi, [0.0]) for pi in p])
    assert np.max(np.abs(np.diff(h, 2))) > 1e-4


def test_individual_effect_free_of_intercept_and_prognostic(conflict_model):
    other = conflict_model.with_intercept(3.0).with_prognostic([5.0])
    for x in (-1.0, 0.25, 1.0):
        assert individual_effect(other, "B", "C", [x]) == individual_effect(conflict_model, "B", "C", [x])


def test_covariate_validation():
    with pytest.raises(ValidationError):
        Uniform(1.0, 1.0)
    with pytest.raises(ValidationError):
        Bernoulli(1.2)
    with pytest.raises(ValidationError):
        FinitePoints((0.0, 1.0), (0.5, 0.6))
    d = CovariateDistribution.independent(Uniform(-1, 3), Bernoulli(0.25), FinitePoints((1, 2, 5), (0.2, 0.3, 0.5)))
    assert np.allclose(d.mean(), [1.0, 0.25, 0.2 + 0.6 + 2.5])
    assert d.continuous_dims == (0,)
    assert d.axis_range(2) == (1.0, 5.0)


def test_population_intercept_overrides_model(conflict_model, uniform_pop):
    assert conflict_model.effective_intercept(uniform_pop) == conflict_model.intercept
    assert conflict_model.effective_intercept(uniform_pop.with_intercept(2.5)) == 2.5
    with pytest.raises(ValidationError):
        Population(uniform_pop.covariates, math.inf)
