import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as spi

from estimand_lab import (CovariateDistribution, IntegrationScheme, Population, SingularityError, TimeGrid,
                          Uniform, ValidationError, WeibullPHModel, conditional_hazard, conditional_log_hr,
                          conditional_survival, detect_hr_crossings, marginal_hazard, marginal_hazard_ratio_curve,
                          marginal_survival, survival_grid)
from estimand_lab.survival import count_crossings, hazard_ratio_sweep

EMPTY = Population(CovariateDistribution.independent())


def no_covariates(shape=2.0, intercept=-1.0):
    return WeibullPHModel.build(shape, ("A", "B"), intercept, [], {}, {"B": math.log(0.6)})


def test_conditional_survival_examples(weibull_prognostic):
    assert conditional_survival(weibull_prognostic, "A", [0.3], 0.0) == 1.0
    m = no_covariates(shape=1.0, intercept=0.0)
    assert conditional_survival(m, "B", [], 1.0) == pytest.approx(math.exp(-0.6), abs=1e-15)
    assert conditional_survival(weibull_prognostic, "A", [0.0], 1.0) == pytest.approx(math.exp(-math.exp(-1)),
                                                                                       abs=1e-15)
    assert conditional_survival(weibull_prognostic, "A", [0.0], 1.0) == pytest.approx(0.6922, abs=5e-5)


def test_conditional_hazard_singular_at_zero_for_shape_below_one():
    with pytest.raises(SingularityError):
        conditional_hazard(no_covariates(shape=0.5), "A", [], 0.0)
    assert conditional_hazard(no_covariates(shape=1.0), "A", [], 0.0) == pytest.approx(math.exp(-1), abs=1e-15)


def test_shape_validation():
    with pytest.raises(ValidationError) as err:
        no_covariates(shape=0.0)
    assert err.value.path == "model.shape"
    with pytest.raises(ValidationError):
        WeibullPHModel.build([1.0, 2.0], ("A", "B"))


def test_time_grid_validation():
    with pytest.raises(ValidationError):
        TimeGrid((1.0,))
    with pytest.raises(ValidationError):
        TimeGrid((0.0, 1.0))
    with pytest.raises(ValidationError):
        TimeGrid((1.0, 1.0, 2.0))
    g = TimeGrid.default()
    assert len(g) == 200 and g.times[0] == pytest.approx(0.01) and g.times[-1] == pytest.approx(3.0)


def test_marginal_survival_without_covariates():
    m = no_covariates()
    t = np.array([0.0, 0.5, 1.0, 2.0])
    assert marginal_survival(m, EMPTY, "B", t) == pytest.approx(
        [conditional_survival(m, "B", [], ti) for ti in t], abs=1e-15)
    assert marginal_survival(m, EMPTY, "A", 0.0) == 1.0


def test_marginal_survival_matches_quadrature(weibull_em, uniform_pop):
    for t in (0.3, 1.0, 2.5):
        ref = spi.quad(lambda x: math.exp(-t**2 * math.exp(-1 + math.log(0.6) + (math.log(0.25) + math.log(0.7)) * x)),
                       -1, 1, epsabs=1e-14)[0] / 2
        assert marginal_survival(weibull_em, uniform_pop, "B", t) == pytest.approx(ref, abs=1e-12)


def test_marginal_hazard_without_covariates():
    m = no_covariates()
    assert marginal_hazard(m, EMPTY, "A", 1.0) == pytest.approx(2 * math.exp(-1), abs=1e-15)
    assert marginal_hazard(m, EMPTY, "A", 1.0) == pytest.approx(0.7358, abs=5e-5)
    for t in (0.1, 1.0, 4.0):
        assert marginal_hazard(m, EMPTY, "B", t) == pytest.approx(conditional_hazard(m, "B", [], t), rel=1e-14)


def test_marginal_hazard_matches_weighted_quadrature(weibull_em, uniform_pop):
    t = 1.3
    rate = lambda x: math.exp(-1 + math.log(0.5) + (math.log(0.25) + math.log(0.9)) * x)
    num = spi.quad(lambda x: math.exp(-t**2 * rate(x)) * 2 * t * rate(x), -1, 1, epsabs=1e-14)[0]
    den = spi.quad(lambda x: math.exp(-t**2 * rate(x)), -1, 1, epsabs=1e-14)[0]
    assert marginal_hazard(weibull_em, uniform_pop, "C", t) == pytest.approx(num / den, rel=1e-11)


def test_hazard_ratio_at_time_zero_without_em(weibull_prognostic, uniform_pop):
    hr = marginal_hazard_ratio_curve(weibull_prognostic, uniform_pop, "A", "B", [1e-6])
    assert hr[0] == pytest.approx(0.6, abs=1e-9)


def test_finite_difference_consistency(weibull_em, uniform_pop):
    t = np.linspace(0.05, 3.0, 400)
    h = 1e-5
    for k in ("A", "B", "C"):
        up = marginal_survival(weibull_em, uniform_pop, k, t + h)
        down = marginal_survival(weibull_em, uniform_pop, k, t - h)
        fd = -(np.log(up) - np.log(down)) / (2 * h)
        exact = marginal_hazard(weibull_em, uniform_pop, k, t)
        assert np.max(np.abs(fd / exact - 1)) < 1e-4


def test_marginal_survival_non_increasing(weibull_em, uniform_pop):
    t = TimeGrid.log_spaced(1e-3, 10, 500).as_array()
    for k in ("A", "B", "C"):
        s = marginal_survival(weibull_em, uniform_pop, k, t)
        assert np.all(np.diff(s) <= 1e-10)
        assert np.all((s > 0) & (s <= 1))


def test_covariate_free_hazard_ratio_constant():
    hr = marginal_hazard_ratio_curve(no_covariates(), EMPTY, "A", "B", TimeGrid.default())
    assert np.max(np.abs(hr - 0.6)) < 1e-10


def test_prognostic_only_hazard_ratio_not_constant(weibull_prognostic, uniform_pop):
    sg = survival_grid(weibull_prognostic, uniform_pop)
    hr_b = sg.hazard_ratio[("A", "B")]
    assert np.ptp(hr_b) > 1e-3
    assert np.all(hr_b > 0)
    assert sg.crossings[(("A", "B"), ("A", "C"))] == []


def test_effect_modification_produces_one_crossing(weibull_em, uniform_pop):
    sg = survival_grid(weibull_em, uniform_pop)
    ivs = sg.crossings[(("A", "B"), ("A", "C"))]
    assert count_crossings(ivs) == 1
    tc = ivs[0].start
    assert 0 < tc <= 3.0
    diff = lambda tt: (marginal_hazard_ratio_curve(weibull_em, uniform_pop, "A", "B", [tt])[0]
                       - marginal_hazard_ratio_curve(weibull_em, uniform_pop, "A", "C", [tt])[0])
    assert abs(diff(tc)) < 1e-10
    assert diff(tc - 1e-3) * diff(tc + 1e-3) < 0


def test_conditional_log_hr_examples(weibull_prognostic, weibull_em, uniform_pop):
    assert conditional_log_hr(weibull_prognostic, uniform_pop, "A", "B") == pytest.approx(math.log(0.6), abs=1e-15)
    assert conditional_log_hr(weibull_em, uniform_pop, "A", "B") == pytest.approx(math.log(0.6), abs=1e-15)
    assert conditional_log_hr(weibull_em, uniform_pop, "B", "B") == 0.0


def test_crossing_detection_examples():
    t = np.linspace(0.1, 1, 10)
    assert detect_hr_crossings(t, t, t) == []
    ivs = detect_hr_crossings(t, 0.55 * np.ones(10), t)
    assert len(ivs) == 1 and not ivs[0].reverts
    assert ivs[0].start == pytest.approx(0.55, abs=1e-12)
    bump = 1 - (t - 0.5) ** 2
    ivs = detect_hr_crossings(np.full(10, 0.9), bump, t)
    assert len(ivs) == 1 and ivs[0].reverts
    with pytest.raises(ValidationError):
        detect_hr_crossings(t, t[:-1], t)


def test_crossing_refinement_tolerance():
    t = np.linspace(0.0, 1.0, 7)
    root = 1 / math.pi
    ivs = detect_hr_crossings(t - root, np.zeros(7), t, refine=lambda s: s - root)
    assert abs(ivs[0].start - root) < 1e-6


def test_sweeps_move_marginal_but_not_conditional(weibull_em, uniform_pop):
    grid = TimeGrid.log_spaced(0.05, 3, 40)
    for variable, values in (("shape", [0.75, 1, 2, 3]), ("intercept", [-2, -1, 0])):
        out = hazard_ratio_sweep(weibull_em, uniform_pop, variable, values, "A", "B", grid)
        cond = list(out["conditional_log_hr"].values())
        assert max(cond) - min(cond) < 1e-12
        curves = list(out["curves"].values())
        assert max(np.max(np.abs(c - curves[0])) for c in curves[1:]) > 1e-3
    with pytest.raises(ValidationError):
        hazard_ratio_sweep(weibull_em, uniform_pop, "scale", [1], "A", "B", grid)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.3, 4.0), st.floats(-3, 1), st.floats(-2, 2), st.floats(-2, 2), st.floats(-1.5, 1.5),
       st.floats(-1, 1))
def test_no_crossings_without_effect_modification(shape, mu, beta1, em, gb, gc):
    model = WeibullPHModel.build(shape, ("A", "B", "C"), mu, [beta1], {"B": [em], "C": [em]}, {"B": gb, "C": gc})
    pop = Population(CovariateDistribution.independent(Uniform(-1, 1)))
    grid = TimeGrid.log_spaced(0.01, 5, 60)
    b = marginal_hazard_ratio_curve(model, pop, "A", "B", grid, IntegrationScheme.gauss_legendre(32))
    c = marginal_hazard_ratio_curve(model, pop, "A", "C", grid, IntegrationScheme.gauss_legendre(32))
    if abs(gb - gc) > 1e-9:
        assert detect_hr_crossings(b, c, grid) == []
