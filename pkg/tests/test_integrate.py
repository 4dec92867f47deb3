import numpy as np
import pytest
from scipy import integrate as spi
from scipy.special import expit

from estimand_lab import (Bernoulli, CovariateDistribution, FinitePoints, IntegrationError, IntegrationScheme,
                          SchemeMismatchError, Uniform, ValidationError, default_scheme, expect, expect_grid)
from estimand_lab.integrate import quadrature_rule, refinement_error

UNI = CovariateDistribution.independent(Uniform(-1, 1))
BER = CovariateDistribution.independent(Bernoulli(0.25))


def test_indicator_expectation():
    assert expect(BER, lambda X: (X[:, 0] == 1).astype(float), IntegrationScheme.exact_discrete()) == 0.25


def test_second_moment():
    assert expect(UNI, lambda X: X[:, 0] ** 2, IntegrationScheme.gauss_legendre(16)) == pytest.approx(1 / 3, abs=1e-14)


def test_symmetric_reference_arm_probability():
    assert expect(UNI, lambda X: expit(-X[:, 0]), IntegrationScheme.gauss_legendre(64)) == pytest.approx(0.5, abs=1e-15)


def test_expect_grid_examples():
    out = expect_grid(UNI, lambda X: np.column_stack([X[:, 0], X[:, 0] ** 2]), IntegrationScheme.gauss_legendre(16))
    assert out == pytest.approx([0.0, 1 / 3], abs=1e-14)
    out = expect_grid(CovariateDistribution.independent(Bernoulli(0.5)),
                      lambda X: np.column_stack([X[:, 0], 1 - X[:, 0]]), IntegrationScheme.exact_discrete())
    assert list(out) == [0.5, 0.5]
    c = np.array([1.5, -2.0, 7.0])
    out = expect_grid(UNI, lambda X: np.tile(c, (len(X), 1)))
    assert out == pytest.approx(c, abs=1e-14)


def test_gauss_legendre_exact_for_polynomials_below_twice_nodes():
    n = 8
    for deg in range(2 * n):
        exact = 0.0 if deg % 2 else 1.0 / (deg + 1)
        got = expect(UNI, lambda X, d=deg: X[:, 0] ** d, IntegrationScheme.gauss_legendre(n))
        assert got == pytest.approx(exact, abs=1e-14)


def test_matches_adaptive_quadrature_on_shifted_interval():
    dist = CovariateDistribution.independent(Uniform(0.5, 3.0))
    f = lambda x: np.exp(-x) * np.sin(3 * x)
    ref = spi.quad(f, 0.5, 3.0, epsabs=1e-14)[0] / 2.5
    assert expect(dist, lambda X: f(X[:, 0])) == pytest.approx(ref, abs=1e-12)


def test_mixed_product_distribution():
    dist = CovariateDistribution.independent(Uniform(-1, 1), Bernoulli(0.3))
    f = lambda X: expit(X[:, 0] + 2 * X[:, 1])
    ref = 0.7 * spi.quad(lambda x: expit(x), -1, 1)[0] / 2 + 0.3 * spi.quad(lambda x: expit(x + 2), -1, 1)[0] / 2
    assert expect(dist, f) == pytest.approx(ref, abs=1e-12)


def test_sobol_close_to_tensor_rule():
    dist = CovariateDistribution.independent(Uniform(-1, 1), Uniform(0, 2), Uniform(-2, 0))
    assert default_scheme(dist).kind.value == "qmc_sobol"
    f = lambda X: expit(X.sum(axis=1))
    gl = expect(dist, f, IntegrationScheme.gauss_legendre(24))
    qmc = expect(dist, f, IntegrationScheme.qmc_sobol(2**14, scramble_seed=3))
    assert qmc == pytest.approx(gl, abs=1e-5)


def test_empirical_mean():
    dist = CovariateDistribution.empirical([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    assert default_scheme(dist).kind.value == "empirical_mean"
    assert expect(dist, lambda X: X[:, 0] * X[:, 1]) == pytest.approx((0 + 6 + 20) / 3, abs=1e-14)


def test_scheme_mismatch_errors():
    with pytest.raises(SchemeMismatchError):
        expect(UNI, lambda X: X[:, 0], IntegrationScheme.exact_discrete())
    with pytest.raises(SchemeMismatchError):
        expect(UNI, lambda X: X[:, 0], IntegrationScheme.empirical_mean())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_integrand():
    with pytest.raises(IntegrationError):
        expect(UNI, lambda X: np.log(X[:, 0] - X[:, 0]))


def test_scheme_validation():
    with pytest.raises(ValidationError):
        IntegrationScheme.gauss_legendre(1)
    with pytest.raises(ValidationError):
        IntegrationScheme.qmc_sobol(1000)
    with pytest.raises(ValidationError):
        IntegrationScheme.gauss_legendre(8, tolerance=0.0)


def test_default_schemes():
    assert default_scheme(BER).kind.value == "exact_discrete"
    assert default_scheme(CovariateDistribution.independent(FinitePoints((1, 2), (0.5, 0.5)))).kind.value \
        == "exact_discrete"
    s = default_scheme(CovariateDistribution.independent(Uniform(0, 1), Uniform(0, 1)))
    assert (s.kind.value, s.nodes) == ("gauss_legendre", 64)


def test_linearity():
    f = lambda X: expit(2 * X[:, 0] - 0.3)
    g = lambda X: np.cos(X[:, 0])
    a, b = 2.5, -1.25
    lhs = expect(UNI, lambda X: a * f(X) + b * g(X))
    assert lhs == pytest.approx(a * expect(UNI, f) + b * expect(UNI, g), abs=1e-12)


def test_refinement_monotone_beyond_eight_nodes():
    f = lambda X: expit(-4 - 3 * X[:, 0])
    errs = [refinement_error(UNI, f, IntegrationScheme.gauss_legendre(n)) for n in (8, 16, 32)]
    floor = 1e-15
    assert errs[0] > errs[1] or errs[1] <= floor
    assert errs[1] > errs[2] or errs[2] <= floor


def test_rule_is_cached_and_read_only():
    a = quadrature_rule(UNI, IntegrationScheme.gauss_legendre(64))
    b = quadrature_rule(UNI, IntegrationScheme.gauss_legendre(64))
    assert a[0] is b[0]
    with pytest.raises(ValueError):
        a[1][0] = 1.0
    assert a[1].sum() == pytest.approx(1.0, abs=1e-14)


def test_deterministic_across_threads(monkeypatch):
    from concurrent.futures import ThreadPoolExecutor
    f = lambda X: expit(-1 - 2 * X[:, 0])
    serial = [expect(UNI, f) for _ in range(8)]
    with ThreadPoolExecutor(4) as pool:
        threaded = list(pool.map(lambda _: expect(UNI, f), range(8)))
    assert len({*serial, *threaded}) == 1


def test_sobol_exact_for_affine_integrands():
    dist = CovariateDistribution.independent(Uniform(-1, 2), Uniform(0, 0.5), Uniform(-3, -1), Bernoulli(0.3))
    f = lambda X: 0.7 + X @ np.array([1.5, -2.0, 0.25, 3.0])
    exact = 0.7 + 1.5 * 0.5 - 2.0 * 0.25 + 0.25 * -2.0 + 3.0 * 0.3
    for seed in (0, 1, 7):
        assert expect(dist, f, IntegrationScheme.qmc_sobol(2**10, scramble_seed=seed)) == pytest.approx(exact,
                                                                                                      abs=1e-14)
