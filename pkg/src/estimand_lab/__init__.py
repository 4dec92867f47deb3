"""Conditional and marginal treatment-effect estimands from a known outcome model."""

from .binary import (AveragingMode, EstimandReport, NetBenefitSpec, Ranking, average_probability,
                     estimand_report, expected_net_benefit, individual_conditional_effect, individual_probability,
                     population_conditional_effect, population_marginal_effect, rank_treatments)
from .contingency import (Cell, ContingencyTable, StratifiedPolicy, contingency_report, marginal_or,
                          optimal_stratified_policy, population_conditional_or, saturated_model,
                          subgroup_conditional_or)
from .covariates import Bernoulli, CovariateDistribution, EmpiricalSample, FinitePoints, Population, Uniform
from .decision import (ConflictReport, SweepResult, baseline_risk_sweep, conflict_report,
                       intercept_from_baseline_risk, null_distance_threshold, shared_em_scenario)
from .errors import (ConvergenceError, DimensionError, DomainError, EstimandError, IntegrationError,
                     ScenarioMismatchError, SchemeMismatchError, SingularityError, UnknownTreatmentError,
                     ValidationError, ZeroCellError)
from .integrate import IntegrationScheme, SchemeKind, default_scheme, expect, expect_grid
from .links import Collapsibility, LinkFunction, classify_collapsibility
from .model import Direction, OutcomeModel, ccf, individual_effect, linear_predictor
from .oracle import OracleConfig, oracle_estimands, oracle_survival
from .survival import (SurvivalGrid, TimeGrid, WeibullPHModel, conditional_hazard, conditional_log_hr,
                       conditional_survival, detect_hr_crossings, marginal_hazard, marginal_hazard_ratio_curve,
                       marginal_survival, survival_grid)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
