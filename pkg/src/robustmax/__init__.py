"""Robust utility maximization with non-concave utilities on finite scenario spaces."""

from .diagram import ensemble_verify, evaluate_diagram
from .improve import improve
from .instance import Instance, generate_instance, load_instance
from .payoff import BudgetSpec, RandomizedPayoff, expected_utility, worst_case_utility
from .solve import infsup_value, maximize_robust_concave, supinf_value
from .space import Density, MeasureFamily, PricingMeasure, ScenarioSpace, quantile_coupling
from .utility import ConcaveCurve, UtilityCurve, cap, concavify, gap_interval

__version__ = "0.1.0"
