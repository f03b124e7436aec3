"""Predict the validity of AI interactions and measure how predictable an ecosystem is."""

from .ecosystem import (
    Dataset, EcosystemHistory, FeatureVector, InteractionRecord, load_history, make_history, write_history_csv,
)
from .envelope import (
    EnvelopeReport, EnvelopeSpec, ParetoPoint, RejectionCurve, aurc, compute_envelope, pareto_frontier,
    rejection_curve,
)
from .errors import FitError, ParseError, SchemaError, ValidationError, ValidityLabError
from .predictors import (
    FamilySpec, Predictor, fit_constant, fit_logistic, fit_majority, fit_tree, make_reactive,
    pre_recorded_adapter, self_estimation_adapter,
)
from .provenance import config_hash
from .scaling import ScalingLawModel, fit_power_law, predict_hypothetical
from .scoring import BRIER, LOG_LOSS, ScoringRule, expected_score, expected_validity, score
from .suites import scenario_suite
from .unpredictability import QProtocol, QReport, estimate_q, estimate_q_memoryless

__version__ = "0.1.0"
