"""Distance-restricted contrastive and abductive explanations.

Explanations are computed through an adversarial-example oracle: a
feature set is a weak CXp when freeing it (and fixing the rest) admits
an adversarial example within the distance bound, and a weak AXp when
fixing it rules every such example out.  The algorithms here only ever
talk to that oracle, so any backend honouring the session contract
plugs in, including external processes speaking the line protocol.
"""

from .core import (CancelToken, ExplanationError, ExplanationProblem,
                   Explanation, ExplanationStats, FeatureSet, FeatureSpace,
                   FiniteSet, Instance, ModelFormatError, NoAdvExample, Norm,
                   OracleAnswer, OracleBackendError, OracleError,
                   OracleProtocolError, OracleQuery, OracleTimeoutError,
                   RealInterval, ResourceLimitError,
                   UnsupportedConfigurationError, check_waxp, check_wcxp,
                   distance, full_feature_set, is_adv_example, is_minimal_axp,
                   is_minimal_cxp, validate_epsilon)
from .enumeration import (ExplanationSets, MapFormula, check_duality,
                          ffa_scores, ffa_support, marco_enumerate)
from .explain import (deletion_cxp, dichotomic_cxp, extract_axp, feat_disjunct,
                      order_features, seed_weak_cxp, swift_cxp)
from .kernels import kernel_backend
from .mincxp import OptimalityCertificate, min_hitting_set, smallest_cxp
from .models import (LinearModel, MlpModel, ModelCapabilityError,
                     PredicateModel, load_instance, load_model, model_from_doc,
                     model_to_doc, save_instance, save_model, score)
from .oracles import (ExhaustiveOracle, ExternalOracle, LatencyOracle,
                      LinearOracle, auto_oracle, linear_min_margin)

__version__ = "0.1.0"

__all__ = [
    "CancelToken", "Explanation", "ExplanationError", "ExplanationProblem",
    "ExplanationSets", "ExplanationStats", "ExhaustiveOracle",
    "ExternalOracle", "FeatureSet", "FeatureSpace", "FiniteSet", "Instance",
    "LatencyOracle", "LinearModel", "LinearOracle", "MapFormula", "MlpModel",
    "ModelCapabilityError", "ModelFormatError", "NoAdvExample", "Norm",
    "OptimalityCertificate", "OracleAnswer", "OracleBackendError",
    "OracleError", "OracleProtocolError", "OracleQuery", "OracleTimeoutError",
    "PredicateModel", "RealInterval", "ResourceLimitError",
    "UnsupportedConfigurationError", "auto_oracle", "check_duality",
    "check_waxp", "check_wcxp", "deletion_cxp", "dichotomic_cxp", "distance",
    "extract_axp", "feat_disjunct", "ffa_scores", "ffa_support",
    "full_feature_set", "is_adv_example", "is_minimal_axp", "is_minimal_cxp",
    "kernel_backend", "linear_min_margin", "load_instance", "load_model",
    "marco_enumerate", "min_hitting_set", "model_from_doc", "model_to_doc",
    "order_features", "save_instance", "save_model", "score", "seed_weak_cxp",
    "smallest_cxp", "swift_cxp", "validate_epsilon",
]
