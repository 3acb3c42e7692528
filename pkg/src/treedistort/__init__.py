"""Certified lower bounds and numeric upper bounds for embedding binary trees into l_p."""

__version__ = "0.1.0"

from .bourgain_bound import (  # noqa: E402
    LowerBoundResult,
    f_iterate,
    f_step,
    lower_bound_asymptotic,
    lower_bound_iterative,
    m_from_n,
)
from .convexity import (  # noqa: E402
    ConvexityProfile,
    SpaceSpec,
    convexity_profile,
    modulus_analytic,
    modulus_numeric,
    norm_value,
)
from .fork_engine import (  # noqa: E402
    ExtractionTrace,
    Fork,
    ForkCertificate,
    ProofTrace,
    certify_chain,
    check_fork,
    extract_half,
    fork_bound,
    fork_constant,
    replay_lemma_proof,
)
from .metric_core import (  # noqa: E402
    BinaryTree,
    DistortionReport,
    Embedding,
    build_tree,
    evaluate_distortion,
    normalize_embedding,
    restrict_to_selection,
    tree_distance,
)
from .optimizer import (  # noqa: E402
    OptimizationResult,
    OptimizerConfig,
    multi_start,
    optimize_embedding,
    random_embedding,
)

__all__ = [
    "BinaryTree", "ConvexityProfile", "DistortionReport", "Embedding", "ExtractionTrace",
    "Fork", "ForkCertificate", "LowerBoundResult", "OptimizationResult", "OptimizerConfig",
    "ProofTrace", "SpaceSpec", "build_tree", "certify_chain", "check_fork",
    "convexity_profile", "evaluate_distortion", "extract_half", "f_iterate", "f_step",
    "fork_bound", "fork_constant", "lower_bound_asymptotic", "lower_bound_iterative",
    "m_from_n", "modulus_analytic", "modulus_numeric", "multi_start", "norm_value",
    "normalize_embedding", "optimize_embedding", "random_embedding", "replay_lemma_proof",
    "restrict_to_selection", "tree_distance",
]
