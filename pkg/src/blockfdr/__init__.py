"""Multiple hypothesis testing under block dependence.

Step-up and single-step procedures that exploit a block structure in
the hypotheses (p-values dependent within blocks, independent across
them), adaptive variants driven by block-aware null-count estimation,
a reproducible Monte Carlo engine for their error rates and power, and
numerical verification of the supporting mathematics.
"""

from .core import (
    BlockLayout,
    PValueMatrix,
    TestOutcome,
    TruthAssignment,
    bh,
    bonferroni,
    false_rejections,
    stepup,
)
from .estimators import (
    EstimatorSpec,
    lambda_threshold,
    n0_block,
    n0_storey,
    r_lambda,
)
from .procedures import (
    adaptive_bh,
    adaptive_bonferroni,
    bky_adaptive_bh,
    block_pvalues,
    two_stage_bh,
)
from .simulation import (
    MethodStats,
    SimConfig,
    SimReport,
    generate,
    normal_cdf,
    run_mc,
    run_replications,
    truth_layout,
)

__version__ = "0.1.0"

__all__ = [
    "BlockLayout",
    "PValueMatrix",
    "TestOutcome",
    "TruthAssignment",
    "stepup",
    "bh",
    "bonferroni",
    "false_rejections",
    "EstimatorSpec",
    "r_lambda",
    "n0_storey",
    "n0_block",
    "lambda_threshold",
    "block_pvalues",
    "two_stage_bh",
    "adaptive_bh",
    "adaptive_bonferroni",
    "bky_adaptive_bh",
    "SimConfig",
    "SimReport",
    "MethodStats",
    "truth_layout",
    "generate",
    "normal_cdf",
    "run_replications",
    "run_mc",
    "__version__",
]
